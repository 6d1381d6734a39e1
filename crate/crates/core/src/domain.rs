//! Hostname normalization, syntactic validation, and registrable-domain
//! (eTLD+1) reduction used for all cross-file identity comparisons.

/// Normalize a raw host string: trim surrounding whitespace, lowercase, and
/// strip a single trailing dot. No registrable-domain reduction happens here.
pub fn normalize_host(raw: &str) -> String {
    let trimmed = raw.trim();
    let trimmed = trimmed.strip_suffix('.').unwrap_or(trimmed);
    trimmed.to_ascii_lowercase()
}

/// Conservative syntactic hostname check: nonempty dot-separated labels of
/// `[a-z0-9-]`, no leading or trailing hyphen per label, at least two labels.
/// The input is expected to already be normalized (lowercase, no trailing dot).
pub fn is_valid_hostname(host: &str) -> bool {
    let labels: Vec<&str> = host.split('.').collect();
    if labels.len() < 2 {
        return false;
    }
    labels.iter().all(|label| {
        !label.is_empty()
            && label.len() <= 63
            && !label.starts_with('-')
            && !label.ends_with('-')
            && label
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
    }) && host.len() <= 253
}

/// Reduce a host to its registrable domain (eTLD+1) using the public suffix
/// list. Hosts the list cannot reduce (single labels, invalid syntax) are
/// returned normalized but otherwise untouched, so the function is total.
pub fn registrable(raw: &str) -> String {
    let host = normalize_host(raw);
    match psl::domain_str(&host) {
        Some(root) => root.to_string(),
        None => host,
    }
}

/// True when two hosts share a registrable domain.
pub fn same_site(a: &str, b: &str) -> bool {
    registrable(a) == registrable(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_case_whitespace_and_trailing_dot() {
        assert_eq!(normalize_host("  AdX.Example.  "), "adx.example");
        assert_eq!(normalize_host("plain"), "plain");
    }

    #[test]
    fn hostname_syntax() {
        assert!(is_valid_hostname("adx.example"));
        assert!(is_valid_hostname("a-b.c0.example"));
        assert!(is_valid_hostname("xn--bcher-kva.example"));
        assert!(!is_valid_hostname("example"));
        assert!(!is_valid_hostname("not a domain!!"));
        assert!(!is_valid_hostname("-bad.example"));
        assert!(!is_valid_hostname("bad-.example"));
        assert!(!is_valid_hostname("double..dots"));
        assert!(!is_valid_hostname(""));
        assert!(!is_valid_hostname("caps.EXAMPLE"));
    }

    #[test]
    fn registrable_reduces_subdomains() {
        assert_eq!(registrable("www.a.example"), "a.example");
        assert_eq!(registrable("news.bbc.co.uk"), "bbc.co.uk");
        assert_eq!(registrable("A.Example."), "a.example");
        // single label: nothing to reduce, returned normalized
        assert_eq!(registrable("localhost"), "localhost");
    }

    #[test]
    fn same_site_collapses_www() {
        assert!(same_site("www.pub.example", "pub.example"));
        assert!(!same_site("a.example", "b.example"));
    }
}

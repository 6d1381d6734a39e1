//! Ad-filter rules for classifying network flows.
//!
//! Supports the block-rule subset that matters for URL classification:
//! `||domain^` host anchors, plain substrings, `*` wildcards, and `^`
//! separators. Exception rules, element hiding, and rule options are
//! not matchers we need; they are skipped with a diagnostic so list
//! ingestion stays total.

use regex::RegexSet;

/// A compiled set of filter rules. Matching is case-insensitive, like the
/// ecosystems these lists come from.
#[derive(Debug)]
pub struct FilterRuleSet {
    /// Source pattern per compiled rule, index-aligned with the set.
    patterns: Vec<String>,
    set: RegexSet,
    /// Lines skipped during compilation and why.
    pub diagnostics: Vec<String>,
}

/// Why a line cannot become a matcher (comments and blanks are not rules
/// and are skipped silently).
fn unsupported(line: &str) -> Option<&'static str> {
    if line.starts_with("@@") {
        return Some("exception rules are not supported");
    }
    if line.contains("##") || line.contains("#@#") || line.contains("#?#") {
        return Some("element-hiding rules are not supported");
    }
    if line.contains('$') {
        // A trailing `$option` section; `$` inside an option-less pattern
        // is vanishingly rare in practice, so any `$` is treated as one.
        return Some("rule options are not supported");
    }
    if line.len() > 2 && line.starts_with('/') && line.ends_with('/') {
        // `/.../` is regex syntax only when the body actually uses regex
        // machinery; `/banner/` and friends are ordinary path substrings.
        let body = &line[1..line.len() - 1];
        if body.contains(['\\', '(', ')', '[', ']', '{', '}', '?', '+', '$', '^']) {
            return Some("regex rules are not supported");
        }
    }
    None
}

/// Translate one block rule into an anchored regex, mirroring the
/// conventional interpretation:
///   `||`  start of a hostname (any scheme, any subdomain prefix)
///   `|`   absolute start / end
///   `^`   a separator: any char outside [A-Za-z0-9_-.%], or the URL end
///   `*`   any run of characters
fn rule_to_regex(rule: &str) -> String {
    let mut out = String::new();
    let mut rest = rule;
    if let Some(stripped) = rest.strip_prefix("||") {
        out.push_str(r"^[a-z][a-z0-9+.-]*://(?:[^/?#]*\.)?");
        rest = stripped;
    } else if let Some(stripped) = rest.strip_prefix('|') {
        out.push('^');
        rest = stripped;
    }
    let end_anchor = rest.ends_with('|');
    if end_anchor {
        rest = &rest[..rest.len() - 1];
    }
    for c in rest.chars() {
        match c {
            '*' => out.push_str(".*"),
            '^' => out.push_str(r"(?:[^\w.%-]|$)"),
            c if c.is_ascii_alphanumeric() => out.push(c),
            c => {
                out.push_str(&regex::escape(&c.to_string()));
            }
        }
    }
    if end_anchor {
        out.push('$');
    }
    out
}

impl FilterRuleSet {
    /// Compile a filter list (one rule per line). Never fails: lines that
    /// cannot become matchers are reported in `diagnostics` and skipped.
    pub fn compile(list: &str) -> FilterRuleSet {
        let mut patterns = Vec::new();
        let mut regexes = Vec::new();
        let mut diagnostics = Vec::new();

        for (i, raw) in list.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('!') || line.starts_with('[') {
                continue;
            }
            if let Some(reason) = unsupported(line) {
                diagnostics.push(format!("line {}: {reason}: {line}", i + 1));
                continue;
            }
            let regex = rule_to_regex(line);
            // Validate individually so one bad translation cannot sink the set.
            if let Err(e) = regex::Regex::new(&regex) {
                diagnostics.push(format!("line {}: does not compile: {e}", i + 1));
                continue;
            }
            patterns.push(line.to_string());
            regexes.push(regex);
        }

        let set = regex::RegexSetBuilder::new(&regexes)
            .case_insensitive(true)
            .build()
            .expect("individually validated regexes compile as a set");

        FilterRuleSet {
            patterns,
            set,
            diagnostics,
        }
    }

    /// Number of compiled rules.
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn matches(&self, url: &str) -> bool {
        self.set.is_match(url)
    }

    /// Source patterns of every rule that matches, for evidence trails.
    pub fn matching_patterns(&self, url: &str) -> Vec<&str> {
        self.set
            .matches(url)
            .iter()
            .map(|i| self.patterns[i].as_str())
            .collect()
    }

    pub fn patterns(&self) -> impl Iterator<Item = &str> {
        self.patterns.iter().map(String::as_str)
    }
}

/// True iff any rule in the set matches the URL.
pub fn classify_ad_flow(url: &str, rules: &FilterRuleSet) -> bool {
    rules.matches(url)
}

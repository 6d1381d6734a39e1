//! `adchain` — auditing the programmatic-advertising supply chain from its
//! public disclosures.
//!
//! Workflow: `fetch` crawls ads.txt / sellers.json for a dated snapshot,
//! then `audit`, `pools`, `mine`, `schain`, `diff`, and `brands` each read
//! that snapshot and emit plain JSON/CSV reports; `report` bundles the lot
//! into one summary document.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 when a required
//! input turned out to be empty. Data problems inside otherwise-usable
//! inputs never abort a run; they surface as diagnostics in the reports.

mod commands;
mod config;
mod transport;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use serde_json::json;

use commands::Outcome;

#[derive(Parser)]
#[command(name = "adchain", version, about = "Supply-chain transparency audits for programmatic advertising")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "adchain.toml")]
    config: PathBuf,

    /// Snapshot date to operate on (YYYY-MM-DD).
    #[arg(long, global = true)]
    snapshot_date: Option<String>,

    /// Directory reports are written to.
    #[arg(long, global = true, default_value = "reports")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crawl the disclosure closure for the configured seed publishers.
    Fetch,
    /// Cross-check every publisher and exchange in the snapshot.
    Audit,
    /// Detect shared publisher-ID pools and classify their homogeneity.
    Pools,
    /// Mine HAR captures for publisher/seller ID evidence.
    Mine {
        /// Directory of .har capture files, one page load each.
        har_dir: PathBuf,
    },
    /// Validate SupplyChain payloads against the snapshot's disclosures.
    Schain {
        /// JSON-lines file of {"site": ..., "payload": ...} rows.
        payloads: PathBuf,
    },
    /// Compare exchange populations between two snapshot dates.
    Diff {
        /// Earlier snapshot date (YYYY-MM-DD).
        old_date: String,
        /// Later snapshot date (YYYY-MM-DD).
        new_date: String,
    },
    /// Brand-exposure statistics over observed (publisher, brand) pairs.
    Brands {
        /// Headerless CSV of publisher,brand rows.
        pairs: PathBuf,
    },
    /// Bundle audit, pools, and any sibling reports into one summary.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fetch => "fetch",
            Command::Audit => "audit",
            Command::Pools => "pools",
            Command::Mine { .. } => "mine",
            Command::Schain { .. } => "schain",
            Command::Diff { .. } => "diff",
            Command::Brands { .. } => "brands",
            Command::Report => "report",
        }
    }
}

fn checked_date(date: &str) -> Result<()> {
    NaiveDate::parse_from_str(date, "%Y-%m-%d")
        .with_context(|| format!("bad snapshot date {date:?}, expected YYYY-MM-DD"))?;
    Ok(())
}

/// The snapshot date every command except `diff` operates on.
fn required_date(cli: &Cli) -> Result<&str> {
    match &cli.snapshot_date {
        Some(date) => {
            checked_date(date)?;
            Ok(date)
        }
        None => bail!("--snapshot-date is required for this command"),
    }
}

fn write_run_meta(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    let meta = json!({
        "command": cli.command.name(),
        "snapshot_date": cli.snapshot_date,
        "generated_at": chrono::Utc::now().to_rfc3339(),
        "tool": "adchain",
        "version": env!("CARGO_PKG_VERSION"),
    });
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    std::fs::write(cli.out.join("run_meta.json"), text)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome> {
    let config = config::load(&cli.config)?;
    let out = cli.out.as_path();

    let outcome = match &cli.command {
        Command::Fetch => commands::fetch(&config, required_date(cli)?, out)?,
        Command::Audit => commands::audit(&config, required_date(cli)?, out)?,
        Command::Pools => commands::pools(&config, required_date(cli)?, out)?,
        Command::Mine { har_dir } => commands::mine(&config, required_date(cli)?, har_dir, out)?,
        Command::Schain { payloads } => {
            commands::schain(&config, required_date(cli)?, payloads, out)?
        }
        Command::Diff { old_date, new_date } => {
            checked_date(old_date)?;
            checked_date(new_date)?;
            commands::diff(&config, old_date, new_date, out)?
        }
        Command::Brands { pairs } => commands::brands(&config, required_date(cli)?, pairs, out)?,
        Command::Report => commands::report(&config, required_date(cli)?, out)?,
    };
    if matches!(outcome, Outcome::Done) {
        write_run_meta(cli)?;
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Empty(what)) => {
            eprintln!("nothing to do: {what}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

//! Command-line front end. Exit codes: 0 success, 1 internal fault,
//! 2 configuration error, 3 incomparable reports or failed precondition.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;

use crate::config::ConfigDocument;
use crate::error::Error;
use crate::report::{scaling_csv, write_bundle};
use crate::workflow::{campaign_loop, gain, run_baseline, run_scaling, CampaignOutcome, CampaignReport, TerminationCause};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCOMPARABLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "latentdrive", version, about = "Latent-space steered adaptive ensemble simulation")]
pub struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// JSON configuration; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (falls back to LATENTDRIVE_OUT).
    #[arg(long, env = "LATENTDRIVE_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the adaptive campaign.
    Run(RunArgs),
    /// Run the non-adaptive control.
    Baseline(RunArgs),
    /// Effective gain of an adaptive report over a baseline report.
    Gain {
        adaptive: PathBuf,
        baseline: PathBuf,
        /// Also write gain.json here.
        #[arg(long, env = "LATENTDRIVE_OUT")]
        out: Option<PathBuf>,
    },
    /// Weak-scaling harness over Stage-1-only workloads.
    Scaling {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated task counts; defaults to scaling.counts.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        #[arg(long, env = "LATENTDRIVE_OUT")]
        out: Option<PathBuf>,
    },
    /// Print the default configuration with every key documented by value.
    Defaults,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_CONFIG,
            _ => EXIT_INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn load(config: Option<&Path>) -> Result<ConfigDocument, Failure> {
    Ok(match config {
        Some(p) => ConfigDocument::from_path(p)?,
        None => ConfigDocument::default(),
    })
}

fn out_dir(arg: Option<PathBuf>, cfg: &ConfigDocument) -> PathBuf {
    arg.or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("latentdrive-out"))
}

fn campaign(args: RunArgs, baseline: bool, quiet: bool) -> Result<i32, Failure> {
    let mut cfg = load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.workflow.seed = s;
    }
    let dir = out_dir(args.out, &cfg);
    cfg.output.directory = Some(dir.to_string_lossy().into_owned());
    cfg.validate()?;
    info!("writing to {}", dir.display());
    let outcome: CampaignOutcome = if baseline { run_baseline(&cfg)? } else { campaign_loop(&cfg)? };
    write_bundle(&dir, &cfg, &outcome)?;
    let r = &outcome.report;
    if !quiet {
        println!(
            "{:?}: {:?} after {} iterations, {} aggregate steps, steps to first fold {}",
            r.mode,
            r.termination,
            r.iterations,
            r.aggregate_steps,
            r.steps_to_first_fold.map_or("-".to_string(), |s| s.to_string())
        );
    }
    match r.termination {
        TerminationCause::Aborted => Err(Failure {
            code: EXIT_INTERNAL,
            message: r.diagnostic.clone().unwrap_or_else(|| "campaign aborted".into()),
        }),
        _ => Ok(EXIT_OK),
    }
}

fn read_report(p: &Path) -> Result<CampaignReport, Failure> {
    let text = std::fs::read_to_string(p).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: format!("cannot read {}: {e}", p.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: format!("{} is not a campaign report (line {} column {}): {e}", p.display(), e.line(), e.column()),
    })
}

fn cmd_gain(adaptive: &Path, baseline: &Path, out: Option<PathBuf>, quiet: bool) -> Result<i32, Failure> {
    let a = read_report(adaptive)?;
    let b = read_report(baseline)?;
    let (json, code) = match gain(&a, &b) {
        Ok(g) => {
            if !quiet {
                println!("{g:.2}");
            }
            (
                serde_json::json!({
                    "status": "ok",
                    "gain": g,
                    "baseline_steps_to_first_fold": b.steps_to_first_fold,
                    "adaptive_steps_to_first_fold": a.steps_to_first_fold,
                }),
                EXIT_OK,
            )
        }
        Err(e) => {
            if !quiet {
                println!("incomparable");
            }
            (serde_json::json!({"status": "incomparable", "reason": e.to_string()}), EXIT_INCOMPARABLE)
        }
    };
    let text = serde_json::to_string_pretty(&json).expect("json value") + "\n";
    if !quiet {
        print!("{text}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(Error::from)?;
        std::fs::write(dir.join("gain.json"), text).map_err(Error::from)?;
    }
    Ok(code)
}

fn cmd_scaling(config: Option<&Path>, counts: Option<Vec<usize>>, out: Option<PathBuf>, quiet: bool) -> Result<i32, Failure> {
    let cfg = load(config)?;
    let counts = counts.unwrap_or_else(|| cfg.scaling.counts.clone());
    let rows = run_scaling(&cfg, &counts)?;
    let csv = scaling_csv(&rows);
    let dir = out_dir(out, &cfg);
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    std::fs::write(dir.join("scaling.csv"), &csv).map_err(Error::from)?;
    if !quiet {
        print!("{csv}");
    }
    Ok(EXIT_OK)
}

/// Parses `args` and runs the selected command; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let quiet = cli.quiet;
    let result = match cli.command {
        Command::Run(a) => campaign(a, false, quiet),
        Command::Baseline(a) => campaign(a, true, quiet),
        Command::Gain { adaptive, baseline, out } => cmd_gain(&adaptive, &baseline, out, quiet),
        Command::Scaling { config, counts, out } => cmd_scaling(config.as_deref(), counts, out, quiet),
        Command::Defaults => {
            println!("{}", ConfigDocument::default().to_json_pretty());
            Ok(EXIT_OK)
        }
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

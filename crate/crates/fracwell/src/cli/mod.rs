//! Command-line front end: scenario configs, presets and subcommands.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Options, Outcome, EXIT_CONDITION, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME};
pub use config::ScenarioConfig;

use crate::error::{Error, Result};

/// Built-in scenarios: `(name, TOML)`.
pub const PRESETS: [(&str, &str); 5] = [
    ("S1", include_str!("../../presets/s1.toml")),
    ("S2", include_str!("../../presets/s2.toml")),
    ("S3", include_str!("../../presets/s3.toml")),
    ("S4", include_str!("../../presets/s4.toml")),
    ("variable-exponent", include_str!("../../presets/rrem1.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, t)| *t)
}

#[derive(Debug, Parser)]
#[command(name = "fracwell", version, about = "Potential-well simulator for fractional g-Laplacian heat equations on an interval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario TOML file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Built-in scenario: S1, S2, S3, S4 or variable-exponent.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Write stiffness, Jacobian and mass matrices at the initial state as CSV.
    #[arg(long, global = true)]
    pub dump_matrices: bool,
    #[arg(long, global = true, hide = true)]
    pub diagnostics: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the structural conditions of the kernel and source.
    CheckFamily,
    /// Classify the initial datum against the potential well.
    Classify,
    /// Sample the well depth curve.
    DepthCurve,
    /// Integrate the initial datum and analyse the trajectory.
    Run,
    /// Run the `[sweep]` parameter grid in parallel.
    Sweep,
    /// Summarize the JSON artifacts of an output directory.
    Report,
}

/// Raw TOML of the selected scenario, with the seed override applied.
pub fn load_raw(cli: &Cli) -> Result<toml::Value> {
    let text = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => return Err(Error::Config("use either --config or --preset".into())),
        (Some(p), None) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        (None, Some(n)) => preset(n).ok_or_else(|| Error::Config(format!("unknown preset '{n}'")))?.to_string(),
        (None, None) => return Err(Error::Config("a scenario is required: pass --config or --preset".into())),
    };
    let mut v: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    if let (Some(seed), Some(t)) = (cli.seed, v.as_table_mut()) {
        t.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    Ok(v)
}

fn out_dir(cli: &Cli, cfg: Option<&ScenarioConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from("fracwell-out"))
}

/// Runs the parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Outcome { code: EXIT_CONFIG, summary: "error: --threads must be at least 1".into() };
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut opts = Options { out: out_dir(cli, None), diagnostics: cli.diagnostics, dump_matrices: cli.dump_matrices };
    if cli.command == Command::Report {
        return commands::cmd_report(&opts);
    }
    let loaded = load_raw(cli).and_then(|raw| ScenarioConfig::from_value(raw.clone()).map(|c| (raw, c)));
    let (raw, cfg) = match loaded {
        Ok(x) => x,
        Err(e) => return Outcome { code: commands::exit_code(&e), summary: format!("error: {e}") },
    };
    opts.out = out_dir(cli, Some(&cfg));
    match cli.command {
        Command::CheckFamily => commands::cmd_check_family(&cfg, &opts),
        Command::Classify => commands::cmd_classify(&cfg, &opts),
        Command::DepthCurve => commands::cmd_depth_curve(&cfg, &opts),
        Command::Run => commands::cmd_run(&cfg, &opts),
        Command::Sweep => commands::cmd_sweep(&raw, &cfg, &opts),
        Command::Report => unreachable!(),
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cocycle_lab::config::ScenarioConfig;
use cocycle_lab::report::{append_manifest, config_hash};
use cocycle_lab::scenarios::{run_scenario, Scenario};

/// Runs a cocycle experiment and writes its CSV artifacts.
#[derive(Parser, Debug)]
#[command(name = "cocycle-lab", version)]
struct Args {
    /// pw-demo, one-exponent, perturbation, holonomy-verify or twist-verify
    scenario: String,
    /// TOML scenario configuration
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate sample points one at a time (reference for byte-exact output)
    #[arg(long)]
    serial: bool,
    /// Output directory; defaults to the config's output_dir, then the current directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: Args) -> Result<bool, String> {
    let scenario: Scenario = args.scenario.parse().map_err(|e: cocycle_lab::LabError| e.to_string())?;
    let mut cfg = ScenarioConfig::load(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args.out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let outcome = run_scenario(scenario, &cfg, args.serial).map_err(|e| format!("{scenario}: {e}"))?;
    let written = outcome.write(&out).map_err(|e| e.to_string())?;
    append_manifest(&out, scenario.name(), cfg.seed, &config_hash(&cfg.to_toml()), outcome.verdict())
        .map_err(|e| e.to_string())?;
    for c in &outcome.checks {
        println!("{:<24} {}", c.check, c.verdict());
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    if !outcome.passed() {
        eprintln!("{scenario}: failing checks: {}", outcome.failed_checks().join(", "));
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

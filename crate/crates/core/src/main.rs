use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use relaybeam::controller::Policy;
use relaybeam::harness::{run_experiment, write_outputs, ExperimentConfig};
use relaybeam::validation::{run_suite, Suite};

#[derive(Parser)]
#[command(name = "relaybeam", version, about = "Relay beamforming with spatial control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write slots.csv and summary.json.
    Simulate {
        /// TOML config; every key is optional.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Restrict to these policies (repeatable).
        #[arg(long = "policy")]
        policies: Vec<Policy>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Monte Carlo check of the surrogate bound on the first slots.
        #[arg(long)]
        debug_jensen: bool,
    },
    /// Run the numerical oracle suites.
    Validate {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
}

fn simulate(
    config: Option<PathBuf>,
    policies: Vec<Policy>,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    debug_jensen: bool,
) -> relaybeam::Result<bool> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(&path)?,
        None => ExperimentConfig::default(),
    };
    if !policies.is_empty() {
        cfg.policies = policies;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    cfg.jensen.enabled |= debug_jensen;
    cfg.validate()?;

    let start = Instant::now();
    let result = run_experiment(&cfg)?;
    let paths = write_outputs(&result, &cfg, &cfg.out_dir)?;
    eprintln!(
        "{} records in {:.1} s -> {}",
        result.records.len(),
        start.elapsed().as_secs_f64(),
        paths.slots_csv.display()
    );
    for a in &result.aggregates {
        println!(
            "{:<12} mean_V={:.6e} mean_power={} feasible={:.3} mean_best_E={:.6e}",
            a.policy.as_str(),
            a.mean_value_v,
            a.mean_relay_power.map_or("n/a".into(), |p| format!("{p:.6e}")),
            a.feasibility_rate,
            a.mean_best_e
        );
    }
    let mut ok = true;
    for (policy, c) in result.jensen_checks() {
        let pass = c.passed();
        ok &= pass;
        println!(
            "{} jensen trial={} slot={} policy={} surrogate={:.6e} exact_diag={:.6e} mc={:.6e}±{:.2e}",
            if pass { "PASS" } else { "FAIL" },
            c.trial,
            c.slot,
            policy,
            c.surrogate,
            c.exact_diag_max,
            c.mc_mean,
            c.mc_se
        );
    }
    for f in &result.failures {
        eprintln!("FAILED trial {} ({}): {}", f.trial, f.policy, f.error);
    }
    Ok(ok && result.succeeded())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            config,
            policies,
            trials,
            seed,
            out,
            debug_jensen,
        } => simulate(config, policies, trials, seed, out, debug_jensen),
        Command::Validate { suite } => {
            let reports = run_suite(suite);
            let mut ok = true;
            for r in &reports {
                for c in &r.checks {
                    println!("{c}");
                    ok &= c.passed;
                }
                println!("suite {} finished in {:.2} s", r.suite, r.elapsed);
            }
            Ok(ok)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

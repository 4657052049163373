//! `greedy`: run single experiments, parameter sweeps, or the property
//! battery.
//!
//! Exit codes: 0 when everything passes, 1 when a check fails or a run
//! errors, 2 when the config or spec cannot be loaded or is invalid.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use greedy_banach::analysis::Outcome;
use greedy_banach::harness::{
    run_experiment, run_sweep, verify_suite, write_outputs, ExperimentConfig, Profile, SweepSpec,
};
use greedy_banach::Error;

const OK: u8 = 0;
const CHECK_FAILED: u8 = 1;
const CONFIG_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "greedy",
    version,
    about = "Greedy approximation experiments in complex l_p^n"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace and check report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every cell of a sweep spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the property battery.
    Verify {
        #[arg(long, value_enum, default_value_t = ProfileArg::Quick)]
        profile: ProfileArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the full outcome as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Quick,
    Full,
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => CONFIG_ERROR,
        _ => CHECK_FAILED,
    }
}

fn fail(context: &str, e: &Error, code: u8) -> ExitCode {
    eprintln!("error: {context}: {e}");
    ExitCode::from(code)
}

fn outcome_str(o: Outcome) -> &'static str {
    match o {
        Outcome::Pass => "pass",
        Outcome::Fail => "FAIL",
        Outcome::NotApplicable => "n/a",
        Outcome::Diagnostic => "info",
    }
}

fn cmd_run(config: &Path, out: &Path) -> ExitCode {
    let cfg = match ExperimentConfig::load(config).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => return fail(&format!("loading {}", config.display()), &e, CONFIG_ERROR),
    };
    let result = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return fail("run", &e, exit_for(&e)),
    };
    if let Err(e) = write_outputs(&result, out) {
        return fail(&format!("writing {}", out.display()), &e, CHECK_FAILED);
    }
    let r = &result.report;
    println!(
        "{} {}: {} iterations ({:?}), residual {:.6e} -> {:.6e}",
        r.config_hash,
        r.algorithm.as_str(),
        r.iterations,
        r.stop_reason,
        r.initial_residual,
        r.final_residual
    );
    for c in &r.checks {
        let value = c
            .value
            .map(|v| format!(" value {v:.6e}"))
            .unwrap_or_default();
        println!(
            "  {:<4} {:<24} margin {:+.3e}{value}",
            outcome_str(c.outcome),
            c.name,
            c.worst_margin
        );
    }
    ExitCode::from(if r.passed { OK } else { CHECK_FAILED })
}

fn cmd_sweep(spec: &Path, out: &Path) -> ExitCode {
    let spec = match SweepSpec::load(spec).and_then(|s| s.validate().map(|_| s)) {
        Ok(s) => s,
        Err(e) => return fail(&format!("loading {}", spec.display()), &e, CONFIG_ERROR),
    };
    let summary = match run_sweep(&spec, Some(out)) {
        Ok(s) => s,
        Err(e) => return fail("sweep", &e, exit_for(&e)),
    };
    if let Err(e) = std::fs::write(out.join("summary.csv"), summary.to_csv()) {
        return fail("writing summary", &e.into(), CHECK_FAILED);
    }
    let failures = summary.failures();
    println!(
        "{} cells, {failures} failing or errored; summary in {}",
        summary.rows.len(),
        out.join("summary.csv").display()
    );
    for row in summary.rows.iter().filter(|r| r.error.is_some()).take(10) {
        println!(
            "  cell {}: {}",
            row.cell,
            row.error.as_deref().unwrap_or_default()
        );
    }
    ExitCode::from(if failures == 0 { OK } else { CHECK_FAILED })
}

fn cmd_verify(profile: ProfileArg, seed: u64, json: Option<&Path>) -> ExitCode {
    let profile = match profile {
        ProfileArg::Quick => Profile::Quick,
        ProfileArg::Full => Profile::Full,
    };
    let outcome = match verify_suite(seed, profile) {
        Ok(o) => o,
        Err(e) => return fail("verify", &e, exit_for(&e)),
    };
    for c in &outcome.criteria {
        println!("{}", c.line());
    }
    for d in &outcome.diagnostics {
        let value = d.value.map(|v| format!("{v:.6e}")).unwrap_or_default();
        println!("info {}: {value}", d.name);
    }
    if let Some(path) = json {
        let text = match serde_json::to_string_pretty(&outcome) {
            Ok(t) => t,
            Err(e) => return fail("serializing outcome", &e.into(), CHECK_FAILED),
        };
        if let Err(e) = std::fs::write(path, text + "\n") {
            return fail(
                &format!("writing {}", path.display()),
                &e.into(),
                CHECK_FAILED,
            );
        }
    }
    ExitCode::from(if outcome.passed() { OK } else { CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Sweep { spec, out } => cmd_sweep(&spec, &out),
        Command::Verify {
            profile,
            seed,
            json,
        } => cmd_verify(profile, seed, json.as_deref()),
    }
}

//! `mrac` subcommands. Each returns a process exit code:
//! 0 success, 1 failed check, 2 bad input, 3 numeric abort.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use mrac_core::harness::{
    default_lambda, fit_decay_bound, read_trace, read_truth, reproduce_example, run_closed_loop, verify_trace,
    write_run, RunSummary, SUMMARY_FILE, TRUTH_FILE,
};
use mrac_core::{ConfigFile, ExperimentConfig, GroundTruth, MracError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mrac", version, about = "Discrete-time model reference adaptive control experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write trace.csv, truth.json, summary.json and plot.gp.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the horizon.
        #[arg(long)]
        steps: Option<usize>,
        /// Override the seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a run against the error identities and the estimator inequalities.
    Verify {
        /// Rerun this config, then verify.
        #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
        config: Option<PathBuf>,
        /// Verify an existing trace; truth.json must sit next to it.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Decay rate for the fitted convolution bound.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Rerun the worked example and print the tracking error per regime.
    Reproduce {
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &MracError) -> i32 {
    match e {
        MracError::NumericAbort { .. } | MracError::CorruptedState(_) => EXIT_NUMERIC,
        MracError::Trace(_) => EXIT_CHECK_FAILED,
        _ => EXIT_INPUT,
    }
}

fn fail(err: &mut dyn Write, e: &MracError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    exit_code(e)
}

fn load_config(path: &Path, steps: Option<usize>, seed: Option<u64>) -> Result<ExperimentConfig, MracError> {
    let text = fs::read_to_string(path).map_err(|e| MracError::Io(format!("{}: {e}", path.display())))?;
    let mut file = ConfigFile::from_json(&text)?;
    if let Some(steps) = steps {
        file.sim.steps = steps;
    }
    if let Some(seed) = seed {
        file.sim.seed = seed;
    }
    file.resolve()
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Run {
            config,
            out: dir,
            steps,
            seed,
        } => cmd_run(&config, &dir, steps, seed, out, err),
        Command::Verify { config, trace, lambda } => cmd_verify(config.as_deref(), trace.as_deref(), lambda, out, err),
        Command::Reproduce { out: dir } => cmd_reproduce(&dir, out, err),
    }
}

pub fn cmd_run(
    config: &Path,
    dir: &Path,
    steps: Option<usize>,
    seed: Option<u64>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let result = load_config(config, steps, seed).and_then(|cfg| {
        let trace = run_closed_loop(&cfg)?;
        write_run(dir, &cfg, &trace, None)
    });
    match result {
        Ok(summary) => {
            let _ = writeln!(
                out,
                "wrote {} rows to {} (trace {})",
                summary.rows,
                dir.display(),
                &summary.trace_hash[..12]
            );
            EXIT_OK
        }
        Err(e) => fail(err, &e),
    }
}

/// `lambda` must lie strictly between the spectral floor and 1.
fn check_lambda(lambda: f64, floor: Option<f64>) -> Result<(), MracError> {
    let floor_ok = floor.is_none_or(|f| lambda > f);
    if !(lambda < 1.0 && lambda > 0.0 && floor_ok) {
        let bound = floor.map_or("0".to_string(), |f| format!("{f:.6}"));
        return Err(MracError::config(
            "lambda",
            format!("requires spectral floor {bound} < lambda < 1, got {lambda}"),
        ));
    }
    Ok(())
}

pub fn cmd_verify(
    config: Option<&Path>,
    trace_path: Option<&Path>,
    lambda: Option<f64>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let loaded = match (config, trace_path) {
        (Some(path), _) => load_config(path, None, None).and_then(|cfg| {
            let trace = run_closed_loop(&cfg)?;
            let truth = GroundTruth::from_config(&cfg)?;
            Ok((trace, truth, Some(cfg)))
        }),
        (None, Some(path)) => (|| {
            let trace = read_trace(path)?;
            let dir = path.parent().unwrap_or(Path::new("."));
            let truth = read_truth(&dir.join(TRUTH_FILE))?;
            // the config from a run summary, when one is present, gives the spectral floor
            let cfg = fs::read_to_string(dir.join(SUMMARY_FILE))
                .ok()
                .and_then(|text| serde_json::from_str::<RunSummary>(&text).ok())
                .and_then(|s| s.config.resolve().ok())
                .filter(|c| c.hash() == trace.meta.config_hash);
            Ok((trace, truth, cfg))
        })(),
        (None, None) => Err(MracError::config("<args>", "one of --config or --trace is required")),
    };
    let (trace, truth, cfg) = match loaded {
        Ok(v) => v,
        Err(e) => return fail(err, &e),
    };

    let floor = cfg.as_ref().and_then(|c| c.spectral_floor().ok());
    let lambda = match lambda {
        Some(l) => match check_lambda(l, floor) {
            Ok(()) => Some(l),
            Err(e) => return fail(err, &e),
        },
        None => cfg.as_ref().and_then(default_lambda),
    };

    let report = match verify_trace(&trace, &truth, None) {
        Ok(r) => r,
        Err(e) => return fail(err, &e),
    };
    let mut report = report;
    if let Some(l) = lambda {
        match fit_decay_bound(&trace, l) {
            Ok(c) => {
                report.lambda = Some(l);
                report.decay_c = Some(c);
            }
            Err(e) => return fail(err, &e),
        }
    }
    let _ = write!(out, "{}", report.render());
    if let Some(f) = floor {
        let _ = writeln!(out, "spectral floor: {f:.6}");
    }
    if report.passed() {
        let _ = writeln!(out, "all checks passed");
        EXIT_OK
    } else {
        let _ = writeln!(out, "verification FAILED");
        EXIT_CHECK_FAILED
    }
}

pub fn cmd_reproduce(dir: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = reproduce_example().and_then(|(cfg, trace, summary)| {
        write_run(dir, &cfg, &trace, Some(summary.clone()))?;
        Ok(summary)
    });
    match result {
        Ok(s) => {
            let _ = writeln!(out, "regime              RMS eps");
            let _ = writeln!(out, "t <= 200            {:.6}", s.rms.before);
            let _ = writeln!(out, "200 < t <= 500      {:.6}", s.rms.disturbed);
            let _ = writeln!(out, "500 < t <= 1000     {:.6}", s.rms.after);
            let _ = writeln!(out, "600 <= t <= 1000    {:.6}", s.rms.recovered);
            let _ = writeln!(out, "estimates in S: {}, rows: {}", s.estimates_in_box, s.rows);
            for (i, (lo, hi)) in s.estimate_ranges.iter().enumerate() {
                let _ = writeln!(out, "theta_hat_{i} in [{lo:.4}, {hi:.4}]");
            }
            EXIT_OK
        }
        Err(e) => fail(err, &e),
    }
}

//! Run directories: `trace.csv`, `truth.json`, `summary.json`, `plot.gp`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::example::ExampleSummary;
use super::verify::{verify_trace, VerificationReport};
use super::{ExperimentConfig, GroundTruth, Trace};
use crate::config::ConfigFile;
use crate::error::{MracError, Result};

pub const TRACE_FILE: &str = "trace.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "plot.gp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Resolved configuration; parses back to the same experiment.
    pub config: ConfigFile,
    pub config_hash: String,
    pub trace_hash: String,
    pub rows: usize,
    pub spectral_floor: Option<f64>,
    pub passed: bool,
    pub report: VerificationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<ExampleSummary>,
}

fn io_err(path: &Path, e: std::io::Error) -> MracError {
    MracError::Io(format!("{}: {e}", path.display()))
}

/// Decay rate used in summaries: halfway between the spectral floor and 1.
pub fn default_lambda(cfg: &ExperimentConfig) -> Option<f64> {
    cfg.spectral_floor().ok().filter(|f| *f < 1.0).map(|f| 0.5 * (f + 1.0))
}

pub fn write_run(
    dir: &Path,
    cfg: &ExperimentConfig,
    trace: &Trace,
    example: Option<ExampleSummary>,
) -> Result<RunSummary> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let truth = GroundTruth::from_config(cfg)?;
    let floor = cfg.spectral_floor().ok();
    let report = verify_trace(trace, &truth, default_lambda(cfg))?;
    let summary = RunSummary {
        config: cfg.to_config_file(),
        config_hash: cfg.hash(),
        trace_hash: trace.hash(),
        rows: trace.rows.len(),
        spectral_floor: floor,
        passed: report.passed(),
        report,
        example,
    };

    let write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    };
    write(TRACE_FILE, trace.to_csv())?;
    write(TRUTH_FILE, serde_json::to_string_pretty(&truth).expect("truth serializes"))?;
    write(SUMMARY_FILE, serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    write(PLOT_FILE, plot_script(cfg.dims().predictor_dim()))?;
    Ok(summary)
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Trace::from_csv(&text)
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| MracError::Trace(format!("{}: {e}", path.display())))
}

/// Trace and ground truth from a run directory.
pub fn read_run(dir: &Path) -> Result<(Trace, GroundTruth)> {
    Ok((read_trace(&dir.join(TRACE_FILE))?, read_truth(&dir.join(TRUTH_FILE))?))
}

/// Gnuplot script: output against the model output, and the estimates.
pub fn plot_script(n_params: usize) -> String {
    let mut s = String::from(
        "set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 1000,700\n\
         set output 'tracking.png'\n\
         set xlabel 't'\n\
         plot 'trace.csv' using 1:2 with lines title 'y', \\\n     \
         '' using 1:3 with lines title 'y*'\n\
         set output 'estimates.png'\n\
         plot ",
    );
    let lines: Vec<String> = (0..n_params)
        .map(|i| format!("'trace.csv' using 1:{} with lines title 'theta_hat_{i}'", 10 + i))
        .collect();
    s.push_str(&lines.join(", \\\n     "));
    s.push('\n');
    s
}

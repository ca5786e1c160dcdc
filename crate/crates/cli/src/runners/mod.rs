//! One runner per experiment kind. Each writes its artifacts into the output
//! directory and returns the experiment-specific part of `summary.json`.

mod boson;
mod fermion;
mod qmhl;
mod vqt;

use std::time::Instant;

use qhbm_core::optim::TrainStatus;
use qhbm_core::parallel::Execution;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::OutDir;

pub use boson::run_boson_compress;
pub use fermion::run_fermion_dwave;
pub use qmhl::run_qmhl_ansatz_study;
pub use vqt::run_vqt_heisenberg;

/// Results of a runner, plus the first abort any restart hit.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub results: Value,
    pub abort: Option<String>,
}

impl RunReport {
    fn new(results: Value, statuses: &[(String, &TrainStatus)]) -> Self {
        let abort = statuses.iter().find_map(|(who, s)| match s {
            TrainStatus::Aborted { step, reason } => Some(format!("{who} aborted at step {step}: {reason}")),
            _ => None,
        });
        Self { results, abort }
    }
}

/// Runs the configured experiment and writes `summary.json`. A numerical
/// abort in any restart still writes every artifact before it is reported.
pub fn run(config: &ExperimentConfig, out: &OutDir, exec: Execution) -> CliResult<Value> {
    config.validate()?;
    let start = Instant::now();
    let report = match &config.experiment {
        Experiment::VqtHeisenberg(c) => run_vqt_heisenberg(c, config, out, exec)?,
        Experiment::QmhlAnsatzStudy(c) => run_qmhl_ansatz_study(c, config, out, exec)?,
        Experiment::BosonCompress(c) => run_boson_compress(c, config, out, exec)?,
        Experiment::FermionDwave(c) => run_fermion_dwave(c, config, out, exec)?,
    };
    let summary = json!({
        "kind": config.experiment.kind(),
        "config": serde_json::to_value(config).expect("config serializes"),
        "content_hash": config.content_hash(),
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
        "aborted": report.abort,
        "results": report.results,
    });
    out.write_json("summary.json", &summary)?;
    match report.abort {
        Some(msg) => Err(CliError::Abort(msg)),
        None => Ok(summary),
    }
}

fn restart_seed(config: &ExperimentConfig, index: usize) -> u64 {
    config.seed.wrapping_add(index as u64)
}

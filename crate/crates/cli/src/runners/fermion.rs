use qhbm_core::densesim::{fidelity, trace_distance, von_neumann_entropy};
use qhbm_core::gaussfermion::{
    build_dwave, dense_jw_oracle_with_cap, fermion_entropy, fermion_log_partition, model_dense_state,
    thermal_covariance_oracle, train_fermion_vqt, FermionModel, FermionTrainOptions, FermionTrainResult,
};
use qhbm_core::parallel::{map_indexed, Execution};
use qhbm_core::rng::seeded;
use qhbm_core::QhbmError;
use serde_json::{json, Value};

use super::{restart_seed, RunReport};
use crate::config::{ExperimentConfig, FermionDwave};
use crate::error::CliResult;
use crate::output::OutDir;
use crate::stats::long_trace_csv;

pub fn run_fermion_dwave(
    c: &FermionDwave,
    config: &ExperimentConfig,
    out: &OutDir,
    exec: Execution,
) -> CliResult<RunReport> {
    let nf = c.n_fermions();
    let h = build_dwave(c.nx, c.ny, c.t, c.delta)?;
    let target = thermal_covariance_oracle(&h, c.beta)?;
    let dense_target = if c.dense() { Some(dense_jw_oracle_with_cap(&h, c.beta, nf)?) } else { None };
    let options = FermionTrainOptions {
        snapshot_every: (c.snapshot_every > 0).then_some(c.snapshot_every),
        dense_target: dense_target.clone().map(|t| (t, nf)),
    };
    let runs = map_indexed(exec, config.restarts, |r| -> Result<FermionTrainResult, QhbmError> {
        let init = FermionModel::random(nf, c.depth(), &mut seeded(restart_seed(config, r)));
        train_fermion_vqt(&init, &h, c.beta, &config.train, &options)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let loss = |r: &FermionTrainResult| r.trace.final_loss().unwrap_or(f64::INFINITY);
    let best = (0..runs.len()).min_by(|&a, &b| loss(&runs[a]).total_cmp(&loss(&runs[b]))).expect("at least one");

    let rows: Vec<_> = runs.iter().enumerate().map(|(r, run)| (r.to_string(), &run.trace)).collect();
    out.write("trace.csv", long_trace_csv("restart", &rows))?;
    for (step, cov) in &runs[best].snapshots {
        out.write(format!("snapshots/step_{step:04}.csv"), cov.to_csv())?;
    }
    let run = &runs[best];
    let model_cov = run.model.covariance();
    out.write("target_covariance.csv", target.to_csv())?;
    out.write("final_covariance.csv", model_cov.to_csv())?;

    let ln_z = fermion_log_partition(&h, c.beta);
    let final_loss = loss(run);
    // Both sides divided by β: F_model − F_exact with F = loss/β and F_exact = −ln Z/β.
    let free_energy_gap = (final_loss + ln_z) / c.beta;
    let target_entropy = fermion_entropy(&target.lambdas())?;
    let model_entropy = run.model.latent.entropy();
    let cov_error = (model_cov.matrix() - target.matrix()).abs().max();
    let dense: Value = match &dense_target {
        Some(t) => {
            let rho = model_dense_state(&run.model, nf)?;
            json!({
                "fidelity": fidelity(&rho, t)?,
                "trace_distance": trace_distance(&rho, t)?,
                "entropy_gap": (von_neumann_entropy(&rho) - von_neumann_entropy(t)).abs(),
                "target_entropy_dense": von_neumann_entropy(t),
            })
        }
        None => Value::Null,
    };
    let results = json!({
        "n_fermions": nf,
        "layers": c.depth(),
        "n_params": run.model.n_params(),
        "best_restart": best,
        "final_loss": final_loss,
        "exact_log_partition": ln_z,
        "free_energy_gap": free_energy_gap,
        "model_entropy": model_entropy,
        "target_entropy": target_entropy,
        "max_covariance_error": cov_error,
        "snapshots": run.snapshots.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
        "dense": dense,
        "status": run.status,
    });
    let statuses: Vec<_> = runs.iter().enumerate().map(|(r, run)| (format!("restart {r}"), &run.status)).collect();
    Ok(RunReport::new(results, &statuses))
}

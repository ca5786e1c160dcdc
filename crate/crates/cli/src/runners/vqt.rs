use qhbm_core::densesim::log_partition_dense;
use qhbm_core::hamiltonians::heisenberg_2d;
use qhbm_core::latent::{BernoulliLatent, Latent, MultinoulliLatent};
use qhbm_core::parallel::{map_indexed, Execution};
use qhbm_core::qhbm::{train, Objective, QhbmModel, QhbmTrainResult, Target};
use qhbm_core::qnn::QnnAnsatz;
use qhbm_core::rng::seeded;
use qhbm_core::QhbmError;
use serde_json::json;

use super::{restart_seed, RunReport};
use crate::config::{ExperimentConfig, LatentKind, VqtHeisenberg};
use crate::error::CliResult;
use crate::output::OutDir;
use crate::stats::{bands_csv, long_trace_csv, Band};

const FIDELITY_THRESHOLD: f64 = 0.95;

pub fn run_vqt_heisenberg(
    c: &VqtHeisenberg,
    config: &ExperimentConfig,
    out: &OutDir,
    exec: Execution,
) -> CliResult<RunReport> {
    let n = c.nx * c.ny;
    let h = heisenberg_2d(c.nx, c.ny, c.jh, c.jv)?;
    let objective = Objective::vqt(&h, c.beta)?;
    let target = Target::for_vqt(&h, c.beta)?;
    let runs: Vec<Result<QhbmTrainResult, QhbmError>> = map_indexed(exec, config.restarts, |r| {
        let mut rng = seeded(restart_seed(config, r));
        let latent: Latent = match c.latent {
            LatentKind::Bernoulli => BernoulliLatent::random(n, &mut rng).into(),
            LatentKind::Multinoulli => MultinoulliLatent::random(n, &mut rng).into(),
        };
        let model = QhbmModel::new(latent, QnnAnsatz::random(n, c.layers, &mut rng))?;
        train(&model, &objective, &config.train, Some(&target), exec)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let rows: Vec<_> = runs.iter().enumerate().map(|(r, run)| (r.to_string(), &run.trace)).collect();
    out.write("trace.csv", long_trace_csv("restart", &rows))?;
    let traces: Vec<_> = runs.iter().map(|r| &r.trace).collect();
    out.write("bands.csv", bands_csv(&traces))?;

    let finals: Vec<_> = runs.iter().map(|r| r.trace.final_metrics().expect("target given")).collect();
    let fid: Vec<f64> = finals.iter().map(|m| m.fidelity).collect();
    let td: Vec<f64> = finals.iter().map(|m| m.trace_distance).collect();
    let re: Vec<f64> = finals.iter().map(|m| m.relative_entropy).collect();
    let best = (0..runs.len()).max_by(|&a, &b| fid[a].total_cmp(&fid[b])).expect("at least one restart");
    if c.dump_density {
        out.write("density/target.csv", target.state().to_csv())?;
        out.write("density/final.csv", runs[best].model.visible_state().to_csv())?;
    }

    let free_energy = -log_partition_dense(&h, c.beta)? / c.beta;
    let per_restart: Vec<_> = runs
        .iter()
        .enumerate()
        .map(|(r, run)| {
            json!({
                "restart": r,
                "seed": restart_seed(config, r),
                "final_loss": run.trace.final_loss(),
                "final_free_energy": run.trace.final_loss().map(|l| l / c.beta),
                "metrics": finals[r],
                "status": run.status,
            })
        })
        .collect();
    let passing = fid.iter().filter(|&&f| f >= FIDELITY_THRESHOLD).count();
    let results = json!({
        "n_qubits": n,
        "exact_free_energy": free_energy,
        "final_fidelity": Band::of(&fid),
        "final_trace_distance": Band::of(&td),
        "final_relative_entropy": Band::of(&re),
        "fraction_fidelity_above_0.95": passing as f64 / runs.len() as f64,
        "best_restart": best,
        "restarts": per_restart,
    });
    let statuses: Vec<_> = runs.iter().enumerate().map(|(r, run)| (format!("restart {r}"), &run.status)).collect();
    Ok(RunReport::new(results, &statuses))
}

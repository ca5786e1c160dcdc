use std::fmt::Write as _;

use qhbm_core::densesim::{thermal_state_oracle, DensityMatrix};
use qhbm_core::hamiltonians::{heisenberg_1d_fields, random_coupling_chain};
use qhbm_core::latent::{BernoulliLatent, Latent, MultinoulliLatent};
use qhbm_core::optim::Metrics;
use qhbm_core::parallel::{map_indexed, Execution};
use qhbm_core::qhbm::{train, Objective, QhbmModel, QhbmTrainResult, Target};
use qhbm_core::qnn::QnnAnsatz;
use qhbm_core::rng::seeded;
use qhbm_core::QhbmError;
use serde::Serialize;
use serde_json::json;

use super::{restart_seed, RunReport};
use crate::config::{ExperimentConfig, LatentKind, QmhlAnsatzStudy};
use crate::error::CliResult;
use crate::output::OutDir;
use crate::stats::{long_trace_csv, mean, Band, MinMeanMax};

/// Table order: factorized first, as in the published layout.
const ANSATZE: [(LatentKind, &str); 2] = [(LatentKind::Bernoulli, "factorized"), (LatentKind::Multinoulli, "general")];

fn qmhl_run(
    sigma: &DensityMatrix,
    kind: LatentKind,
    study: &QmhlAnsatzStudy,
    config: &ExperimentConfig,
    seed: u64,
    exec: Execution,
) -> Result<QhbmTrainResult, QhbmError> {
    let mut rng = seeded(seed);
    let latent: Latent = match kind {
        LatentKind::Bernoulli => BernoulliLatent::random(study.n, &mut rng).into(),
        LatentKind::Multinoulli => MultinoulliLatent::random(study.n, &mut rng).into(),
    };
    let model = QhbmModel::new(latent, QnnAnsatz::random(study.n, study.layers, &mut rng))?;
    let target = Target::Data(sigma.clone());
    train(&model, &Objective::qmhl(sigma.clone()), &config.train, Some(&target), exec)
}

/// Mean over Hamiltonians of the per-Hamiltonian min / mean / max across restarts.
fn averaged_over_hamiltonians(per_h: &[Vec<f64>]) -> MinMeanMax {
    let stats: Vec<MinMeanMax> = per_h.iter().map(|xs| MinMeanMax::of(xs)).collect();
    MinMeanMax {
        mean: mean(&stats.iter().map(|s| s.mean).collect::<Vec<_>>()),
        min: mean(&stats.iter().map(|s| s.min).collect::<Vec<_>>()),
        max: mean(&stats.iter().map(|s| s.max).collect::<Vec<_>>()),
    }
}

fn table_csv(rows: &[(&str, MinMeanMax)]) -> String {
    let mut out = String::from("ansatz,mean,min,max\n");
    for (name, s) in rows {
        let _ = writeln!(out, "{name},{},{},{}", s.mean, s.min, s.max);
    }
    out
}

#[derive(Debug, Serialize)]
struct AnsatzRow {
    ansatz: &'static str,
    fidelity: MinMeanMax,
    trace_distance: MinMeanMax,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    beta: f64,
    ansatz: &'static str,
    fidelity: Band,
    trace_distance: Band,
}

pub fn run_qmhl_ansatz_study(
    c: &QmhlAnsatzStudy,
    config: &ExperimentConfig,
    out: &OutDir,
    exec: Execution,
) -> CliResult<RunReport> {
    let sigmas = (0..c.hamiltonians)
        .map(|m| thermal_state_oracle(&random_coupling_chain(c.n, c.hamiltonian_seed + m as u64)?, c.beta))
        .collect::<Result<Vec<_>, _>>()?;
    let r = config.restarts;
    // Job (a, m, k): ansatz a on Hamiltonian m, restart k. Both ansatze share seeds.
    let jobs = ANSATZE.len() * c.hamiltonians * r;
    let runs = map_indexed(exec, jobs, |j| {
        let (a, rest) = (j / (c.hamiltonians * r), j % (c.hamiltonians * r));
        qmhl_run(&sigmas[rest / r], ANSATZE[a].0, c, config, restart_seed(config, rest), exec)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let label = |j: usize| {
        let (a, rest) = (j / (c.hamiltonians * r), j % (c.hamiltonians * r));
        format!("{},{},{}", ANSATZE[a].1, rest / r, rest % r)
    };
    let rows: Vec<_> = runs.iter().enumerate().map(|(j, run)| (label(j), &run.trace)).collect();
    out.write("trace.csv", long_trace_csv("ansatz,hamiltonian,restart", &rows))?;

    let finals: Vec<Metrics> = runs.iter().map(|run| run.trace.final_metrics().expect("target given")).collect();
    let mut table = Vec::new();
    for (a, (_, name)) in ANSATZE.iter().enumerate() {
        let per_h = |f: fn(&Metrics) -> f64| -> Vec<Vec<f64>> {
            (0..c.hamiltonians)
                .map(|m| (0..r).map(|k| f(&finals[(a * c.hamiltonians + m) * r + k])).collect())
                .collect()
        };
        table.push(AnsatzRow {
            ansatz: name,
            fidelity: averaged_over_hamiltonians(&per_h(|m| m.fidelity)),
            trace_distance: averaged_over_hamiltonians(&per_h(|m| m.trace_distance)),
        });
    }
    out.write("table_fidelity.csv", table_csv(&table.iter().map(|t| (t.ansatz, t.fidelity)).collect::<Vec<_>>()))?;
    out.write(
        "table_trace_distance.csv",
        table_csv(&table.iter().map(|t| (t.ansatz, t.trace_distance)).collect::<Vec<_>>()),
    )?;

    let mut statuses: Vec<_> = runs.iter().enumerate().map(|(j, run)| (label(j), &run.status)).collect();
    let mut sweep_rows = Vec::new();
    let sweep_runs;
    if let Some(s) = &c.sweep {
        let h = heisenberg_1d_fields(c.n, s.j, s.hx, s.hz)?;
        let sigmas = s.betas.iter().map(|&b| thermal_state_oracle(&h, b)).collect::<Result<Vec<_>, _>>()?;
        let per = s.restarts;
        let jobs = ANSATZE.len() * s.betas.len() * per;
        sweep_runs = map_indexed(exec, jobs, |j| {
            let (a, rest) = (j / (s.betas.len() * per), j % (s.betas.len() * per));
            qmhl_run(&sigmas[rest / per], ANSATZE[a].0, c, config, restart_seed(config, rest % per), exec)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        let mut csv = String::from("beta,ansatz,fidelity_mean,fidelity_p025,fidelity_p975,trace_distance_mean,trace_distance_p025,trace_distance_p975\n");
        for (a, (_, name)) in ANSATZE.iter().enumerate() {
            for (bi, &beta) in s.betas.iter().enumerate() {
                let ms: Vec<Metrics> = (0..per)
                    .map(|k| sweep_runs[(a * s.betas.len() + bi) * per + k].trace.final_metrics().expect("target given"))
                    .collect();
                let fid = Band::of(&ms.iter().map(|m| m.fidelity).collect::<Vec<_>>());
                let td = Band::of(&ms.iter().map(|m| m.trace_distance).collect::<Vec<_>>());
                let _ = writeln!(csv, "{beta},{name},{},{},{},{},{},{}", fid.mean, fid.lo, fid.hi, td.mean, td.lo, td.hi);
                sweep_rows.push(SweepRow { beta, ansatz: name, fidelity: fid, trace_distance: td });
            }
        }
        out.write("sweep.csv", csv)?;
        for (j, run) in sweep_runs.iter().enumerate() {
            let (a, rest) = (j / (s.betas.len() * per), j % (s.betas.len() * per));
            statuses.push((format!("sweep {} beta={} restart {}", ANSATZE[a].1, s.betas[rest / per], rest % per), &run.status));
        }
    }

    let results = json!({
        "tables": table,
        "sweep": sweep_rows,
    });
    Ok(RunReport::new(results, &statuses))
}

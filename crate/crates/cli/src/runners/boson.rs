use std::fmt::Write as _;

use qhbm_core::gaussboson::{
    compress, harmonic_chain_ground, modular_modes, partial_trace_modes, train_boson_qmhl, williamson_oracle,
    BosonCovariance, BosonModel, BosonTrainResult, CompressionPoint,
};
use qhbm_core::matio::write_matrix_csv;
use qhbm_core::parallel::{map_indexed, Execution};
use qhbm_core::rng::seeded;
use qhbm_core::QhbmError;
use serde_json::json;

use super::{restart_seed, RunReport};
use crate::config::{BosonCompress, ChainBlock, ExperimentConfig};
use crate::error::CliResult;
use crate::output::OutDir;
use crate::stats::long_trace_csv;

fn reduced_chain(c: &ChainBlock) -> Result<BosonCovariance, QhbmError> {
    let full = harmonic_chain_ground(c.sites, c.omega, c.chi)?;
    partial_trace_modes(&full, &(0..c.kept).collect::<Vec<_>>())
}

/// Trains every restart and returns them all; the best has the lowest final loss.
fn train_restarts(
    gamma: &BosonCovariance,
    c: &BosonCompress,
    config: &ExperimentConfig,
    seed_offset: usize,
    exec: Execution,
) -> Result<(Vec<BosonTrainResult>, usize), QhbmError> {
    let runs = map_indexed(exec, config.restarts, |r| {
        let init = BosonModel::random(gamma.n_modes(), &mut seeded(restart_seed(config, seed_offset + r)));
        train_boson_qmhl(&init, gamma, &config.train, c.gradient, exec)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let loss = |r: &BosonTrainResult| r.trace.final_loss().unwrap_or(f64::INFINITY);
    let best = (0..runs.len())
        .min_by(|&a, &b| loss(&runs[a]).total_cmp(&loss(&runs[b])))
        .expect("at least one restart");
    Ok((runs, best))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn nu_csv(oracle: &[f64], trained: &[f64]) -> String {
    let mut out = String::from("index,oracle_nu,trained_nu\n");
    for (i, (a, b)) in oracle.iter().zip(trained).enumerate() {
        let _ = writeln!(out, "{i},{a},{b}");
    }
    out
}

pub fn run_boson_compress(
    c: &BosonCompress,
    config: &ExperimentConfig,
    out: &OutDir,
    exec: Execution,
) -> CliResult<RunReport> {
    let gamma = reduced_chain(&c.chain())?;
    let (runs, best) = train_restarts(&gamma, c, config, 0, exec)?;
    let rows: Vec<_> = runs.iter().enumerate().map(|(r, run)| (r.to_string(), &run.trace)).collect();
    out.write("trace.csv", long_trace_csv("restart", &rows))?;
    let model = &runs[best].model;

    let oracle_nu = williamson_oracle(&gamma)?.0;
    let trained_nu = sorted(model.latent.nus());
    out.write("nu.csv", nu_csv(&oracle_nu, &trained_nu))?;
    out.write("target_covariance.csv", gamma.to_csv())?;

    // Ratio 0 is always reported: it is the model's own reconstruction residual.
    let mut ratios = vec![0.0];
    ratios.extend(c.ratios.iter().copied().filter(|&r| r != 0.0));
    let mut points = Vec::new();
    let mut csv = String::from("ratio,error\n");
    for &ratio in &ratios {
        let (rec, error) = compress(model, &gamma, ratio)?;
        let diff = (rec.matrix() - gamma.matrix()).abs();
        let header = [("ratio", ratio.to_string()), ("n_modes", gamma.n_modes().to_string())];
        out.write(format!("heatmaps/ratio_{ratio:.2}.csv"), write_matrix_csv(&header, &diff))?;
        let _ = writeln!(csv, "{ratio},{error}");
        points.push(CompressionPoint { ratio, error });
    }
    out.write("compression.csv", csv)?;
    out.write_json("compression.json", &points)?;
    out.write_json("model.json", model)?;

    let chain_entropy = gamma.entropy();
    let mut statuses: Vec<_> = runs.iter().enumerate().map(|(r, run)| (format!("restart {r}"), &run.status)).collect();
    let mut modes_summary = serde_json::Value::Null;
    let mode_runs;
    if let Some(m) = &c.modes {
        let gamma_m = reduced_chain(m)?;
        let (runs_m, best_m) = train_restarts(&gamma_m, c, config, config.restarts, exec)?;
        mode_runs = runs_m;
        let vectors = modular_modes(&mode_runs[best_m].model.symplectic)?;
        let mut csv = String::from("mode");
        for k in 0..2 * m.kept {
            let _ = write!(csv, ",{}{}", if k < m.kept { "x" } else { "p" }, k % m.kept);
        }
        csv.push('\n');
        for (j, v) in vectors.iter().enumerate() {
            let _ = write!(csv, "{j}");
            for x in v.iter() {
                let _ = write!(csv, ",{x}");
            }
            csv.push('\n');
        }
        out.write("modular_modes.csv", csv)?;
        let oracle_m = williamson_oracle(&gamma_m)?.0;
        let trained_m = sorted(mode_runs[best_m].model.latent.nus());
        out.write("modular_modes_nu.csv", nu_csv(&oracle_m, &trained_m))?;
        modes_summary = json!({
            "chain": m,
            "n_vectors": vectors.len(),
            "best_restart": best_m,
            "final_loss": mode_runs[best_m].trace.final_loss(),
            "oracle_entropy": gamma_m.entropy(),
            "max_nu_error": max_diff(&oracle_m, &trained_m),
        });
        for (r, run) in mode_runs.iter().enumerate() {
            statuses.push((format!("modular-mode restart {r}"), &run.status));
        }
    }

    let results = json!({
        "n_modes": gamma.n_modes(),
        "best_restart": best,
        "final_loss": runs[best].trace.final_loss(),
        "oracle_entropy": chain_entropy,
        "loss_gap": runs[best].trace.final_loss().map(|l| l - chain_entropy),
        "max_nu_error": max_diff(&oracle_nu, &trained_nu),
        "compression": points,
        "restart_final_losses": runs.iter().map(|r| r.trace.final_loss()).collect::<Vec<_>>(),
        "modular_modes": modes_summary,
    });
    Ok(RunReport::new(results, &statuses))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

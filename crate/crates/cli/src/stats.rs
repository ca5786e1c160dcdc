//! Summary statistics across restarts.

use qhbm_core::optim::{TrainRecord, TrainTrace};
use serde::Serialize;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    /// Mean with the 2.5 / 97.5 percentiles.
    pub fn of(xs: &[f64]) -> Self {
        Self { mean: mean(xs), lo: percentile(xs, 0.025), hi: percentile(xs, 0.975) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinMeanMax {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl MinMeanMax {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

const BAND_FIELDS: [&str; 4] = ["loss", "trace_distance", "fidelity", "relative_entropy"];

fn field(r: &TrainRecord, k: usize) -> Option<f64> {
    match k {
        0 => Some(r.loss),
        1 => r.metrics.map(|m| m.trace_distance),
        2 => r.metrics.map(|m| m.fidelity),
        _ => r.metrics.map(|m| m.relative_entropy),
    }
}

/// Per-step bands across traces; a trace that stopped early holds its last record.
pub fn bands_csv(traces: &[&TrainTrace]) -> String {
    let steps = traces.iter().filter_map(|t| t.records.last().map(|r| r.step)).max().unwrap_or(0);
    let mut out = String::from("step");
    for f in BAND_FIELDS {
        out.push_str(&format!(",{f}_mean,{f}_p025,{f}_p975"));
    }
    out.push('\n');
    for step in 0..=steps {
        let at: Vec<&TrainRecord> = traces
            .iter()
            .filter_map(|t| t.records.iter().take_while(|r| r.step <= step).last())
            .collect();
        out.push_str(&step.to_string());
        for k in 0..BAND_FIELDS.len() {
            let xs: Vec<f64> = at.iter().filter_map(|r| field(r, k)).collect();
            if xs.is_empty() {
                out.push_str(",,,");
            } else {
                let b = Band::of(&xs);
                out.push_str(&format!(",{},{},{}", b.mean, b.lo, b.hi));
            }
        }
        out.push('\n');
    }
    out
}

/// Long-format trace: `prefix` columns in front of every record of every trace.
pub fn long_trace_csv(prefix_header: &str, rows: &[(String, &TrainTrace)]) -> String {
    let mut out = format!("{prefix_header},{}\n", qhbm_core::optim::TRACE_HEADER);
    for (prefix, trace) in rows {
        for line in trace.to_csv().lines().skip(1) {
            out.push_str(prefix);
            out.push(',');
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

//! First-order training loop shared by the qubit, boson and fermion models.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{QhbmError, Result};

/// Consecutive small-change steps required before declaring convergence.
pub const PATIENCE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Gd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub epsilon_fd: f64,
    pub seed: u64,
    pub convergence_tol: f64,
    pub optimizer: Optimizer,
    /// Multiplicative learning-rate decay applied after every step.
    pub lr_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Added to the Adam denominator; gradients far below it barely move.
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_steps: 200,
            epsilon_fd: 1e-4,
            seed: 0,
            convergence_tol: 1e-10,
            optimizer: Optimizer::Gd,
            lr_decay: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-12,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(QhbmError::InvalidArgument(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1");
        }
        if !(self.epsilon_fd > 0.0) {
            return bad("epsilon_fd must be positive");
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence_tol must be non-negative");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2)) {
            return bad("Adam moment decays must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return bad("adam_epsilon must be positive");
        }
        Ok(())
    }
}

/// Diagnostics against a dense target, when one is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub trace_distance: f64,
    pub fidelity: f64,
    pub relative_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub loss: f64,
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrainStatus {
    Converged { step: usize },
    MaxSteps,
    Aborted { step: usize, reason: String },
}

/// Step 0 holds the initial loss; record `k` holds the loss after update `k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
}

pub const TRACE_HEADER: &str = "step,loss,trace_distance,fidelity,relative_entropy";

impl TrainTrace {
    pub fn initial_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn final_metrics(&self) -> Option<Metrics> {
        self.records.last().and_then(|r| r.metrics)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{}", r.step, r.loss);
            match r.metrics {
                Some(m) => {
                    let _ = writeln!(out, ",{},{},{}", m.trace_distance, m.fidelity, m.relative_entropy);
                }
                None => out.push_str(",,,\n"),
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Vec<f64>,
    pub trace: TrainTrace,
    pub status: TrainStatus,
}

impl TrainOutcome {
    pub fn is_aborted(&self) -> bool {
        matches!(self.status, TrainStatus::Aborted { .. })
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    b1: f64,
    b2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, b1: f64, b2: f64, eps: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, b1, b2, eps }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.b1.powi(self.t);
        let c2 = 1.0 - self.b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * grad[i];
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Minimizes `loss` from `init`. `grad` must return one component per
/// parameter; `observe` sees every recorded parameter vector with its step.
pub fn minimize<L, G, M>(init: Vec<f64>, config: &TrainConfig, loss: L, grad: G, mut observe: M) -> Result<TrainOutcome>
where
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
    M: FnMut(usize, &[f64]) -> Option<Metrics>,
{
    config.validate()?;
    let mut params = init;
    let mut adam = Adam::new(params.len(), config.adam_beta1, config.adam_beta2, config.adam_epsilon);
    let mut lr = config.learning_rate;
    let mut current = loss(&params);
    let mut trace = TrainTrace { records: vec![TrainRecord { step: 0, loss: current, metrics: observe(0, &params) }] };
    let abort = |trace: TrainTrace, params: Vec<f64>, step: usize, reason: String| {
        Ok(TrainOutcome { params, trace, status: TrainStatus::Aborted { step, reason } })
    };
    if !current.is_finite() {
        return abort(trace, params, 0, format!("non-finite initial loss {current}"));
    }
    let mut quiet = 0;
    for step in 1..=config.max_steps {
        let g = grad(&params);
        if let Some(i) = g.iter().position(|x| !x.is_finite()) {
            return abort(trace, params, step, format!("non-finite gradient component {i}"));
        }
        match config.optimizer {
            Optimizer::Gd => params.iter_mut().zip(&g).for_each(|(p, gi)| *p -= lr * gi),
            Optimizer::Adam => adam.step(&mut params, &g, lr),
        }
        lr *= config.lr_decay;
        let next = loss(&params);
        if !next.is_finite() {
            return abort(trace, params, step, format!("non-finite loss {next}"));
        }
        trace.records.push(TrainRecord { step, loss: next, metrics: observe(step, &params) });
        quiet = if (next - current).abs() < config.convergence_tol { quiet + 1 } else { 0 };
        current = next;
        if quiet >= PATIENCE {
            return Ok(TrainOutcome { params, trace, status: TrainStatus::Converged { step } });
        }
    }
    Ok(TrainOutcome { params, trace, status: TrainStatus::MaxSteps })
}

//! Run configuration: one JSON document per run.
//!
//! ```json
//! {
//!   "experiment": { "kind": "vqt-heisenberg", "nx": 2, "ny": 2, "beta": 0.5 },
//!   "train": { "max_steps": 100 },
//!   "restarts": 20,
//!   "seed": 7
//! }
//! ```
//!
//! Omitted experiment fields take the defaults below. `train` is merged key by
//! key onto the experiment's default training schedule.

use std::path::PathBuf;

use qhbm_core::densesim::dense_cap;
use qhbm_core::gaussboson::BosonGradient;
use qhbm_core::optim::{Optimizer, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentKind {
    Bernoulli,
    Multinoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqtHeisenberg {
    pub nx: usize,
    pub ny: usize,
    pub beta: f64,
    pub jh: f64,
    pub jv: f64,
    pub layers: usize,
    pub latent: LatentKind,
    /// Write the final model and target density matrices of restart 0.
    pub dump_density: bool,
}

impl Default for VqtHeisenberg {
    fn default() -> Self {
        Self { nx: 2, ny: 2, beta: 0.5, jh: 1.0, jv: 1.0, layers: 3, latent: LatentKind::Multinoulli, dump_density: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSweep {
    pub betas: Vec<f64>,
    pub restarts: usize,
    pub j: f64,
    pub hx: f64,
    pub hz: f64,
}

impl Default for BetaSweep {
    fn default() -> Self {
        Self { betas: vec![0.1, 0.5, 1.0, 1.3, 2.0, 3.0], restarts: 50, j: -1.0, hx: 0.3, hz: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmhlAnsatzStudy {
    pub n: usize,
    pub beta: f64,
    pub hamiltonians: usize,
    /// Hamiltonian `h` is `random_coupling_chain(n, hamiltonian_seed + h)`.
    pub hamiltonian_seed: u64,
    pub layers: usize,
    pub sweep: Option<BetaSweep>,
}

impl Default for QmhlAnsatzStudy {
    fn default() -> Self {
        Self { n: 4, beta: 1.3, hamiltonians: 10, hamiltonian_seed: 1000, layers: 3, sweep: Some(BetaSweep::default()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainBlock {
    pub sites: usize,
    pub kept: usize,
    pub omega: f64,
    pub chi: f64,
}

impl ChainBlock {
    fn validate(&self, what: &str) -> CliResult<()> {
        if self.sites == 0 || self.kept == 0 || self.kept > self.sites {
            return cfg_err(format!("{what}: need 1 <= kept <= sites"));
        }
        if !(self.omega.is_finite() && self.chi.is_finite() && self.omega > 2.0 * self.chi.abs()) {
            return cfg_err(format!("{what}: chain is critical or unstable (need omega > 2|chi|)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BosonCompress {
    pub sites: usize,
    pub kept: usize,
    pub omega: f64,
    pub chi: f64,
    pub ratios: Vec<f64>,
    pub gradient: BosonGradient,
    /// Second chain whose trained modular modes are emitted.
    pub modes: Option<ChainBlock>,
}

impl BosonCompress {
    pub fn chain(&self) -> ChainBlock {
        ChainBlock { sites: self.sites, kept: self.kept, omega: self.omega, chi: self.chi }
    }
}

impl Default for BosonCompress {
    fn default() -> Self {
        Self {
            sites: 200,
            kept: 10,
            omega: 1.0,
            chi: 0.499,
            ratios: vec![0.1, 0.4, 0.7, 0.9],
            gradient: BosonGradient::Analytic,
            modes: Some(ChainBlock { sites: 100, kept: 12, omega: 1.0, chi: -0.2 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FermionDwave {
    pub nx: usize,
    pub ny: usize,
    pub beta: f64,
    pub t: f64,
    pub delta: f64,
    /// Brick-wall depth; defaults to three times the Majorana count.
    pub layers: Option<usize>,
    pub snapshot_every: usize,
    /// Dense verification; defaults to on when the system has at most 8 fermions.
    pub dense_check: Option<bool>,
}

impl Default for FermionDwave {
    fn default() -> Self {
        Self { nx: 2, ny: 2, beta: 1.0, t: 0.3, delta: 0.2, layers: None, snapshot_every: 20, dense_check: None }
    }
}

impl FermionDwave {
    pub fn n_fermions(&self) -> usize {
        2 * self.nx * self.ny
    }

    pub fn depth(&self) -> usize {
        self.layers.unwrap_or(3 * 2 * self.n_fermions())
    }

    pub fn dense(&self) -> bool {
        self.dense_check.unwrap_or(self.n_fermions() <= 8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    VqtHeisenberg(VqtHeisenberg),
    QmhlAnsatzStudy(QmhlAnsatzStudy),
    BosonCompress(BosonCompress),
    FermionDwave(FermionDwave),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::VqtHeisenberg(_) => "vqt-heisenberg",
            Experiment::QmhlAnsatzStudy(_) => "qmhl-ansatz-study",
            Experiment::BosonCompress(_) => "boson-compress",
            Experiment::FermionDwave(_) => "fermion-dwave",
        }
    }

    pub fn default_train(&self) -> TrainConfig {
        let base = TrainConfig::default();
        match self {
            Experiment::VqtHeisenberg(_) => TrainConfig { learning_rate: 1.0, max_steps: 200, ..base },
            Experiment::QmhlAnsatzStudy(_) => {
                TrainConfig { learning_rate: 0.05, max_steps: 200, optimizer: Optimizer::Adam, ..base }
            }
            Experiment::BosonCompress(_) => TrainConfig {
                learning_rate: 0.1,
                max_steps: 60000,
                optimizer: Optimizer::Adam,
                lr_decay: 0.99985,
                convergence_tol: 0.0,
                ..base
            },
            Experiment::FermionDwave(_) => TrainConfig {
                learning_rate: 0.1,
                max_steps: 150,
                optimizer: Optimizer::Adam,
                convergence_tol: 0.0,
                ..base
            },
        }
    }

    pub fn default_restarts(&self) -> usize {
        match self {
            Experiment::VqtHeisenberg(_) => 20,
            Experiment::QmhlAnsatzStudy(_) => 10,
            Experiment::BosonCompress(_) => 3,
            Experiment::FermionDwave(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub train: TrainConfig,
    pub restarts: usize,
    pub seed: u64,
    pub outdir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    #[serde(default)]
    train: Map<String, Value>,
    restarts: Option<usize>,
    #[serde(default)]
    seed: u64,
    outdir: Option<PathBuf>,
}

fn cfg_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

fn positive(name: &str, x: f64) -> CliResult<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        cfg_err(format!("{name} must be positive and finite, got {x}"))
    }
}

fn finite(name: &str, x: f64) -> CliResult<()> {
    if x.is_finite() {
        Ok(())
    } else {
        cfg_err(format!("{name} must be finite"))
    }
}

impl ExperimentConfig {
    /// Parses, applies defaults and validates.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut train = match serde_json::to_value(raw.experiment.default_train()) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("TrainConfig serializes to an object"),
        };
        train.extend(raw.train);
        let train: TrainConfig =
            serde_json::from_value(Value::Object(train)).map_err(|e| CliError::Config(format!("train: {e}")))?;
        let config = Self {
            restarts: raw.restarts.unwrap_or_else(|| raw.experiment.default_restarts()),
            experiment: raw.experiment,
            train,
            seed: raw.seed,
            outdir: raw.outdir,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.train.validate().map_err(|e| CliError::Config(format!("train: {e}")))?;
        if self.restarts == 0 {
            return cfg_err("restarts must be at least 1");
        }
        match &self.experiment {
            Experiment::VqtHeisenberg(c) => {
                if c.nx == 0 || c.ny == 0 {
                    return cfg_err("nx and ny must be positive");
                }
                let cap = dense_cap();
                if c.nx * c.ny > cap {
                    return cfg_err(format!("nx*ny = {} exceeds the dense cap of {cap}", c.nx * c.ny));
                }
                if c.layers == 0 {
                    return cfg_err("layers must be positive");
                }
                positive("beta", c.beta)?;
                finite("jh", c.jh)?;
                finite("jv", c.jv)?;
            }
            Experiment::QmhlAnsatzStudy(c) => {
                if c.n < 2 || c.n > dense_cap() {
                    return cfg_err(format!("n must lie in [2, {}]", dense_cap()));
                }
                if c.hamiltonians == 0 || c.layers == 0 {
                    return cfg_err("hamiltonians and layers must be positive");
                }
                positive("beta", c.beta)?;
                if let Some(s) = &c.sweep {
                    if s.restarts == 0 {
                        return cfg_err("sweep.restarts must be at least 1");
                    }
                    for &b in &s.betas {
                        positive("sweep beta", b)?;
                    }
                    finite("sweep.j", s.j)?;
                    finite("sweep.hx", s.hx)?;
                    finite("sweep.hz", s.hz)?;
                }
            }
            Experiment::BosonCompress(c) => {
                c.chain().validate("chain")?;
                if let Some(m) = &c.modes {
                    m.validate("modes")?;
                }
                if let Some(r) = c.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                    return cfg_err(format!("compression ratio {r} outside [0, 1]"));
                }
            }
            Experiment::FermionDwave(c) => {
                if c.nx == 0 || c.ny == 0 {
                    return cfg_err("nx and ny must be positive");
                }
                positive("beta", c.beta)?;
                finite("t", c.t)?;
                finite("delta", c.delta)?;
                if c.depth() == 0 {
                    return cfg_err("layers must be positive");
                }
                if c.dense() && c.n_fermions() > dense_cap().min(8) {
                    return cfg_err(format!("dense check needs at most {} fermions", dense_cap().min(8)));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Git-style content hash (`sha256("blob <len>\0" ++ bytes)`) of the
    /// effective config. The output directory is not an input and is left out.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&Self { outdir: None, ..self.clone() }).expect("config serializes");
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", bytes.len()).as_bytes());
        h.update(&bytes);
        hex::encode(h.finalize())
    }
}

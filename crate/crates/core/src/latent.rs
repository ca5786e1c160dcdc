//! Classical latent distributions diagonal in the computational basis.
//!
//! The factorized [`BernoulliLatent`] uses `K_j = θ_j |1⟩⟨1|_j`, so
//! `p_j = P(bit j = 1) = 1/(1 + e^{θ_j})`. The [`MultinoulliLatent`] stores one
//! modular energy per basis state and is the fully general diagonal model.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::densesim::DensityMatrix;
use crate::error::{check_dim, QhbmError, Result};
use crate::rng::{uniform01, uniform_vec};

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn bit(x: usize, n: usize, q: usize) -> bool {
    (x >> (n - 1 - q)) & 1 == 1
}

fn diagonal_of(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.dim()).map(|x| rho.matrix()[(x, x)].re).collect()
}

/// Shared interface of the latent families. Parameter gradients are with
/// respect to [`LatentModel::params`].
pub trait LatentModel {
    fn n_qubits(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// `p_θ(x)` for every basis index.
    fn probabilities(&self) -> Vec<f64>;
    /// Diagonal of the latent modular Hamiltonian `K_θ`.
    fn modular_energies(&self) -> Vec<f64>;
    fn entropy(&self) -> f64;
    fn log_partition(&self) -> f64;
    fn grad_log_partition(&self) -> Vec<f64>;
    /// `⟨∂_θ K_θ⟩` under a state with the given computational-basis diagonal.
    fn grad_modular_expectation_diag(&self, diag: &[f64]) -> Vec<f64>;
    /// `∂_θ Σ_x p_θ(x) v_x`.
    fn grad_weighted_probabilities(&self, values: &[f64]) -> Vec<f64>;
    fn grad_entropy(&self) -> Vec<f64>;
    fn sample(&self, rng: &mut dyn RngCore) -> usize;

    fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    fn latent_density(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(crate::linalg::CMatrix::from_diagonal(
            &nalgebra::DVector::from_iterator(
                self.dim(),
                self.probabilities().into_iter().map(|p| num_complex::Complex64::new(p, 0.0)),
            ),
        ))
    }

    /// `tr(K_θ ρ)`.
    fn modular_expectation(&self, rho: &DensityMatrix) -> Result<f64> {
        check_dim(self.dim(), rho.dim())?;
        Ok(self.modular_energies().iter().zip(diagonal_of(rho)).map(|(k, p)| k * p).sum())
    }

    fn grad_modular_expectation(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        check_dim(self.dim(), rho.dim())?;
        Ok(self.grad_modular_expectation_diag(&diagonal_of(rho)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliLatent {
    thetas: Vec<f64>,
}

impl BernoulliLatent {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() || thetas.iter().any(|t| !t.is_finite()) {
            return Err(QhbmError::InvalidArgument("Bernoulli latent needs finite thetas".into()));
        }
        Ok(Self { thetas })
    }

    /// θ_j i.i.d. uniform on [0, 1].
    pub fn random(n_qubits: usize, rng: &mut dyn RngCore) -> Self {
        Self { thetas: uniform_vec(rng, n_qubits, 0.0, 1.0) }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// `p_j = 1/(1 + e^{θ_j})`.
    pub fn excitation_probs(&self) -> Vec<f64> {
        self.thetas.iter().map(|&t| (-softplus(t)).exp()).collect()
    }
}

impl LatentModel for BernoulliLatent {
    fn n_qubits(&self) -> usize {
        self.thetas.len()
    }

    fn params(&self) -> &[f64] {
        &self.thetas
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.thetas
    }

    fn probabilities(&self) -> Vec<f64> {
        let n = self.n_qubits();
        let p = self.excitation_probs();
        (0..1usize << n)
            .map(|x| (0..n).map(|j| if bit(x, n, j) { p[j] } else { 1.0 - p[j] }).product())
            .collect()
    }

    fn modular_energies(&self) -> Vec<f64> {
        let n = self.n_qubits();
        (0..1usize << n)
            .map(|x| (0..n).filter(|&j| bit(x, n, j)).map(|j| self.thetas[j]).sum())
            .collect()
    }

    fn entropy(&self) -> f64 {
        self.thetas
            .iter()
            .map(|&t| {
                let (ln_p, ln_q) = (-softplus(t), -softplus(-t));
                -(ln_p.exp() * ln_p + ln_q.exp() * ln_q)
            })
            .sum()
    }

    fn log_partition(&self) -> f64 {
        self.thetas.iter().map(|&t| softplus(-t)).sum()
    }

    fn grad_log_partition(&self) -> Vec<f64> {
        self.excitation_probs().into_iter().map(|p| -p).collect()
    }

    fn grad_modular_expectation_diag(&self, diag: &[f64]) -> Vec<f64> {
        let n = self.n_qubits();
        (0..n)
            .map(|j| diag.iter().enumerate().filter(|(x, _)| bit(*x, n, j)).map(|(_, w)| w).sum())
            .collect()
    }

    fn grad_weighted_probabilities(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n_qubits();
        let p = self.excitation_probs();
        let probs = self.probabilities();
        (0..n)
            .map(|j| {
                probs
                    .iter()
                    .zip(values)
                    .enumerate()
                    .map(|(x, (px, v))| px * v * if bit(x, n, j) { -(1.0 - p[j]) } else { p[j] })
                    .sum()
            })
            .collect()
    }

    fn grad_entropy(&self) -> Vec<f64> {
        self.thetas
            .iter()
            .zip(self.excitation_probs())
            .map(|(&t, p)| -t * p * (1.0 - p))
            .collect()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let n = self.n_qubits();
        self.excitation_probs()
            .iter()
            .enumerate()
            .fold(0usize, |x, (j, &p)| if uniform01(rng) < p { x | (1 << (n - 1 - j)) } else { x })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinoulliLatent {
    energies: Vec<f64>,
}

impl MultinoulliLatent {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 || !energies.len().is_power_of_two() || energies.iter().any(|e| !e.is_finite()) {
            return Err(QhbmError::InvalidArgument(
                "multinoulli latent needs 2^n finite energies".into(),
            ));
        }
        Ok(Self { energies })
    }

    pub fn random(n_qubits: usize, rng: &mut dyn RngCore) -> Self {
        Self { energies: uniform_vec(rng, 1 << n_qubits, 0.0, 1.0) }
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    fn log_probs(&self) -> (Vec<f64>, f64) {
        let ln_z = self.log_partition();
        (self.energies.iter().map(|e| -e - ln_z).collect(), ln_z)
    }
}

impl LatentModel for MultinoulliLatent {
    fn n_qubits(&self) -> usize {
        self.energies.len().trailing_zeros() as usize
    }

    fn params(&self) -> &[f64] {
        &self.energies
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.energies
    }

    fn probabilities(&self) -> Vec<f64> {
        self.log_probs().0.into_iter().map(f64::exp).collect()
    }

    fn modular_energies(&self) -> Vec<f64> {
        self.energies.clone()
    }

    fn entropy(&self) -> f64 {
        -self.log_probs().0.into_iter().map(|lp| lp.exp() * lp).sum::<f64>()
    }

    fn log_partition(&self) -> f64 {
        let m = self.energies.iter().cloned().fold(f64::INFINITY, f64::min);
        -m + self.energies.iter().map(|e| (-(e - m)).exp()).sum::<f64>().ln()
    }

    fn grad_log_partition(&self) -> Vec<f64> {
        self.probabilities().into_iter().map(|p| -p).collect()
    }

    fn grad_modular_expectation_diag(&self, diag: &[f64]) -> Vec<f64> {
        diag.to_vec()
    }

    fn grad_weighted_probabilities(&self, values: &[f64]) -> Vec<f64> {
        let p = self.probabilities();
        let mean: f64 = p.iter().zip(values).map(|(a, b)| a * b).sum();
        p.iter().zip(values).map(|(py, vy)| -py * (vy - mean)).collect()
    }

    fn grad_entropy(&self) -> Vec<f64> {
        self.grad_weighted_probabilities(&self.energies)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let u = uniform01(rng);
        let mut acc = 0.0;
        let p = self.probabilities();
        for (x, px) in p.iter().enumerate() {
            acc += px;
            if u < acc {
                return x;
            }
        }
        p.len() - 1
    }
}

/// Either latent family, as stored in a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Latent {
    Bernoulli(BernoulliLatent),
    Multinoulli(MultinoulliLatent),
}

macro_rules! delegate {
    ($self:ident, $l:ident => $e:expr) => {
        match $self {
            Latent::Bernoulli($l) => $e,
            Latent::Multinoulli($l) => $e,
        }
    };
}

impl LatentModel for Latent {
    fn n_qubits(&self) -> usize {
        delegate!(self, l => l.n_qubits())
    }
    fn params(&self) -> &[f64] {
        delegate!(self, l => l.params())
    }
    fn params_mut(&mut self) -> &mut [f64] {
        delegate!(self, l => l.params_mut())
    }
    fn probabilities(&self) -> Vec<f64> {
        delegate!(self, l => l.probabilities())
    }
    fn modular_energies(&self) -> Vec<f64> {
        delegate!(self, l => l.modular_energies())
    }
    fn entropy(&self) -> f64 {
        delegate!(self, l => l.entropy())
    }
    fn log_partition(&self) -> f64 {
        delegate!(self, l => l.log_partition())
    }
    fn grad_log_partition(&self) -> Vec<f64> {
        delegate!(self, l => l.grad_log_partition())
    }
    fn grad_modular_expectation_diag(&self, diag: &[f64]) -> Vec<f64> {
        delegate!(self, l => l.grad_modular_expectation_diag(diag))
    }
    fn grad_weighted_probabilities(&self, values: &[f64]) -> Vec<f64> {
        delegate!(self, l => l.grad_weighted_probabilities(values))
    }
    fn grad_entropy(&self) -> Vec<f64> {
        delegate!(self, l => l.grad_entropy())
    }
    fn sample(&self, rng: &mut dyn RngCore) -> usize {
        delegate!(self, l => l.sample(rng))
    }
}

impl From<BernoulliLatent> for Latent {
    fn from(l: BernoulliLatent) -> Self {
        Latent::Bernoulli(l)
    }
}

impl From<MultinoulliLatent> for Latent {
    fn from(l: MultinoulliLatent) -> Self {
        Latent::Multinoulli(l)
    }
}

#[derive(Serialize, Deserialize)]
struct LatentDoc {
    kind: String,
    params: Vec<f64>,
}

impl Latent {
    pub fn kind(&self) -> &'static str {
        match self {
            Latent::Bernoulli(_) => "bernoulli",
            Latent::Multinoulli(_) => "multinoulli",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LatentDoc { kind: self.kind().into(), params: self.params().to_vec() })
            .expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: LatentDoc = serde_json::from_str(s).map_err(|e| QhbmError::Parse(e.to_string()))?;
        match doc.kind.as_str() {
            "bernoulli" => Ok(BernoulliLatent::new(doc.params)?.into()),
            "multinoulli" => Ok(MultinoulliLatent::new(doc.params)?.into()),
            other => Err(QhbmError::Parse(format!("unknown latent kind {other:?}"))),
        }
    }
}

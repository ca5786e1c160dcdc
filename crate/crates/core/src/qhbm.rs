//! Quantum Hamiltonian-based models: a latent distribution pushed through a QNN.

use crate::densesim::{
    apply_unitary, fidelity, relative_entropy, thermal_state_oracle, trace_distance, von_neumann_entropy,
    DensityMatrix,
};
use crate::error::{check_dim, QhbmError, Result};
use crate::hamiltonians::PauliSumHamiltonian;
use crate::latent::{Latent, LatentModel};
use crate::linalg::{dagger, CMatrix};
use crate::optim::{minimize, Metrics, TrainConfig, TrainStatus, TrainTrace};
use crate::parallel::Execution;
use crate::qnn::{finite_diff_grad, QnnAnsatz};

#[derive(Debug, Clone, PartialEq)]
pub struct QhbmModel {
    pub latent: Latent,
    pub ansatz: QnnAnsatz,
}

impl QhbmModel {
    pub fn new(latent: impl Into<Latent>, ansatz: QnnAnsatz) -> Result<Self> {
        let latent = latent.into();
        check_dim(ansatz.n_qubits(), latent.n_qubits())?;
        Ok(Self { latent, ansatz })
    }

    pub fn n_qubits(&self) -> usize {
        self.ansatz.n_qubits()
    }

    pub fn n_theta(&self) -> usize {
        self.latent.params().len()
    }

    pub fn n_params(&self) -> usize {
        self.n_theta() + self.ansatz.params().len()
    }

    /// θ followed by φ.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.latent.params().to_vec();
        p.extend_from_slice(self.ansatz.params());
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.n_params(), params.len())?;
        let (theta, phi) = params.split_at(self.n_theta());
        self.latent.params_mut().copy_from_slice(theta);
        self.ansatz.params_mut().copy_from_slice(phi);
        Ok(())
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let mut m = self.clone();
        m.set_params(params)?;
        Ok(m)
    }

    pub fn visible_state(&self) -> DensityMatrix {
        apply_unitary(&self.latent.latent_density(), &self.ansatz.build_unitary()).expect("dimensions checked")
    }
}

/// `diag(U† H U)` under the ansatz unitary.
fn rotated_diagonal(ansatz: &QnnAnsatz, h: &CMatrix) -> Vec<f64> {
    let u = ansatz.build_unitary();
    let hu = h * u.matrix();
    let u = u.matrix();
    (0..u.ncols()).map(|x| u.column(x).dotc(&hu.column(x)).re).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense VQT objective `β tr(ρ H) − S(ρ)`.
#[derive(Debug, Clone)]
pub struct Vqt {
    h: CMatrix,
    beta: f64,
    n_qubits: usize,
}

impl Vqt {
    pub fn new(h: &PauliSumHamiltonian, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(QhbmError::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { h: h.dense(), beta, n_qubits: h.n_qubits() })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn check(&self, model: &QhbmModel) -> Result<()> {
        check_dim(self.n_qubits, model.n_qubits())
    }

    fn energy(&self, model: &QhbmModel) -> f64 {
        dot(&model.latent.probabilities(), &rotated_diagonal(&model.ansatz, &self.h))
    }

    pub fn loss(&self, model: &QhbmModel) -> Result<f64> {
        self.check(model)?;
        Ok(self.beta * self.energy(model) - model.latent.entropy())
    }

    /// Analytic θ-components, central differences over φ.
    pub fn grad(&self, model: &QhbmModel, epsilon: f64, exec: Execution) -> Result<Vec<f64>> {
        self.check(model)?;
        let diag = rotated_diagonal(&model.ansatz, &self.h);
        let mut g: Vec<f64> = model
            .latent
            .grad_weighted_probabilities(&diag)
            .into_iter()
            .zip(model.latent.grad_entropy())
            .map(|(e, s)| self.beta * e - s)
            .collect();
        let probs = model.latent.probabilities();
        let base = &model.ansatz;
        g.extend(finite_diff_grad(
            exec,
            |phi| {
                let a = base.with_params(phi).expect("same shape");
                self.beta * dot(&probs, &rotated_diagonal(&a, &self.h))
            },
            model.ansatz.params(),
            epsilon,
        ));
        Ok(g)
    }
}

pub fn vqt_loss(model: &QhbmModel, h: &PauliSumHamiltonian, beta: f64) -> Result<f64> {
    Vqt::new(h, beta)?.loss(model)
}

pub fn vqt_grad(model: &QhbmModel, h: &PauliSumHamiltonian, beta: f64, epsilon: f64) -> Result<Vec<f64>> {
    Vqt::new(h, beta)?.grad(model, epsilon, Execution::default())
}

/// QMHL objective `tr(U† σ U K_θ) + ln Z_θ`.
#[derive(Debug, Clone)]
pub struct Qmhl {
    sigma: DensityMatrix,
}

impl Qmhl {
    pub fn new(sigma: DensityMatrix) -> Self {
        Self { sigma }
    }

    pub fn data(&self) -> &DensityMatrix {
        &self.sigma
    }

    fn pulled_diagonal(&self, ansatz: &QnnAnsatz) -> Vec<f64> {
        let u = ansatz.build_unitary();
        let su = self.sigma.matrix() * u.matrix();
        let u = u.matrix();
        (0..u.ncols()).map(|x| u.column(x).dotc(&su.column(x)).re).collect()
    }

    pub fn loss(&self, model: &QhbmModel) -> Result<f64> {
        check_dim(self.sigma.dim(), model.ansatz.dim())?;
        let diag = self.pulled_diagonal(&model.ansatz);
        Ok(dot(&model.latent.modular_energies(), &diag) + model.latent.log_partition())
    }

    pub fn grad(&self, model: &QhbmModel, epsilon: f64, exec: Execution) -> Result<Vec<f64>> {
        check_dim(self.sigma.dim(), model.ansatz.dim())?;
        let diag = self.pulled_diagonal(&model.ansatz);
        let mut g: Vec<f64> = model
            .latent
            .grad_modular_expectation_diag(&diag)
            .into_iter()
            .zip(model.latent.grad_log_partition())
            .map(|(a, b)| a + b)
            .collect();
        let energies = model.latent.modular_energies();
        let base = &model.ansatz;
        g.extend(finite_diff_grad(
            exec,
            |phi| dot(&energies, &self.pulled_diagonal(&base.with_params(phi).expect("same shape"))),
            model.ansatz.params(),
            epsilon,
        ));
        Ok(g)
    }
}

pub fn qmhl_loss(model: &QhbmModel, sigma: &DensityMatrix) -> Result<f64> {
    Qmhl::new(sigma.clone()).loss(model)
}

pub fn qmhl_grad(model: &QhbmModel, sigma: &DensityMatrix, epsilon: f64) -> Result<Vec<f64>> {
    Qmhl::new(sigma.clone()).grad(model, epsilon, Execution::default())
}

#[derive(Debug, Clone)]
pub enum Objective {
    Vqt(Vqt),
    Qmhl(Qmhl),
}

impl Objective {
    pub fn vqt(h: &PauliSumHamiltonian, beta: f64) -> Result<Self> {
        Ok(Objective::Vqt(Vqt::new(h, beta)?))
    }

    pub fn qmhl(sigma: DensityMatrix) -> Self {
        Objective::Qmhl(Qmhl::new(sigma))
    }

    pub fn loss(&self, model: &QhbmModel) -> Result<f64> {
        match self {
            Objective::Vqt(v) => v.loss(model),
            Objective::Qmhl(q) => q.loss(model),
        }
    }

    pub fn grad(&self, model: &QhbmModel, epsilon: f64, exec: Execution) -> Result<Vec<f64>> {
        match self {
            Objective::Vqt(v) => v.grad(model, epsilon, exec),
            Objective::Qmhl(q) => q.grad(model, epsilon, exec),
        }
    }
}

/// Dense reference a training run is compared against.
#[derive(Debug, Clone)]
pub enum Target {
    /// Compare `D(model ‖ target)`, the VQT direction.
    Thermal(DensityMatrix),
    /// Compare `D(target ‖ model)`, the QMHL direction.
    Data(DensityMatrix),
}

impl Target {
    pub fn for_vqt(h: &PauliSumHamiltonian, beta: f64) -> Result<Self> {
        Ok(Target::Thermal(thermal_state_oracle(h, beta)?))
    }

    pub fn state(&self) -> &DensityMatrix {
        match self {
            Target::Thermal(s) | Target::Data(s) => s,
        }
    }

    pub fn metrics(&self, rho: &DensityMatrix) -> Metrics {
        let sigma = self.state();
        let relative_entropy = match self {
            Target::Thermal(s) => relative_entropy(rho, s),
            Target::Data(s) => relative_entropy(s, rho),
        }
        .expect("dimensions checked");
        Metrics {
            trace_distance: trace_distance(rho, sigma).expect("dimensions checked"),
            fidelity: fidelity(rho, sigma).expect("dimensions checked"),
            relative_entropy,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QhbmTrainResult {
    pub model: QhbmModel,
    pub trace: TrainTrace,
    pub status: TrainStatus,
}

/// Trains `model` on `objective`; metrics are recorded per step when `target` is given.
pub fn train(
    model: &QhbmModel,
    objective: &Objective,
    config: &TrainConfig,
    target: Option<&Target>,
    exec: Execution,
) -> Result<QhbmTrainResult> {
    objective.loss(model)?;
    if let Some(t) = target {
        check_dim(model.ansatz.dim(), t.state().dim())?;
    }
    let at = |p: &[f64]| model.with_params(p).expect("same shape");
    let outcome = minimize(
        model.params(),
        config,
        |p| objective.loss(&at(p)).expect("dimensions checked"),
        |p| objective.grad(&at(p), config.epsilon_fd, exec).expect("dimensions checked"),
        |_, p| target.map(|t| t.metrics(&at(p).visible_state())),
    )?;
    Ok(QhbmTrainResult { model: at(&outcome.params), trace: outcome.trace, status: outcome.status })
}

/// `S(visible) − S(latent)`, zero up to round-off for any unitary ansatz.
pub fn entropy_defect(model: &QhbmModel) -> f64 {
    von_neumann_entropy(&model.visible_state()) - model.latent.entropy()
}

/// Adjoint action used by diagnostics: `U† A U`.
pub fn pull_back_operator(ansatz: &QnnAnsatz, a: &CMatrix) -> CMatrix {
    let u = ansatz.build_unitary();
    dagger(u.matrix()) * a * u.matrix()
}

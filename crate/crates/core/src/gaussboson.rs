//! Bosonic Gaussian states on covariance matrices.
//!
//! Quadratures are ordered `(x_1..x_N, p_1..p_N)` with vacuum covariance `I`
//! and `Ω = [[0, I], [-I, 0]]`. A model is a product of thermal oscillators
//! `⊕ diag(ν_j, ν_j)`, `ν_j = coth(ω_j / 2)`, pushed forward by a symplectic
//! `S = O₁ D O₂`: its covariance is `S Γ_θ Sᵀ`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, QhbmError, Result};
use crate::linalg::{antisymmetric_canonical, eigh, eigh_real, exp_antihermitian, max_abs, symmetric_function, CMatrix, RMatrix};
use crate::matio::{header_usize, read_matrix_csv, write_matrix_csv};
use crate::optim::{minimize, TrainConfig, TrainStatus, TrainTrace};
use crate::parallel::Execution;
use crate::qnn::finite_diff_grad;
use crate::rng::uniform_vec;

const SYMMETRY_TOL: f64 = 1e-10;
const UNCERTAINTY_TOL: f64 = 1e-9;

/// `Ω` in xxpp ordering.
pub fn omega_matrix(n_modes: usize) -> RMatrix {
    let mut m = RMatrix::zeros(2 * n_modes, 2 * n_modes);
    for j in 0..n_modes {
        m[(j, n_modes + j)] = 1.0;
        m[(n_modes + j, j)] = -1.0;
    }
    m
}

/// `max |SᵀΩS − Ω|`.
pub fn symplectic_residual(s: &RMatrix) -> f64 {
    let om = omega_matrix(s.nrows() / 2);
    max_abs(&(s.transpose() * &om * s - om))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BosonCovariance {
    gamma: RMatrix,
}

impl BosonCovariance {
    /// Validates symmetry and the uncertainty relation `ν_j ≥ 1`.
    pub fn new(gamma: RMatrix) -> Result<Self> {
        let n = gamma.nrows();
        if n == 0 || n % 2 != 0 || gamma.ncols() != n {
            return Err(QhbmError::InvalidState(format!(
                "covariance must be a non-empty even square matrix, got {}x{}",
                n,
                gamma.ncols()
            )));
        }
        let asym = max_abs(&(&gamma - gamma.transpose()));
        if asym > SYMMETRY_TOL * max_abs(&gamma).max(1.0) {
            return Err(QhbmError::InvalidState(format!("covariance is not symmetric (residual {asym:e})")));
        }
        let gamma = (&gamma + gamma.transpose()) * 0.5;
        let nus = symplectic_spectrum(&gamma)?;
        if nus[0] < 1.0 - UNCERTAINTY_TOL {
            return Err(QhbmError::InvalidState(format!(
                "uncertainty relation violated: smallest symplectic eigenvalue {}",
                nus[0]
            )));
        }
        Ok(Self { gamma })
    }

    pub fn from_matrix_unchecked(gamma: RMatrix) -> Self {
        Self { gamma }
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self { gamma: RMatrix::identity(2 * n_modes, 2 * n_modes) }
    }

    /// Product of single-mode thermal states `diag(ν_j, ν_j)`.
    pub fn thermal(nus: &[f64]) -> Result<Self> {
        let n = nus.len();
        let mut g = RMatrix::zeros(2 * n, 2 * n);
        for (j, &nu) in nus.iter().enumerate() {
            g[(j, j)] = nu;
            g[(n + j, n + j)] = nu;
        }
        Self::new(g)
    }

    pub fn n_modes(&self) -> usize {
        self.gamma.nrows() / 2
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.gamma
    }

    /// Symplectic eigenvalues, ascending.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        symplectic_spectrum(&self.gamma).expect("validated covariance is positive definite")
    }

    pub fn entropy(&self) -> f64 {
        boson_entropy_nus(&self.symplectic_eigenvalues()).expect("validated covariance")
    }

    pub fn to_csv(&self) -> String {
        write_matrix_csv(&[("n_modes", self.n_modes().to_string()), ("ordering", "xxpp".into())], &self.gamma)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (fields, m) = read_matrix_csv(text)?;
        if fields.get("ordering").map(String::as_str) != Some("xxpp") {
            return Err(QhbmError::Parse("expected ordering=xxpp".into()));
        }
        let n = header_usize(&fields, "n_modes")?;
        if 2 * n != m.nrows() {
            return Err(QhbmError::Parse(format!("header says {n} modes, matrix has {} rows", m.nrows())));
        }
        Self::new(m)
    }
}

fn canonical(gamma: &RMatrix) -> Result<(Vec<f64>, RMatrix)> {
    let (values, _) = eigh_real(gamma);
    if values[0] <= 0.0 {
        return Err(QhbmError::InvalidState(format!(
            "covariance is not positive definite (eigenvalue {})",
            values[0]
        )));
    }
    let root = symmetric_function(gamma, f64::sqrt);
    let k = &root * omega_matrix(gamma.nrows() / 2) * &root;
    Ok(antisymmetric_canonical(&k))
}

fn symplectic_spectrum(gamma: &RMatrix) -> Result<Vec<f64>> {
    Ok(canonical(gamma)?.0)
}

/// Symplectic eigenvalues `ν` (ascending) and `S` with `S Γ Sᵀ = ⊕ diag(ν_j, ν_j)`.
pub fn williamson_oracle(gamma: &BosonCovariance) -> Result<(Vec<f64>, RMatrix)> {
    let (nus, q) = canonical(gamma.matrix())?;
    if nus[0] < 1.0 - UNCERTAINTY_TOL {
        return Err(QhbmError::InvalidState(format!(
            "uncertainty relation violated: smallest symplectic eigenvalue {}",
            nus[0]
        )));
    }
    // qᵀ Γ^{1/2} Ω Γ^{1/2} q = ⊕ ν_j J, so Λ^{1/2} qᵀ Γ^{-1/2} is symplectic
    // in the interleaved ordering; permute rows to xxpp.
    let n = nus.len();
    let inv_root = symmetric_function(gamma.matrix(), |x| 1.0 / x.sqrt());
    let interleaved = q.transpose() * inv_root;
    let mut s = RMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        let w = nus[j].sqrt();
        s.set_row(j, &(interleaved.row(2 * j) * w));
        s.set_row(n + j, &(interleaved.row(2 * j + 1) * w));
    }
    Ok((nus, s))
}

fn ln_one_minus_exp(omega: f64) -> f64 {
    // ln(1 − e^{−ω}) without cancellation at either end.
    if omega > std::f64::consts::LN_2 {
        (-(-omega).exp()).ln_1p()
    } else {
        (-(-omega).exp_m1()).ln()
    }
}

fn check_omegas(omegas: &[f64]) -> Result<()> {
    match omegas.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        Some(w) => Err(QhbmError::InvalidArgument(format!("frequencies must be positive and finite, got {w}"))),
        None => Ok(()),
    }
}

/// `Σ_j ω_j / (e^{ω_j} − 1) − ln(1 − e^{−ω_j})`.
pub fn boson_entropy(omegas: &[f64]) -> Result<f64> {
    check_omegas(omegas)?;
    Ok(omegas.iter().map(|&w| w / w.exp_m1() - ln_one_minus_exp(w)).sum())
}

/// Entropy from symplectic eigenvalues; `ν = 1` contributes 0.
pub fn boson_entropy_nus(nus: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &nu in nus {
        if !(nu >= 1.0 - UNCERTAINTY_TOL) {
            return Err(QhbmError::InvalidArgument(format!("symplectic eigenvalue {nu} below 1")));
        }
        let plus = (nu + 1.0) / 2.0;
        let minus = (nu - 1.0) / 2.0;
        s += plus * plus.ln();
        if minus > 0.0 {
            s -= minus * minus.ln();
        }
    }
    Ok(s)
}

/// `Σ_j −ω_j/2 − ln(1 − e^{−ω_j})`.
pub fn boson_log_partition(omegas: &[f64]) -> Result<f64> {
    check_omegas(omegas)?;
    Ok(omegas.iter().map(|&w| -w / 2.0 - ln_one_minus_exp(w)).sum())
}

pub fn nu_from_omega(omega: f64) -> f64 {
    1.0 / (omega / 2.0).tanh()
}

/// Inverse of [`nu_from_omega`]; infinite at `ν = 1`.
pub fn omega_from_nu(nu: f64) -> f64 {
    ((nu + 1.0) / (nu - 1.0)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BosonLatent {
    omegas: Vec<f64>,
}

impl BosonLatent {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(QhbmError::InvalidArgument("latent needs at least one mode".into()));
        }
        check_omegas(&omegas)?;
        Ok(Self { omegas })
    }

    pub fn from_nus(nus: &[f64]) -> Result<Self> {
        if let Some(nu) = nus.iter().find(|nu| !(**nu > 1.0)) {
            return Err(QhbmError::InvalidArgument(format!("ν = {nu} has no finite frequency")));
        }
        Self::new(nus.iter().map(|&nu| omega_from_nu(nu)).collect())
    }

    pub fn n_modes(&self) -> usize {
        self.omegas.len()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn nus(&self) -> Vec<f64> {
        self.omegas.iter().map(|&w| nu_from_omega(w)).collect()
    }

    pub fn covariance(&self) -> BosonCovariance {
        BosonCovariance::thermal(&self.nus()).expect("ν ≥ 1 by construction")
    }

    pub fn entropy(&self) -> f64 {
        boson_entropy(&self.omegas).expect("validated")
    }

    pub fn log_partition(&self) -> f64 {
        boson_log_partition(&self.omegas).expect("validated")
    }
}

/// Bloch-Messiah parameters: two passive generators (`N²` reals each: `N`
/// diagonal phases, then `(re, im)` per pair `j < k`) and `N` log-squeezes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticParams {
    pub n_modes: usize,
    pub passive1: Vec<f64>,
    pub squeezes: Vec<f64>,
    pub passive2: Vec<f64>,
}

impl SymplecticParams {
    pub fn param_count(n_modes: usize) -> usize {
        2 * n_modes * n_modes + n_modes
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            n_modes,
            passive1: vec![0.0; n_modes * n_modes],
            squeezes: vec![0.0; n_modes],
            passive2: vec![0.0; n_modes * n_modes],
        }
    }

    /// Passive parameters `U[0, 1)`, squeezes `U[-s, s)`.
    pub fn random(n_modes: usize, squeeze_scale: f64, rng: &mut dyn RngCore) -> Self {
        let nn = n_modes * n_modes;
        Self {
            n_modes,
            passive1: uniform_vec(rng, nn, 0.0, 1.0),
            squeezes: uniform_vec(rng, n_modes, -squeeze_scale, squeeze_scale),
            passive2: uniform_vec(rng, nn, 0.0, 1.0),
        }
    }

    pub fn from_flat(n_modes: usize, flat: &[f64]) -> Result<Self> {
        let expected = Self::param_count(n_modes);
        if flat.len() != expected {
            return Err(QhbmError::ParameterCount { expected, got: flat.len() });
        }
        let nn = n_modes * n_modes;
        Ok(Self {
            n_modes,
            passive1: flat[..nn].to_vec(),
            squeezes: flat[nn..nn + n_modes].to_vec(),
            passive2: flat[nn + n_modes..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.passive1.clone();
        v.extend_from_slice(&self.squeezes);
        v.extend_from_slice(&self.passive2);
        v
    }

    fn check(&self) -> Result<()> {
        let nn = self.n_modes * self.n_modes;
        check_dim(nn, self.passive1.len())?;
        check_dim(self.n_modes, self.squeezes.len())?;
        check_dim(nn, self.passive2.len())
    }

    /// `(S, S⁻¹)` with `S = O₁ D O₂`.
    pub fn realize_with_inverse(&self) -> Result<(RMatrix, RMatrix)> {
        self.check()?;
        let n = self.n_modes;
        let o1 = passive_orthogonal(n, &self.passive1);
        let o2 = passive_orthogonal(n, &self.passive2);
        let d = RMatrix::from_fn(2 * n, 2 * n, |r, c| {
            if r != c {
                0.0
            } else if r < n {
                self.squeezes[r].exp()
            } else {
                (-self.squeezes[r - n]).exp()
            }
        });
        let d_inv = RMatrix::from_fn(2 * n, 2 * n, |r, c| if r == c { 1.0 / d[(r, r)] } else { 0.0 });
        let s = &o1 * &d * &o2;
        let s_inv = o2.transpose() * d_inv * o1.transpose();
        Ok((s, s_inv))
    }
}

pub fn realize_symplectic(p: &SymplecticParams) -> Result<RMatrix> {
    Ok(p.realize_with_inverse()?.0)
}

/// Anti-Hermitian generator from `N²` reals.
pub fn passive_generator(n: usize, params: &[f64]) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    for j in 0..n {
        a[(j, j)] = Complex64::new(0.0, params[j]);
    }
    let mut idx = n;
    for j in 0..n {
        for k in j + 1..n {
            let (re, im) = (params[idx], params[idx + 1]);
            a[(j, k)] = Complex64::new(re, im);
            a[(k, j)] = Complex64::new(-re, im);
            idx += 2;
        }
    }
    a
}

/// Orthogonal symplectic image `[[X, Y], [−Y, X]]` of `exp(A) = X + iY`.
pub fn passive_orthogonal(n: usize, params: &[f64]) -> RMatrix {
    let u = exp_antihermitian(&passive_generator(n, params));
    RMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = u[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => z.im,
            (false, true) => -z.im,
        }
    })
}

/// `S (⊕ diag(ν_j, ν_j)) Sᵀ` with `ν_j ~ U[1, max_nu)` and a random Bloch-Messiah `S`.
pub fn random_covariance(n_modes: usize, max_nu: f64, squeeze_scale: f64, rng: &mut dyn RngCore) -> BosonCovariance {
    let nus = uniform_vec(rng, n_modes, 1.0, max_nu);
    let s = realize_symplectic(&SymplecticParams::random(n_modes, squeeze_scale, rng)).expect("consistent shape");
    let g = &s * BosonCovariance::thermal(&nus).expect("ν ≥ 1").matrix() * s.transpose();
    BosonCovariance::from_matrix_unchecked((&g + g.transpose()) * 0.5)
}

/// Ground state of `Σ_j ω x_j² + p_j² + 2χ x_j x_{j+1}` on a ring of `n` sites:
/// `Γ_xx = V^{-1/2}`, `Γ_pp = V^{1/2}`.
pub fn harmonic_chain_ground(n: usize, omega: f64, chi: f64) -> Result<BosonCovariance> {
    if n == 0 {
        return Err(QhbmError::InvalidArgument("chain needs at least one site".into()));
    }
    if !(omega.is_finite() && chi.is_finite() && omega > 2.0 * chi.abs()) {
        return Err(QhbmError::Unstable(format!("need ω > 2|χ|, got ω = {omega}, χ = {chi}")));
    }
    let mut v = RMatrix::from_diagonal_element(n, n, omega);
    for j in 0..n {
        let k = (j + 1) % n;
        v[(j, k)] += chi;
        v[(k, j)] += chi;
    }
    let (values, _) = eigh_real(&v);
    if values[0] <= 0.0 {
        return Err(QhbmError::Unstable(format!("potential matrix has eigenvalue {}", values[0])));
    }
    let xx = symmetric_function(&v, |x| 1.0 / x.sqrt());
    let pp = symmetric_function(&v, f64::sqrt);
    let mut g = RMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(&xx);
    g.view_mut((n, n), (n, n)).copy_from(&pp);
    Ok(BosonCovariance::from_matrix_unchecked((&g + g.transpose()) * 0.5))
}

/// Principal submatrix on the `(x, p)` rows of the kept modes, in the given order.
pub fn partial_trace_modes(gamma: &BosonCovariance, keep: &[usize]) -> Result<BosonCovariance> {
    let n = gamma.n_modes();
    if keep.is_empty() {
        return Err(QhbmError::InvalidArgument("must keep at least one mode".into()));
    }
    let mut seen = vec![false; n];
    for &k in keep {
        if k >= n || seen[k] {
            return Err(QhbmError::InvalidArgument(format!("invalid or repeated mode index {k} of {n}")));
        }
        seen[k] = true;
    }
    let m = keep.len();
    let idx: Vec<usize> = keep.iter().copied().chain(keep.iter().map(|k| k + n)).collect();
    let g = gamma.matrix();
    Ok(BosonCovariance::from_matrix_unchecked(RMatrix::from_fn(2 * m, 2 * m, |r, c| g[(idx[r], idx[c])])))
}

fn pulled_back(s_inv: &RMatrix, gamma_d: &BosonCovariance) -> RMatrix {
    s_inv * gamma_d.matrix() * s_inv.transpose()
}

fn cross_entropy(omegas: &[f64], pulled: &RMatrix) -> f64 {
    let n = omegas.len();
    omegas
        .iter()
        .enumerate()
        .map(|(j, &w)| w / 4.0 * (pulled[(j, j)] + pulled[(n + j, n + j)] - 2.0) - ln_one_minus_exp(w))
        .sum()
}

/// `⟨K_θ⟩ + ln Z_θ` with `⟨K_θ⟩ = Σ_j ω_j (Γ'_{x_j x_j} + Γ'_{p_j p_j}) / 4`
/// on the pulled-back data `Γ' = S⁻¹ Γ_D S⁻ᵀ`.
pub fn qmhl_boson_loss(latent: &BosonLatent, params: &SymplecticParams, gamma_d: &BosonCovariance) -> Result<f64> {
    check_dim(gamma_d.n_modes(), latent.n_modes())?;
    check_dim(gamma_d.n_modes(), params.n_modes)?;
    let (_, s_inv) = params.realize_with_inverse()?;
    Ok(cross_entropy(latent.omegas(), &pulled_back(&s_inv, gamma_d)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BosonModel {
    pub latent: BosonLatent,
    pub symplectic: SymplecticParams,
}

impl BosonModel {
    pub fn new(latent: BosonLatent, symplectic: SymplecticParams) -> Result<Self> {
        check_dim(latent.n_modes(), symplectic.n_modes)?;
        symplectic.check()?;
        Ok(Self { latent, symplectic })
    }

    /// `ln ω ~ U[0, 1)`, passive parameters `U[0, 1)`, no squeezing.
    pub fn random(n_modes: usize, rng: &mut dyn RngCore) -> Self {
        let omegas = uniform_vec(rng, n_modes, 0.0, 1.0).into_iter().map(f64::exp).collect();
        let symplectic = SymplecticParams::random(n_modes, 0.0, rng);
        Self { latent: BosonLatent { omegas }, symplectic }
    }

    pub fn n_modes(&self) -> usize {
        self.latent.n_modes()
    }

    pub fn n_params(&self) -> usize {
        self.n_modes() + SymplecticParams::param_count(self.n_modes())
    }

    /// `ln ω` followed by the flat symplectic parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.latent.omegas.iter().map(|w| w.ln()).collect();
        p.extend(self.symplectic.to_flat());
        p
    }

    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let n = self.n_modes();
        if p.len() != self.n_params() {
            return Err(QhbmError::ParameterCount { expected: self.n_params(), got: p.len() });
        }
        let latent = BosonLatent::new(p[..n].iter().map(|x| x.exp()).collect())?;
        Ok(Self { latent, symplectic: SymplecticParams::from_flat(n, &p[n..])? })
    }

    pub fn symplectic_matrix(&self) -> RMatrix {
        realize_symplectic(&self.symplectic).expect("validated shape")
    }

    /// `S Γ_θ Sᵀ`.
    pub fn covariance(&self) -> BosonCovariance {
        let s = self.symplectic_matrix();
        BosonCovariance::from_matrix_unchecked(&s * self.latent.covariance().matrix() * s.transpose())
    }

    pub fn loss(&self, gamma_d: &BosonCovariance) -> Result<f64> {
        qmhl_boson_loss(&self.latent, &self.symplectic, gamma_d)
    }
}

/// Loss as a function of the flat parameter vector; non-finite frequencies give `+∞`.
fn flat_loss(n: usize, p: &[f64], gamma_d: &BosonCovariance) -> f64 {
    let omegas: Vec<f64> = p[..n].iter().map(|x| x.exp()).collect();
    if check_omegas(&omegas).is_err() {
        return f64::INFINITY;
    }
    let sp = SymplecticParams::from_flat(n, &p[n..]).expect("length checked by caller");
    let (_, s_inv) = sp.realize_with_inverse().expect("shape checked");
    cross_entropy(&omegas, &pulled_back(&s_inv, gamma_d))
}

/// Central differences over all model parameters.
pub fn qmhl_boson_grad(model: &BosonModel, gamma_d: &BosonCovariance, epsilon: f64, exec: Execution) -> Result<Vec<f64>> {
    check_dim(gamma_d.n_modes(), model.n_modes())?;
    let n = model.n_modes();
    Ok(finite_diff_grad(exec, |p| flat_loss(n, p, gamma_d), &model.params(), epsilon))
}

/// Gradient of `exp(A)`-based passive blocks: maps `∂L/∂O` (with `dL = tr(Gᵀ dO)`)
/// to `∂L/∂params` through the divided differences of `exp` on the spectrum of `A`.
fn passive_param_grad(n: usize, params: &[f64], g: &RMatrix) -> Vec<f64> {
    let c = CMatrix::from_fn(n, n, |j, k| {
        Complex64::new(g[(j, k)] + g[(n + j, n + k)], g[(j, n + k)] - g[(n + j, k)])
    });
    let h = passive_generator(n, params) * Complex64::new(0.0, -1.0);
    let (lambda, v) = eigh(&h);
    let ct = v.adjoint() * c * &v;
    let inner = CMatrix::from_fn(n, n, |j, k| {
        let (a, b) = (lambda[j], lambda[k]);
        let half = (a - b) / 2.0;
        let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
        (Complex64::from_polar(1.0, (a + b) / 2.0) * sinc).conj() * ct[(j, k)]
    });
    let ga = &v * inner * v.adjoint();
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        out.push(ga[(j, j)].im);
    }
    for j in 0..n {
        for k in j + 1..n {
            out.push(ga[(j, k)].re - ga[(k, j)].re);
            out.push(ga[(j, k)].im + ga[(k, j)].im);
        }
    }
    out
}

/// Exact gradient of the loss in the [`BosonModel::params`] layout.
pub fn qmhl_boson_grad_analytic(model: &BosonModel, gamma_d: &BosonCovariance) -> Result<Vec<f64>> {
    check_dim(gamma_d.n_modes(), model.n_modes())?;
    let n = model.n_modes();
    let sp = &model.symplectic;
    let omegas = model.latent.omegas();
    let o1 = passive_orthogonal(n, &sp.passive1);
    let o2 = passive_orthogonal(n, &sp.passive2);
    let dinv: Vec<f64> = (0..2 * n).map(|a| if a < n { (-sp.squeezes[a]).exp() } else { sp.squeezes[a - n].exp() }).collect();
    let w = RMatrix::from_fn(2 * n, 2 * n, |r, c| if r == c { omegas[r % n] } else { 0.0 });
    let scale = |m: &RMatrix| RMatrix::from_fn(2 * n, 2 * n, |r, c| dinv[r] * m[(r, c)] * dinv[c]);

    let g1 = o1.transpose() * gamma_d.matrix() * &o1;
    let m = scale(&g1);
    let pulled = o2.transpose() * &m * &o2;
    let w2 = &o2 * &w * o2.transpose();

    let mut grad = Vec::with_capacity(model.n_params());
    for (j, &om) in omegas.iter().enumerate() {
        let d = pulled[(j, j)] + pulled[(n + j, n + j)];
        grad.push(om * ((d - 2.0) / 4.0 - 1.0 / om.exp_m1()));
    }
    let b = scale(&w2);
    grad.extend(passive_param_grad(n, &sp.passive1, &(gamma_d.matrix() * &o1 * b * 0.5)));
    let wm = w2.component_mul(&m);
    for j in 0..n {
        let row = |a: usize| wm.row(a).sum();
        grad.push(0.5 * (row(n + j) - row(j)));
    }
    grad.extend(passive_param_grad(n, &sp.passive2, &(&m * &o2 * &w * 0.5)));
    Ok(grad)
}

/// How [`train_boson_qmhl`] differentiates the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BosonGradient {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone)]
pub struct BosonTrainResult {
    pub model: BosonModel,
    pub trace: TrainTrace,
    pub status: TrainStatus,
}

pub fn train_boson_qmhl(
    init: &BosonModel,
    gamma_d: &BosonCovariance,
    config: &TrainConfig,
    gradient: BosonGradient,
    exec: Execution,
) -> Result<BosonTrainResult> {
    check_dim(gamma_d.n_modes(), init.n_modes())?;
    let n = init.n_modes();
    let eps = config.epsilon_fd;
    let outcome = minimize(
        init.params(),
        config,
        |p| flat_loss(n, p, gamma_d),
        |p| match gradient {
            BosonGradient::FiniteDifference => finite_diff_grad(exec, |q| flat_loss(n, q, gamma_d), p, eps),
            BosonGradient::Analytic => match init.with_params(p) {
                Ok(m) => qmhl_boson_grad_analytic(&m, gamma_d).expect("shape checked"),
                Err(_) => vec![f64::NAN; p.len()],
            },
        },
        |_, _| None,
    )?;
    let model = match &outcome.status {
        TrainStatus::Aborted { .. } => init.with_params(&outcome.params).unwrap_or_else(|_| init.clone()),
        _ => init.with_params(&outcome.params)?,
    };
    Ok(BosonTrainResult { model, trace: outcome.trace, status: outcome.status })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionPoint {
    pub ratio: f64,
    pub error: f64,
}

/// Sets the `⌈ratio·N⌉` latent modes of largest `ω` to vacuum and pushes the
/// latent forward through `S`. Error is `max|Γ_rec − Γ_D| / max|Γ_D|`.
pub fn compress(model: &BosonModel, gamma_d: &BosonCovariance, ratio: f64) -> Result<(BosonCovariance, f64)> {
    check_dim(gamma_d.n_modes(), model.n_modes())?;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(QhbmError::InvalidArgument(format!("compression ratio must lie in [0, 1], got {ratio}")));
    }
    let n = model.n_modes();
    let k = ((ratio * n as f64) - 1e-12).ceil().max(0.0) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| model.latent.omegas[b].total_cmp(&model.latent.omegas[a]));
    let mut nus = model.latent.nus();
    for &j in &order[..k.min(n)] {
        nus[j] = 1.0;
    }
    let s = model.symplectic_matrix();
    let latent = BosonCovariance::thermal(&nus)?;
    let rec = BosonCovariance::from_matrix_unchecked(&s * latent.matrix() * s.transpose());
    let err = max_abs(&(rec.matrix() - gamma_d.matrix())) / max_abs(gamma_d.matrix());
    Ok((rec, err))
}

/// Columns of `S`, unit-normalized with the largest-magnitude entry positive.
pub fn modular_modes(params: &SymplecticParams) -> Result<Vec<DVector<f64>>> {
    Ok(normalized_columns(&realize_symplectic(params)?))
}

pub fn normalized_columns(s: &RMatrix) -> Vec<DVector<f64>> {
    s.column_iter()
        .map(|c| {
            let mut v = c.clone_owned();
            let norm = v.norm();
            if norm > 0.0 {
                v /= norm;
            }
            let big = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v.neg_mut();
            }
            v
        })
        .collect()
}

/// Orthogonal projector onto the span of the given vectors.
pub fn span_projector(vectors: &[DVector<f64>]) -> RMatrix {
    let dim = vectors.first().map_or(0, |v| v.len());
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let p = b.dot(&w);
                w.axpy(-p, b, 1.0);
            }
        }
        let norm = w.norm();
        if norm > 1e-10 {
            basis.push(w / norm);
        }
    }
    let mut p = RMatrix::zeros(dim, dim);
    for b in &basis {
        p += b * b.transpose();
    }
    p
}

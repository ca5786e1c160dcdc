//! Fermionic Gaussian states in the Majorana basis.
//!
//! Conventions, all checked against the dense Jordan-Wigner oracle below:
//!
//! * `c_{2j} = a_j + a_j†`, `c_{2j+1} = i(a_j − a_j†)`, and the JW form is
//!   `c_{2j} = Z…Z X_j`, `c_{2j+1} = −Z…Z Y_j` with `n_j = (1 − Z_j)/2`.
//! * `Γ_ab = (i/2) tr(ρ [c_a, c_b])`, so a single mode has `Γ_{01} = 1 − 2⟨n⟩`.
//! * `H = i Σ_ij h_ij c_i c_j + E` has `⟨H⟩ = Σ_ij h_ij Γ_ij + E`.
//! * A canonical block `[[0, ε], [−ε, 0]]` is a mode of energy `−4ε`, hence a
//!   thermal `λ = −tanh(2βε)` and a ground energy `E − 2 Σ ε_j`.

use num_complex::Complex64;
use rand::RngCore;

use crate::densesim::{
    fidelity, relative_entropy, thermal_state_oracle_with_cap, trace_distance, DensityMatrix,
};
use crate::error::{check_dim, QhbmError, Result};
use crate::hamiltonians::{pauli_expectation, Pauli, PauliString, PauliSumHamiltonian};
use crate::linalg::{antisymmetric_blocks, antisymmetric_canonical, max_abs, RMatrix};
use crate::matio::{header_usize, read_matrix_csv, write_matrix_csv};
use crate::optim::{minimize, Metrics, TrainConfig, TrainStatus, TrainTrace};
use crate::rng::uniform_vec;

/// Largest fermion count the dense oracle accepts unless raised explicitly.
pub const FERMION_DENSE_CAP: usize = 5;

const TOL: f64 = 1e-10;

fn check_antisymmetric(m: &RMatrix, what: &str) -> Result<()> {
    if !m.is_square() || m.nrows() % 2 != 0 {
        return Err(QhbmError::InvalidArgument(format!("{what} must be square with even dimension")));
    }
    let asym = max_abs(&(m + m.transpose()));
    if asym > TOL * max_abs(m).max(1.0) {
        return Err(QhbmError::InvalidState(format!("{what} is not antisymmetric (residual {asym:e})")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FermionCovariance {
    gamma: RMatrix,
}

impl FermionCovariance {
    pub fn new(gamma: RMatrix) -> Result<Self> {
        check_antisymmetric(&gamma, "covariance")?;
        let smax = gamma.clone().singular_values().max();
        if smax > 1.0 + 1e-9 {
            return Err(QhbmError::InvalidState(format!("covariance singular value {smax} exceeds 1")));
        }
        Ok(Self { gamma })
    }

    pub(crate) fn from_matrix_unchecked(gamma: RMatrix) -> Self {
        Self { gamma }
    }

    pub fn zeros(n_fermions: usize) -> Self {
        Self { gamma: RMatrix::zeros(2 * n_fermions, 2 * n_fermions) }
    }

    pub fn n_majoranas(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn n_fermions(&self) -> usize {
        self.gamma.nrows() / 2
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.gamma
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.gamma.clone().singular_values().iter().cloned().collect();
        s.sort_by(f64::total_cmp);
        s
    }

    /// The `λ_j ≥ 0` of the canonical form, ascending.
    pub fn lambdas(&self) -> Vec<f64> {
        antisymmetric_canonical(&self.gamma).0
    }

    pub fn to_csv(&self) -> String {
        write_matrix_csv(&[("n_majoranas", self.n_majoranas().to_string()), ("kind", "gamma".into())], &self.gamma)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (fields, m) = read_matrix_csv(text)?;
        expect_kind(&fields, "gamma", m.nrows())?;
        Self::new(m)
    }
}

fn expect_kind(fields: &std::collections::BTreeMap<String, String>, kind: &str, n: usize) -> Result<()> {
    if fields.get("kind").map(String::as_str) != Some(kind) {
        return Err(QhbmError::Parse(format!("expected kind={kind}")));
    }
    let m = header_usize(fields, "n_majoranas")?;
    if m != n {
        return Err(QhbmError::Parse(format!("header says {m} Majoranas, matrix has {n}")));
    }
    Ok(())
}

/// `H = i Σ_ij h_ij c_i c_j + e_const` with `h` real antisymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct MajoranaQuadraticH {
    h: RMatrix,
    e_const: f64,
}

/// One ladder operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

impl Ladder {
    /// Coefficients on `(c_{2j}, c_{2j+1})`.
    fn majorana(self) -> (usize, [Complex64; 2]) {
        let half = Complex64::new(0.5, 0.0);
        let ihalf = Complex64::new(0.0, 0.5);
        match self {
            Ladder::Create(j) => (j, [half, ihalf]),
            Ladder::Annihilate(j) => (j, [half, -ihalf]),
        }
    }
}

impl MajoranaQuadraticH {
    pub fn new(h: RMatrix, e_const: f64) -> Result<Self> {
        check_antisymmetric(&h, "h")?;
        let h = (&h - h.transpose()) * 0.5;
        Ok(Self { h, e_const })
    }

    /// Entries of `h` uniform on [−1, 1] above the diagonal, `E` uniform on [−1, 1].
    pub fn random(n_fermions: usize, rng: &mut dyn RngCore) -> Self {
        let n = 2 * n_fermions;
        let mut h = RMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = crate::rng::uniform(rng, -1.0, 1.0);
                h[(i, j)] = v;
                h[(j, i)] = -v;
            }
        }
        Self { h, e_const: crate::rng::uniform(rng, -1.0, 1.0) }
    }

    /// Collects `Σ coeff · op1 · op2` over ladder operators on `n_fermions` modes.
    /// The sum must be Hermitian.
    pub fn from_ladder_terms(n_fermions: usize, terms: &[(Complex64, Ladder, Ladder)]) -> Result<Self> {
        let n = 2 * n_fermions;
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for &(coeff, l, r) in terms {
            let (j, u) = l.majorana();
            let (k, v) = r.majorana();
            if j >= n_fermions || k >= n_fermions {
                return Err(QhbmError::InvalidArgument(format!("mode index out of range for {n_fermions} fermions")));
            }
            for (p, up) in u.iter().enumerate() {
                for (q, vq) in v.iter().enumerate() {
                    m[(2 * j + p) * n + 2 * k + q] += coeff * up * vq;
                }
            }
        }
        let mut h = RMatrix::zeros(n, n);
        let mut e = Complex64::new(0.0, 0.0);
        for i in 0..n {
            e += m[i * n + i];
            for j in i + 1..n {
                let v = (m[i * n + j] - m[j * n + i]) / Complex64::new(0.0, 2.0);
                if v.im.abs() > 1e-12 {
                    return Err(QhbmError::InvalidArgument("ladder terms are not Hermitian".into()));
                }
                h[(i, j)] = v.re;
                h[(j, i)] = -v.re;
            }
        }
        if e.im.abs() > 1e-12 {
            return Err(QhbmError::InvalidArgument("ladder terms are not Hermitian".into()));
        }
        Ok(Self { h, e_const: e.re })
    }

    pub fn n_majoranas(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_fermions(&self) -> usize {
        self.h.nrows() / 2
    }

    pub fn h(&self) -> &RMatrix {
        &self.h
    }

    pub fn e_const(&self) -> f64 {
        self.e_const
    }

    pub fn to_csv(&self) -> String {
        write_matrix_csv(
            &[
                ("n_majoranas", self.n_majoranas().to_string()),
                ("kind", "h".into()),
                ("e_const", self.e_const.to_string()),
            ],
            &self.h,
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (fields, m) = read_matrix_csv(text)?;
        expect_kind(&fields, "h", m.nrows())?;
        let e = match fields.get("e_const") {
            Some(v) => v.parse().map_err(|e| QhbmError::Parse(format!("e_const: {e}")))?,
            None => 0.0,
        };
        Self::new(m, e)
    }
}

/// Spinful `nx × ny` lattice with hopping `−t` and uniform pairing `Δ`, `μ = 0`.
/// Spin-orbital `2·site + σ` with `site = row·nx + col` and `σ = 0` for spin up.
pub fn build_dwave(nx: usize, ny: usize, t: f64, delta: f64) -> Result<MajoranaQuadraticH> {
    if nx == 0 || ny == 0 {
        return Err(QhbmError::InvalidArgument("lattice dimensions must be positive".into()));
    }
    use Ladder::{Annihilate as A, Create as C};
    let orb = |site: usize, spin: usize| 2 * site + spin;
    let mut bonds = Vec::new();
    for r in 0..ny {
        for c in 0..nx {
            let s = r * nx + c;
            if c + 1 < nx {
                bonds.push((s, s + 1));
            }
            if r + 1 < ny {
                bonds.push((s, s + nx));
            }
        }
    }
    let (mt, d) = (Complex64::new(-t, 0.0), Complex64::new(delta, 0.0));
    let mut terms = Vec::new();
    for &(i, j) in &bonds {
        for spin in 0..2 {
            terms.push((mt, C(orb(i, spin)), A(orb(j, spin))));
            terms.push((mt, C(orb(j, spin)), A(orb(i, spin))));
        }
        terms.push((d, C(orb(i, 0)), C(orb(j, 1))));
        terms.push((-d, C(orb(i, 1)), C(orb(j, 0))));
        terms.push((d, A(orb(j, 1)), A(orb(i, 0))));
        terms.push((-d, A(orb(j, 0)), A(orb(i, 1))));
    }
    MajoranaQuadraticH::from_ladder_terms(2 * nx * ny, &terms)
}

/// `(ε, O)` with `O h Oᵀ = ⊕ [[0, ε_j], [−ε_j, 0]]`, `ε_j ≥ 0` ascending.
pub fn canonical_form(h: &MajoranaQuadraticH) -> (Vec<f64>, RMatrix) {
    let (eps, q) = antisymmetric_canonical(&h.h);
    (eps, q.transpose())
}

/// Thermal `λ_j = −tanh(2βε_j)` for the canonical energies.
pub fn thermal_lambdas(epsilons: &[f64], beta: f64) -> Vec<f64> {
    epsilons.iter().map(|e| -(2.0 * beta * e).tanh()).collect()
}

pub fn thermal_covariance_oracle(h: &MajoranaQuadraticH, beta: f64) -> Result<FermionCovariance> {
    if !(beta >= 0.0) {
        return Err(QhbmError::InvalidArgument(format!("beta must be non-negative, got {beta}")));
    }
    let (eps, o) = canonical_form(h);
    let blocks = antisymmetric_blocks(&thermal_lambdas(&eps, beta));
    Ok(FermionCovariance::from_matrix_unchecked(o.transpose() * blocks * o))
}

/// `ln tr e^{−βH}`.
pub fn fermion_log_partition(h: &MajoranaQuadraticH, beta: f64) -> f64 {
    let (eps, _) = canonical_form(h);
    let ln2cosh = |x: f64| x.abs() + (-2.0 * x.abs()).exp().ln_1p();
    -beta * h.e_const + eps.iter().map(|e| ln2cosh(2.0 * beta * e)).sum::<f64>()
}

pub fn fermion_ground_energy(h: &MajoranaQuadraticH) -> f64 {
    h.e_const - 2.0 * canonical_form(h).0.iter().sum::<f64>()
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    term(p) + term(1.0 - p)
}

/// `Σ_j H_b((1 − |λ_j|)/2)` in nats.
pub fn fermion_entropy(lambdas: &[f64]) -> Result<f64> {
    if let Some(l) = lambdas.iter().find(|l| l.abs() > 1.0 + 1e-9 || !l.is_finite()) {
        return Err(QhbmError::InvalidArgument(format!("|λ| = {} exceeds 1", l.abs())));
    }
    Ok(lambdas.iter().map(|l| binary_entropy((1.0 - l.abs().min(1.0)) / 2.0)).sum())
}

/// `⟨H⟩ = Σ_ij h_ij Γ_ij + E`.
pub fn energy_expectation(h: &MajoranaQuadraticH, gamma: &FermionCovariance) -> Result<f64> {
    check_dim(h.n_majoranas(), gamma.n_majoranas())?;
    Ok(h.h.dot(&gamma.gamma) + h.e_const)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GivensRotation {
    pub a: usize,
    pub b: usize,
    pub angle: f64,
}

/// Ordered product `O = G_K ⋯ G_1`; rotation 1 acts first.
#[derive(Debug, Clone, PartialEq)]
pub struct GivensNetwork {
    n: usize,
    rotations: Vec<GivensRotation>,
}

/// Left-multiplies by the embedded rotation `[[c, −s], [s, c]]` on rows `(a, b)`.
fn rotate_rows(m: &mut RMatrix, a: usize, b: usize, c: f64, s: f64) {
    for col in 0..m.ncols() {
        let (x, y) = (m[(a, col)], m[(b, col)]);
        m[(a, col)] = c * x - s * y;
        m[(b, col)] = s * x + c * y;
    }
}

/// Right-multiplies by the transpose of that rotation.
fn rotate_cols(m: &mut RMatrix, a: usize, b: usize, c: f64, s: f64) {
    for row in 0..m.nrows() {
        let (x, y) = (m[(row, a)], m[(row, b)]);
        m[(row, a)] = c * x - s * y;
        m[(row, b)] = s * x + c * y;
    }
}

/// Adjacent pairs `(0,1), (2,3), ...` on odd layers and `(1,2), (3,4), ...` on even ones.
pub fn brick_wall_pairs(n: usize, layers: usize) -> Vec<(usize, usize)> {
    (1..=layers)
        .flat_map(|l| {
            let start = if l % 2 == 1 { 0 } else { 1 };
            (start..n.saturating_sub(1)).step_by(2).map(|a| (a, a + 1)).collect::<Vec<_>>()
        })
        .collect()
}

impl GivensNetwork {
    pub fn new(n: usize, rotations: Vec<GivensRotation>) -> Result<Self> {
        if let Some(r) = rotations.iter().find(|r| r.a >= n || r.b >= n || r.a == r.b) {
            return Err(QhbmError::InvalidArgument(format!("rotation pair ({}, {}) invalid for n = {n}", r.a, r.b)));
        }
        Ok(Self { n, rotations })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, rotations: Vec::new() }
    }

    /// Brick wall with `layers` layers; `n` layers give `n(n−1)/2` rotations.
    pub fn brick_wall(n: usize, layers: usize, angles: &[f64]) -> Result<Self> {
        let pairs = brick_wall_pairs(n, layers);
        check_dim(pairs.len(), angles.len())?;
        Self::new(n, pairs.into_iter().zip(angles).map(|((a, b), &angle)| GivensRotation { a, b, angle }).collect())
    }

    pub fn random_brick_wall(n: usize, layers: usize, rng: &mut dyn RngCore) -> Self {
        let k = brick_wall_pairs(n, layers).len();
        Self::brick_wall(n, layers, &uniform_vec(rng, k, 0.0, 1.0)).expect("shape matches")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rotations(&self) -> &[GivensRotation] {
        &self.rotations
    }

    pub fn angles(&self) -> Vec<f64> {
        self.rotations.iter().map(|r| r.angle).collect()
    }

    pub fn set_angles(&mut self, angles: &[f64]) {
        for (r, &a) in self.rotations.iter_mut().zip(angles) {
            r.angle = a;
        }
    }

    pub fn realize(&self) -> RMatrix {
        let mut o = RMatrix::identity(self.n, self.n);
        for r in &self.rotations {
            rotate_rows(&mut o, r.a, r.b, r.angle.cos(), r.angle.sin());
        }
        o
    }

    /// `∂O/∂φ_k`: rotation `k` replaced by its block `G(φ_k + π/2)` with zeros elsewhere.
    pub fn realize_derivative(&self, k: usize) -> RMatrix {
        let mut o = RMatrix::identity(self.n, self.n);
        for (i, r) in self.rotations.iter().enumerate() {
            if i == k {
                let (c, s) = ((r.angle + std::f64::consts::FRAC_PI_2).cos(), (r.angle + std::f64::consts::FRAC_PI_2).sin());
                let mut d = RMatrix::zeros(self.n, self.n);
                d[(r.a, r.a)] = c;
                d[(r.a, r.b)] = -s;
                d[(r.b, r.a)] = s;
                d[(r.b, r.b)] = c;
                o = d * o;
            } else {
                rotate_rows(&mut o, r.a, r.b, r.angle.cos(), r.angle.sin());
            }
        }
        o
    }
}

pub fn realize_givens(net: &GivensNetwork, n: usize) -> Result<RMatrix> {
    check_dim(net.n, n)?;
    if n % 2 != 0 {
        return Err(QhbmError::InvalidArgument("Majorana dimension must be even".into()));
    }
    Ok(net.realize())
}

/// Latent `λ_j = tanh θ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionLatent {
    thetas: Vec<f64>,
}

impl FermionLatent {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(QhbmError::InvalidArgument("non-finite latent parameter".into()));
        }
        Ok(Self { thetas })
    }

    pub fn from_lambdas(lambdas: &[f64]) -> Result<Self> {
        if lambdas.iter().any(|l| l.abs() >= 1.0) {
            return Err(QhbmError::InvalidArgument("latent λ must lie in (−1, 1)".into()));
        }
        Ok(Self { thetas: lambdas.iter().map(|l| l.atanh()).collect() })
    }

    pub fn random(n_fermions: usize, rng: &mut dyn RngCore) -> Self {
        Self { thetas: uniform_vec(rng, n_fermions, 0.0, 1.0) }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.thetas.iter().map(|t| t.tanh()).collect()
    }

    pub fn covariance(&self) -> RMatrix {
        antisymmetric_blocks(&self.lambdas())
    }

    pub fn entropy(&self) -> f64 {
        fermion_entropy(&self.lambdas()).expect("tanh is bounded")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FermionModel {
    pub latent: FermionLatent,
    pub net: GivensNetwork,
}

impl FermionModel {
    pub fn new(latent: FermionLatent, net: GivensNetwork) -> Result<Self> {
        check_dim(2 * latent.thetas.len(), net.n)?;
        Ok(Self { latent, net })
    }

    /// Brick wall of depth `layers` with parameters uniform on [0, 1].
    pub fn random(n_fermions: usize, layers: usize, rng: &mut dyn RngCore) -> Self {
        let latent = FermionLatent::random(n_fermions, rng);
        let net = GivensNetwork::random_brick_wall(2 * n_fermions, layers, rng);
        Self { latent, net }
    }

    pub fn n_params(&self) -> usize {
        self.latent.thetas.len() + self.net.rotations.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.latent.thetas.clone();
        p.extend(self.net.angles());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_dim(self.n_params(), p.len())?;
        let (t, a) = p.split_at(self.latent.thetas.len());
        self.latent.thetas.copy_from_slice(t);
        self.net.set_angles(a);
        Ok(())
    }

    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let mut m = self.clone();
        m.set_params(p)?;
        Ok(m)
    }

    /// `Oᵀ Γ_θ O`.
    pub fn covariance(&self) -> FermionCovariance {
        let o = self.net.realize();
        FermionCovariance::from_matrix_unchecked(o.transpose() * self.latent.covariance() * o)
    }

    /// Quadratic Hamiltonian whose β = 1 Gibbs state is this model.
    pub fn modular_hamiltonian(&self) -> MajoranaQuadraticH {
        let clamp = 1.0 - 1e-15;
        let kappa: Vec<f64> =
            self.latent.lambdas().iter().map(|l| -(l.clamp(-clamp, clamp)).atanh() / 2.0).collect();
        let o = self.net.realize();
        MajoranaQuadraticH { h: o.transpose() * antisymmetric_blocks(&kappa) * o, e_const: 0.0 }
    }
}

fn check_model(model: &FermionModel, h: &MajoranaQuadraticH) -> Result<()> {
    check_dim(h.n_majoranas(), model.net.n)
}

pub fn vqt_fermion_loss(model: &FermionModel, h: &MajoranaQuadraticH, beta: f64) -> Result<f64> {
    check_model(model, h)?;
    Ok(beta * energy_expectation(h, &model.covariance())? - model.latent.entropy())
}

/// Energy gradient over the Givens angles, one sweep of adjoint updates.
fn energy_angle_grad(model: &FermionModel, h: &MajoranaQuadraticH) -> Vec<f64> {
    let rots = &model.net.rotations;
    // A_k = R_k hᵀ R_kᵀ and B_k = L_kᵀ Γ_θ L_k for O = L_k G_k R_k.
    let mut a = -h.h.clone();
    let mut b = model.covariance().gamma;
    if let Some(r) = rots.first() {
        rotate_rows(&mut b, r.a, r.b, r.angle.cos(), r.angle.sin());
        rotate_cols(&mut b, r.a, r.b, r.angle.cos(), r.angle.sin());
    }
    let mut grad = Vec::with_capacity(rots.len());
    for (k, r) in rots.iter().enumerate() {
        let (c, s) = (r.angle.cos(), r.angle.sin());
        let (dc, ds) = (-s, c);
        // M = A Gᵀ B restricted to rows/cols (a, b); tr(M G').
        let row = |i: usize| {
            let mut v = a.row(i).clone_owned();
            let (x, y) = (v[r.a], v[r.b]);
            v[r.a] = c * x - s * y;
            v[r.b] = s * x + c * y;
            v
        };
        let rows = [row(r.a), row(r.b)];
        let m = |i: usize, j: usize| rows[usize::from(i == r.b)].dot(&b.column(j).transpose());
        let gp = [[dc, -ds], [ds, dc]];
        let idx = [r.a, r.b];
        let mut tr = 0.0;
        for (x, &i) in idx.iter().enumerate() {
            for (y, &j) in idx.iter().enumerate() {
                tr += m(i, j) * gp[y][x];
            }
        }
        grad.push(2.0 * tr);
        rotate_rows(&mut a, r.a, r.b, c, s);
        rotate_cols(&mut a, r.a, r.b, c, s);
        if let Some(next) = rots.get(k + 1) {
            rotate_rows(&mut b, next.a, next.b, next.angle.cos(), next.angle.sin());
            rotate_cols(&mut b, next.a, next.b, next.angle.cos(), next.angle.sin());
        }
    }
    grad
}

/// Analytic latent components followed by the Givens-angle components.
pub fn vqt_fermion_grad(model: &FermionModel, h: &MajoranaQuadraticH, beta: f64) -> Result<Vec<f64>> {
    check_model(model, h)?;
    let o = model.net.realize();
    let pulled = &o * &h.h * o.transpose();
    let mut g: Vec<f64> = model
        .latent
        .thetas
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let sech2 = 1.0 - t.tanh().powi(2);
            (beta * 2.0 * pulled[(2 * j, 2 * j + 1)] + t) * sech2
        })
        .collect();
    g.extend(energy_angle_grad(model, h).into_iter().map(|x| beta * x));
    Ok(g)
}

/// Angle derivative of the energy by the shift rule
/// `∂E = [E(φ + π/2) − E(φ − π/2)]/2`, exact since `Oᵀ Γ_θ O` is linear in
/// `(cos φ, sin φ)` of each rotation for antisymmetric `Γ_θ`.
pub fn shift_rule_angle_grad(model: &FermionModel, h: &MajoranaQuadraticH) -> Result<Vec<f64>> {
    check_model(model, h)?;
    let q = std::f64::consts::FRAC_PI_2;
    (0..model.net.rotations.len())
        .map(|k| {
            let mut plus = model.clone();
            plus.net.rotations[k].angle += q;
            let mut minus = model.clone();
            minus.net.rotations[k].angle -= q;
            Ok((energy_expectation(h, &plus.covariance())? - energy_expectation(h, &minus.covariance())?) / 2.0)
        })
        .collect()
}

/// JW images of the Majoranas as `(sign, Pauli string)`.
pub fn jw_majoranas(n_fermions: usize) -> Vec<(f64, PauliString)> {
    (0..n_fermions)
        .flat_map(|j| {
            let chain = |p: Pauli| {
                let mut ops: Vec<(usize, Pauli)> = (0..j).map(|q| (q, Pauli::Z)).collect();
                ops.push((j, p));
                ops.into_iter().fold(PauliString::identity(), |s, (q, p)| s.mul(&PauliString::single(q, p)).1)
            };
            [(1.0, chain(Pauli::X)), (-1.0, chain(Pauli::Y))]
        })
        .collect()
}

pub fn jw_hamiltonian(h: &MajoranaQuadraticH) -> Result<PauliSumHamiltonian> {
    let nf = h.n_fermions();
    let cs = jw_majoranas(nf);
    let mut terms = vec![(h.e_const, PauliString::identity())];
    for i in 0..2 * nf {
        for j in i + 1..2 * nf {
            if h.h[(i, j)] == 0.0 {
                continue;
            }
            let (phase, s) = cs[i].1.mul(&cs[j].1);
            let coeff = Complex64::new(0.0, 2.0 * h.h[(i, j)] * cs[i].0 * cs[j].0) * phase;
            debug_assert!(coeff.im.abs() < 1e-12);
            terms.push((coeff.re, s));
        }
    }
    PauliSumHamiltonian::new(nf.max(1), terms)
}

pub fn dense_jw_oracle(h: &MajoranaQuadraticH, beta: f64) -> Result<DensityMatrix> {
    dense_jw_oracle_with_cap(h, beta, FERMION_DENSE_CAP)
}

pub fn dense_jw_oracle_with_cap(h: &MajoranaQuadraticH, beta: f64, cap: usize) -> Result<DensityMatrix> {
    if h.n_fermions() > cap {
        return Err(QhbmError::DenseCapExceeded { requested: h.n_fermions(), cap });
    }
    thermal_state_oracle_with_cap(&jw_hamiltonian(h)?, beta, cap)
}

/// `Γ_ab = i tr(ρ c_a c_b)` for `a ≠ b`.
pub fn covariance_from_dense(rho: &DensityMatrix) -> Result<FermionCovariance> {
    let nf = rho.n_qubits();
    let cs = jw_majoranas(nf);
    let n = 2 * nf;
    let mut g = RMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let (phase, s) = cs[a].1.mul(&cs[b].1);
            let v = Complex64::new(0.0, cs[a].0 * cs[b].0) * phase * pauli_expectation(&s, rho)?;
            g[(a, b)] = v.re;
            g[(b, a)] = -v.re;
        }
    }
    Ok(FermionCovariance::from_matrix_unchecked(g))
}

#[derive(Debug, Clone, Default)]
pub struct FermionTrainOptions {
    /// Record a covariance snapshot every `k` steps (step 0 included).
    pub snapshot_every: Option<usize>,
    /// Dense Gibbs target for per-step metrics; requires a dense-sized system.
    pub dense_target: Option<(DensityMatrix, usize)>,
}

#[derive(Debug, Clone)]
pub struct FermionTrainResult {
    pub model: FermionModel,
    pub trace: TrainTrace,
    pub status: TrainStatus,
    pub snapshots: Vec<(usize, FermionCovariance)>,
}

pub fn model_dense_state(model: &FermionModel, cap: usize) -> Result<DensityMatrix> {
    dense_jw_oracle_with_cap(&model.modular_hamiltonian(), 1.0, cap)
}

fn dense_metrics(model: &FermionModel, target: &DensityMatrix, cap: usize) -> Metrics {
    let rho = model_dense_state(model, cap).expect("cap checked before training");
    Metrics {
        trace_distance: trace_distance(&rho, target).expect("same size"),
        fidelity: fidelity(&rho, target).expect("same size"),
        relative_entropy: relative_entropy(&rho, target).expect("same size"),
    }
}

pub fn train_fermion_vqt(
    model: &FermionModel,
    h: &MajoranaQuadraticH,
    beta: f64,
    config: &TrainConfig,
    options: &FermionTrainOptions,
) -> Result<FermionTrainResult> {
    check_model(model, h)?;
    if !(beta > 0.0) {
        return Err(QhbmError::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if let Some((t, cap)) = &options.dense_target {
        check_dim(h.n_fermions(), t.n_qubits())?;
        if h.n_fermions() > *cap {
            return Err(QhbmError::DenseCapExceeded { requested: h.n_fermions(), cap: *cap });
        }
    }
    let at = |p: &[f64]| model.with_params(p).expect("same shape");
    let mut snapshots = Vec::new();
    let outcome = minimize(
        model.params(),
        config,
        |p| vqt_fermion_loss(&at(p), h, beta).expect("checked"),
        |p| vqt_fermion_grad(&at(p), h, beta).expect("checked"),
        |step, p| {
            let m = at(p);
            if options.snapshot_every.is_some_and(|k| k > 0 && step % k == 0) {
                snapshots.push((step, m.covariance()));
            }
            options.dense_target.as_ref().map(|(t, cap)| dense_metrics(&m, t, *cap))
        },
    )?;
    Ok(FermionTrainResult { model: at(&outcome.params), trace: outcome.trace, status: outcome.status, snapshots })
}

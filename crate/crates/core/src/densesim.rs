//! Exact dense simulation of mixed qubit states.
//!
//! Entropies are in nats. Eigenvalues in `[-1e-10, 0)` are clamped to zero
//! before any logarithm; anything more negative fails validation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::RngCore;

use crate::error::{check_dim, QhbmError, Result};
use crate::hamiltonians::PauliSumHamiltonian;
use crate::linalg::{eigh, from_eigen, hermitian_function, identity_deviation_c, max_abs_c, CMatrix, C0};
use crate::matio::{header_usize, read_table_csv};
use crate::rng::normal;

pub const STATE_TOL: f64 = 1e-10;
pub const DEFAULT_DENSE_CAP: usize = 12;

/// Qubit cap for brute-force dense work; `QHBM_DENSE_CAP` overrides it.
pub fn dense_cap() -> usize {
    std::env::var("QHBM_DENSE_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_CAP)
}

fn clamp_eigenvalue(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        x
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(QhbmError::InvalidState(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: CMatrix,
}

impl DensityMatrix {
    /// Validated constructor: Hermitian, unit trace and PSD to 1e-10.
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(QhbmError::InvalidState("density matrix must be square".into()));
        }
        let n_qubits = qubits_for_dim(data.nrows())?;
        let rho = Self { n_qubits, data };
        rho.check_invariants()?;
        Ok(rho)
    }

    /// Skips validation; for states produced by exact operations on valid inputs.
    pub fn from_matrix_unchecked(data: CMatrix) -> Self {
        let n_qubits = data.nrows().trailing_zeros() as usize;
        Self { n_qubits, data }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let herm = max_abs_c(&(&self.data - self.data.adjoint()));
        if herm > STATE_TOL {
            return Err(QhbmError::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.data.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(QhbmError::InvalidState(format!("trace {tr} differs from 1")));
        }
        let (values, _) = eigh(&self.data);
        if values[0] < -STATE_TOL {
            return Err(QhbmError::InvalidState(format!("negative eigenvalue {:.3e}", values[0])));
        }
        Ok(())
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut data = CMatrix::from_element(dim, dim, C0);
        data[(index, index)] = Complex64::new(1.0, 0.0);
        Self { n_qubits, data }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self { n_qubits, data: CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0) }
    }

    /// `|ψ⟩⟨ψ|` for a normalizable amplitude vector.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let n_qubits = qubits_for_dim(amplitudes.len())?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QhbmError::InvalidState("zero state vector".into()));
        }
        let dim = amplitudes.len();
        let data = CMatrix::from_fn(dim, dim, |r, c| amplitudes[r] * amplitudes[c].conj() / (norm * norm));
        Ok(Self { n_qubits, data })
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let n_qubits = qubits_for_dim(probs.len())?;
        let dim = probs.len();
        let data = CMatrix::from_fn(dim, dim, |r, c| if r == c { Complex64::new(probs[r], 0.0) } else { C0 });
        Self::new(data).map(|mut s| {
            s.n_qubits = n_qubits;
            s
        })
    }

    /// Full-rank random state `A A† / tr(A A†)` with Gaussian `A`.
    pub fn random<R: RngCore + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        let dim = 1 << n_qubits;
        let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(normal(rng), normal(rng)));
        let m = &a * a.adjoint();
        let tr = m.trace();
        Self { n_qubits, data: m / tr }
    }

    /// Random state of rank `rank` (pure for 1).
    pub fn random_rank<R: RngCore + ?Sized>(n_qubits: usize, rank: usize, rng: &mut R) -> Self {
        let dim = 1 << n_qubits;
        let a = CMatrix::from_fn(dim, rank.max(1), |_, _| Complex64::new(normal(rng), normal(rng)));
        let m = &a * a.adjoint();
        let tr = m.trace();
        Self { n_qubits, data: m / tr }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    /// Eigenvalues ascending, tiny negatives clamped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.data).0.into_iter().map(clamp_eigenvalue).collect()
    }

    /// Row-major CSV, each entry written as `re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# n_qubits={} layout=re_im\n", self.n_qubits());
        for r in 0..self.dim() {
            let row: Vec<String> =
                (0..self.dim()).map(|c| format!("{},{}", self.data[(r, c)].re, self.data[(r, c)].im)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (fields, rows) = read_table_csv(text)?;
        if fields.get("layout").map(String::as_str) != Some("re_im") {
            return Err(QhbmError::Parse("expected layout=re_im".into()));
        }
        let n = header_usize(&fields, "n_qubits")?;
        let dim = 1usize << n;
        if rows.len() != dim || rows.iter().any(|r| r.len() != 2 * dim) {
            return Err(QhbmError::Parse(format!("expected {dim} rows of {} numbers", 2 * dim)));
        }
        Self::new(CMatrix::from_fn(dim, dim, |r, c| Complex64::new(rows[r][2 * c], rows[r][2 * c + 1])))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { n_qubits: self.n_qubits + other.n_qubits, data: self.data.kronecker(&other.data) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    n_qubits: usize,
    data: CMatrix,
}

impl UnitaryMatrix {
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(QhbmError::InvalidState("unitary must be square".into()));
        }
        let n_qubits = qubits_for_dim(data.nrows())?;
        let dev = identity_deviation_c(&(&data * data.adjoint()));
        if dev > STATE_TOL {
            return Err(QhbmError::InvalidState(format!("not unitary (deviation {dev:.3e})")));
        }
        Ok(Self { n_qubits, data })
    }

    pub fn from_matrix_unchecked(data: CMatrix) -> Self {
        let n_qubits = data.nrows().trailing_zeros() as usize;
        Self { n_qubits, data }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self { n_qubits, data: CMatrix::identity(dim, dim) }
    }

    /// Haar-random unitary from the QR decomposition of a Gaussian matrix.
    pub fn random_haar<R: RngCore + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        let dim = 1 << n_qubits;
        let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(normal(rng), normal(rng)));
        let qr = a.qr();
        let (q, r) = (qr.q(), qr.r());
        let phases = DMatrix::from_fn(dim, dim, |i, j| if i == j { r[(i, i)] / r[(i, i)].norm() } else { C0 });
        Self { n_qubits, data: q * phases }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn dagger(&self) -> UnitaryMatrix {
        UnitaryMatrix { n_qubits: self.n_qubits, data: self.data.adjoint() }
    }

    pub fn compose(&self, after: &UnitaryMatrix) -> UnitaryMatrix {
        UnitaryMatrix { n_qubits: self.n_qubits, data: &after.data * &self.data }
    }
}

/// `U ρ U†`.
pub fn apply_unitary(rho: &DensityMatrix, u: &UnitaryMatrix) -> Result<DensityMatrix> {
    check_dim(rho.dim(), u.dim())?;
    let data = &u.data * &rho.data * u.data.adjoint();
    Ok(DensityMatrix { n_qubits: rho.n_qubits, data })
}

/// Spectrum of a Pauli-sum Hamiltonian by full diagonalization.
pub fn spectrum(h: &PauliSumHamiltonian) -> Result<(Vec<f64>, CMatrix)> {
    let cap = dense_cap();
    if h.n_qubits() > cap {
        return Err(QhbmError::DenseCapExceeded { requested: h.n_qubits(), cap });
    }
    Ok(eigh(&h.dense()))
}

/// `e^{-βH} / tr e^{-βH}` by full eigendecomposition, using the
/// environment-configurable cap.
pub fn thermal_state_oracle(h: &PauliSumHamiltonian, beta: f64) -> Result<DensityMatrix> {
    thermal_state_oracle_with_cap(h, beta, dense_cap())
}

pub fn thermal_state_oracle_with_cap(h: &PauliSumHamiltonian, beta: f64, cap: usize) -> Result<DensityMatrix> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(QhbmError::InvalidArgument(format!("beta must be finite and >= 0, got {beta}")));
    }
    if h.n_qubits() > cap {
        return Err(QhbmError::DenseCapExceeded { requested: h.n_qubits(), cap });
    }
    Ok(gibbs_from_matrix(&h.dense(), beta))
}

/// Gibbs state of an arbitrary Hermitian matrix.
pub fn gibbs_from_matrix(h: &CMatrix, beta: f64) -> DensityMatrix {
    let (values, vectors) = eigh(h);
    let e0 = values[0];
    let weights: Vec<f64> = values.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    DensityMatrix::from_matrix_unchecked(from_eigen(&probs, &vectors))
}

/// `ln tr e^{-βH}` with a max-shift for stability.
pub fn log_partition_dense(h: &PauliSumHamiltonian, beta: f64) -> Result<f64> {
    let (values, _) = spectrum(h)?;
    Ok(log_partition_from_spectrum(&values, beta))
}

pub fn log_partition_from_spectrum(values: &[f64], beta: f64) -> f64 {
    let e0 = values.iter().cloned().fold(f64::INFINITY, f64::min);
    -beta * e0 + values.iter().map(|e| (-beta * (e - e0)).exp()).sum::<f64>().ln()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    -rho.eigenvalues().into_iter().map(xlogx).sum::<f64>()
}

/// Half the trace norm of `ρ − σ`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dim(rho.dim(), sigma.dim())?;
    let (values, _) = eigh(&(&rho.data - &sigma.data));
    Ok(0.5 * values.iter().map(|v| v.abs()).sum::<f64>())
}

/// `[tr √(√ρ σ √ρ)]²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dim(rho.dim(), sigma.dim())?;
    let sqrt_rho = hermitian_function(&rho.data, |x| clamp_eigenvalue(x).sqrt());
    let inner = &sqrt_rho * &sigma.data * &sqrt_rho;
    let (values, _) = eigh(&inner);
    let root: f64 = values.iter().map(|&v| clamp_eigenvalue(v).sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

/// `D(ρ‖σ) = tr ρ ln ρ − tr ρ ln σ`; `+∞` when ρ has weight outside the
/// support of σ.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dim(rho.dim(), sigma.dim())?;
    const SUPPORT_TOL: f64 = 1e-12;
    let (mu, w) = eigh(&sigma.data);
    let mut cross = 0.0;
    for (k, &m) in mu.iter().enumerate() {
        let col = w.column(k);
        let weight = (col.adjoint() * &rho.data * col)[(0, 0)].re;
        if m < SUPPORT_TOL {
            if weight > SUPPORT_TOL {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += weight * m.ln();
    }
    let self_term: f64 = rho.eigenvalues().into_iter().map(xlogx).sum();
    let d = self_term - cross;
    Ok(if d < 0.0 && d > -1e-12 { 0.0 } else { d })
}

/// Reduced state on `keep`, ordered as given.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.n_qubits;
    let mut seen = vec![false; n];
    for &q in keep {
        if q >= n || seen[q] {
            return Err(QhbmError::InvalidArgument(format!("invalid or repeated qubit index {q}")));
        }
        seen[q] = true;
    }
    let traced: Vec<usize> = (0..n).filter(|q| !seen[*q]).collect();
    let compose = |k: usize, t: usize| -> usize {
        let mut x = 0usize;
        for (pos, &q) in keep.iter().enumerate() {
            if (k >> (keep.len() - 1 - pos)) & 1 == 1 {
                x |= 1 << (n - 1 - q);
            }
        }
        for (pos, &q) in traced.iter().enumerate() {
            if (t >> (traced.len() - 1 - pos)) & 1 == 1 {
                x |= 1 << (n - 1 - q);
            }
        }
        x
    };
    let dk = 1usize << keep.len();
    let dt = 1usize << traced.len();
    let mut out = CMatrix::from_element(dk, dk, C0);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = C0;
            for t in 0..dt {
                acc += rho.data[(compose(a, t), compose(b, t))];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(DensityMatrix { n_qubits: keep.len(), data: out })
}

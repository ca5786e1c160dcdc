//! Pauli-sum Hamiltonians and the spin models used by the experiments.
//!
//! Spin operators are S = σ/2, so a Heisenberg bond `J S_i·S_j` contributes
//! `J/4` to each of `X_i X_j`, `Y_i Y_j`, `Z_i Z_j`. Qubit 0 is the most
//! significant bit of a computational-basis index.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::densesim::DensityMatrix;
use crate::error::{check_dim, QhbmError, Result};
use crate::linalg::{CMatrix, C0, C1, CI};
use crate::rng::{seeded, uniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// `self · other` as `(phase, product)`; `None` is the identity.
    fn mul(self, other: Pauli) -> (Complex64, Option<Pauli>) {
        use Pauli::*;
        match (self, other) {
            (X, X) | (Y, Y) | (Z, Z) => (C1, None),
            (X, Y) => (CI, Some(Z)),
            (Y, Z) => (CI, Some(X)),
            (Z, X) => (CI, Some(Y)),
            (Y, X) => (-CI, Some(Z)),
            (Z, Y) => (-CI, Some(X)),
            (X, Z) => (-CI, Some(Y)),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(c)
    }
}

impl FromStr for Pauli {
    type Err = QhbmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(Pauli::X),
            "Y" | "y" => Ok(Pauli::Y),
            "Z" | "z" => Ok(Pauli::Z),
            other => Err(QhbmError::Parse(format!("unknown Pauli label {other:?}"))),
        }
    }
}

/// Tensor product of single-qubit Paulis; qubits absent from the map carry
/// the identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PauliString(BTreeMap<usize, Pauli>);

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(q: usize, p: Pauli) -> Self {
        Self(BTreeMap::from([(q, p)]))
    }

    pub fn pair(q1: usize, p1: Pauli, q2: usize, p2: Pauli) -> Self {
        PauliString::single(q1, p1).mul(&PauliString::single(q2, p2)).1
    }

    pub fn ops(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        self.0.iter().map(|(&q, &p)| (q, p))
    }

    pub fn get(&self, q: usize) -> Option<Pauli> {
        self.0.get(&q).copied()
    }

    pub fn weight(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.0.keys().next_back().copied()
    }

    /// Product `self · other` as `(phase, string)`.
    pub fn mul(&self, other: &PauliString) -> (Complex64, PauliString) {
        let mut phase = C1;
        let mut out = self.0.clone();
        for (&q, &p) in &other.0 {
            match out.remove(&q) {
                None => {
                    out.insert(q, p);
                }
                Some(mine) => {
                    let (ph, prod) = mine.mul(p);
                    phase *= ph;
                    if let Some(r) = prod {
                        out.insert(q, r);
                    }
                }
            }
        }
        (phase, PauliString(out))
    }

    /// Action on basis states of `n` qubits: `P|x⟩ = phase(x) |x ^ flip⟩`.
    pub fn action(&self, n: usize) -> PauliAction {
        let mut flip = 0usize;
        let mut sign_mask = 0usize;
        let mut n_y = 0u32;
        for (&q, &p) in &self.0 {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    sign_mask |= bit;
                    n_y += 1;
                }
                Pauli::Z => sign_mask |= bit,
            }
        }
        let base = match n_y % 4 {
            0 => C1,
            1 => CI,
            2 => -C1,
            _ => -CI,
        };
        PauliAction { flip, sign_mask, base }
    }
}

/// Monomial form of a Pauli string on a fixed register.
#[derive(Debug, Clone, Copy)]
pub struct PauliAction {
    pub flip: usize,
    sign_mask: usize,
    base: Complex64,
}

impl PauliAction {
    #[inline]
    pub fn phase(&self, x: usize) -> Complex64 {
        if (x & self.sign_mask).count_ones() % 2 == 0 {
            self.base
        } else {
            -self.base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}

/// Real linear combination of Pauli strings, merged so each string appears
/// once. Exactly-zero coefficients are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSumHamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSumHamiltonian {
    pub fn new(n_qubits: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, s) in terms {
            if !c.is_finite() {
                return Err(QhbmError::InvalidArgument(format!("non-finite coefficient {c}")));
            }
            if let Some(q) = s.max_qubit() {
                if q >= n_qubits {
                    return Err(QhbmError::InvalidArgument(format!(
                        "Pauli on qubit {q} outside a {n_qubits}-qubit register"
                    )));
                }
            }
            *merged.entry(s).or_insert(0.0) += c;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(string, coeff)| PauliTerm { coeff, string })
            .collect();
        Ok(Self { n_qubits, terms })
    }

    pub fn zero(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the identity string; zero means traceless.
    pub fn identity_coeff(&self) -> f64 {
        self.terms.iter().find(|t| t.string.is_identity()).map_or(0.0, |t| t.coeff)
    }

    pub fn coeff(&self, s: &PauliString) -> f64 {
        self.terms.iter().find(|t| &t.string == s).map_or(0.0, |t| t.coeff)
    }

    pub fn dense(&self) -> CMatrix {
        let n = self.n_qubits;
        let dim = 1usize << n;
        let mut m = CMatrix::from_element(dim, dim, C0);
        for term in &self.terms {
            let act = term.string.action(n);
            for x in 0..dim {
                m[(x ^ act.flip, x)] += act.phase(x) * term.coeff;
            }
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&HamiltonianDoc::from(self)).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: HamiltonianDoc = serde_json::from_str(s).map_err(|e| QhbmError::Parse(e.to_string()))?;
        doc.try_into()
    }
}

/// `tr(P ρ)` for a single Pauli string.
pub fn pauli_expectation(string: &PauliString, rho: &DensityMatrix) -> Result<Complex64> {
    let n = rho.n_qubits();
    if let Some(q) = string.max_qubit() {
        if q >= n {
            return Err(QhbmError::DimensionMismatch { expected: n, got: q + 1 });
        }
    }
    let act = string.action(n);
    let data = rho.matrix();
    Ok((0..rho.dim()).map(|x| act.phase(x) * data[(x, x ^ act.flip)]).sum())
}

/// `Σ_k α_k tr(P_k ρ)`.
pub fn expectation(h: &PauliSumHamiltonian, rho: &DensityMatrix) -> Result<f64> {
    check_dim(h.n_qubits(), rho.n_qubits())?;
    let mut total = Complex64::new(0.0, 0.0);
    for t in h.terms() {
        total += pauli_expectation(&t.string, rho)? * t.coeff;
    }
    Ok(total.re)
}

fn heisenberg_bond(terms: &mut Vec<(f64, PauliString)>, i: usize, j: usize, coeff: f64) {
    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
        terms.push((coeff, PauliString::pair(i, p, j, p)));
    }
}

/// Open-boundary 2D Heisenberg model on an `nx × ny` grid, row-major
/// indexing `row * nx + col`; `jh` couples columns, `jv` couples rows.
pub fn heisenberg_2d(nx: usize, ny: usize, jh: f64, jv: f64) -> Result<PauliSumHamiltonian> {
    if nx == 0 || ny == 0 {
        return Err(QhbmError::InvalidArgument("heisenberg_2d needs nx, ny >= 1".into()));
    }
    let idx = |r: usize, c: usize| r * nx + c;
    let mut terms = Vec::new();
    for r in 0..ny {
        for c in 0..nx {
            if c + 1 < nx {
                heisenberg_bond(&mut terms, idx(r, c), idx(r, c + 1), jh / 4.0);
            }
            if r + 1 < ny {
                heisenberg_bond(&mut terms, idx(r, c), idx(r + 1, c), jv / 4.0);
            }
        }
    }
    PauliSumHamiltonian::new(nx * ny, terms)
}

/// Open 1D Heisenberg chain with transverse and longitudinal fields.
///
/// Each bond carries `-j/4` on XX, YY and ZZ, each site `hx/2` on X and
/// `hz/2` on Z.
pub fn heisenberg_1d_fields(n: usize, j: f64, hx: f64, hz: f64) -> Result<PauliSumHamiltonian> {
    if n < 2 {
        return Err(QhbmError::InvalidArgument("heisenberg_1d_fields needs n >= 2".into()));
    }
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        heisenberg_bond(&mut terms, i, i + 1, -j / 4.0);
    }
    for i in 0..n {
        terms.push((hx / 2.0, PauliString::single(i, Pauli::X)));
        terms.push((hz / 2.0, PauliString::single(i, Pauli::Z)));
    }
    PauliSumHamiltonian::new(n, terms)
}

/// Open chain with independent uniform [-1, 1] couplings.
///
/// Draw order from `seeded(seed)`: for each bond `(i, i+1)` the XX, YY, ZZ
/// coefficients; then for each site the field components `(hx, hy, hz)`,
/// which enter as `h·S = (hx X + hy Y + hz Z)/2`.
pub fn random_coupling_chain(n: usize, seed: u64) -> Result<PauliSumHamiltonian> {
    if n < 2 {
        return Err(QhbmError::InvalidArgument("random_coupling_chain needs n >= 2".into()));
    }
    let mut rng = seeded(seed);
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            terms.push((uniform(&mut rng, -1.0, 1.0), PauliString::pair(i, p, i + 1, p)));
        }
    }
    for i in 0..n {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            terms.push((uniform(&mut rng, -1.0, 1.0) / 2.0, PauliString::single(i, p)));
        }
    }
    PauliSumHamiltonian::new(n, terms)
}

#[derive(Serialize, Deserialize)]
struct TermDoc {
    coeff: f64,
    paulis: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct HamiltonianDoc {
    n_qubits: usize,
    terms: Vec<TermDoc>,
}

impl From<&PauliSumHamiltonian> for HamiltonianDoc {
    fn from(h: &PauliSumHamiltonian) -> Self {
        HamiltonianDoc {
            n_qubits: h.n_qubits,
            terms: h
                .terms
                .iter()
                .map(|t| TermDoc {
                    coeff: t.coeff,
                    paulis: t.string.ops().map(|(q, p)| (q.to_string(), p.to_string())).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<HamiltonianDoc> for PauliSumHamiltonian {
    type Error = QhbmError;
    fn try_from(doc: HamiltonianDoc) -> Result<Self> {
        let mut terms = Vec::with_capacity(doc.terms.len());
        for t in doc.terms {
            let mut ops = BTreeMap::new();
            for (q, p) in t.paulis {
                let q: usize = q.parse().map_err(|_| QhbmError::Parse(format!("bad qubit index {q:?}")))?;
                ops.insert(q, p.parse::<Pauli>()?);
            }
            terms.push((t.coeff, PauliString(ops)));
        }
        PauliSumHamiltonian::new(doc.n_qubits, terms)
    }
}

//! Layered qubit ansatz built from exact single- and two-qubit exponentials.
//!
//! Layer `ℓ` applies `exp(i(aX + bY + cZ))` on every qubit followed by
//! `exp(i(aXX + bYY + cZZ))` on staggered neighbour pairs: `(0,1), (2,3), ...`
//! for odd layers and `(1,2), (3,4), ...` for even ones. Layer 1 acts first.

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::densesim::{apply_unitary, DensityMatrix, UnitaryMatrix};
use crate::error::{check_dim, QhbmError, Result};
use crate::linalg::{CMatrix, C0};
use crate::parallel::{map_indexed, Execution};
use crate::rng::uniform_vec;

pub const DEFAULT_EPSILON: f64 = 1e-4;

type Gate2 = [[Complex64; 2]; 2];
type Gate4 = [[Complex64; 4]; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnAnsatz {
    n_qubits: usize,
    n_layers: usize,
    params: Vec<f64>,
}

/// Neighbour pairs coupled in layer `layer` (1-based).
pub fn layer_pairs(n_qubits: usize, layer: usize) -> Vec<(usize, usize)> {
    let start = if layer % 2 == 1 { 0 } else { 1 };
    (start..n_qubits.saturating_sub(1)).step_by(2).map(|q| (q, q + 1)).collect()
}

fn layer_param_count(n_qubits: usize, layer: usize) -> usize {
    3 * n_qubits + 3 * layer_pairs(n_qubits, layer).len()
}

pub fn param_count(n_qubits: usize, n_layers: usize) -> usize {
    (1..=n_layers).map(|l| layer_param_count(n_qubits, l)).sum()
}

/// `exp(i(aX + bY + cZ))`.
pub fn single_qubit_gate(a: f64, b: f64, c: f64) -> Gate2 {
    let r = (a * a + b * b + c * c).sqrt();
    let s = if r < 1e-8 { 1.0 - r * r / 6.0 } else { r.sin() / r };
    let cr = r.cos();
    [
        [Complex64::new(cr, s * c), Complex64::new(s * b, s * a)],
        [Complex64::new(-s * b, s * a), Complex64::new(cr, -s * c)],
    ]
}

/// `exp(i(aXX + bYY + cZZ))`, diagonal in the Bell basis.
pub fn two_qubit_gate(a: f64, b: f64, c: f64) -> Gate4 {
    let e = |x: f64| Complex64::from_polar(1.0, x);
    let (phi_p, phi_m) = (e(a - b + c), e(-a + b + c));
    let (psi_p, psi_m) = (e(a + b - c), e(-a - b - c));
    let mut g = [[C0; 4]; 4];
    g[0][0] = (phi_p + phi_m) * 0.5;
    g[3][3] = g[0][0];
    g[0][3] = (phi_p - phi_m) * 0.5;
    g[3][0] = g[0][3];
    g[1][1] = (psi_p + psi_m) * 0.5;
    g[2][2] = g[1][1];
    g[1][2] = (psi_p - psi_m) * 0.5;
    g[2][1] = g[1][2];
    g
}

fn apply_single_left(m: &mut CMatrix, n: usize, q: usize, g: &Gate2) {
    let dim = m.nrows();
    let mask = 1 << (n - 1 - q);
    let cols = m.ncols();
    let data = m.as_mut_slice();
    for c in 0..cols {
        let col = &mut data[c * dim..(c + 1) * dim];
        for i in (0..dim).filter(|i| i & mask == 0) {
            let j = i | mask;
            let (x, y) = (col[i], col[j]);
            col[i] = g[0][0] * x + g[0][1] * y;
            col[j] = g[1][0] * x + g[1][1] * y;
        }
    }
}

fn apply_pair_left(m: &mut CMatrix, n: usize, q: usize, g: &Gate4) {
    let dim = m.nrows();
    let (hi, lo) = (1 << (n - 1 - q), 1 << (n - 2 - q));
    let cols = m.ncols();
    let data = m.as_mut_slice();
    for c in 0..cols {
        let col = &mut data[c * dim..(c + 1) * dim];
        for i in (0..dim).filter(|i| i & (hi | lo) == 0) {
            let idx = [i, i | lo, i | hi, i | hi | lo];
            let v = idx.map(|k| col[k]);
            for (r, &k) in idx.iter().enumerate() {
                col[k] = g[r][0] * v[0] + g[r][1] * v[1] + g[r][2] * v[2] + g[r][3] * v[3];
            }
        }
    }
}

impl QnnAnsatz {
    pub fn new(n_qubits: usize, n_layers: usize, params: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(QhbmError::InvalidArgument("ansatz needs at least one qubit".into()));
        }
        let expected = param_count(n_qubits, n_layers);
        if params.len() != expected {
            return Err(QhbmError::ParameterCount { expected, got: params.len() });
        }
        Ok(Self { n_qubits, n_layers, params })
    }

    pub fn zeros(n_qubits: usize, n_layers: usize) -> Self {
        Self { n_qubits, n_layers, params: vec![0.0; param_count(n_qubits, n_layers)] }
    }

    /// Parameters i.i.d. uniform on [0, 1] radians.
    pub fn random(n_qubits: usize, n_layers: usize, rng: &mut dyn RngCore) -> Self {
        let params = uniform_vec(rng, param_count(n_qubits, n_layers), 0.0, 1.0);
        Self { n_qubits, n_layers, params }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        Self::new(self.n_qubits, self.n_layers, params.to_vec())
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (1..layer).map(|l| layer_param_count(self.n_qubits, l)).sum()
    }

    /// Left-multiplies `m` by the gates of one layer (1-based).
    fn apply_layer(&self, m: &mut CMatrix, layer: usize) {
        let n = self.n_qubits;
        let p = &self.params[self.layer_offset(layer)..];
        for q in 0..n {
            apply_single_left(m, n, q, &single_qubit_gate(p[3 * q], p[3 * q + 1], p[3 * q + 2]));
        }
        for (k, (q, _)) in layer_pairs(n, layer).into_iter().enumerate() {
            let o = 3 * n + 3 * k;
            apply_pair_left(m, n, q, &two_qubit_gate(p[o], p[o + 1], p[o + 2]));
        }
    }

    pub fn layer_unitary(&self, layer: usize) -> Result<UnitaryMatrix> {
        if layer == 0 || layer > self.n_layers {
            return Err(QhbmError::InvalidArgument(format!("layer {layer} out of range")));
        }
        let mut m = CMatrix::identity(self.dim(), self.dim());
        self.apply_layer(&mut m, layer);
        Ok(UnitaryMatrix::from_matrix_unchecked(m))
    }

    pub fn build_unitary(&self) -> UnitaryMatrix {
        let mut m = CMatrix::identity(self.dim(), self.dim());
        for layer in 1..=self.n_layers {
            self.apply_layer(&mut m, layer);
        }
        UnitaryMatrix::from_matrix_unchecked(m)
    }

    /// `U† σ U`.
    pub fn pulled_back_state(&self, sigma: &DensityMatrix) -> Result<DensityMatrix> {
        check_dim(self.dim(), sigma.dim())?;
        apply_unitary(sigma, &self.build_unitary().dagger())
    }

    /// `U ρ U†`.
    pub fn push_forward(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        check_dim(self.dim(), rho.dim())?;
        apply_unitary(rho, &self.build_unitary())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: QnnAnsatz = serde_json::from_str(s).map_err(|e| QhbmError::Parse(e.to_string()))?;
        Self::new(raw.n_qubits, raw.n_layers, raw.params)
    }
}

/// Central-difference gradient; the `2M` evaluations run under `exec` and are
/// combined in index order.
pub fn finite_diff_grad<F>(exec: Execution, loss: F, params: &[f64], epsilon: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    assert!(epsilon > 0.0, "finite difference step must be positive");
    let evals = map_indexed(exec, 2 * params.len(), |i| {
        let mut p = params.to_vec();
        p[i / 2] += if i % 2 == 0 { epsilon } else { -epsilon };
        loss(&p)
    });
    evals.chunks(2).map(|pm| (pm[0] - pm[1]) / (2.0 * epsilon)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densesim::{trace_distance, von_neumann_entropy};
    use crate::hamiltonians::{expectation, Pauli, PauliString, PauliSumHamiltonian};
    use crate::linalg::{dagger, exp_antihermitian, identity_deviation_c, max_abs_c, CI};
    use crate::rng::seeded;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn generator(n: usize, terms: Vec<(f64, PauliString)>) -> CMatrix {
        PauliSumHamiltonian::new(n, terms).unwrap().dense()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(param_count(4, 3), 51);
        assert_eq!(param_count(1, 1), 3);
        assert_eq!(param_count(2, 2), 6 + 3 + 6);
        assert!(QnnAnsatz::new(2, 1, vec![0.0; 5]).is_err());
    }

    #[test]
    fn zero_params_give_identity() {
        let u = QnnAnsatz::zeros(3, 2).build_unitary();
        assert!(identity_deviation_c(u.matrix()) < 1e-15);
    }

    #[test]
    fn single_qubit_closed_form() {
        let u = QnnAnsatz::new(1, 1, vec![FRAC_PI_2, 0.0, 0.0]).unwrap().build_unitary();
        let ix = CMatrix::from_row_slice(2, 2, &[C0, CI, CI, C0]);
        assert!(max_abs_c(&(u.matrix() - ix)) < 1e-15);
    }

    #[test]
    fn gates_match_matrix_exponentials() {
        let mut rng = seeded(3);
        for _ in 0..20 {
            let v = uniform_vec(&mut rng, 6, -2.0, 2.0);
            let g1 = generator(
                1,
                vec![
                    (v[0], PauliString::single(0, Pauli::X)),
                    (v[1], PauliString::single(0, Pauli::Y)),
                    (v[2], PauliString::single(0, Pauli::Z)),
                ],
            );
            let want = exp_antihermitian(&(g1 * CI));
            let got = single_qubit_gate(v[0], v[1], v[2]);
            for r in 0..2 {
                for c in 0..2 {
                    assert!((want[(r, c)] - got[r][c]).norm() < 1e-12);
                }
            }
            let g2 = generator(
                2,
                [Pauli::X, Pauli::Y, Pauli::Z]
                    .into_iter()
                    .zip(&v[3..])
                    .map(|(p, &w)| (w, PauliString::pair(0, p, 1, p)))
                    .collect(),
            );
            let want = exp_antihermitian(&(g2 * CI));
            let got = two_qubit_gate(v[3], v[4], v[5]);
            for r in 0..4 {
                for c in 0..4 {
                    assert!((want[(r, c)] - got[r][c]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_unitary_matches_generator_products() {
        // Two qubits, one layer: pair gate after the single-qubit gates.
        let mut rng = seeded(8);
        let a = QnnAnsatz::random(2, 1, &mut rng);
        let p = a.params();
        let mut want = CMatrix::identity(4, 4);
        for q in 0..2 {
            let g = generator(
                2,
                vec![
                    (p[3 * q], PauliString::single(q, Pauli::X)),
                    (p[3 * q + 1], PauliString::single(q, Pauli::Y)),
                    (p[3 * q + 2], PauliString::single(q, Pauli::Z)),
                ],
            );
            want = exp_antihermitian(&(g * CI)) * want;
        }
        let g = generator(
            2,
            [Pauli::X, Pauli::Y, Pauli::Z]
                .into_iter()
                .zip(&p[6..9])
                .map(|(op, &w)| (w, PauliString::pair(0, op, 1, op)))
                .collect(),
        );
        want = exp_antihermitian(&(g * CI)) * want;
        assert!(max_abs_c(&(a.build_unitary().matrix() - want)) < 1e-12);
    }

    #[test]
    fn layer_composition() {
        let mut rng = seeded(11);
        let a = QnnAnsatz::random(4, 3, &mut rng);
        let mut prod = CMatrix::identity(16, 16);
        for l in 1..=3 {
            prod = a.layer_unitary(l).unwrap().matrix() * prod;
        }
        assert!(max_abs_c(&(a.build_unitary().matrix() - prod)) < 1e-12);
        assert!(a.layer_unitary(0).is_err() && a.layer_unitary(4).is_err());
    }

    #[test]
    fn pull_back_round_trip() {
        let mut rng = seeded(21);
        let a = QnnAnsatz::random(3, 2, &mut rng);
        let rho = DensityMatrix::random(3, &mut rng);
        let pushed = a.push_forward(&rho).unwrap();
        let back = a.pulled_back_state(&pushed).unwrap();
        assert!(trace_distance(&back, &rho).unwrap() < 1e-12);
        let same = QnnAnsatz::zeros(3, 2).pulled_back_state(&rho).unwrap();
        assert!(max_abs_c(&(same.matrix() - rho.matrix())) < 1e-15);
        assert!(a.pulled_back_state(&DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn finite_difference_examples() {
        let sq = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>();
        assert!(finite_diff_grad(Execution::Sequential, sq, &[0.0; 4], 1e-4).iter().all(|g| g.abs() < 1e-12));
        let g = finite_diff_grad(Execution::Sequential, |p: &[f64]| p[0].sin(), &[0.0], 1e-4);
        assert!((g[0] - 1.0).abs() < 1e-8);

        // ⟨Z⟩ under exp(iφX)|0⟩ is cos 2φ.
        let z = PauliSumHamiltonian::new(1, vec![(1.0, PauliString::single(0, Pauli::Z))]).unwrap();
        let ket0 = DensityMatrix::basis(1, 0);
        let f = |p: &[f64]| {
            let a = QnnAnsatz::new(1, 1, vec![p[0], 0.0, 0.0]).unwrap();
            expectation(&z, &a.push_forward(&ket0).unwrap()).unwrap()
        };
        let phi = 0.3;
        assert!((f(&[phi]) - (2.0 * phi).cos()).abs() < 1e-12);
        let g = finite_diff_grad(Execution::default(), f, &[phi], 1e-4);
        assert!((g[0] + 2.0 * (2.0 * phi).sin()).abs() < 1e-6);
    }

    #[test]
    fn finite_difference_error_is_second_order() {
        let f = |p: &[f64]| (1.3 * p[0]).exp() * p[1].sin();
        let x = [0.4, 0.7];
        let exact = [1.3 * (1.3f64 * 0.4).exp() * 0.7f64.sin(), (1.3f64 * 0.4).exp() * 0.7f64.cos()];
        let err = |eps: f64| {
            let g = finite_diff_grad(Execution::Sequential, f, &x, eps);
            (g[0] - exact[0]).abs() + (g[1] - exact[1]).abs()
        };
        for eps in [1e-2, 5e-3, 2e-3] {
            let ratio = err(eps) / err(eps / 2.0);
            assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio} at eps {eps}");
        }
    }

    #[test]
    fn parallel_and_sequential_gradients_agree() {
        let f = |p: &[f64]| p.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x.cos()).sum::<f64>();
        let x: Vec<f64> = (0..12).map(|i| 0.1 * i as f64).collect();
        let a = finite_diff_grad(Execution::Sequential, f, &x, 1e-4);
        let b = finite_diff_grad(Execution::Parallel, f, &x, 1e-4);
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        let a = QnnAnsatz::random(3, 2, &mut seeded(1));
        assert_eq!(QnnAnsatz::from_json(&a.to_json()).unwrap(), a);
        assert!(QnnAnsatz::from_json(r#"{"n_qubits": 2, "n_layers": 1, "params": [0.0]}"#).is_err());
    }

    #[test]
    fn unitary_on_1000_random_parameter_vectors() {
        let mut rng = seeded(99);
        for i in 0..1000 {
            let (n, l) = (1 + i % 4, 1 + i % 3);
            let params = uniform_vec(&mut rng, param_count(n, l), -6.0, 6.0);
            let u = QnnAnsatz::new(n, l, params).unwrap().build_unitary();
            let m = u.matrix();
            assert!(identity_deviation_c(&(m * dagger(m))) < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn pull_back_preserves_entropy(seed in any::<u64>(), n in 1usize..4, l in 1usize..3) {
            let mut rng = seeded(seed);
            let a = QnnAnsatz::random(n, l, &mut rng);
            let rho = DensityMatrix::random(n, &mut rng);
            let back = a.pulled_back_state(&rho).unwrap();
            prop_assert!((von_neumann_entropy(&back) - von_neumann_entropy(&rho)).abs() < 1e-9);
        }
    }
}

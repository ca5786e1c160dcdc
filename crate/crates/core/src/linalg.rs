//! Dense linear-algebra helpers shared by the qubit and Gaussian backends.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const CI: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    // Symmetrize first so round-off asymmetry never leaks into the solver.
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_real(m: &RMatrix) -> (Vec<f64>, RMatrix) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = RMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `V diag(f(λ)) V†` for Hermitian `m = V diag(λ) V†`.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = eigh(m);
    from_eigen(&values.iter().map(|&x| f(x)).collect::<Vec<_>>(), &vectors)
}

pub fn from_eigen(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(v);
    }
    scaled * vectors.adjoint()
}

/// `V diag(f(λ)) Vᵀ` for real symmetric `m`.
pub fn symmetric_function(m: &RMatrix, f: impl Fn(f64) -> f64) -> RMatrix {
    let (values, vectors) = eigh_real(m);
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(f(v));
    }
    scaled * vectors.transpose()
}

/// `exp(A)` for anti-Hermitian `A`, computed through the eigenbasis of `-iA`.
pub fn exp_antihermitian(a: &CMatrix) -> CMatrix {
    let h = a * Complex64::new(0.0, -1.0);
    let (values, vectors) = eigh(&h);
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        scaled.column_mut(c).apply(|z| *z *= Complex64::from_polar(1.0, v));
    }
    scaled * vectors.adjoint()
}

pub fn max_abs_c(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(m: &RMatrix) -> f64 {
    m.iter().map(|z| z.abs()).fold(0.0, f64::max)
}

pub fn identity_deviation_c(m: &CMatrix) -> f64 {
    max_abs_c(&(m - CMatrix::identity(m.nrows(), m.ncols())))
}

pub fn identity_deviation(m: &RMatrix) -> f64 {
    max_abs(&(m - RMatrix::identity(m.nrows(), m.ncols())))
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Canonical form of a real antisymmetric matrix.
///
/// Returns `(mu, q)` with `q` orthogonal and
/// `qᵀ k q = ⊕_j [[0, mu_j], [-mu_j, 0]]` on consecutive index pairs,
/// `mu_j ≥ 0` ascending.
pub fn antisymmetric_canonical(k: &RMatrix) -> (Vec<f64>, RMatrix) {
    let n = k.nrows();
    assert!(n % 2 == 0, "antisymmetric canonical form needs an even dimension");
    let half = n / 2;
    let anti = (k - k.transpose()) * 0.5;
    let scale = max_abs(&anti).max(1.0);
    let tol = 1e-11 * scale;

    let ik = to_complex(&anti) * CI;
    let (values, vectors) = eigh(&ik);

    // Positive eigenvalues of iK come in pairs with their conjugates; each
    // eigenvector v = u + i w for eigenvalue μ > 0 gives K u = μ w, K w = −μ u.
    let mut blocks: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::with_capacity(half);
    let mut null_vectors: Vec<DVector<f64>> = Vec::new();
    for idx in 0..n {
        let mu = values[idx];
        if mu > tol {
            let v = vectors.column(idx);
            let u = DVector::from_fn(n, |r, _| v[r].re * std::f64::consts::SQRT_2);
            let w = DVector::from_fn(n, |r, _| v[r].im * std::f64::consts::SQRT_2);
            blocks.push((mu, w, u));
        } else if mu.abs() <= tol {
            let v = vectors.column(idx);
            null_vectors.push(DVector::from_fn(n, |r, _| v[r].re));
            null_vectors.push(DVector::from_fn(n, |r, _| v[r].im));
        }
    }

    // Real orthonormal basis of the kernel, paired arbitrarily.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for mut cand in null_vectors {
        for b in blocks.iter().flat_map(|(_, a, c)| [a, c]).chain(basis.iter()) {
            let proj = b.dot(&cand);
            cand.axpy(-proj, b, 1.0);
        }
        let norm = cand.norm();
        if norm > 1e-6 {
            basis.push(cand / norm);
        }
    }
    let mut kernel = basis.into_iter();
    while blocks.len() < half {
        let a = kernel.next().expect("kernel of antisymmetric matrix has even dimension");
        let b = kernel.next().expect("kernel of antisymmetric matrix has even dimension");
        blocks.push((0.0, a, b));
    }
    blocks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut q = RMatrix::zeros(n, n);
    let mut mus = Vec::with_capacity(half);
    for (j, (mu, q1, q2)) in blocks.into_iter().enumerate() {
        q.set_column(2 * j, &q1);
        q.set_column(2 * j + 1, &q2);
        mus.push(mu);
    }
    (mus, q)
}

/// Block-diagonal antisymmetric matrix `⊕_j [[0, x_j], [-x_j, 0]]`.
pub fn antisymmetric_blocks(x: &[f64]) -> RMatrix {
    let n = 2 * x.len();
    let mut m = RMatrix::zeros(n, n);
    for (j, &v) in x.iter().enumerate() {
        m[(2 * j, 2 * j + 1)] = v;
        m[(2 * j + 1, 2 * j)] = -v;
    }
    m
}

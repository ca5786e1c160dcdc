use num_complex::Complex64;
use proptest::prelude::*;
use qhbm_core::densesim::{von_neumann_entropy, DensityMatrix};
use qhbm_core::gaussfermion::*;
use qhbm_core::hamiltonians::expectation;
use qhbm_core::linalg::{antisymmetric_blocks, dagger, exp_antihermitian, identity_deviation, max_abs, CMatrix, RMatrix};
use qhbm_core::optim::{Optimizer, TrainConfig};
use qhbm_core::rng::{seeded, uniform_vec};

fn one_mode(eps: f64) -> MajoranaQuadraticH {
    MajoranaQuadraticH::from_ladder_terms(1, &[(Complex64::new(eps, 0.0), Ladder::Create(0), Ladder::Annihilate(0))])
        .unwrap()
}

fn central_fd(model: &FermionModel, h: &MajoranaQuadraticH, beta: f64, eps: f64) -> Vec<f64> {
    let p = model.params();
    (0..p.len())
        .map(|k| {
            let mut a = p.clone();
            let mut b = p.clone();
            a[k] += eps;
            b[k] -= eps;
            let fa = vqt_fermion_loss(&model.with_params(&a).unwrap(), h, beta).unwrap();
            let fb = vqt_fermion_loss(&model.with_params(&b).unwrap(), h, beta).unwrap();
            (fa - fb) / (2.0 * eps)
        })
        .collect()
}

#[test]
fn number_operator_conventions() {
    let h = one_mode(1.0);
    assert!((h.h()[(0, 1)] + 0.25).abs() < 1e-15);
    assert!((h.e_const() - 0.5).abs() < 1e-15);
    // Dense form of a†a is |1⟩⟨1|.
    let dense = jw_hamiltonian(&h).unwrap().dense();
    assert!((dense[(1, 1)].re - 1.0).abs() < 1e-15 && dense[(0, 0)].norm() < 1e-15);
}

#[test]
fn majoranas_anticommute() {
    for nf in 1..=3 {
        let cs: Vec<CMatrix> = jw_majoranas(nf)
            .into_iter()
            .map(|(s, p)| qhbm_core::hamiltonians::PauliSumHamiltonian::new(nf, vec![(s, p)]).unwrap().dense())
            .collect();
        let dim = 1 << nf;
        for a in 0..2 * nf {
            for b in 0..2 * nf {
                let anti = &cs[a] * &cs[b] + &cs[b] * &cs[a];
                let want = if a == b { CMatrix::identity(dim, dim) * Complex64::new(2.0, 0.0) } else { CMatrix::zeros(dim, dim) };
                assert!((anti - want).iter().all(|z| z.norm() < 1e-12));
            }
        }
    }
}

#[test]
fn single_mode_oracle_fixes_the_thermal_map() {
    let h = one_mode(1.0);
    let rho = dense_jw_oracle(&h, 1.0).unwrap();
    // Gibbs weights (1, e^{-1}).
    let z = 1.0 + (-1f64).exp();
    assert!((rho.matrix()[(0, 0)].re - 1.0 / z).abs() < 1e-12);
    let dense_gamma = covariance_from_dense(&rho).unwrap();
    let oracle = thermal_covariance_oracle(&h, 1.0).unwrap();
    assert!(max_abs(&(dense_gamma.matrix() - oracle.matrix())) < 1e-10);
    assert!((oracle.matrix()[(0, 1)] - (1.0 - 2.0 * (-1f64).exp() / z)).abs() < 1e-12);
}

#[test]
fn realize_givens_examples() {
    assert!(identity_deviation(&GivensNetwork::empty(4).realize()) < 1e-15);
    let net = GivensNetwork::new(2, vec![GivensRotation { a: 0, b: 1, angle: std::f64::consts::FRAC_PI_2 }]).unwrap();
    let o = realize_givens(&net, 2).unwrap();
    let want = RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    assert!(max_abs(&(o - want)) < 1e-15);
    assert!(GivensNetwork::new(2, vec![GivensRotation { a: 0, b: 2, angle: 0.0 }]).is_err());
    assert_eq!(brick_wall_pairs(6, 6).len(), 15);

    // Derivative matrix against central differences.
    let mut rng = seeded(4);
    let net = GivensNetwork::random_brick_wall(6, 6, &mut rng);
    for k in [0, 7, 14] {
        let d = net.realize_derivative(k);
        let shift = |dx: f64| {
            let mut n2 = net.clone();
            let mut a = n2.angles();
            a[k] += dx;
            n2.set_angles(&a);
            n2.realize()
        };
        let fd = (shift(1e-6) - shift(-1e-6)) / 2e-6;
        assert!(max_abs(&(d - fd)) < 1e-8);
    }
}

#[test]
fn realize_givens_is_special_orthogonal() {
    let mut rng = seeded(8);
    for _ in 0..1000 {
        let n = 2 * (1 + (rng.next_u32_mod(4) as usize));
        let net = GivensNetwork::random_brick_wall(n, n, &mut rng);
        let o = net.realize();
        assert!(identity_deviation(&(o.transpose() * &o)) < 1e-9);
        assert!((o.determinant() - 1.0).abs() < 1e-9);
    }
}

trait SmallInt {
    fn next_u32_mod(&mut self, m: u32) -> u32;
}

impl<R: rand::RngCore> SmallInt for R {
    fn next_u32_mod(&mut self, m: u32) -> u32 {
        self.next_u32() % m
    }
}

#[test]
fn dwave_builder() {
    let h = build_dwave(1, 1, 0.3, 0.2).unwrap();
    assert!(max_abs(h.h()) == 0.0 && h.e_const() == 0.0);
    let h = build_dwave(2, 2, 0.3, 0.2).unwrap();
    assert_eq!(h.n_majoranas(), 16);
    assert!(max_abs(&(h.h() + h.h().transpose())) < 1e-15);
    let (eps, o) = canonical_form(&h);
    let recon = o.transpose() * antisymmetric_blocks(&eps) * &o;
    assert!(max_abs(&(recon - h.h())) < 1e-10);
    // ε are the positive eigenvalues of i·h.
    let ih = qhbm_core::linalg::to_complex(h.h()) * Complex64::new(0.0, 1.0);
    let (vals, _) = qhbm_core::linalg::eigh(&ih);
    let pos: Vec<f64> = vals[8..].to_vec();
    for (a, b) in pos.iter().zip(&eps) {
        assert!((a - b).abs() < 1e-10);
    }
    for k in 0..8 {
        assert!((vals[k] + vals[15 - k]).abs() < 1e-10);
    }
    // Dense ground energy.
    let dense = jw_hamiltonian(&h).unwrap();
    let e0 = qhbm_core::densesim::spectrum(&dense).unwrap().0[0];
    assert!((fermion_ground_energy(&h) - e0).abs() < 1e-9);
}

#[test]
fn canonical_form_examples() {
    let h = MajoranaQuadraticH::new(antisymmetric_blocks(&[0.3, 1.2]), 0.0).unwrap();
    let (eps, o) = canonical_form(&h);
    assert!((eps[0] - 0.3).abs() < 1e-12 && (eps[1] - 1.2).abs() < 1e-12);
    assert!(max_abs(&(&o * h.h() * o.transpose() - antisymmetric_blocks(&eps))) < 1e-10);
    let mut rng = seeded(5);
    for _ in 0..20 {
        let h = MajoranaQuadraticH::random(4, &mut rng);
        let (eps, o) = canonical_form(&h);
        assert!(max_abs(&(&o * h.h() * o.transpose() - antisymmetric_blocks(&eps))) < 1e-10);
    }
}

#[test]
fn thermal_oracle_limits() {
    let h = build_dwave(2, 1, 0.3, 0.2).unwrap();
    assert!(max_abs(thermal_covariance_oracle(&h, 0.0).unwrap().matrix()) == 0.0);
    let cold = thermal_covariance_oracle(&h, 500.0).unwrap();
    assert!(cold.singular_values().iter().all(|s| (s - 1.0).abs() < 1e-9));
}

#[test]
fn entropy_examples() {
    assert!((fermion_entropy(&[0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(fermion_entropy(&[1.0]).unwrap().abs() < 1e-15);
    assert!(fermion_entropy(&[-1.0]).unwrap().abs() < 1e-15);
    let s = fermion_entropy(&[0.5]).unwrap();
    assert!((s - 0.56233).abs() < 1e-5);
    assert!(fermion_entropy(&[1.1]).is_err());
    // Dense state with the same λ: λ = 1 − 2n̄ = 0.5 is an ε a†a thermal state with n̄ = 1/4.
    let eps = 3f64.ln();
    let rho = dense_jw_oracle(&one_mode(eps), 1.0).unwrap();
    assert!((von_neumann_entropy(&rho) - s).abs() < 1e-12);
    let gamma = covariance_from_dense(&rho).unwrap();
    assert!((gamma.matrix()[(0, 1)] - 0.5).abs() < 1e-12);
}

#[test]
fn energy_examples() {
    let h = MajoranaQuadraticH::random(3, &mut seeded(12));
    assert!((energy_expectation(&h, &FermionCovariance::zeros(3)).unwrap() - h.e_const()).abs() < 1e-15);
    let rho = dense_jw_oracle(&h, 0.7).unwrap();
    let gamma = thermal_covariance_oracle(&h, 0.7).unwrap();
    let dense_e = expectation(&jw_hamiltonian(&h).unwrap(), &rho).unwrap();
    assert!((energy_expectation(&h, &gamma).unwrap() - dense_e).abs() < 1e-10);
    assert!(energy_expectation(&h, &FermionCovariance::zeros(2)).is_err());
    let ground = thermal_covariance_oracle(&h, 1e4).unwrap();
    assert!((energy_expectation(&h, &ground).unwrap() - fermion_ground_energy(&h)).abs() < 1e-9);
}

#[test]
fn dense_cross_check_suite() {
    // 50 random instances over 1–4 fermions.
    let mut rng = seeded(2024);
    for case in 0..50 {
        let nf = 1 + case % 4;
        let h = MajoranaQuadraticH::random(nf, &mut rng);
        let beta = qhbm_core::rng::uniform(&mut rng, 0.1, 2.0);
        let rho = dense_jw_oracle(&h, beta).unwrap();
        let gamma = thermal_covariance_oracle(&h, beta).unwrap();
        let dense_gamma = covariance_from_dense(&rho).unwrap();
        assert!(max_abs(&(gamma.matrix() - dense_gamma.matrix())) < 1e-9, "case {case}");
        let lambdas = gamma.lambdas();
        assert!((fermion_entropy(&lambdas).unwrap() - von_neumann_entropy(&rho)).abs() < 1e-9);
        let ln_z = fermion_log_partition(&h, beta);
        let dense_ln_z = qhbm_core::densesim::log_partition_dense(&jw_hamiltonian(&h).unwrap(), beta).unwrap();
        assert!((ln_z - dense_ln_z).abs() < 1e-9);
    }
}

#[test]
fn gaussian_unitary_acts_by_rotation() {
    // U = exp(¼ Σ A_ij c_i c_j) maps Γ to e^{A} Γ e^{A}ᵀ.
    let mut rng = seeded(31);
    for nf in 1..=4 {
        let n = 2 * nf;
        let mut a = RMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = qhbm_core::rng::uniform(&mut rng, -1.0, 1.0);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        let cs: Vec<CMatrix> = jw_majoranas(nf)
            .into_iter()
            .map(|(s, p)| qhbm_core::hamiltonians::PauliSumHamiltonian::new(nf, vec![(s, p)]).unwrap().dense())
            .collect();
        let dim = 1 << nf;
        let mut g = CMatrix::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                g += &cs[i] * &cs[j] * Complex64::new(0.25 * a[(i, j)], 0.0);
            }
        }
        let u = exp_antihermitian(&g);
        let h = MajoranaQuadraticH::random(nf, &mut rng);
        let rho = dense_jw_oracle(&h, 0.8).unwrap();
        let rotated = DensityMatrix::new(&u * rho.matrix() * dagger(&u)).unwrap();
        let r = a.exp();
        let want = &r * covariance_from_dense(&rho).unwrap().matrix() * r.transpose();
        assert!(max_abs(&(covariance_from_dense(&rotated).unwrap().matrix() - want)) < 1e-9);
    }
}

#[test]
fn model_dense_state_matches_covariance() {
    let mut rng = seeded(9);
    for nf in 1..=4 {
        let model = FermionModel::random(nf, 2 * nf, &mut rng);
        let rho = model_dense_state(&model, FERMION_DENSE_CAP).unwrap();
        let g = covariance_from_dense(&rho).unwrap();
        assert!(max_abs(&(g.matrix() - model.covariance().matrix())) < 1e-9);
        assert!((von_neumann_entropy(&rho) - model.latent.entropy()).abs() < 1e-9);
    }
}

#[test]
fn single_mode_vqt_loss_minimum() {
    let eps = 1.0;
    let h = one_mode(eps);
    let net = GivensNetwork::empty(2);
    // Scan λ: minimum at the oracle λ with value −ln Z.
    let oracle_lambda = thermal_covariance_oracle(&h, 1.0).unwrap().matrix()[(0, 1)];
    let loss_at = |l: f64| {
        let m = FermionModel::new(FermionLatent::from_lambdas(&[l]).unwrap(), net.clone()).unwrap();
        vqt_fermion_loss(&m, &h, 1.0).unwrap()
    };
    let best = (1..2000).map(|i| -1.0 + i as f64 / 1000.0).min_by(|a, b| loss_at(*a).total_cmp(&loss_at(*b))).unwrap();
    assert!((best - oracle_lambda).abs() < 2e-3);
    let exact = -(1.0 + (-eps).exp()).ln();
    assert!((loss_at(oracle_lambda) - exact).abs() < 1e-12);
    assert!((loss_at(oracle_lambda) + fermion_log_partition(&h, 1.0)).abs() < 1e-12);
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = seeded(77);
    for case in 0..100 {
        let nf = 1 + case % 4;
        let h = MajoranaQuadraticH::random(nf, &mut rng);
        let model = FermionModel::random(nf, 2 * nf, &mut rng);
        let beta = 0.5 + (case as f64) / 100.0;
        let g = vqt_fermion_grad(&model, &h, beta).unwrap();
        let fd = central_fd(&model, &h, beta, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-5, "case {case}: {a} vs {b}");
        }
        let shift = shift_rule_angle_grad(&model, &h).unwrap();
        for (a, b) in g[nf..].iter().zip(&shift) {
            assert!((a - beta * b).abs() < 1e-10, "{a} vs {}", beta * b);
        }
    }
}

#[test]
fn decoupled_rotation_has_zero_gradient() {
    // h acts on fermion 0 only; a rotation inside fermion 1's Majoranas is idle.
    let mut h = RMatrix::zeros(4, 4);
    h[(0, 1)] = 0.7;
    h[(1, 0)] = -0.7;
    let h = MajoranaQuadraticH::new(h, 0.0).unwrap();
    let net = GivensNetwork::new(
        4,
        vec![GivensRotation { a: 0, b: 1, angle: 0.3 }, GivensRotation { a: 2, b: 3, angle: 0.9 }],
    )
    .unwrap();
    let model = FermionModel::new(FermionLatent::new(vec![0.2, 0.4]).unwrap(), net).unwrap();
    let g = vqt_fermion_grad(&model, &h, 1.0).unwrap();
    assert!(g[3].abs() < 1e-14);
}

#[test]
fn training_reaches_thermal_state() {
    let h = build_dwave(2, 1, 0.3, 0.2).unwrap();
    let model = FermionModel::random(4, 8, &mut seeded(3));
    let cfg = TrainConfig { learning_rate: 0.05, max_steps: 400, optimizer: Optimizer::Adam, ..Default::default() };
    let out = train_fermion_vqt(&model, &h, 1.0, &cfg, &FermionTrainOptions::default()).unwrap();
    let target = -fermion_log_partition(&h, 1.0);
    assert!((out.trace.final_loss().unwrap() - target).abs() < 1e-3);
    let g = vqt_fermion_grad(&out.model, &h, 1.0).unwrap();
    assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-2);
}

#[test]
fn trivial_hamiltonian_trains_to_zero_covariance() {
    let h = build_dwave(2, 1, 0.0, 0.0).unwrap();
    assert!(max_abs(thermal_covariance_oracle(&h, 1.0).unwrap().matrix()) == 0.0);
    let model = FermionModel::random(4, 8, &mut seeded(1));
    let cfg = TrainConfig { learning_rate: 0.5, max_steps: 300, ..Default::default() };
    let out = train_fermion_vqt(&model, &h, 1.0, &cfg, &FermionTrainOptions::default()).unwrap();
    assert!(out.model.latent.lambdas().iter().all(|l| l.abs() < 1e-3));
}

#[test]
fn snapshots_and_csv_round_trip() {
    let h = build_dwave(1, 1, 0.3, 0.2).unwrap();
    let model = FermionModel::random(2, 4, &mut seeded(2));
    let cfg = TrainConfig { max_steps: 40, ..Default::default() };
    let opts = FermionTrainOptions { snapshot_every: Some(20), ..Default::default() };
    let out = train_fermion_vqt(&model, &h, 1.0, &cfg, &opts).unwrap();
    let steps: Vec<usize> = out.snapshots.iter().map(|(s, _)| *s).collect();
    assert_eq!(steps, vec![0, 20, 40]);
    let csv = out.snapshots[1].1.to_csv();
    assert!(csv.starts_with("# n_majoranas=4 kind=gamma\n"));
    assert_eq!(FermionCovariance::from_csv(&csv).unwrap(), out.snapshots[1].1);
    let hcsv = h.to_csv();
    assert_eq!(MajoranaQuadraticH::from_csv(&hcsv).unwrap(), h);
    assert!(FermionCovariance::from_csv(&hcsv).is_err());
}

#[test]
fn dense_cap_is_enforced() {
    let h = MajoranaQuadraticH::random(6, &mut seeded(0));
    assert!(dense_jw_oracle(&h, 1.0).is_err());
    assert!(dense_jw_oracle_with_cap(&h, 1.0, 6).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn loss_bounded_by_free_energy(seed in any::<u64>(), nf in 1usize..4) {
        let mut rng = seeded(seed);
        let h = MajoranaQuadraticH::random(nf, &mut rng);
        let model = FermionModel::random(nf, 2 * nf, &mut rng);
        let beta = 0.9;
        let bound = -fermion_log_partition(&h, beta);
        prop_assert!(vqt_fermion_loss(&model, &h, beta).unwrap() - bound >= -1e-9);
        let s = model.covariance().singular_values();
        prop_assert!(s.iter().all(|x| *x <= 1.0 + 1e-9));
        prop_assert!(FermionCovariance::new(model.covariance().matrix().clone()).is_ok());
    }

    #[test]
    fn rejects_unphysical_covariance(x in 1.01f64..5.0) {
        prop_assert!(FermionCovariance::new(antisymmetric_blocks(&[x])).is_err());
        let mut m = antisymmetric_blocks(&[0.5]);
        m[(0, 0)] = 0.1;
        prop_assert!(FermionCovariance::new(m).is_err());
    }

    #[test]
    fn entropy_in_range(ls in proptest::collection::vec(-1.0f64..1.0, 1..6)) {
        let s = fermion_entropy(&ls).unwrap();
        prop_assert!(s >= 0.0 && s <= ls.len() as f64 * std::f64::consts::LN_2 + 1e-12);
    }
}

#[test]
fn latent_uniform_init() {
    let v = uniform_vec(&mut seeded(1), 5, 0.0, 1.0);
    assert!(v.iter().all(|x| (0.0..1.0).contains(x)));
}

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddlekit::krylov::FnOperator;
use saddlekit::precond::{assemble_rmgss_dense, assemble_splitting_dense};
use saddlekit::spectral::check_positive_real;
use saddlekit::*;

fn random_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Exact `P^{-1}` from a dense LU; stands in for an exactly applied preconditioner.
struct DenseInverse(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, usize);

impl Preconditioner for DenseInverse {
    fn dim(&self) -> usize {
        self.1
    }

    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let x = self.0.solve(&DVector::from_column_slice(r)).unwrap();
        z.copy_from_slice(x.as_slice());
    }
}

/// Non-restarted right-preconditioned GMRES written against the explicit
/// Krylov matrix: `x_k = x_0 + P^{-1} V y` with `V` an orthonormal basis of
/// `K_k(A P^{-1}, r_0)` and `y` the least-squares minimizer of
/// `||r_0 - A P^{-1} V y||`.
fn gmres_oracle(a: &DMatrix<f64>, pinv: &DMatrix<f64>, b: &DVector<f64>, k: usize) -> DVector<f64> {
    let op = a * pinv;
    let mut cols = vec![b.clone()];
    for _ in 1..k {
        let next = &op * cols.last().unwrap();
        cols.push(next);
    }
    let krylov = DMatrix::from_columns(&cols);
    let q = krylov.qr().q();
    let y = (&op * &q).svd(true, true).solve(b, 1e-300).unwrap();
    pinv * (q * y)
}

#[test]
fn generated_systems_are_uniquely_solvable() {
    for seed in 0..30 {
        let sys = generate_random(6 + seed as usize % 20, 1 + seed as usize % 6, 0.4, seed).unwrap();
        let svals = sys.to_dense().singular_values();
        let smin = svals.min();
        assert!(smin > 1e-8 * svals.max(), "seed {seed}: smallest singular value {smin}");
    }
    let sys = generate_oseen(&OseenSpec { grid: 6, ..Default::default() }).unwrap();
    assert!(sys.to_dense().singular_values().min() > 0.0);
}

#[test]
fn rhs_for_ones_matches_dense_product() {
    let sys = generate_random(15, 6, 0.5, 4).unwrap();
    let ones = DVector::from_element(21, 1.0);
    let dense = sys.to_dense() * ones;
    let rhs = DVector::from_vec(sys.rhs());
    assert!((dense - rhs).amax() < 1e-13);
    let residual = sys.residual(&[1.0; 21]).unwrap();
    assert!(residual.iter().all(|v| v.abs() < 1e-13));
}

#[test]
fn splitting_matches_block_matrix() {
    for seed in 0..50 {
        let sys = generate_random(10 + seed as usize % 15, 3 + seed as usize % 5, 0.4, 100 + seed).unwrap();
        let params = ShiftParams::new(0.01 * (1 + seed) as f64, 0.5).unwrap();
        let (m, n) = assemble_splitting_dense(&sys, params).unwrap();
        assert!((m - n - sys.to_dense()).amax() <= 1e-14);
    }
}

#[test]
fn preconditioner_apply_against_dense_inverse() {
    for seed in 0..10 {
        let sys = generate_random(60 + 5 * seed as usize, 20 + seed as usize, 0.1, 300 + seed).unwrap();
        let params = ShiftParams::new(0.3, 0.05).unwrap();
        let r = random_vec(sys.dim(), seed);
        let rv = DVector::from_vec(r.clone());

        let (m, _) = assemble_splitting_dense(&sys, params).unwrap();
        let mut pc = build_mgss(&sys, params, InnerSolveConfig::tight()).unwrap();
        let z = DVector::from_vec(apply_mgss(&mut pc, &r).unwrap());
        assert!(rel(&(&m * &z), &rv) <= 1e-9);
        let exact = m.lu().solve(&rv).unwrap();
        assert!(rel(&z, &exact) <= 1e-8);

        let p = assemble_rmgss_dense(&sys, params).unwrap();
        let mut pr = build_rmgss(&sys, params, InnerSolveConfig::tight()).unwrap();
        let z = DVector::from_vec(apply_rmgss(&mut pr, &r).unwrap());
        assert!(rel(&(&p * &z), &rv) <= 1e-9);
    }
}

#[test]
fn loose_inner_solves_are_counted_not_fatal() {
    let sys = generate_oseen(&OseenSpec { grid: 10, scaling: Scaling::Pointwise, ..Default::default() }).unwrap();
    let mut pc = build_mgss(&sys, ShiftParams::default(), InnerSolveConfig::default()).unwrap();
    let r = random_vec(sys.dim(), 1);
    let z = apply_mgss(&mut pc, &r).unwrap();
    assert!(z.iter().all(|v| v.is_finite()));
    assert_eq!(pc.applications(), 1);
    assert!(Preconditioner::inner_iterations(&pc) <= 40);
}

#[test]
fn stationary_step_is_the_splitting_update() {
    for seed in 0..10 {
        let sys = generate_random(12, 5, 0.5, 500 + seed).unwrap();
        let params = ShiftParams::new(0.7, 0.2).unwrap();
        let u = random_vec(sys.dim(), 40 + seed);
        let opts = SolveOptions { max_iters: 1, tol: 1e-300, initial_guess: Some(u.clone()), ..Default::default() };
        let (u1, rep) = mgss_stationary(&sys, params, InnerSolveConfig::tight(), &opts).unwrap();
        assert_eq!(rep.outer_iterations, 1);

        let (m, n) = assemble_splitting_dense(&sys, params).unwrap();
        let b = DVector::from_vec(sys.rhs());
        let expected = m.lu().solve(&(n * DVector::from_vec(u) + b)).unwrap();
        assert!(rel(&DVector::from_vec(u1), &expected) <= 1e-12);
    }
}

#[test]
fn fgmres_matches_gmres_oracle_with_fixed_preconditioner() {
    for seed in 0..8 {
        let sys = generate_random(9, 4, 0.6, 700 + seed).unwrap();
        let a = sys.to_dense();
        let b = DVector::from_vec(sys.rhs());
        let params = ShiftParams::new(2.0, 1.0).unwrap();
        let (m, _) = assemble_splitting_dense(&sys, params).unwrap();
        let pinv = m.clone().try_inverse().unwrap();
        for k in 1..=5 {
            let opts = SolveOptions { tol: 1e-300, max_iters: k, restart: 30, initial_guess: None };
            let mut pc = DenseInverse(m.clone().lu(), sys.dim());
            let (x, rep) = fgmres(&sys, &sys.rhs(), Some(&mut pc), &opts).unwrap();
            assert_eq!(rep.outer_iterations, k);
            let oracle = gmres_oracle(&a, &pinv, &b, k);
            assert!(rel(&DVector::from_vec(x), &oracle) <= 1e-10, "seed {seed} k {k}");
        }
        // unpreconditioned
        let id = DMatrix::identity(13, 13);
        for k in 1..=4 {
            let opts = SolveOptions { tol: 1e-300, max_iters: k, restart: 30, initial_guess: None };
            let (x, _) = fgmres(&sys, &sys.rhs(), None, &opts).unwrap();
            let oracle = gmres_oracle(&a, &id, &b, k);
            assert!(rel(&DVector::from_vec(x), &oracle) <= 1e-10);
        }
    }
}

#[test]
fn converged_solutions_pass_an_independent_residual_check() {
    let sys = generate_oseen(&OseenSpec { grid: 8, ..Default::default() }).unwrap();
    let dense = sys.to_dense();
    let b = DVector::from_vec(sys.rhs());
    let exact = dense.clone().lu().solve(&b).unwrap();
    let runs: Vec<(Vec<f64>, SolveReport)> = vec![
        fgmres(&sys, &sys.rhs(), None, &SolveOptions::default()).unwrap(),
        {
            let mut pc = build_mgss(&sys, ShiftParams::default(), InnerSolveConfig::default()).unwrap();
            fgmres(&sys, &sys.rhs(), Some(&mut pc), &SolveOptions::default()).unwrap()
        },
        {
            let mut pc = build_rmgss(&sys, ShiftParams::default(), InnerSolveConfig::default()).unwrap();
            fgmres(&sys, &sys.rhs(), Some(&mut pc), &SolveOptions::default()).unwrap()
        },
    ];
    for (x, rep) in runs {
        assert!(rep.converged);
        let xv = DVector::from_vec(x);
        let res = (&b - &dense * &xv).norm() / b.norm();
        assert!(res < 1e-9, "{res}");
        assert!((res - rep.final_relative_residual()).abs() < 1e-12);
        assert!(rel(&xv, &exact) < 1e-5);
        assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}

#[test]
fn symmetric_form_round_trip() {
    let sys = generate_random(8, 3, 0.5, 9).unwrap();
    let (bs, gs) = sys.symmetric_form_blocks();
    let back = SaddlePointSystem::from_symmetric_form(sys.a().clone(), bs.clone(), sys.c().clone(), sys.f().to_vec(), gs.clone())
        .unwrap();
    assert_eq!(back, sys);

    // solving the symmetric form directly gives the same velocity and a negated pressure
    let mut sym = DMatrix::zeros(11, 11);
    sym.view_mut((0, 0), (8, 8)).copy_from(&sys.a().to_dense());
    sym.view_mut((0, 8), (8, 3)).copy_from(&bs.to_dense().transpose());
    sym.view_mut((8, 0), (3, 8)).copy_from(&bs.to_dense());
    sym.view_mut((8, 8), (3, 3)).copy_from(&(-sys.c().to_dense()));
    let mut rhs = DVector::zeros(11);
    rhs.rows_mut(0, 8).copy_from_slice(sys.f());
    rhs.rows_mut(8, 3).copy_from_slice(&gs);
    let sol = sym.lu().solve(&rhs).unwrap();
    for i in 0..8 {
        assert!((sol[i] - 1.0).abs() < 1e-10);
    }
    for i in 8..11 {
        assert!((sol[i] + 1.0).abs() < 1e-10);
    }
}

#[test]
fn matrix_free_operator_agrees_with_system() {
    let sys = generate_random(10, 4, 0.5, 2).unwrap();
    let op = FnOperator::new(14, |x: &[f64], y: &mut [f64]| y.copy_from_slice(&sys.block_apply(x).unwrap()));
    let (x1, r1) = fgmres(&op, &sys.rhs(), None, &SolveOptions::default()).unwrap();
    let (x2, r2) = fgmres(&sys, &sys.rhs(), None, &SolveOptions::default()).unwrap();
    assert_eq!(r1.outer_iterations, r2.outer_iterations);
    assert_eq!(x1, x2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splitting_identity_holds(n in 2usize..20, dm in 0usize..20, seed in any::<u64>(), alpha in 1e-3f64..10.0, beta in 1e-3f64..10.0) {
        let m = 1 + dm % n;
        let sys = generate_random(n, m, 0.5, seed).unwrap();
        let (mm, nn) = assemble_splitting_dense(&sys, ShiftParams::new(alpha, beta).unwrap()).unwrap();
        prop_assert!((mm - nn - sys.to_dense()).amax() <= 1e-14);
    }

    #[test]
    fn block_apply_matches_dense(n in 1usize..25, dm in 0usize..25, seed in any::<u64>()) {
        let m = 1 + dm % n;
        let sys = generate_random(n, m, 0.3, seed).unwrap();
        let u = random_vec(n + m, seed ^ 1);
        let sparse = DVector::from_vec(sys.block_apply(&u).unwrap());
        let dense = sys.to_dense() * DVector::from_vec(u);
        prop_assert!((sparse - dense).amax() <= 1e-12);
    }

    #[test]
    fn real_part_of_complex_form_is_positive(n in 1usize..40, seed in any::<u64>()) {
        let sys = generate_random(n, 1, 0.4, seed).unwrap();
        let rep = check_positive_real(sys.a(), 50, seed);
        prop_assert!(rep.passed());
        prop_assert!(rep.max_identity_gap <= 1e-12);
    }

    #[test]
    fn generation_is_reproducible(n in 2usize..15, seed in any::<u64>()) {
        prop_assert_eq!(generate_random(n, n / 2 + 1, 0.4, seed).unwrap(), generate_random(n, n / 2 + 1, 0.4, seed).unwrap());
    }
}

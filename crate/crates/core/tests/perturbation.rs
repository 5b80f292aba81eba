//! Behaviour of the eigenvalue perturbation on whole problems.

mod common;

use common::{artificial, high_precision};
use lcvx::analysis::{self, TOL_VALIDITY};
use lcvx::linalg::{self, Matrix};
use lcvx::perturb::{self, PerturbationMode, PerturbationSpec};
use proptest::prelude::*;

#[test]
fn smaller_perturbations_stay_closer_to_the_true_dynamics() {
    let p = artificial();
    let settings = high_precision();
    let base = analysis::solve_relaxed(&p, &settings).unwrap();
    let mut last = f64::INFINITY;
    for eps in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7] {
        let q = [eps, 0.0, 0.0];
        let pd = perturb::perturb_dynamics(&p.a, &q, None).unwrap();
        let sol = analysis::solve_perturbed(&p, &pd.a_tilde, &settings).unwrap();
        let r = perturb::perturbation_report(&p, &base, &sol, &q, TOL_VALIDITY).unwrap();
        assert!(r.violations_after <= r.bound, "eps = {eps}: {} violating nodes", r.violations_after);
        // The terminal error is linear in the perturbation size.
        assert!(r.boundary_residual <= last, "eps = {eps}: {} after {last}", r.boundary_residual);
        assert!(r.boundary_residual <= 1e3 * eps);
        last = r.boundary_residual;
    }
}

#[test]
fn random_draws_are_reproducible() {
    let spec = PerturbationSpec { epsilon: 1e-7, seed: 11, mode: PerturbationMode::Eigen };
    assert_eq!(perturb::sample_q(&spec, 3), perturb::sample_q(&spec, 3));
    let other = PerturbationSpec { seed: 12, ..spec };
    assert_ne!(perturb::sample_q(&spec, 3), perturb::sample_q(&other, 3));
    assert!(perturb::sample_q(&spec, 3).iter().all(|v| v.abs() <= 1e-7));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_shifts_keep_controllability(
        diag in proptest::collection::vec(-2.0f64..2.0, 3),
        b in proptest::collection::vec(0.1f64..1.0, 3),
        seed in any::<u64>(),
    ) {
        // Well-separated eigenvalues keep the eigenvector basis well conditioned.
        let mut d = diag.clone();
        d.sort_by(|x, y| y.partial_cmp(x).unwrap());
        prop_assume!(d.windows(2).all(|w| w[0] - w[1] > 0.1));
        let rot = Matrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.3, 0.1, 0.0, 1.0]);
        let a = &rot * Matrix::from_diagonal(&lcvx::linalg::Vector::from_vec(diag)) * rot.clone().try_inverse().unwrap();
        let bm = Matrix::from_column_slice(3, 1, &b);
        let rank = linalg::controllability_rank(&a, &bm).unwrap();
        let spec = PerturbationSpec { epsilon: 1e-6, seed, mode: PerturbationMode::Eigen };
        let q = perturb::sample_q(&spec, perturb::shift_count(&a).unwrap());
        let pd = perturb::perturb_dynamics(&a, &q, None).unwrap();
        prop_assert!((&pd.a_tilde - &a).norm() <= 1e-4);
        prop_assert_eq!(linalg::controllability_rank(&pd.a_tilde, &bm).unwrap(), rank);
        // Each eigenvalue moves by its own shift.
        let before = linalg::eigendecompose(&a).unwrap().eigenvalues;
        let after = linalg::eigendecompose(&pd.a_tilde).unwrap().eigenvalues;
        for (k, (x, y)) in before.iter().zip(&after).enumerate() {
            prop_assert!((y.re - x.re - q[k]).abs() <= 1e-9, "eigenvalue {}", k);
        }
    }
}

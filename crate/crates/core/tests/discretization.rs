//! Zero-order-hold discretization against closed forms and its semigroup law.

use lcvx::linalg::{self, Matrix, Vector};
use proptest::prelude::*;

#[test]
fn scalar_closed_form() {
    for (a, dt) in [(-0.7, 0.3), (0.4, 2.0), (-3.0, 0.05)] {
        let z = linalg::discretize_zoh(
            &Matrix::from_element(1, 1, a),
            &Matrix::from_element(1, 1, 2.0),
            &Vector::from_element(1, 0.5),
            dt,
        )
        .unwrap();
        let e = f64::exp(a * dt);
        let integral = (e - 1.0) / a;
        assert!((z.a[(0, 0)] - e).abs() <= 1e-14 * e);
        assert!((z.b[(0, 0)] - 2.0 * integral).abs() <= 1e-13);
        assert!((z.drift[0] - 0.5 * integral).abs() <= 1e-13);
    }
}

#[test]
fn double_integrator_with_gravity() {
    let a_c = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b_c = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let w = Vector::from_vec(vec![0.0, -1.62]);
    let dt = 6.0;
    let z = linalg::discretize_zoh(&a_c, &b_c, &w, dt).unwrap();
    assert_eq!(z.a, Matrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]));
    assert!((z.b[(0, 0)] - dt * dt / 2.0).abs() < 1e-13);
    assert!((z.b[(1, 0)] - dt).abs() < 1e-13);
    assert!((z.drift[0] + 1.62 * dt * dt / 2.0).abs() < 1e-12);
    assert!((z.drift[1] + 1.62 * dt).abs() < 1e-12);
}

fn stable(n: usize, s: &[f64], k: &[f64]) -> Matrix {
    let s = Matrix::from_row_slice(n, n, &s[..n * n]);
    let k = Matrix::from_row_slice(n, n, &k[..n * n]);
    -(&s * s.transpose()) - Matrix::identity(n, n) * 0.1 + (&k - k.transpose())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_half_steps_make_one_step(
        n in 1usize..5,
        s in proptest::collection::vec(-0.6f64..0.6, 16),
        k in proptest::collection::vec(-0.8f64..0.8, 16),
        bc in proptest::collection::vec(-1.0f64..1.0, 8),
        dt in 0.01f64..1.5,
    ) {
        let a_c = stable(n, &s, &k);
        let b_c = Matrix::from_row_slice(n, 2, &bc[..2 * n]);
        let w = Vector::from_fn(n, |i, _| bc[i]);
        let h = linalg::discretize_zoh(&a_c, &b_c, &w, dt).unwrap();
        let f = linalg::discretize_zoh(&a_c, &b_c, &w, 2.0 * dt).unwrap();
        prop_assert!((&h.a * &h.a - &f.a).norm() <= 1e-12 * (1.0 + f.a.norm()));
        prop_assert!((&h.a * &h.b + &h.b - &f.b).norm() <= 1e-12 * (1.0 + f.b.norm()));
        prop_assert!((&h.a * &h.drift + &h.drift - &f.drift).norm() <= 1e-12 * (1.0 + f.drift.norm()));
    }

    #[test]
    fn exponential_of_zero_step_is_identity(n in 1usize..5, s in proptest::collection::vec(-1.0f64..1.0, 16)) {
        let m = Matrix::from_row_slice(n, n, &s[..n * n]);
        let e = linalg::expm(&(m.clone() * 0.0)).unwrap();
        prop_assert_eq!(e, Matrix::identity(n, n));
        // exp(M) exp(−M) = I.
        let p = linalg::expm(&m).unwrap() * linalg::expm(&(-m)).unwrap();
        prop_assert!((p - Matrix::identity(n, n)).norm() <= 1e-12);
    }
}

//! Instances shared by the integration tests.
#![allow(dead_code)]

use lcvx::conic::{Precision, SolverSettings};
use lcvx::linalg::{self, Matrix, Vector};
use lcvx::longhorizon::TwoPhaseSetup;
use lcvx::model::{BoundaryMap, ContinuousPlant, CostSpec, DiscreteProblem, MagnitudeFn, ProblemSpec};
use rand::Rng;

pub fn high_precision() -> SolverSettings {
    SolverSettings { precision: Precision::DoubleDouble, tol_p: 1e-16, tol_d: 1e-16, tol_g: 1e-16, ..Default::default() }
}

/// Lunar descent: double integrator in three axes with gravity as drift.
pub fn lander() -> ContinuousPlant {
    let mut a_c = Matrix::zeros(6, 6);
    let mut b_c = Matrix::zeros(6, 3);
    for k in 0..3 {
        a_c[(k, k + 3)] = 1.0;
        b_c[(k + 3, k)] = 1.0;
    }
    let drift = Vector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.0, -1.62]);
    ContinuousPlant::new(a_c, b_c, drift).unwrap()
}

fn lander_spec(n: usize) -> ProblemSpec {
    ProblemSpec {
        n,
        x_init: Vector::from_vec(vec![0.0, 0.0, 5000.0, 0.0, 3.0, -50.0]),
        rho_min: 2.25,
        rho_max: 6.0,
        g: MagnitudeFn::Norm2,
        cost: CostSpec { running: 1.0, terminal_linear: Vector::zeros(6), terminal_constant: 0.0 },
        boundary: BoundaryMap::fixed_final_state(&Vector::from_vec(vec![0.0, 0.0, 100.0, 0.0, 0.0, -5.0])),
    }
}

pub fn lander_problem(t_f: f64, n: usize) -> DiscreteProblem {
    DiscreteProblem::from_plant(&lander(), t_f, lander_spec(n)).unwrap()
}

pub fn lander_two_phase(t_f: f64, n: usize) -> TwoPhaseSetup {
    let spec = lander_spec(n);
    TwoPhaseSetup {
        plant: lander(),
        t_f,
        n,
        x_s: spec.x_init,
        u_s: Vector::from_vec(vec![0.0, 0.0, 2.25]),
        rho_min: spec.rho_min,
        rho_max: spec.rho_max,
        g: spec.g,
        cost: spec.cost,
        boundary: spec.boundary,
    }
}

/// Discrete three-state example with eigenvalues 1.2, −2.2 and 1.
pub fn artificial() -> DiscreteProblem {
    DiscreteProblem::new(
        Matrix::from_diagonal(&Vector::from_vec(vec![1.2, -2.2, 1.0])),
        Matrix::from_column_slice(3, 1, &[0.4, 0.3, 0.2]),
        Vector::zeros(3),
        ProblemSpec {
            n: 10,
            x_init: Vector::zeros(3),
            rho_min: 1.0,
            rho_max: 2.0,
            g: MagnitudeFn::Norm2Sq,
            cost: CostSpec { running: 1.0, terminal_linear: Vector::from_vec(vec![0.0, 0.0, 1.0]), terminal_constant: 0.0 },
            boundary: BoundaryMap {
                g_matrix: Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
                g_vector: Vector::from_vec(vec![0.5, 1.0]),
            },
        },
    )
    .unwrap()
}

/// Random controllable instance with a reachable partial terminal condition
/// and a pure running cost. Returns `None` for rejected draws.
pub fn random_instance<R: Rng>(rng: &mut R) -> Option<DiscreteProblem> {
    let n_x = rng.random_range(2..=4);
    let n_u = rng.random_range(1..=2);
    let n = rng.random_range(n_x + 1..=12);
    let a = Matrix::from_fn(n_x, n_x, |i, j| if i == j { 0.9 } else { 0.0 } + rng.random_range(-0.3..0.3));
    let b = Matrix::from_fn(n_x, n_u, |_, _| rng.random_range(-1.0..1.0));
    if linalg::controllability_rank(&a, &b).ok()? < n_x {
        return None;
    }
    let g = if rng.random_bool(0.5) { MagnitudeFn::Norm2 } else { MagnitudeFn::Norm2Sq };
    let x_init = Vector::from_fn(n_x, |_, _| rng.random_range(-1.0..1.0));
    let mut x = x_init.clone();
    for _ in 0..n {
        let d = Vector::from_fn(n_u, |_, _| rng.random_range(-1.0..1.0));
        let u = d.normalize() * g.level_radius(rng.random_range(1.2..3.5));
        x = &a * x + &b * u;
    }
    let rows = rng.random_range(1..=n_x);
    let gm = Matrix::from_fn(rows, n_x, |_, _| rng.random_range(-1.0..1.0));
    let gv = &gm * &x;
    let spec = ProblemSpec {
        n,
        x_init,
        rho_min: 1.0,
        rho_max: 4.0,
        g,
        cost: CostSpec { running: 1.0, terminal_linear: Vector::zeros(n_x), terminal_constant: 0.0 },
        boundary: BoundaryMap { g_matrix: gm, g_vector: gv },
    };
    DiscreteProblem::new(a, b, Vector::zeros(n_x), spec).ok()
}

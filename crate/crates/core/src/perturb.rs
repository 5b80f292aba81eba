//! Structure-preserving eigenvalue perturbation of the state matrix.
//!
//! With `A = Q⁻¹ J Q`, the perturbed matrix keeps `Q` and every off-diagonal
//! entry of `J` and shifts the diagonal: `Ã(q) = Q⁻¹ (J + diag(q)) Q`, where
//! repeated eigenvalues share one entry of `q`. It is computed in the additive
//! form `A + Q⁻¹ diag(q) Q`, so `Ã(0) = A` exactly.

use nalgebra::DMatrix;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, LcvxSolution};
use crate::error::{LcvxError, Result};
use crate::linalg::{self, Complex64, Matrix, Vector};
use crate::model::DiscreteProblem;

/// Default half-width of the sampling cube.
pub const DEFAULT_EPSILON: f64 = 1e-7;
/// `ε` must exceed the solver's primal tolerance by this factor.
pub const EPSILON_FLOOR_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PerturbationMode {
    /// Eigenstructure computed numerically; needs a diagonalizable matrix.
    Eigen,
    /// Caller supplies `(Q, J)`, which also covers defective matrices.
    UserStructure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub seed: u64,
    pub mode: PerturbationMode,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec { epsilon: DEFAULT_EPSILON, seed: 0, mode: PerturbationMode::Eigen }
    }
}

impl PerturbationSpec {
    /// Rejects an `ε` that is not well above the solver's precision.
    pub fn check(&self, tol_p: f64) -> Result<()> {
        // The slack keeps ε = 100·tol_p itself admissible despite rounding.
        if !self.epsilon.is_finite() || self.epsilon < EPSILON_FLOOR_FACTOR * tol_p * (1.0 - 1e-12) {
            return Err(LcvxError::InvalidParameter(format!(
                "perturbation size {} is below {} x the primal tolerance {}",
                self.epsilon, EPSILON_FLOOR_FACTOR, tol_p
            )));
        }
        Ok(())
    }
}

/// Explicit structure `A = Q⁻¹ J Q` with real `Q` and `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanStructure {
    pub q: Matrix,
    pub j: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedDynamics {
    pub a_tilde: Matrix,
    pub q: Vec<f64>,
    /// One representative per entry of `q`.
    pub distinct_eigenvalues: Vec<Complex64>,
    /// Largest imaginary part discarded when forming `Ã`.
    pub max_imaginary: f64,
}

/// Number of independent shifts `A` admits in eigen mode.
pub fn shift_count(a: &Matrix) -> Result<usize> {
    Ok(shift_groups(a)?.1.len())
}

/// Eigendecomposition plus, for each eigenvalue, the index of its shift.
fn shift_groups(a: &Matrix) -> Result<(linalg::EigenDecomposition, Vec<Complex64>, Vec<usize>)> {
    let eig = linalg::eigendecompose(a)?;
    if !eig.is_diagonalizable() {
        return Err(LcvxError::NotDiagonalizable { cond: eig.condition_estimate });
    }
    let groups = eig.distinct();
    let mut reps: Vec<Complex64> = Vec::new();
    let mut group_shift = vec![usize::MAX; groups.len()];
    for (gi, (v, _)) in groups.iter().enumerate() {
        let real = v.im.abs() <= linalg::EIGEN_GROUP_TOL * (1.0 + v.norm());
        // A conjugate pair shares the shift of whichever member was seen first.
        let partner = if real {
            None
        } else {
            (0..gi).find(|&k| linalg::same_eigenvalue(groups[k].0, v.conj()))
        };
        group_shift[gi] = match partner {
            Some(k) => group_shift[k],
            None => {
                reps.push(*v);
                reps.len() - 1
            }
        };
    }
    let mut shift_of = vec![0; eig.eigenvalues.len()];
    for (gi, (_, members)) in groups.iter().enumerate() {
        for &m in members {
            shift_of[m] = group_shift[gi];
        }
    }
    Ok((eig, reps, shift_of))
}

pub fn perturb_dynamics(a: &Matrix, q: &[f64], structure: Option<&JordanStructure>) -> Result<PerturbedDynamics> {
    if !q.iter().all(|v| v.is_finite()) {
        return Err(LcvxError::NonFinite("perturbation vector"));
    }
    match structure {
        Some(s) => perturb_with_structure(a, q, s),
        None => perturb_eigen(a, q),
    }
}

fn perturb_eigen(a: &Matrix, q: &[f64]) -> Result<PerturbedDynamics> {
    let (eig, reps, shift_of) = shift_groups(a)?;
    check_len(q, reps.len())?;
    let v = &eig.eigenvectors;
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or(LcvxError::NotDiagonalizable { cond: f64::INFINITY })?;
    let n = a.nrows();
    let mut scaled = v.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(q[shift_of[k]], 0.0);
    }
    let delta: DMatrix<Complex64> = scaled * v_inv;
    let max_imaginary = delta.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let a_tilde = a + Matrix::from_fn(n, n, |i, j| delta[(i, j)].re);
    Ok(PerturbedDynamics { a_tilde, q: q.to_vec(), distinct_eigenvalues: reps, max_imaginary })
}

fn perturb_with_structure(a: &Matrix, q: &[f64], s: &JordanStructure) -> Result<PerturbedDynamics> {
    let n = a.nrows();
    if s.q.shape() != (n, n) || s.j.shape() != (n, n) {
        return Err(LcvxError::Dimension(format!("structure must be {n}x{n}")));
    }
    let q_inv = s
        .q
        .clone()
        .try_inverse()
        .ok_or_else(|| LcvxError::InvalidParameter("structure matrix Q is singular".into()))?;
    let recon = &q_inv * &s.j * &s.q;
    let err = (&recon - a).abs().max();
    if err > 1e-8 * (1.0 + a.abs().max()) {
        return Err(LcvxError::InvalidParameter(format!(
            "Q^-1 J Q differs from A by {err:.3e}"
        )));
    }
    let mut reps: Vec<f64> = Vec::new();
    let mut shift_of = Vec::with_capacity(n);
    for k in 0..n {
        let d = s.j[(k, k)];
        let idx = match reps.iter().position(|&r| (r - d).abs() <= linalg::EIGEN_GROUP_TOL * (1.0 + d.abs())) {
            Some(i) => i,
            None => {
                reps.push(d);
                reps.len() - 1
            }
        };
        shift_of.push(idx);
    }
    check_len(q, reps.len())?;
    let shift = Matrix::from_diagonal(&Vector::from_iterator(n, shift_of.iter().map(|&i| q[i])));
    let a_tilde = a + q_inv * shift * &s.q;
    Ok(PerturbedDynamics {
        a_tilde,
        q: q.to_vec(),
        distinct_eigenvalues: reps.into_iter().map(|r| Complex64::new(r, 0.0)).collect(),
        max_imaginary: 0.0,
    })
}

fn check_len(q: &[f64], d: usize) -> Result<()> {
    if q.len() != d {
        return Err(LcvxError::Dimension(format!(
            "perturbation has {} entries, the matrix has {d} distinct eigenvalues",
            q.len()
        )));
    }
    Ok(())
}

/// `d` i.i.d. draws from `U[−ε, ε]`, reproducible per seed.
pub fn sample_q(spec: &PerturbationSpec, d: usize) -> Vec<f64> {
    if spec.epsilon == 0.0 {
        return vec![0.0; d];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dist = Uniform::new_inclusive(-spec.epsilon, spec.epsilon).expect("finite epsilon");
    (0..d).map(|_| dist.sample(&mut rng)).collect()
}

/// Seed for trial `k` derived from a base seed (SplitMix64 finalizer).
pub fn trial_seed(base: u64, k: u64) -> u64 {
    let mut z = base.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub q: Vec<f64>,
    /// `‖G x̃_{N+1} − g‖` with the perturbed controls run through the true `A`.
    pub boundary_residual: f64,
    /// Relaxed cost of the perturbed controls on the true trajectory.
    pub true_cost: f64,
    /// `true_cost` minus the unperturbed optimum.
    pub cost_delta: f64,
    /// `max_i ‖x̃_i − x_i‖` against the unperturbed trajectory.
    pub max_state_change: f64,
    pub violations_before: usize,
    pub violations_after: usize,
    pub bound: usize,
}

pub fn perturbation_report(
    problem: &DiscreteProblem,
    unperturbed: &LcvxSolution,
    perturbed: &LcvxSolution,
    q: &[f64],
    tol_v: f64,
) -> Result<PerturbationReport> {
    let states = problem.propagate(&perturbed.u)?;
    let xf = states.last().unwrap();
    let true_cost = problem.cost.terminal(xf)
        + problem.cost.running * perturbed.sigma.iter().sum::<f64>()
        + problem.objective_offset;
    let max_state_change = states
        .iter()
        .zip(&unperturbed.x)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let before = analysis::check_validity(unperturbed, problem, tol_v);
    let after = analysis::check_validity(perturbed, problem, tol_v);
    Ok(PerturbationReport {
        q: q.to_vec(),
        boundary_residual: problem.boundary.residual(xf),
        true_cost,
        cost_delta: true_cost - unperturbed.objective,
        max_state_change,
        violations_before: before.violation_count,
        violations_after: after.violation_count,
        bound: before.bound,
    })
}

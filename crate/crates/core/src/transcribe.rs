//! Transcription of the relaxed problem into a standard-form cone program.
//!
//! Variable layout: `z = (x_1, …, x_{N+1}, u_1, …, u_N, σ_1, …, σ_N)`.
//!
//! Equality rows, in order:
//! 1. dynamics `x_{i+1} − A x_i − B u_i = drift` for `i = 1..N` (`n_x` rows each),
//! 2. initial condition `x_1 = x_init`,
//! 3. boundary `G x_{N+1} = g`.
//!
//! Inequality rows: one nonnegative block holding `σ_i − ρ_min ≥ 0` and
//! `ρ_max − σ_i ≥ 0` for every node, followed by one magnitude cone per node:
//! `(σ_i, u_i) ∈ SOC` for the 2-norm, `(σ_i, 1/2, u_i) ∈ RSOC` for the squared
//! 2-norm (`2 · σ_i · 1/2 ≥ ‖u_i‖²`).

use serde::{Deserialize, Serialize};

use crate::conic::{Cone, ConeProgram, CscMatrix};
use crate::error::{LcvxError, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{DiscreteProblem, MagnitudeFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n: usize,
    pub n_x: usize,
    pub n_u: usize,
}

impl VariableLayout {
    pub fn new(n: usize, n_x: usize, n_u: usize) -> Self {
        VariableLayout { n, n_x, n_u }
    }

    pub fn x_offset(&self) -> usize {
        0
    }

    pub fn u_offset(&self) -> usize {
        (self.n + 1) * self.n_x
    }

    pub fn sigma_offset(&self) -> usize {
        self.u_offset() + self.n * self.n_u
    }

    /// `(N+1) n_x + N n_u + N`.
    pub fn total(&self) -> usize {
        self.sigma_offset() + self.n
    }

    /// Index of component `k` of state `x_{i+1}` (0-based node `i ∈ 0..=N`).
    pub fn x(&self, i: usize, k: usize) -> usize {
        i * self.n_x + k
    }

    pub fn u(&self, i: usize, k: usize) -> usize {
        self.u_offset() + i * self.n_u + k
    }

    pub fn sigma(&self, i: usize) -> usize {
        self.sigma_offset() + i
    }

    /// Splits a primal vector into states, controls and slacks.
    pub fn decode(&self, z: &[f64]) -> (Vec<Vector>, Vec<Vector>, Vec<f64>) {
        let xs = (0..=self.n)
            .map(|i| Vector::from_fn(self.n_x, |k, _| z[self.x(i, k)]))
            .collect();
        let us = (0..self.n)
            .map(|i| Vector::from_fn(self.n_u, |k, _| z[self.u(i, k)]))
            .collect();
        let sig = (0..self.n).map(|i| z[self.sigma(i)]).collect();
        (xs, us, sig)
    }

    pub fn encode(&self, xs: &[Vector], us: &[Vector], sigma: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.total()];
        for (i, x) in xs.iter().enumerate() {
            for k in 0..self.n_x {
                z[self.x(i, k)] = x[k];
            }
        }
        for (i, u) in us.iter().enumerate() {
            for k in 0..self.n_u {
                z[self.u(i, k)] = u[k];
            }
        }
        for (i, s) in sigma.iter().enumerate() {
            z[self.sigma(i)] = *s;
        }
        z
    }
}

/// What an equality row encodes; indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowLabel {
    /// Component `component` of the transition from node `step` to `step + 1`.
    Dynamics { step: usize, component: usize },
    Initial { component: usize },
    Boundary { row: usize },
}

/// A cone program together with the layout and row labels needed to read its
/// solution back in problem terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcription {
    pub program: ConeProgram,
    pub layout: VariableLayout,
    pub labels: Vec<RowLabel>,
}

pub fn transcribe_relaxed(problem: &DiscreteProblem) -> Result<Transcription> {
    problem.check()?;
    Ok(build(problem, &problem.a))
}

/// Same program with `A` replaced by `a_tilde` in the dynamics rows only.
pub fn transcribe_perturbed(problem: &DiscreteProblem, a_tilde: &Matrix) -> Result<Transcription> {
    problem.check()?;
    if a_tilde.shape() != problem.a.shape() {
        return Err(LcvxError::Dimension(format!(
            "perturbed matrix is {:?}, expected {:?}",
            a_tilde.shape(),
            problem.a.shape()
        )));
    }
    if !a_tilde.iter().all(|v| v.is_finite()) {
        return Err(LcvxError::NonFinite("perturbed state matrix"));
    }
    Ok(build(problem, a_tilde))
}

fn build(problem: &DiscreteProblem, a: &Matrix) -> Transcription {
    let (n, nx, nu) = (problem.n, problem.n_x(), problem.n_u());
    let layout = VariableLayout::new(n, nx, nu);
    let nz = layout.total();

    let mut c = vec![0.0; nz];
    for i in 0..n {
        c[layout.sigma(i)] = problem.cost.running;
    }
    for k in 0..nx {
        c[layout.x(n, k)] = problem.cost.terminal_linear[k];
    }

    let mut eq = Vec::new();
    let mut f = Vec::new();
    let mut labels = Vec::new();
    let mut row = 0;
    for i in 0..n {
        for k in 0..nx {
            eq.push((row, layout.x(i + 1, k), 1.0));
            for j in 0..nx {
                eq.push((row, layout.x(i, j), -a[(k, j)]));
            }
            for j in 0..nu {
                eq.push((row, layout.u(i, j), -problem.b[(k, j)]));
            }
            f.push(problem.drift[k]);
            labels.push(RowLabel::Dynamics { step: i, component: k });
            row += 1;
        }
    }
    for k in 0..nx {
        eq.push((row, layout.x(0, k), 1.0));
        f.push(problem.x_init[k]);
        labels.push(RowLabel::Initial { component: k });
        row += 1;
    }
    let gm = &problem.boundary.g_matrix;
    for r in 0..gm.nrows() {
        for k in 0..nx {
            eq.push((row, layout.x(n, k), gm[(r, k)]));
        }
        f.push(problem.boundary.g_vector[r]);
        labels.push(RowLabel::Boundary { row: r });
        row += 1;
    }
    let e = CscMatrix::from_triplets(row, nz, &eq);

    let mut gt = Vec::new();
    let mut h = Vec::new();
    let mut cones = vec![Cone::Nonneg(2 * n)];
    let mut r = 0;
    for i in 0..n {
        gt.push((r, layout.sigma(i), -1.0));
        h.push(-problem.rho_min);
        gt.push((r + 1, layout.sigma(i), 1.0));
        h.push(problem.rho_max);
        r += 2;
    }
    for i in 0..n {
        gt.push((r, layout.sigma(i), -1.0));
        h.push(0.0);
        r += 1;
        match problem.g {
            MagnitudeFn::Norm2 => cones.push(Cone::Soc(1 + nu)),
            MagnitudeFn::Norm2Sq => {
                h.push(0.5);
                r += 1;
                cones.push(Cone::Rsoc(2 + nu));
            }
        }
        for j in 0..nu {
            gt.push((r, layout.u(i, j), -1.0));
            h.push(0.0);
            r += 1;
        }
    }
    let g = CscMatrix::from_triplets(r, nz, &gt);

    Transcription {
        program: ConeProgram {
            c,
            c0: problem.cost.terminal_constant + problem.objective_offset,
            e,
            f,
            g,
            h,
            cones,
        },
        layout,
        labels,
    }
}

/// Multipliers in problem terms, following the Lagrangian term
/// `η_iᵀ(−x_{i+1} + A x_i + B u_i + drift)`, so that `η_{i−1} = Aᵀ η_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Duals {
    /// `η_1, …, η_N`.
    pub eta: Vec<Vector>,
    /// Multiplier of the initial condition.
    pub mu1: Vector,
    /// Multiplier of the boundary map.
    pub mu2: Vector,
}

pub fn recover_duals(t: &Transcription, equality_duals: &[f64]) -> Result<Duals> {
    if equality_duals.len() != t.labels.len() {
        return Err(LcvxError::Dimension(format!(
            "got {} equality duals for {} rows",
            equality_duals.len(),
            t.labels.len()
        )));
    }
    let l = t.layout;
    let n_g = t.labels.iter().filter(|x| matches!(x, RowLabel::Boundary { .. })).count();
    let mut eta = vec![Vector::zeros(l.n_x); l.n];
    let mut mu1 = Vector::zeros(l.n_x);
    let mut mu2 = Vector::zeros(n_g);
    for (label, &y) in t.labels.iter().zip(equality_duals) {
        match *label {
            // The solver's row reads x_{i+1} − A x_i − B u_i, the negative of the Lagrangian term.
            RowLabel::Dynamics { step, component } => eta[step][component] = -y,
            RowLabel::Initial { component } => mu1[component] = y,
            RowLabel::Boundary { row } => mu2[row] = y,
        }
    }
    Ok(Duals { eta, mu1, mu2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryMap, CostSpec, ProblemSpec};

    fn tiny(g: MagnitudeFn) -> DiscreteProblem {
        DiscreteProblem::new(
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Vector::zeros(1),
            ProblemSpec {
                n: 1,
                x_init: Vector::zeros(1),
                rho_min: 1.0,
                rho_max: 2.0,
                g,
                cost: CostSpec { running: 1.0, terminal_linear: Vector::zeros(1), terminal_constant: 0.0 },
                boundary: BoundaryMap::fixed_final_state(&Vector::from_element(1, 1.5)),
            },
        )
        .unwrap()
    }

    #[test]
    fn single_step_counts() {
        let t = transcribe_relaxed(&tiny(MagnitudeFn::Norm2)).unwrap();
        assert_eq!(t.layout.total(), 4);
        assert_eq!(t.program.f.len(), 1 + 1 + 1);
        assert_eq!(t.program.cones, vec![Cone::Nonneg(2), Cone::Soc(2)]);
        let t = transcribe_relaxed(&tiny(MagnitudeFn::Norm2Sq)).unwrap();
        assert_eq!(t.program.cones, vec![Cone::Nonneg(2), Cone::Rsoc(3)]);
        assert_eq!(t.program.h, vec![-1.0, 2.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn layout_arithmetic() {
        assert_eq!(VariableLayout::new(10, 3, 3).total(), 73);
    }

    #[test]
    fn zero_duals_give_zero_multipliers() {
        let t = transcribe_relaxed(&tiny(MagnitudeFn::Norm2)).unwrap();
        let d = recover_duals(&t, &[0.0; 3]).unwrap();
        assert!(d.eta.iter().all(|e| e.norm() == 0.0));
        assert!(recover_duals(&t, &[0.0; 2]).is_err());
    }

    #[test]
    fn perturbing_with_same_matrix_is_identity() {
        let p = tiny(MagnitudeFn::Norm2);
        assert_eq!(transcribe_relaxed(&p).unwrap(), transcribe_perturbed(&p, &p.a).unwrap());
        assert!(transcribe_perturbed(&p, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn encode_decode_round_trip() {
        let l = VariableLayout::new(3, 2, 1);
        let z: Vec<f64> = (0..l.total()).map(|i| i as f64).collect();
        let (x, u, s) = l.decode(&z);
        assert_eq!(l.encode(&x, &u, &s), z);
    }
}

//! Post-solve analysis of relaxed solutions: per-node validity, normal versus
//! long-horizon classification, dual-chain diagnostics, the S-matrix rank test
//! and the control correction step.

use serde::{Deserialize, Serialize};

use crate::conic::{self, ConeSolution, SolveStatus, SolverSettings};
use crate::error::{LcvxError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{DiscreteProblem, MagnitudeFn};
use crate::transcribe::{self, Duals, Transcription};

/// Default relative tolerance for the validity test.
pub const TOL_VALIDITY: f64 = 1e-6;
/// Default relative tolerance for the long-horizon test.
pub const TOL_CASE: f64 = 1e-6;
/// A node's dual gate counts as open above `GATE_TOL · (1 + ‖η_N‖)`.
pub const GATE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

impl From<&ConeSolution> for SolverStats {
    fn from(s: &ConeSolution) -> Self {
        SolverStats {
            status: s.status,
            iterations: s.iterations,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            gap: s.gap,
        }
    }
}

/// Primal and dual solution of the relaxed problem in problem terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LcvxSolution {
    /// `x_1, …, x_{N+1}`.
    pub x: Vec<Vector>,
    /// `u_1, …, u_N`.
    pub u: Vec<Vector>,
    pub sigma: Vec<f64>,
    pub duals: Duals,
    pub objective: f64,
    pub stats: SolverStats,
    /// State matrix used in the solved dynamics (differs from the problem's
    /// after a perturbation).
    pub a_used: Matrix,
}

fn finish(t: &Transcription, sol: ConeSolution, a_used: Matrix) -> Result<LcvxSolution> {
    if sol.status != SolveStatus::Optimal {
        return Err(LcvxError::Solver { status: sol.status, context: None });
    }
    let (x, u, sigma) = t.layout.decode(&sol.z);
    let duals = transcribe::recover_duals(t, &sol.equality_duals)?;
    Ok(LcvxSolution {
        x,
        u,
        sigma,
        duals,
        objective: sol.objective,
        stats: SolverStats::from(&sol),
        a_used,
    })
}

/// Solves the relaxed problem; anything but an optimal status is an error.
pub fn solve_relaxed(problem: &DiscreteProblem, settings: &SolverSettings) -> Result<LcvxSolution> {
    solve_relaxed_with(problem, "bundled", settings)
}

pub fn solve_relaxed_with(problem: &DiscreteProblem, backend: &str, settings: &SolverSettings) -> Result<LcvxSolution> {
    let t = transcribe::transcribe_relaxed(problem)?;
    let sol = conic::solve_with_backend(&t.program, backend, settings)?;
    finish(&t, sol, problem.a.clone())
}

/// Solves the relaxed problem with `a_tilde` in place of `A`.
pub fn solve_perturbed(problem: &DiscreteProblem, a_tilde: &Matrix, settings: &SolverSettings) -> Result<LcvxSolution> {
    let t = transcribe::transcribe_perturbed(problem, a_tilde)?;
    let sol = conic::solve(&t.program, settings)?;
    finish(&t, sol, a_tilde.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeStatus {
    Valid,
    /// `g(u_i)` below `ρ_min`.
    Violating,
    /// `g(u_i)` above `ρ_max`.
    UpperViolating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeValidity {
    pub g_value: f64,
    pub sigma: f64,
    pub status: NodeStatus,
    /// `‖Bᵀη_i‖`.
    pub dual_gate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub nodes: Vec<NodeValidity>,
    pub violation_count: usize,
    /// `n_x − 1`.
    pub bound: usize,
    pub tol_v: f64,
}

impl ValidityReport {
    /// 0-based indices of violating nodes.
    pub fn violating_nodes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.status == NodeStatus::Violating)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn within_bound(&self) -> bool {
        self.violation_count <= self.bound
    }
}

/// Node `i` is valid iff `ρ_min − tol·max(1, ρ_min) ≤ g(u_i) ≤ ρ_max + tol·max(1, ρ_max)`.
pub fn check_validity(sol: &LcvxSolution, problem: &DiscreteProblem, tol_v: f64) -> ValidityReport {
    let lo = problem.rho_min - tol_v * problem.rho_min.max(1.0);
    let hi = problem.rho_max + tol_v * problem.rho_max.max(1.0);
    let bt = problem.b.transpose();
    let nodes: Vec<NodeValidity> = sol
        .u
        .iter()
        .zip(&sol.sigma)
        .zip(&sol.duals.eta)
        .map(|((u, &sigma), eta)| {
            let g_value = problem.g.eval(u.as_slice());
            let status = if g_value < lo {
                NodeStatus::Violating
            } else if g_value > hi {
                NodeStatus::UpperViolating
            } else {
                NodeStatus::Valid
            };
            NodeValidity { g_value, sigma, status, dual_gate: (&bt * eta).norm() }
        })
        .collect();
    let violation_count = nodes.iter().filter(|n| n.status == NodeStatus::Violating).count();
    ValidityReport { nodes, violation_count, bound: problem.n_x().saturating_sub(1), tol_v }
}

/// The boundary-only problem `min m(x) s.t. G x = g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalOptimum {
    /// `min_μ ‖∇m + Gᵀμ‖`.
    pub residual: f64,
    /// Optimal value when bounded.
    pub m_star: Option<f64>,
}

/// With an affine terminal cost the boundary-only problem is bounded exactly
/// when `∇m` lies in the row space of `G`; then every feasible point is optimal.
pub fn terminal_optimum(problem: &DiscreteProblem, tol: f64) -> TerminalOptimum {
    let c = &problem.cost.terminal_linear;
    let gm = &problem.boundary.g_matrix;
    let residual = if gm.nrows() == 0 {
        c.norm()
    } else {
        let gt = gm.transpose();
        let svd = gt.clone().svd(true, true);
        match svd.solve(&(-c), f64::EPSILON * 64.0 * svd.singular_values.max().max(1.0)) {
            Ok(mu) => (c + &gt * mu).norm(),
            Err(_) => c.norm(),
        }
    };
    let bounded = residual <= tol * c.norm().max(1.0);
    let m_star = if bounded {
        let xp = if gm.nrows() == 0 {
            Vector::zeros(c.len())
        } else {
            let svd = gm.clone().svd(true, true);
            svd.solve(&problem.boundary.g_vector, f64::EPSILON * 64.0 * svd.singular_values.max().max(1.0))
                .unwrap_or_else(|_| Vector::zeros(c.len()))
        };
        Some(problem.cost.terminal(&xp))
    } else {
        None
    };
    TerminalOptimum { residual, m_star }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CaseKind {
    Normal,
    LongHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseEvidence {
    /// `max_i (σ_i − ρ_min)`.
    pub max_sigma_gap: f64,
    /// Stationarity residual of the boundary-only problem.
    pub terminal_residual: f64,
    /// `‖η_N‖`, reported as corroboration only.
    pub eta_n_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseLabel {
    pub kind: CaseKind,
    pub evidence: CaseEvidence,
}

/// Long-horizon iff every slack sits at `ρ_min` and the terminal state solves
/// the boundary-only problem; normal otherwise.
pub fn classify_case(sol: &LcvxSolution, problem: &DiscreteProblem, tol_c: f64) -> CaseLabel {
    let max_sigma_gap = sol.sigma.iter().map(|s| s - problem.rho_min).fold(f64::NEG_INFINITY, f64::max);
    let term = terminal_optimum(problem, tol_c);
    let eta_n_norm = sol.duals.eta.last().map(|e| e.norm()).unwrap_or(0.0);
    let at_floor = max_sigma_gap <= tol_c * problem.rho_min.max(1.0);
    let kind = if at_floor && term.m_star.is_some() { CaseKind::LongHorizon } else { CaseKind::Normal };
    CaseLabel {
        kind,
        evidence: CaseEvidence { max_sigma_gap, terminal_residual: term.residual, eta_n_norm },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualChainReport {
    /// `max_i ‖Aᵀη_{i+1} − η_i‖ / (1 + ‖η_N‖)`.
    pub max_residual: f64,
    pub gates: Vec<f64>,
    /// Nodes whose gate is numerically closed, so validity is not certified there.
    pub closed_gates: Vec<usize>,
    pub eta_n_norm: f64,
    pub chain_holds: bool,
}

pub fn dual_chain_check(sol: &LcvxSolution, a: &Matrix, b: &Matrix, tol: f64) -> DualChainReport {
    let eta = &sol.duals.eta;
    let eta_n_norm = eta.last().map(|e| e.norm()).unwrap_or(0.0);
    let at = a.transpose();
    let bt = b.transpose();
    let max_residual = eta
        .windows(2)
        .map(|w| (&at * &w[1] - &w[0]).norm())
        .fold(0.0, f64::max)
        / (1.0 + eta_n_norm);
    let gates: Vec<f64> = eta.iter().map(|e| (&bt * e).norm()).collect();
    let thresh = GATE_TOL * (1.0 + eta_n_norm);
    let closed_gates = gates.iter().enumerate().filter(|(_, g)| **g <= thresh).map(|(i, _)| i).collect();
    DualChainReport { max_residual, gates, closed_gates, eta_n_norm, chain_holds: max_residual <= tol }
}

/// Numerical rank of `S = (A^{N−P₁}B, …, A^{N−P_k}B)` for 1-based nodes `P_j`.
pub fn s_matrix_rank(a: &Matrix, b: &Matrix, nodes: &[usize], n: usize) -> Result<usize> {
    Ok(linalg::numerical_rank(&s_matrix(a, b, nodes, n)?))
}

pub fn s_matrix(a: &Matrix, b: &Matrix, nodes: &[usize], n: usize) -> Result<Matrix> {
    if nodes.is_empty() {
        return Err(LcvxError::InvalidParameter("S-matrix needs at least one node".into()));
    }
    if let Some(p) = nodes.iter().find(|&&p| p == 0 || p > n) {
        return Err(LcvxError::InvalidParameter(format!("node {p} outside 1..={n}")));
    }
    linalg::ensure_square(a, "A")?;
    if b.nrows() != a.nrows() {
        return Err(LcvxError::Dimension("B rows must match A".into()));
    }
    let m = b.ncols();
    let mut s = Matrix::zeros(a.nrows(), m * nodes.len());
    for (j, &p) in nodes.iter().enumerate() {
        let blk = a.pow((n - p) as u32) * b;
        s.view_mut((0, j * m), (a.nrows(), m)).copy_from(&blk);
    }
    Ok(s)
}

/// Result of moving sub-threshold controls onto the `ρ_min` level set.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedControls {
    pub u_hat: Vec<Vector>,
    /// 0-based nodes that were changed.
    pub corrected_nodes: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Radially rescales every control with `g(u_i) < ρ_min − tol_v` (the nodes
/// that fail the validity check) onto the level set `g = ρ_min`; valid nodes
/// are left untouched. A zero control is mapped to `r·e₁`.
pub fn apply_correction(u: &[Vector], g: MagnitudeFn, rho_min: f64, tol_v: f64) -> CorrectedControls {
    let r = g.level_radius(rho_min);
    let mut warnings = Vec::new();
    let mut corrected_nodes = Vec::new();
    let u_hat = u
        .iter()
        .enumerate()
        .map(|(i, ui)| {
            if g.eval(ui.as_slice()) >= rho_min - tol_v {
                return ui.clone();
            }
            corrected_nodes.push(i);
            let nrm = ui.norm();
            if nrm > 0.0 {
                ui * (r / nrm)
            } else {
                warnings.push(format!("control at node {} is zero; using the first axis", i + 1));
                let mut e = Vector::zeros(ui.len());
                if !e.is_empty() {
                    e[0] = r;
                }
                e
            }
        })
        .collect();
    CorrectedControls { u_hat, corrected_nodes, warnings }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub u_hat: Vec<Vector>,
    pub x_hat: Vec<Vector>,
    pub corrected_nodes: Vec<usize>,
    /// `‖x̂_{N+1} − x_{N+1}‖`, both propagated through the discrete dynamics.
    pub deviation: f64,
    pub bound: f64,
    pub warnings: Vec<String>,
}

/// `(n_x − 1) · C₀ · (e^{‖A_c‖ dt} − 1)` with `C₀ = e^{‖A_c‖ T} ‖B_c‖ r / ‖A_c‖`,
/// `T = N·dt` and `r` the radius of the `ρ_min` level set. As `‖A_c‖ → 0` the
/// expression tends to `(n_x − 1) ‖B_c‖ r dt`.
pub fn correction_bound(a_c: &Matrix, b_c: &Matrix, dt: f64, horizon: f64, radius: f64) -> f64 {
    let na = linalg::spectral_norm(a_c);
    let nb = linalg::spectral_norm(b_c);
    let k = a_c.nrows().saturating_sub(1) as f64;
    let per_node = if na * dt < 1e-300 {
        nb * radius * dt
    } else {
        (na * horizon).exp() * nb * radius * (na * dt).exp_m1() / na
    };
    k * per_node
}

/// Applies the correction step, propagates the corrected controls through the
/// true dynamics and evaluates the deviation bound. Needs the continuous plant.
pub fn correct_controls(sol: &LcvxSolution, problem: &DiscreteProblem, tol_v: f64) -> Result<Correction> {
    let plant = problem
        .plant
        .as_ref()
        .ok_or(LcvxError::MissingPlant("the deviation bound needs A_c and B_c"))?;
    let corr = apply_correction(&sol.u, problem.g, problem.rho_min, tol_v);
    let x_ref = problem.propagate(&sol.u)?;
    let x_hat = problem.propagate(&corr.u_hat)?;
    let deviation = (x_hat.last().unwrap() - x_ref.last().unwrap()).norm();
    let radius = problem.g.level_radius(problem.rho_min);
    let bound = correction_bound(&plant.a_c, &plant.b_c, problem.dt, problem.dt * problem.n as f64, radius);
    Ok(Correction {
        u_hat: corr.u_hat,
        x_hat,
        corrected_nodes: corr.corrected_nodes,
        deviation,
        bound,
        warnings: corr.warnings,
    })
}

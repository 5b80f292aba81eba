//! Standard-form cone programs and the solvers behind them.
//!
//! A [`ConeProgram`] is
//!
//! ```text
//! minimize    cᵀz + c₀
//! subject to  E z = f
//!             G z + s = h,   s ∈ K
//! ```
//!
//! where `K` is a product of nonnegative orthants, second-order cones
//! `{(t, w) : t ≥ ‖w‖}` and rotated cones `{(a, b, w) : 2ab ≥ ‖w‖², a, b ≥ 0}`.
//! Duals follow the Lagrangian `cᵀz + yᵀ(Ez − f) + λᵀ(Gz − h)`, so an optimal
//! point satisfies `c + Eᵀy + Gᵀλ = 0` with `λ ∈ K`.

mod admm;
pub mod cones;
mod ipm;
pub mod ldl;
mod prep;
pub mod real;
pub mod sparse;

use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{LcvxError, Result};
pub use real::{Dd, Real};
pub use sparse::CscMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dim", rename_all = "snake_case")]
pub enum Cone {
    Nonneg(usize),
    Soc(usize),
    Rsoc(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Nonneg(d) | Cone::Soc(d) | Cone::Rsoc(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProgram {
    pub c: Vec<f64>,
    /// Constant added to the reported objective.
    pub c0: f64,
    pub e: CscMatrix,
    pub f: Vec<f64>,
    pub g: CscMatrix,
    pub h: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConeProgram {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.c.len();
        if self.e.ncols != n || self.g.ncols != n {
            return Err(LcvxError::Dimension(format!(
                "objective has {n} entries but E has {} columns and G has {}",
                self.e.ncols, self.g.ncols
            )));
        }
        if self.e.nrows != self.f.len() || self.g.nrows != self.h.len() {
            return Err(LcvxError::Dimension("constraint rows do not match right-hand sides".into()));
        }
        let total: usize = self.cones.iter().map(Cone::dim).sum();
        if total != self.h.len() {
            return Err(LcvxError::Dimension(format!(
                "cones cover {total} rows but there are {} inequality rows",
                self.h.len()
            )));
        }
        for cone in &self.cones {
            match *cone {
                Cone::Soc(0) => return Err(LcvxError::Dimension("empty second-order cone".into())),
                Cone::Rsoc(d) if d < 2 => {
                    return Err(LcvxError::Dimension("rotated cone needs at least two rows".into()))
                }
                _ => {}
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.c) || !finite(&self.e.nzval) || !finite(&self.g.nzval) {
            return Err(LcvxError::NonFinite("cone program data"));
        }
        if !finite(&self.f) || !finite(&self.h) || !self.c0.is_finite() {
            return Err(LcvxError::NonFinite("cone program right-hand side"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Double,
    DoubleDouble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol_p: f64,
    pub tol_d: f64,
    pub tol_g: f64,
    /// Threshold on the normalized infeasibility certificates.
    pub tol_inf: f64,
    pub max_iter: usize,
    pub precision: Precision,
    pub equilibrate: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_p: 1e-9,
            tol_d: 1e-9,
            tol_g: 1e-9,
            tol_inf: 1e-8,
            max_iter: 200,
            precision: Precision::Double,
            equilibrate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSolution {
    pub status: SolveStatus,
    /// Primal variables. For `DUAL_INFEASIBLE` this is the improving ray.
    pub z: Vec<f64>,
    pub slacks: Vec<f64>,
    /// Multipliers `y` of `Ez = f`. For `PRIMAL_INFEASIBLE` part of the certificate.
    pub equality_duals: Vec<f64>,
    /// Multipliers `λ ∈ K` of `Gz + s = h`.
    pub cone_duals: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

impl ConeSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// A cone-program solver that can be selected by name.
pub trait ConeBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, program: &ConeProgram, settings: &SolverSettings) -> ConeSolution;
}

struct InteriorPoint;

impl ConeBackend for InteriorPoint {
    fn name(&self) -> &str {
        "bundled"
    }
    fn solve(&self, program: &ConeProgram, settings: &SolverSettings) -> ConeSolution {
        match settings.precision {
            Precision::Double => {
                let sol = ipm::solve::<f64>(program, settings);
                // Nearly degenerate programs can lose the last digits in f64;
                // retry those in double-double before giving up.
                if matches!(sol.status, SolveStatus::Numerical | SolveStatus::MaxIter) {
                    log::debug!("bundled: {:?} in double precision, retrying in double-double", sol.status);
                    return ipm::solve::<Dd>(program, settings);
                }
                sol
            }
            Precision::DoubleDouble => ipm::solve::<Dd>(program, settings),
        }
    }
}

struct Splitting;

impl ConeBackend for Splitting {
    fn name(&self) -> &str {
        "admm"
    }
    fn solve(&self, program: &ConeProgram, settings: &SolverSettings) -> ConeSolution {
        admm::solve(program, settings)
    }
}

type Registry = RwLock<Vec<Arc<dyn ConeBackend>>>;

fn registry() -> &'static Registry {
    static REG: OnceLock<Registry> = OnceLock::new();
    REG.get_or_init(|| RwLock::new(vec![Arc::new(InteriorPoint), Arc::new(Splitting)]))
}

/// Adds a backend; a backend with the same name is replaced.
pub fn register_backend(backend: Arc<dyn ConeBackend>) {
    let mut reg = registry().write().unwrap_or_else(|e| e.into_inner());
    reg.retain(|b| b.name() != backend.name());
    reg.push(backend);
}

pub fn backend_names() -> Vec<String> {
    let reg = registry().read().unwrap_or_else(|e| e.into_inner());
    reg.iter().map(|b| b.name().to_string()).collect()
}

/// Solves with the bundled interior-point method.
pub fn solve(program: &ConeProgram, settings: &SolverSettings) -> Result<ConeSolution> {
    solve_with_backend(program, "bundled", settings)
}

pub fn solve_with_backend(program: &ConeProgram, backend: &str, settings: &SolverSettings) -> Result<ConeSolution> {
    program.check()?;
    let b = {
        let reg = registry().read().unwrap_or_else(|e| e.into_inner());
        reg.iter().find(|b| b.name() == backend).cloned()
    }
    .ok_or_else(|| LcvxError::UnknownBackend(backend.to_string()))?;
    let sol = b.solve(program, settings);
    log::debug!(
        "{backend}: {:?} after {} iterations, objective {:.10e}",
        sol.status,
        sol.iterations,
        sol.objective
    );
    Ok(sol)
}

/// Residuals of a candidate point measured on the caller's program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
    pub cone_violation: f64,
}

/// Recomputes optimality residuals of a solution against the program, in the
/// same relative measures the solvers use for termination.
pub fn certify(program: &ConeProgram, sol: &ConeSolution) -> Certificate {
    let inner = prep::map_program(program);
    let mut s = sol.slacks.clone();
    let mut lam = sol.cone_duals.clone();
    prep::slack_to_soc(&inner.rotated, &mut s);
    prep::dual_to_soc(&inner.rotated, &mut lam);
    let ez = program.e.mul_vec(&sol.z);
    let gz = program.g.mul_vec(&sol.z);
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let rp1: Vec<f64> = ez.iter().zip(&program.f).map(|(a, b)| a - b).collect();
    let rp2: Vec<f64> = gz.iter().zip(&sol.slacks).zip(&program.h).map(|((a, s), h)| a + s - h).collect();
    let pscale = 1.0 + inf(&program.f).max(inf(&program.h));
    let mut rd = program.c.clone();
    program.e.gemv_t(1.0, &sol.equality_duals, &mut rd);
    program.g.gemv_t(1.0, &sol.cone_duals, &mut rd);
    let pobj: f64 = program.c.iter().zip(&sol.z).map(|(a, b)| a * b).sum();
    let comp: f64 = s.iter().zip(&lam).map(|(a, b)| a * b).sum();
    let viol = inner.cones.interior_margin(&s).max(inner.cones.interior_margin(&lam)).max(0.0);
    Certificate {
        primal_residual: inf(&rp1).max(inf(&rp2)) / pscale,
        dual_residual: inf(&rd) / (1.0 + inf(&program.c)),
        complementarity: comp.abs() / (1.0 + pobj.abs()),
        cone_violation: viol,
    }
}

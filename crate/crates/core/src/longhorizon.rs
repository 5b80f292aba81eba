//! Two-phase construction for long-horizon instances and the bisection search
//! on the switching time.
//!
//! Phase one holds a constant control `u_s` with `g(u_s) = ρ_min` on
//! `[0, t_s]`; phase two is a discrete relaxed problem on `[t_s, t_f]` whose
//! running cost is weighted by `(t_f − t_s)/N` and whose reported objective
//! carries the phase-one cost `t_s · l(ρ_min)`. The optimal value `v(t_s)` is
//! continuous, so the earliest switching time whose phase-two problem is
//! normal can be bracketed by bisection.

use serde::{Deserialize, Serialize};

use crate::analysis::{self, CaseKind, CaseLabel, LcvxSolution};
use crate::conic::{SolveStatus, SolverSettings};
use crate::error::{LcvxError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{BoundaryMap, ContinuousPlant, CostSpec, DiscreteProblem, MagnitudeFn, ProblemSpec};

/// Tolerance on `g(u_s) = ρ_min`, relative to `max(1, ρ_min)`.
pub const PHASE_ONE_LEVEL_TOL: f64 = 1e-10;
/// Default bisection resolution in seconds.
pub const DEFAULT_EPS_T: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOneSpec {
    pub u_s: Vector,
    pub x_s: Vector,
    pub t_s: f64,
}

/// `x_init(t_s) = e^{A_c t_s} x_s + ∫₀^{t_s} e^{A_c τ} dτ (B_c u_s + w)`.
pub fn phase1_state(plant: &ContinuousPlant, spec: &PhaseOneSpec, t_f: f64) -> Result<Vector> {
    if !(0.0..=t_f).contains(&spec.t_s) {
        return Err(LcvxError::InvalidParameter(format!(
            "switching time {} outside [0, {t_f}]",
            spec.t_s
        )));
    }
    if spec.x_s.len() != plant.n_x() || spec.u_s.len() != plant.n_u() {
        return Err(LcvxError::Dimension("phase-one state or control has the wrong length".into()));
    }
    let forcing = &plant.b_c * &spec.u_s + &plant.drift;
    let col = Matrix::from_column_slice(plant.n_x(), 1, forcing.as_slice());
    let (e, integral) = linalg::exp_with_integral(&plant.a_c, &col, spec.t_s)?;
    Ok(e * &spec.x_s + integral.column(0))
}

/// Data shared by every phase-two problem of one long-horizon instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseSetup {
    pub plant: ContinuousPlant,
    pub t_f: f64,
    pub n: usize,
    pub x_s: Vector,
    pub u_s: Vector,
    pub rho_min: f64,
    pub rho_max: f64,
    pub g: MagnitudeFn,
    pub cost: CostSpec,
    pub boundary: BoundaryMap,
}

impl TwoPhaseSetup {
    pub fn check(&self) -> Result<()> {
        if !(self.t_f > 0.0) || !self.t_f.is_finite() {
            return Err(LcvxError::InvalidParameter(format!("final time must be positive, got {}", self.t_f)));
        }
        let level = self.g.eval(self.u_s.as_slice());
        if (level - self.rho_min).abs() > PHASE_ONE_LEVEL_TOL * self.rho_min.max(1.0) {
            return Err(LcvxError::InvalidParameter(format!(
                "phase-one control has magnitude {level}, expected rho_min = {}",
                self.rho_min
            )));
        }
        Ok(())
    }

    /// `l(ρ_min)` for the linear running cost.
    pub fn floor_rate(&self) -> f64 {
        self.cost.running * self.rho_min
    }

    fn phase_one(&self, t_s: f64) -> PhaseOneSpec {
        PhaseOneSpec { u_s: self.u_s.clone(), x_s: self.x_s.clone(), t_s }
    }
}

/// Phase-two problem for switching time `t_s`.
pub fn build_phase2(setup: &TwoPhaseSetup, t_s: f64) -> Result<DiscreteProblem> {
    setup.check()?;
    if !(t_s < setup.t_f) || t_s < 0.0 {
        return Err(LcvxError::InvalidParameter(format!(
            "switching time {t_s} must lie in [0, {})",
            setup.t_f
        )));
    }
    let x_init = phase1_state(&setup.plant, &setup.phase_one(t_s), setup.t_f)?;
    let remaining = setup.t_f - t_s;
    let mut cost = setup.cost.clone();
    cost.running *= remaining / setup.n as f64;
    let spec = ProblemSpec {
        n: setup.n,
        x_init,
        rho_min: setup.rho_min,
        rho_max: setup.rho_max,
        g: setup.g,
        cost,
        boundary: setup.boundary.clone(),
    };
    let mut p = DiscreteProblem::from_plant(&setup.plant, remaining, spec)?;
    p.objective_offset = t_s * setup.floor_rate();
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValuePoint {
    pub t_s: f64,
    /// Total cost of both phases.
    pub v: f64,
    pub label: CaseLabel,
    pub problem: DiscreteProblem,
    pub solution: LcvxSolution,
}

/// Solves the phase-two problem at `t_s` and classifies it.
pub fn value_function(setup: &TwoPhaseSetup, t_s: f64, settings: &SolverSettings, tol_c: f64) -> Result<ValuePoint> {
    let problem = build_phase2(setup, t_s)?;
    let solution = analysis::solve_relaxed(&problem, settings).map_err(|e| match e {
        LcvxError::Solver { status, .. } => LcvxError::Solver { status, context: Some(format!("t_s = {t_s}")) },
        other => other,
    })?;
    let label = analysis::classify_case(&solution, &problem, tol_c);
    // The phase-one cost is already part of the program's constant term.
    Ok(ValuePoint { t_s, v: solution.objective, label, problem, solution })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionOptions {
    pub eps_t: f64,
    /// Stop at the first normal midpoint whose value is within `eps_v` of the
    /// lower bound `m* + t_f l(ρ_min)`.
    pub early_stop: bool,
    /// Relative tolerance for the early stop, scaled by `max(1, |bound|)`.
    pub eps_v: f64,
    pub tol_c: f64,
    /// Cap on midpoint solves; defaults to `⌈log₂(t_f/eps_t)⌉ + 2`.
    pub max_iter: Option<usize>,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        BisectionOptions {
            eps_t: DEFAULT_EPS_T,
            early_stop: false,
            eps_v: 1e-6,
            tol_c: analysis::TOL_CASE,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StepOutcome {
    Normal,
    LongHorizon,
    /// The phase-two problem has no feasible point: the switch is too late.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub t_mid: f64,
    pub outcome: StepOutcome,
    /// `v(t_mid)`; absent for infeasible midpoints.
    pub value: Option<f64>,
    pub t_low: f64,
    pub t_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionTrace {
    pub iterations: Vec<BisectionStep>,
    pub t_s_star: f64,
    pub certificate: CaseLabel,
    /// `v(t_s*)`.
    pub value: f64,
    /// `m* + t_f l(ρ_min)`.
    pub lower_bound: f64,
    pub m_star: f64,
    /// Every phase-two solve, including the one at `t_s = 0`.
    pub solves: usize,
    pub early_stopped: bool,
}

/// Bisection on the switching time. The interval keeps a long-horizon (or
/// zero) left end and a right end that is either `t_f` or certified normal;
/// the search fails if no normal certificate is ever found.
pub fn bisection_search(setup: &TwoPhaseSetup, settings: &SolverSettings, opts: &BisectionOptions) -> Result<BisectionTrace> {
    if !(opts.eps_t > 0.0) {
        return Err(LcvxError::InvalidParameter("bisection resolution must be positive".into()));
    }
    let start = value_function(setup, 0.0, settings, opts.tol_c)?;
    if start.label.kind == CaseKind::Normal {
        return Err(LcvxError::Assumption(
            "the full-horizon problem is already normal; no switching time is needed".into(),
        ));
    }
    let m_star = analysis::terminal_optimum(&start.problem, opts.tol_c)
        .m_star
        .ok_or_else(|| LcvxError::Assumption("the boundary-only problem is unbounded".into()))?;
    let lower_bound = m_star + setup.t_f * setup.floor_rate();
    let cap = opts
        .max_iter
        .unwrap_or_else(|| (setup.t_f / opts.eps_t).log2().ceil().max(0.0) as usize + 2);

    let (mut t_low, mut t_high) = (0.0, setup.t_f);
    let mut best: Option<(CaseLabel, f64)> = None;
    let mut iterations = Vec::new();
    let mut solves = 1;
    let mut early_stopped = false;
    while t_high - t_low > opts.eps_t {
        if iterations.len() >= cap {
            return Err(LcvxError::Assumption(format!("bisection did not converge in {cap} steps")));
        }
        let t_mid = 0.5 * (t_low + t_high);
        solves += 1;
        let (outcome, value, label) = match value_function(setup, t_mid, settings, opts.tol_c) {
            Ok(p) => {
                let o = if p.label.kind == CaseKind::Normal { StepOutcome::Normal } else { StepOutcome::LongHorizon };
                (o, Some(p.v), Some(p.label))
            }
            Err(LcvxError::Solver { status: SolveStatus::PrimalInfeasible, .. }) => (StepOutcome::Infeasible, None, None),
            Err(e) => return Err(e),
        };
        match outcome {
            StepOutcome::LongHorizon => t_low = t_mid,
            StepOutcome::Normal => {
                t_high = t_mid;
                best = Some((label.unwrap(), value.unwrap()));
            }
            StepOutcome::Infeasible => {
                t_high = t_mid;
                best = None;
            }
        }
        log::debug!("bisection t = {t_mid:.6}: {outcome:?}");
        iterations.push(BisectionStep { t_mid, outcome, value, t_low, t_high });
        if opts.early_stop && outcome == StepOutcome::Normal {
            let v = value.unwrap();
            if v <= lower_bound + opts.eps_v * lower_bound.abs().max(1.0) {
                early_stopped = true;
                break;
            }
        }
    }
    let (certificate, value) = best.ok_or_else(|| {
        LcvxError::Assumption(format!(
            "no normal switching time found below {t_high}; the value function never leaves its lower bound"
        ))
    })?;
    Ok(BisectionTrace {
        iterations,
        t_s_star: t_high,
        certificate,
        value,
        lower_bound,
        m_star,
        solves,
        early_stopped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostBisectionReport {
    pub t_s_star: f64,
    /// `max_i g(u_i) − ρ_min`.
    pub max_excess: f64,
    pub violation_count: usize,
    pub bound: usize,
    /// Boundary residual of the controls run through the unperturbed phase-two dynamics.
    pub boundary_residual: f64,
    /// `m(x_{N+1}) − m*`.
    pub terminal_gap: f64,
    pub value: f64,
    pub perturbed: bool,
}

/// Re-solves at `t_s*`, optionally with `Ã` in place of `A(t_s*)`, and
/// measures how close the result is to the ideal continuous solution.
pub fn post_bisection_quality(
    setup: &TwoPhaseSetup,
    trace: &BisectionTrace,
    a_tilde: Option<&Matrix>,
    settings: &SolverSettings,
    tol_v: f64,
) -> Result<(PostBisectionReport, DiscreteProblem, LcvxSolution)> {
    let problem = build_phase2(setup, trace.t_s_star)?;
    let sol = match a_tilde {
        Some(a) => analysis::solve_perturbed(&problem, a, settings)?,
        None => analysis::solve_relaxed(&problem, settings)?,
    };
    let validity = analysis::check_validity(&sol, &problem, tol_v);
    let states = problem.propagate(&sol.u)?;
    let xf = states.last().unwrap();
    let max_g = validity.nodes.iter().map(|n| n.g_value).fold(f64::NEG_INFINITY, f64::max);
    let report = PostBisectionReport {
        t_s_star: trace.t_s_star,
        max_excess: max_g - setup.rho_min,
        violation_count: validity.violation_count,
        bound: validity.bound,
        boundary_residual: problem.boundary.residual(xf),
        terminal_gap: problem.cost.terminal(xf) - trace.m_star,
        value: sol.objective,
        perturbed: a_tilde.is_some(),
    };
    Ok((report, problem, sol))
}

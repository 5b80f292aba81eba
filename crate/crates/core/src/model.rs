//! Problem data for the discrete LCvx instance, validation probes, and the
//! nonconvex cost evaluator.

use serde::{Deserialize, Serialize};

use crate::conic::{self, SolveStatus, SolverSettings};
use crate::error::{LcvxError, Result};
use crate::linalg::{self, ensure_finite, Matrix, Vector, Zoh};
use crate::transcribe;

/// `ẋ = A_c x + B_c u + w` with a constant drift `w` (gravity, for instance).
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPlant {
    pub a_c: Matrix,
    pub b_c: Matrix,
    pub drift: Vector,
}

impl ContinuousPlant {
    pub fn new(a_c: Matrix, b_c: Matrix, drift: Vector) -> Result<Self> {
        linalg::ensure_square(&a_c, "A_c")?;
        ensure_finite(&a_c, "A_c")?;
        ensure_finite(&b_c, "B_c")?;
        if !drift.iter().all(|v| v.is_finite()) {
            return Err(LcvxError::NonFinite("drift"));
        }
        let n = a_c.nrows();
        if b_c.nrows() != n || drift.len() != n {
            return Err(LcvxError::Dimension(format!(
                "A_c is {n}x{n}, B_c is {}x{}, drift has {} entries",
                b_c.nrows(),
                b_c.ncols(),
                drift.len()
            )));
        }
        Ok(ContinuousPlant { a_c, b_c, drift })
    }

    pub fn n_x(&self) -> usize {
        self.a_c.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b_c.ncols()
    }

    pub fn discretize(&self, dt: f64) -> Result<Zoh> {
        linalg::discretize_zoh(&self.a_c, &self.b_c, &self.drift, dt)
    }
}

/// Input magnitude `g(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeFn {
    /// `‖u‖₂`
    Norm2,
    /// `‖u‖₂²`
    Norm2Sq,
}

impl MagnitudeFn {
    pub fn eval(&self, u: &[f64]) -> f64 {
        let sq: f64 = u.iter().map(|v| v * v).sum();
        match self {
            MagnitudeFn::Norm2 => sq.sqrt(),
            MagnitudeFn::Norm2Sq => sq,
        }
    }

    /// Euclidean radius of the level set `g(u) = level`.
    pub fn level_radius(&self, level: f64) -> f64 {
        match self {
            MagnitudeFn::Norm2 => level,
            MagnitudeFn::Norm2Sq => level.max(0.0).sqrt(),
        }
    }
}

/// `m(x) = terminal_linearᵀ x + terminal_constant` and `l(σ) = running · σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub running: f64,
    pub terminal_linear: Vector,
    pub terminal_constant: f64,
}

impl CostSpec {
    pub fn terminal(&self, x: &Vector) -> f64 {
        self.terminal_linear.dot(x) + self.terminal_constant
    }
}

/// Terminal constraint `G x_{N+1} = g`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    pub g_matrix: Matrix,
    pub g_vector: Vector,
}

impl BoundaryMap {
    pub fn fixed_final_state(target: &Vector) -> Self {
        let n = target.len();
        BoundaryMap { g_matrix: Matrix::identity(n, n), g_vector: target.clone() }
    }

    pub fn rows(&self) -> usize {
        self.g_matrix.nrows()
    }

    pub fn residual(&self, x: &Vector) -> f64 {
        (&self.g_matrix * x - &self.g_vector).norm()
    }

    /// Drops rows that are linear combinations of earlier ones (including the
    /// right-hand side). Returns the reduced map and the dropped row indices.
    pub fn without_redundant_rows(&self) -> (BoundaryMap, Vec<usize>) {
        let n = self.g_matrix.ncols();
        let mut kept: Vec<usize> = Vec::new();
        let mut dropped = Vec::new();
        for r in 0..self.rows() {
            let mut rows = kept.clone();
            rows.push(r);
            let aug = Matrix::from_fn(rows.len(), n + 1, |i, j| {
                if j < n { self.g_matrix[(rows[i], j)] } else { self.g_vector[rows[i]] }
            });
            if linalg::numerical_rank(&aug) == rows.len() {
                kept.push(r);
            } else {
                dropped.push(r);
            }
        }
        let g_matrix = Matrix::from_fn(kept.len(), n, |i, j| self.g_matrix[(kept[i], j)]);
        let g_vector = Vector::from_fn(kept.len(), |i, _| self.g_vector[kept[i]]);
        (BoundaryMap { g_matrix, g_vector }, dropped)
    }
}

/// The discretized instance
///
/// ```text
/// minimize   m(x_{N+1}) + Σ l(σ_i)
/// subject to x_{i+1} = A x_i + B u_i + drift,  x_1 = x_init,  G x_{N+1} = g
///            ρ_min ≤ σ_i ≤ ρ_max,  g(u_i) ≤ σ_i
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub drift: Vector,
    pub n: usize,
    pub x_init: Vector,
    pub rho_min: f64,
    pub rho_max: f64,
    pub g: MagnitudeFn,
    pub cost: CostSpec,
    pub boundary: BoundaryMap,
    /// Step length in seconds (one for natively discrete problems).
    pub dt: f64,
    /// Constant added to every reported objective (phase-one cost, for instance).
    pub objective_offset: f64,
    /// The continuous plant this instance was discretized from, when known.
    pub plant: Option<ContinuousPlant>,
}

/// Fields shared by [`DiscreteProblem`] constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub x_init: Vector,
    pub rho_min: f64,
    pub rho_max: f64,
    pub g: MagnitudeFn,
    pub cost: CostSpec,
    pub boundary: BoundaryMap,
}

impl DiscreteProblem {
    /// A natively discrete instance with unit step.
    pub fn new(a: Matrix, b: Matrix, drift: Vector, spec: ProblemSpec) -> Result<Self> {
        let p = DiscreteProblem {
            a,
            b,
            drift,
            n: spec.n,
            x_init: spec.x_init,
            rho_min: spec.rho_min,
            rho_max: spec.rho_max,
            g: spec.g,
            cost: spec.cost,
            boundary: spec.boundary,
            dt: 1.0,
            objective_offset: 0.0,
            plant: None,
        };
        p.check()?;
        Ok(p)
    }

    /// Zero-order-hold discretization of `plant` over `t_f` with `spec.n` steps.
    pub fn from_plant(plant: &ContinuousPlant, t_f: f64, spec: ProblemSpec) -> Result<Self> {
        if spec.n == 0 {
            return Err(LcvxError::InvalidParameter("horizon needs at least one step".into()));
        }
        let dt = t_f / spec.n as f64;
        let zoh = plant.discretize(dt)?;
        let mut p = DiscreteProblem::new(zoh.a, zoh.b, zoh.drift, spec)?;
        p.dt = dt;
        p.plant = Some(plant.clone());
        Ok(p)
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    /// Hard invariants: positive lower bound, ordered bounds, consistent shapes.
    pub fn check(&self) -> Result<()> {
        if !(self.rho_min > 0.0) || !self.rho_min.is_finite() {
            return Err(LcvxError::InvalidParameter(format!(
                "rho_min must be positive, got {}",
                self.rho_min
            )));
        }
        if !(self.rho_max > self.rho_min) || !self.rho_max.is_finite() {
            return Err(LcvxError::InvalidParameter(format!(
                "rho_max ({}) must exceed rho_min ({})",
                self.rho_max, self.rho_min
            )));
        }
        if self.n == 0 {
            return Err(LcvxError::InvalidParameter("horizon needs at least one step".into()));
        }
        linalg::ensure_square(&self.a, "A")?;
        ensure_finite(&self.a, "A")?;
        ensure_finite(&self.b, "B")?;
        ensure_finite(&self.boundary.g_matrix, "boundary matrix")?;
        let nx = self.n_x();
        let dims_ok = self.b.nrows() == nx
            && self.drift.len() == nx
            && self.x_init.len() == nx
            && self.cost.terminal_linear.len() == nx
            && self.boundary.g_matrix.ncols() == nx
            && self.boundary.g_vector.len() == self.boundary.g_matrix.nrows();
        if !dims_ok {
            return Err(LcvxError::Dimension(format!(
                "inconsistent shapes: A {nx}x{nx}, B {}x{}, drift {}, x_init {}, terminal cost {}, boundary {}x{} with {} targets",
                self.b.nrows(),
                self.b.ncols(),
                self.drift.len(),
                self.x_init.len(),
                self.cost.terminal_linear.len(),
                self.boundary.g_matrix.nrows(),
                self.boundary.g_matrix.ncols(),
                self.boundary.g_vector.len()
            )));
        }
        let finite = self.drift.iter().chain(self.x_init.iter()).chain(self.boundary.g_vector.iter()).all(|v| v.is_finite())
            && self.cost.terminal_linear.iter().all(|v| v.is_finite())
            && self.cost.running.is_finite()
            && self.cost.terminal_constant.is_finite();
        if !finite {
            return Err(LcvxError::NonFinite("problem vectors"));
        }
        Ok(())
    }

    /// State sequence `x_1, …, x_{N+1}` under the given controls.
    pub fn propagate(&self, u: &[Vector]) -> Result<Vec<Vector>> {
        self.propagate_with(&self.a, u)
    }

    /// Propagation with a substitute state matrix.
    pub fn propagate_with(&self, a: &Matrix, u: &[Vector]) -> Result<Vec<Vector>> {
        if u.len() != self.n || u.iter().any(|ui| ui.len() != self.n_u()) {
            return Err(LcvxError::Dimension(format!(
                "expected {} controls of length {}",
                self.n,
                self.n_u()
            )));
        }
        let mut xs = Vec::with_capacity(self.n + 1);
        xs.push(self.x_init.clone());
        for ui in u {
            let next = a * xs.last().unwrap() + &self.b * ui + &self.drift;
            xs.push(next);
        }
        Ok(xs)
    }
}

/// Outcome of evaluating controls against the nonconvex problem.
#[derive(Debug, Clone, PartialEq)]
pub struct NonconvexEvaluation {
    pub cost: f64,
    pub boundary_residual: f64,
    pub g_values: Vec<f64>,
    pub states: Vec<Vector>,
}

/// Cost of the nonconvex problem `m(x_{N+1}) + Σ l(g(u_i))` plus the
/// objective offset, the terminal residual `‖G x_{N+1} − g‖`, and `g(u_i)`.
pub fn evaluate_nonconvex_cost(problem: &DiscreteProblem, u: &[Vector]) -> Result<NonconvexEvaluation> {
    let states = problem.propagate(u)?;
    let g_values: Vec<f64> = u.iter().map(|ui| problem.g.eval(ui.as_slice())).collect();
    let xf = states.last().unwrap();
    let cost = problem.cost.terminal(xf)
        + problem.cost.running * g_values.iter().sum::<f64>()
        + problem.objective_offset;
    Ok(NonconvexEvaluation {
        cost,
        boundary_residual: problem.boundary.residual(xf),
        g_values,
        states,
    })
}

/// Relative tightening of `ρ_max` used by the interior-feasibility probe.
pub const SLATER_TIGHTENING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_x: usize,
    pub controllability_rank: usize,
    pub controllable: bool,
    pub boundary_rows: usize,
    pub dropped_boundary_rows: Vec<usize>,
    pub slater_probe_status: SolveStatus,
    pub slater_probe_feasible: bool,
    pub monotone_cost: bool,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.controllable && self.slater_probe_feasible && self.monotone_cost
    }
}

/// Checks the standing assumptions: controllability, independent boundary
/// rows, a feasible point with slack in `ρ_max` (evidence, not proof, of an
/// interior point), and an increasing running cost.
///
/// Returns the report together with the problem after redundant boundary rows
/// have been removed.
pub fn validate(problem: &DiscreteProblem, settings: &SolverSettings) -> Result<(ValidationReport, DiscreteProblem)> {
    problem.check()?;
    let mut warnings = Vec::new();
    let rank = linalg::controllability_rank(&problem.a, &problem.b)?;
    let n_x = problem.n_x();
    if rank < n_x {
        warnings.push(format!("(A, B) is not controllable: rank {rank} < {n_x}"));
    }
    let (boundary, dropped) = problem.boundary.without_redundant_rows();
    if !dropped.is_empty() {
        warnings.push(format!("dropped redundant boundary rows {dropped:?}"));
    }
    if linalg::numerical_rank(&boundary.g_matrix) < boundary.rows() {
        warnings.push("boundary rows are inconsistent".to_string());
    }
    let mut reduced = problem.clone();
    reduced.boundary = boundary;

    let mut probe = reduced.clone();
    probe.rho_max -= SLATER_TIGHTENING * probe.rho_max.max(1.0);
    let probe_status = if probe.rho_max > probe.rho_min {
        let t = transcribe::transcribe_relaxed(&probe)?;
        conic::solve(&t.program, settings)?.status
    } else {
        SolveStatus::PrimalInfeasible
    };
    // An unbounded objective still certifies a feasible point.
    let feasible = matches!(probe_status, SolveStatus::Optimal | SolveStatus::DualInfeasible);
    if !feasible {
        warnings.push(format!("interior feasibility probe returned {probe_status:?}"));
    }
    let monotone = problem.cost.running > 0.0;
    if !monotone {
        warnings.push("running cost must be increasing".to_string());
    }
    Ok((
        ValidationReport {
            n_x,
            controllability_rank: rank,
            controllable: rank == n_x,
            boundary_rows: reduced.boundary.rows(),
            dropped_boundary_rows: dropped,
            slater_probe_status: probe_status,
            slater_probe_feasible: feasible,
            monotone_cost: monotone,
            warnings,
        },
        reduced,
    ))
}

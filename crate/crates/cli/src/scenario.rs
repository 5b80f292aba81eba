//! JSON scenario files.
//!
//! A scenario carries either a continuous plant (discretized by zero-order
//! hold over `t_f`) or a ready-made discrete pair `(A, B)`. Matrices are
//! row-major lists of rows.

use std::path::Path;

use lcvx::conic::SolverSettings;
use lcvx::linalg::{Matrix, Vector};
use lcvx::longhorizon::{TwoPhaseSetup, DEFAULT_EPS_T};
use lcvx::model::{BoundaryMap, ContinuousPlant, CostSpec, DiscreteProblem, MagnitudeFn, ProblemSpec};
use lcvx::perturb::DEFAULT_EPSILON;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MOON_LANDING_60S: &str = include_str!("../scenarios/moon_landing_60s.json");
pub const ARTIFICIAL_N3: &str = include_str!("../scenarios/artificial_n3.json");
pub const MOON_LANDING_200S: &str = include_str!("../scenarios/moon_landing_200s.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub plant: PlantSpec,
    pub horizon: Horizon,
    pub control: ControlSpec,
    #[serde(default)]
    pub cost: CostCfg,
    pub boundary: BoundaryCfg,
    pub initial_state: Vec<f64>,
    #[serde(default)]
    pub long_horizon: LongHorizonCfg,
    #[serde(default)]
    pub perturbation: PerturbationCfg,
    #[serde(default)]
    pub analysis: AnalysisCfg,
    #[serde(default)]
    pub solver: SolverSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    /// `ẋ = A_c x + B_c u + drift`.
    Continuous {
        a_c: Vec<Vec<f64>>,
        b_c: Vec<Vec<f64>>,
        #[serde(default)]
        drift: Option<Vec<f64>>,
    },
    /// `x⁺ = A x + B u + drift`.
    Discrete {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default)]
        drift: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    /// Seconds; required for a continuous plant.
    #[serde(default)]
    pub t_f: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub g_kind: MagnitudeFn,
    pub rho_min: f64,
    pub rho_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostCfg {
    pub running: f64,
    pub terminal_linear: Option<Vec<f64>>,
    pub terminal_constant: f64,
}

impl Default for CostCfg {
    fn default() -> Self {
        CostCfg { running: 1.0, terminal_linear: None, terminal_constant: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryCfg {
    /// Shorthand for `G = I`, `g = target`.
    #[serde(default)]
    pub fixed_final_state: Option<Vec<f64>>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongHorizonCfg {
    /// Phase-one control; must satisfy `g(u_s) = ρ_min`.
    pub u_s: Option<Vec<f64>>,
    pub eps_t: f64,
    pub early_stop: bool,
}

impl Default for LongHorizonCfg {
    fn default() -> Self {
        LongHorizonCfg { u_s: None, eps_t: DEFAULT_EPS_T, early_stop: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationCfg {
    pub epsilon: f64,
    pub seed: u64,
    /// Fixed shift vector used instead of a random draw.
    pub q: Option<Vec<f64>>,
}

impl Default for PerturbationCfg {
    fn default() -> Self {
        PerturbationCfg { epsilon: DEFAULT_EPSILON, seed: 0, q: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisCfg {
    pub tol_v: f64,
    pub tol_c: f64,
}

impl Default for AnalysisCfg {
    fn default() -> Self {
        AnalysisCfg { tol_v: lcvx::analysis::TOL_VALIDITY, tol_c: lcvx::analysis::TOL_CASE }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Scenario(e.to_string()))?;
    s.check()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Scenario(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        CliError::Scenario(m) => CliError::Scenario(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// One of the bundled scenarios by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "example1" | "moon_landing_60s" => Some(MOON_LANDING_60S),
        "example2" | "artificial_n3" => Some(ARTIFICIAL_N3),
        "example3" | "moon_landing_200s" => Some(MOON_LANDING_200S),
        _ => None,
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Scenario(format!("{what}: rows have different lengths")));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn dim_err(what: &str, got: usize, want: usize) -> CliError {
    CliError::Scenario(format!("{what} has {got} entries, expected {want}"))
}

impl Scenario {
    pub fn n_x(&self) -> usize {
        match &self.plant {
            PlantSpec::Continuous { a_c, .. } => a_c.len(),
            PlantSpec::Discrete { a, .. } => a.len(),
        }
    }

    fn check(&self) -> Result<(), CliError> {
        let n_x = self.n_x();
        if self.initial_state.len() != n_x {
            return Err(dim_err("initial_state", self.initial_state.len(), n_x));
        }
        if matches!(self.plant, PlantSpec::Continuous { .. }) && self.horizon.t_f.is_none() {
            return Err(CliError::Scenario("horizon.t_f is required for a continuous plant".into()));
        }
        let b = &self.boundary;
        match (&b.fixed_final_state, &b.matrix, &b.vector) {
            (Some(t), None, None) if t.len() == n_x => {}
            (Some(t), None, None) => return Err(dim_err("boundary.fixed_final_state", t.len(), n_x)),
            (None, Some(m), Some(v)) if m.len() == v.len() => {}
            (None, Some(_), Some(_)) => {
                return Err(CliError::Scenario("boundary.matrix and boundary.vector disagree in rows".into()))
            }
            _ => {
                return Err(CliError::Scenario(
                    "boundary needs either fixed_final_state or both matrix and vector".into(),
                ))
            }
        }
        if let Some(c) = &self.cost.terminal_linear {
            if c.len() != n_x {
                return Err(dim_err("cost.terminal_linear", c.len(), n_x));
            }
        }
        // Building the problem runs the remaining shape and bound checks.
        self.problem()?;
        Ok(())
    }

    pub fn plant(&self) -> Result<Option<ContinuousPlant>, CliError> {
        match &self.plant {
            PlantSpec::Continuous { a_c, b_c, drift } => {
                let a = matrix(a_c, "plant.a_c")?;
                let drift = Vector::from_vec(drift.clone().unwrap_or_else(|| vec![0.0; a.nrows()]));
                Ok(Some(ContinuousPlant::new(a, matrix(b_c, "plant.b_c")?, drift)?))
            }
            PlantSpec::Discrete { .. } => Ok(None),
        }
    }

    fn boundary_map(&self) -> Result<BoundaryMap, CliError> {
        let b = &self.boundary;
        Ok(match (&b.fixed_final_state, &b.matrix, &b.vector) {
            (Some(t), _, _) => BoundaryMap::fixed_final_state(&Vector::from_vec(t.clone())),
            (None, Some(m), Some(v)) => {
                BoundaryMap { g_matrix: matrix(m, "boundary.matrix")?, g_vector: Vector::from_vec(v.clone()) }
            }
            _ => unreachable!("checked when parsing"),
        })
    }

    fn cost_spec(&self) -> CostSpec {
        CostSpec {
            running: self.cost.running,
            terminal_linear: Vector::from_vec(self.cost.terminal_linear.clone().unwrap_or_else(|| vec![0.0; self.n_x()])),
            terminal_constant: self.cost.terminal_constant,
        }
    }

    fn problem_spec(&self) -> Result<ProblemSpec, CliError> {
        Ok(ProblemSpec {
            n: self.horizon.n,
            x_init: Vector::from_vec(self.initial_state.clone()),
            rho_min: self.control.rho_min,
            rho_max: self.control.rho_max,
            g: self.control.g_kind,
            cost: self.cost_spec(),
            boundary: self.boundary_map()?,
        })
    }

    /// The discrete relaxed problem on the full horizon.
    pub fn problem(&self) -> Result<DiscreteProblem, CliError> {
        let spec = self.problem_spec()?;
        match &self.plant {
            PlantSpec::Continuous { .. } => {
                let plant = self.plant()?.expect("continuous plant");
                Ok(DiscreteProblem::from_plant(&plant, self.horizon.t_f.unwrap(), spec)?)
            }
            PlantSpec::Discrete { a, b, drift } => {
                let a = matrix(a, "plant.a")?;
                let drift = Vector::from_vec(drift.clone().unwrap_or_else(|| vec![0.0; a.nrows()]));
                let mut p = DiscreteProblem::new(a, matrix(b, "plant.b")?, drift, spec)?;
                if let Some(t_f) = self.horizon.t_f {
                    p.dt = t_f / p.n as f64;
                }
                Ok(p)
            }
        }
    }

    /// Two-phase data; needs a continuous plant and `long_horizon.u_s`.
    pub fn two_phase(&self) -> Result<TwoPhaseSetup, CliError> {
        let plant = self
            .plant()?
            .ok_or_else(|| CliError::Scenario("the two-phase search needs a continuous plant".into()))?;
        let u_s = self
            .long_horizon
            .u_s
            .clone()
            .ok_or_else(|| CliError::Scenario("long_horizon.u_s is required for the two-phase search".into()))?;
        let spec = self.problem_spec()?;
        Ok(TwoPhaseSetup {
            plant,
            t_f: self.horizon.t_f.unwrap(),
            n: spec.n,
            x_s: spec.x_init,
            u_s: Vector::from_vec(u_s),
            rho_min: spec.rho_min,
            rho_max: spec.rho_max,
            g: spec.g,
            cost: spec.cost,
            boundary: spec.boundary,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for name in ["example1", "example2", "example3"] {
            let s = parse_scenario(bundled(name).unwrap()).unwrap();
            assert!(s.problem().is_ok(), "{name}");
        }
        assert!(bundled("example4").is_none());
    }

    #[test]
    fn moon_landing_values() {
        let s = parse_scenario(MOON_LANDING_60S).unwrap();
        assert_eq!(s.horizon.n, 10);
        assert_eq!(s.horizon.t_f, Some(60.0));
        assert!((s.control.rho_min - 0.3 * 7.5).abs() < 1e-15);
        assert!((s.control.rho_max - 0.8 * 7.5).abs() < 1e-15);
        assert_eq!(s.initial_state, vec![0.0, 0.0, 5000.0, 0.0, 3.0, -50.0]);
        assert_eq!(s.boundary.fixed_final_state, Some(vec![0.0, 0.0, 100.0, 0.0, 0.0, -5.0]));
        let p = s.problem().unwrap();
        assert_eq!(p.drift.len(), 6);
        assert!(p.plant.is_some());
    }

    #[test]
    fn artificial_values() {
        let s = parse_scenario(ARTIFICIAL_N3).unwrap();
        let p = s.problem().unwrap();
        assert_eq!(p.a, Matrix::from_diagonal(&Vector::from_vec(vec![1.2, -2.2, 1.0])));
        assert_eq!(p.b.as_slice(), &[0.4, 0.3, 0.2]);
        assert_eq!(p.g, MagnitudeFn::Norm2Sq);
        assert_eq!(p.boundary.g_matrix.nrows(), 2);
        assert_eq!(p.cost.terminal_linear.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn field_errors() {
        let mut v: serde_json::Value = serde_json::from_str(MOON_LANDING_60S).unwrap();
        v["control"].as_object_mut().unwrap().remove("rho_min");
        let err = parse_scenario(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("rho_min"), "{err}");

        let mut v: serde_json::Value = serde_json::from_str(MOON_LANDING_60S).unwrap();
        v["colour"] = serde_json::json!(1);
        assert!(parse_scenario(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::from_str(MOON_LANDING_60S).unwrap();
        v["initial_state"] = serde_json::json!([0.0, 1.0]);
        assert!(matches!(parse_scenario(&v.to_string()), Err(CliError::Scenario(_))));

        let mut v: serde_json::Value = serde_json::from_str(MOON_LANDING_60S).unwrap();
        v["control"]["rho_min"] = serde_json::json!(-1.0);
        assert!(parse_scenario(&v.to_string()).is_err());
    }

    #[test]
    fn defaults_apply() {
        let s = parse_scenario(MOON_LANDING_60S).unwrap();
        assert_eq!(s.analysis.tol_v, 1e-6);
        assert_eq!(s.perturbation.epsilon, 1e-7);
        assert_eq!(s.perturbation.seed, 0);
        assert_eq!(s.long_horizon.eps_t, 1e-2);
    }
}

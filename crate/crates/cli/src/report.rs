//! Run reports and the files written from them.

use std::fs;
use std::path::Path;

use lcvx::analysis::{CaseLabel, NodeStatus, SolverStats};
use lcvx::longhorizon::{BisectionTrace, PostBisectionReport};
use lcvx::perturb::PerturbationReport;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Ok,
    ScenarioError,
    SolverFailure,
    AssumptionFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::ScenarioError => 2,
            RunStatus::SolverFailure => 3,
            RunStatus::AssumptionFailure => 4,
        }
    }

    pub fn from_error(e: &CliError) -> Self {
        match e.exit_code() {
            3 => RunStatus::SolverFailure,
            4 => RunStatus::AssumptionFailure,
            _ => RunStatus::ScenarioError,
        }
    }
}

/// Which path of the pipeline produced the final solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Branch {
    Normal,
    NormalPerturbed,
    LongHorizon,
    LongHorizonPerturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    /// 1-based node index.
    pub node: usize,
    pub g_value: f64,
    pub sigma: f64,
    pub status: NodeStatus,
    pub dual_gate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualChainSummary {
    pub max_residual: f64,
    pub eta_n_norm: f64,
    /// 1-based nodes with a numerically closed gate.
    pub closed_gates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSummary {
    /// 1-based nodes that were rescaled.
    pub corrected_nodes: Vec<usize>,
    pub min_corrected_g: f64,
    pub deviation: f64,
    /// Absent for natively discrete plants.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub epsilon: f64,
    pub seed: u64,
    /// True when `q` came from the scenario rather than a random draw.
    pub fixed_q: bool,
    pub report: PerturbationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Times of `x_1, …, x_{N+1}`.
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub u_corrected: Vec<Vec<f64>>,
    pub rho_min: f64,
    pub rho_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub status: RunStatus,
    pub message: Option<String>,
    pub n_x: usize,
    pub n_u: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub branch: Option<Branch>,
    /// Label of the full-horizon relaxed problem.
    pub initial_classification: Option<CaseLabel>,
    /// Label of the problem whose solution is reported.
    pub classification: Option<CaseLabel>,
    pub objective: Option<f64>,
    pub nodes: Vec<NodeRow>,
    pub violation_count: usize,
    pub bound: usize,
    /// Violations before any perturbation.
    pub initial_violation_count: Option<usize>,
    /// `‖G x_{N+1} − g‖` with the reported controls run through the true dynamics.
    pub boundary_residual: Option<f64>,
    pub dual_chain: Option<DualChainSummary>,
    /// Rank of `S` over the violating nodes.
    pub s_rank: Option<usize>,
    pub correction: Option<CorrectionSummary>,
    pub bisection: Option<BisectionTrace>,
    pub post_bisection: Option<PostBisectionReport>,
    pub perturbation: Option<PerturbationRecord>,
    pub solver: Option<SolverStats>,
    pub trajectory: Option<Trajectory>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn empty(scenario: &str) -> Self {
        RunReport {
            scenario: scenario.to_string(),
            status: RunStatus::Ok,
            message: None,
            n_x: 0,
            n_u: 0,
            n: 0,
            branch: None,
            initial_classification: None,
            classification: None,
            objective: None,
            nodes: Vec::new(),
            violation_count: 0,
            bound: 0,
            initial_violation_count: None,
            boundary_residual: None,
            dual_chain: None,
            s_rank: None,
            correction: None,
            bisection: None,
            post_bisection: None,
            perturbation: None,
            solver: None,
            trajectory: None,
            warnings: Vec::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!("scenario {}: {:?}", self.scenario, self.status);
        if let Some(m) = &self.message {
            s += &format!(" ({m})");
        }
        if let Some(b) = self.branch {
            s += &format!("\n  branch: {b:?}");
        }
        if let Some(c) = &self.initial_classification {
            s += &format!("\n  full-horizon case: {:?}", c.kind);
        }
        if let Some(t) = &self.bisection {
            s += &format!("\n  switching time: {:.4} s after {} solves", t.t_s_star, t.solves);
        }
        if let Some(o) = self.objective {
            s += &format!("\n  objective: {o:.6}");
        }
        if let Some(v) = self.initial_violation_count {
            s += &format!("\n  violating nodes before perturbation: {v}");
        }
        s += &format!("\n  violating nodes: {} (bound {})", self.violation_count, self.bound);
        if let Some(r) = self.boundary_residual {
            s += &format!("\n  boundary residual: {r:.3e}");
        }
        if let Some(c) = &self.correction {
            match c.bound {
                Some(b) => s += &format!("\n  correction deviation: {:.3e} (bound {b:.3e})", c.deviation),
                None => s += &format!("\n  correction deviation: {:.3e}", c.deviation),
            }
        }
        for w in &self.warnings {
            s += &format!("\n  warning: {w}");
        }
        s
    }
}

fn status_name(s: NodeStatus) -> &'static str {
    match s {
        NodeStatus::Valid => "VALID",
        NodeStatus::Violating => "VIOLATING",
        NodeStatus::UpperViolating => "UPPER_VIOLATING",
    }
}

fn join(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

/// Writes `report.json`, `trajectory.csv` and `plotdata.csv` into `dir`.
pub fn emit_outputs(report: &RunReport, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    let Some(tr) = &report.trajectory else {
        return Ok(());
    };
    let n_x = tr.x.first().map_or(0, Vec::len);
    let n_u = tr.u.first().map_or(0, Vec::len);

    let mut w = csv::Writer::from_path(dir.join("trajectory.csv"))?;
    let mut header = vec!["node".to_string(), "t".to_string()];
    header.extend((1..=n_x).map(|k| format!("x{k}")));
    header.extend((1..=n_u).map(|k| format!("u{k}")));
    header.extend(["sigma", "g_u", "validity"].map(String::from));
    w.write_record(&header)?;
    for (i, (t, x)) in tr.t.iter().zip(&tr.x).enumerate() {
        let mut row = vec![(i + 1).to_string(), t.to_string()];
        row.extend(join(x));
        match (tr.u.get(i), report.nodes.get(i)) {
            (Some(u), Some(node)) => {
                row.extend(join(u));
                row.push(node.sigma.to_string());
                row.push(node.g_value.to_string());
                row.push(status_name(node.status).to_string());
            }
            _ => row.extend(std::iter::repeat(String::new()).take(n_u + 3)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("plotdata.csv"))?;
    w.write_record(["node", "t", "control_norm", "g_u", "sigma", "rho_min", "rho_max", "corrected_norm"])?;
    for (i, u) in tr.u.iter().enumerate() {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let corrected = tr.u_corrected.get(i).map_or(norm, |c| c.iter().map(|v| v * v).sum::<f64>().sqrt());
        let g = report.nodes.get(i).map_or(f64::NAN, |n| n.g_value);
        w.write_record([
            (i + 1).to_string(),
            tr.t[i].to_string(),
            norm.to_string(),
            g.to_string(),
            tr.sigma[i].to_string(),
            tr.rho_min.to_string(),
            tr.rho_max.to_string(),
            corrected.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

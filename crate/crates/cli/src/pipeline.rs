//! End-to-end run: solve the relaxation, classify it, search for a switching
//! time when the horizon is too long, perturb when there are too many
//! violating nodes, and correct the remaining ones.

use lcvx::analysis::{self, CaseKind, LcvxSolution};
use lcvx::linalg::Vector;
use lcvx::longhorizon::{self, BisectionOptions};
use lcvx::model::DiscreteProblem;
use lcvx::perturb::{self, PerturbationMode, PerturbationSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::report::{
    Branch, CorrectionSummary, DualChainSummary, NodeRow, PerturbationRecord, RunReport, RunStatus, Trajectory,
};
use crate::scenario::Scenario;

/// Command-line values that replace scenario fields.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub eps_q: Option<f64>,
    pub eps_t: Option<f64>,
    pub tol_v: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(v) = self.seed {
            s.perturbation.seed = v;
        }
        if let Some(v) = self.eps_q {
            s.perturbation.epsilon = v;
        }
        if let Some(v) = self.eps_t {
            s.long_horizon.eps_t = v;
        }
        if let Some(v) = self.tol_v {
            s.analysis.tol_v = v;
        }
    }
}

/// Runs the full pipeline. Failures are recorded in the returned report
/// together with whatever was computed before them.
pub fn run_pipeline(s: &Scenario) -> RunReport {
    let mut report = RunReport::empty(&s.name);
    if let Err(e) = run(s, &mut report) {
        report.status = RunStatus::from_error(&e);
        report.message = Some(e.to_string());
    }
    report
}

/// Perturbation draw for `a`: the scenario's fixed `q`, or a seeded sample.
fn draw_q(s: &Scenario, problem: &DiscreteProblem) -> Result<(Vec<f64>, bool), CliError> {
    if let Some(q) = &s.perturbation.q {
        return Ok((q.clone(), true));
    }
    let spec = PerturbationSpec { epsilon: s.perturbation.epsilon, seed: s.perturbation.seed, mode: PerturbationMode::Eigen };
    spec.check(s.solver.tol_p)?;
    let d = perturb::shift_count(&problem.a)?;
    Ok((perturb::sample_q(&spec, d), false))
}

fn run(s: &Scenario, report: &mut RunReport) -> Result<(), CliError> {
    let settings = &s.solver;
    let tol_v = s.analysis.tol_v;
    let tol_c = s.analysis.tol_c;
    let full = s.problem()?;
    report.n_x = full.n_x();
    report.n_u = full.n_u();
    report.n = full.n;

    let sol0 = analysis::solve_relaxed(&full, settings)?;
    let label0 = analysis::classify_case(&sol0, &full, tol_c);
    report.initial_classification = Some(label0);

    let (problem, mut sol, long) = if label0.kind == CaseKind::LongHorizon {
        let setup = s.two_phase()?;
        let opts = BisectionOptions {
            eps_t: s.long_horizon.eps_t,
            early_stop: s.long_horizon.early_stop,
            tol_c,
            ..BisectionOptions::default()
        };
        let trace = longhorizon::bisection_search(&setup, settings, &opts)?;
        let (post, problem, sol) = longhorizon::post_bisection_quality(&setup, &trace, None, settings, tol_v)?;
        report.bisection = Some(trace);
        report.post_bisection = Some(post);
        (problem, sol, true)
    } else {
        (full, sol0, false)
    };

    let initial = analysis::check_validity(&sol, &problem, tol_v);
    report.initial_violation_count = Some(initial.violation_count);
    let mut perturbed = false;
    if initial.violation_count > initial.bound {
        let (q, fixed_q) = draw_q(s, &problem)?;
        let pd = perturb::perturb_dynamics(&problem.a, &q, None)?;
        let sol_p = if long {
            let setup = s.two_phase()?;
            let trace = report.bisection.as_ref().expect("trace recorded");
            let (post, _, sol_p) =
                longhorizon::post_bisection_quality(&setup, trace, Some(&pd.a_tilde), settings, tol_v)?;
            report.post_bisection = Some(post);
            sol_p
        } else {
            analysis::solve_perturbed(&problem, &pd.a_tilde, settings)?
        };
        let pr = perturb::perturbation_report(&problem, &sol, &sol_p, &q, tol_v)?;
        report.perturbation = Some(PerturbationRecord {
            epsilon: s.perturbation.epsilon,
            seed: s.perturbation.seed,
            fixed_q,
            report: pr,
        });
        sol = sol_p;
        perturbed = true;
    }
    report.branch = Some(match (long, perturbed) {
        (false, false) => Branch::Normal,
        (false, true) => Branch::NormalPerturbed,
        (true, false) => Branch::LongHorizon,
        (true, true) => Branch::LongHorizonPerturbed,
    });
    describe(s, &problem, &sol, report)
}

/// Fills the per-node table, diagnostics, correction and trajectory.
fn describe(s: &Scenario, problem: &DiscreteProblem, sol: &LcvxSolution, report: &mut RunReport) -> Result<(), CliError> {
    let tol_v = s.analysis.tol_v;
    let label = analysis::classify_case(sol, problem, s.analysis.tol_c);
    let validity = analysis::check_validity(sol, problem, tol_v);
    report.classification = Some(label);
    report.objective = Some(sol.objective);
    report.solver = Some(sol.stats);
    report.violation_count = validity.violation_count;
    report.bound = validity.bound;
    report.nodes = validity
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| NodeRow { node: i + 1, g_value: n.g_value, sigma: n.sigma, status: n.status, dual_gate: n.dual_gate })
        .collect();

    let chain = analysis::dual_chain_check(sol, &sol.a_used, &problem.b, 1e-6);
    report.dual_chain = Some(DualChainSummary {
        max_residual: chain.max_residual,
        eta_n_norm: chain.eta_n_norm,
        closed_gates: chain.closed_gates.iter().map(|i| i + 1).collect(),
    });
    let violating: Vec<usize> = validity.violating_nodes().iter().map(|i| i + 1).collect();
    if !violating.is_empty() && label.kind == CaseKind::Normal {
        report.s_rank = Some(analysis::s_matrix_rank(&sol.a_used, &problem.b, &violating, problem.n)?);
    }

    let states = problem.propagate(&sol.u)?;
    report.boundary_residual = Some(problem.boundary.residual(states.last().unwrap()));

    let (u_hat, corrected, deviation, bound) = if problem.plant.is_some() {
        let c = analysis::correct_controls(sol, problem, tol_v)?;
        report.warnings.extend(c.warnings);
        (c.u_hat, c.corrected_nodes, c.deviation, Some(c.bound))
    } else {
        let c = analysis::apply_correction(&sol.u, problem.g, problem.rho_min, tol_v);
        report.warnings.extend(c.warnings);
        let x_hat = problem.propagate(&c.u_hat)?;
        let dev = (x_hat.last().unwrap() - states.last().unwrap()).norm();
        (c.u_hat, c.corrected_nodes, dev, None)
    };
    let min_corrected_g = u_hat.iter().map(|u| problem.g.eval(u.as_slice())).fold(f64::INFINITY, f64::min);
    report.correction = Some(CorrectionSummary {
        corrected_nodes: corrected.iter().map(|i| i + 1).collect(),
        min_corrected_g,
        deviation,
        bound,
    });

    let t0 = report.bisection.as_ref().map_or(0.0, |b| b.t_s_star);
    let rows = |v: &[Vector]| v.iter().map(|x| x.as_slice().to_vec()).collect::<Vec<_>>();
    report.trajectory = Some(Trajectory {
        t: (0..=problem.n).map(|i| t0 + i as f64 * problem.dt).collect(),
        x: rows(&sol.x),
        u: rows(&sol.u),
        sigma: sol.sigma.clone(),
        u_corrected: rows(&u_hat),
        rho_min: problem.rho_min,
        rho_max: problem.rho_max,
    });
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub status: RunStatus,
    pub violation_count: usize,
    pub deviation: Option<f64>,
    pub bound: Option<f64>,
    pub objective: Option<f64>,
    pub classification: Option<CaseKind>,
}

/// Runs the scenario once per horizon length, in parallel, with per-run
/// seeds derived from the scenario seed.
pub fn sweep_n(s: &Scenario, ns: &[usize]) -> Vec<(SweepRow, RunReport)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = ns
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let mut sk = s.clone();
                sk.horizon.n = n;
                sk.perturbation.seed = perturb::trial_seed(s.perturbation.seed, k as u64);
                scope.spawn(move || {
                    let r = run_pipeline(&sk);
                    let row = SweepRow {
                        n,
                        status: r.status,
                        violation_count: r.violation_count,
                        deviation: r.correction.as_ref().map(|c| c.deviation),
                        bound: r.correction.as_ref().and_then(|c| c.bound),
                        objective: r.objective,
                        classification: r.classification.map(|c| c.kind),
                    };
                    (row, r)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}

//! The three worked examples built directly through the library.

mod common;

use common::{artificial, high_precision, lander_problem, lander_two_phase};
use lcvx::analysis::{self, CaseKind, TOL_CASE, TOL_VALIDITY};
use lcvx::longhorizon::{self, BisectionOptions, StepOutcome};
use lcvx::perturb;

#[test]
fn lander_60s_is_normal_with_few_violations() {
    let p = lander_problem(60.0, 10);
    let sol = analysis::solve_relaxed(&p, &high_precision()).unwrap();
    assert_eq!(analysis::classify_case(&sol, &p, TOL_CASE).kind, CaseKind::Normal);
    let v = analysis::check_validity(&sol, &p, TOL_VALIDITY);
    assert!(v.within_bound(), "{} violating nodes", v.violation_count);
    let x_end = p.propagate(&sol.u).unwrap();
    assert!(p.boundary.residual(x_end.last().unwrap()) <= 1e-6 * p.boundary.g_vector.norm());

    let chain = analysis::dual_chain_check(&sol, &p.a, &p.b, 1e-6);
    assert!(chain.chain_holds, "chain residual {}", chain.max_residual);
    assert!(chain.eta_n_norm > 0.0);

    let c = analysis::correct_controls(&sol, &p, TOL_VALIDITY).unwrap();
    assert_eq!(c.corrected_nodes, v.violating_nodes());
    assert!(c.deviation <= c.bound);
    for (i, u) in c.u_hat.iter().enumerate() {
        assert!(u.norm() >= p.rho_min - 1e-12, "node {i}");
    }
    // Valid nodes keep their controls.
    for (i, node) in v.nodes.iter().enumerate() {
        if node.status == analysis::NodeStatus::Valid {
            assert_eq!(c.u_hat[i], sol.u[i]);
        }
    }
}

#[test]
fn artificial_example_needs_the_perturbation() {
    let p = artificial();
    let settings = high_precision();
    let sol = analysis::solve_relaxed(&p, &settings).unwrap();
    let before = analysis::check_validity(&sol, &p, TOL_VALIDITY);
    assert!(before.violation_count >= 3, "{} violating nodes", before.violation_count);
    assert_eq!(analysis::classify_case(&sol, &p, TOL_CASE).kind, CaseKind::Normal);
    let nodes: Vec<usize> = before.violating_nodes().iter().map(|i| i + 1).collect();
    assert!(analysis::s_matrix_rank(&p.a, &p.b, &nodes, p.n).unwrap() < p.n_x());

    let q = [1e-7, 0.0, 0.0];
    let pd = perturb::perturb_dynamics(&p.a, &q, None).unwrap();
    // The largest eigenvalue takes the shift.
    assert!((pd.a_tilde[(0, 0)] - (1.2 + 1e-7)).abs() < 1e-15);
    let sol_p = analysis::solve_perturbed(&p, &pd.a_tilde, &settings).unwrap();
    let report = perturb::perturbation_report(&p, &sol, &sol_p, &q, TOL_VALIDITY).unwrap();
    assert_eq!(report.violations_before, before.violation_count);
    assert!(report.violations_after <= 2);
    assert!(report.boundary_residual <= 1e-4);
    assert!(report.cost_delta.abs() <= 1e-4);
}

#[test]
fn lander_200s_switches_near_ninety_eight_seconds() {
    let setup = lander_two_phase(200.0, 20);
    let settings = high_precision();
    let full = lander_problem(200.0, 20);
    let sol = analysis::solve_relaxed(&full, &settings).unwrap();
    assert_eq!(analysis::classify_case(&sol, &full, TOL_CASE).kind, CaseKind::LongHorizon);

    let opts = BisectionOptions { eps_t: 1e-2, ..Default::default() };
    let trace = longhorizon::bisection_search(&setup, &settings, &opts).unwrap();
    assert!((90.0..=110.0).contains(&trace.t_s_star), "t_s* = {}", trace.t_s_star);
    assert_eq!(trace.certificate.kind, CaseKind::Normal);
    assert!(trace.solves <= 25);
    // Every bracket keeps a long-horizon left end and shrinks.
    for w in trace.iterations.windows(2) {
        assert!(w[1].t_high - w[1].t_low <= 0.5 * (w[0].t_high - w[0].t_low) + 1e-12);
    }
    let last_long = trace
        .iterations
        .iter()
        .filter(|s| s.outcome == StepOutcome::LongHorizon)
        .map(|s| s.t_mid)
        .fold(0.0, f64::max);
    assert!(trace.t_s_star - last_long <= 2.0 * opts.eps_t);

    let (post, _, _) = longhorizon::post_bisection_quality(&setup, &trace, None, &settings, TOL_VALIDITY).unwrap();
    assert!(post.max_excess <= 1e-2 * setup.rho_min);
    assert!(post.violation_count <= post.bound);
    assert!(post.boundary_residual <= 1e-6 * setup.boundary.g_vector.norm());
}

#[test]
fn lander_value_function_is_continuous_in_the_switching_time() {
    let setup = lander_two_phase(200.0, 20);
    let settings = high_precision();
    let dt = 0.05;
    for t in [20.0, 60.0, 90.0, 97.0, 99.0, 120.0] {
        let a = longhorizon::value_function(&setup, t, &settings, TOL_CASE).unwrap();
        let b = longhorizon::value_function(&setup, t + dt, &settings, TOL_CASE).unwrap();
        // Shifting the switch by dt moves at most dt of flight between the
        // floor thrust and the upper thrust bound.
        let lip = setup.cost.running * setup.rho_max * 4.0;
        assert!((b.v - a.v).abs() <= lip * dt, "t = {t}: {} -> {}", a.v, b.v);
    }
}

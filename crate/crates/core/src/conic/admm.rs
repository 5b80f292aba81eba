//! Operator-splitting backend on the homogeneous self-dual embedding.
//!
//! Douglas-Rachford splitting of `0 ∈ M u + N_C(u)` with
//! `M = [[0, Aᵀ, c], [−A, 0, b], [−cᵀ, −bᵀ, 0]]`, `u = (x, y, τ)` and
//! `C = ℝⁿ × K* × ℝ₊`, where `A = [E; G]` and `b = [f; h]`. The iteration runs
//! in the metric `R = diag(ρ_x I, R_y, 1)`; the cone part of `R_y` is adapted
//! to balance primal and dual progress. Linear solves use a dense Cholesky
//! factor of `ρ_x I + Aᵀ R_y⁻¹ A`, so this backend is meant for cross-checking
//! small and medium programs, not for speed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::cones::{ConeSet, InnerCone};
use super::prep::{self, Equilibration};
use super::{ConeProgram, ConeSolution, SolveStatus, SolverSettings};

const RELAXATION: f64 = 1.5;
const CHECK_EVERY: usize = 10;
/// Splitting iterations are cheap; the iteration budget is this multiple of `max_iter`.
pub(crate) const ITERATION_MULTIPLIER: usize = 500;
const RHO_X: f64 = 1e-6;
/// Equality rows get this much more weight than cone rows.
const EQUALITY_WEIGHT: f64 = 1e3;
const SCALE_INIT: f64 = 0.1;
const SCALE_MIN: f64 = 1e-6;
const SCALE_MAX: f64 = 1e6;
const ADAPT_EVERY: usize = 100;
/// Rescale only when primal and dual progress differ by more than this factor.
const ADAPT_TRIGGER: f64 = 3.0;

fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let nw = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nw <= t {
        return;
    }
    if nw <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let a = 0.5 * (t + nw);
    v[0] = a;
    for x in v[1..].iter_mut() {
        *x *= a / nw;
    }
}

fn project(cones: &ConeSet, v: &mut [f64]) {
    for &(c, o) in &cones.blocks {
        match c {
            InnerCone::Nonneg(k) => v[o..o + k].iter_mut().for_each(|x| *x = x.max(0.0)),
            InnerCone::Soc(k) => project_soc(&mut v[o..o + k]),
        }
    }
}

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn dotf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The metric on `y` and the factorization that goes with it.
struct Metric {
    ry: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    hx: DVector<f64>,
    hy: DVector<f64>,
    denom: f64,
}

impl Metric {
    fn new(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, p: usize, scale: f64) -> Self {
        let mm = a.nrows();
        let ry = DVector::from_fn(mm, |i, _| if i < p { 1.0 / (EQUALITY_WEIGHT * scale) } else { 1.0 / scale });
        let scaled = DMatrix::from_fn(mm, a.ncols(), |i, j| a[(i, j)] / ry[i]);
        let mut k = a.transpose() * scaled;
        for i in 0..k.nrows() {
            k[(i, i)] += RHO_X;
        }
        let chol = k.cholesky().expect("ρ_x I + Aᵀ R⁻¹ A is positive definite");
        let mut m = Metric { ry, chol, hx: DVector::zeros(0), hy: DVector::zeros(0), denom: 1.0 };
        let (hx, hy) = m.solve_xy(a, c, b);
        m.denom = 1.0 + c.dot(&hx) + b.dot(&hy);
        m.hx = hx;
        m.hy = hy;
        m
    }

    /// Solves `[[ρ_x I, Aᵀ], [−A, R_y]] (x, y) = (r, t)`.
    fn solve_xy(&self, a: &DMatrix<f64>, r: &DVector<f64>, t: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let t_over = t.component_div(&self.ry);
        let x = self.chol.solve(&(r - a.tr_mul(&t_over)));
        let y = (t + a * &x).component_div(&self.ry);
        (x, y)
    }

    /// `ũ = (R + M)⁻¹ R w`.
    fn resolvent(
        &self,
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        c: &DVector<f64>,
        w: &(DVector<f64>, DVector<f64>, f64),
    ) -> (DVector<f64>, DVector<f64>, f64) {
        let rx = &w.0 * RHO_X;
        let ry = w.1.component_mul(&self.ry);
        let (x0, y0) = self.solve_xy(a, &rx, &ry);
        let tau = (w.2 + c.dot(&x0) + b.dot(&y0)) / self.denom;
        (x0 - &self.hx * tau, y0 - &self.hy * tau, tau)
    }
}

pub(crate) fn solve(program: &ConeProgram, settings: &SolverSettings) -> ConeSolution {
    let orig = prep::map_program(program);
    let (q, eq) = if settings.equilibrate {
        prep::equilibrate(&orig)
    } else {
        (orig.clone(), Equilibration::identity(&orig))
    };
    let n = q.c.len();
    let p = q.f.len();
    let m = q.h.len();
    let mm = p + m;

    let mut a = DMatrix::<f64>::zeros(mm, n);
    for (i, j, v) in q.e.iter() {
        a[(i, j)] += v;
    }
    for (i, j, v) in q.g.iter() {
        a[(p + i, j)] += v;
    }
    let mut bvec = q.f.clone();
    bvec.extend_from_slice(&q.h);
    // The right-hand side is brought to unit size as well; x and s scale with it.
    let bnorm = inf(&bvec);
    let beta = if bnorm > 0.0 { (1.0 / bnorm).log2().round().exp2() } else { 1.0 };
    bvec.iter_mut().for_each(|v| *v *= beta);
    let b = DVector::from_vec(bvec);
    let c = DVector::from_vec(q.c.clone());

    let mut scale = SCALE_INIT;
    let mut metric = Metric::new(&a, &b, &c, p, scale);
    let mut w = (DVector::<f64>::zeros(n), DVector::<f64>::zeros(mm), 1.0f64);
    // Geometric means of the relative residuals since the last rescale.
    let (mut log_pri, mut log_dual, mut samples) = (0.0f64, 0.0f64, 0usize);

    let (of, oh, oc) = (&orig.f, &orig.h, &orig.c);
    let pscale = 1.0 + inf(of).max(inf(oh));
    let dscale = 1.0 + inf(oc);
    let max_iter = settings.max_iter.saturating_mul(ITERATION_MULTIPLIER);

    let unscale = |x: &DVector<f64>, y: &DVector<f64>, s: &DVector<f64>, k: f64| {
        let xs: Vec<f64> = (0..n).map(|j| x[j] * eq.d[j] / (beta * k)).collect();
        let ye: Vec<f64> = (0..p).map(|i| y[i] * eq.ea[i] / (eq.cost * k)).collect();
        let zg: Vec<f64> = (0..m).map(|i| y[p + i] * eq.eg[i] / (eq.cost * k)).collect();
        let sg: Vec<f64> = (0..m).map(|i| s[p + i] / (eq.eg[i] * beta * k)).collect();
        (xs, ye, zg, sg)
    };

    let mut best: Option<(f64, ConeSolution)> = None;
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIter;
    while iterations < max_iter {
        iterations += 1;
        let ut = metric.resolvent(&a, &b, &c, &w);
        // Reflect through ũ, then project onto C.
        let refl = (&ut.0 * 2.0 - &w.0, &ut.1 * 2.0 - &w.1, 2.0 * ut.2 - w.2);
        let mut un = refl.clone();
        project(&q.cones, &mut un.1.as_mut_slice()[p..]);
        un.2 = un.2.max(0.0);
        // v = R (u + w − 2ũ) lies in C* and is complementary to u.
        let v_y = (&un.1 - &refl.1).component_mul(&metric.ry);
        w.0 += (&un.0 - &ut.0) * RELAXATION;
        w.1 += (&un.1 - &ut.1) * RELAXATION;
        w.2 += (un.2 - ut.2) * RELAXATION;
        let u = un;

        if iterations % CHECK_EVERY != 0 && iterations < max_iter {
            continue;
        }
        // Relative residuals of the scaled embedding drive the metric.
        {
            let ax = &a * &u.0;
            let rp = &ax + &v_y - &b * u.2;
            let aty = a.tr_mul(&u.1);
            let rd = &aty + &c * u.2;
            let pri = inf(rp.as_slice()) / inf(ax.as_slice()).max(inf(v_y.as_slice())).max(inf(b.as_slice()) * u.2).max(1e-300);
            let dual = inf(rd.as_slice()) / inf(aty.as_slice()).max(inf(c.as_slice()) * u.2).max(1e-300);
            if pri > 0.0 && dual > 0.0 && pri.is_finite() && dual.is_finite() {
                log_pri += pri.ln();
                log_dual += dual.ln();
                samples += 1;
            }
            if iterations % ADAPT_EVERY == 0 && samples > 0 {
                let factor = ((log_pri - log_dual) / samples as f64 * 0.5).exp();
                if !(1.0 / ADAPT_TRIGGER..=ADAPT_TRIGGER).contains(&factor) {
                    let new_scale = (scale * factor).clamp(SCALE_MIN, SCALE_MAX);
                    if new_scale != scale {
                        scale = new_scale;
                        metric = Metric::new(&a, &b, &c, p, scale);
                        // Keep the current (u, v) pair: w = u + R⁻¹ v.
                        w = (u.0.clone(), &u.1 + v_y.component_div(&metric.ry), u.2);
                    }
                }
                log_pri = 0.0;
                log_dual = 0.0;
                samples = 0;
            }
        }
        // Solution estimate.
        if u.2 > 0.0 {
            let (x, y, z, s) = unscale(&u.0, &u.1, &v_y, u.2);
            let mut rpe: Vec<f64> = orig.e.mul_vec(&x);
            rpe.iter_mut().zip(of).for_each(|(r, f)| *r -= f);
            let mut rpi: Vec<f64> = orig.g.mul_vec(&x);
            rpi.iter_mut().zip(&s).zip(oh).for_each(|((r, s), h)| *r += s - h);
            let mut rd = oc.clone();
            orig.e.gemv_t(1.0, &y, &mut rd);
            orig.g.gemv_t(1.0, &z, &mut rd);
            let pobj = dotf(oc, &x);
            let dobj = -(dotf(of, &y) + dotf(oh, &z));
            let pres = inf(&rpe).max(inf(&rpi)) / pscale;
            let dres = inf(&rd) / dscale;
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs().min(dobj.abs()));
            let score = (pres / settings.tol_p).max(dres / settings.tol_d).max(gap / settings.tol_g);
            if score.is_finite() && best.as_ref().is_none_or(|(bs, _)| score < *bs) {
                best = Some((
                    score,
                    ConeSolution {
                        status: SolveStatus::MaxIter,
                        z: x,
                        slacks: s,
                        equality_duals: y,
                        cone_duals: z,
                        primal_residual: pres,
                        dual_residual: dres,
                        gap,
                        objective: pobj + program.c0,
                        dual_objective: dobj + program.c0,
                        iterations,
                    },
                ));
            }
            if score <= 1.0 {
                status = SolveStatus::Optimal;
                break;
            }
        }
        // Certificates from the unnormalized iterate.
        let (x, y, z, s) = unscale(&u.0, &u.1, &v_y, 1.0);
        let by = dotf(of, &y) + dotf(oh, &z);
        if by < 0.0 {
            let mut r = vec![0.0; n];
            orig.e.gemv_t(1.0, &y, &mut r);
            orig.g.gemv_t(1.0, &z, &mut r);
            if inf(&r) <= settings.tol_inf * -by {
                let k = -by;
                return ConeSolution {
                    status: SolveStatus::PrimalInfeasible,
                    z: vec![0.0; n],
                    slacks: vec![0.0; m],
                    equality_duals: y.iter().map(|v| v / k).collect(),
                    cone_duals: {
                        let mut z: Vec<f64> = z.iter().map(|v| v / k).collect();
                        prep::dual_from_soc(&orig.rotated, &mut z);
                        z
                    },
                    primal_residual: f64::INFINITY,
                    dual_residual: inf(&r) / k,
                    gap: f64::NAN,
                    objective: f64::INFINITY,
                    dual_objective: f64::INFINITY,
                    iterations,
                };
            }
        }
        let cx = dotf(oc, &x);
        if cx < 0.0 {
            let r1 = orig.e.mul_vec(&x);
            let mut r2 = orig.g.mul_vec(&x);
            r2.iter_mut().zip(&s).for_each(|(r, s)| *r += s);
            let worst = inf(&r1).max(inf(&r2));
            if worst <= settings.tol_inf * -cx {
                let k = -cx;
                return ConeSolution {
                    status: SolveStatus::DualInfeasible,
                    z: x.iter().map(|v| v / k).collect(),
                    slacks: {
                        let mut s: Vec<f64> = s.iter().map(|v| v / k).collect();
                        prep::slack_from_soc(&orig.rotated, &mut s);
                        s
                    },
                    equality_duals: vec![0.0; p],
                    cone_duals: vec![0.0; m],
                    primal_residual: worst / k,
                    dual_residual: f64::INFINITY,
                    gap: f64::NAN,
                    objective: f64::NEG_INFINITY,
                    dual_objective: f64::NEG_INFINITY,
                    iterations,
                };
            }
        }
    }
    let mut sol = match best {
        Some((_, s)) => s,
        None => ConeSolution {
            status: SolveStatus::Numerical,
            z: vec![f64::NAN; n],
            slacks: vec![f64::NAN; m],
            equality_duals: vec![f64::NAN; p],
            cone_duals: vec![f64::NAN; m],
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            gap: f64::INFINITY,
            objective: f64::NAN,
            dual_objective: f64::NAN,
            iterations,
        },
    };
    if sol.status != SolveStatus::Numerical {
        sol.status = status;
    }
    sol.iterations = iterations;
    prep::slack_from_soc(&orig.rotated, &mut sol.slacks);
    prep::dual_from_soc(&orig.rotated, &mut sol.cone_duals);
    sol
}

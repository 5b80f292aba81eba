//! Primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! Iterates `(x, y, z, s, τ, κ)` for
//!
//! ```text
//! 0 = Aᵀy + Gᵀz + cτ      s = hτ − Gx
//! 0 = bτ − Ax             κ = −cᵀx − bᵀy − hᵀz
//! ```
//!
//! with Nesterov-Todd scaling and a Mehrotra predictor-corrector. Each Newton
//! step solves the quasi-definite system `[[0, Aᵀ, Gᵀ], [A, 0, 0], [G, 0, −W²]]`
//! twice (once for the `τ` column, once for the residual right-hand side).

use super::cones::{ConeSet, NtScaling};
use super::ldl::{EnvelopeLdl, EnvelopeSymbolic, PivotGuard};
use super::prep::{self, Equilibration, InnerProgram};
use super::real::{dot, norm_inf, Real};
use super::{ConeProgram, ConeSolution, SolveStatus, SolverSettings};

const STEP_FRACTION: f64 = 0.99;
const MAX_REFINE: usize = 12;
const STALL_LIMIT: usize = 5;

fn to_t<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::from_f64(x)).collect()
}

fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

/// Reduced KKT system and its factorization.
struct Kkt<T: Real> {
    n: usize,
    p: usize,
    m: usize,
    ldl: EnvelopeLdl<T>,
    fixed: Vec<(usize, usize, T)>,
    signs: Vec<i8>,
    delta: T,
    guard: PivotGuard<T>,
}

impl<T: Real> Kkt<T> {
    fn new(q: &InnerProgram, probe: &NtScaling<T>) -> Self {
        let n = q.c.len();
        let p = q.f.len();
        let m = q.h.len();
        let delta = T::epsilon().sqrt() * T::from_f64(0.1);
        let mut fixed = Vec::with_capacity(q.e.nnz() + q.g.nnz() + n + p);
        let mut pattern = Vec::with_capacity(q.e.nnz() + q.g.nnz() + 4 * m);
        for (i, j, v) in q.e.iter() {
            fixed.push((j, n + i, T::from_f64(v)));
            pattern.push((j, n + i));
        }
        for (i, j, v) in q.g.iter() {
            fixed.push((j, n + p + i, T::from_f64(v)));
            pattern.push((j, n + p + i));
        }
        for j in 0..n {
            fixed.push((j, j, delta));
        }
        for i in 0..p {
            fixed.push((n + i, n + i, -delta));
        }
        probe.for_each_w2(|i, j, _| {
            if i != j {
                pattern.push((n + p + i, n + p + j));
            }
        });
        let sym = EnvelopeSymbolic::new(n + p + m, &pattern);
        let mut signs = vec![1i8; n];
        signs.extend(std::iter::repeat_n(-1i8, p + m));
        let guard = PivotGuard {
            threshold: T::epsilon() * T::from_f64(1e3),
            value: T::epsilon().sqrt() * T::from_f64(10.0),
        };
        Kkt { n, p, m, ldl: EnvelopeLdl::new(sym), fixed, signs, delta, guard }
    }

    fn factor(&mut self, w: &NtScaling<T>) {
        let off = self.n + self.p;
        let mut entries = self.fixed.clone();
        let delta = self.delta;
        w.for_each_w2(|i, j, v| {
            let reg = if i == j { delta } else { T::zero() };
            entries.push((off + i, off + j, -v - reg));
        });
        let bumped = self.ldl.factor(&entries, &self.signs, self.guard);
        if bumped > 0 {
            log::trace!("regularized {bumped} pivots");
        }
    }

    /// `K v` for the unregularized matrix.
    fn apply(&self, q: &InnerProgram, w: &NtScaling<T>, v: &[T]) -> Vec<T> {
        let (n, p, m) = (self.n, self.p, self.m);
        let (vx, rest) = v.split_at(n);
        let (vy, vz) = rest.split_at(p);
        let mut out = vec![T::zero(); n + p + m];
        {
            let (ox, rest) = out.split_at_mut(n);
            let (oy, oz) = rest.split_at_mut(p);
            q.e.gemv_t(T::one(), vy, ox);
            q.g.gemv_t(T::one(), vz, ox);
            q.e.gemv(T::one(), vx, oy);
            let mut w2 = vec![T::zero(); m];
            w.apply_w2(vz, &mut w2);
            q.g.gemv(T::one(), vx, oz);
            for i in 0..m {
                oz[i] -= w2[i];
            }
        }
        out
    }

    fn solve(&self, q: &InnerProgram, w: &NtScaling<T>, rhs: &[T]) -> Vec<T> {
        let mut x = rhs.to_vec();
        self.ldl.solve(&mut x);
        let bnorm = norm_inf(rhs);
        let tol = T::epsilon() * T::from_f64(10.0) * (T::one() + bnorm);
        let mut best_res = T::from_f64(f64::INFINITY);
        for _ in 0..MAX_REFINE {
            let kx = self.apply(q, w, &x);
            let mut r: Vec<T> = rhs.iter().zip(&kx).map(|(a, b)| *a - *b).collect();
            let rn = norm_inf(&r);
            if !(rn < best_res) || rn <= tol {
                break;
            }
            best_res = rn;
            self.ldl.solve(&mut r);
            axpy(T::one(), &r, &mut x);
        }
        x
    }
}

#[derive(Debug, Clone)]
struct Iterate<T> {
    x: Vec<T>,
    y: Vec<T>,
    z: Vec<T>,
    s: Vec<T>,
    tau: T,
    kappa: T,
}

struct Direction<T> {
    x: Vec<T>,
    y: Vec<T>,
    z: Vec<T>,
    s: Vec<T>,
    tau: T,
    kappa: T,
}

/// Quantities of an iterate mapped back to the unscaled program.
#[derive(Debug, Clone)]
struct Measured {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    pres: f64,
    dres: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

struct Ipm<'a, T: Real> {
    orig: &'a InnerProgram,
    q: &'a InnerProgram,
    eq: &'a Equilibration,
    cones: ConeSet,
    settings: &'a SolverSettings,
    c: Vec<T>,
    b: Vec<T>,
    h: Vec<T>,
    oc: Vec<T>,
    of: Vec<T>,
    oh: Vec<T>,
}

impl<'a, T: Real> Ipm<'a, T> {
    fn new(orig: &'a InnerProgram, q: &'a InnerProgram, eq: &'a Equilibration, settings: &'a SolverSettings) -> Self {
        Ipm {
            orig,
            q,
            eq,
            cones: q.cones.clone(),
            settings,
            c: to_t(&q.c),
            b: to_t(&q.f),
            h: to_t(&q.h),
            oc: to_t(&orig.c),
            of: to_t(&orig.f),
            oh: to_t(&orig.h),
        }
    }

    /// Undo equilibration; `scale` divides everything (use `τ` for the
    /// solution estimate, one for certificates).
    fn unscale(&self, it: &Iterate<T>, scale: T) -> (Vec<T>, Vec<T>, Vec<T>, Vec<T>) {
        let e = self.eq;
        let k = T::from_f64(e.cost);
        let x = it.x.iter().zip(&e.d).map(|(v, d)| *v * T::from_f64(*d) / scale).collect();
        let y = it.y.iter().zip(&e.ea).map(|(v, d)| *v * T::from_f64(*d) / (k * scale)).collect();
        let z = it.z.iter().zip(&e.eg).map(|(v, d)| *v * T::from_f64(*d) / (k * scale)).collect();
        let s = it.s.iter().zip(&e.eg).map(|(v, d)| *v / (T::from_f64(*d) * scale)).collect();
        (x, y, z, s)
    }

    fn measure(&self, it: &Iterate<T>) -> Measured {
        let o = self.orig;
        let (x, y, z, s) = self.unscale(it, it.tau);
        let mut rpe: Vec<T> = self.of.iter().map(|v| -*v).collect();
        o.e.gemv(T::one(), &x, &mut rpe);
        let mut rpi: Vec<T> = s.iter().zip(&self.oh).map(|(a, b)| *a - *b).collect();
        o.g.gemv(T::one(), &x, &mut rpi);
        let mut rd = self.oc.clone();
        o.e.gemv_t(T::one(), &y, &mut rd);
        o.g.gemv_t(T::one(), &z, &mut rd);
        let pobj = dot(&self.oc, &x);
        let dobj = -(dot(&self.of, &y) + dot(&self.oh, &z));
        let comp = dot(&s, &z);
        let pscale = T::one() + norm_inf(&self.of).max(norm_inf(&self.oh));
        let pres = norm_inf(&rpe).max(norm_inf(&rpi)) / pscale;
        let dres = norm_inf(&rd) / (T::one() + norm_inf(&self.oc));
        let denom = T::one() + pobj.abs().min(dobj.abs());
        let gap = ((pobj - dobj).abs() / denom).max(comp.abs() / denom);
        let f = |v: Vec<T>| v.into_iter().map(Real::to_f64).collect::<Vec<f64>>();
        Measured {
            pres: pres.to_f64(),
            dres: dres.to_f64(),
            gap: gap.to_f64(),
            pobj: pobj.to_f64(),
            dobj: dobj.to_f64(),
            x: f(x),
            y: f(y),
            z: f(z),
            s: f(s),
        }
    }

    /// Checks the infeasibility certificates carried by the embedding.
    fn certificate(&self, it: &Iterate<T>) -> Option<(SolveStatus, Measured)> {
        let o = self.orig;
        let tol = T::from_f64(self.settings.tol_inf);
        let (x, y, z, s) = self.unscale(it, T::one());
        let by = dot(&self.of, &y) + dot(&self.oh, &z);
        let to_f = |v: &[T], k: T| v.iter().map(|a| (*a / k).to_f64()).collect::<Vec<f64>>();
        if by < T::zero() {
            let mut r = vec![T::zero(); x.len()];
            o.e.gemv_t(T::one(), &y, &mut r);
            o.g.gemv_t(T::one(), &z, &mut r);
            if norm_inf(&r) <= tol * (-by) {
                let k = -by;
                let zero = vec![0.0; x.len()];
                return Some((
                    SolveStatus::PrimalInfeasible,
                    Measured {
                        x: zero,
                        y: to_f(&y, k),
                        z: to_f(&z, k),
                        s: vec![0.0; s.len()],
                        pres: f64::INFINITY,
                        dres: (norm_inf(&r) / k).to_f64(),
                        gap: f64::NAN,
                        pobj: f64::INFINITY,
                        dobj: f64::INFINITY,
                    },
                ));
            }
        }
        let cx = dot(&self.oc, &x);
        if cx < T::zero() {
            let mut r1 = vec![T::zero(); y.len()];
            o.e.gemv(T::one(), &x, &mut r1);
            let mut r2 = s.clone();
            o.g.gemv(T::one(), &x, &mut r2);
            let worst = norm_inf(&r1).max(norm_inf(&r2));
            if worst <= tol * (-cx) {
                let k = -cx;
                return Some((
                    SolveStatus::DualInfeasible,
                    Measured {
                        x: to_f(&x, k),
                        y: vec![0.0; y.len()],
                        z: vec![0.0; z.len()],
                        s: to_f(&s, k),
                        pres: (worst / k).to_f64(),
                        dres: f64::INFINITY,
                        gap: f64::NAN,
                        pobj: f64::NEG_INFINITY,
                        dobj: f64::NEG_INFINITY,
                    },
                ));
            }
        }
        None
    }

    fn initial_point(&self, kkt: &mut Kkt<T>) -> Iterate<T> {
        let (n, p, m) = (kkt.n, kkt.p, kkt.m);
        let e = self.cones.identity::<T>();
        let w = NtScaling::new(&self.cones, &e, &e).expect("identity is interior");
        kkt.factor(&w);
        let mut rhs = vec![T::zero(); n];
        rhs.extend_from_slice(&self.b);
        rhs.extend_from_slice(&self.h);
        let sol = kkt.solve(self.q, &w, &rhs);
        let x = sol[..n].to_vec();
        let mut s: Vec<T> = sol[n + p..].iter().map(|v| -*v).collect();
        let mut rhs: Vec<T> = self.c.iter().map(|v| -*v).collect();
        rhs.extend(std::iter::repeat_n(T::zero(), p + m));
        let sol = kkt.solve(self.q, &w, &rhs);
        let y = sol[n..n + p].to_vec();
        let mut z = sol[n + p..].to_vec();
        for v in [&mut s, &mut z] {
            let margin = self.cones.interior_margin(v);
            let floor = -T::from_f64(1e-8) * T::one().max(norm_inf(v));
            if margin >= floor {
                axpy(T::one() + margin, &e, v);
            }
        }
        Iterate { x, y, z, s, tau: T::one(), kappa: T::one() }
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        kkt: &Kkt<T>,
        w: &NtScaling<T>,
        d1: &[T],
        w_dz1_sq: T,
        res: &Residuals<T>,
        it: &Iterate<T>,
        eta: T,
        d_s: &[T],
        d_kappa: T,
    ) -> Direction<T> {
        let (n, p, m) = (kkt.n, kkt.p, kkt.m);
        let mut t = vec![T::zero(); m];
        self.cones.inv_circ(&w.lambda, d_s, &mut t);
        let mut wt = vec![T::zero(); m];
        w.apply(&t, &mut wt);
        let mut rhs: Vec<T> = res.rx.iter().map(|v| -eta * *v).collect();
        rhs.extend(res.ry.iter().map(|v| eta * *v));
        rhs.extend(res.rz.iter().zip(&wt).map(|(r, a)| -eta * *r - *a));
        let d2 = kkt.solve(self.q, w, &rhs);
        let num = eta * res.rt
            + d_kappa / it.tau
            + dot(&self.c, &d2[..n])
            + dot(&self.b, &d2[n..n + p])
            + dot(&self.h, &d2[n + p..]);
        let dtau = num / (it.kappa / it.tau + w_dz1_sq);
        let mut d = d2;
        axpy(dtau, d1, &mut d);
        let dz = d[n + p..].to_vec();
        // ds = W (λ \ d_s) − W² dz
        let mut w2dz = vec![T::zero(); m];
        w.apply_w2(&dz, &mut w2dz);
        let mut ds = vec![T::zero(); m];
        w.apply(&t, &mut ds);
        for i in 0..m {
            ds[i] -= w2dz[i];
        }
        let dkappa = (d_kappa - it.kappa * dtau) / it.tau;
        Direction { x: d[..n].to_vec(), y: d[n..n + p].to_vec(), z: dz, s: ds, tau: dtau, kappa: dkappa }
    }

    fn step_length(&self, it: &Iterate<T>, d: &Direction<T>) -> T {
        let cap = T::from_f64(1e30);
        let mut a = self.cones.max_step(&it.s, &d.s, cap).min(self.cones.max_step(&it.z, &d.z, cap));
        if d.tau < T::zero() {
            a = a.min(-it.tau / d.tau);
        }
        if d.kappa < T::zero() {
            a = a.min(-it.kappa / d.kappa);
        }
        a
    }

    fn residuals(&self, it: &Iterate<T>) -> Residuals<T> {
        let q = self.q;
        let mut rx: Vec<T> = self.c.iter().map(|v| *v * it.tau).collect();
        q.e.gemv_t(T::one(), &it.y, &mut rx);
        q.g.gemv_t(T::one(), &it.z, &mut rx);
        let mut ry: Vec<T> = self.b.iter().map(|v| *v * it.tau).collect();
        q.e.gemv(-T::one(), &it.x, &mut ry);
        let mut rz: Vec<T> = it.s.iter().zip(&self.h).map(|(s, h)| *s - *h * it.tau).collect();
        q.g.gemv(T::one(), &it.x, &mut rz);
        let rt = it.kappa + dot(&self.c, &it.x) + dot(&self.b, &it.y) + dot(&self.h, &it.z);
        Residuals { rx, ry, rz, rt }
    }

    fn run(&self) -> (SolveStatus, Measured, usize) {
        let settings = self.settings;
        let e = self.cones.identity::<T>();
        let probe = NtScaling::new(&self.cones, &e, &e).expect("identity is interior");
        let mut kkt = Kkt::new(self.q, &probe);
        let (n, p, m) = (kkt.n, kkt.p, kkt.m);
        let mut it = self.initial_point(&mut kkt);
        let nu = T::from_f64(self.cones.degree() as f64 + 1.0);
        let mut best: Option<(f64, Measured)> = None;
        let mut stalls = 0;
        let mut iterations = 0;
        let status = loop {
            let meas = self.measure(&it);
            let score = (meas.pres / settings.tol_p)
                .max(meas.dres / settings.tol_d)
                .max(meas.gap / settings.tol_g);
            log::trace!(
                "iter {iterations:3}: pres {:.2e} dres {:.2e} gap {:.2e} pobj {:.9e} tau {:.2e} kappa {:.2e}",
                meas.pres,
                meas.dres,
                meas.gap,
                meas.pobj,
                it.tau.to_f64(),
                it.kappa.to_f64()
            );
            if score.is_finite() && best.as_ref().is_none_or(|(b, _)| score < *b) {
                best = Some((score, meas.clone()));
            }
            if score <= 1.0 {
                return (SolveStatus::Optimal, meas, iterations);
            }
            if let Some((st, cert)) = self.certificate(&it) {
                return (st, cert, iterations);
            }
            if iterations >= settings.max_iter {
                break SolveStatus::MaxIter;
            }
            iterations += 1;

            let Some(w) = NtScaling::new(&self.cones, &it.s, &it.z) else {
                break SolveStatus::Numerical;
            };
            if !(it.tau > T::zero() && it.kappa > T::zero()) {
                break SolveStatus::Numerical;
            }
            kkt.factor(&w);
            let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / nu;
            let res = self.residuals(&it);

            let mut rhs1: Vec<T> = self.c.iter().map(|v| -*v).collect();
            rhs1.extend_from_slice(&self.b);
            rhs1.extend_from_slice(&self.h);
            let d1 = kkt.solve(self.q, &w, &rhs1);
            let mut wdz1 = vec![T::zero(); m];
            w.apply(&d1[n + p..], &mut wdz1);
            let w_dz1_sq = dot(&wdz1, &wdz1);

            let mut ll = vec![T::zero(); m];
            self.cones.circ(&w.lambda, &w.lambda, &mut ll);
            let ds_aff: Vec<T> = ll.iter().map(|v| -*v).collect();
            let aff = self.direction(&kkt, &w, &d1, w_dz1_sq, &res, &it, T::one(), &ds_aff, -it.tau * it.kappa);
            let alpha_aff = self.step_length(&it, &aff).min(T::one());
            let one_minus = T::one() - alpha_aff;
            let sigma = (one_minus * one_minus * one_minus).max(T::zero()).min(T::one());

            let mut a = vec![T::zero(); m];
            w.apply_inv(&aff.s, &mut a);
            let mut b = vec![T::zero(); m];
            w.apply(&aff.z, &mut b);
            let mut corr = vec![T::zero(); m];
            self.cones.circ(&a, &b, &mut corr);
            let smu = sigma * mu;
            let ds_comb: Vec<T> = (0..m).map(|i| -ll[i] - corr[i] + smu * e[i]).collect();
            let dk_comb = -it.tau * it.kappa - aff.tau * aff.kappa + smu;
            let dir = self.direction(&kkt, &w, &d1, w_dz1_sq, &res, &it, T::one() - sigma, &ds_comb, dk_comb);
            let alpha = (T::from_f64(STEP_FRACTION) * self.step_length(&it, &dir)).min(T::one());
            if !alpha.is_finite() || dir.x.iter().chain(&dir.z).any(|v| !v.is_finite()) {
                break SolveStatus::Numerical;
            }
            if alpha < T::from_f64(1e-10) {
                stalls += 1;
                if stalls >= STALL_LIMIT {
                    break SolveStatus::Numerical;
                }
            } else {
                stalls = 0;
            }
            axpy(alpha, &dir.x, &mut it.x);
            axpy(alpha, &dir.y, &mut it.y);
            axpy(alpha, &dir.z, &mut it.z);
            axpy(alpha, &dir.s, &mut it.s);
            it.tau += alpha * dir.tau;
            it.kappa += alpha * dir.kappa;
        };
        let meas = best.map(|(_, m)| m).unwrap_or_else(|| self.measure(&it));
        (status, meas, iterations)
    }
}

struct Residuals<T> {
    rx: Vec<T>,
    ry: Vec<T>,
    rz: Vec<T>,
    rt: T,
}

pub(crate) fn solve<T: Real>(program: &ConeProgram, settings: &SolverSettings) -> ConeSolution {
    let orig = prep::map_program(program);
    let (scaled, eq) = if settings.equilibrate {
        prep::equilibrate(&orig)
    } else {
        (orig.clone(), Equilibration::identity(&orig))
    };
    let ipm = Ipm::<T>::new(&orig, &scaled, &eq, settings);
    let (status, mut meas, iterations) = ipm.run();
    prep::slack_from_soc(&orig.rotated, &mut meas.s);
    prep::dual_from_soc(&orig.rotated, &mut meas.z);
    ConeSolution {
        status,
        z: meas.x,
        slacks: meas.s,
        equality_duals: meas.y,
        cone_duals: meas.z,
        primal_residual: meas.pres,
        dual_residual: meas.dres,
        gap: meas.gap,
        objective: meas.pobj + program.c0,
        dual_objective: meas.dobj + program.c0,
        iterations,
    }
}

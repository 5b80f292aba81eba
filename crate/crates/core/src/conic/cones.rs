//! Symmetric-cone kernels used by the interior-point method: Jordan products,
//! Nesterov-Todd scaling, step-to-boundary and interior shifts.
//!
//! Rotated cones never reach this layer; they are mapped onto ordinary
//! second-order cones by an orthogonal change of coordinates beforehand.

use super::real::{dot, norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerCone {
    Nonneg(usize),
    Soc(usize),
}

impl InnerCone {
    pub fn dim(&self) -> usize {
        match *self {
            InnerCone::Nonneg(m) | InnerCone::Soc(m) => m,
        }
    }
}

/// Ordered list of cone blocks partitioning the inequality rows.
#[derive(Debug, Clone)]
pub struct ConeSet {
    pub blocks: Vec<(InnerCone, usize)>,
    pub dim: usize,
}

impl ConeSet {
    pub fn new(cones: &[InnerCone]) -> Self {
        let mut blocks = Vec::with_capacity(cones.len());
        let mut off = 0;
        for &c in cones {
            if c.dim() > 0 {
                blocks.push((c, off));
                off += c.dim();
            }
        }
        ConeSet { blocks, dim: off }
    }

    /// Barrier degree: one per nonnegative coordinate, one per second-order cone.
    pub fn degree(&self) -> usize {
        self.blocks
            .iter()
            .map(|(c, _)| match c {
                InnerCone::Nonneg(m) => *m,
                InnerCone::Soc(_) => 1,
            })
            .sum()
    }

    /// The identity element `e` of the product cone.
    pub fn identity<T: Real>(&self) -> Vec<T> {
        let mut e = vec![T::zero(); self.dim];
        for &(c, o) in &self.blocks {
            match c {
                InnerCone::Nonneg(m) => e[o..o + m].iter_mut().for_each(|v| *v = T::one()),
                InnerCone::Soc(_) => e[o] = T::one(),
            }
        }
        e
    }

    /// Jordan product `u ∘ v`.
    pub fn circ<T: Real>(&self, u: &[T], v: &[T], out: &mut [T]) {
        for &(c, o) in &self.blocks {
            match c {
                InnerCone::Nonneg(m) => {
                    for i in o..o + m {
                        out[i] = u[i] * v[i];
                    }
                }
                InnerCone::Soc(d) => {
                    out[o] = dot(&u[o..o + d], &v[o..o + d]);
                    for i in o + 1..o + d {
                        out[i] = u[o] * v[i] + v[o] * u[i];
                    }
                }
            }
        }
    }

    /// Solves `λ ∘ x = d` for `x`.
    pub fn inv_circ<T: Real>(&self, lambda: &[T], d: &[T], out: &mut [T]) {
        for &(c, o) in &self.blocks {
            match c {
                InnerCone::Nonneg(m) => {
                    for i in o..o + m {
                        out[i] = d[i] / lambda[i];
                    }
                }
                InnerCone::Soc(k) => {
                    let l = &lambda[o..o + k];
                    let dd = &d[o..o + k];
                    let l1n = norm2(&l[1..]);
                    let det = (l[0] - l1n) * (l[0] + l1n);
                    let x0 = (l[0] * dd[0] - dot(&l[1..], &dd[1..])) / det;
                    out[o] = x0;
                    for i in 1..k {
                        out[o + i] = (dd[i] - x0 * l[i]) / l[0];
                    }
                }
            }
        }
    }

    /// Largest `α` with `x + α d` in the cone (capped at `cap`); `x` must be interior.
    pub fn max_step<T: Real>(&self, x: &[T], d: &[T], cap: T) -> T {
        let mut alpha = cap;
        for &(c, o) in &self.blocks {
            match c {
                InnerCone::Nonneg(m) => {
                    for i in o..o + m {
                        if d[i] < T::zero() {
                            alpha = alpha.min(-x[i] / d[i]);
                        }
                    }
                }
                InnerCone::Soc(k) => {
                    let a = soc_step(&x[o..o + k], &d[o..o + k]);
                    if let Some(a) = a {
                        alpha = alpha.min(a);
                    }
                }
            }
        }
        alpha
    }

    /// Smallest `α` such that `x + α e` lies in the cone (negative when `x` is interior).
    pub fn interior_margin<T: Real>(&self, x: &[T]) -> T {
        let mut worst: Option<T> = None;
        for &(c, o) in &self.blocks {
            let v = match c {
                InnerCone::Nonneg(m) => x[o..o + m]
                    .iter()
                    .fold(None::<T>, |acc, &v| Some(acc.map_or(-v, |a| a.max(-v))))
                    .unwrap_or_else(T::zero),
                InnerCone::Soc(k) => norm2(&x[o + 1..o + k]) - x[o],
            };
            worst = Some(worst.map_or(v, |w| w.max(v)));
        }
        worst.unwrap_or_else(T::zero)
    }

    pub fn is_interior<T: Real>(&self, x: &[T]) -> bool {
        self.blocks.iter().all(|&(c, o)| match c {
            InnerCone::Nonneg(m) => x[o..o + m].iter().all(|&v| v > T::zero()),
            InnerCone::Soc(k) => x[o] > norm2(&x[o + 1..o + k]),
        })
    }
}

/// Step to the boundary of a second-order cone from an interior point, via the
/// eigenvalues of `P(x^{-1/2}) d`.
fn soc_step<T: Real>(x: &[T], d: &[T]) -> Option<T> {
    let n1 = norm2(&x[1..]);
    let nrm = ((x[0] - n1) * (x[0] + n1)).sqrt();
    let xb0 = x[0] / nrm;
    let rho0 = (xb0 * d[0] - (dot(&x[1..], &d[1..]) / nrm)) / nrm;
    let coef = (d[0] / nrm + rho0) / (xb0 + T::one());
    let mut r1 = T::zero();
    for i in 1..x.len() {
        let v = d[i] / nrm - coef * (x[i] / nrm);
        r1 += v * v;
    }
    let bound = r1.sqrt() - rho0;
    if bound > T::zero() {
        Some(T::one() / bound)
    } else {
        None
    }
}

/// Nesterov-Todd scaling data for one block.
#[derive(Debug, Clone)]
enum BlockScaling<T> {
    /// `w_i = sqrt(s_i / z_i)`.
    Nonneg(Vec<T>),
    /// `W = η (2 v vᵀ − J)` with `W² = η² (2 w̄ w̄ᵀ − J)`.
    Soc { eta: T, wbar: Vec<T>, v: Vec<T> },
}

/// Scaling `W` with `W z = W⁻¹ s = λ`; `W` is symmetric.
#[derive(Debug, Clone)]
pub struct NtScaling<T> {
    blocks: Vec<(BlockScaling<T>, usize)>,
    pub lambda: Vec<T>,
}

fn j_norm<T: Real>(x: &[T]) -> Option<T> {
    let n1 = norm2(&x[1..]);
    let q = (x[0] - n1) * (x[0] + n1);
    if x[0] > T::zero() && q > T::zero() { Some(q.sqrt()) } else { None }
}

impl<T: Real> NtScaling<T> {
    /// Returns `None` if either point leaves the cone interior.
    pub fn new(cones: &ConeSet, s: &[T], z: &[T]) -> Option<Self> {
        let mut blocks = Vec::with_capacity(cones.blocks.len());
        let mut lambda = vec![T::zero(); cones.dim];
        for &(c, o) in &cones.blocks {
            match c {
                InnerCone::Nonneg(m) => {
                    let mut w = Vec::with_capacity(m);
                    for i in o..o + m {
                        if !(s[i] > T::zero() && z[i] > T::zero()) {
                            return None;
                        }
                        w.push((s[i] / z[i]).sqrt());
                        lambda[i] = (s[i] * z[i]).sqrt();
                    }
                    blocks.push((BlockScaling::Nonneg(w), o));
                }
                InnerCone::Soc(k) => {
                    let sb = &s[o..o + k];
                    let zb = &z[o..o + k];
                    let sn = j_norm(sb)?;
                    let zn = j_norm(zb)?;
                    let sbar: Vec<T> = sb.iter().map(|&v| v / sn).collect();
                    let zbar: Vec<T> = zb.iter().map(|&v| v / zn).collect();
                    let gamma = ((T::one() + dot(&sbar, &zbar)) / T::from_f64(2.0)).sqrt();
                    let two_gamma = gamma + gamma;
                    let mut wbar: Vec<T> = Vec::with_capacity(k);
                    wbar.push((sbar[0] + zbar[0]) / two_gamma);
                    for i in 1..k {
                        wbar.push((sbar[i] - zbar[i]) / two_gamma);
                    }
                    let eta = (sn / zn).sqrt();
                    let denom = (T::from_f64(2.0) * (wbar[0] + T::one())).sqrt();
                    let mut v = wbar.clone();
                    v[0] += T::one();
                    v.iter_mut().for_each(|x| *x /= denom);
                    // λ̄ = W̄ z̄ in closed form, then rescale.
                    let scale = (sn * zn).sqrt();
                    lambda[o] = gamma * scale;
                    let den = sbar[0] + zbar[0] + two_gamma;
                    for i in 1..k {
                        lambda[o + i] =
                            ((gamma + zbar[0]) * sbar[i] + (gamma + sbar[0]) * zbar[i]) / den * scale;
                    }
                    blocks.push((BlockScaling::Soc { eta, wbar, v }, o));
                }
            }
        }
        Some(NtScaling { blocks, lambda })
    }

    /// `out = W x`.
    pub fn apply(&self, x: &[T], out: &mut [T]) {
        self.apply_impl(x, out, false)
    }

    /// `out = W⁻¹ x`.
    pub fn apply_inv(&self, x: &[T], out: &mut [T]) {
        self.apply_impl(x, out, true)
    }

    fn apply_impl(&self, x: &[T], out: &mut [T], inverse: bool) {
        for (b, o) in &self.blocks {
            let o = *o;
            match b {
                BlockScaling::Nonneg(w) => {
                    for (i, wi) in w.iter().enumerate() {
                        out[o + i] = if inverse { x[o + i] / *wi } else { x[o + i] * *wi };
                    }
                }
                BlockScaling::Soc { eta, v, .. } => {
                    let k = v.len();
                    let xb = &x[o..o + k];
                    // W x = η (2 v (vᵀx) − J x);  W⁻¹ x = (2 J v (vᵀ J x) − J x) / η
                    let two = T::from_f64(2.0);
                    if !inverse {
                        let vx = dot(v, xb);
                        out[o] = *eta * (two * v[0] * vx - xb[0]);
                        for i in 1..k {
                            out[o + i] = *eta * (two * v[i] * vx + xb[i]);
                        }
                    } else {
                        let vjx = v[0] * xb[0] - dot(&v[1..], &xb[1..]);
                        out[o] = (two * v[0] * vjx - xb[0]) / *eta;
                        for i in 1..k {
                            out[o + i] = (-two * v[i] * vjx + xb[i]) / *eta;
                        }
                    }
                }
            }
        }
    }

    /// Visits the entries of `W²` block by block as `(row, col, value)` with
    /// `row ≥ col`, offsets relative to the start of the cone rows.
    pub fn for_each_w2(&self, mut f: impl FnMut(usize, usize, T)) {
        for (b, o) in &self.blocks {
            match b {
                BlockScaling::Nonneg(w) => {
                    for (i, wi) in w.iter().enumerate() {
                        f(o + i, o + i, *wi * *wi);
                    }
                }
                BlockScaling::Soc { eta, wbar, .. } => {
                    let e2 = *eta * *eta;
                    let two = T::from_f64(2.0);
                    let k = wbar.len();
                    for i in 0..k {
                        for j in 0..=i {
                            let mut v = two * wbar[i] * wbar[j];
                            if i == j {
                                v += if i == 0 { -T::one() } else { T::one() };
                            }
                            f(o + i, o + j, e2 * v);
                        }
                    }
                }
            }
        }
    }

    /// `out = W² x`.
    pub fn apply_w2(&self, x: &[T], out: &mut [T]) {
        let mut tmp = vec![T::zero(); x.len()];
        self.apply(x, &mut tmp);
        self.apply(&tmp, out);
    }
}

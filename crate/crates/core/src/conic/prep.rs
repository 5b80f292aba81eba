//! Program preprocessing shared by the backends: rotated-cone mapping and
//! Ruiz equilibration.

use nalgebra::DMatrix;

use super::cones::{ConeSet, InnerCone};
use super::sparse::CscMatrix;
use super::{Cone, ConeProgram};

const RUIZ_PASSES: usize = 15;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;

/// A program over nonnegative orthants and ordinary second-order cones only.
#[derive(Debug, Clone)]
pub(crate) struct InnerProgram {
    pub c: Vec<f64>,
    pub e: CscMatrix,
    pub f: Vec<f64>,
    pub g: CscMatrix,
    pub h: Vec<f64>,
    pub cones: ConeSet,
    /// `(offset, dim)` of blocks that were rotated cones in the caller's program.
    pub rotated: Vec<(usize, usize)>,
}

/// The map `M: (a, b, w) ↦ (a + 2b, a − 2b, 2w)` takes `2ab ≥ ‖w‖²` onto
/// `a'² ≥ b'² + ‖w'‖²`. Every coefficient of `M` and `M⁻¹` is a power of two,
/// so the conversion is exact in binary floating point.
fn rsoc_map(d: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(d, d);
    t[(0, 0)] = 1.0;
    t[(0, 1)] = 2.0;
    t[(1, 0)] = 1.0;
    t[(1, 1)] = -2.0;
    for i in 2..d {
        t[(i, i)] = 2.0;
    }
    t
}

/// Rotated-cone slacks to second-order-cone slacks (`s' = M s`).
pub(crate) fn slack_to_soc(rotated: &[(usize, usize)], v: &mut [f64]) {
    for &(o, d) in rotated {
        let (a, b) = (v[o], v[o + 1]);
        v[o] = a + 2.0 * b;
        v[o + 1] = a - 2.0 * b;
        v[o + 2..o + d].iter_mut().for_each(|x| *x *= 2.0);
    }
}

/// Inverse of [`slack_to_soc`].
pub(crate) fn slack_from_soc(rotated: &[(usize, usize)], v: &mut [f64]) {
    for &(o, d) in rotated {
        let (a, b) = (v[o], v[o + 1]);
        v[o] = 0.5 * (a + b);
        v[o + 1] = 0.25 * (a - b);
        v[o + 2..o + d].iter_mut().for_each(|x| *x *= 0.5);
    }
}

/// Rotated-cone duals to second-order-cone duals (`λ' = M⁻ᵀ λ`), which keeps
/// `sᵀλ` unchanged.
pub(crate) fn dual_to_soc(rotated: &[(usize, usize)], v: &mut [f64]) {
    for &(o, d) in rotated {
        let (a, b) = (v[o], v[o + 1]);
        v[o] = 0.5 * (a + 0.5 * b);
        v[o + 1] = 0.5 * (a - 0.5 * b);
        v[o + 2..o + d].iter_mut().for_each(|x| *x *= 0.5);
    }
}

/// Inverse of [`dual_to_soc`] (`λ = Mᵀ λ'`).
pub(crate) fn dual_from_soc(rotated: &[(usize, usize)], v: &mut [f64]) {
    for &(o, d) in rotated {
        let (a, b) = (v[o], v[o + 1]);
        v[o] = a + b;
        v[o + 1] = 2.0 * (a - b);
        v[o + 2..o + d].iter_mut().for_each(|x| *x *= 2.0);
    }
}

pub(crate) fn map_program(p: &ConeProgram) -> InnerProgram {
    let mut g = p.g.clone();
    let mut h = p.h.clone();
    let mut inner = Vec::with_capacity(p.cones.len());
    let mut rotated = Vec::new();
    let mut off = 0;
    for cone in &p.cones {
        match *cone {
            Cone::Nonneg(m) => inner.push(InnerCone::Nonneg(m)),
            Cone::Soc(d) => inner.push(InnerCone::Soc(d)),
            Cone::Rsoc(d) => {
                g = g.transform_rows(off, &rsoc_map(d));
                rotated.push((off, d));
                inner.push(InnerCone::Soc(d));
            }
        }
        off += cone.dim();
    }
    slack_to_soc(&rotated, &mut h);
    InnerProgram {
        c: p.c.clone(),
        e: p.e.clone(),
        f: p.f.clone(),
        g,
        h,
        cones: ConeSet::new(&inner),
        rotated,
    }
}

/// Diagonal scalings with `c̃ = k D c`, `Ẽ = Eₐ E D`, `G̃ = E_g G D`.
#[derive(Debug, Clone)]
pub(crate) struct Equilibration {
    pub d: Vec<f64>,
    pub ea: Vec<f64>,
    pub eg: Vec<f64>,
    pub cost: f64,
}

impl Equilibration {
    pub fn identity(p: &InnerProgram) -> Self {
        Equilibration {
            d: vec![1.0; p.c.len()],
            ea: vec![1.0; p.f.len()],
            eg: vec![1.0; p.h.len()],
            cost: 1.0,
        }
    }
}

fn row_inf_norms(m: &CscMatrix) -> Vec<f64> {
    let mut r = vec![0.0f64; m.nrows];
    for (i, _, v) in m.iter() {
        r[i] = r[i].max(v.abs());
    }
    r
}

fn col_inf_norms(m: &CscMatrix) -> Vec<f64> {
    (0..m.ncols)
        .map(|c| {
            m.nzval[m.colptr[c]..m.colptr[c + 1]]
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()))
        })
        .collect()
}

/// Nearest power of two, so that scaling by it is exact.
fn pow2(v: f64) -> f64 {
    v.log2().round().exp2()
}

fn inv_sqrt_clamped(v: f64) -> f64 {
    if v > 0.0 { pow2((1.0 / v.sqrt()).clamp(SCALE_MIN, SCALE_MAX)) } else { 1.0 }
}

/// Ruiz equilibration. Scalings on second-order cone rows are uniform per
/// block so cone membership is preserved, and every factor is a power of two
/// so the scaled program is exactly equivalent to the original.
pub(crate) fn equilibrate(p: &InnerProgram) -> (InnerProgram, Equilibration) {
    let mut q = p.clone();
    let mut eq = Equilibration::identity(p);
    for _ in 0..RUIZ_PASSES {
        let ce = col_inf_norms(&q.e);
        let cg = col_inf_norms(&q.g);
        let dc: Vec<f64> = ce.iter().zip(&cg).map(|(a, b)| inv_sqrt_clamped(a.max(*b))).collect();
        let ra: Vec<f64> = row_inf_norms(&q.e).into_iter().map(inv_sqrt_clamped).collect();
        let mut rg_norm = row_inf_norms(&q.g);
        for &(c, o) in &q.cones.blocks {
            if let InnerCone::Soc(k) = c {
                let m = rg_norm[o..o + k].iter().fold(0.0f64, |a, v| a.max(*v));
                rg_norm[o..o + k].iter_mut().for_each(|v| *v = m);
            }
        }
        let rg: Vec<f64> = rg_norm.into_iter().map(inv_sqrt_clamped).collect();
        q.e.scale(&ra, &dc);
        q.g.scale(&rg, &dc);
        for j in 0..dc.len() {
            eq.d[j] *= dc[j];
        }
        for i in 0..ra.len() {
            eq.ea[i] *= ra[i];
        }
        for i in 0..rg.len() {
            eq.eg[i] *= rg[i];
        }
    }
    for (i, v) in q.f.iter_mut().enumerate() {
        *v *= eq.ea[i];
    }
    for (i, v) in q.h.iter_mut().enumerate() {
        *v *= eq.eg[i];
    }
    let dc_norm = q
        .c
        .iter()
        .zip(&eq.d)
        .fold(0.0f64, |a, (c, d)| a.max((c * d).abs()));
    eq.cost = if dc_norm > 0.0 { pow2((1.0 / dc_norm).clamp(SCALE_MIN, SCALE_MAX)) } else { 1.0 };
    for (j, v) in q.c.iter_mut().enumerate() {
        *v *= eq.d[j] * eq.cost;
    }
    (q, eq)
}

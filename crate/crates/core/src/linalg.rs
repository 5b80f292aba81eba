//! Dense linear-algebra kernels: matrix exponential, zero-order-hold
//! discretization, numerical rank and eigen-structure.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{LcvxError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Complex64 = Complex<f64>;

/// Relative multiplier applied to machine epsilon for rank decisions.
const RANK_EPS_FACTOR: f64 = 64.0;

/// Eigenvector bases with a condition number above this are treated as defective.
pub const DIAGONALIZABLE_COND_LIMIT: f64 = 1e12;

/// Eigenvalues closer than `EIGEN_GROUP_TOL * (1 + |λ|)` are treated as equal.
pub const EIGEN_GROUP_TOL: f64 = 1e-8;

pub(crate) fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LcvxError::NonFinite(what))
    }
}

pub(crate) fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(LcvxError::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    ensure_square(m, "expm input")?;
    ensure_finite(m, "expm input")?;
    if m.nrows() == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    Ok(m.exp())
}

/// Returns `(exp(A t), ∫₀ᵗ exp(A τ) dτ · inputs)` from one exponential of the
/// augmented block matrix `[[A, inputs], [0, 0]]`.
pub fn exp_with_integral(a: &Matrix, inputs: &Matrix, t: f64) -> Result<(Matrix, Matrix)> {
    ensure_square(a, "state matrix")?;
    if inputs.nrows() != a.nrows() {
        return Err(LcvxError::Dimension(format!(
            "input block has {} rows, state matrix has {}",
            inputs.nrows(),
            a.nrows()
        )));
    }
    let n = a.nrows();
    let k = inputs.ncols();
    let mut aug = Matrix::zeros(n + k, n + k);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * t));
    aug.view_mut((0, n), (n, k)).copy_from(&(inputs * t));
    let e = expm(&aug)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, k)).into_owned(),
    ))
}

/// Discrete dynamics `x⁺ = A x + B u + drift` under a zero-order hold.
#[derive(Debug, Clone, PartialEq)]
pub struct Zoh {
    pub a: Matrix,
    pub b: Matrix,
    pub drift: Vector,
}

/// Zero-order-hold discretization of `ẋ = A_c x + B_c u + w` over a step `dt`.
///
/// `B` and the drift come out of the same augmented exponential, so the
/// integral `∫ exp(A_c τ) dτ` is never formed by quadrature.
pub fn discretize_zoh(a_c: &Matrix, b_c: &Matrix, w: &Vector, dt: f64) -> Result<Zoh> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(LcvxError::InvalidParameter(format!(
            "discretization step must be positive, got {dt}"
        )));
    }
    ensure_square(a_c, "A_c")?;
    ensure_finite(a_c, "A_c")?;
    ensure_finite(b_c, "B_c")?;
    let n = a_c.nrows();
    if b_c.nrows() != n || w.len() != n {
        return Err(LcvxError::Dimension(format!(
            "A_c is {n}x{n}, B_c has {} rows, drift has {} entries",
            b_c.nrows(),
            w.len()
        )));
    }
    let m = b_c.ncols();
    let mut inputs = Matrix::zeros(n, m + 1);
    inputs.view_mut((0, 0), (n, m)).copy_from(b_c);
    inputs.set_column(m, w);
    let (a, gamma) = exp_with_integral(a_c, &inputs, dt)?;
    Ok(Zoh {
        a,
        b: gamma.columns(0, m).into_owned(),
        drift: gamma.column(m).into_owned(),
    })
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Numerical rank with threshold `max(rows, cols) · σ_max · ε · 64`.
pub fn numerical_rank(m: &Matrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    if smax == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * smax * f64::EPSILON * RANK_EPS_FACTOR;
    sv.iter().filter(|&&s| s > tol).count()
}

/// `(B, AB, …, A^{n-1}B)`.
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_square(a, "A")?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(LcvxError::Dimension(format!(
            "A is {n}x{n} but B has {} rows",
            b.nrows()
        )));
    }
    let m = b.ncols();
    let mut c = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        c.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    Ok(c)
}

pub fn controllability_rank(a: &Matrix, b: &Matrix) -> Result<usize> {
    Ok(numerical_rank(&controllability_matrix(a, b)?))
}

/// Eigenvalues, eigenvectors (as columns) and the conditioning of the basis.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues ordered by descending real part, then descending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// Column `k` is an eigenvector for `eigenvalues[k]`.
    pub eigenvectors: DMatrix<Complex64>,
    /// `cond(Q)`; infinite when a full eigenvector basis could not be found.
    pub condition_estimate: f64,
}

impl EigenDecomposition {
    pub fn is_diagonalizable(&self) -> bool {
        self.condition_estimate <= DIAGONALIZABLE_COND_LIMIT
    }

    /// `Q Λ Q⁻¹`; `None` if `Q` is numerically singular.
    pub fn reconstruct(&self) -> Option<DMatrix<Complex64>> {
        let q = &self.eigenvectors;
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues.clone()));
        let qinv = q.clone().try_inverse()?;
        Some(q * lambda * qinv)
    }

    /// Distinct eigenvalues (grouped with [`EIGEN_GROUP_TOL`]) and, for each,
    /// the indices of the eigenvalues in the group.
    pub fn distinct(&self) -> Vec<(Complex64, Vec<usize>)> {
        group_eigenvalues(&self.eigenvalues)
    }
}

pub(crate) fn same_eigenvalue(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= EIGEN_GROUP_TOL * (1.0 + a.norm().max(b.norm()))
}

/// Groups an already ordered eigenvalue list; group members are contiguous.
fn group_eigenvalues(values: &[Complex64]) -> Vec<(Complex64, Vec<usize>)> {
    let mut groups: Vec<(Complex64, Vec<usize>)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match groups.iter_mut().find(|(c, _)| same_eigenvalue(*c, v)) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((v, vec![i])),
        }
    }
    groups
}

fn order_key(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

pub fn eigendecompose(a: &Matrix) -> Result<EigenDecomposition> {
    ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![],
            eigenvectors: DMatrix::zeros(0, 0),
            condition_estimate: 1.0,
        });
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| LcvxError::EigenFailure("Schur iteration did not converge".into()))?;
    let mut raw: Vec<Complex64> = schur.complex_eigenvalues().iter().cloned().collect();
    raw.sort_by(order_key);

    // Cluster, then lay the clusters out contiguously in order.
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for v in &raw {
        match clusters.iter_mut().find(|(c, _)| same_eigenvalue(*c, *v)) {
            Some((c, k)) => {
                *c = (*c * (*k as f64) + v) / ((*k + 1) as f64);
                *k += 1;
            }
            None => clusters.push((*v, 1)),
        }
    }
    // Real clusters get an exactly real centre so their eigenvectors stay real.
    for (c, _) in clusters.iter_mut() {
        if c.im.abs() <= EIGEN_GROUP_TOL * (1.0 + c.norm()) {
            c.im = 0.0;
        }
    }
    clusters.sort_by(|x, y| order_key(&x.0, &y.0));

    let anorm = spectral_norm(a);
    let resid_tol = EIGEN_GROUP_TOL * (1.0 + anorm);
    let ac: DMatrix<Complex64> = a.map(|v| Complex64::new(v, 0.0));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut columns: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    let mut defective = false;
    let mut computed: Vec<(Complex64, Vec<DVector<Complex64>>)> = Vec::new();

    for &(lambda, mult) in &clusters {
        // Conjugate partner of an already processed cluster: reuse conjugated vectors.
        let partner = computed
            .iter()
            .find(|(mu, _)| lambda.im < 0.0 && same_eigenvalue(mu.conj(), lambda))
            .map(|(_, vs)| vs.iter().map(|v| v.map(|z| z.conj())).collect::<Vec<_>>());
        let vecs = match partner {
            Some(v) => v,
            None => {
                let shifted = &ac - DMatrix::<Complex64>::identity(n, n) * lambda;
                let svd = shifted.svd(false, true);
                let v_t = svd
                    .v_t
                    .ok_or_else(|| LcvxError::EigenFailure("SVD did not return V".into()))?;
                let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
                order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
                order
                    .iter()
                    .take(mult)
                    .map(|&k| {
                        let mut v = v_t.row(k).adjoint();
                        normalize_phase(&mut v);
                        v
                    })
                    .collect::<Vec<_>>()
            }
        };
        for v in &vecs {
            let r = (&ac * v - v * lambda).norm();
            if r > resid_tol {
                defective = true;
            }
            eigenvalues.push(lambda);
            columns.push(v.clone());
        }
        computed.push((lambda, vecs));
    }

    let q = DMatrix::from_columns(&columns);
    let condition_estimate = if defective {
        f64::INFINITY
    } else {
        let sv = q.clone().svd(false, false).singular_values;
        let smax = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
        let smin = sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s));
        if smin == 0.0 {
            f64::INFINITY
        } else {
            smax / smin
        }
    };
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: q,
        condition_estimate,
    })
}

/// Rotates a complex vector so its largest entry is real and positive.
fn normalize_phase(v: &mut DVector<Complex64>) {
    let (k, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bk, bm), (i, z)| if z.norm() > bm + 1e-14 { (i, z.norm()) } else { (bk, bm) });
    let z = v[k];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        *v *= phase;
    }
    let nrm = v.norm();
    if nrm > 0.0 {
        *v /= Complex64::new(nrm, 0.0);
    }
}

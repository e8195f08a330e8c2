//! Convex subproblems of the filter: maximize a linear functional of the
//! coefficient vector subject to an empirical second-moment bound and an
//! empirical `f`-weighted absolute-mean bound.
//!
//! Coefficients are restricted to the row space of the reference feature
//! matrix and whitened there, `c = W z` with `c^T G c = |z|^2`. The absolute
//! values are handled with epigraph variables, and the resulting problem
//! (linear objective, linear constraints, one ball) is solved by a log-barrier
//! path-following method.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::Classifier;
use crate::numeric::{dot, row_key};
use crate::polycore::{FeatureMatrix, MonomialBasis, PolyError, Sample};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;
pub const DEFAULT_OPT_TOL: f64 = 1e-6;
pub const DEFAULT_FEAS_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_NEWTON: usize = 2000;

#[derive(Debug, Error)]
pub enum CvxError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("objective has length {got}, basis has {expected}")]
    ObjectiveLength { expected: usize, got: usize },
    #[error("invalid constraint parameter: {0}")]
    InvalidParameter(String),
    #[error("barrier method did not converge within {0} Newton steps")]
    NonConvergence(usize),
    #[error("singular value decomposition failed")]
    Decomposition,
}

/// Solver tolerances and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub opt_tol: f64,
    pub feas_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { opt_tol: DEFAULT_OPT_TOL, feas_tol: DEFAULT_FEAS_TOL, max_newton: DEFAULT_MAX_NEWTON }
    }
}

/// Distinct feature rows of a reference sample with their multiplicities.
#[derive(Debug, Clone)]
pub struct UniqueRows {
    cols: usize,
    rows: Vec<f64>,
    counts: Vec<f64>,
    /// For every original row, the index of its distinct row.
    index_of: Vec<usize>,
}

impl UniqueRows {
    pub fn new(fm: &FeatureMatrix) -> Self {
        let cols = fm.ncols();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut rows = Vec::new();
        let mut counts = Vec::new();
        let mut index_of = Vec::with_capacity(fm.nrows());
        for r in fm.rows() {
            let next = counts.len();
            let j = *seen.entry(row_key(r)).or_insert(next);
            if j == next {
                rows.extend_from_slice(r);
                counts.push(0.0);
            }
            counts[j] += 1.0;
            index_of.push(j);
        }
        UniqueRows { cols, rows, counts, index_of }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.cols..(j + 1) * self.cols]
    }

    pub fn count(&self, j: usize) -> f64 {
        self.counts[j]
    }

    pub fn total(&self) -> usize {
        self.index_of.len()
    }

    pub fn index_of(&self) -> &[usize] {
        &self.index_of
    }
}

/// Whitening map onto the row space of the reference feature matrix.
#[derive(Debug, Clone)]
pub struct RowSpace {
    n: usize,
    k: usize,
    /// Orthonormal basis of the row space, `k x r`.
    v: DMatrix<f64>,
    /// `W = V diag(sqrt(n) / sigma)`, `k x r`.
    w: DMatrix<f64>,
    singular_values: Vec<f64>,
    unique: UniqueRows,
    fingerprint: [u8; 32],
}

impl RowSpace {
    pub fn new(fm: &FeatureMatrix) -> Result<Self, CvxError> {
        if fm.nrows() == 0 {
            return Err(PolyError::EmptySample.into());
        }
        let unique = UniqueRows::new(fm);
        let k = fm.ncols();
        let n = fm.nrows();
        // Same M^T M as the full matrix, with one row per distinct point.
        let mut scaled = DMatrix::zeros(unique.len(), k);
        for j in 0..unique.len() {
            let s = unique.count(j).sqrt();
            for (c, v) in unique.row(j).iter().enumerate() {
                scaled[(j, c)] = s * v;
            }
        }
        let svd = scaled.try_svd(false, true, f64::EPSILON, 0).ok_or(CvxError::Decomposition)?;
        let v_t = svd.v_t.as_ref().ok_or(CvxError::Decomposition)?;
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > RANK_TOL * smax).collect();
        let r = keep.len();
        let mut v = DMatrix::zeros(k, r);
        let mut w = DMatrix::zeros(k, r);
        let mut singular_values = Vec::with_capacity(r);
        let sqrt_n = (n as f64).sqrt();
        for (col, &i) in keep.iter().enumerate() {
            let sigma = svd.singular_values[i];
            singular_values.push(sigma);
            for row in 0..k {
                v[(row, col)] = v_t[(i, row)];
                w[(row, col)] = v_t[(i, row)] * sqrt_n / sigma;
            }
        }
        let mut h = Sha256::new();
        h.update((n as u64).to_le_bytes());
        h.update((k as u64).to_le_bytes());
        for x in fm.as_slice() {
            h.update(x.to_le_bytes());
        }
        let fingerprint = h.finalize().into();
        Ok(RowSpace { n, k, v, w, singular_values, unique, fingerprint })
    }

    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn unique_rows(&self) -> &UniqueRows {
        &self.unique
    }

    /// Orthogonal projector `V V^T` onto the row space.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.v * self.v.transpose()
    }

    /// `W^T a`.
    pub fn whiten(&self, a: &[f64]) -> DVector<f64> {
        self.w.tr_mul(&DVector::from_column_slice(a))
    }

    /// `W z`.
    pub fn unwhiten(&self, z: &DVector<f64>) -> Vec<f64> {
        (&self.w * z).as_slice().to_vec()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The feasible set `{p : E_S[p^2] <= quad_bound, E_S[f |p|] <= abs_bound}`
/// restricted to the row space of the reference features.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    basis: Arc<MonomialBasis>,
    space: Arc<RowSpace>,
    quad_bound: f64,
    abs_bound: f64,
    /// Distinct rows with `f = 1` and their multiplicities.
    abs_idx: Vec<usize>,
    abs_counts: Vec<f64>,
    /// Whitened active rows, one per row of the matrix.
    u: DMatrix<f64>,
    fingerprint: String,
}

/// `(2 beta, 2 eps / (2R + eps))`.
pub fn constraint_bounds(beta: f64, eps: f64, r: f64) -> (f64, f64) {
    (2.0 * beta, 2.0 * eps / (2.0 * r + eps))
}

/// Builds `P(f)` from a reference sample `S`.
pub fn build_constraint_set(
    f: &Classifier,
    s: &Sample,
    basis: Arc<MonomialBasis>,
    beta: f64,
    eps: f64,
    r: f64,
) -> Result<ConstraintSet, CvxError> {
    if !(beta > 0.0) || !(eps > 0.0 && eps < 1.0) || !(r > 1.0) {
        return Err(CvxError::InvalidParameter(format!("beta={beta}, eps={eps}, R={r}")));
    }
    let fm = FeatureMatrix::new(&basis, s)?;
    let space = Arc::new(RowSpace::new(&fm)?);
    let active: Vec<bool> = s.points().map(|x| f.eval(x)).collect();
    let (qb, ab) = constraint_bounds(beta, eps, r);
    ConstraintSet::new(basis, space, &active, qb, ab)
}

impl ConstraintSet {
    /// `active[i]` is `f(x_i)` for the `i`-th reference point.
    pub fn new(
        basis: Arc<MonomialBasis>,
        space: Arc<RowSpace>,
        active: &[bool],
        quad_bound: f64,
        abs_bound: f64,
    ) -> Result<Self, CvxError> {
        if space.k != basis.len() {
            return Err(CvxError::ObjectiveLength { expected: basis.len(), got: space.k });
        }
        if active.len() != space.n {
            return Err(CvxError::InvalidParameter(format!("{} activity flags for {} points", active.len(), space.n)));
        }
        if !(quad_bound >= 0.0) || !(abs_bound >= 0.0) || !quad_bound.is_finite() || !abs_bound.is_finite() {
            return Err(CvxError::InvalidParameter(format!("bounds {quad_bound}, {abs_bound}")));
        }
        let uniq = &space.unique;
        let mut counts = vec![0.0; uniq.len()];
        for (&j, &a) in uniq.index_of.iter().zip(active) {
            if a {
                counts[j] += 1.0;
            }
        }
        let abs_idx: Vec<usize> = (0..uniq.len()).filter(|&j| counts[j] > 0.0).collect();
        let abs_counts: Vec<f64> = abs_idx.iter().map(|&j| counts[j]).collect();
        let r = space.rank();
        let mut u = DMatrix::zeros(abs_idx.len(), r);
        for (i, &j) in abs_idx.iter().enumerate() {
            let wu = space.whiten(uniq.row(j));
            for c in 0..r {
                u[(i, c)] = wu[c];
            }
        }
        let mut h = Sha256::new();
        h.update(space.fingerprint);
        for a in active {
            h.update([u8::from(*a)]);
        }
        h.update(quad_bound.to_le_bytes());
        h.update(abs_bound.to_le_bytes());
        let fingerprint = hex(&h.finalize());
        Ok(ConstraintSet { basis, space, quad_bound, abs_bound, abs_idx, abs_counts, u, fingerprint })
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn row_space(&self) -> &Arc<RowSpace> {
        &self.space
    }

    pub fn quad_bound(&self) -> f64 {
        self.quad_bound
    }

    pub fn abs_bound(&self) -> f64 {
        self.abs_bound
    }

    pub fn row_weight(&self) -> f64 {
        1.0 / self.space.n as f64
    }

    /// Number of reference points with `f = 1`.
    pub fn active_count(&self) -> usize {
        self.abs_counts.iter().sum::<f64>() as usize
    }

    /// Feature rows `m(x)` of the active reference points (with repetition).
    pub fn abs_rows(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for (&j, &c) in self.abs_idx.iter().zip(&self.abs_counts) {
            for _ in 0..c as usize {
                out.push(self.space.unique.row(j).to_vec());
            }
        }
        out
    }

    /// Empirical second-moment matrix of the reference sample.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.space.k;
        let mut g = DMatrix::zeros(k, k);
        let uniq = &self.space.unique;
        for j in 0..uniq.len() {
            let m = DVector::from_column_slice(uniq.row(j));
            g += (&m * m.transpose()) * uniq.count(j);
        }
        g /= self.space.n as f64;
        (&g + g.transpose()) * 0.5
    }

    pub fn projector(&self) -> DMatrix<f64> {
        self.space.projector()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// `(E_S[p^2], E_S[f |p|])` for coefficients `c`, evaluated on the original features.
    pub fn constraint_values(&self, c: &[f64]) -> (f64, f64) {
        let uniq = &self.space.unique;
        let vals: Vec<f64> = (0..uniq.len()).map(|j| dot(uniq.row(j), c)).collect();
        let quad: f64 = (0..uniq.len()).map(|j| uniq.count(j) * vals[j] * vals[j]).sum();
        let abs: f64 = self.abs_idx.iter().zip(&self.abs_counts).map(|(&j, &w)| w * vals[j].abs()).sum();
        let n = self.space.n as f64;
        (quad / n, abs / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Solved in closed form (zero objective, inactive or degenerate constraint).
    ClosedForm,
    /// Barrier method reached the optimality tolerance.
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSolution {
    /// Position of the classifier in the family, when solved for one.
    pub classifier: usize,
    pub coefficients: Vec<f64>,
    pub value: f64,
    pub quad_residual: f64,
    pub abs_residual: f64,
    pub status: SolveStatus,
    pub newton_steps: usize,
}

/// The whitened, normalized problem
/// `max q.y  s.t. |y| <= 1, sum_i w_i |u_i.y| <= budget`.
struct Normalized<'a> {
    q: DVector<f64>,
    u: &'a DMatrix<f64>,
    w: Vec<f64>,
    budget: f64,
}

impl Normalized<'_> {
    fn weighted_l1(&self, y: &DVector<f64>) -> f64 {
        let uy = self.u * y;
        uy.iter().zip(&self.w).map(|(v, w)| w * v.abs()).sum()
    }
}

/// Maximizes `a . c` over the constraint set.
pub fn solve_witness(a: &[f64], cs: &ConstraintSet, opts: &SolverOptions) -> Result<WitnessSolution, CvxError> {
    let k = cs.basis.len();
    if a.len() != k {
        return Err(CvxError::ObjectiveLength { expected: k, got: a.len() });
    }
    let at = cs.space.whiten(a);
    let anorm = at.norm();
    let radius = cs.quad_bound.sqrt();
    if anorm == 0.0 || radius == 0.0 {
        return Ok(finish(a, cs, vec![0.0; k], SolveStatus::ClosedForm, 0, opts));
    }
    let n = cs.space.n as f64;
    let prob = Normalized {
        q: &at / anorm,
        u: &cs.u,
        w: cs.abs_counts.iter().map(|c| c / n).collect(),
        budget: cs.abs_bound / radius,
    };
    let (y, status, steps) = if prob.weighted_l1(&prob.q) <= prob.budget {
        (prob.q.clone(), SolveStatus::ClosedForm, 0)
    } else if prob.budget == 0.0 {
        (null_space_direction(&prob), SolveStatus::ClosedForm, 0)
    } else {
        let scale = radius * anorm;
        let (y, steps) = barrier(&prob, scale, opts)?;
        (y, SolveStatus::Converged, steps)
    };
    let c = cs.space.unwhiten(&(y * radius));
    Ok(finish(a, cs, c, status, steps, opts))
}

/// Shrinks `c` onto the feasible set if rounding pushed it out, then reports.
fn finish(
    a: &[f64],
    cs: &ConstraintSet,
    mut c: Vec<f64>,
    status: SolveStatus,
    newton_steps: usize,
    opts: &SolverOptions,
) -> WitnessSolution {
    let (mut quad, mut abs) = cs.constraint_values(&c);
    let slack = 0.5 * opts.feas_tol;
    if quad > cs.quad_bound + slack || abs > cs.abs_bound + slack {
        // Both constraints are positively homogeneous in c.
        let mut kappa: f64 = 1.0;
        if quad > cs.quad_bound {
            kappa = kappa.min((cs.quad_bound / quad).sqrt());
        }
        if abs > cs.abs_bound {
            kappa = kappa.min(cs.abs_bound / abs);
        }
        kappa *= 1.0 - 4.0 * f64::EPSILON;
        for v in &mut c {
            *v *= kappa;
        }
        (quad, abs) = cs.constraint_values(&c);
    }
    WitnessSolution {
        classifier: 0,
        value: dot(a, &c),
        coefficients: c,
        quad_residual: (quad - cs.quad_bound).max(0.0),
        abs_residual: (abs - cs.abs_bound).max(0.0),
        status,
        newton_steps,
    }
}

/// Unit vector along the projection of `q` onto `{y : U y = 0}`.
fn null_space_direction(p: &Normalized<'_>) -> DVector<f64> {
    let r = p.q.len();
    let svd = p.u.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut y = p.q.clone();
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] > RANK_TOL * smax {
            let v = v_t.row(i).transpose();
            let proj = v.dot(&y);
            y -= v * proj;
        }
    }
    let norm = y.norm();
    if norm <= 1e-12 {
        DVector::zeros(r)
    } else {
        y / norm
    }
}

struct Point {
    y: DVector<f64>,
    t: DVector<f64>,
}

/// Barrier value at parameter `s`, or `None` outside the domain.
fn phi(p: &Normalized<'_>, s: f64, pt: &Point) -> Option<f64> {
    let uy = p.u * &pt.y;
    let qq = 1.0 - pt.y.norm_squared();
    let g = p.budget - dot(&p.w, pt.t.as_slice());
    if !(qq > 0.0) || !(g > 0.0) {
        return None;
    }
    let mut val = -s * p.q.dot(&pt.y) - g.ln() - qq.ln();
    for i in 0..uy.len() {
        let a = pt.t[i] - uy[i];
        let b = pt.t[i] + uy[i];
        if !(a > 0.0) || !(b > 0.0) {
            return None;
        }
        val -= a.ln() + b.ln();
    }
    Some(val)
}

fn barrier(p: &Normalized<'_>, scale: f64, opts: &SolverOptions) -> Result<(DVector<f64>, usize), CvxError> {
    let r = p.q.len();
    let m = p.w.len();
    let wsum: f64 = p.w.iter().sum();
    let t0 = 0.5 * p.budget / wsum;
    let mut pt = Point { y: DVector::zeros(r), t: DVector::from_element(m, t0) };
    let nu = (2 * m + 2) as f64;
    let mut s = nu;
    let mu = 10.0;
    let mut steps = 0;
    loop {
        // Centering.
        loop {
            if steps >= opts.max_newton {
                return Err(CvxError::NonConvergence(steps));
            }
            steps += 1;
            let (dy, dt, decrement) = newton_direction(p, s, &pt);
            let base = phi(p, s, &pt).expect("iterate stays interior");
            // The second test stops once progress is below the rounding of the barrier value.
            if decrement / 2.0 < 1e-10 || decrement < 1e-14 * base.abs() {
                break;
            }
            let slope = -decrement;
            let mut alpha = 0.99 * max_step(p, &pt, &dy, &dt).min(1.0 / 0.99);
            let mut accepted = false;
            for _ in 0..80 {
                let trial = Point { y: &pt.y + &dy * alpha, t: &pt.t + &dt * alpha };
                if let Some(v) = phi(p, s, &trial) {
                    if v < base && v <= base + 0.25 * alpha * slope {
                        pt = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // No further progress possible at this precision.
                break;
            }
        }
        let current = scale * p.q.dot(&pt.y);
        if nu / s <= 0.5 * opts.opt_tol * current.max(1.0) / scale {
            return Ok((pt.y, steps));
        }
        s *= mu;
    }
}

/// Largest step keeping the linear constraints and the ball strictly satisfied.
fn max_step(p: &Normalized<'_>, pt: &Point, dy: &DVector<f64>, dt: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    let uy = p.u * &pt.y;
    let udy = p.u * dy;
    for i in 0..uy.len() {
        let a = pt.t[i] - uy[i];
        let da = dt[i] - udy[i];
        if da < 0.0 {
            alpha = alpha.min(-a / da);
        }
        let b = pt.t[i] + uy[i];
        let db = dt[i] + udy[i];
        if db < 0.0 {
            alpha = alpha.min(-b / db);
        }
    }
    let g = p.budget - dot(&p.w, pt.t.as_slice());
    let dg = -dot(&p.w, dt.as_slice());
    if dg < 0.0 {
        alpha = alpha.min(-g / dg);
    }
    // |y + a dy|^2 = 1.
    let aa = dy.norm_squared();
    if aa > 0.0 {
        let bb = 2.0 * pt.y.dot(dy);
        let cc = pt.y.norm_squared() - 1.0;
        let root = (-bb + (bb * bb - 4.0 * aa * cc).sqrt()) / (2.0 * aa);
        alpha = alpha.min(root);
    }
    alpha
}

/// Newton step for the barrier at parameter `s` with the `t` block eliminated.
/// Returns `(dy, dt, lambda^2)`.
fn newton_direction(p: &Normalized<'_>, s: f64, pt: &Point) -> (DVector<f64>, DVector<f64>, f64) {
    let r = p.q.len();
    let m = p.w.len();
    let uy = p.u * &pt.y;
    let qq = 1.0 - pt.y.norm_squared();
    let g = p.budget - dot(&p.w, pt.t.as_slice());
    let rho = 1.0 / (g * g);

    let mut inv_a_minus_inv_b = DVector::zeros(m);
    let mut g_t = DVector::zeros(m);
    let mut e_over_d = DVector::zeros(m);
    let mut inv_d = DVector::zeros(m);
    let mut sqrt_k = DMatrix::zeros(m, r);
    let mut sigma = 0.0;
    for i in 0..m {
        let a = pt.t[i] - uy[i];
        let b = pt.t[i] + uy[i];
        let (a2, b2) = (a * a, b * b);
        inv_a_minus_inv_b[i] = 1.0 / a - 1.0 / b;
        g_t[i] = -1.0 / a - 1.0 / b + p.w[i] / g;
        e_over_d[i] = (a2 - b2) / (a2 + b2);
        inv_d[i] = a2 * b2 / (a2 + b2);
        sigma += p.w[i] * p.w[i] * inv_d[i];
        let c = (4.0 / (a2 + b2)).sqrt();
        for j in 0..r {
            sqrt_k[(i, j)] = c * p.u[(i, j)];
        }
    }
    let g_y = -&p.q * s + p.u.tr_mul(&inv_a_minus_inv_b) + &pt.y * (2.0 / qq);

    let ew: DVector<f64> = e_over_d.component_mul(&DVector::from_column_slice(&p.w));
    let h = p.u.tr_mul(&ew);
    let coef = rho / (1.0 + rho * sigma);
    let mut k = sqrt_k.tr_mul(&sqrt_k);
    for j in 0..r {
        k[(j, j)] += 2.0 / qq;
    }
    k += &pt.y * pt.y.transpose() * (4.0 / (qq * qq));
    k += &h * h.transpose() * coef;

    let wgd: f64 = (0..m).map(|i| p.w[i] * g_t[i] * inv_d[i]).sum();
    let rhs = -&g_y + p.u.tr_mul(&e_over_d.component_mul(&g_t)) - &h * (coef * wgd);
    let dy = match k.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => k.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(r)),
    };

    let udy = p.u * &dy;
    let v: DVector<f64> = DVector::from_fn(m, |i, _| -g_t[i] - e_over_d[i] / inv_d[i] * udy[i]);
    let wvd: f64 = (0..m).map(|i| p.w[i] * v[i] * inv_d[i]).sum();
    let dt = DVector::from_fn(m, |i, _| v[i] * inv_d[i] - coef * p.w[i] * inv_d[i] * wvd);
    let decrement = -(g_y.dot(&dy) + g_t.dot(&dt));
    (dy, dt, decrement)
}

/// `max |p(x)|` over the constraint set. By symmetry of the set under
/// negation this is a single maximization of `p(x)`.
pub fn max_abs_at_point(x: &[f64], cs: &ConstraintSet, opts: &SolverOptions) -> Result<f64, CvxError> {
    let m = cs.basis.features(x)?;
    Ok(solve_witness(&m, cs, opts)?.value.max(0.0))
}

/// Whether `max |p(x)|` over the constraint set exceeds `bound`.
///
/// Closed-form upper and lower bounds on the maximum settle most points; the
/// barrier solve runs only when `bound` falls between them.
pub fn exceeds_bound(x: &[f64], cs: &ConstraintSet, bound: f64, opts: &SolverOptions) -> Result<bool, CvxError> {
    let m = cs.basis.features(x)?;
    let at = cs.space.whiten(&m);
    let radius = cs.quad_bound.sqrt();
    let upper = radius * at.norm();
    if upper <= bound {
        return Ok(false);
    }
    let n = cs.space.n as f64;
    let anorm = at.norm();
    let q = &at / anorm;
    let uq = &cs.u * &q;
    let l1: f64 = uq.iter().zip(&cs.abs_counts).map(|(v, c)| c / n * v.abs()).sum();
    let budget = cs.abs_bound / radius;
    let lower = if l1 <= budget { upper } else { upper * budget / l1 };
    if lower > bound {
        return Ok(true);
    }
    Ok(solve_witness(&m, cs, opts)?.value > bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::hypercube_points;
    use crate::polycore::enumerate_basis;
    use proptest::prelude::*;

    fn constant_set(active: bool, abs_bound: f64) -> ConstraintSet {
        let b = Arc::new(enumerate_basis(1, 0, false).unwrap());
        let s = Sample::from_rows(1, &[vec![0.3]], None).unwrap();
        let fm = FeatureMatrix::new(&b, &s).unwrap();
        let space = Arc::new(RowSpace::new(&fm).unwrap());
        ConstraintSet::new(b, space, &[active], 2.0, abs_bound).unwrap()
    }

    #[test]
    fn bounds_formula() {
        let (qb, ab) = constraint_bounds(1.0, 0.5, 2.0);
        assert_eq!(qb, 2.0);
        assert!((ab - 1.0 / 4.5).abs() < 1e-15);
    }

    #[test]
    fn hypercube_gram_and_projector_are_identity() {
        let b = Arc::new(enumerate_basis(2, 2, true).unwrap());
        let s = Sample::from_rows(2, &hypercube_points(2), None).unwrap();
        let cs = build_constraint_set(&Classifier::Constant(false), &s, b, 1.0, 0.5, 2.0).unwrap();
        let eye = DMatrix::<f64>::identity(4, 4);
        assert!((cs.gram() - &eye).abs().max() < 1e-12);
        assert!((cs.projector() - &eye).abs().max() < 1e-12);
        assert!(cs.abs_rows().is_empty());
    }

    #[test]
    fn zero_objective_gives_zero() {
        let cs = constant_set(true, 0.5);
        let sol = solve_witness(&[0.0], &cs, &SolverOptions::default()).unwrap();
        assert_eq!(sol.coefficients, vec![0.0]);
        assert_eq!(sol.value, 0.0);
    }

    #[test]
    fn ball_only_maximum_is_sqrt_two() {
        let cs = constant_set(false, 0.5);
        let sol = solve_witness(&[1.0], &cs, &SolverOptions::default()).unwrap();
        assert!((sol.value - 2f64.sqrt()).abs() < 1e-12);
        assert!((max_abs_at_point(&[5.0], &cs, &SolverOptions::default()).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn absolute_constraint_binds_first() {
        let cs = constant_set(true, 0.5);
        let sol = solve_witness(&[1.0], &cs, &SolverOptions::default()).unwrap();
        let opts = SolverOptions::default();
        assert!(sol.value >= 0.5 - opts.opt_tol && sol.value <= 0.5 + opts.feas_tol, "{}", sol.value);
        assert!(sol.abs_residual <= 1e-8);
    }

    #[test]
    fn zero_quadratic_bound_forces_zero() {
        let b = Arc::new(enumerate_basis(1, 1, false).unwrap());
        let s = Sample::from_rows(1, &[vec![1.0], vec![2.0]], None).unwrap();
        let fm = FeatureMatrix::new(&b, &s).unwrap();
        let space = Arc::new(RowSpace::new(&fm).unwrap());
        let cs = ConstraintSet::new(b, space, &[true, false], 0.0, 1.0).unwrap();
        assert_eq!(max_abs_at_point(&[3.0], &cs, &SolverOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn rank_deficient_sample_restricts_to_row_space() {
        // Every point has x1 = x2, so x1 - x2 vanishes on the sample.
        let b = Arc::new(enumerate_basis(2, 1, false).unwrap());
        let s = Sample::from_rows(2, &[vec![1.0, 1.0], vec![-1.0, -1.0], vec![0.5, 0.5]], None).unwrap();
        let cs = build_constraint_set(&Classifier::Constant(false), &s, b, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(cs.row_space().rank(), 2);
        let sol = solve_witness(&[0.0, 1.0, -1.0], &cs, &SolverOptions::default()).unwrap();
        assert!(sol.value.abs() < 1e-12);
    }

    fn random_instance(seed: u64, d: usize, n: usize) -> (ConstraintSet, Vec<Vec<f64>>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b = Arc::new(enumerate_basis(d, 2, true).unwrap());
        let pts: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()).collect();
        let s = Sample::from_rows(d, &pts, None).unwrap();
        let f = Classifier::external("x1", |x| x[0] > 0.0);
        let cs = build_constraint_set(&f, &s, b, 1.0, 0.3, 2.0).unwrap();
        let probes: Vec<Vec<f64>> = (0..5).map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
        (cs, probes)
    }

    #[test]
    fn solutions_are_feasible_and_symmetric() {
        let opts = SolverOptions::default();
        for seed in 0..5 {
            let (cs, probes) = random_instance(seed, 4, 60);
            for x in &probes {
                let m = cs.basis().features(x).unwrap();
                let sol = solve_witness(&m, &cs, &opts).unwrap();
                assert!(sol.quad_residual <= opts.feas_tol && sol.abs_residual <= opts.feas_tol);
                let neg: Vec<f64> = sol.coefficients.iter().map(|v| -v).collect();
                let (q, a) = cs.constraint_values(&neg);
                assert!(q <= cs.quad_bound() + opts.feas_tol && a <= cs.abs_bound() + opts.feas_tol);
                // The shortcut decision agrees with the full solve away from the boundary.
                for bound in [0.5 * sol.value, 2.0 * sol.value] {
                    assert_eq!(exceeds_bound(x, &cs, bound, &opts).unwrap(), sol.value > bound);
                }
            }
        }
    }

    #[test]
    fn solves_are_deterministic() {
        let (cs, probes) = random_instance(11, 4, 80);
        let m = cs.basis().features(&probes[0]).unwrap();
        let a = solve_witness(&m, &cs, &SolverOptions::default()).unwrap();
        let b = solve_witness(&m, &cs, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn enlarging_bounds_never_decreases_value(seed in 0u64..1000, grow_q in 1.0f64..3.0, grow_a in 1.0f64..3.0) {
            let (cs, probes) = random_instance(seed, 3, 40);
            let opts = SolverOptions::default();
            let bigger = ConstraintSet::new(
                cs.basis().clone(),
                cs.row_space().clone(),
                &(0..40).map(|i| cs.row_space().unique_rows().index_of()[i]).map(|j| cs.abs_idx.contains(&j)).collect::<Vec<_>>(),
                cs.quad_bound() * grow_q,
                cs.abs_bound() * grow_a,
            ).unwrap();
            let m = cs.basis().features(&probes[0]).unwrap();
            let small = solve_witness(&m, &cs, &opts).unwrap().value;
            let large = solve_witness(&m, &bigger, &opts).unwrap().value;
            prop_assert!(large >= small - 2.0 * opts.opt_tol * small.abs().max(1.0));
        }
    }
}

//! Degree-`l` L1 polynomial regression and threshold rounding.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::classifier::Classifier;
use crate::cvxsub::{CvxError, RowSpace};
use crate::numeric::{dot, row_key};
use crate::polycore::{FeatureMatrix, MonomialBasis, PolyError, Polynomial, Sample};

const MAX_NEWTON: usize = 3000;

#[derive(Debug, Error)]
pub enum L1Error {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Cvx(#[from] CvxError),
    #[error("L1 regression did not converge within {0} Newton steps")]
    NonConvergence(usize),
}

#[derive(Debug, Clone)]
pub struct L1Fit {
    pub poly: Polynomial,
    /// `(1/n) sum |p(x_i) - y_i|`.
    pub objective: f64,
    pub newton_steps: usize,
}

/// One distinct (feature row, label) pair.
struct Terms {
    /// Whitened rows, `m x r`.
    u: DMatrix<f64>,
    y: DVector<f64>,
    w: Vec<f64>,
}

fn mean_abs_residual(fm: &FeatureMatrix, labels: &[u8], c: &[f64]) -> f64 {
    let total: f64 = fm.rows().zip(labels).map(|(m, &y)| (dot(m, c) - y as f64).abs()).sum();
    total / fm.nrows() as f64
}

/// Minimizes the empirical mean absolute error over polynomials on `basis`.
///
/// The linear program is solved by a barrier method to duality gap
/// `opt_tol / 2`, then moved to a nearby vertex when that does not increase
/// the objective.
pub fn fit_l1(basis: Arc<MonomialBasis>, s: &Sample, opt_tol: f64) -> Result<L1Fit, L1Error> {
    let labels = s.require_labels()?;
    if s.is_empty() {
        return Err(PolyError::EmptySample.into());
    }
    let fm = FeatureMatrix::new(&basis, s)?;
    let space = RowSpace::new(&fm)?;
    let r = space.rank();
    let n = s.len() as f64;

    let mut seen: HashMap<(Vec<u64>, u8), usize> = HashMap::new();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut ys = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for (m, &y) in fm.rows().zip(labels) {
        let next = ws.len();
        let j = *seen.entry((row_key(m), y)).or_insert(next);
        if j == next {
            rows.push(space.whiten(m));
            ys.push(y as f64);
            ws.push(0.0);
        }
        ws[j] += 1.0 / n;
    }
    let m = ws.len();
    let terms = Terms { u: DMatrix::from_fn(m, r, |i, j| rows[i][j]), y: DVector::from_vec(ys), w: ws };

    let (z, steps) = barrier(&terms, opt_tol)?;
    let mut c = space.unwhiten(&z);
    let mut objective = mean_abs_residual(&fm, labels, &c);
    if let Some(zv) = vertex(&terms, &z) {
        let cv = space.unwhiten(&zv);
        let ov = mean_abs_residual(&fm, labels, &cv);
        if ov <= objective {
            c = cv;
            objective = ov;
        }
    }
    Ok(L1Fit { poly: Polynomial::new(basis, c)?, objective, newton_steps: steps })
}

fn barrier_value(p: &Terms, s: f64, z: &DVector<f64>, t: &DVector<f64>) -> Option<f64> {
    let res = &p.u * z - &p.y;
    let mut v = s * dot(&p.w, t.as_slice());
    for i in 0..res.len() {
        let a = t[i] - res[i];
        let b = t[i] + res[i];
        if !(a > 0.0) || !(b > 0.0) {
            return None;
        }
        v -= a.ln() + b.ln();
    }
    Some(v)
}

fn barrier(p: &Terms, opt_tol: f64) -> Result<(DVector<f64>, usize), L1Error> {
    let r = p.u.ncols();
    let m = p.w.len();
    let mut z = DVector::zeros(r);
    let mut t = p.y.map(|v| v.abs() + 1.0);
    let nu = (2 * m) as f64;
    let mut s = nu;
    let mut steps = 0;
    loop {
        loop {
            if steps >= MAX_NEWTON {
                return Err(L1Error::NonConvergence(steps));
            }
            steps += 1;
            let res = &p.u * &z - &p.y;
            let mut g_t = DVector::zeros(m);
            let mut inv_a_minus_inv_b = DVector::zeros(m);
            let mut e_over_d = DVector::zeros(m);
            let mut inv_d = DVector::zeros(m);
            let mut sqrt_k = DMatrix::zeros(m, r);
            for i in 0..m {
                let a = t[i] - res[i];
                let b = t[i] + res[i];
                let (a2, b2) = (a * a, b * b);
                g_t[i] = s * p.w[i] - 1.0 / a - 1.0 / b;
                inv_a_minus_inv_b[i] = 1.0 / a - 1.0 / b;
                e_over_d[i] = (a2 - b2) / (a2 + b2);
                inv_d[i] = a2 * b2 / (a2 + b2);
                let c = (4.0 / (a2 + b2)).sqrt();
                for j in 0..r {
                    sqrt_k[(i, j)] = c * p.u[(i, j)];
                }
            }
            let g_z = p.u.tr_mul(&inv_a_minus_inv_b);
            let k = sqrt_k.tr_mul(&sqrt_k);
            let rhs = -&g_z + p.u.tr_mul(&e_over_d.component_mul(&g_t));
            let dz = match k.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => k.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(r)),
            };
            let udz = &p.u * &dz;
            let dt = DVector::from_fn(m, |i, _| (-g_t[i]) * inv_d[i] - e_over_d[i] * udz[i]);
            let decrement = -(g_z.dot(&dz) + g_t.dot(&dt));
            let base = barrier_value(p, s, &z, &t).expect("iterate stays interior");
            if decrement / 2.0 < 1e-10 || decrement < 1e-14 * base.abs() {
                break;
            }
            // Fraction to the boundary.
            let mut alpha_max = f64::INFINITY;
            for i in 0..m {
                let a = t[i] - res[i];
                let da = dt[i] - udz[i];
                if da < 0.0 {
                    alpha_max = alpha_max.min(-a / da);
                }
                let b = t[i] + res[i];
                let db = dt[i] + udz[i];
                if db < 0.0 {
                    alpha_max = alpha_max.min(-b / db);
                }
            }
            let mut alpha = (0.99 * alpha_max).min(1.0);
            let mut accepted = false;
            for _ in 0..80 {
                let zt = &z + &dz * alpha;
                let tt = &t + &dt * alpha;
                if let Some(v) = barrier_value(p, s, &zt, &tt) {
                    if v < base && v <= base - 0.25 * alpha * decrement {
                        z = zt;
                        t = tt;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if nu / s <= 0.5 * opt_tol {
            return Ok((z, steps));
        }
        s *= 10.0;
    }
}

/// Interpolates the `r` linearly independent terms with the smallest residuals.
fn vertex(p: &Terms, z: &DVector<f64>) -> Option<DVector<f64>> {
    let r = p.u.ncols();
    let res = &p.u * z - &p.y;
    let mut order: Vec<usize> = (0..res.len()).collect();
    order.sort_by(|&a, &b| res[a].abs().total_cmp(&res[b].abs()).then(a.cmp(&b)));
    let mut chosen = Vec::with_capacity(r);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(r);
    for &i in &order {
        if chosen.len() == r {
            break;
        }
        let row = p.u.row(i).transpose();
        let mut v = row.clone();
        for q in &ortho {
            let proj = q.dot(&v);
            v -= q * proj;
        }
        let nv = v.norm();
        if nv > 1e-8 * row.norm().max(1e-300) {
            ortho.push(v / nv);
            chosen.push(i);
        }
    }
    if chosen.len() < r {
        return None;
    }
    let a = DMatrix::from_fn(r, r, |i, j| p.u[(chosen[i], j)]);
    let b = DVector::from_fn(r, |i, _| p.y[chosen[i]]);
    a.lu().solve(&b)
}

/// Empirical 0/1 error of `1{v >= theta}` against labels, for sorted values.
fn errors_at(sorted: &[(f64, u8)], ones_before: &[usize], zeros_total: usize, theta: f64) -> usize {
    let k = sorted.partition_point(|(v, _)| *v < theta);
    let ones_below = ones_before[k];
    let zeros_below = k - ones_below;
    ones_below + (zeros_total - zeros_below)
}

/// Picks the threshold with the fewest training mistakes among `1/2`, the
/// midpoints of consecutive distinct values of `p`, and one value below and
/// above all of them. Ties prefer `1/2`, then the smaller threshold.
pub fn threshold_scan(values: &[f64], labels: &[u8]) -> (f64, usize) {
    let mut sorted: Vec<(f64, u8)> = values.iter().copied().zip(labels.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ones_before = Vec::with_capacity(sorted.len() + 1);
    ones_before.push(0);
    for (_, y) in &sorted {
        ones_before.push(ones_before.last().unwrap() + usize::from(*y == 1));
    }
    let zeros_total = sorted.len() - ones_before[sorted.len()];
    let mut best = (0.5, errors_at(&sorted, &ones_before, zeros_total, 0.5));
    let mut candidates = Vec::new();
    if let (Some(first), Some(last)) = (sorted.first(), sorted.last()) {
        candidates.push(first.0 - 1.0);
        candidates.push(last.0 + 1.0);
    }
    for pair in sorted.windows(2) {
        if pair[0].0 < pair[1].0 {
            candidates.push(0.5 * (pair[0].0 + pair[1].0));
        }
    }
    candidates.sort_by(f64::total_cmp);
    for theta in candidates {
        let e = errors_at(&sorted, &ones_before, zeros_total, theta);
        if e < best.1 {
            best = (theta, e);
        }
    }
    (best.0, best.1)
}

/// `1{p(x) >= theta*}` with `theta*` from [`threshold_scan`].
pub fn threshold_round(p: &Polynomial, s: &Sample) -> Result<Classifier, PolyError> {
    let labels = s.require_labels()?;
    if s.dim() != p.basis().dim() {
        return Err(PolyError::DimensionMismatch { expected: p.basis().dim(), got: s.dim() });
    }
    let fm = FeatureMatrix::new(p.basis(), s)?;
    let values: Vec<f64> = fm.rows().map(|m| p.eval_features(m)).collect();
    let (theta, _) = threshold_scan(&values, labels);
    Ok(Classifier::poly_threshold(p.clone(), theta))
}

/// Fraction of labeled points where `h` disagrees with the label.
pub fn empirical_error(h: &Classifier, s: &Sample) -> Result<f64, PolyError> {
    let labels = s.require_labels()?;
    if s.is_empty() {
        return Err(PolyError::EmptySample);
    }
    let wrong = s.points().zip(labels).filter(|(x, y)| u8::from(h.eval(x)) != **y).count();
    Ok(wrong as f64 / s.len() as f64)
}

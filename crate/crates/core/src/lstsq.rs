//! Dense least-squares kernels shared by the estimators and the threshold search.
//!
//! Full-rank problems go through a Householder QR. Rank is judged per column
//! against that column's own norm, so rescaling a column never changes the
//! verdict. Rank-deficient (or wide) problems fall back to an SVD
//! pseudo-inverse, which yields the minimum-norm minimizer.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct LsSolution {
    pub beta: DVector<f64>,
    pub rank: usize,
    /// Residual sum of squares, not divided by n.
    pub rss: f64,
}

fn rank_tolerance(rows: usize, cols: usize) -> f64 {
    10.0 * rows.max(cols) as f64 * f64::EPSILON
}

/// Returns true when every diagonal entry of `r` is large relative to the
/// norm of the matching column of `x`.
fn qr_full_rank(x: &DMatrix<f64>, r: &DMatrix<f64>) -> bool {
    let tol = rank_tolerance(x.nrows(), x.ncols());
    (0..x.ncols()).all(|j| {
        let norm = x.column(j).norm();
        norm > 0.0 && r[(j, j)].abs() > tol * norm
    })
}

fn tail_sum_of_squares(c: &DVector<f64>, from: usize) -> f64 {
    c.rows_range(from..).iter().map(|v| v * v).sum()
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> LsSolution {
    let (n, p) = x.shape();
    if p == 0 {
        return LsSolution {
            beta: DVector::zeros(0),
            rank: 0,
            rss: y.norm_squared(),
        };
    }
    if n >= p {
        let qr = x.clone().qr();
        let r = qr.r();
        if qr_full_rank(x, &r) {
            let mut c = y.clone();
            qr.q_tr_mul(&mut c);
            let rhs = c.rows(0, p).into_owned();
            if let Some(beta) = r.solve_upper_triangular(&rhs) {
                return LsSolution {
                    beta,
                    rank: p,
                    rss: tail_sum_of_squares(&c, p),
                };
            }
        }
    }
    min_norm_solution(x, y)
}

fn min_norm_solution(x: &DMatrix<f64>, y: &DVector<f64>) -> LsSolution {
    let (n, p) = x.shape();
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * rank_tolerance(n, p);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = match svd.solve(y, tol) {
        Ok(beta) => beta,
        Err(_) => DVector::zeros(p),
    };
    let rss = (y - x * &beta).norm_squared();
    LsSolution { beta, rank, rss }
}

/// Residual sums of squares for every column prefix of `x`: entry `m` is the
/// RSS of the least-squares fit on the first `m` columns (entry 0 is `‖y‖²`).
///
/// Returns `None` when `x` is wide or any prefix is rank deficient; callers
/// then refit each prefix separately.
pub(crate) fn prefix_rss(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<Vec<f64>> {
    let (n, p) = x.shape();
    if n < p {
        return None;
    }
    let qr = x.clone().qr();
    if !qr_full_rank(x, &qr.r()) {
        return None;
    }
    let mut c = y.clone();
    qr.q_tr_mul(&mut c);
    // Accumulate from the bottom so each entry is a plain sum of squares.
    let mut out = vec![0.0; p + 1];
    let mut acc = tail_sum_of_squares(&c, p);
    out[p] = acc;
    for m in (0..p).rev() {
        acc += c[m] * c[m];
        out[m] = acc;
    }
    Some(out)
}

/// Solves `(XᵀX + diag(w)) β = Xᵀy` for nonnegative weights `w` by least
/// squares on the augmented system `[diag(√w); X] β ≈ [0; y]`.
///
/// Penalty rows sit on top: they can be many orders of magnitude heavier than
/// the data rows, and Householder QR stays accurate when the heavy rows come
/// first. Returns `None` when the system is singular.
pub(crate) fn weighted_ridge(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &[f64],
) -> Option<DVector<f64>> {
    let (n, p) = x.shape();
    debug_assert_eq!(weights.len(), p);
    if p == 0 {
        return Some(DVector::zeros(0));
    }
    let mut aug = DMatrix::zeros(n + p, p);
    for (j, &w) in weights.iter().enumerate() {
        aug[(j, j)] = w.sqrt();
    }
    aug.view_mut((p, 0), (n, p)).copy_from(x);
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(p, n).copy_from(y);

    let qr = aug.clone().qr();
    let r = qr.r();
    if !qr_full_rank(&aug, &r) {
        return None;
    }
    qr.q_tr_mul(&mut rhs);
    r.solve_upper_triangular(&rhs.rows(0, p).into_owned())
}

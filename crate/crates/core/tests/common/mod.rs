#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use varthresh::Dataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian design with a sparse signal; `n` in 10..40, `p` in 1..=max_p.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_p: usize) -> Dataset {
    let p = rng.random_range(1..=max_p);
    let n = rng.random_range(10..40);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta = DVector::from_fn(p, |_, _| {
        if rng.random_bool(0.5) {
            rng.random_range(-2.0..2.0)
        } else {
            0.0
        }
    });
    let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &x * beta + noise;
    Dataset::unlabeled(x, y).unwrap()
}

/// Residual mean square of the least-squares fit on `cols`, solved through
/// the normal equations with a Cholesky factor.
pub fn subset_mse_oracle(data: &Dataset, cols: &[usize]) -> f64 {
    let y = data.response();
    let n = data.n() as f64;
    if cols.is_empty() {
        return y.dot(y) / n;
    }
    let xs = data.design().select_columns(cols);
    let gram = xs.transpose() * &xs;
    let rhs = xs.transpose() * y;
    let beta = gram
        .cholesky()
        .expect("oracle needs a full-rank subset")
        .solve(&rhs);
    let r = y - xs * beta;
    r.dot(&r) / n
}

//! Initial coefficient estimates and the restricted least-squares refit.
//!
//! Three estimators are available: ordinary least squares, ridge with a fixed
//! penalty, and adaptive ridge (iteratively reweighted ridge with weights
//! `1/β_j²`). None of them adds an intercept; prepend a column of ones to the
//! design if one is wanted.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstsq;

/// Magnitudes below this value are replaced by it when forming the adaptive
/// ridge weights, keeping `1/β_j²` finite.
pub const AR_FLOOR: f64 = 1e-8;

/// A regression problem: `n × p` design, response of length `n`, one label per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    design: DMatrix<f64>,
    response: DVector<f64>,
    labels: Vec<String>,
}

impl Dataset {
    pub fn new(design: DMatrix<f64>, response: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        let (n, p) = design.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidDataset(format!(
                "design must be non-empty, got {n} x {p}"
            )));
        }
        if response.len() != n {
            return Err(Error::InvalidDataset(format!(
                "response has {} entries but design has {n} rows",
                response.len()
            )));
        }
        if labels.len() != p {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {p} columns",
                labels.len()
            )));
        }
        let mut seen = HashSet::with_capacity(p);
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidDataset(format!("duplicate label `{dup}`")));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("design has non-finite entries".into()));
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("response has non-finite entries".into()));
        }
        Ok(Self {
            design,
            response,
            labels,
        })
    }

    /// Builds a dataset with default labels `X1..Xp`.
    pub fn unlabeled(design: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        let labels = default_labels(design.ncols());
        Self::new(design, response, labels)
    }

    /// Row-major convenience constructor.
    pub fn from_rows(n: usize, p: usize, design: &[f64], response: &[f64]) -> Result<Self> {
        if design.len() != n * p {
            return Err(Error::InvalidDataset(format!(
                "expected {} design entries, got {}",
                n * p,
                design.len()
            )));
        }
        Self::unlabeled(
            DMatrix::from_row_slice(n, p, design),
            DVector::from_column_slice(response),
        )
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>, Vec<String>) {
        (self.design, self.response, self.labels)
    }
}

pub(crate) fn default_labels(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}

/// Which estimator produced a coefficient vector, with the tuning values it used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Ols,
    Ridge { lambda: f64 },
    AdaptiveRidge { lambda: f64, xi: f64, steps: usize },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ols => write!(f, "OLS"),
            Method::Ridge { lambda } => write!(f, "Ridge(lambda={lambda})"),
            Method::AdaptiveRidge { lambda, xi, steps } => {
                write!(f, "AR(lambda={lambda}, xi={xi}, s={steps})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub values: Vec<f64>,
    pub method: Method,
    /// Numerical column rank of the design seen by the fit. Below `p` only for
    /// OLS on a rank-deficient design, in which case `values` is the
    /// minimum-norm least-squares solution.
    pub rank: usize,
}

impl CoefficientVector {
    pub fn new(values: Vec<f64>, method: Method) -> Self {
        let rank = values.len();
        Self {
            values,
            method,
            rank,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.values.len()
    }

    /// Fails with [`Error::RankDeficient`] for callers that need a unique fit.
    pub fn require_full_rank(&self) -> Result<()> {
        if self.is_full_rank() {
            Ok(())
        } else {
            Err(Error::RankDeficient {
                rank: self.rank,
                columns: self.values.len(),
            })
        }
    }
}

/// Ridge penalty, either fixed or `√n` resolved against the data size.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RidgeLambda {
    #[default]
    SqrtN,
    Fixed(f64),
}

impl RidgeLambda {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            RidgeLambda::SqrtN => (n as f64).sqrt(),
            RidgeLambda::Fixed(v) => v,
        }
    }
}

impl FromStr for RidgeLambda {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("sqrt_n") {
            return Ok(RidgeLambda::SqrtN);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad ridge lambda `{s}`")))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ridge lambda must be finite and nonnegative, got {v}"
            )));
        }
        Ok(RidgeLambda::Fixed(v))
    }
}

impl fmt::Display for RidgeLambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RidgeLambda::SqrtN => f.write_str("sqrt_n"),
            RidgeLambda::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Estimator choice plus tuning, before it has seen any data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorConfig {
    Ols,
    Ridge {
        lambda: RidgeLambda,
    },
    AdaptiveRidge {
        lambda: RidgeLambda,
        xi: f64,
        steps: usize,
    },
}

impl EstimatorConfig {
    pub fn fit(&self, data: &Dataset) -> Result<CoefficientVector> {
        match *self {
            EstimatorConfig::Ols => Ok(fit_ols(data)),
            EstimatorConfig::Ridge { lambda } => fit_ridge(data, lambda.resolve(data.n())),
            EstimatorConfig::AdaptiveRidge { lambda, xi, steps } => {
                fit_adaptive_ridge(data, lambda.resolve(data.n()), xi, steps)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorConfig::Ols => "ols",
            EstimatorConfig::Ridge { .. } => "ridge",
            EstimatorConfig::AdaptiveRidge { .. } => "ar",
        }
    }
}

impl fmt::Display for EstimatorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorConfig::Ols => f.write_str("ols"),
            EstimatorConfig::Ridge { lambda } => write!(f, "ridge(lambda={lambda})"),
            EstimatorConfig::AdaptiveRidge { lambda, xi, steps } => {
                write!(f, "ar(lambda={lambda}, xi={xi}, steps={steps})")
            }
        }
    }
}

/// Least-squares fit of the full design. On a rank-deficient design the
/// minimum-norm solution is returned and `rank` records the deficiency.
pub fn fit_ols(data: &Dataset) -> CoefficientVector {
    let sol = lstsq::least_squares(data.design(), data.response());
    CoefficientVector {
        values: sol.beta.as_slice().to_vec(),
        method: Method::Ols,
        rank: sol.rank,
    }
}

/// `(XᵀX + λI)⁻¹XᵀY`.
pub fn fit_ridge(data: &Dataset, lambda: f64) -> Result<CoefficientVector> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let weights = vec![lambda; data.p()];
    let beta = lstsq::weighted_ridge(data.design(), data.response(), &weights)
        .ok_or(Error::SingularSystem)?;
    Ok(CoefficientVector::new(
        beta.as_slice().to_vec(),
        Method::Ridge { lambda },
    ))
}

/// Diagonal of the adaptive ridge penalty for the current iterate, `ξ / max(|β_j|, floor)²`.
pub fn adaptive_weights(beta: &[f64], xi: f64) -> Vec<f64> {
    beta.iter()
        .map(|b| {
            let m = b.abs().max(AR_FLOOR);
            xi / (m * m)
        })
        .collect()
}

/// Adaptive ridge after exactly `steps` reweighting iterations, started from
/// the ridge fit with penalty `lambda`.
pub fn fit_adaptive_ridge(
    data: &Dataset,
    lambda: f64,
    xi: f64,
    steps: usize,
) -> Result<CoefficientVector> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "adaptive ridge xi must be positive, got {xi}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "adaptive ridge needs at least one step".into(),
        ));
    }
    let mut beta = fit_ridge(data, lambda)?.values;
    for _ in 0..steps {
        let weights = adaptive_weights(&beta, xi);
        let next = lstsq::weighted_ridge(data.design(), data.response(), &weights)
            .ok_or(Error::SingularSystem)?;
        beta = next.as_slice().to_vec();
    }
    Ok(CoefficientVector::new(
        beta,
        Method::AdaptiveRidge { lambda, xi, steps },
    ))
}

/// Column indices kept in a restricted fit, sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Support {
    retained: Vec<usize>,
}

impl Support {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate support index {}",
                w[0]
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= p) {
            return Err(Error::InvalidArgument(format!(
                "support index {bad} out of range for p = {p}"
            )));
        }
        Ok(Self { retained: indices })
    }

    pub fn full(p: usize) -> Self {
        Self {
            retained: (0..p).collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.retained
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.retained.binary_search(&j).is_ok()
    }
}

/// Least-squares fit on a subset of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedFit {
    /// One coefficient per retained column, in support order.
    pub coefficients: Vec<f64>,
    /// `(1/n)‖Y − X_R β_R‖²`.
    pub risk: f64,
    pub rank: usize,
}

impl RestrictedFit {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.coefficients.len()
    }
}

pub fn least_squares_on_support(data: &Dataset, support: &Support) -> Result<RestrictedFit> {
    if let Some(&bad) = support.indices().iter().find(|&&j| j >= data.p()) {
        return Err(Error::InvalidArgument(format!(
            "support index {bad} out of range for p = {}",
            data.p()
        )));
    }
    let x = data.design().select_columns(support.indices());
    let sol = lstsq::least_squares(&x, data.response());
    Ok(RestrictedFit {
        coefficients: sol.beta.as_slice().to_vec(),
        risk: sol.rss / data.n() as f64,
        rank: sol.rank,
    })
}

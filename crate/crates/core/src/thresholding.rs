//! Threshold-path construction and penalized threshold selection.
//!
//! For a decreasing path `δ_1 > … > δ_K` and an initial estimate `β̂`, level
//! `k` excludes every column with `|β̂_j| ≤ δ_k` and refits least squares on
//! the rest. The selected level minimizes `risk_k + P_k` with the SWIC-type
//! penalty `P_k = (c / δ_k^r) · ln n / √n`, ties going to the smallest `k`
//! (the largest threshold).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{least_squares_on_support, CoefficientVector, Dataset, RestrictedFit, Support};
use crate::lstsq;

/// Default transition width of the cubic spline.
pub const DEFAULT_SPLINE_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Hard cut: weight 0 for `|b| ≤ δ`, 1 otherwise.
    #[default]
    Step,
    /// Cubic spline rising from 0 at `δ` to 1 at `δ + width`.
    Spline { width: f64 },
}

/// Spline ramp `τ(b)` for `b ≥ 0`.
pub fn tau_spline(b: f64, delta: f64, h: f64) -> f64 {
    let mid = delta + 0.5 * h;
    let end = delta + h;
    let scale = 4.0 / (h * h * h);
    if b <= delta {
        0.0
    } else if b <= mid {
        scale * (b - delta).powi(3)
    } else if b < end {
        scale * (b - end).powi(3) + 1.0
    } else {
        1.0
    }
}

/// Thresholding weight `t(b) = τ(|b|)` (or the step function).
pub fn t_threshold(b: f64, delta: f64, mode: ThresholdMode) -> f64 {
    match mode {
        ThresholdMode::Step => {
            if b.abs() <= delta {
                0.0
            } else {
                1.0
            }
        }
        ThresholdMode::Spline { width } => tau_spline(b.abs(), delta, width),
    }
}

/// Strictly decreasing positive thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPath {
    deltas: Vec<f64>,
    mode: ThresholdMode,
}

impl ThresholdPath {
    pub fn new(deltas: Vec<f64>, mode: ThresholdMode) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::InvalidArgument("threshold path is empty".into()));
        }
        if let Some(&d) = deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::NonPositiveThreshold(d));
        }
        if deltas.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidArgument(
                "thresholds must be strictly decreasing".into(),
            ));
        }
        if let ThresholdMode::Spline { width } = mode {
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "spline width must be positive, got {width}"
                )));
            }
        }
        Ok(Self { deltas, mode })
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn mode(&self) -> ThresholdMode {
        self.mode
    }

    pub fn with_mode(self, mode: ThresholdMode) -> Result<Self> {
        Self::new(self.deltas, mode)
    }
}

/// Distinct nonzero magnitudes of `β̂`, largest first.
pub fn build_empirical_path(beta_hat: &CoefficientVector) -> Result<ThresholdPath> {
    let mut mags: Vec<f64> = beta_hat
        .values
        .iter()
        .map(|b| b.abs())
        .filter(|&m| m > 0.0)
        .collect();
    if mags.is_empty() {
        return Err(Error::AllZero);
    }
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.dedup();
    ThresholdPath::new(mags, ThresholdMode::Step)
}

/// Splits `[p]` into the excluded set `{j : |β̂_j| ≤ δ}` and the retained support.
pub fn support_at_threshold(beta_hat: &[f64], delta: f64) -> (Vec<usize>, Support) {
    let (excluded, retained): (Vec<usize>, Vec<usize>) =
        (0..beta_hat.len()).partition(|&j| beta_hat[j].abs() <= delta);
    let support = Support::new(retained, beta_hat.len()).expect("partition yields valid indices");
    (excluded, support)
}

/// Minimum of the thresholded empirical risk at one threshold.
///
/// In step mode this is the least-squares refit on the retained columns. In
/// spline mode the retained columns are first multiplied by their spline
/// weights, which is the literal transformed problem; the minimum is the same
/// because a positive column rescaling does not change the column space.
pub fn min_thresholded_risk(
    data: &Dataset,
    beta_hat: &CoefficientVector,
    delta: f64,
    mode: ThresholdMode,
) -> Result<RestrictedFit> {
    check_dims(data, beta_hat)?;
    if !(delta > 0.0) {
        return Err(Error::NonPositiveThreshold(delta));
    }
    match mode {
        ThresholdMode::Step => {
            let (_, support) = support_at_threshold(&beta_hat.values, delta);
            least_squares_on_support(data, &support)
        }
        ThresholdMode::Spline { .. } => Ok(spline_weighted_fit(data, &beta_hat.values, delta, mode)),
    }
}

fn spline_weighted_fit(data: &Dataset, beta: &[f64], delta: f64, mode: ThresholdMode) -> RestrictedFit {
    let weighted: Vec<(usize, f64)> = beta
        .iter()
        .enumerate()
        .map(|(j, &b)| (j, t_threshold(b, delta, mode)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let x = data.design();
    let mut scaled = DMatrix::zeros(data.n(), weighted.len());
    for (col, &(j, w)) in weighted.iter().enumerate() {
        scaled.set_column(col, &(x.column(j) * w));
    }
    let sol = lstsq::least_squares(&scaled, data.response());
    RestrictedFit {
        coefficients: sol.beta.as_slice().to_vec(),
        risk: sol.rss / data.n() as f64,
        rank: sol.rank,
    }
}

fn check_dims(data: &Dataset, beta_hat: &CoefficientVector) -> Result<()> {
    if beta_hat.len() != data.p() {
        return Err(Error::InvalidArgument(format!(
            "coefficient vector has length {} but dataset has p = {}",
            beta_hat.len(),
            data.p()
        )));
    }
    Ok(())
}

/// `α(δ) = c / δ^r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub c: f64,
    pub r: f64,
}

impl PenaltySpec {
    pub fn new(c: f64, r: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "penalty needs c > 0 and r > 0, got c = {c}, r = {r}"
            )));
        }
        Ok(Self { c, r })
    }

    /// The weak, medium and strong pairs used throughout the simulation tables.
    pub fn standard_grid() -> [PenaltySpec; 3] {
        [
            PenaltySpec { c: 0.5, r: 0.25 },
            PenaltySpec { c: 0.75, r: 0.4 },
            PenaltySpec { c: 1.0, r: 0.5 },
        ]
    }

    pub fn alpha(&self, delta: f64) -> f64 {
        self.c / delta.powf(self.r)
    }

    /// Parses a comma-separated list of `c:r` pairs.
    pub fn parse_list(s: &str) -> Result<Vec<PenaltySpec>> {
        let pairs: Vec<PenaltySpec> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("no penalty pairs given".into()));
        }
        Ok(pairs)
    }
}

impl FromStr for PenaltySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("penalty pair `{s}` is not of the form c:r"));
        let (c, r) = s.split_once(':').ok_or_else(bad)?;
        let c: f64 = c.trim().parse().map_err(|_| bad())?;
        let r: f64 = r.trim().parse().map_err(|_| bad())?;
        PenaltySpec::new(c, r)
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.c, self.r)
    }
}

/// `P = α(δ) · ln(n) / √n`.
pub fn penalty_value(delta: f64, n: usize, spec: PenaltySpec) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveThreshold(delta));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "penalty needs n >= 2, got {n}"
        )));
    }
    let n = n as f64;
    Ok(spec.alpha(delta) * n.ln() / n.sqrt())
}

/// Penalty-free risks along a path; shared by every penalty pair evaluated on
/// the same fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRisks {
    pub n: usize,
    pub deltas: Vec<f64>,
    pub risks: Vec<f64>,
    pub excluded: Vec<Vec<usize>>,
    pub rank_deficient: Vec<bool>,
}

/// Evaluates `ψ̂_k` at every threshold of the path.
///
/// In step mode the retained sets are nested prefixes of the columns sorted
/// by `|β̂|`, so one QR of the reordered design yields every risk. Rank
/// deficiency falls back to a separate refit per level.
pub fn evaluate_path(data: &Dataset, beta_hat: &CoefficientVector, path: &ThresholdPath) -> Result<PathRisks> {
    check_dims(data, beta_hat)?;
    let beta = &beta_hat.values;
    let deltas = path.deltas().to_vec();
    let excluded: Vec<Vec<usize>> = deltas
        .iter()
        .map(|&d| support_at_threshold(beta, d).0)
        .collect();
    let n = data.n();

    let (risks, rank_deficient) = match path.mode() {
        ThresholdMode::Step => match nested_risks(data, beta, &deltas) {
            Some(risks) => (risks, vec![false; deltas.len()]),
            None => per_level(&deltas, |d| min_thresholded_risk(data, beta_hat, d, ThresholdMode::Step))?,
        },
        mode @ ThresholdMode::Spline { .. } => {
            per_level(&deltas, |d| min_thresholded_risk(data, beta_hat, d, mode))?
        }
    };
    Ok(PathRisks {
        n,
        deltas,
        risks,
        excluded,
        rank_deficient,
    })
}

fn per_level(
    deltas: &[f64],
    mut fit: impl FnMut(f64) -> Result<RestrictedFit>,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut risks = Vec::with_capacity(deltas.len());
    let mut deficient = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let f = fit(d)?;
        deficient.push(f.is_rank_deficient());
        risks.push(f.risk);
    }
    Ok((risks, deficient))
}

fn nested_risks(data: &Dataset, beta: &[f64], deltas: &[f64]) -> Option<Vec<f64>> {
    let mut order: Vec<usize> = (0..beta.len()).collect();
    order.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()));
    let x = data.design().select_columns(&order);
    let rss = lstsq::prefix_rss(&x, data.response())?;
    let n = data.n() as f64;
    Some(
        deltas
            .iter()
            .map(|&d| {
                let kept = beta.iter().filter(|b| b.abs() > d).count();
                rss[kept] / n
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRisk {
    /// 1-based level index along the path.
    pub k: usize,
    pub delta: f64,
    pub risk: f64,
    pub penalty: f64,
    pub criterion: f64,
    pub excluded: Vec<usize>,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub per_k: Vec<ThresholdRisk>,
}

impl RiskProfile {
    pub fn criteria(&self) -> Vec<f64> {
        self.per_k.iter().map(|t| t.criterion).collect()
    }
}

impl PathRisks {
    pub fn with_penalty(&self, spec: PenaltySpec) -> Result<RiskProfile> {
        let per_k = self
            .deltas
            .iter()
            .enumerate()
            .map(|(i, &delta)| {
                let penalty = penalty_value(delta, self.n, spec)?;
                let risk = self.risks[i];
                Ok(ThresholdRisk {
                    k: i + 1,
                    delta,
                    risk,
                    penalty,
                    criterion: risk + penalty,
                    excluded: self.excluded[i].clone(),
                    rank_deficient: self.rank_deficient[i],
                })
            })
            .collect::<Result<_>>()?;
        Ok(RiskProfile { per_k })
    }
}

/// Index of the first minimum; `None` for an empty slice or any NaN.
pub fn first_argmin(values: &[f64]) -> Option<usize> {
    if values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub n: usize,
    pub penalty: PenaltySpec,
    /// 1-based index of the selected level.
    pub k_hat: usize,
    pub delta_hat: f64,
    /// Columns declared irrelevant, `{j : |β̂_j| ≤ δ̂}` (0-based).
    pub irrelevant_set: Vec<usize>,
    pub relevant_set: Vec<usize>,
    /// `β̂` with the irrelevant coordinates set to zero.
    pub beta_bar: Vec<f64>,
    pub profile: RiskProfile,
}

/// Zeroes every coordinate with `|β̂_j| ≤ δ`.
pub fn hard_threshold(beta_hat: &[f64], delta: f64) -> Vec<f64> {
    beta_hat
        .iter()
        .map(|&b| if b.abs() <= delta { 0.0 } else { b })
        .collect()
}

/// Picks the level from an already penalized profile.
pub fn select_from_profile(beta_hat: &CoefficientVector, profile: RiskProfile, n: usize, penalty: PenaltySpec) -> Result<SelectionResult> {
    let idx = first_argmin(&profile.criteria())
        .ok_or_else(|| Error::InvalidArgument("risk profile is empty or contains NaN".into()))?;
    let delta_hat = profile.per_k[idx].delta;
    let (irrelevant_set, support) = support_at_threshold(&beta_hat.values, delta_hat);
    Ok(SelectionResult {
        n,
        penalty,
        k_hat: idx + 1,
        delta_hat,
        irrelevant_set,
        relevant_set: support.indices().to_vec(),
        beta_bar: hard_threshold(&beta_hat.values, delta_hat),
        profile,
    })
}

pub fn select_threshold(
    data: &Dataset,
    beta_hat: &CoefficientVector,
    path: &ThresholdPath,
    spec: PenaltySpec,
) -> Result<SelectionResult> {
    if data.n() < 2 {
        return Err(Error::InvalidArgument("selection needs n >= 2".into()));
    }
    let risks = evaluate_path(data, beta_hat, path)?;
    let profile = risks.with_penalty(spec)?;
    select_from_profile(beta_hat, profile, data.n(), spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRates {
    /// Share of relevant columns wrongly declared irrelevant.
    pub fnr: f64,
    /// Share of irrelevant columns correctly declared irrelevant; `None` when
    /// every column is relevant.
    pub tnr: Option<f64>,
}

pub fn metrics_fnr_tnr(
    selected_irrelevant: &[usize],
    true_irrelevant: &[usize],
    p: usize,
) -> Result<SelectionRates> {
    let mut selected = vec![false; p];
    let mut truth = vec![false; p];
    for (set, flags) in [(selected_irrelevant, &mut selected), (true_irrelevant, &mut truth)] {
        for &j in set {
            if j >= p {
                return Err(Error::InvalidArgument(format!(
                    "index {j} out of range for p = {p}"
                )));
            }
            flags[j] = true;
        }
    }
    let relevant = truth.iter().filter(|t| !**t).count();
    if relevant == 0 {
        return Err(Error::InvalidArgument(
            "false negative rate needs at least one relevant column".into(),
        ));
    }
    let kept_relevant = (0..p).filter(|&j| !truth[j] && !selected[j]).count();
    let irrelevant = p - relevant;
    let tnr = (irrelevant > 0).then(|| {
        let hits = (0..p).filter(|&j| truth[j] && selected[j]).count();
        hits as f64 / irrelevant as f64
    });
    Ok(SelectionRates {
        fnr: 1.0 - kept_relevant as f64 / relevant as f64,
        tnr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_ols, Method};

    fn coefs(v: &[f64]) -> CoefficientVector {
        CoefficientVector::new(v.to_vec(), Method::Ols)
    }

    #[test]
    fn spline_values_at_knots() {
        let (d, h) = (0.3, 0.2);
        assert_eq!(tau_spline(d, d, h), 0.0);
        assert!((tau_spline(d + h / 2.0, d, h) - 0.5).abs() < 1e-12);
        assert_eq!(tau_spline(d + h, d, h), 1.0);
        assert!((tau_spline(d + h / 4.0, d, h) - 0.0625).abs() < 1e-12);
        assert_eq!(tau_spline(0.0, d, h), 0.0);
        assert_eq!(tau_spline(5.0, d, h), 1.0);
    }

    #[test]
    fn threshold_weight_modes() {
        let (d, h) = (0.4, 0.1);
        let spline = ThresholdMode::Spline { width: h };
        assert_eq!(t_threshold(-(d + h), d, spline), 1.0);
        assert_eq!(t_threshold(d, d, ThresholdMode::Step), 0.0);
        assert_eq!(t_threshold(-d - 1e-12, d, ThresholdMode::Step), 1.0);
        assert_eq!(t_threshold(0.0, d, spline), 0.0);
        assert_eq!(t_threshold(0.0, d, ThresholdMode::Step), 0.0);
    }

    #[test]
    fn empirical_path_sorts_and_collapses_ties() {
        let p = build_empirical_path(&coefs(&[0.3, -0.1, 0.2])).unwrap();
        assert_eq!(p.deltas(), &[0.3, 0.2, 0.1]);
        let p = build_empirical_path(&coefs(&[0.5, -0.5, 0.1])).unwrap();
        assert_eq!(p.deltas(), &[0.5, 0.1]);
        assert!(matches!(
            build_empirical_path(&coefs(&[0.0, -0.0])),
            Err(Error::AllZero)
        ));
    }

    #[test]
    fn path_rejects_bad_sequences() {
        assert!(ThresholdPath::new(vec![], ThresholdMode::Step).is_err());
        assert!(ThresholdPath::new(vec![0.2, 0.2], ThresholdMode::Step).is_err());
        assert!(ThresholdPath::new(vec![0.1, 0.2], ThresholdMode::Step).is_err());
        assert!(ThresholdPath::new(vec![0.2, 0.0], ThresholdMode::Step).is_err());
        assert!(ThresholdPath::new(vec![0.2], ThresholdMode::Spline { width: 0.0 }).is_err());
    }

    #[test]
    fn support_boundary_is_inclusive() {
        let (ex, kept) = support_at_threshold(&[0.3, 0.1], 0.1);
        assert_eq!(ex, vec![1]);
        assert_eq!(kept.indices(), &[0]);
        let (ex, kept) = support_at_threshold(&[0.3, -0.1], 0.3);
        assert_eq!(ex, vec![0, 1]);
        assert!(kept.is_empty());
        let (ex, kept) = support_at_threshold(&[0.3, -0.1], 0.05);
        assert!(ex.is_empty());
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn penalty_arithmetic() {
        let v = penalty_value(1.0, 100, PenaltySpec::new(1.0, 0.5).unwrap()).unwrap();
        assert!((v - 0.460517).abs() < 1e-6);
        let v = penalty_value(1.0, 100, PenaltySpec::new(0.5, 0.25).unwrap()).unwrap();
        assert!((v - 0.230259).abs() < 1e-6);

        let spec = PenaltySpec::new(0.75, 0.4).unwrap();
        let base = penalty_value(0.3, 500, spec).unwrap();
        let doubled_c = penalty_value(0.3, 500, PenaltySpec::new(1.5, 0.4).unwrap()).unwrap();
        assert!((doubled_c - 2.0 * base).abs() < 1e-14);
        let shrunk = penalty_value(0.3 / 2f64.powf(1.0 / 0.4), 500, spec).unwrap();
        assert!((shrunk - 2.0 * base).abs() < 1e-12);

        assert!(penalty_value(0.0, 100, spec).is_err());
        assert!(penalty_value(-1.0, 100, spec).is_err());
        assert!(penalty_value(1.0, 1, spec).is_err());
    }

    #[test]
    fn penalty_pair_parsing() {
        let pairs = PenaltySpec::parse_list("0.5:0.25, 0.75:0.4,1:0.5").unwrap();
        assert_eq!(pairs, PenaltySpec::standard_grid().to_vec());
        assert!("1".parse::<PenaltySpec>().is_err());
        assert!("0:1".parse::<PenaltySpec>().is_err());
        assert!(PenaltySpec::parse_list("").is_err());
    }

    #[test]
    fn first_argmin_breaks_ties_toward_smaller_index() {
        assert_eq!(first_argmin(&[0.9, 0.7, 0.7, 0.8]), Some(1));
        assert_eq!(first_argmin(&[0.5]), Some(0));
        assert_eq!(first_argmin(&[]), None);
        assert_eq!(first_argmin(&[1.0, f64::NAN]), None);
    }

    #[test]
    fn tied_profile_selects_first_level() {
        let beta = coefs(&[0.9, 0.7, 0.5, 0.3]);
        let per_k = [0.9, 0.7, 0.7, 0.8]
            .iter()
            .zip([0.9, 0.7, 0.5, 0.3])
            .enumerate()
            .map(|(i, (&crit, delta))| ThresholdRisk {
                k: i + 1,
                delta,
                risk: crit,
                penalty: 0.0,
                criterion: crit,
                excluded: support_at_threshold(&beta.values, delta).0,
                rank_deficient: false,
            })
            .collect();
        let spec = PenaltySpec::new(1.0, 0.5).unwrap();
        let sel = select_from_profile(&beta, RiskProfile { per_k }, 10, spec).unwrap();
        assert_eq!(sel.k_hat, 2);
        assert_eq!(sel.delta_hat, 0.7);
        assert_eq!(sel.irrelevant_set, vec![1, 2, 3]);
        assert_eq!(sel.beta_bar, vec![0.9, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn singleton_path_selects_it() {
        let d = Dataset::from_rows(3, 1, &[1.0, 2.0, 3.0], &[1.0, 2.2, 2.9]).unwrap();
        let beta = fit_ols(&d);
        let path = build_empirical_path(&beta).unwrap();
        let sel = select_threshold(&d, &beta, &path, PenaltySpec::new(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(sel.k_hat, 1);
        assert_eq!(sel.irrelevant_set, vec![0]);
    }

    #[test]
    fn thresholded_risk_extremes() {
        let d = Dataset::from_rows(
            5,
            2,
            &[1.0, 0.2, -0.4, 1.1, 0.8, -0.9, 1.3, 0.5, -0.7, 0.3],
            &[1.2, -0.3, 0.4, 2.0, -0.5],
        )
        .unwrap();
        let beta = fit_ols(&d);
        let max = beta.values.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let min = beta.values.iter().fold(f64::INFINITY, |m, b| m.min(b.abs()));
        let empty = min_thresholded_risk(&d, &beta, max, ThresholdMode::Step).unwrap();
        assert!((empty.risk - d.response().norm_squared() / 5.0).abs() < 1e-14);
        let full = min_thresholded_risk(&d, &beta, 0.5 * min, ThresholdMode::Step).unwrap();
        let ols_mse = least_squares_on_support(&d, &Support::full(2)).unwrap().risk;
        assert!((full.risk - ols_mse).abs() < 1e-14);
        assert!(min_thresholded_risk(&d, &beta, 0.0, ThresholdMode::Step).is_err());
    }

    #[test]
    fn thresholded_risk_matches_subset_refit() {
        let d = Dataset::from_rows(
            6,
            4,
            &[
                0.9, -1.2, 0.4, 2.0, -0.3, 0.8, 1.5, -0.4, 1.7, 0.1, -0.6, 0.9, -1.0, 1.4, 0.3,
                -1.1, 0.2, -0.5, -1.4, 0.6, 0.6, 1.1, 0.8, 0.2,
            ],
            &[1.1, 0.7, 0.3, -2.0, -0.9, 1.6],
        )
        .unwrap();
        // columns 1 and 3 small, 0 and 2 large
        let beta = coefs(&[1.5, 0.05, -0.9, 0.02]);
        let fit = min_thresholded_risk(&d, &beta, 0.05, ThresholdMode::Step).unwrap();
        let oracle = least_squares_on_support(&d, &Support::new(vec![0, 2], 4).unwrap()).unwrap();
        assert!((fit.risk - oracle.risk).abs() < 1e-10);
        let spline = min_thresholded_risk(&d, &beta, 0.05, ThresholdMode::Spline { width: 1.0 }).unwrap();
        assert!((spline.risk - oracle.risk).abs() < 1e-10);
    }

    #[test]
    fn nested_and_per_level_routes_agree_on_rank_deficient_design() {
        // column 2 duplicates column 0, forcing the per-level fallback
        let d = Dataset::from_rows(
            5,
            3,
            &[1.0, 0.3, 1.0, -0.5, 1.2, -0.5, 0.8, -0.7, 0.8, 1.4, 0.1, 1.4, -0.2, 0.9, -0.2],
            &[1.0, 0.2, -0.3, 2.1, 0.4],
        )
        .unwrap();
        let beta = coefs(&[0.6, 0.2, 0.4]);
        let path = build_empirical_path(&beta).unwrap();
        let risks = evaluate_path(&d, &beta, &path).unwrap();
        // the last level keeps {0, 2}, which are identical columns
        assert_eq!(risks.rank_deficient, vec![false, false, true]);
        for (i, &delta) in path.deltas().iter().enumerate() {
            let direct = min_thresholded_risk(&d, &beta, delta, ThresholdMode::Step).unwrap();
            assert!((risks.risks[i] - direct.risk).abs() < 1e-12);
        }
        assert!(risks.risks.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn rates_on_hand_sets() {
        let s0: Vec<usize> = (10..20).collect();
        let r = metrics_fnr_tnr(&s0, &s0, 20).unwrap();
        assert_eq!((r.fnr, r.tnr), (0.0, Some(1.0)));
        let r = metrics_fnr_tnr(&[], &s0, 20).unwrap();
        assert_eq!((r.fnr, r.tnr), (0.0, Some(0.0)));
        let sel: Vec<usize> = (9..20).collect();
        let r = metrics_fnr_tnr(&sel, &s0, 20).unwrap();
        assert!((r.fnr - 0.1).abs() < 1e-15);
        assert_eq!(r.tnr, Some(1.0));
        // everything relevant: TNR undefined
        let r = metrics_fnr_tnr(&[0], &[], 3).unwrap();
        assert_eq!(r.tnr, None);
        assert!((r.fnr - 1.0 / 3.0).abs() < 1e-15);
        assert!(metrics_fnr_tnr(&[], &[0, 1], 2).is_err());
        assert!(metrics_fnr_tnr(&[5], &[0], 2).is_err());
    }
}

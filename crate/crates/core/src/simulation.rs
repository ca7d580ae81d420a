//! Seeded Monte Carlo harness for the S1/S2 designs.
//!
//! Covariates are drawn IID from `N(0, Σ)` with an equicorrelated `Σ` (unit
//! diagonal, constant off-diagonal `rho`), noise is Gaussian, and every
//! replication owns an independent ChaCha stream keyed by a hash of
//! `(base_seed, index)`. Replications run on the ambient rayon pool; results
//! are collected and averaged in index order, so the thread count never
//! changes a report.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Dataset, EstimatorConfig};
use crate::thresholding::{
    build_empirical_path, evaluate_path, metrics_fnr_tnr, select_from_profile, PenaltySpec,
    ThresholdMode,
};

pub const DEFAULT_RHO: f64 = 0.2;
pub const DEFAULT_NOISE_SD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub beta0: Vec<f64>,
    pub rho: f64,
    pub noise_sd: f64,
}

/// `(step, 2·step, …, 10·step, 0, …, 0)` of length `p`.
fn ladder(step: f64, p: usize) -> Vec<f64> {
    (0..p)
        .map(|j| if j < 10 { step * (j + 1) as f64 } else { 0.0 })
        .collect()
}

impl ScenarioSpec {
    pub fn new(name: impl Into<String>, n: usize, beta0: Vec<f64>, rho: f64, noise_sd: f64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            n,
            p: beta0.len(),
            beta0,
            rho,
            noise_sd,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Strong signal: `β₀ = (0.2, 0.4, …, 2.0, 0, …)`.
    pub fn s1(n: usize, p: usize) -> Result<Self> {
        Self::check_ladder_dim(p)?;
        Self::new("S1", n, ladder(0.2, p), DEFAULT_RHO, DEFAULT_NOISE_SD)
    }

    /// Weak signal: `β₀ = (0.05, 0.1, …, 0.5, 0, …)`.
    pub fn s2(n: usize, p: usize) -> Result<Self> {
        Self::check_ladder_dim(p)?;
        Self::new("S2", n, ladder(0.05, p), DEFAULT_RHO, DEFAULT_NOISE_SD)
    }

    fn check_ladder_dim(p: usize) -> Result<()> {
        if p < 10 {
            return Err(Error::InvalidArgument(format!(
                "S1/S2 need p >= 10 for their ten relevant coefficients, got {p}"
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("n must be at least 2, got {}", self.n)));
        }
        if self.p == 0 || self.beta0.len() != self.p {
            return Err(Error::InvalidArgument(format!(
                "beta0 has {} entries for p = {}",
                self.beta0.len(),
                self.p
            )));
        }
        if self.beta0.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("beta0 has non-finite entries".into()));
        }
        if self.beta0.iter().all(|&b| b == 0.0) {
            return Err(Error::InvalidArgument(
                "beta0 needs at least one nonzero coefficient".into(),
            ));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_sd must be positive, got {}",
                self.noise_sd
            )));
        }
        check_rho(self.p, self.rho)
    }

    /// `{j : β₀_j = 0}`.
    pub fn true_irrelevant(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| self.beta0[j] == 0.0).collect()
    }

    /// Warns when the weakest signal is within one noise standard error of
    /// zero, where no threshold can separate it from the irrelevant
    /// coefficients.
    pub fn beta_min_warning(&self) -> Option<String> {
        let min = self
            .beta0
            .iter()
            .map(|b| b.abs())
            .filter(|&b| b > 0.0)
            .fold(f64::INFINITY, f64::min);
        let noise_scale = self.noise_sd / (self.n as f64).sqrt();
        (min <= noise_scale).then(|| {
            format!(
                "{}: smallest signal {min} is within the noise scale {noise_scale:.4} at n = {}",
                self.name, self.n
            )
        })
    }
}

fn check_rho(p: usize, rho: f64) -> Result<()> {
    let lower = if p > 1 { -1.0 / (p as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(rho > lower && rho < 1.0) {
        return Err(Error::NotPositiveDefinite { p, rho });
    }
    Ok(())
}

/// Lower-triangular `L` with `L Lᵀ = Σ(rho)`.
pub fn equicorrelated_factor(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    check_rho(p, rho)?;
    let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho });
    sigma
        .cholesky()
        .map(|c| c.unpack())
        .ok_or(Error::NotPositiveDefinite { p, rho })
}

/// Draws one dataset. The same seed always gives a bitwise-identical dataset.
pub fn generate_dataset(spec: &ScenarioSpec, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let factor = equicorrelated_factor(p, spec.rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut z = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let x = z * factor.transpose();
    let noise = DVector::from_fn(n, |_, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        spec.noise_sd * e
    });
    let y = &x * DVector::from_column_slice(&spec.beta0) + noise;
    Ok((Dataset::unlabeled(x, y)?, spec.true_irrelevant()))
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `base_seed`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    mix64(mix64(base_seed) ^ index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub seed: u64,
    pub penalty: PenaltySpec,
    pub delta_hat: f64,
    pub fnr: f64,
    pub tnr: Option<f64>,
    /// Estimated irrelevant set.
    pub selected_set: Vec<usize>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Everything a replication needs besides the scenario and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub estimator: EstimatorConfig,
    pub penalties: Vec<PenaltySpec>,
    pub mode: ThresholdMode,
}

impl RunSettings {
    pub fn new(estimator: EstimatorConfig, penalties: Vec<PenaltySpec>) -> Self {
        Self {
            estimator,
            penalties,
            mode: ThresholdMode::Step,
        }
    }
}

/// One replication evaluated under every penalty pair; the data, fit and
/// path risks are shared across pairs.
pub fn run_replication_all(
    spec: &ScenarioSpec,
    settings: &RunSettings,
    seed: u64,
    index: usize,
) -> Result<Vec<ReplicationOutcome>> {
    let start = Instant::now();
    let tag = |e: Error| Error::Replication {
        seed,
        source: Box::new(e),
    };
    let (data, truth) = generate_dataset(spec, seed).map_err(tag)?;
    let beta = settings.estimator.fit(&data).map_err(tag)?;
    let path = build_empirical_path(&beta)
        .and_then(|p| p.with_mode(settings.mode))
        .map_err(tag)?;
    let risks = evaluate_path(&data, &beta, &path).map_err(tag)?;

    let mut outcomes = Vec::with_capacity(settings.penalties.len());
    for &penalty in &settings.penalties {
        let profile = risks.with_penalty(penalty).map_err(tag)?;
        let sel = select_from_profile(&beta, profile, data.n(), penalty).map_err(tag)?;
        let rates = metrics_fnr_tnr(&sel.irrelevant_set, &truth, data.p()).map_err(tag)?;
        outcomes.push(ReplicationOutcome {
            index,
            seed,
            penalty,
            delta_hat: sel.delta_hat,
            fnr: rates.fnr,
            tnr: rates.tnr,
            selected_set: sel.irrelevant_set,
            wall_time: Duration::ZERO,
        });
    }
    let elapsed = start.elapsed();
    for o in &mut outcomes {
        o.wall_time = elapsed;
    }
    Ok(outcomes)
}

pub fn run_replication(
    spec: &ScenarioSpec,
    estimator: EstimatorConfig,
    penalty: PenaltySpec,
    seed: u64,
) -> Result<ReplicationOutcome> {
    let settings = RunSettings::new(estimator, vec![penalty]);
    let mut out = run_replication_all(spec, &settings, seed, 0)?;
    Ok(out.remove(0))
}

/// Replication-averaged table cell for one (scenario, estimator, penalty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub estimator: String,
    pub penalty: PenaltySpec,
    pub replications: usize,
    pub base_seed: u64,
    pub mean_delta_hat: f64,
    pub mean_fnr_pct: f64,
    /// `None` when the scenario has no irrelevant columns.
    pub mean_tnr_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub report: AggregateReport,
    pub outcomes: Vec<ReplicationOutcome>,
}

/// Averages outcomes in slice order.
pub fn aggregate(
    spec: &ScenarioSpec,
    estimator: &EstimatorConfig,
    penalty: PenaltySpec,
    base_seed: u64,
    outcomes: &[ReplicationOutcome],
) -> AggregateReport {
    let reps = outcomes.len() as f64;
    let mut delta = 0.0;
    let mut fnr = 0.0;
    let mut tnr = Some(0.0);
    for o in outcomes {
        delta += o.delta_hat;
        fnr += o.fnr;
        tnr = tnr.zip(o.tnr).map(|(a, b)| a + b);
    }
    AggregateReport {
        scenario: spec.name.clone(),
        n: spec.n,
        p: spec.p,
        estimator: estimator.to_string(),
        penalty,
        replications: outcomes.len(),
        base_seed,
        mean_delta_hat: delta / reps,
        mean_fnr_pct: 100.0 * fnr / reps,
        mean_tnr_pct: tnr.map(|t| 100.0 * t / reps),
    }
}

/// Runs `replications` seeded replications and aggregates one report per
/// penalty pair, in the order the pairs were given.
pub fn run_scenario_grid(
    spec: &ScenarioSpec,
    settings: &RunSettings,
    replications: usize,
    base_seed: u64,
) -> Result<Vec<ScenarioRun>> {
    if replications == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    if settings.penalties.is_empty() {
        return Err(Error::InvalidArgument("no penalty pairs given".into()));
    }
    spec.validate()?;
    if let Some(msg) = spec.beta_min_warning() {
        log::warn!("{msg}");
    }

    let per_rep: Vec<Vec<ReplicationOutcome>> = (0..replications)
        .into_par_iter()
        .map(|i| run_replication_all(spec, settings, derive_seed(base_seed, i as u64), i))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;

    Ok(settings
        .penalties
        .iter()
        .enumerate()
        .map(|(k, &penalty)| {
            let outcomes: Vec<ReplicationOutcome> =
                per_rep.iter().map(|rep| rep[k].clone()).collect();
            ScenarioRun {
                report: aggregate(spec, &settings.estimator, penalty, base_seed, &outcomes),
                outcomes,
            }
        })
        .collect())
}

pub fn run_scenario(
    spec: &ScenarioSpec,
    estimator: EstimatorConfig,
    penalty: PenaltySpec,
    replications: usize,
    base_seed: u64,
) -> Result<ScenarioRun> {
    let settings = RunSettings::new(estimator, vec![penalty]);
    let mut runs = run_scenario_grid(spec, &settings, replications, base_seed)?;
    Ok(runs.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladders() {
        let s1 = ScenarioSpec::s1(100, 20).unwrap();
        assert_eq!(s1.beta0.len(), 20);
        assert!((s1.beta0[0] - 0.2).abs() < 1e-15 && (s1.beta0[9] - 2.0).abs() < 1e-15);
        assert_eq!(s1.true_irrelevant(), (10..20).collect::<Vec<_>>());
        let s2 = ScenarioSpec::s2(100, 50).unwrap();
        assert!((s2.beta0[9] - 0.5).abs() < 1e-15);
        assert_eq!(s2.true_irrelevant().len(), 40);
        assert!(ScenarioSpec::s1(100, 5).is_err());
    }

    #[test]
    fn scenario_validation() {
        assert!(ScenarioSpec::new("zero", 100, vec![0.0; 5], 0.2, 1.0).is_err());
        assert!(ScenarioSpec::new("rho", 100, vec![1.0; 5], -0.25, 1.0).is_err());
        assert!(ScenarioSpec::new("rho", 100, vec![1.0; 5], 1.0, 1.0).is_err());
        assert!(ScenarioSpec::new("sd", 100, vec![1.0; 5], 0.2, 0.0).is_err());
        assert!(ScenarioSpec::new("ok", 100, vec![1.0, 0.0], -0.5, 1.0).is_ok());
    }

    #[test]
    fn factor_identity_and_reconstruction() {
        let l = equicorrelated_factor(2, 0.0).unwrap();
        assert_eq!(l, DMatrix::identity(2, 2));
        let l = equicorrelated_factor(2, 0.2).unwrap();
        let s = &l * l.transpose();
        let target = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        assert!((s - target).amax() < 1e-12);
        for j in 0..2 {
            for i in 0..j {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn factor_large_reconstruction() {
        let p = 50;
        let l = equicorrelated_factor(p, 0.2).unwrap();
        let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.2 });
        assert!((&l * l.transpose() - sigma).amax() <= 1e-10);
        assert!(matches!(
            equicorrelated_factor(p, -0.5),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
        assert_ne!(derive_seed(42, 7), derive_seed(43, 7));
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = ScenarioSpec::s1(50, 12).unwrap();
        let (a, ta) = generate_dataset(&spec, 9).unwrap();
        let (b, tb) = generate_dataset(&spec, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate_dataset(&spec, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn singleton_aggregate_equals_outcome() {
        let spec = ScenarioSpec::s1(200, 20).unwrap();
        let penalty = PenaltySpec::new(1.0, 0.5).unwrap();
        let run = run_scenario(&spec, EstimatorConfig::Ols, penalty, 1, 3).unwrap();
        let o = &run.outcomes[0];
        assert_eq!(run.report.replications, 1);
        assert_eq!(run.report.mean_delta_hat, o.delta_hat);
        assert_eq!(run.report.mean_fnr_pct, 100.0 * o.fnr);
        assert_eq!(run.report.mean_tnr_pct, o.tnr.map(|t| 100.0 * t));
        assert_eq!(o.seed, derive_seed(3, 0));
    }

    #[test]
    fn zero_replications_rejected() {
        let spec = ScenarioSpec::s1(200, 20).unwrap();
        let penalty = PenaltySpec::new(1.0, 0.5).unwrap();
        assert!(run_scenario(&spec, EstimatorConfig::Ols, penalty, 0, 3).is_err());
    }

    #[test]
    fn beta_min_warning_fires_for_weak_signal_only() {
        assert!(ScenarioSpec::s2(100, 20).unwrap().beta_min_warning().is_some());
        assert!(ScenarioSpec::s1(100, 20).unwrap().beta_min_warning().is_none());
    }
}

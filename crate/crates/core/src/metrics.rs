//! Monte-Carlo scoring, oracle-inequality checks and the scenario runner.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::{band1_variance, band_from_stats, covers, BandKind, TargetKind, COMPETITOR_CENTER_NOTE};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate, hard_threshold_coeffs, per_curve_coeffs, pooled_stats,
    theoretical_levels, truncated_target, CoefficientStats, Rule, TheoreticalLevels,
};
use crate::grid_basis::{BasisFamily, BasisMatrix};
use crate::process_sim::{
    calibrate, derive_seed, eval_signal, generate_panel, sigma_k_theoretical, PanelConfig,
};
use crate::scalar::Real;
use crate::selector::CandidateSpec;

fn mse<T: Real>(fit: &[T], truth: &[T]) -> T {
    let s: T = fit.iter().zip(truth).map(|(&a, &b)| (a - b) * (a - b)).sum();
    s / T::from_usize_lossy(truth.len())
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// `(sqrt(mean_s MSE_s), sqrt(median_s MSE_s))` with
/// `MSE_s = (1/m) sum_j (f_hat_s(t_j) - f(t_j))^2`.
pub fn mse_summary<T: Real>(fitted: &[Vec<T>], truth: &[T]) -> Result<(T, T)> {
    if fitted.is_empty() {
        return Err(Error::invalid("mse_summary needs at least one replicate"));
    }
    if truth.is_empty() || fitted.iter().any(|f| f.len() != truth.len()) {
        return Err(Error::invalid("fitted curves and truth differ in length"));
    }
    let per: Vec<T> = fitted.iter().map(|f| mse(f, truth)).collect();
    Ok(summarize_mse(per))
}

fn summarize_mse<T: Real>(per: Vec<T>) -> (T, T) {
    let mean = per.iter().copied().sum::<T>() / T::from_usize_lossy(per.len());
    (mean.sqrt(), median(per).sqrt())
}

/// Every `k` satisfies `|mu_hat_k - mu_k| <= r_k`, `r_hat_k >= r_k`,
/// `r_hat_k <= r_bar_k` and `r_bar_k <= r_tilde_k`.
pub fn omega_event_check<T: Real>(
    stats: &CoefficientStats<T>,
    levels: &TheoreticalLevels<T>,
    mu_true: &[T],
) -> bool {
    let m = stats.m();
    assert_eq!(levels.m(), m, "levels and stats disagree on m");
    assert_eq!(mu_true.len(), m, "true coefficients and stats disagree on m");
    (0..m).all(|k| {
        let r = levels.r_k[k];
        let rbar = levels.r_bar[k];
        let rhat = stats.r_hat()[k];
        (stats.mu_hat()[k] - mu_true[k]).abs() <= r
            && rhat >= r
            && rhat <= rbar
            && rbar <= stats.r_tilde()[k]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OracleCheck<T> {
    pub sup_lhs: T,
    pub sup_rhs: T,
    pub l2_lhs: T,
    pub l2_rhs: T,
    pub sup_ok: bool,
    pub l2_ok: bool,
}

impl<T: Real> OracleCheck<T> {
    pub fn ok(&self) -> bool {
        self.sup_ok && self.l2_ok
    }
}

/// Compares `f_hat(2 r_hat)` (hard or soft) with `f_bar(r)`:
/// sup distance against `3 max_k |phi_k|_inf sum_k r_bar_k 1{|mu_k| >= r_k}`,
/// grid-L2 distance against `3 sqrt(sum_k r_bar_k^2 1{|mu_k| >= r_k})`.
pub fn oracle_check_thm1<T: Real>(
    stats: &CoefficientStats<T>,
    basis: &BasisMatrix<T>,
    levels: &TheoreticalLevels<T>,
    mu_true: &[T],
    rule: Rule,
) -> Result<OracleCheck<T>> {
    if !matches!(rule, Rule::Hard | Rule::Soft) {
        return Err(Error::invalid("oracle check applies to hard or soft thresholding"));
    }
    if levels.m() != basis.m() || mu_true.len() != basis.m() {
        return Err(Error::invalid("levels, coefficients and basis disagree on m"));
    }
    let est = estimate(stats, basis, rule, T::lit(2.0))?;
    let (_, fbar) = truncated_target(mu_true, &levels.r_k, basis)?;
    let diff: Vec<T> = est.values.iter().zip(&fbar).map(|(&a, &b)| a - b).collect();
    let sup_lhs = crate::estimator::sup_norm(&diff);
    let l2_lhs = crate::estimator::l2_norm(&diff);

    let three = T::lit(3.0);
    let mut sum = T::zero();
    let mut sum_sq = T::zero();
    for k in 0..basis.m() {
        if mu_true[k].abs() >= levels.r_k[k] {
            sum += levels.r_bar[k];
            sum_sq += levels.r_bar[k] * levels.r_bar[k];
        }
    }
    let sup_rhs = three * basis.max_sup_norm() * sum;
    let l2_rhs = three * sum_sq.sqrt();
    Ok(OracleCheck {
        sup_lhs,
        sup_rhs,
        l2_lhs,
        l2_rhs,
        sup_ok: sup_lhs <= sup_rhs,
        l2_ok: l2_lhs <= l2_rhs,
    })
}

/// Right-hand side of the Gaussian risk bound for the toy estimator
/// `f_hat(2r)`:
/// `2 sum_k (s_k + 4 r_k^2) 1{|mu_k| > r_k} + (4 alpha/m) sum_k (r_k^2 + s_k)`
/// with `s_k = sigma_k^2/n + sigma_eps^2/(mn)`.
pub fn risk_bound_rhs<T: Real>(levels: &TheoreticalLevels<T>, mu_true: &[T]) -> T {
    let m = levels.m();
    let var = levels.coefficient_variance();
    let four = T::lit(4.0);
    let mut active = T::zero();
    let mut all = T::zero();
    for k in 0..m {
        let r2 = levels.r_k[k] * levels.r_k[k];
        if mu_true[k].abs() > levels.r_k[k] {
            active += var[k] + four * r2;
        }
        all += r2 + var[k];
    }
    T::lit(2.0) * active + four * levels.alpha / T::from_usize_lossy(m) * all
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RiskBoundReport<T> {
    pub replicates: usize,
    /// MC mean of `|f_hat(2r) - f_bar(r)|^2_{m,2}`.
    pub lhs_mc: T,
    /// Standard error of `lhs_mc`.
    pub lhs_se: T,
    pub rhs: T,
    /// `lhs_mc - 3 se <= rhs`.
    pub ok: bool,
}

/// `|f_hat(2r) - f_bar(r)|^2_{m,2}` for one panel's pooled coefficients.
fn risk_bound_loss<T: Real>(mu_hat: &[T], mu_true: &[T], levels: &TheoreticalLevels<T>) -> T {
    let two = T::lit(2.0);
    let doubled: Vec<T> = levels.r_k.iter().map(|&r| two * r).collect();
    let est = hard_threshold_coeffs(mu_hat, &doubled);
    let bar = hard_threshold_coeffs(mu_true, &levels.r_k);
    // Parseval in the empirical norm.
    est.iter().zip(&bar).map(|(&a, &b)| (a - b) * (a - b)).sum()
}

fn risk_bound_summary<T: Real>(losses: &[T], rhs: T) -> RiskBoundReport<T> {
    let s = losses.len();
    let sf = T::from_usize_lossy(s);
    let mean = losses.iter().copied().sum::<T>() / sf;
    let se = if s > 1 {
        let var = losses.iter().map(|&l| (l - mean) * (l - mean)).sum::<T>() / (sf - T::one());
        (var / sf).sqrt()
    } else {
        T::zero()
    };
    RiskBoundReport {
        replicates: s,
        lhs_mc: mean,
        lhs_se: se,
        rhs,
        ok: mean - T::lit(3.0) * se <= rhs,
    }
}

/// Monte-Carlo check of the Gaussian risk bound over `replicates` panels
/// seeded by `derive_seed(config.seed, s)`.
pub fn oracle_check_thm3<T: Real>(
    config: &PanelConfig<T>,
    replicates: usize,
    basis_family: BasisFamily,
    alpha: T,
) -> Result<RiskBoundReport<T>> {
    if replicates == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    config.validate()?;
    let basis = basis_family.build(&config.grid)?;
    let truth = OracleTruth::new(config, &basis, alpha, T::zero())?;
    let losses: Vec<Result<T>> = (0..replicates)
        .into_par_iter()
        .map(|s| {
            let seed = derive_seed(config.seed, s as u64);
            let panel = generate_panel(&config.with_seed(seed))?;
            let coeffs = per_curve_coeffs(&panel, &basis)?;
            let mu_hat = coeffs
                .mean_axis(ndarray::Axis(0))
                .expect("panel has curves")
                .to_vec();
            Ok(risk_bound_loss(&mu_hat, &truth.mu, &truth.levels))
        })
        .collect();
    let losses = losses.into_iter().collect::<Result<Vec<T>>>()?;
    Ok(risk_bound_summary(&losses, risk_bound_rhs(&truth.levels, &truth.mu)))
}

/// Known quantities of a simulated scenario.
struct OracleTruth<T> {
    mu: Vec<T>,
    levels: TheoreticalLevels<T>,
}

impl<T: Real> OracleTruth<T> {
    fn new(config: &PanelConfig<T>, basis: &BasisMatrix<T>, alpha: T, delta: T) -> Result<Self> {
        let f = eval_signal(&config.signal, basis.grid())?;
        let mu = basis.analyze(&f)?;
        let sigma2 = sigma_k_theoretical(&config.process, basis)?;
        let levels = theoretical_levels(&sigma2, config.noise_sd, config.n, alpha, delta)?;
        Ok(OracleTruth { mu, levels })
    }
}

/// Rescale process, noise and signal to hit a variance ratio and an SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CalibrationSpec<T> {
    pub sigma_star: T,
    pub snr: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OracleSettings<T> {
    /// `delta` used for the data-driven levels in the oracle checks.
    #[serde(default = "default_oracle_delta")]
    pub delta: T,
    #[serde(default = "default_alpha")]
    pub alpha: T,
}

impl<T: Real> Default for OracleSettings<T> {
    fn default() -> Self {
        OracleSettings {
            delta: default_oracle_delta(),
            alpha: default_alpha(),
        }
    }
}

fn default_oracle_delta<T: Real>() -> T {
    T::lit(0.01)
}

fn default_alpha<T: Real>() -> T {
    T::lit(0.05)
}

fn default_band_basis() -> BasisFamily {
    BasisFamily::Fourier
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScenarioConfig<T> {
    /// Panel template; its seed is replaced per replicate.
    pub panel: PanelConfig<T>,
    /// Applied to `panel` before any replicate runs.
    #[serde(default)]
    pub calibration: Option<CalibrationSpec<T>>,
    pub estimators: Vec<CandidateSpec<T>>,
    #[serde(default)]
    pub bands: Vec<BandKind>,
    #[serde(default = "default_alpha")]
    pub band_alpha: T,
    #[serde(default = "default_band_basis")]
    pub band_basis: BasisFamily,
    #[serde(default)]
    pub band_target: TargetKind,
    pub replicates: usize,
    pub base_seed: u64,
    /// Run the oracle checks (requires a simulated, known covariance).
    #[serde(default)]
    pub oracle: Option<OracleSettings<T>>,
}

impl<T: Real> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be >= 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("estimator list is empty"));
        }
        let m = self.panel.grid.m();
        for e in &self.estimators {
            e.validate()?;
            if !e.basis_family.supports(m) {
                return Err(Error::invalid(format!(
                    "estimator {} needs a power-of-two grid size, got m = {m}",
                    e.label()
                )));
            }
        }
        if !self.bands.is_empty() && !self.band_basis.supports(m) {
            return Err(Error::invalid(format!(
                "{} basis cannot be built for m = {m}",
                self.band_basis
            )));
        }
        if !(self.band_alpha > T::zero() && self.band_alpha < T::one()) {
            return Err(Error::invalid("band_alpha must lie in (0, 1)"));
        }
        self.panel.validate()
    }

    /// Panel template after calibration.
    pub fn resolved_panel(&self) -> Result<PanelConfig<T>> {
        let mut panel = self.panel.clone();
        if let Some(c) = self.calibration {
            let cal = calibrate(&panel.process, &panel.grid, c.sigma_star, c.snr, &panel.signal)?;
            panel.process = cal.process;
            panel.signal = cal.signal;
            panel.noise_sd = cal.noise_sd;
        }
        Ok(panel)
    }

    pub fn replicate_seed(&self, s: usize) -> u64 {
        derive_seed(self.base_seed, s as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EstimatorSummary<T> {
    pub label: String,
    pub spec: CandidateSpec<T>,
    pub sqrt_emse: T,
    pub sqrt_medmse: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BandSummary<T> {
    pub kind: BandKind,
    pub covered_count: usize,
    pub coverage: f64,
    pub mean_width: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BenchReport<T> {
    pub scenario: ScenarioConfig<T>,
    /// Panel template actually simulated (after calibration).
    pub resolved_panel: PanelConfig<T>,
    /// Replicate `s` uses `derive_seed(base_seed, s)`.
    pub seed_rule: String,
    pub estimators: Vec<EstimatorSummary<T>>,
    pub bands: Vec<BandSummary<T>>,
    /// Fraction of replicates passing each check.
    pub oracle_pass_rates: BTreeMap<String, f64>,
    pub risk_bound: Option<RiskBoundReport<T>>,
    pub notes: Vec<String>,
}

pub const SEED_RULE: &str = "replicate s uses panel seed derive_seed(base_seed, s) (SplitMix64 finalizer)";

/// Pass-rate keys.
pub const ORACLE_OMEGA: &str = "omega";
pub const ORACLE_HARD_SUP: &str = "hard_sup";
pub const ORACLE_HARD_L2: &str = "hard_l2";
pub const ORACLE_HARD: &str = "hard";
pub const ORACLE_SOFT_SUP: &str = "soft_sup";
pub const ORACLE_SOFT_L2: &str = "soft_l2";
pub const ORACLE_SOFT: &str = "soft";

#[derive(Debug, Clone, Default)]
struct OracleOutcome {
    omega: bool,
    hard: (bool, bool),
    soft: (bool, bool),
}

struct ReplicateOutcome<T> {
    mse: Vec<T>,
    bands: Vec<(bool, T)>,
    oracle: Option<(OracleOutcome, T)>,
}

struct Prepared<T> {
    panel: PanelConfig<T>,
    estimator_bases: Vec<BasisMatrix<T>>,
    band_basis: Option<BasisMatrix<T>>,
    gamma_diag: Option<Vec<T>>,
    band_target: Vec<T>,
    oracle: Option<(BasisMatrix<T>, OracleTruth<T>, OracleTruth<T>)>,
    truth: Vec<T>,
}

fn prepare<T: Real>(config: &ScenarioConfig<T>) -> Result<Prepared<T>> {
    let panel = config.resolved_panel()?;
    let grid = &panel.grid;
    let truth = eval_signal(&panel.signal, grid)?;
    let estimator_bases = config
        .estimators
        .iter()
        .map(|e| e.basis_family.build(grid))
        .collect::<Result<Vec<_>>>()?;
    let (band_basis, gamma_diag, band_target) = if config.bands.is_empty() {
        (None, None, truth.clone())
    } else {
        let b = config.band_basis.build(grid)?;
        let gamma = if config.bands.contains(&BandKind::CompetitorTheoretical) {
            Some(band1_variance(&panel.process, &b)?)
        } else {
            None
        };
        let target = match config.band_target {
            TargetKind::TrueMean => truth.clone(),
            TargetKind::TruncatedTarget => {
                crate::bands::truncated_band_target(&panel, &b, config.band_alpha, T::zero())?
            }
        };
        (Some(b), gamma, target)
    };
    let oracle = match config.oracle {
        Some(o) => {
            let b = BasisFamily::Fourier.build(grid)?;
            let with_delta = OracleTruth::new(&panel, &b, o.alpha, o.delta)?;
            let toy = OracleTruth::new(&panel, &b, o.alpha, T::zero())?;
            Some((b, with_delta, toy))
        }
        None => None,
    };
    Ok(Prepared {
        panel,
        estimator_bases,
        band_basis,
        gamma_diag,
        band_target,
        oracle,
        truth,
    })
}

fn run_replicate<T: Real>(
    config: &ScenarioConfig<T>,
    prep: &Prepared<T>,
    seed: u64,
) -> Result<ReplicateOutcome<T>> {
    let panel = generate_panel(&prep.panel.with_seed(seed))?;
    let mut mse_out = Vec::with_capacity(config.estimators.len());
    for (spec, basis) in config.estimators.iter().zip(&prep.estimator_bases) {
        let stats = pooled_stats(&per_curve_coeffs(&panel, basis)?, spec.alpha, T::zero())?;
        let est = estimate(&stats, basis, spec.rule, spec.multiplier)?;
        mse_out.push(mse(&est.values, &prep.truth));
    }
    let mut bands = Vec::with_capacity(config.bands.len());
    if let Some(basis) = &prep.band_basis {
        let stats = pooled_stats(&per_curve_coeffs(&panel, basis)?, config.band_alpha, T::zero())?;
        for &kind in &config.bands {
            let band = band_from_stats(kind, &stats, basis, prep.gamma_diag.as_deref())?;
            bands.push((covers(&band, &prep.band_target)?, band.mean_width()));
        }
    }
    let oracle = match (&prep.oracle, config.oracle) {
        (Some((basis, truth, toy)), Some(o)) => {
            let stats = pooled_stats(&per_curve_coeffs(&panel, basis)?, o.alpha, o.delta)?;
            let hard = oracle_check_thm1(&stats, basis, &truth.levels, &truth.mu, Rule::Hard)?;
            let soft = oracle_check_thm1(&stats, basis, &truth.levels, &truth.mu, Rule::Soft)?;
            let outcome = OracleOutcome {
                omega: omega_event_check(&stats, &truth.levels, &truth.mu),
                hard: (hard.sup_ok, hard.l2_ok),
                soft: (soft.sup_ok, soft.l2_ok),
            };
            Some((outcome, risk_bound_loss(stats.mu_hat(), &toy.mu, &toy.levels)))
        }
        _ => None,
    };
    Ok(ReplicateOutcome {
        mse: mse_out,
        bands,
        oracle,
    })
}

/// Runs every replicate (in parallel) and reduces in replicate order, so the
/// report is bit-identical across runs and thread counts.
pub fn run_scenario<T: Real>(config: &ScenarioConfig<T>) -> Result<BenchReport<T>> {
    config.validate()?;
    let prep = prepare(config)?;
    let outcomes: Vec<Result<ReplicateOutcome<T>>> = (0..config.replicates)
        .into_par_iter()
        .map(|s| {
            let seed = config.replicate_seed(s);
            run_replicate(config, &prep, seed).map_err(|e| Error::Replicate {
                replicate: s,
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let s_count = outcomes.len();

    let estimators = config
        .estimators
        .iter()
        .enumerate()
        .map(|(l, spec)| {
            let per: Vec<T> = outcomes.iter().map(|o| o.mse[l]).collect();
            let (sqrt_emse, sqrt_medmse) = summarize_mse(per);
            EstimatorSummary {
                label: spec.label(),
                spec: *spec,
                sqrt_emse,
                sqrt_medmse,
            }
        })
        .collect();

    let bands = config
        .bands
        .iter()
        .enumerate()
        .map(|(b, &kind)| {
            let covered_count = outcomes.iter().filter(|o| o.bands[b].0).count();
            let width_sum: T = outcomes.iter().map(|o| o.bands[b].1).sum();
            BandSummary {
                kind,
                covered_count,
                coverage: covered_count as f64 / s_count as f64,
                mean_width: width_sum / T::from_usize_lossy(s_count),
            }
        })
        .collect();

    let mut oracle_pass_rates = BTreeMap::new();
    let mut risk_bound = None;
    if let Some((_, _, toy)) = &prep.oracle {
        let results: Vec<&(OracleOutcome, T)> = outcomes.iter().filter_map(|o| o.oracle.as_ref()).collect();
        let rate = |f: &dyn Fn(&OracleOutcome) -> bool| {
            results.iter().filter(|(o, _)| f(o)).count() as f64 / s_count as f64
        };
        oracle_pass_rates.insert(ORACLE_OMEGA.to_string(), rate(&|o| o.omega));
        oracle_pass_rates.insert(ORACLE_HARD_SUP.to_string(), rate(&|o| o.hard.0));
        oracle_pass_rates.insert(ORACLE_HARD_L2.to_string(), rate(&|o| o.hard.1));
        oracle_pass_rates.insert(ORACLE_HARD.to_string(), rate(&|o| o.hard.0 && o.hard.1));
        oracle_pass_rates.insert(ORACLE_SOFT_SUP.to_string(), rate(&|o| o.soft.0));
        oracle_pass_rates.insert(ORACLE_SOFT_L2.to_string(), rate(&|o| o.soft.1));
        oracle_pass_rates.insert(ORACLE_SOFT.to_string(), rate(&|o| o.soft.0 && o.soft.1));
        let losses: Vec<T> = results.iter().map(|(_, l)| *l).collect();
        risk_bound = Some(risk_bound_summary(&losses, risk_bound_rhs(&toy.levels, &toy.mu)));
    }

    let mut notes = Vec::new();
    if config.bands.iter().any(|k| k.is_competitor()) {
        notes.push(COMPETITOR_CENTER_NOTE.to_string());
    }
    Ok(BenchReport {
        scenario: config.clone(),
        resolved_panel: prep.panel,
        seed_rule: SEED_RULE.to_string(),
        estimators,
        bands,
        oracle_pass_rates,
        risk_bound,
        notes,
    })
}

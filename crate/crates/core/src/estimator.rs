//! Least-squares coefficients, data-driven threshold levels and
//! hard/soft thresholded mean estimates.
//!
//! With an orthonormal basis the pooled least-squares coefficient is the
//! average over curves of the per-curve coefficients, and the threshold for
//! coefficient `k` is `(S_k + delta) z(alpha/2m) / sqrt(n)` where `S_k` is the
//! between-curve standard deviation of that coefficient. `S_k` picks up both
//! the process and the measurement-error variance, so no covariance estimate
//! is needed.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_basis::{BasisFamily, BasisMatrix};
use crate::process_sim::{eval_signal, CurvePanel, SignalSpec};
use crate::quantile::bonferroni_z;
use crate::scalar::Real;

pub use crate::quantile::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Hard,
    Soft,
    LeastSquares,
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rule::Hard => "hard",
            Rule::Soft => "soft",
            Rule::LeastSquares => "ls",
        })
    }
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" | "ht" => Ok(Rule::Hard),
            "soft" | "st" => Ok(Rule::Soft),
            "ls" | "ols" | "least_squares" => Ok(Rule::LeastSquares),
            other => Err(Error::invalid(format!("unknown rule `{other}`"))),
        }
    }
}

/// Pooled and per-curve coefficients with their data-driven levels.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientStats<T> {
    mu_hat: Vec<T>,
    per_curve: Array2<T>,
    s_k: Vec<T>,
    alpha: T,
    delta: T,
    z: T,
    r_hat: Vec<T>,
    r_tilde: Vec<T>,
}

impl<T: Real> CoefficientStats<T> {
    pub fn mu_hat(&self) -> &[T] {
        &self.mu_hat
    }

    /// Row `i` holds the coefficients of curve `i`.
    pub fn per_curve(&self) -> &Array2<T> {
        &self.per_curve
    }

    pub fn s_k(&self) -> &[T] {
        &self.s_k
    }

    pub fn n(&self) -> usize {
        self.per_curve.nrows()
    }

    pub fn m(&self) -> usize {
        self.per_curve.ncols()
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// `z(alpha / 2m)`.
    pub fn z(&self) -> T {
        self.z
    }

    /// `(S_k + delta) z / sqrt(n)`.
    pub fn r_hat(&self) -> &[T] {
        &self.r_hat
    }

    /// `(S_k + 3 delta) z / sqrt(n)`; the band half-width unit.
    pub fn r_tilde(&self) -> &[T] {
        &self.r_tilde
    }
}

/// Population levels, available only when the covariance kernel and noise
/// variance are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TheoreticalLevels<T> {
    pub sigma_k: Vec<T>,
    pub sigma_eps: T,
    pub n: usize,
    pub alpha: T,
    pub delta: T,
    pub z: T,
    /// `sqrt((sigma_k^2 + sigma_eps^2 / m) / n) z`.
    pub r_k: Vec<T>,
    /// `r_k + 2 delta z / sqrt(n)`.
    pub r_bar: Vec<T>,
}

impl<T: Real> TheoreticalLevels<T> {
    pub fn m(&self) -> usize {
        self.r_k.len()
    }

    /// `Var(mu_hat_k) = sigma_k^2 / n + sigma_eps^2 / (m n)`.
    pub fn coefficient_variance(&self) -> Vec<T> {
        let n = T::from_usize_lossy(self.n);
        let m = T::from_usize_lossy(self.m());
        let e2 = self.sigma_eps * self.sigma_eps;
        self.sigma_k
            .iter()
            .map(|&s| s * s / n + e2 / (m * n))
            .collect()
    }
}

/// Thresholded (or plain least-squares) estimate of the mean on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MeanEstimate<T> {
    pub rule: Rule,
    pub level_multiplier: T,
    pub basis_family: BasisFamily,
    /// Coefficients after thresholding.
    pub coeffs: Vec<T>,
    /// `|mu_hat_k| >= multiplier * r_hat_k`.
    pub active: Vec<bool>,
    /// Levels that were applied (`multiplier * r_hat_k`).
    pub levels: Vec<T>,
    /// Reconstruction at the grid points.
    pub values: Vec<T>,
}

impl<T: Real> MeanEstimate<T> {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Row `i` is `analyze(Y_i.)`.
pub fn per_curve_coeffs<T: Real>(panel: &CurvePanel<T>, basis: &BasisMatrix<T>) -> Result<Array2<T>> {
    if panel.grid() != basis.grid() {
        return Err(Error::invalid(format!(
            "panel grid (m = {}) does not match basis grid (m = {})",
            panel.m(),
            basis.m()
        )));
    }
    let inv_m = T::one() / T::from_usize_lossy(basis.m());
    Ok(panel.y().dot(basis.values()).mapv(|v| v * inv_m))
}

pub fn pooled_stats<T: Real>(per_curve: &Array2<T>, alpha: T, delta: T) -> Result<CoefficientStats<T>> {
    let (n, m) = per_curve.dim();
    if n < 2 {
        return Err(Error::invalid(format!(
            "coefficient spread needs at least 2 curves, got {n}"
        )));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(delta >= T::zero()) || !delta.is_finite() {
        return Err(Error::invalid(format!("delta must be finite and >= 0, got {delta}")));
    }
    let nf = T::from_usize_lossy(n);
    let mu_hat = per_curve.mean_axis(Axis(0)).expect("n >= 2").to_vec();
    let s_k: Vec<T> = per_curve
        .columns()
        .into_iter()
        .zip(&mu_hat)
        .map(|(col, &mean)| {
            let ss: T = col.iter().map(|&v| (v - mean) * (v - mean)).sum();
            (ss / (nf - T::one())).sqrt()
        })
        .collect();
    let z = bonferroni_z(alpha, m)?;
    let scale = z / nf.sqrt();
    let three = T::lit(3.0);
    let r_hat = s_k.iter().map(|&s| (s + delta) * scale).collect();
    let r_tilde = s_k.iter().map(|&s| (s + three * delta) * scale).collect();
    Ok(CoefficientStats {
        mu_hat,
        per_curve: per_curve.clone(),
        s_k,
        alpha,
        delta,
        z,
        r_hat,
        r_tilde,
    })
}

/// `sigma_k2` are the coefficient variances `sigma_k^2` (see
/// [`crate::process_sim::sigma_k_theoretical`]).
pub fn theoretical_levels<T: Real>(
    sigma_k2: &[T],
    sigma_eps: T,
    n: usize,
    alpha: T,
    delta: T,
) -> Result<TheoreticalLevels<T>> {
    let m = sigma_k2.len();
    if m == 0 || n == 0 {
        return Err(Error::invalid("theoretical levels need m >= 1 and n >= 1"));
    }
    if sigma_k2.iter().any(|&s| !(s >= T::zero())) || !(sigma_eps >= T::zero()) {
        return Err(Error::invalid("variances must be non-negative"));
    }
    let z = bonferroni_z(alpha, m)?;
    let nf = T::from_usize_lossy(n);
    let mf = T::from_usize_lossy(m);
    let e2 = sigma_eps * sigma_eps;
    let r_k: Vec<T> = sigma_k2
        .iter()
        .map(|&s2| ((s2 + e2 / mf) / nf).sqrt() * z)
        .collect();
    let bump = T::lit(2.0) * delta * z / nf.sqrt();
    let r_bar = r_k.iter().map(|&r| r + bump).collect();
    Ok(TheoreticalLevels {
        sigma_k: sigma_k2.iter().map(|s| s.sqrt()).collect(),
        sigma_eps,
        n,
        alpha,
        delta,
        z,
        r_k,
        r_bar,
    })
}

/// `mu_k 1{|mu_k| >= level_k}`.
pub fn hard_threshold_coeffs<T: Real>(mu: &[T], levels: &[T]) -> Vec<T> {
    mu.iter()
        .zip(levels)
        .map(|(&c, &l)| if c.abs() >= l { c } else { T::zero() })
        .collect()
}

/// `sgn(mu_k) (|mu_k| - level_k)_+`.
pub fn soft_threshold_coeffs<T: Real>(mu: &[T], levels: &[T]) -> Vec<T> {
    mu.iter()
        .zip(levels)
        .map(|(&c, &l)| {
            let shrunk = (c.abs() - l).max(T::zero());
            if shrunk > T::zero() {
                c.signum() * shrunk
            } else {
                T::zero()
            }
        })
        .collect()
}

fn thresholded<T: Real>(
    stats: &CoefficientStats<T>,
    basis: &BasisMatrix<T>,
    rule: Rule,
    multiplier: T,
) -> Result<MeanEstimate<T>> {
    if stats.m() != basis.m() {
        return Err(Error::invalid("coefficient count does not match basis size"));
    }
    let mu = stats.mu_hat();
    let levels: Vec<T> = match rule {
        Rule::LeastSquares => vec![T::zero(); mu.len()],
        _ => stats.r_hat().iter().map(|&r| multiplier * r).collect(),
    };
    let coeffs = match rule {
        Rule::Soft => soft_threshold_coeffs(mu, &levels),
        Rule::Hard | Rule::LeastSquares => hard_threshold_coeffs(mu, &levels),
    };
    let active = mu.iter().zip(&levels).map(|(c, &l)| c.abs() >= l).collect();
    let values = basis.synthesize(&coeffs)?;
    Ok(MeanEstimate {
        rule,
        level_multiplier: multiplier,
        basis_family: basis.family(),
        coeffs,
        active,
        levels,
        values,
    })
}

/// Hard threshold at `multiplier * r_hat_k`.
pub fn hard_threshold<T: Real>(
    stats: &CoefficientStats<T>,
    basis: &BasisMatrix<T>,
    multiplier: T,
) -> Result<MeanEstimate<T>> {
    thresholded(stats, basis, Rule::Hard, multiplier)
}

/// Soft threshold at `multiplier * r_hat_k`.
pub fn soft_threshold<T: Real>(
    stats: &CoefficientStats<T>,
    basis: &BasisMatrix<T>,
    multiplier: T,
) -> Result<MeanEstimate<T>> {
    thresholded(stats, basis, Rule::Soft, multiplier)
}

/// Untruncated reconstruction; equals the ensemble average of the curves.
pub fn least_squares<T: Real>(stats: &CoefficientStats<T>, basis: &BasisMatrix<T>) -> Result<MeanEstimate<T>> {
    thresholded(stats, basis, Rule::LeastSquares, T::one())
}

pub fn estimate<T: Real>(
    stats: &CoefficientStats<T>,
    basis: &BasisMatrix<T>,
    rule: Rule,
    multiplier: T,
) -> Result<MeanEstimate<T>> {
    thresholded(stats, basis, rule, multiplier)
}

/// Coefficients, stats and estimate for one panel in one call.
pub fn fit<T: Real>(
    panel: &CurvePanel<T>,
    basis: &BasisMatrix<T>,
    rule: Rule,
    multiplier: T,
    alpha: T,
    delta: T,
) -> Result<(CoefficientStats<T>, MeanEstimate<T>)> {
    let stats = pooled_stats(&per_curve_coeffs(panel, basis)?, alpha, delta)?;
    let est = thresholded(&stats, basis, rule, multiplier)?;
    Ok((stats, est))
}

/// `f_bar = sum_k mu_k 1{|mu_k| >= r_k} phi_k`, returned as (coefficients, grid values).
pub fn truncated_target<T: Real>(
    mu: &[T],
    levels: &[T],
    basis: &BasisMatrix<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    if mu.len() != levels.len() {
        return Err(Error::invalid(format!(
            "{} coefficients but {} levels",
            mu.len(),
            levels.len()
        )));
    }
    let coeffs = hard_threshold_coeffs(mu, levels);
    let values = basis.synthesize(&coeffs)?;
    Ok((coeffs, values))
}

/// `max_j |g(t_j)|`.
pub fn sup_norm<T: Real>(g: &[T]) -> T {
    g.iter().fold(T::zero(), |a, v| a.max(v.abs()))
}

/// `sqrt((1/m) sum_j g(t_j)^2)`.
pub fn l2_norm<T: Real>(g: &[T]) -> T {
    if g.is_empty() {
        return T::zero();
    }
    (g.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(g.len())).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SparsityReport<T> {
    pub basis_family: BasisFamily,
    pub count: usize,
    /// 1-based indices of the surviving coefficients.
    pub surviving: Vec<usize>,
    pub sup_error: T,
    pub l2_error: T,
}

/// How many true coefficients survive the theoretical levels `r_k`, and how
/// far the truncated mean is from the full one.
pub fn sparsity_report<T: Real>(
    signal: &SignalSpec<T>,
    basis: &BasisMatrix<T>,
    levels: &TheoreticalLevels<T>,
) -> Result<SparsityReport<T>> {
    let f = eval_signal(signal, basis.grid())?;
    let mu = basis.analyze(&f)?;
    let (_, fbar) = truncated_target(&mu, &levels.r_k, basis)?;
    let surviving: Vec<usize> = mu
        .iter()
        .zip(&levels.r_k)
        .enumerate()
        .filter(|(_, (c, &r))| c.abs() >= r)
        .map(|(k, _)| k + 1)
        .collect();
    let diff: Vec<T> = fbar.iter().zip(&f).map(|(&a, &b)| a - b).collect();
    Ok(SparsityReport {
        basis_family: basis.family(),
        count: surviving.len(),
        surviving,
        sup_error: sup_norm(&diff),
        l2_error: l2_norm(&diff),
    })
}

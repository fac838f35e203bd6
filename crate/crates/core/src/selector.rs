//! Data-splitting selection over a library of candidate estimators.
//!
//! The curves are split at random into a fitting half `I1` and a validation
//! half `I2`. Every candidate is fitted on `I1` and scored by its mean squared
//! distance to the held-out curves; the smallest score wins, ties going to
//! the earliest candidate.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit, Rule};
use crate::grid_basis::BasisFamily;
use crate::process_sim::CurvePanel;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CandidateSpec<T> {
    pub basis_family: BasisFamily,
    pub rule: Rule,
    #[serde(default = "T::one")]
    pub multiplier: T,
    #[serde(default = "default_alpha")]
    pub alpha: T,
}

fn default_alpha<T: Real>() -> T {
    T::lit(0.05)
}

impl<T: Real> CandidateSpec<T> {
    pub fn new(basis_family: BasisFamily, rule: Rule, multiplier: T, alpha: T) -> Self {
        CandidateSpec {
            basis_family,
            rule,
            multiplier,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.multiplier != T::one() && self.multiplier != T::lit(2.0) {
            return Err(Error::invalid(format!(
                "level multiplier must be 1 or 2, got {}",
                self.multiplier
            )));
        }
        Ok(())
    }

    /// Short label such as `fourier-HT(r)` or `haar-OLS`.
    pub fn label(&self) -> String {
        let rule = match self.rule {
            Rule::LeastSquares => return format!("{}-OLS", self.basis_family),
            Rule::Hard => "HT",
            Rule::Soft => "ST",
        };
        let level = if self.multiplier == T::one() {
            "r".to_string()
        } else {
            format!("{}r", self.multiplier)
        };
        let mut label = format!("{}-{rule}({level})", self.basis_family);
        if self.alpha != default_alpha() {
            label.push_str(&format!("@{}", self.alpha));
        }
        label
    }
}

/// `{Fourier, Haar} x {Hard} x {1, 2} x {alpha = 0.05}`.
pub fn default_candidates<T: Real>() -> Vec<CandidateSpec<T>> {
    let mut out = Vec::new();
    for family in [BasisFamily::Fourier, BasisFamily::Haar] {
        for mult in [1.0, 2.0] {
            out.push(CandidateSpec::new(family, Rule::Hard, T::lit(mult), default_alpha()));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectOptions {
    /// Also refit the winner on all `n` curves. The selection itself (and
    /// `fitted_values`) always uses the fitting half only.
    pub refit_full: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SelectionResult<T> {
    pub candidates: Vec<CandidateSpec<T>>,
    /// Held-out risk per candidate; `None` where the candidate was skipped.
    pub risks: Vec<Option<T>>,
    pub winner_index: usize,
    pub winner: CandidateSpec<T>,
    /// Winner fitted on `I1`.
    pub fitted_values: Vec<T>,
    /// Winner refitted on every curve, when requested.
    pub refit_values: Option<Vec<T>>,
    pub split_seed: u64,
    pub i1_indices: Vec<usize>,
    pub i2_indices: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Uniform random split into halves; the fitting half takes the extra curve
/// when `n` is odd. Both index lists come back sorted.
pub fn split_panel(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 4 {
        return Err(Error::invalid(format!(
            "data splitting needs n >= 4 curves so each half has two, got {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n1 = n - n / 2;
    let mut i1 = idx[..n1].to_vec();
    let mut i2 = idx[n1..].to_vec();
    i1.sort_unstable();
    i2.sort_unstable();
    Ok((i1, i2))
}

/// `(1/n2) sum_{i in I2} (1/m) sum_j (Y_ij - g(t_j))^2`.
pub fn empirical_risk<T: Real>(panel: &CurvePanel<T>, indices: &[usize], g: &[T]) -> Result<T> {
    if indices.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    if g.len() != panel.m() {
        return Err(Error::invalid("fitted curve length differs from grid size"));
    }
    let y = panel.y();
    let mut total = T::zero();
    for &i in indices {
        if i >= panel.n() {
            return Err(Error::invalid(format!("curve index {i} out of range")));
        }
        let row = y.row(i);
        let ss: T = row.iter().zip(g).map(|(&v, &gj)| (v - gj) * (v - gj)).sum();
        total += ss / T::from_usize_lossy(panel.m());
    }
    Ok(total / T::from_usize_lossy(indices.len()))
}

fn fit_values<T: Real>(panel: &CurvePanel<T>, cand: &CandidateSpec<T>) -> Result<Vec<T>> {
    let basis = cand.basis_family.build(panel.grid())?;
    let (_, est) = fit(panel, &basis, cand.rule, cand.multiplier, cand.alpha, T::zero())?;
    Ok(est.values)
}

pub fn select<T: Real>(
    panel: &CurvePanel<T>,
    candidates: &[CandidateSpec<T>],
    seed: u64,
) -> Result<SelectionResult<T>> {
    select_with(panel, candidates, seed, SelectOptions::default())
}

pub fn select_with<T: Real>(
    panel: &CurvePanel<T>,
    candidates: &[CandidateSpec<T>],
    seed: u64,
    options: SelectOptions,
) -> Result<SelectionResult<T>> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate list is empty"));
    }
    for c in candidates {
        c.validate()?;
    }
    let (i1, i2) = split_panel(panel.n(), seed)?;
    let train = panel.subset(&i1)?;

    let mut warnings = Vec::new();
    let mut risks = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, T, Vec<T>)> = None;
    for (l, cand) in candidates.iter().enumerate() {
        if !cand.basis_family.supports(panel.m()) {
            warnings.push(format!(
                "candidate {l} ({}) skipped: {} basis unavailable for m = {}",
                cand.label(),
                cand.basis_family,
                panel.m()
            ));
            risks.push(None);
            continue;
        }
        let g = fit_values(&train, cand)?;
        let risk = empirical_risk(panel, &i2, &g)?;
        risks.push(Some(risk));
        let better = match &best {
            None => true,
            Some((_, r, _)) => risk < *r,
        };
        if better {
            best = Some((l, risk, g));
        }
    }
    let (winner_index, _, fitted_values) =
        best.ok_or_else(|| Error::invalid("no candidate is usable for this grid"))?;
    let winner = candidates[winner_index];
    let refit_values = if options.refit_full {
        Some(fit_values(panel, &winner)?)
    } else {
        None
    };
    Ok(SelectionResult {
        candidates: candidates.to_vec(),
        risks,
        winner_index,
        winner,
        fitted_values,
        refit_values,
        split_seed: seed,
        i1_indices: i1,
        i2_indices: i2,
        warnings,
    })
}

//! Synthetic curve panels `Y_ij = f(t_j) + Z_i(t_j) + eps_ij`.
//!
//! Mean signals, zero-mean Gaussian processes on the grid, Gaussian
//! measurement noise, the variance calibration used by the simulation
//! study, and coefficient variances `sigma_k^2` computed from a known
//! covariance kernel.
//!
//! Every curve draws from its own ChaCha stream keyed by `(seed, i)`, so a
//! panel is reproducible no matter how the curves are scheduled.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_basis::{BasisMatrix, Grid};
use crate::scalar::Real;

/// Autoregressive coefficient used when a scenario does not set one.
pub const DEFAULT_AR_PHI: f64 = 0.5;

/// Note attached to reports: the bump signal is always evaluated with
/// negative exponents.
pub const SIGNAL1_FORM: &str = "signal1: c1*exp(-64(t-0.25)^2) + c2*exp(-256(t-0.75)^2)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum SignalSpec<T> {
    /// Two Gaussian bumps at 0.25 and 0.75.
    Signal1 { c1: T, c2: T },
    /// Two plateaus on (0.35, 0.375) and (0.75, 0.875).
    Signal2 { c3: T },
    /// Values given directly on the grid.
    Custom { values: Vec<T> },
}

impl<T: Real> SignalSpec<T> {
    /// Amplitudes used for the sparsity illustration (0.75, 1.93).
    pub fn signal1_default() -> Self {
        SignalSpec::Signal1 {
            c1: T::lit(0.75),
            c2: T::lit(1.93),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        match self {
            SignalSpec::Signal1 { c1, c2 } => SignalSpec::Signal1 {
                c1: *c1 * factor,
                c2: *c2 * factor,
            },
            SignalSpec::Signal2 { c3 } => SignalSpec::Signal2 { c3: *c3 * factor },
            SignalSpec::Custom { values } => SignalSpec::Custom {
                values: values.iter().map(|&v| v * factor).collect(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = match self {
            SignalSpec::Signal1 { c1, c2 } => c1.is_finite() && c2.is_finite(),
            SignalSpec::Signal2 { c3 } => c3.is_finite(),
            SignalSpec::Custom { values } => values.iter().all(|v| v.is_finite()),
        };
        if finite {
            Ok(())
        } else {
            Err(Error::invalid("signal amplitudes must be finite"))
        }
    }
}

pub fn eval_signal<T: Real>(spec: &SignalSpec<T>, grid: &Grid<T>) -> Result<Vec<T>> {
    spec.validate()?;
    match spec {
        SignalSpec::Signal1 { c1, c2 } => Ok(grid
            .points()
            .iter()
            .map(|&t| {
                let a = t - T::lit(0.25);
                let b = t - T::lit(0.75);
                *c1 * (T::lit(-64.0) * a * a).exp() + *c2 * (T::lit(-256.0) * b * b).exp()
            })
            .collect()),
        SignalSpec::Signal2 { c3 } => Ok(grid
            .points()
            .iter()
            .map(|&t| {
                let first = t > T::lit(0.35) && t < T::lit(0.375);
                let second = t > T::lit(0.75) && t < T::lit(0.875);
                let hits = first as u8 + second as u8;
                *c3 * T::from_u8(hits).unwrap()
            })
            .collect()),
        SignalSpec::Custom { values } => {
            if values.len() != grid.m() {
                return Err(Error::invalid(format!(
                    "custom signal has {} values, grid has {}",
                    values.len(),
                    grid.m()
                )));
            }
            Ok(values.clone())
        }
    }
}

/// `|max_j f(t_j) - min_j f(t_j)|`.
pub fn signal_range<T: Real>(values: &[T]) -> T {
    let (lo, hi) = values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if values.is_empty() {
        T::zero()
    } else {
        (hi - lo).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    BrownianBridge,
    BrownianMotion,
    #[serde(rename = "ar1")]
    AR1,
    /// Cumulative sum of an AR(1) path.
    #[serde(rename = "arima11")]
    ARIMA11,
    /// Identically zero; for degenerate scenarios.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ProcessSpec<T> {
    pub kind: ProcessKind,
    /// AR coefficient; ignored by the Brownian families.
    #[serde(default = "default_phi")]
    pub ar_phi: T,
    /// Innovation standard deviation; ignored by the Brownian families.
    #[serde(default = "T::one")]
    pub innovation_sd: T,
}

fn default_phi<T: Real>() -> T {
    T::lit(DEFAULT_AR_PHI)
}

impl<T: Real> ProcessSpec<T> {
    pub fn new(kind: ProcessKind) -> Self {
        ProcessSpec {
            kind,
            ar_phi: default_phi(),
            innovation_sd: T::one(),
        }
    }

    pub fn brownian_bridge() -> Self {
        Self::new(ProcessKind::BrownianBridge)
    }

    pub fn brownian_motion() -> Self {
        Self::new(ProcessKind::BrownianMotion)
    }

    pub fn ar1(phi: T, innovation_sd: T) -> Self {
        ProcessSpec {
            kind: ProcessKind::AR1,
            ar_phi: phi,
            innovation_sd,
        }
    }

    pub fn arima11(phi: T, innovation_sd: T) -> Self {
        ProcessSpec {
            kind: ProcessKind::ARIMA11,
            ar_phi: phi,
            innovation_sd,
        }
    }

    pub fn zero() -> Self {
        Self::new(ProcessKind::Zero)
    }

    fn validate(&self) -> Result<()> {
        if matches!(self.kind, ProcessKind::AR1 | ProcessKind::ARIMA11) {
            if !(self.ar_phi.abs() < T::one()) {
                return Err(Error::invalid(format!(
                    "AR coefficient must lie in (-1, 1), got {}",
                    self.ar_phi
                )));
            }
            if !(self.innovation_sd >= T::zero()) || !self.innovation_sd.is_finite() {
                return Err(Error::invalid("innovation_sd must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Stationary variance of the AR(1) component.
    pub fn ar_variance(&self) -> T {
        let sd = self.innovation_sd;
        sd * sd / (T::one() - self.ar_phi * self.ar_phi)
    }

    fn ar_autocov(&self, lag: usize) -> T {
        self.ar_variance() * self.ar_phi.powi(lag as i32)
    }
}

/// `Gamma(s, t)`. The AR families are defined on grid indices, so `s` and
/// `t` must be design points for them.
pub fn covariance_kernel<T: Real>(
    process: &ProcessSpec<T>,
    grid: &Grid<T>,
    s: T,
    t: T,
) -> Result<T> {
    process.validate()?;
    match process.kind {
        ProcessKind::BrownianBridge => Ok(s.min(t) - s * t),
        ProcessKind::BrownianMotion => Ok(s.min(t)),
        ProcessKind::Zero => Ok(T::zero()),
        ProcessKind::AR1 | ProcessKind::ARIMA11 => {
            let (i, j) = match (grid.index_of(s), grid.index_of(t)) {
                (Some(i), Some(j)) => (i, j),
                _ => {
                    return Err(Error::invalid(format!(
                        "{:?} covariance is only defined on grid points, got ({s}, {t})",
                        process.kind
                    )))
                }
            };
            if process.kind == ProcessKind::AR1 {
                Ok(process.ar_autocov(i.abs_diff(j)))
            } else {
                let mut acc = T::zero();
                for a in 0..=i {
                    for b in 0..=j {
                        acc += process.ar_autocov(a.abs_diff(b));
                    }
                }
                Ok(acc)
            }
        }
    }
}

/// Full `m x m` matrix `Gamma(t_j, t_j')`.
pub fn covariance_matrix<T: Real>(process: &ProcessSpec<T>, grid: &Grid<T>) -> Result<Array2<T>> {
    process.validate()?;
    let m = grid.m();
    let t = grid.points();
    let mut g = Array2::<T>::zeros((m, m));
    match process.kind {
        ProcessKind::BrownianBridge | ProcessKind::BrownianMotion | ProcessKind::Zero => {
            for i in 0..m {
                for j in 0..m {
                    g[(i, j)] = covariance_kernel(process, grid, t[i], t[j])?;
                }
            }
        }
        ProcessKind::AR1 => {
            for i in 0..m {
                for j in 0..m {
                    g[(i, j)] = process.ar_autocov(i.abs_diff(j));
                }
            }
        }
        ProcessKind::ARIMA11 => {
            // Two-dimensional prefix sum of the AR autocovariance.
            for i in 0..m {
                for j in 0..m {
                    let mut v = process.ar_autocov(i.abs_diff(j));
                    if i > 0 {
                        v += g[(i - 1, j)];
                    }
                    if j > 0 {
                        v += g[(i, j - 1)];
                    }
                    if i > 0 && j > 0 {
                        v -= g[(i - 1, j - 1)];
                    }
                    g[(i, j)] = v;
                }
            }
        }
    }
    Ok(g)
}

/// One zero-mean path `Z(t_1), ..., Z(t_m)`.
pub fn simulate_process<T: Real, R: Rng + ?Sized>(
    process: &ProcessSpec<T>,
    grid: &Grid<T>,
    rng: &mut R,
) -> Vec<T> {
    let m = grid.m();
    let t = grid.points();
    match process.kind {
        ProcessKind::Zero => vec![T::zero(); m],
        ProcessKind::BrownianMotion => brownian_path(t, rng).0,
        ProcessKind::BrownianBridge => {
            let (w, w1) = brownian_path(t, rng);
            w.iter().zip(t).map(|(&w, &tj)| w - tj * w1).collect()
        }
        ProcessKind::AR1 => ar1_path(process, m, rng),
        ProcessKind::ARIMA11 => {
            let mut acc = T::zero();
            ar1_path(process, m, rng)
                .into_iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect()
        }
    }
}

/// Brownian motion at the grid points plus its value at t = 1.
fn brownian_path<T: Real, R: Rng + ?Sized>(t: &[T], rng: &mut R) -> (Vec<T>, T) {
    let mut prev = T::zero();
    let mut w = T::zero();
    let mut path = Vec::with_capacity(t.len());
    for &tj in t {
        w += (tj - prev).sqrt() * T::standard_normal(rng);
        prev = tj;
        path.push(w);
    }
    let w1 = w + (T::one() - prev).max(T::zero()).sqrt() * T::standard_normal(rng);
    (path, w1)
}

fn ar1_path<T: Real, R: Rng + ?Sized>(process: &ProcessSpec<T>, m: usize, rng: &mut R) -> Vec<T> {
    let phi = process.ar_phi;
    let sd = process.innovation_sd;
    let mut z = process.ar_variance().sqrt() * T::standard_normal(rng);
    let mut path = Vec::with_capacity(m);
    path.push(z);
    for _ in 1..m {
        z = phi * z + sd * T::standard_normal(rng);
        path.push(z);
    }
    path
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite variances"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// `median_j Gamma(t_j, t_j)`.
pub fn median_process_variance<T: Real>(process: &ProcessSpec<T>, grid: &Grid<T>) -> Result<T> {
    let g = covariance_matrix(process, grid)?;
    Ok(median(g.diag().to_vec()))
}

/// Set the innovation scale of the AR families so their (median) pointwise
/// variance equals the median variance of the paired Brownian process:
/// AR(1) pairs with the bridge, ARIMA(1,1) with Brownian motion.
pub fn match_process_variance<T: Real>(
    process: &ProcessSpec<T>,
    grid: &Grid<T>,
) -> Result<ProcessSpec<T>> {
    process.validate()?;
    let pair = match process.kind {
        ProcessKind::AR1 => ProcessSpec::brownian_bridge(),
        ProcessKind::ARIMA11 => ProcessSpec::brownian_motion(),
        _ => return Ok(*process),
    };
    let target = median_process_variance(&pair, grid)?;
    let unit = ProcessSpec {
        innovation_sd: T::one(),
        ..*process
    };
    let unit_var = median_process_variance(&unit, grid)?;
    Ok(ProcessSpec {
        innovation_sd: (target / unit_var).sqrt(),
        ..*process
    })
}

/// Result of variance and SNR calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Calibration<T> {
    pub process: ProcessSpec<T>,
    pub signal: SignalSpec<T>,
    pub noise_sd: T,
    /// Median pointwise process variance, the `Var[Z]` used for both ratios.
    pub process_variance: T,
}

/// Choose `sigma_eps^2 = Var[Z] / sigma_star` and rescale the signal so that
/// `Range[f] = snr * sqrt(Var[Z] + sigma_eps^2)`.
pub fn calibrate<T: Real>(
    process: &ProcessSpec<T>,
    grid: &Grid<T>,
    sigma_star: T,
    snr: T,
    signal: &SignalSpec<T>,
) -> Result<Calibration<T>> {
    if !(sigma_star > T::zero()) || !(snr > T::zero()) {
        return Err(Error::invalid("sigma_star and snr must be positive"));
    }
    let process = match_process_variance(process, grid)?;
    let var_z = median_process_variance(&process, grid)?;
    if !(var_z > T::zero()) {
        return Err(Error::invalid("cannot calibrate against a zero-variance process"));
    }
    let noise_var = var_z / sigma_star;
    let range = signal_range(&eval_signal(signal, grid)?);
    if !(range > T::zero()) {
        return Err(Error::invalid("signal has zero range; SNR scaling is undefined"));
    }
    let factor = snr * (var_z + noise_var).sqrt() / range;
    Ok(Calibration {
        process,
        signal: signal.scaled(factor),
        noise_sd: noise_var.sqrt(),
        process_variance: var_z,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PanelConfig<T> {
    pub n: usize,
    #[serde(rename = "m")]
    pub grid: Grid<T>,
    pub signal: SignalSpec<T>,
    pub process: ProcessSpec<T>,
    pub noise_sd: T,
    pub seed: u64,
}

impl<T: Real> PanelConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("panel needs n >= 2 curves, got {}", self.n)));
        }
        if !(self.noise_sd >= T::zero()) || !self.noise_sd.is_finite() {
            return Err(Error::invalid("noise_sd must be finite and >= 0"));
        }
        self.process.validate()?;
        eval_signal(&self.signal, &self.grid).map(|_| ())
    }

    /// Copy of this configuration with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        PanelConfig {
            seed,
            ..self.clone()
        }
    }
}

/// `n x m` matrix of observations on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePanel<T> {
    grid: Grid<T>,
    y: Array2<T>,
    true_mean: Option<Vec<T>>,
}

impl<T: Real> CurvePanel<T> {
    pub fn new(grid: Grid<T>, y: Array2<T>) -> Result<Self> {
        if y.ncols() != grid.m() {
            return Err(Error::invalid(format!(
                "panel has {} columns but the grid has {} points",
                y.ncols(),
                grid.m()
            )));
        }
        if y.nrows() == 0 {
            return Err(Error::invalid("panel has no curves"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("panel contains non-finite values"));
        }
        Ok(CurvePanel {
            grid,
            y,
            true_mean: None,
        })
    }

    pub fn with_true_mean(mut self, mean: Vec<T>) -> Result<Self> {
        if mean.len() != self.grid.m() {
            return Err(Error::invalid("true mean length differs from grid size"));
        }
        self.true_mean = Some(mean);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn y(&self) -> &Array2<T> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }

    pub fn true_mean(&self) -> Option<&[T]> {
        self.true_mean.as_deref()
    }

    /// Panel made of the listed curves, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n()) {
            return Err(Error::invalid(format!("curve index {bad} out of range")));
        }
        let y = self.y.select(ndarray::Axis(0), rows);
        Ok(CurvePanel {
            grid: self.grid.clone(),
            y,
            true_mean: self.true_mean.clone(),
        })
    }

    /// Adds `c` to every observation (and to the stored true mean).
    pub fn shifted(&self, c: T) -> Self {
        CurvePanel {
            grid: self.grid.clone(),
            y: self.y.mapv(|v| v + c),
            true_mean: self
                .true_mean
                .as_ref()
                .map(|m| m.iter().map(|&v| v + c).collect()),
        }
    }
}

/// RNG for curve `i` of a panel seeded with `seed`.
pub fn curve_rng(seed: u64, curve: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(curve as u64);
    rng
}

/// Independent child seed for replicate `index` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_panel<T: Real>(config: &PanelConfig<T>) -> Result<CurvePanel<T>> {
    config.validate()?;
    let grid = &config.grid;
    let m = grid.m();
    let f = eval_signal(&config.signal, grid)?;
    let rows: Vec<Vec<T>> = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = curve_rng(config.seed, i);
            let z = simulate_process(&config.process, grid, &mut rng);
            (0..m)
                .map(|j| f[j] + z[j] + config.noise_sd * T::standard_normal(&mut rng))
                .collect()
        })
        .collect();
    let flat: Vec<T> = rows.into_iter().flatten().collect();
    let y = Array2::from_shape_vec((config.n, m), flat).expect("n*m values");
    CurvePanel::new(grid.clone(), y)?.with_true_mean(f)
}

/// `sigma_k^2 = (1/m^2) sum_j sum_j' G(t_j, t_j') phi_k(t_j) phi_k(t_j')`
/// for an arbitrary covariance matrix `G` on the grid.
pub fn sigma_k_from_covariance<T: Real>(cov: &Array2<T>, basis: &BasisMatrix<T>) -> Result<Vec<T>> {
    let m = basis.m();
    if cov.dim() != (m, m) {
        return Err(Error::invalid(format!(
            "covariance must be {m}x{m}, got {:?}",
            cov.dim()
        )));
    }
    let phi = basis.values();
    let g_phi = cov.dot(phi);
    let scale = T::one() / T::from_usize_lossy(m * m);
    Ok((0..m)
        .map(|k| {
            let s: T = phi.column(k).dot(&g_phi.column(k)) * scale;
            // Round-off can leave tiny negatives for nearly null directions.
            s.max(T::zero())
        })
        .collect())
}

pub fn sigma_k_theoretical<T: Real>(
    process: &ProcessSpec<T>,
    basis: &BasisMatrix<T>,
) -> Result<Vec<T>> {
    let cov = covariance_matrix(process, basis.grid())?;
    sigma_k_from_covariance(&cov, basis)
}

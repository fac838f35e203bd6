//! Midpoint design grid and bases orthonormal in the empirical measure
//! that puts mass `1/m` on every grid point.
//!
//! Basis matrices are stored with one row per grid point and one column per
//! basis function, so entry `(j, k)` is `phi_k(t_j)` (0-based in code,
//! 1-based in the docs to match the usual `k = 1..m` numbering).

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Equispaced design `t_j = (j - 1/2) / m`, `j = 1..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    points: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn new(m: usize) -> Result<Self> {
        make_grid(m)
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Index of `t` on the grid, if `t` is (to rounding) one of the design points.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let m = T::from_usize_lossy(self.m());
        let pos = t * m - T::lit(0.5);
        let j = pos.round();
        if j < T::zero() || (pos - j).abs() > T::lit(1e-6) {
            return None;
        }
        let j = j.to_usize()?;
        (j < self.m()).then_some(j)
    }
}

impl<T: Real> Serialize for Grid<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u64(self.m() as u64)
    }
}

impl<'de, T: Real> Deserialize<'de> for Grid<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = usize::deserialize(d)?;
        make_grid(m).map_err(serde::de::Error::custom)
    }
}

pub fn make_grid<T: Real>(m: usize) -> Result<Grid<T>> {
    if m < 2 {
        return Err(Error::invalid(format!("grid needs m >= 2, got {m}")));
    }
    let mf = T::from_usize_lossy(m);
    let points = (1..=m)
        .map(|j| (T::from_usize_lossy(j) - T::lit(0.5)) / mf)
        .collect();
    Ok(Grid { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    Fourier,
    Haar,
}

impl BasisFamily {
    pub fn build<T: Real>(self, grid: &Grid<T>) -> Result<BasisMatrix<T>> {
        match self {
            BasisFamily::Fourier => Ok(fourier_basis(grid)),
            BasisFamily::Haar => haar_basis(grid),
        }
    }

    /// Whether this family has a full orthonormal system on `m` points.
    pub fn supports(self, m: usize) -> bool {
        match self {
            BasisFamily::Fourier => m >= 2,
            BasisFamily::Haar => m >= 2 && m.is_power_of_two(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::Fourier => "fourier",
            BasisFamily::Haar => "haar",
        }
    }
}

impl std::fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BasisFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fourier" => Ok(BasisFamily::Fourier),
            "haar" => Ok(BasisFamily::Haar),
            other => Err(Error::invalid(format!("unknown basis family `{other}`"))),
        }
    }
}

/// Square `m x m` matrix of basis functions evaluated on the grid.
#[derive(Debug, Clone)]
pub struct BasisMatrix<T> {
    family: BasisFamily,
    grid: Grid<T>,
    values: Array2<T>,
    sup_norms: Vec<T>,
}

impl<T: Real> BasisMatrix<T> {
    fn from_values(family: BasisFamily, grid: Grid<T>, values: Array2<T>) -> Self {
        let sup_norms = values
            .columns()
            .into_iter()
            .map(|c| c.iter().fold(T::zero(), |acc, v| acc.max(v.abs())))
            .collect();
        BasisMatrix {
            family,
            grid,
            values,
            sup_norms,
        }
    }

    /// Wrap an arbitrary square matrix. Used to exercise the orthonormality
    /// check on perturbed systems; no orthonormality is enforced here.
    pub fn from_raw(family: BasisFamily, grid: Grid<T>, values: Array2<T>) -> Result<Self> {
        let m = grid.m();
        if values.dim() != (m, m) {
            return Err(Error::invalid(format!(
                "basis matrix must be {m}x{m}, got {:?}",
                values.dim()
            )));
        }
        Ok(Self::from_values(family, grid, values))
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.grid.m()
    }

    /// Entry `(j, k)` is `phi_k(t_j)`.
    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn column(&self, k: usize) -> ArrayView1<'_, T> {
        self.values.column(k)
    }

    pub fn sup_norms(&self) -> &[T] {
        &self.sup_norms
    }

    pub fn max_sup_norm(&self) -> T {
        self.sup_norms.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    pub fn analyze(&self, values: &[T]) -> Result<Vec<T>> {
        analyze(values, self)
    }

    pub fn synthesize(&self, coeffs: &[T]) -> Result<Vec<T>> {
        synthesize(coeffs, self)
    }
}

/// Trigonometric system on the midpoint grid.
///
/// `phi_1 = 1`, then alternating `sqrt(2) cos(2 pi l t)`, `sqrt(2) sin(2 pi l t)`.
/// For even `m` the last column is the alternating sequence `(-1)^(j-1)`,
/// which is the only surviving Nyquist-frequency function on this grid.
pub fn fourier_basis<T: Real>(grid: &Grid<T>) -> BasisMatrix<T> {
    let m = grid.m();
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let sqrt2 = T::lit(std::f64::consts::SQRT_2);
    let mut values = Array2::<T>::zeros((m, m));
    values.column_mut(0).fill(T::one());

    let mut k = 1;
    let mut freq = 1usize;
    while k < m {
        if 2 * freq == m {
            for (j, v) in values.column_mut(k).iter_mut().enumerate() {
                *v = if j % 2 == 0 { T::one() } else { -T::one() };
            }
            break;
        }
        let l = T::from_usize_lossy(freq);
        for (j, &t) in grid.points().iter().enumerate() {
            values[(j, k)] = sqrt2 * (two_pi * l * t).cos();
        }
        k += 1;
        if k < m {
            for (j, &t) in grid.points().iter().enumerate() {
                values[(j, k)] = sqrt2 * (two_pi * l * t).sin();
            }
            k += 1;
        }
        freq += 1;
    }
    BasisMatrix::from_values(BasisFamily::Fourier, grid.clone(), values)
}

/// Haar system: the constant followed by `psi_{l,q}` for `l = 0..J-1`,
/// `q = 0..2^l - 1`, in that order. Requires `m = 2^J`.
pub fn haar_basis<T: Real>(grid: &Grid<T>) -> Result<BasisMatrix<T>> {
    let m = grid.m();
    if !BasisFamily::Haar.supports(m) {
        return Err(Error::invalid(format!(
            "Haar basis needs m to be a power of two, got {m}"
        )));
    }
    let levels = m.trailing_zeros() as usize;
    let mut values = Array2::<T>::zeros((m, m));
    values.column_mut(0).fill(T::one());

    // On the midpoint grid, psi_{l,q} is supported on the block of
    // m / 2^l consecutive points starting at q * m / 2^l: positive on
    // the first half, negative on the second.
    let mut k = 1;
    for l in 0..levels {
        let height = T::lit(2f64.powf(l as f64 / 2.0));
        let block = m >> l;
        let half = block / 2;
        for q in 0..(1usize << l) {
            let start = q * block;
            for j in start..start + half {
                values[(j, k)] = height;
            }
            for j in start + half..start + block {
                values[(j, k)] = -height;
            }
            k += 1;
        }
    }
    Ok(BasisMatrix::from_values(BasisFamily::Haar, grid.clone(), values))
}

/// `mu_k = (1/m) sum_j values_j phi_k(t_j)`.
pub fn analyze<T: Real>(values: &[T], basis: &BasisMatrix<T>) -> Result<Vec<T>> {
    let m = basis.m();
    if values.len() != m {
        return Err(Error::invalid(format!(
            "analyze: expected {m} values, got {}",
            values.len()
        )));
    }
    let v = ArrayView1::from(values);
    let inv_m = T::one() / T::from_usize_lossy(m);
    Ok(basis.values.t().dot(&v).mapv(|x| x * inv_m).to_vec())
}

/// `g(t_j) = sum_k coeffs_k phi_k(t_j)`.
pub fn synthesize<T: Real>(coeffs: &[T], basis: &BasisMatrix<T>) -> Result<Vec<T>> {
    let m = basis.m();
    if coeffs.len() != m {
        return Err(Error::invalid(format!(
            "synthesize: expected {m} coefficients, got {}",
            coeffs.len()
        )));
    }
    let c = ArrayView1::from(coeffs);
    Ok(basis.values.dot(&c).to_vec())
}

/// Largest entrywise deviation of the empirical Gram matrix from the identity.
pub fn check_orthonormality<T: Real>(basis: &BasisMatrix<T>) -> T {
    let m = basis.values.nrows();
    let inv_m = T::one() / T::from_usize_lossy(m);
    let gram = basis.values.t().dot(&basis.values);
    let mut worst = T::zero();
    for ((k, kk), &g) in gram.indexed_iter() {
        let target = if k == kk { T::one() } else { T::zero() };
        worst = worst.max((g * inv_m - target).abs());
    }
    worst
}

/// `(1/m) sum_j |phi_k(t_j)|` for every k; the per-coefficient factor in
/// the average band width.
pub fn mean_abs<T: Real>(basis: &BasisMatrix<T>) -> Array1<T> {
    let inv_m = T::one() / T::from_usize_lossy(basis.m());
    basis
        .values
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<T>() * inv_m)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_points_follow_midpoint_rule() {
        let g = make_grid::<f64>(2).unwrap();
        assert_eq!(g.points(), &[0.25, 0.75]);
        let g = make_grid::<f64>(4).unwrap();
        assert_eq!(g.points(), &[0.125, 0.375, 0.625, 0.875]);
        let g = make_grid::<f64>(256).unwrap();
        assert_eq!(g.m(), 256);
        assert_eq!(g.points()[0], 1.0 / 512.0);
        for w in g.points().windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], 1.0 / 256.0, epsilon = 1e-15);
        }
        assert!(g.points().iter().all(|&t| t > 0.0 && t < 1.0));
    }

    #[test]
    fn grid_rejects_tiny_m() {
        assert!(matches!(make_grid::<f64>(1), Err(Error::InvalidArgument(_))));
        assert!(make_grid::<f64>(0).is_err());
    }

    #[test]
    fn grid_index_lookup() {
        let g = make_grid::<f64>(8).unwrap();
        assert_eq!(g.index_of(0.0625), Some(0));
        assert_eq!(g.index_of(0.9375), Some(7));
        assert_eq!(g.index_of(0.5), None);
    }

    #[test]
    fn fourier_small_cases() {
        let g = make_grid::<f64>(4).unwrap();
        let b = fourier_basis(&g);
        for j in 0..4 {
            assert_eq!(b.values()[(j, 0)], 1.0);
        }
        let dot: f64 = (0..4).map(|j| b.values()[(j, 1)] * b.values()[(j, 2)]).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(dot, 0.0, epsilon = 1e-15);
        // Nyquist column alternates.
        let last: Vec<f64> = b.column(3).to_vec();
        assert_eq!(last, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn fourier_odd_m_is_complete() {
        let g = make_grid::<f64>(7).unwrap();
        assert!(check_orthonormality(&fourier_basis(&g)) < 1e-12);
    }

    #[test]
    fn haar_small_cases() {
        let g = make_grid::<f64>(2).unwrap();
        let b = haar_basis(&g).unwrap();
        assert_eq!(b.column(0).to_vec(), vec![1.0, 1.0]);
        assert_eq!(b.column(1).to_vec(), vec![1.0, -1.0]);

        let g = make_grid::<f64>(4).unwrap();
        let b = haar_basis(&g).unwrap();
        assert_eq!(b.column(1).to_vec(), vec![1.0, 1.0, -1.0, -1.0]);
        let s = 2f64.sqrt();
        assert_eq!(b.column(2).to_vec(), vec![s, -s, 0.0, 0.0]);
        assert_eq!(b.column(3).to_vec(), vec![0.0, 0.0, s, -s]);
    }

    #[test]
    fn haar_matches_indicator_definition() {
        // Evaluate psi_{l,q} straight from its indicator form at the grid points.
        let m = 32;
        let g = make_grid::<f64>(m).unwrap();
        let b = haar_basis(&g).unwrap();
        let mut k = 1;
        for l in 0..5 {
            let scale = 2f64.powi(l);
            for q in 0..(1 << l) {
                let q = q as f64;
                for (j, &t) in g.points().iter().enumerate() {
                    let up = (q / scale <= t && t < (q + 0.5) / scale) as i32 as f64;
                    let down = ((q + 0.5) / scale <= t && t < (q + 1.0) / scale) as i32 as f64;
                    let expect = scale.sqrt() * (up - down);
                    assert_abs_diff_eq!(b.values()[(j, k)], expect, epsilon = 1e-14);
                }
                k += 1;
            }
        }
    }

    #[test]
    fn haar_rejects_non_power_of_two() {
        let g = make_grid::<f64>(12).unwrap();
        assert!(matches!(haar_basis(&g), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn orthonormality_holds_for_both_families() {
        for m in [16, 64, 256] {
            let g = make_grid::<f64>(m).unwrap();
            assert!(check_orthonormality(&fourier_basis(&g)) < 1e-10, "fourier m={m}");
            assert!(check_orthonormality(&haar_basis(&g).unwrap()) < 1e-10, "haar m={m}");
        }
    }

    #[test]
    fn corrupted_basis_is_detected() {
        let g = make_grid::<f64>(64).unwrap();
        let mut values = fourier_basis(&g).values().clone();
        values[(10, 5)] += 0.5;
        let bad = BasisMatrix::from_raw(BasisFamily::Fourier, g, values).unwrap();
        assert!(check_orthonormality(&bad) > 1e-3);
    }

    #[test]
    fn sup_norms() {
        let g = make_grid::<f64>(64).unwrap();
        let h = haar_basis(&g).unwrap();
        assert_eq!(h.sup_norms()[0], 1.0);
        let mut k = 1;
        for l in 0..6 {
            for _ in 0..(1 << l) {
                assert_abs_diff_eq!(h.sup_norms()[k], 2f64.powf(l as f64 / 2.0), epsilon = 1e-14);
                k += 1;
            }
        }
        let f = fourier_basis(&g);
        assert!(f.sup_norms().iter().all(|&s| s <= 2f64.sqrt() + 1e-12));
    }

    #[test]
    fn analyze_constant_and_synthesize_units() {
        let g = make_grid::<f64>(16).unwrap();
        let b = fourier_basis(&g);
        let mu = b.analyze(&[3.5; 16]).unwrap();
        assert_abs_diff_eq!(mu[0], 3.5, epsilon = 1e-14);
        assert!(mu[1..].iter().all(|c| c.abs() < 1e-13));

        assert_eq!(b.synthesize(&[0.0; 16]).unwrap(), vec![0.0; 16]);
        let mut e1 = vec![0.0; 16];
        e1[0] = 1.0;
        assert_eq!(b.synthesize(&e1).unwrap(), vec![1.0; 16]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let g = make_grid::<f64>(8).unwrap();
        let b = fourier_basis(&g);
        assert!(b.analyze(&[1.0; 7]).is_err());
        assert!(b.synthesize(&[1.0; 9]).is_err());
    }

    #[test]
    fn round_trips_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for family in [BasisFamily::Fourier, BasisFamily::Haar] {
            let g = make_grid::<f64>(64).unwrap();
            let b = family.build(&g).unwrap();
            for _ in 0..20 {
                let v: Vec<f64> = (0..64).map(|_| rng.random_range(-10.0..10.0)).collect();
                let back = b.synthesize(&b.analyze(&v).unwrap()).unwrap();
                let mu: Vec<f64> = (0..64).map(|_| rng.random_range(-10.0..10.0)).collect();
                let mu_back = b.analyze(&b.synthesize(&mu).unwrap()).unwrap();
                for j in 0..64 {
                    assert_abs_diff_eq!(back[j], v[j], epsilon = 1e-10);
                    assert_abs_diff_eq!(mu_back[j], mu[j], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn single_precision_basis() {
        let g = make_grid::<f32>(64).unwrap();
        assert!(check_orthonormality(&fourier_basis(&g)) < 1e-5);
        assert!(check_orthonormality(&haar_basis(&g).unwrap()) < 1e-6);
    }

    #[test]
    fn mean_abs_of_constant_and_haar() {
        let g = make_grid::<f64>(8).unwrap();
        let h = haar_basis(&g).unwrap();
        let w = mean_abs(&h);
        // Every Haar function has (1/m) sum |psi| = 2^{-l/2}.
        assert_abs_diff_eq!(w[0], 1.0);
        assert_abs_diff_eq!(w[1], 1.0);
        assert_abs_diff_eq!(w[2], 2f64.powf(-0.5), epsilon = 1e-14);
        assert_abs_diff_eq!(w[7], 0.5, epsilon = 1e-14);
    }
}

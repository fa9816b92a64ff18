//! Empirical distributions: quantiles, histograms, Gaussian kernel density
//! estimates and Q-Q curves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{normal_pdf, normal_quantile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmpiricalError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample at index {0} is not finite")]
    NonFinite(usize),
    #[error("quantile level {0} is outside (0, 1)")]
    QuantileOutOfRange(f64),
    #[error("sample has no spread (zero deviation and zero range)")]
    DegenerateSample,
    #[error("sample standard deviation is zero")]
    ZeroVariance,
    #[error("grid needs at least 16 points, got {0}")]
    GridTooSmall(usize),
    #[error("bandwidth {0} is not a finite positive number")]
    InvalidBandwidth(f64),
    #[error("bin count must be at least 1")]
    InvalidBinCount,
    #[error("quantile levels must be strictly increasing")]
    LevelsNotIncreasing,
}

/// Anything with an inverse CDF.
pub trait QuantileFunction {
    fn quantile(&self, q: f64) -> Result<f64, EmpiricalError>;
}

pub(crate) fn check_level(q: f64) -> Result<(), EmpiricalError> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(EmpiricalError::QuantileOutOfRange(q))
    }
}

/// The standard normal law, as a quantile source for Q-Q curves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StandardGaussian;

impl QuantileFunction for StandardGaussian {
    fn quantile(&self, q: f64) -> Result<f64, EmpiricalError> {
        gaussian_quantile(q)
    }
}

pub fn gaussian_quantile(q: f64) -> Result<f64, EmpiricalError> {
    check_level(q)?;
    Ok(normal_quantile(q))
}

/// A sorted sample of at least two finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, EmpiricalError> {
        if samples.len() < 2 {
            return Err(EmpiricalError::TooFewSamples(samples.len()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(EmpiricalError::NonFinite(i));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.samples[0]
    }

    pub fn max(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// Standard deviation with the `1/n` normalisation.
    pub fn std_dev(&self) -> f64 {
        self.central_moment(2).sqrt()
    }

    fn central_moment(&self, k: i32) -> f64 {
        let mean = self.mean();
        self.samples.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / self.len() as f64
    }

    /// Moment skewness `m3 / m2^1.5`.
    pub fn skewness(&self) -> f64 {
        self.central_moment(3) / self.central_moment(2).powf(1.5)
    }

    /// Excess kurtosis `m4 / m2^2 - 3`.
    pub fn excess_kurtosis(&self) -> f64 {
        self.central_moment(4) / self.central_moment(2).powi(2) - 3.0
    }

    pub fn iqr(&self) -> f64 {
        self.quantile(0.75).unwrap() - self.quantile(0.25).unwrap()
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.len() as f64
    }

    /// Rescales to mean 0 and unit standard deviation (`1/n` normalisation).
    pub fn standardize(&self) -> Result<Self, EmpiricalError> {
        let sd = self.std_dev();
        if sd == 0.0 || self.samples.iter().all(|&v| v == self.samples[0]) {
            return Err(EmpiricalError::ZeroVariance);
        }
        let mean = self.mean();
        let samples = self.samples.iter().map(|v| (v - mean) / sd).collect();
        Ok(Self { samples })
    }

    /// Applies `x ↦ a·x + b` with `a > 0`, preserving order.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        assert!(a > 0.0, "affine map must be increasing");
        Self {
            samples: self.samples.iter().map(|v| a * v + b).collect(),
        }
    }
}

impl QuantileFunction for EmpiricalDistribution {
    /// Linear interpolation between order statistics at `h = (n - 1)·q`.
    fn quantile(&self, q: f64) -> Result<f64, EmpiricalError> {
        check_level(q)?;
        Ok(interpolated_quantile(&self.samples, q))
    }
}

pub(crate) fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

pub fn empirical_quantile(d: &EmpiricalDistribution, q: f64) -> Result<f64, EmpiricalError> {
    d.quantile(q)
}

pub fn standardize(d: &EmpiricalDistribution) -> Result<EmpiricalDistribution, EmpiricalError> {
    d.standardize()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Histogram,
    Kde,
    Analytic,
}

/// A density sampled on a strictly increasing grid.
///
/// Histograms use bin centres as the grid and carry the bin width and the
/// per-bin probability masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub kind: DensityKind,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: Option<f64>,
    pub bin_width: Option<f64>,
    pub bin_masses: Option<Vec<f64>>,
}

impl DensityCurve {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Linear interpolation of the density, zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g <= x);
        if i == 0 || i == self.grid.len() {
            return if i > 0 && x == self.grid[i - 1] {
                self.density[i - 1]
            } else {
                0.0
            };
        }
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let t = (x - x0) / (x1 - x0);
        self.density[i - 1] + t * (self.density[i] - self.density[i - 1])
    }

    /// Indices of strict interior local maxima of the sampled density.
    pub fn local_maxima(&self) -> Vec<usize> {
        local_extrema(&self.density, |a, b| a > b)
    }

    /// Indices of strict interior local minima of the sampled density.
    pub fn local_minima(&self) -> Vec<usize> {
        local_extrema(&self.density, |a, b| a < b)
    }

    pub fn argmax(&self) -> usize {
        self.density
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > self.density[best] { i } else { best })
    }

    /// Two-column `x,y` CSV.
    pub fn to_csv(&self) -> String {
        xy_csv(self.grid.iter().copied().zip(self.density.iter().copied()))
    }
}

// Plateaus count as one extremum, reported at their first index.
fn local_extrema(values: &[f64], better: impl Fn(f64, f64) -> bool) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < values.len() {
        if better(values[i], values[i - 1]) {
            let mut j = i;
            while j + 1 < values.len() && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < values.len() && better(values[i], values[j + 1]) {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

pub(crate) fn xy_csv(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::from("x,y\n");
    for (x, y) in points {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// `0.9 · min(σ, IQR / 1.34) · n^(-1/5)`.
    Silverman,
}

/// Silverman's rule of thumb. When only one of the two spread measures is
/// zero the other is used alone.
pub fn silverman_bandwidth(d: &EmpiricalDistribution) -> Result<f64, EmpiricalError> {
    let sd = d.std_dev();
    let iqr_scale = d.iqr() / 1.34;
    let spread = match (sd > 0.0, iqr_scale > 0.0) {
        (true, true) => sd.min(iqr_scale),
        (true, false) => sd,
        (false, true) => iqr_scale,
        (false, false) => return Err(EmpiricalError::DegenerateSample),
    };
    Ok(0.9 * spread * (d.len() as f64).powf(-0.2))
}

/// A Gaussian-kernel density estimator.
#[derive(Debug, Clone)]
pub struct GaussianKde<'a> {
    samples: &'a [f64],
    bandwidth: f64,
}

// Kernel contributions beyond this many bandwidths are below 1e-15 of the peak.
const KERNEL_CUTOFF: f64 = 8.5;

impl<'a> GaussianKde<'a> {
    pub fn new(d: &'a EmpiricalDistribution, bandwidth: Bandwidth) -> Result<Self, EmpiricalError> {
        if d.samples.iter().all(|&v| v == d.samples[0]) {
            return Err(EmpiricalError::DegenerateSample);
        }
        let bandwidth = match bandwidth {
            Bandwidth::Fixed(h) if h.is_finite() && h > 0.0 => h,
            Bandwidth::Fixed(h) => return Err(EmpiricalError::InvalidBandwidth(h)),
            Bandwidth::Silverman => silverman_bandwidth(d)?,
        };
        Ok(Self {
            samples: &d.samples,
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.samples.partition_point(|&s| s < x - KERNEL_CUTOFF * h);
        let hi = self.samples.partition_point(|&s| s <= x + KERNEL_CUTOFF * h);
        let sum: f64 = self.samples[lo..hi]
            .iter()
            .map(|&s| normal_pdf((x - s) / h))
            .sum();
        sum / (self.samples.len() as f64 * h)
    }
}

/// Gaussian KDE evaluated on `grid_size` evenly spaced points spanning
/// `[min - 3h, max + 3h]`.
pub fn kde(
    d: &EmpiricalDistribution,
    bandwidth: Bandwidth,
    grid_size: usize,
) -> Result<DensityCurve, EmpiricalError> {
    if grid_size < 16 {
        return Err(EmpiricalError::GridTooSmall(grid_size));
    }
    let estimator = GaussianKde::new(d, bandwidth)?;
    let h = estimator.bandwidth();
    let (lo, hi) = (d.min() - 3.0 * h, d.max() + 3.0 * h);
    let step = (hi - lo) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| lo + i as f64 * step).collect();
    let density = grid.iter().map(|&x| estimator.evaluate(x)).collect();
    Ok(DensityCurve {
        kind: DensityKind::Kde,
        grid,
        density,
        bandwidth: Some(h),
        bin_width: None,
        bin_masses: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Bin width `2 · IQR · n^(-1/3)`; Sturges' bin count when the IQR is zero.
    FreedmanDiaconis,
    Fixed(usize),
}

/// Equal-width histogram starting at the sample minimum. Densities are
/// normalised so that `density · width` gives the bin probability mass.
pub fn histogram(d: &EmpiricalDistribution, binning: Binning) -> Result<DensityCurve, EmpiricalError> {
    let n = d.len();
    let range = d.max() - d.min();
    if range == 0.0 {
        return Err(EmpiricalError::DegenerateSample);
    }
    let (bins, width) = match binning {
        Binning::Fixed(0) => return Err(EmpiricalError::InvalidBinCount),
        Binning::Fixed(k) => (k, range / k as f64),
        Binning::FreedmanDiaconis => {
            let iqr = d.iqr();
            let width = if iqr > 0.0 {
                2.0 * iqr * (n as f64).powf(-1.0 / 3.0)
            } else {
                range / ((n as f64).log2().ceil() + 1.0)
            };
            let bins = ((range / width).ceil() as usize).max(1);
            (bins, width)
        }
    };

    let mut counts = vec![0u64; bins];
    for &s in &d.samples {
        let idx = (((s - d.min()) / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let masses: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(DensityCurve {
        kind: DensityKind::Histogram,
        grid: (0..bins)
            .map(|i| d.min() + (i as f64 + 0.5) * width)
            .collect(),
        density: masses.iter().map(|m| m / width).collect(),
        bandwidth: None,
        bin_width: Some(width),
        bin_masses: Some(masses),
    })
}

/// Paired quantiles `(c1(q), c2(q))` over a grid of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQCurve {
    pub levels: Vec<f64>,
    pub points: Vec<(f64, f64)>,
}

/// `q = 0.005, 0.010, …, 0.995`.
pub fn default_levels() -> Vec<f64> {
    (1..200).map(|i| i as f64 / 200.0).collect()
}

/// The default grid extended with `1e-4, 5e-4, 1e-3, 0.0025` and their mirror images.
pub fn levels_with_tails() -> Vec<f64> {
    let tails = [1e-4, 5e-4, 1e-3, 2.5e-3];
    let mut levels: Vec<f64> = tails.to_vec();
    levels.extend(default_levels());
    levels.extend(tails.iter().rev().map(|t| 1.0 - t));
    levels
}

pub fn qq_curve(
    d1: &dyn QuantileFunction,
    d2: &dyn QuantileFunction,
    levels: &[f64],
) -> Result<QQCurve, EmpiricalError> {
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EmpiricalError::LevelsNotIncreasing);
    }
    let points = levels
        .iter()
        .map(|&q| Ok((d1.quantile(q)?, d2.quantile(q)?)))
        .collect::<Result<Vec<_>, EmpiricalError>>()?;
    Ok(QQCurve {
        levels: levels.to_vec(),
        points,
    })
}

impl QQCurve {
    /// Ordinary least-squares line `y ≈ slope·x + intercept` through the points.
    pub fn fit_line(&self) -> (f64, f64) {
        let n = self.points.len() as f64;
        let mx = self.points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = self.points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = self.points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = self.points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        (slope, my - slope * mx)
    }

    /// Largest vertical distance from the least-squares line, divided by the
    /// interquartile range of the y coordinates. Zero for an exact straight line;
    /// `None` when the y IQR vanishes.
    pub fn linearity_score(&self) -> Option<f64> {
        let (slope, intercept) = self.fit_line();
        let y_at = |q: f64| {
            let i = self.levels.partition_point(|&l| l < q);
            if i == 0 {
                return self.points[0].1;
            }
            if i == self.levels.len() {
                return self.points[i - 1].1;
            }
            let (l0, l1) = (self.levels[i - 1], self.levels[i]);
            let t = (q - l0) / (l1 - l0);
            self.points[i - 1].1 + t * (self.points[i].1 - self.points[i - 1].1)
        };
        let iqr = y_at(0.75) - y_at(0.25);
        if !(iqr > 0.0) {
            return None;
        }
        let worst = self
            .points
            .iter()
            .map(|&(x, y)| (y - (slope * x + intercept)).abs())
            .fold(0.0, f64::max);
        Some(worst / iqr)
    }

    pub fn to_csv(&self) -> String {
        xy_csv(self.points.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(dist(&[0.0, 1.0]).quantile(0.5).unwrap(), 0.5);
        let flat = dist(&[3.0; 4]);
        for q in [0.01, 0.3, 0.99] {
            assert_eq!(flat.quantile(q).unwrap(), 3.0);
        }
        let even = EmpiricalDistribution::new((0..=10_000).map(|i| i as f64 / 1e4).collect()).unwrap();
        assert!((even.quantile(0.25).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn quantile_out_of_range() {
        let d = dist(&[0.0, 1.0]);
        for q in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(d.quantile(q), Err(EmpiricalError::QuantileOutOfRange(_))));
        }
        assert!(gaussian_quantile(1.0).is_err());
    }

    #[test]
    fn construction_errors() {
        assert_eq!(EmpiricalDistribution::new(vec![1.0]), Err(EmpiricalError::TooFewSamples(1)));
        assert_eq!(
            EmpiricalDistribution::new(vec![1.0, f64::INFINITY]),
            Err(EmpiricalError::NonFinite(1))
        );
    }

    #[test]
    fn kde_two_points_peak() {
        let d = dist(&[-1.0, 1.0]);
        let curve = kde(&d, Bandwidth::Fixed(1.0), 17).unwrap();
        // grid is [-4, 4] in steps of 0.5, so index 8 is x = 0
        assert_eq!(curve.grid[8], 0.0);
        assert!((curve.density[8] - 0.24197).abs() < 1e-4);
        assert!((curve.density[8] - normal_pdf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn kde_errors() {
        let d = dist(&[0.0, 0.0]);
        assert_eq!(kde(&d, Bandwidth::Silverman, 64), Err(EmpiricalError::DegenerateSample));
        assert_eq!(kde(&d, Bandwidth::Fixed(1.0), 64), Err(EmpiricalError::DegenerateSample));
        let d = dist(&[0.0, 1.0]);
        assert_eq!(kde(&d, Bandwidth::Silverman, 15), Err(EmpiricalError::GridTooSmall(15)));
        assert_eq!(
            kde(&d, Bandwidth::Fixed(-1.0), 64),
            Err(EmpiricalError::InvalidBandwidth(-1.0))
        );
    }

    #[test]
    fn silverman_falls_back_when_iqr_is_zero() {
        // 20 zeros and one outlier: IQR is 0 but the standard deviation is not
        let mut v = vec![0.0; 20];
        v.push(1.0);
        let d = dist(&v);
        let h = silverman_bandwidth(&d).unwrap();
        assert!((h - 0.9 * d.std_dev() * 21f64.powf(-0.2)).abs() < 1e-15);
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&dist(&[0.0, 1.0, 2.0, 3.0]), Binning::Fixed(2)).unwrap();
        assert_eq!(h.bin_masses.as_deref(), Some(&[0.5, 0.5][..]));
        assert_eq!(h.bin_width, Some(1.5));
        assert_eq!(
            histogram(&dist(&[2.0; 5]), Binning::FreedmanDiaconis),
            Err(EmpiricalError::DegenerateSample)
        );
        assert_eq!(
            histogram(&dist(&[0.0, 1.0]), Binning::Fixed(0)),
            Err(EmpiricalError::InvalidBinCount)
        );
    }

    #[test]
    fn histogram_masses_sum_to_one() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 37.0).collect();
        let h = histogram(&dist(&v), Binning::FreedmanDiaconis).unwrap();
        let total: f64 = h.bin_masses.as_ref().unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let area: f64 = h.density.iter().map(|d| d * h.bin_width.unwrap()).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(dist(&[-1.0, 1.0]).standardize().unwrap().samples(), &[-1.0, 1.0]);
        assert_eq!(dist(&[0.0, 2.0]).standardize().unwrap().samples(), &[-1.0, 1.0]);
        assert_eq!(dist(&[0.1, 0.1, 0.1]).standardize(), Err(EmpiricalError::ZeroVariance));
        let d = dist(&[0.3, 1.7, -2.2, 5.0, 0.0]);
        let once = d.standardize().unwrap();
        assert!(once.mean().abs() < 1e-12);
        assert!((once.std_dev() - 1.0).abs() < 1e-12);
        let twice = once.standardize().unwrap();
        for (a, b) in once.samples().iter().zip(twice.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn qq_identity_and_affine() {
        let d = dist(&[0.3, 1.7, -2.2, 5.0, 0.0, 0.9]);
        let levels = default_levels();
        assert_eq!(levels.len(), 199);
        let same = qq_curve(&d, &d, &levels).unwrap();
        assert!(same.points.iter().all(|(x, y)| x == y));
        assert_eq!(same.linearity_score(), Some(0.0));
        let shifted = qq_curve(&d, &d.affine(2.5, -0.3), &levels).unwrap();
        for (x, y) in &shifted.points {
            assert!((y - (2.5 * x - 0.3)).abs() <= 1e-10);
        }
        assert!(shifted.linearity_score().unwrap() < 1e-12);
    }

    #[test]
    fn qq_rejects_unsorted_levels() {
        let d = dist(&[0.0, 1.0]);
        assert_eq!(qq_curve(&d, &d, &[0.5, 0.4]), Err(EmpiricalError::LevelsNotIncreasing));
        assert!(qq_curve(&d, &StandardGaussian, &[0.0, 0.5]).is_err());
    }

    #[test]
    fn tail_levels_are_increasing() {
        let l = levels_with_tails();
        assert!(l.windows(2).all(|w| w[0] < w[1]));
        assert!(l[0] > 0.0 && l[l.len() - 1] < 1.0);
    }

    #[test]
    fn extrema_detection() {
        let curve = DensityCurve {
            kind: DensityKind::Analytic,
            grid: (0..7).map(f64::from).collect(),
            density: vec![0.0, 2.0, 1.0, 1.0, 3.0, 3.0, 0.0],
            bandwidth: None,
            bin_width: None,
            bin_masses: None,
        };
        assert_eq!(curve.local_maxima(), vec![1, 4]);
        assert_eq!(curve.local_minima(), vec![2]);
        assert_eq!(curve.argmax(), 4);
        assert_eq!(curve.value_at(2.5), 1.0);
        assert_eq!(curve.value_at(-1.0), 0.0);
        assert_eq!(curve.value_at(6.0), 0.0);
    }
}

//! Random-matrix baselines: the i.i.d. Gaussian Hankel ensemble, nearest
//! neighbour spacing statistics and the Wigner surmises for GOE, GUE and GSE.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::empirical::{
    check_level, interpolated_quantile, kde, qq_curve, default_levels, Bandwidth,
    DensityCurve, EmpiricalDistribution, EmpiricalError, GaussianKde, QQCurve, QuantileFunction,
};
use crate::special::erf;
use crate::hankel::{
    eigenvalues, normalize_spectrum, symmetric_eigenvalues, EigenMethod, HankelError,
    HankelMatrix, Scaling, Spectrum, SymmetricMatrix,
};

/// Default share of central eigenvalues kept for spacing statistics.
pub const DEFAULT_BULK_FRACTION: f64 = 0.9;

/// Default number of grid points for bulk and spacing KDEs.
pub const DEFAULT_KDE_GRID: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RmtError {
    #[error("invalid ensemble: {0}")]
    InvalidSpec(String),
    #[error("spectrum has {0} eigenvalues; spacing statistics need at least 3 and 2 retained")]
    TooFewEigenvalues(usize),
    #[error("retained eigenvalues are all equal")]
    DegenerateSpectrum,
    #[error("bulk fraction {0} is outside (0, 1]")]
    InvalidBulkFraction(f64),
    #[error("spacing {0} is negative")]
    NegativeSpacing(f64),
    #[error("spectra differ in scaling or size")]
    MixedScaling,
    #[error("no spectra given")]
    NoSpectra,
    #[error(transparent)]
    Hankel(#[from] HankelError),
    #[error(transparent)]
    Empirical(#[from] EmpiricalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryLaw {
    StandardGaussian,
}

/// Parameters of a sampled Hankel ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub m: usize,
    pub draws: usize,
    pub seed: u64,
    pub entry_law: EntryLaw,
}

impl EnsembleSpec {
    pub fn new(m: usize, draws: usize, seed: u64) -> Self {
        Self {
            m,
            draws,
            seed,
            entry_law: EntryLaw::StandardGaussian,
        }
    }

    pub fn validate(&self) -> Result<(), RmtError> {
        if self.m < 2 {
            return Err(RmtError::InvalidSpec(format!("side {} < 2", self.m)));
        }
        if self.draws == 0 {
            return Err(RmtError::InvalidSpec("zero draws".into()));
        }
        Ok(())
    }

    /// The generator of draw `index`: ChaCha20 seeded with `seed`, on stream
    /// `index`, so each draw is independent of how draws are scheduled.
    pub fn generator(&self, index: usize) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        match self.entry_law {
            EntryLaw::StandardGaussian => (0..2 * self.m - 1)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        }
    }
}

/// Eigenvalues of each draw, normalized by `√m`, in draw order.
pub fn sample_hankel_spectrum(spec: &EnsembleSpec) -> Result<Vec<Spectrum>, RmtError> {
    sample_hankel_spectrum_with(spec, EigenMethod::auto(spec.m))
}

pub fn sample_hankel_spectrum_with(
    spec: &EnsembleSpec,
    method: EigenMethod,
) -> Result<Vec<Spectrum>, RmtError> {
    spec.validate()?;
    (0..spec.draws)
        .into_par_iter()
        .map(|draw| {
            let h = HankelMatrix::new(spec.generator(draw))?;
            let mut raw = eigenvalues(&h, method)?;
            raw.source = format!("gaussian-hankel m={} seed={} draw={}", spec.m, spec.seed, draw);
            Ok(normalize_spectrum(&raw)?)
        })
        .collect()
}

/// Spectrum of one GOE draw `(G + Gᵀ) / 2`, normalized by `√m`. Used only to
/// cross-check the surmise comparison.
pub fn sample_goe_spectrum(m: usize, seed: u64) -> Result<Spectrum, RmtError> {
    if m < 2 {
        return Err(RmtError::InvalidSpec(format!("side {m} < 2")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g: Vec<f64> = (0..m * m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut data = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            data[i * m + j] = 0.5 * (g[i * m + j] + g[j * m + i]);
        }
    }
    let raw = Spectrum {
        eigenvalues: symmetric_eigenvalues(SymmetricMatrix::from_row_major(m, data))?,
        source: format!("goe m={m} seed={seed}"),
        scaling: Scaling::Raw,
    };
    Ok(normalize_spectrum(&raw)?)
}

/// Nearest-neighbour spacings normalized to unit mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingSample {
    spacings: Vec<f64>,
    sorted: Vec<f64>,
    pub source: String,
    pub bulk_fraction: f64,
}

impl SpacingSample {
    fn from_raw(raw: Vec<f64>, source: String, bulk_fraction: f64) -> Result<Self, RmtError> {
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        if !(mean > 0.0) {
            return Err(RmtError::DegenerateSpectrum);
        }
        let spacings: Vec<f64> = raw.iter().map(|d| d / mean).collect();
        let mut sorted = spacings.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            spacings,
            sorted,
            source,
            bulk_fraction,
        })
    }

    /// Spacings in spectral order.
    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn len(&self) -> usize {
        self.spacings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spacings.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.spacings.iter().sum::<f64>() / self.len() as f64
    }

    pub fn distribution(&self) -> Result<EmpiricalDistribution, RmtError> {
        Ok(EmpiricalDistribution::new(self.sorted.clone())?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("spacing\n");
        for s in &self.spacings {
            out.push_str(&format!("{s}\n"));
        }
        out
    }
}

impl QuantileFunction for SpacingSample {
    fn quantile(&self, q: f64) -> Result<f64, EmpiricalError> {
        check_level(q)?;
        Ok(interpolated_quantile(&self.sorted, q))
    }
}

/// Central eigenvalues retained for a given bulk fraction: `⌈f·m⌉` of them,
/// centred (the extra one, if any, goes to the lower edge being trimmed less).
pub fn bulk_window(m: usize, bulk_fraction: f64) -> Result<std::ops::Range<usize>, RmtError> {
    if !(bulk_fraction > 0.0 && bulk_fraction <= 1.0) {
        return Err(RmtError::InvalidBulkFraction(bulk_fraction));
    }
    // guard against products like 0.9 * 10 = 9.000000000000002
    let keep = ((bulk_fraction * m as f64 - 1e-9).ceil() as usize).clamp(1, m);
    let start = (m - keep) / 2;
    Ok(start..start + keep)
}

/// Consecutive differences of the central `⌈bulk_fraction·m⌉` eigenvalues,
/// divided by their mean.
pub fn spacings(s: &Spectrum, bulk_fraction: f64) -> Result<SpacingSample, RmtError> {
    let raw = raw_spacings(s, bulk_fraction)?;
    SpacingSample::from_raw(raw, s.source.clone(), bulk_fraction)
}

fn raw_spacings(s: &Spectrum, bulk_fraction: f64) -> Result<Vec<f64>, RmtError> {
    let m = s.side();
    if m < 3 {
        return Err(RmtError::TooFewEigenvalues(m));
    }
    let window = bulk_window(m, bulk_fraction)?;
    if window.len() < 2 {
        return Err(RmtError::TooFewEigenvalues(m));
    }
    let kept = &s.eigenvalues[window];
    Ok(kept.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Settings for the Gaussian KDEs built from spectra and spacings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeSettings {
    pub bandwidth: Bandwidth,
    pub grid_size: usize,
}

impl Default for KdeSettings {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::Silverman,
            grid_size: DEFAULT_KDE_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledStatistics {
    /// KDE of every eigenvalue of every spectrum.
    pub bulk: DensityCurve,
    pub spacings: SpacingSample,
}

pub fn pooled_ensemble_statistics(
    spectra: &[Spectrum],
    bulk_fraction: f64,
) -> Result<PooledStatistics, RmtError> {
    pooled_ensemble_statistics_with(spectra, bulk_fraction, KdeSettings::default())
}

/// Pools eigenvalues into one bulk KDE, and per-spectrum unit-mean spacings
/// into one sample renormalized to unit mean.
pub fn pooled_ensemble_statistics_with(
    spectra: &[Spectrum],
    bulk_fraction: f64,
    settings: KdeSettings,
) -> Result<PooledStatistics, RmtError> {
    let first = spectra.first().ok_or(RmtError::NoSpectra)?;
    if spectra
        .iter()
        .any(|s| s.scaling != first.scaling || s.side() != first.side())
    {
        return Err(RmtError::MixedScaling);
    }
    let pooled: Vec<f64> = spectra.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect();
    let bulk = kde(
        &EmpiricalDistribution::new(pooled)?,
        settings.bandwidth,
        settings.grid_size,
    )?;

    if let [only] = spectra {
        return Ok(PooledStatistics {
            bulk,
            spacings: spacings(only, bulk_fraction)?,
        });
    }
    let mut all = Vec::new();
    for s in spectra {
        let raw = raw_spacings(s, bulk_fraction)?;
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        if !(mean > 0.0) {
            return Err(RmtError::DegenerateSpectrum);
        }
        all.extend(raw.into_iter().map(|d| d / mean));
    }
    let source = format!("pooled {} spectra", spectra.len());
    let spacings = SpacingSample::from_raw(all, source, bulk_fraction)?;
    Ok(PooledStatistics { bulk, spacings })
}

/// Q-Q curve of two spacing laws over the default 199-level grid.
pub fn spacing_qq(a: &dyn QuantileFunction, b: &dyn QuantileFunction) -> Result<QQCurve, RmtError> {
    Ok(qq_curve(a, b, &default_levels())?)
}

/// Wigner surmise of the three classical Gaussian ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Surmise {
    Goe,
    Gue,
    Gse,
}

// GUE: (32/π²) s² exp(-4s²/π)
const GUE_RATE: f64 = 4.0 / PI;
// GSE: (2^18 / (3^6 π^3)) s⁴ exp(-64 s² / (9π))
const GSE_RATE: f64 = 64.0 / (9.0 * PI);

const BISECTION_TOL: f64 = 1e-10;

impl Surmise {
    pub const ALL: [Surmise; 3] = [Surmise::Goe, Surmise::Gue, Surmise::Gse];

    pub fn name(self) -> &'static str {
        match self {
            Surmise::Goe => "GOE",
            Surmise::Gue => "GUE",
            Surmise::Gse => "GSE",
        }
    }

    fn density_unchecked(self, s: f64) -> f64 {
        match self {
            Surmise::Goe => 0.5 * PI * s * (-0.25 * PI * s * s).exp(),
            Surmise::Gue => 32.0 / (PI * PI) * s * s * (-GUE_RATE * s * s).exp(),
            Surmise::Gse => {
                let c = 262_144.0 / (729.0 * PI.powi(3));
                c * s.powi(4) * (-GSE_RATE * s * s).exp()
            }
        }
    }

    pub fn density(self, s: f64) -> Result<f64, RmtError> {
        if s < 0.0 {
            return Err(RmtError::NegativeSpacing(s));
        }
        Ok(self.density_unchecked(s))
    }

    /// Closed-form distribution function; zero for `s <= 0`.
    pub fn cdf(self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let value = match self {
            Surmise::Goe => -(-0.25 * PI * s * s).exp_m1(),
            Surmise::Gue => {
                let a = GUE_RATE;
                let partial = -s * (-a * s * s).exp() / (2.0 * a)
                    + PI.sqrt() * erf(a.sqrt() * s) / (4.0 * a.powf(1.5));
                32.0 / (PI * PI) * partial
            }
            Surmise::Gse => {
                let b = GSE_RATE;
                let c = 262_144.0 / (729.0 * PI.powi(3));
                let partial = -(-b * s * s).exp() * (s.powi(3) / (2.0 * b) + 3.0 * s / (4.0 * b * b))
                    + 3.0 * PI.sqrt() * erf(b.sqrt() * s) / (8.0 * b.powf(2.5));
                c * partial
            }
        };
        value.clamp(0.0, 1.0)
    }

    /// The surmise density on an even grid over `[0, upper]`.
    pub fn curve(self, upper: f64, points: usize) -> DensityCurve {
        let step = upper / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| i as f64 * step).collect();
        DensityCurve {
            kind: crate::empirical::DensityKind::Analytic,
            density: grid.iter().map(|&s| self.density_unchecked(s)).collect(),
            grid,
            bandwidth: None,
            bin_width: None,
            bin_masses: None,
        }
    }
}

impl QuantileFunction for Surmise {
    /// Inverts [`Surmise::cdf`] by bisection to within `1e-10`.
    fn quantile(&self, q: f64) -> Result<f64, EmpiricalError> {
        check_level(q)?;
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.cdf(hi) < q {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Thresholds that turn "the spacing density vanishes at the origin and
/// peaks away from it" into a pass/fail check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRepulsionThresholds {
    /// The KDE mode must lie strictly above this spacing.
    pub min_mode: f64,
    /// Spacing at which the density is probed.
    pub probe: f64,
    /// Density at `probe` must be below this share of the modal density.
    pub max_ratio: f64,
}

impl Default for LevelRepulsionThresholds {
    fn default() -> Self {
        Self {
            min_mode: 0.2,
            probe: 0.01,
            max_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRepulsion {
    pub mode: f64,
    pub modal_density: f64,
    pub probe_density: f64,
    pub passed: bool,
}

/// Level-repulsion check on the Gaussian KDE of a spacing sample.
pub fn level_repulsion(
    sample: &SpacingSample,
    settings: KdeSettings,
    thresholds: LevelRepulsionThresholds,
) -> Result<LevelRepulsion, RmtError> {
    let dist = sample.distribution()?;
    let curve = kde(&dist, settings.bandwidth, settings.grid_size)?;
    let estimator = GaussianKde::new(&dist, settings.bandwidth)?;
    let peak = curve.argmax();
    let mode = curve.grid[peak];
    let modal_density = curve.density[peak];
    let probe_density = estimator.evaluate(thresholds.probe);
    Ok(LevelRepulsion {
        mode,
        modal_density,
        probe_density,
        passed: mode > thresholds.min_mode && probe_density < thresholds.max_ratio * modal_density,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bimodality {
    /// Grid position of the local minimum closest to the origin.
    pub dip: f64,
    pub dip_density: f64,
    pub left_peak: f64,
    pub left_density: f64,
    pub right_peak: f64,
    pub right_density: f64,
    pub passed: bool,
}

/// Looks for a local minimum of `curve` within `tolerance` of zero flanked by
/// a higher local maximum on each side.
pub fn bulk_bimodality(curve: &DensityCurve, tolerance: f64) -> Option<Bimodality> {
    let minima = curve.local_minima();
    let maxima = curve.local_maxima();
    let dip_idx = *minima
        .iter()
        .min_by(|&&a, &&b| curve.grid[a].abs().total_cmp(&curve.grid[b].abs()))?;
    let left = maxima.iter().rev().copied().find(|&i| i < dip_idx)?;
    let right = maxima.iter().copied().find(|&i| i > dip_idx)?;
    let dip_density = curve.density[dip_idx];
    let (left_density, right_density) = (curve.density[left], curve.density[right]);
    Some(Bimodality {
        dip: curve.grid[dip_idx],
        dip_density,
        left_peak: curve.grid[left],
        left_density,
        right_peak: curve.grid[right],
        right_density,
        passed: curve.grid[dip_idx].abs() <= tolerance
            && dip_density < left_density
            && dip_density < right_density,
    })
}

//! Run configuration: an optional TOML file merged with command-line flags.
//!
//! Every setting that can change an output is part of [`RunConfig`] and of
//! its hash. The output directory, cache switch and job count are not.

use std::collections::BTreeSet;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use trajspec::empirical::{default_levels, levels_with_tails, Bandwidth, Binning};
use trajspec::rmt::{KdeSettings, LevelRepulsionThresholds, DEFAULT_BULK_FRACTION, DEFAULT_KDE_GRID};
use trajspec::{EigenMethod, EnsembleSpec, FixtureKind};

pub const GAUSSIAN: &str = "gaussian";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("instrument `{id}`: {reason}")]
    Instrument { id: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    output: Option<PathBuf>,
    jobs: Option<usize>,
    bulk_fraction: Option<f64>,
    standardize: Option<bool>,
    method: Option<String>,
    cache: Option<bool>,
    #[serde(default, rename = "instrument")]
    instruments: Vec<InstrumentEntry>,
    #[serde(default)]
    columns: ColumnsSection,
    #[serde(default)]
    qq: QqSection,
    #[serde(default)]
    kde: KdeSection,
    #[serde(default)]
    histogram: HistogramSection,
    #[serde(default)]
    ensemble: EnsembleSection,
    #[serde(default)]
    checks: ChecksSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstrumentEntry {
    id: String,
    path: Option<PathBuf>,
    fixture: Option<FixtureKind>,
    length: Option<usize>,
    seed: Option<u64>,
    date_col: Option<String>,
    close_col: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnsSection {
    date: Option<String>,
    close: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum LevelsEntry {
    Named(String),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QqSection {
    levels: Option<LevelsEntry>,
    pairs: Option<Vec<[String; 2]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum BandwidthEntry {
    Named(String),
    Fixed(f64),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KdeSection {
    bandwidth: Option<BandwidthEntry>,
    grid: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum BinsEntry {
    Named(String),
    Fixed(usize),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramSection {
    bins: Option<BinsEntry>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleSection {
    m: Option<usize>,
    draws: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChecksSection {
    min_mode: Option<f64>,
    probe: Option<f64>,
    max_ratio: Option<f64>,
    bimodality_tolerance: Option<f64>,
}

/// Where an instrument's prices come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InstrumentSource {
    Csv {
        id: String,
        /// As written in the config or on the command line.
        path: String,
        #[serde(skip)]
        resolved: PathBuf,
        date_col: String,
        close_col: String,
    },
    Fixture {
        id: String,
        kind: FixtureKind,
        length: usize,
        seed: u64,
    },
}

impl InstrumentSource {
    pub fn id(&self) -> &str {
        match self {
            InstrumentSource::Csv { id, .. } | InstrumentSource::Fixture { id, .. } => id,
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub instruments: Vec<InstrumentSource>,
    pub quantile_levels: Vec<f64>,
    /// Explicit Q-Q pairs; `None` means the default set.
    pub qq_pairs: Option<Vec<(String, String)>>,
    pub kde: KdeSettings,
    pub binning: Binning,
    pub ensemble: EnsembleSpec,
    pub bulk_fraction: f64,
    pub standardize: bool,
    /// `None` picks by matrix size.
    pub method: Option<EigenMethod>,
    pub repulsion: LevelRepulsionThresholds,
    pub bimodality_tolerance: f64,
    #[serde(skip)]
    pub output: PathBuf,
    #[serde(skip)]
    pub jobs: usize,
    #[serde(skip)]
    pub cache: bool,
}

/// Values given on the command line; they win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub bulk_fraction: Option<f64>,
    pub standardize: bool,
    pub method: Option<EigenMethod>,
    pub date_col: Option<String>,
    pub close_col: Option<String>,
    /// `id=path` entries.
    pub instruments: Vec<String>,
    /// `id=kind:length[:seed]` entries.
    pub fixtures: Vec<String>,
    /// Adds the four bundled demo fixtures.
    pub demo: bool,
    pub ensemble_m: Option<usize>,
    pub ensemble_draws: Option<usize>,
    pub no_cache: bool,
}

pub const DEFAULT_SEED: u64 = 20_190_315;
pub const DEMO_LENGTH: usize = 2_500;

/// Stand-ins for three equities and one crypto asset.
pub fn demo_fixtures(seed: u64) -> Vec<InstrumentSource> {
    [
        ("goog-fixture", FixtureKind::GaussianWalk),
        ("aapl-fixture", FixtureKind::StudentTWalk),
        ("ge-fixture", FixtureKind::GaussianWalk),
        ("btc-fixture", FixtureKind::StudentTWalk),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (id, kind))| InstrumentSource::Fixture {
        id: id.into(),
        kind,
        length: DEMO_LENGTH,
        seed: seed.wrapping_add(i as u64),
    })
    .collect()
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id != GAUSSIAN
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.')
}

fn parse_fixture_flag(flag: &str, default_seed: u64) -> Result<InstrumentSource, ConfigError> {
    let bad = |reason: &str| invalid(format!("--fixture `{flag}`: {reason}"));
    let (id, rest) = flag.split_once('=').ok_or_else(|| bad("expected id=kind:length[:seed]"))?;
    let mut parts = rest.split(':');
    let kind: FixtureKind = parts
        .next()
        .unwrap_or_default()
        .parse()
        .map_err(|e: String| bad(&e))?;
    let length = parts
        .next()
        .ok_or_else(|| bad("missing length"))?
        .parse()
        .map_err(|_| bad("length is not a count"))?;
    let seed = match parts.next() {
        Some(s) => s.parse().map_err(|_| bad("seed is not an integer"))?,
        None => default_seed,
    };
    if parts.next().is_some() {
        return Err(bad("too many fields"));
    }
    Ok(InstrumentSource::Fixture {
        id: id.into(),
        kind,
        length,
        seed,
    })
}

fn resolve_path(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

impl RunConfig {
    /// Reads the config file named in `ov` (if any), applies the overrides
    /// and validates the result.
    pub fn load(ov: &Overrides) -> Result<Self, ConfigError> {
        let (file, base) = match &ov.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                let base = path.parent().map(Path::to_path_buf);
                (toml::from_str::<FileConfig>(&text)?, base)
            }
            None => (FileConfig::default(), None),
        };
        Self::build(file, base.as_deref(), ov)
    }

    /// Same as [`RunConfig::load`] with the document given as text; relative
    /// paths resolve against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>, ov: &Overrides) -> Result<Self, ConfigError> {
        Self::build(toml::from_str(text)?, base, ov)
    }

    fn build(file: FileConfig, base: Option<&Path>, ov: &Overrides) -> Result<Self, ConfigError> {
        let seed = ov.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let date_default = ov
            .date_col
            .clone()
            .or(file.columns.date)
            .unwrap_or_else(|| "date".into());
        let close_default = ov
            .close_col
            .clone()
            .or(file.columns.close)
            .unwrap_or_else(|| "close".into());

        let mut instruments = Vec::new();
        for (i, entry) in file.instruments.into_iter().enumerate() {
            let id = entry.id.clone();
            let fail = |reason: &str| ConfigError::Instrument {
                id: id.clone(),
                reason: reason.into(),
            };
            match (entry.path, entry.fixture) {
                (Some(path), None) => {
                    if entry.length.is_some() || entry.seed.is_some() {
                        return Err(fail("`length` and `seed` only apply to fixtures"));
                    }
                    instruments.push(InstrumentSource::Csv {
                        id: entry.id,
                        resolved: resolve_path(base, &path),
                        path: path.to_string_lossy().into_owned(),
                        date_col: entry.date_col.unwrap_or_else(|| date_default.clone()),
                        close_col: entry.close_col.unwrap_or_else(|| close_default.clone()),
                    });
                }
                (None, Some(kind)) => {
                    if entry.date_col.is_some() || entry.close_col.is_some() {
                        return Err(fail("column names only apply to CSV instruments"));
                    }
                    instruments.push(InstrumentSource::Fixture {
                        id: entry.id,
                        kind,
                        length: entry.length.ok_or_else(|| fail("fixture needs `length`"))?,
                        seed: entry.seed.unwrap_or(seed.wrapping_add(i as u64)),
                    });
                }
                _ => return Err(fail("give exactly one of `path` and `fixture`")),
            }
        }
        for flag in &ov.instruments {
            let (id, path) = flag
                .split_once('=')
                .ok_or_else(|| invalid(format!("--instrument `{flag}`: expected id=path")))?;
            instruments.push(InstrumentSource::Csv {
                id: id.into(),
                path: path.into(),
                resolved: PathBuf::from(path),
                date_col: date_default.clone(),
                close_col: close_default.clone(),
            });
        }
        for flag in &ov.fixtures {
            instruments.push(parse_fixture_flag(flag, seed)?);
        }
        if ov.demo {
            instruments.extend(demo_fixtures(seed));
        }

        let quantile_levels = match file.qq.levels {
            None => default_levels(),
            Some(LevelsEntry::Named(name)) => match name.as_str() {
                "default" => default_levels(),
                "tails" => levels_with_tails(),
                other => return Err(invalid(format!("qq.levels: unknown grid `{other}`"))),
            },
            Some(LevelsEntry::Explicit(levels)) => levels,
        };

        let bandwidth = match file.kde.bandwidth {
            None => Bandwidth::Silverman,
            Some(BandwidthEntry::Named(name)) if name == "silverman" => Bandwidth::Silverman,
            Some(BandwidthEntry::Named(other)) => {
                return Err(invalid(format!("kde.bandwidth: unknown rule `{other}`")))
            }
            Some(BandwidthEntry::Fixed(h)) => Bandwidth::Fixed(h),
        };
        let binning = match file.histogram.bins {
            None => Binning::FreedmanDiaconis,
            Some(BinsEntry::Named(name)) if name == "freedman_diaconis" => Binning::FreedmanDiaconis,
            Some(BinsEntry::Named(other)) => {
                return Err(invalid(format!("histogram.bins: unknown rule `{other}`")))
            }
            Some(BinsEntry::Fixed(k)) => Binning::Fixed(k),
        };
        let method = match (ov.method, file.method) {
            (Some(m), _) => Some(m),
            (None, Some(name)) if name == "auto" => None,
            (None, Some(name)) => Some(name.parse().map_err(invalid)?),
            (None, None) => None,
        };
        let defaults = LevelRepulsionThresholds::default();

        let config = RunConfig {
            seed,
            instruments,
            quantile_levels,
            qq_pairs: file
                .qq
                .pairs
                .map(|pairs| pairs.into_iter().map(|[a, b]| (a, b)).collect()),
            kde: KdeSettings {
                bandwidth,
                grid_size: file.kde.grid.unwrap_or(DEFAULT_KDE_GRID),
            },
            binning,
            ensemble: EnsembleSpec::new(
                ov.ensemble_m.or(file.ensemble.m).unwrap_or(512),
                ov.ensemble_draws.or(file.ensemble.draws).unwrap_or(20),
                file.ensemble.seed.unwrap_or(seed),
            ),
            bulk_fraction: ov
                .bulk_fraction
                .or(file.bulk_fraction)
                .unwrap_or(DEFAULT_BULK_FRACTION),
            standardize: ov.standardize || file.standardize.unwrap_or(false),
            method,
            repulsion: LevelRepulsionThresholds {
                min_mode: file.checks.min_mode.unwrap_or(defaults.min_mode),
                probe: file.checks.probe.unwrap_or(defaults.probe),
                max_ratio: file.checks.max_ratio.unwrap_or(defaults.max_ratio),
            },
            bimodality_tolerance: file.checks.bimodality_tolerance.unwrap_or(0.1),
            output: ov
                .out
                .clone()
                .or_else(|| file.output.map(|p| resolve_path(base, &p)))
                .unwrap_or_else(|| PathBuf::from("trajspec-out")),
            jobs: ov.jobs.or(file.jobs).unwrap_or(0),
            cache: !ov.no_cache && file.cache.unwrap_or(true),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = BTreeSet::new();
        for inst in &self.instruments {
            let id = inst.id();
            if !valid_id(id) {
                return Err(ConfigError::Instrument {
                    id: id.into(),
                    reason: "ids use letters, digits, `-`, `_`, `.` and cannot be `gaussian`".into(),
                });
            }
            if !seen.insert(id) {
                return Err(ConfigError::Instrument {
                    id: id.into(),
                    reason: "duplicate id".into(),
                });
            }
            match inst {
                InstrumentSource::Csv { resolved, .. } if !resolved.is_file() => {
                    return Err(ConfigError::Instrument {
                        id: id.into(),
                        reason: format!("no such file {}", resolved.display()),
                    })
                }
                InstrumentSource::Fixture { length, .. } if *length < 3 => {
                    return Err(ConfigError::Instrument {
                        id: id.into(),
                        reason: "fixture length must be at least 3".into(),
                    })
                }
                _ => {}
            }
        }
        if let Some(pairs) = &self.qq_pairs {
            for (a, b) in pairs {
                for side in [a, b] {
                    if side != GAUSSIAN && !seen.contains(side.as_str()) {
                        return Err(invalid(format!("qq.pairs: unknown instrument `{side}`")));
                    }
                }
                if a == GAUSSIAN {
                    return Err(invalid("qq.pairs: `gaussian` may only appear on the right"));
                }
            }
        }
        let levels = &self.quantile_levels;
        if levels.is_empty()
            || levels.iter().any(|&q| !(q > 0.0 && q < 1.0))
            || levels.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(invalid("qq.levels must be strictly increasing inside (0, 1)"));
        }
        if let Bandwidth::Fixed(h) = self.kde.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("kde.bandwidth must be positive"));
            }
        }
        if self.kde.grid_size < 16 {
            return Err(invalid("kde.grid must be at least 16"));
        }
        if self.binning == Binning::Fixed(0) {
            return Err(invalid("histogram.bins must be at least 1"));
        }
        if !(self.bulk_fraction > 0.0 && self.bulk_fraction <= 1.0) {
            return Err(invalid(format!("bulk fraction {} is outside (0, 1]", self.bulk_fraction)));
        }
        if self.ensemble.m < 3 || self.ensemble.draws == 0 {
            return Err(invalid("ensemble needs m >= 3 and at least one draw"));
        }
        let r = &self.repulsion;
        if !(r.min_mode >= 0.0 && r.probe >= 0.0 && r.max_ratio > 0.0 && self.bimodality_tolerance >= 0.0) {
            return Err(invalid("check thresholds must be nonnegative"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

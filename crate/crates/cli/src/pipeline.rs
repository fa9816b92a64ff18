//! The stages behind each subcommand. Per-instrument work runs on the rayon
//! pool; results are gathered in configuration order.

use std::io;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use trajspec::cache::{spectrum_key, ContentCache};
use trajspec::empirical::{
    histogram, kde, qq_curve, DensityCurve, EmpiricalError, GaussianKde, QQCurve, StandardGaussian,
};
use trajspec::hankel::{eigenvalues, maximal_square, normalize_spectrum, HankelError};
use trajspec::ingest::{parse_price_csv_with, synthetic_fixture, CsvColumns, PriceSeries};
use trajspec::returns::{log_returns, report_to_csv, table1_report, AutocorrelationReport};
use trajspec::rmt::{
    bulk_bimodality, level_repulsion, pooled_ensemble_statistics_with, spacing_qq, spacings,
    Bimodality, KdeSettings, LevelRepulsion, RmtError, SpacingSample,
};
use trajspec::{
    EigenMethod, EmpiricalDistribution, EnsembleSpec, HankelMatrix, ReturnSeries, Spectrum, Surmise,
};

use crate::artifacts::Artifacts;
use crate::config::{ConfigError, InstrumentSource, RunConfig, GAUSSIAN};
use crate::svg::{Layer, Plot, PALETTE};

/// Upper bound on KDE grid points when refining for narrow bandwidths.
pub const MAX_KDE_GRID: usize = 16_385;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Rmt(#[from] RmtError),
    #[error(transparent)]
    Empirical(#[from] EmpiricalError),
    #[error(transparent)]
    Hankel(#[from] HankelError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// A per-instrument problem that does not stop the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub instrument: String,
    pub stage: &'static str,
    pub error: String,
}

pub struct Context {
    pub config: RunConfig,
    pub artifacts: Artifacts,
    pub cache: Option<ContentCache>,
}

impl Context {
    fn write(&self, rel: &str, text: &str) -> Result<String, PipelineError> {
        self.artifacts.text(rel, text).map_err(|source| PipelineError::Io {
            path: rel.into(),
            source,
        })
    }

    fn json<T: Serialize>(&self, rel: &str, kind: &str, data: &T) -> Result<String, PipelineError> {
        self.artifacts
            .json(rel, kind, data)
            .map_err(|source| PipelineError::Io {
                path: rel.into(),
                source,
            })
    }

    fn svg(&self, rel: &str, plot: &Plot) -> Result<String, PipelineError> {
        self.write(rel, &plot.render(self.artifacts.meta()))
    }

    pub fn manifest(&self, command: &str) -> Result<(), PipelineError> {
        let rel = format!("manifest-{command}.json");
        self.artifacts
            .manifest(&rel, command)
            .map(|_| ())
            .map_err(|source| PipelineError::Io { path: rel, source })
    }

    fn method_for(&self, m: usize) -> EigenMethod {
        self.config.method.unwrap_or_else(|| EigenMethod::auto(m))
    }

    /// Raw spectrum of `h`, through the content cache when enabled.
    fn raw_spectrum(&self, h: &HankelMatrix, method: EigenMethod) -> Result<Spectrum, PipelineError> {
        let key = spectrum_key(h, method);
        if let Some(cache) = &self.cache {
            if let Some(s) = cache.load_spectrum(&key, "") {
                if s.side() == h.side() {
                    return Ok(s);
                }
            }
        }
        let s = eigenvalues(h, method)?;
        if let Some(cache) = &self.cache {
            // a failed cache write only costs a recomputation later
            let _ = cache.store_spectrum(&key, &s);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct Instrument {
    pub id: String,
    pub prices: PriceSeries,
    pub returns: ReturnSeries,
}

impl Instrument {
    /// Returns used for distributions and spectra: raw, or standardized
    /// when the run asks for it.
    fn analysed(&self, standardize: bool) -> Result<ReturnSeries, String> {
        if standardize {
            self.returns.standardized().map_err(|e| e.to_string())
        } else {
            Ok(self.returns.clone())
        }
    }
}

fn load_one(src: &InstrumentSource) -> Result<PriceSeries, String> {
    match src {
        InstrumentSource::Csv {
            id,
            resolved,
            date_col,
            close_col,
            ..
        } => {
            let text = std::fs::read_to_string(resolved)
                .map_err(|e| format!("{}: {e}", resolved.display()))?;
            let columns = CsvColumns {
                date: date_col.clone(),
                close: close_col.clone(),
            };
            parse_price_csv_with(&text, id, &columns).map_err(|e| e.to_string())
        }
        InstrumentSource::Fixture {
            id,
            kind,
            length,
            seed,
        } => {
            let s = synthetic_fixture(*kind, *length, *seed).map_err(|e| e.to_string())?;
            PriceSeries::new(id.clone(), s.observations().to_vec()).map_err(|e| e.to_string())
        }
    }
}

/// Loads every configured instrument; the ones that fail are reported and
/// left out.
pub fn load_instruments(ctx: &Context) -> (Vec<Instrument>, Vec<Failure>) {
    let loaded: Vec<Result<Instrument, Failure>> = ctx
        .config
        .instruments
        .par_iter()
        .map(|src| {
            let prices = load_one(src).map_err(|error| Failure {
                instrument: src.id().into(),
                stage: "ingest",
                error,
            })?;
            if prices.len() < 3 {
                return Err(Failure {
                    instrument: src.id().into(),
                    stage: "ingest",
                    error: "need at least 3 prices".into(),
                });
            }
            if let Some(cache) = &ctx.cache {
                let _ = cache.store_series(&prices);
            }
            Ok(Instrument {
                id: src.id().into(),
                returns: log_returns(&prices),
                prices,
            })
        })
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for r in loaded {
        match r {
            Ok(i) => ok.push(i),
            Err(f) => failures.push(f),
        }
    }
    (ok, failures)
}

/// Gaussian KDE whose grid is refined until the step is at most a third of
/// the bandwidth, so the curve integrates to one.
pub fn resolved_kde(d: &EmpiricalDistribution, settings: KdeSettings) -> Result<DensityCurve, EmpiricalError> {
    let h = GaussianKde::new(d, settings.bandwidth)?.bandwidth();
    let span = d.max() - d.min() + 6.0 * h;
    let needed = (span / (h / 3.0)).ceil() as usize + 1;
    kde(d, settings.bandwidth, settings.grid_size.max(needed).min(MAX_KDE_GRID))
}

fn curve_points(c: &DensityCurve) -> Vec<(f64, f64)> {
    c.grid.iter().copied().zip(c.density.iter().copied()).collect()
}

// ---------------------------------------------------------------- table 1

#[derive(Debug, Clone, Serialize)]
pub struct Table1 {
    pub rows: Vec<AutocorrelationReport>,
    pub failures: Vec<Failure>,
}

pub fn table1(ctx: &Context, instruments: &[Instrument]) -> Result<Table1, PipelineError> {
    let returns: Vec<ReturnSeries> = instruments.iter().map(|i| i.returns.clone()).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in table1_report(&returns) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(Failure {
                instrument: e.instrument_id,
                stage: "table1",
                error: e.error.to_string(),
            }),
        }
    }
    ctx.write("table1.csv", &report_to_csv(&rows))?;
    let result = Table1 { rows, failures };
    ctx.json("table1.json", "table1", &result)?;
    Ok(result)
}

// ---------------------------------------------------------- distributions

#[derive(Debug, Clone, Serialize)]
pub struct DistStats {
    pub instrument: String,
    pub standardized: bool,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub kde_bandwidth: f64,
    pub kde_grid: usize,
    pub kde_integral: f64,
    pub histogram_bins: usize,
    pub histogram_bin_width: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Distributions {
    pub stats: Vec<DistStats>,
    pub failures: Vec<Failure>,
}

fn dist_one(ctx: &Context, inst: &Instrument) -> Result<DistStats, String> {
    let cfg = &ctx.config;
    let values = inst.analysed(cfg.standardize)?;
    let d = EmpiricalDistribution::new(values.values().to_vec()).map_err(|e| e.to_string())?;
    let hist = histogram(&d, cfg.binning).map_err(|e| e.to_string())?;
    let curve = resolved_kde(&d, cfg.kde).map_err(|e| e.to_string())?;
    let width = hist.bin_width.expect("histograms carry a bin width");
    let stats = DistStats {
        instrument: inst.id.clone(),
        standardized: cfg.standardize,
        n: d.len(),
        mean: d.mean(),
        std_dev: d.std_dev(),
        skewness: d.skewness(),
        excess_kurtosis: d.excess_kurtosis(),
        kde_bandwidth: curve.bandwidth.expect("kde carries a bandwidth"),
        kde_grid: curve.grid.len(),
        kde_integral: curve.integral(),
        histogram_bins: hist.grid.len(),
        histogram_bin_width: width,
    };
    let dir = format!("dist/{}", inst.id);
    let io = |e: PipelineError| e.to_string();
    ctx.write(&format!("{dir}/histogram.csv"), &hist.to_csv()).map_err(io)?;
    ctx.write(&format!("{dir}/kde.csv"), &curve.to_csv()).map_err(io)?;
    ctx.json(&format!("{dir}/stats.json"), "distribution", &stats).map_err(io)?;
    let bars = hist
        .grid
        .iter()
        .zip(&hist.density)
        .map(|(&c, &f)| (c - 0.5 * width, c + 0.5 * width, f))
        .collect();
    let label = if cfg.standardize { "standardized log return" } else { "log return" };
    let plot = Plot::new(format!("{} log returns", inst.id), label, "density")
        .with(Layer::Bars {
            label: "histogram".into(),
            bars,
            color: PALETTE[0],
        })
        .with(Layer::line("Gaussian KDE", curve_points(&curve), PALETTE[1]));
    ctx.svg(&format!("{dir}/plot.svg"), &plot).map_err(io)?;
    Ok(stats)
}

pub fn distributions(ctx: &Context, instruments: &[Instrument]) -> Result<Distributions, PipelineError> {
    let results: Vec<Result<DistStats, Failure>> = instruments
        .par_iter()
        .map(|inst| {
            dist_one(ctx, inst).map_err(|error| Failure {
                instrument: inst.id.clone(),
                stage: "dist",
                error,
            })
        })
        .collect();
    let (stats, failures) = split(results);
    let result = Distributions { stats, failures };
    ctx.json("dist/summary.json", "distributions", &result)?;
    Ok(result)
}

fn split<T>(results: Vec<Result<T, Failure>>) -> (Vec<T>, Vec<Failure>) {
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(f) => failures.push(f),
        }
    }
    (ok, failures)
}

// -------------------------------------------------------------------- Q-Q

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFamily {
    VsGaussian,
    Pairwise,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairScore {
    pub left: String,
    pub right: String,
    pub family: PairFamily,
    pub raw_linearity: Option<f64>,
    pub standardized_linearity: Option<f64>,
    pub standardized_slope: f64,
    pub standardized_intercept: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QqSummary {
    pub levels: usize,
    pub pairs: Vec<PairScore>,
    pub failures: Vec<Failure>,
}

/// Every instrument against the Gaussian, then every unordered pair.
pub fn default_pairs(ids: &[String]) -> Vec<(String, String)> {
    let mut pairs: Vec<(String, String)> = ids.iter().map(|a| (a.clone(), GAUSSIAN.into())).collect();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            pairs.push((a.clone(), b.clone()));
        }
    }
    pairs
}

fn qq_plot(title: String, x_label: &str, y_label: &str, qq: &QQCurve) -> Plot {
    let (lo, hi) = qq
        .points
        .iter()
        .flat_map(|&(x, y)| [x, y])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (slope, intercept) = qq.fit_line();
    let (x0, x1) = (qq.points[0].0, qq.points[qq.points.len() - 1].0);
    Plot::new(title, x_label, y_label)
        .with(Layer::Markers {
            label: "quantile pairs".into(),
            points: qq.points.clone(),
            color: PALETTE[0],
        })
        .with(Layer::dashed("x = y", vec![(lo, lo), (hi, hi)], PALETTE[5]))
        .with(Layer::line(
            "least-squares line",
            vec![(x0, slope * x0 + intercept), (x1, slope * x1 + intercept)],
            PALETTE[1],
        ))
}

fn qq_pair(
    ctx: &Context,
    left: &Instrument,
    right: Option<&Instrument>,
) -> Result<PairScore, String> {
    let levels = &ctx.config.quantile_levels;
    let e = |e: EmpiricalError| e.to_string();
    let dl = EmpiricalDistribution::new(left.returns.values().to_vec()).map_err(e)?;
    let sl = dl.standardize().map_err(e)?;
    let (raw, std, right_id, family) = match right {
        None => (
            qq_curve(&dl, &StandardGaussian, levels).map_err(e)?,
            qq_curve(&sl, &StandardGaussian, levels).map_err(e)?,
            GAUSSIAN.to_string(),
            PairFamily::VsGaussian,
        ),
        Some(r) => {
            let dr = EmpiricalDistribution::new(r.returns.values().to_vec()).map_err(e)?;
            let sr = dr.standardize().map_err(e)?;
            (
                qq_curve(&dl, &dr, levels).map_err(e)?,
                qq_curve(&sl, &sr, levels).map_err(e)?,
                r.id.clone(),
                PairFamily::Pairwise,
            )
        }
    };
    let stem = format!("qq/{}__{}", left.id, right_id);
    let files = vec![
        format!("{stem}.csv"),
        format!("{stem}.std.csv"),
        format!("{stem}.svg"),
    ];
    let io = |e: PipelineError| e.to_string();
    ctx.write(&files[0], &raw.to_csv()).map_err(io)?;
    ctx.write(&files[1], &std.to_csv()).map_err(io)?;
    let y_label = if right.is_none() {
        "standard Gaussian quantile".to_string()
    } else {
        format!("{right_id} standardized quantile")
    };
    let plot = qq_plot(
        format!("Q-Q: {} vs {}", left.id, right_id),
        &format!("{} standardized quantile", left.id),
        &y_label,
        &std,
    );
    ctx.svg(&files[2], &plot).map_err(io)?;
    let (slope, intercept) = std.fit_line();
    Ok(PairScore {
        left: left.id.clone(),
        right: right_id,
        family,
        raw_linearity: raw.linearity_score(),
        standardized_linearity: std.linearity_score(),
        standardized_slope: slope,
        standardized_intercept: intercept,
        files,
    })
}

pub fn qq(ctx: &Context, instruments: &[Instrument]) -> Result<QqSummary, PipelineError> {
    let ids: Vec<String> = instruments.iter().map(|i| i.id.clone()).collect();
    let pairs = ctx.config.qq_pairs.clone().unwrap_or_else(|| default_pairs(&ids));
    let find = |id: &str| instruments.iter().find(|i| i.id == id);
    let results: Vec<Result<PairScore, Failure>> = pairs
        .par_iter()
        .filter_map(|(a, b)| {
            // pairs naming an instrument that failed to load are skipped;
            // the load failure is already reported
            let left = find(a)?;
            let right = if b == GAUSSIAN { None } else { Some(find(b)?) };
            Some(qq_pair(ctx, left, right).map_err(|error| Failure {
                instrument: format!("{a}/{b}"),
                stage: "qq",
                error,
            }))
        })
        .collect();
    let (pairs, failures) = split(results);
    let result = QqSummary {
        levels: ctx.config.quantile_levels.len(),
        pairs,
        failures,
    };
    ctx.json("qq/summary.json", "qq", &result)?;
    Ok(result)
}

// ---------------------------------------------------------------- ensemble

#[derive(Debug, Clone, Serialize)]
pub struct DrawFile {
    pub index: usize,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FatTail {
    pub level: f64,
    pub goe_quantile: f64,
    pub hankel_quantile: f64,
    pub above_diagonal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub spec: EnsembleSpec,
    pub method: EigenMethod,
    pub scaling: &'static str,
    pub bulk_fraction: f64,
    pub draws: Vec<DrawFile>,
    pub pooled_eigenvalues: usize,
    pub pooled_spacings: usize,
    pub bimodality: Option<Bimodality>,
    pub level_repulsion: LevelRepulsion,
    pub fat_tail: FatTail,
    pub goe_linearity: Option<f64>,
    #[serde(skip)]
    pub spacings: Option<SpacingSample>,
}

fn spacing_plot(title: String, curve: &DensityCurve) -> Plot {
    let mut plot = Plot::new(title, "normalized spacing s", "density");
    plot.x_range = Some((0.0, 4.0));
    plot = plot.with(Layer::line("spacing KDE", curve_points(curve), PALETTE[0]));
    for (i, s) in Surmise::ALL.into_iter().enumerate() {
        let c = s.curve(4.0, 401);
        plot = plot.with(Layer::dashed(format!("{} surmise", s.name()), curve_points(&c), PALETTE[i + 1]));
    }
    plot
}

fn surmise_csv() -> String {
    let mut out = String::from("s,goe,gue,gse\n");
    for i in 0..=400 {
        let s = i as f64 * 0.01;
        let d: Vec<String> = Surmise::ALL
            .iter()
            .map(|m| m.density(s).expect("nonnegative").to_string())
            .collect();
        out.push_str(&format!("{s},{}\n", d.join(",")));
    }
    out
}

pub fn ensemble(ctx: &Context) -> Result<EnsembleSummary, PipelineError> {
    let cfg = &ctx.config;
    let spec = cfg.ensemble;
    spec.validate()?;
    let method = ctx.method_for(spec.m);
    let spectra: Vec<Spectrum> = (0..spec.draws)
        .into_par_iter()
        .map(|draw| {
            let h = HankelMatrix::new(spec.generator(draw))?;
            let mut raw = ctx.raw_spectrum(&h, method)?;
            raw.source = format!("gaussian-hankel m={} seed={} draw={draw}", spec.m, spec.seed);
            Ok(normalize_spectrum(&raw)?)
        })
        .collect::<Result<_, PipelineError>>()?;

    let mut draws = Vec::with_capacity(spectra.len());
    for (index, s) in spectra.iter().enumerate() {
        let file = format!("ensemble/draws/draw-{index:04}.csv");
        let sha256 = ctx.write(&file, &s.to_csv())?;
        draws.push(DrawFile { index, file, sha256 });
    }

    let pooled = pooled_ensemble_statistics_with(&spectra, cfg.bulk_fraction, cfg.kde)?;
    let spacing_dist = pooled.spacings.distribution()?;
    let spacing_curve = resolved_kde(&spacing_dist, cfg.kde)?;
    let repulsion = level_repulsion(&pooled.spacings, cfg.kde, cfg.repulsion)?;
    let bimodality = bulk_bimodality(&pooled.bulk, cfg.bimodality_tolerance);
    let goe_qq = spacing_qq(&Surmise::Goe, &pooled.spacings)?;
    let (level, (goe_q, hankel_q)) = goe_qq
        .levels
        .iter()
        .copied()
        .zip(goe_qq.points.iter().copied())
        .min_by(|a, b| (a.0 - 0.99).abs().total_cmp(&(b.0 - 0.99).abs()))
        .expect("non-empty level grid");

    ctx.write("ensemble/bulk_kde.csv", &pooled.bulk.to_csv())?;
    ctx.write("ensemble/spacings.csv", &pooled.spacings.to_csv())?;
    ctx.write("ensemble/spacing_kde.csv", &spacing_curve.to_csv())?;
    ctx.write("ensemble/surmises.csv", &surmise_csv())?;
    ctx.write("ensemble/qq_vs_goe.csv", &goe_qq.to_csv())?;
    ctx.svg(
        "ensemble/bulk.svg",
        &Plot::new(
            format!("Random Hankel spectral density (m = {}, {} draws)", spec.m, spec.draws),
            "eigenvalue / sqrt(m)",
            "density",
        )
        .with(Layer::line("pooled KDE", curve_points(&pooled.bulk), PALETTE[0])),
    )?;
    ctx.svg(
        "ensemble/spacings.svg",
        &spacing_plot(
            format!("Random Hankel spacing distribution (m = {})", spec.m),
            &spacing_curve,
        ),
    )?;
    ctx.svg(
        "ensemble/qq_vs_goe.svg",
        &qq_plot(
            "Q-Q: GOE surmise vs random Hankel spacings".into(),
            "GOE surmise quantile",
            "random Hankel spacing quantile",
            &goe_qq,
        ),
    )?;

    let summary = EnsembleSummary {
        spec,
        method,
        scaling: "normalized_by_sqrt_m",
        bulk_fraction: cfg.bulk_fraction,
        draws,
        pooled_eigenvalues: spectra.iter().map(Spectrum::side).sum(),
        pooled_spacings: pooled.spacings.len(),
        bimodality,
        level_repulsion: repulsion,
        fat_tail: FatTail {
            level,
            goe_quantile: goe_q,
            hankel_quantile: hankel_q,
            above_diagonal: hankel_q > goe_q,
        },
        goe_linearity: goe_qq.linearity_score(),
        spacings: Some(pooled.spacings),
    };
    ctx.json("ensemble/manifest.json", "ensemble", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------- spectra

#[derive(Debug, Clone, Serialize)]
pub struct InstrumentSpectrum {
    pub instrument: String,
    pub returns: usize,
    pub m: usize,
    pub method: EigenMethod,
    pub scaling: &'static str,
    pub standardized_returns: bool,
    pub source: String,
    pub trace_residual: f64,
    pub spacings: usize,
    pub level_repulsion: LevelRepulsion,
    pub bulk_bimodality: Option<Bimodality>,
    pub linearity_vs_random_hankel: Option<f64>,
    pub linearity_vs_goe: Option<f64>,
    #[serde(skip)]
    eigenvalues: Option<EmpiricalDistribution>,
    #[serde(skip)]
    spacing_sample: Option<SpacingSample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossScore {
    pub left: String,
    pub right: String,
    pub bulk_linearity: Option<f64>,
    pub spacing_linearity: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectra {
    pub instruments: Vec<InstrumentSpectrum>,
    pub cross: Vec<CrossScore>,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub ensemble: Option<EnsembleSummary>,
}

fn spectrum_one(
    ctx: &Context,
    inst: &Instrument,
    baseline: &SpacingSample,
) -> Result<InstrumentSpectrum, String> {
    let cfg = &ctx.config;
    let s = |e: &dyn std::fmt::Display| e.to_string();
    let values = inst.analysed(cfg.standardize)?;
    let h = maximal_square(&values).map_err(|e| s(&e))?;
    let m = h.side();
    if m < 3 {
        return Err(format!("maximal square side {m} is too small for spacings"));
    }
    let method = ctx.method_for(m);
    let mut raw = ctx.raw_spectrum(&h, method).map_err(|e| s(&e))?;
    raw.source = format!("{} maximal square", inst.id);
    let trace_residual = raw.trace_residual(&h);
    let normalized = normalize_spectrum(&raw).map_err(|e| s(&e))?;
    let eig = EmpiricalDistribution::new(normalized.eigenvalues.clone()).map_err(|e| s(&e))?;
    let bulk = resolved_kde(&eig, cfg.kde).map_err(|e| s(&e))?;
    let sp = spacings(&normalized, cfg.bulk_fraction).map_err(|e| s(&e))?;
    let sp_dist = sp.distribution().map_err(|e| s(&e))?;
    let sp_curve = resolved_kde(&sp_dist, cfg.kde).map_err(|e| s(&e))?;
    let repulsion = level_repulsion(&sp, cfg.kde, cfg.repulsion).map_err(|e| s(&e))?;
    let vs_hankel = spacing_qq(baseline, &sp).map_err(|e| s(&e))?;
    let vs_goe = spacing_qq(&Surmise::Goe, &sp).map_err(|e| s(&e))?;

    let dir = format!("spectrum/{}", inst.id);
    let io = |e: PipelineError| e.to_string();
    ctx.write(&format!("{dir}/eigenvalues.csv"), &normalized.to_csv()).map_err(io)?;
    #[derive(Serialize)]
    struct SpectrumMeta<'a> {
        m: usize,
        scaling: &'a str,
        source: &'a str,
        method: EigenMethod,
        trace_residual: f64,
    }
    ctx.json(
        &format!("{dir}/spectrum.json"),
        "spectrum",
        &SpectrumMeta {
            m,
            scaling: "normalized_by_sqrt_m",
            source: &raw.source,
            method,
            trace_residual,
        },
    )
    .map_err(io)?;
    ctx.write(&format!("{dir}/bulk_kde.csv"), &bulk.to_csv()).map_err(io)?;
    ctx.write(&format!("{dir}/spacings.csv"), &sp.to_csv()).map_err(io)?;
    ctx.write(&format!("{dir}/spacing_kde.csv"), &sp_curve.to_csv()).map_err(io)?;
    ctx.write(&format!("{dir}/qq_vs_random_hankel.csv"), &vs_hankel.to_csv()).map_err(io)?;
    ctx.write(&format!("{dir}/qq_vs_goe.csv"), &vs_goe.to_csv()).map_err(io)?;
    ctx.svg(
        &format!("{dir}/bulk.svg"),
        &Plot::new(
            format!("Bulk eigenvalue distribution of the {} trajectory matrix (m = {m})", inst.id),
            "eigenvalue / sqrt(m)",
            "density",
        )
        .with(Layer::line("KDE", curve_points(&bulk), PALETTE[0])),
    )
    .map_err(io)?;
    ctx.svg(
        &format!("{dir}/spacings.svg"),
        &spacing_plot(format!("Spacing distribution of {}", inst.id), &sp_curve),
    )
    .map_err(io)?;
    ctx.svg(
        &format!("{dir}/qq_vs_random_hankel.svg"),
        &qq_plot(
            format!("Q-Q: random Hankel vs {} spacings", inst.id),
            "random Hankel spacing quantile",
            &format!("{} spacing quantile", inst.id),
            &vs_hankel,
        ),
    )
    .map_err(io)?;

    Ok(InstrumentSpectrum {
        instrument: inst.id.clone(),
        returns: values.len(),
        m,
        method,
        scaling: "normalized_by_sqrt_m",
        standardized_returns: cfg.standardize,
        source: raw.source,
        trace_residual,
        spacings: sp.len(),
        level_repulsion: repulsion,
        bulk_bimodality: bulk_bimodality(&bulk, cfg.bimodality_tolerance),
        linearity_vs_random_hankel: vs_hankel.linearity_score(),
        linearity_vs_goe: vs_goe.linearity_score(),
        eigenvalues: Some(eig),
        spacing_sample: Some(sp),
    })
}

pub fn spectra(
    ctx: &Context,
    instruments: &[Instrument],
    ensemble_summary: EnsembleSummary,
) -> Result<Spectra, PipelineError> {
    let baseline = ensemble_summary
        .spacings
        .clone()
        .expect("ensemble summary keeps its spacings");
    let results: Vec<Result<InstrumentSpectrum, Failure>> = instruments
        .par_iter()
        .map(|inst| {
            spectrum_one(ctx, inst, &baseline).map_err(|error| Failure {
                instrument: inst.id.clone(),
                stage: "spectrum",
                error,
            })
        })
        .collect();
    let (done, failures) = split(results);

    let mut cross = Vec::new();
    for (i, a) in done.iter().enumerate() {
        for b in &done[i + 1..] {
            let (ea, eb) = (a.eigenvalues.as_ref().unwrap(), b.eigenvalues.as_ref().unwrap());
            let (sa, sb) = (a.spacing_sample.as_ref().unwrap(), b.spacing_sample.as_ref().unwrap());
            let bulk_qq = qq_curve(ea, eb, &ctx.config.quantile_levels)?;
            let spacing_qq_ab = spacing_qq(sa, sb)?;
            let stem = format!("spectrum/cross/{}__{}", a.instrument, b.instrument);
            ctx.write(&format!("{stem}.bulk.csv"), &bulk_qq.to_csv())?;
            ctx.write(&format!("{stem}.spacing.csv"), &spacing_qq_ab.to_csv())?;
            ctx.svg(
                &format!("{stem}.spacing.svg"),
                &qq_plot(
                    format!("Q-Q: {} vs {} spacings", a.instrument, b.instrument),
                    &format!("{} spacing quantile", a.instrument),
                    &format!("{} spacing quantile", b.instrument),
                    &spacing_qq_ab,
                ),
            )?;
            cross.push(CrossScore {
                left: a.instrument.clone(),
                right: b.instrument.clone(),
                bulk_linearity: bulk_qq.linearity_score(),
                spacing_linearity: spacing_qq_ab.linearity_score(),
            });
        }
    }
    let result = Spectra {
        instruments: done,
        cross,
        failures,
        ensemble: Some(ensemble_summary),
    };
    ctx.json("spectrum/summary.json", "spectra", &result)?;
    Ok(result)
}

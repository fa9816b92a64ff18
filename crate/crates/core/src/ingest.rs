//! Daily close histories: CSV parsing, validation and synthetic fixtures.
//!
//! Prices are kept as `f64`. When a series is parsed from text the original
//! decimal strings are retained so that writing the series back out reproduces
//! the input values exactly.

use std::fmt;

use chrono::{Days, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Degrees of freedom of the Student-t fixture returns.
pub const STUDENT_T_DOF: f64 = 3.0;

const FIXTURE_START_PRICE: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("series `{id}` has {found} valid observations, at least 2 are required")]
    EmptySeries { id: String, found: usize },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: u64, date: NaiveDate },
    #[error("header has no column named `{0}`")]
    MissingColumn(String),
    #[error("fixture length {0} is too small, at least 2 prices are required")]
    LengthTooSmall(usize),
    #[error("fixture price path leaves the representable range (seed {seed})")]
    FixtureOverflow { seed: u64 },
    #[error("observations are not in strictly increasing date order at index {0}")]
    Unordered(usize),
    #[error("price at index {index} is not a finite positive number: {value}")]
    InvalidPrice { index: usize, value: f64 },
    #[error("csv: {0}")]
    Csv(String),
}

/// One daily close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub date: NaiveDate,
    pub close: f64,
}

/// Ordered daily closes of a single instrument.
///
/// Dates are strictly increasing, every close is finite and positive, and
/// there are at least two observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    instrument_id: String,
    observations: Vec<Observation>,
    close_text: Option<Vec<String>>,
}

/// Names of the columns read by [`parse_price_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvColumns {
    pub date: String,
    pub close: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        Self {
            date: "date".into(),
            close: "close".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    /// I.i.d. standard normal log returns.
    GaussianWalk,
    /// I.i.d. Student-t log returns with [`STUDENT_T_DOF`] degrees of freedom.
    StudentTWalk,
    Constant,
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FixtureKind::GaussianWalk => "gaussian_walk",
            FixtureKind::StudentTWalk => "student_t_walk",
            FixtureKind::Constant => "constant",
        })
    }
}

impl std::str::FromStr for FixtureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian_walk" => Ok(FixtureKind::GaussianWalk),
            "student_t_walk" => Ok(FixtureKind::StudentTWalk),
            "constant" => Ok(FixtureKind::Constant),
            other => Err(format!("unknown fixture kind `{other}`")),
        }
    }
}

impl PriceSeries {
    /// Validates and wraps already ordered observations.
    pub fn new(
        instrument_id: impl Into<String>,
        observations: Vec<Observation>,
    ) -> Result<Self, IngestError> {
        let instrument_id = instrument_id.into();
        if observations.len() < 2 {
            return Err(IngestError::EmptySeries {
                id: instrument_id,
                found: observations.len(),
            });
        }
        for (index, obs) in observations.iter().enumerate() {
            if !(obs.close.is_finite() && obs.close > 0.0) {
                return Err(IngestError::InvalidPrice {
                    index,
                    value: obs.close,
                });
            }
        }
        if let Some(i) = observations
            .windows(2)
            .position(|w| w[0].date >= w[1].date)
        {
            return Err(IngestError::Unordered(i + 1));
        }
        Ok(Self {
            instrument_id,
            observations,
            close_text: None,
        })
    }

    pub fn instrument_id(&self) -> &str {
        &self.instrument_id
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn closes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.close)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Writes the series as a `date,close` CSV document.
    ///
    /// Closes that came from text are written back verbatim; other closes use
    /// the shortest decimal representation that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 24);
        out.push_str("date,close\n");
        for (i, obs) in self.observations.iter().enumerate() {
            out.push_str(&obs.date.format("%Y-%m-%d").to_string());
            out.push(',');
            match &self.close_text {
                Some(text) => out.push_str(&text[i]),
                None => out.push_str(&format!("{}", obs.close)),
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 over the instrument id and the canonical CSV form, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.instrument_id.as_bytes());
        hasher.update([0u8]);
        hasher.update(self.to_csv().as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// Parses a CSV price history with the default `date` and `close` columns.
pub fn parse_price_csv(text: &str, instrument_id: &str) -> Result<PriceSeries, IngestError> {
    parse_price_csv_with(text, instrument_id, &CsvColumns::default())
}

/// Parses a CSV price history. Rows may appear in any order; the result is
/// sorted by date. Any row with a bad date or a non-positive price is an error.
pub fn parse_price_csv_with(
    text: &str,
    instrument_id: &str,
    columns: &CsvColumns,
) -> Result<PriceSeries, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .or_else(|| headers.iter().position(|h| h.eq_ignore_ascii_case(name)))
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let date_idx = find(&columns.date)?;
    let close_idx = find(&columns.close)?;

    let mut rows: Vec<(u64, Observation, String)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Csv(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|field| field.is_empty()) {
            continue;
        }
        let field = |idx: usize, name: &str| {
            record.get(idx).ok_or_else(|| IngestError::MalformedRow {
                line,
                reason: format!("missing `{name}` field"),
            })
        };
        let date_text = field(date_idx, &columns.date)?;
        let close_text = field(close_idx, &columns.close)?;
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d").map_err(|e| {
            IngestError::MalformedRow {
                line,
                reason: format!("bad date `{date_text}`: {e}"),
            }
        })?;
        let close: f64 = close_text.parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("non-numeric price `{close_text}`"),
        })?;
        if !(close.is_finite() && close > 0.0) {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("price `{close_text}` is not a finite positive number"),
            });
        }
        rows.push((line, Observation { date, close }, close_text.to_string()));
    }

    if rows.len() < 2 {
        return Err(IngestError::EmptySeries {
            id: instrument_id.to_string(),
            found: rows.len(),
        });
    }
    rows.sort_by_key(|(_, obs, _)| obs.date);
    if let Some(w) = rows.windows(2).find(|w| w[0].1.date == w[1].1.date) {
        let line = w[0].0.max(w[1].0);
        return Err(IngestError::DuplicateDate {
            line,
            date: w[1].1.date,
        });
    }

    let (observations, text): (Vec<_>, Vec<_>) =
        rows.into_iter().map(|(_, obs, text)| (obs, text)).unzip();
    let mut series = PriceSeries::new(instrument_id, observations)?;
    series.close_text = Some(text);
    Ok(series)
}

/// Builds a deterministic synthetic price history of `length` daily closes.
///
/// Walk fixtures draw i.i.d. log returns from a ChaCha20 stream seeded with
/// `seed`. The log-price path is shifted so that its midrange sits at
/// `ln(100)`, which keeps long walks inside the `f64` range without changing
/// any return.
pub fn synthetic_fixture(
    kind: FixtureKind,
    length: usize,
    seed: u64,
) -> Result<PriceSeries, IngestError> {
    if length < 2 {
        return Err(IngestError::LengthTooSmall(length));
    }
    let id = format!("{kind}-{seed}");
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid start date");
    let dates = (0..length as u64).map(|d| start + Days::new(d));

    let closes: Vec<f64> = match kind {
        FixtureKind::Constant => vec![FIXTURE_START_PRICE; length],
        FixtureKind::GaussianWalk | FixtureKind::StudentTWalk => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let increments: Vec<f64> = match kind {
                FixtureKind::GaussianWalk => (1..length)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect(),
                _ => {
                    let t = StudentT::new(STUDENT_T_DOF).expect("positive degrees of freedom");
                    (1..length).map(|_| t.sample(&mut rng)).collect()
                }
            };
            let mut log_price = Vec::with_capacity(length);
            log_price.push(0.0);
            let mut acc = 0.0;
            for r in &increments {
                acc += r;
                log_price.push(acc);
            }
            let (lo, hi) = log_price
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let shift = FIXTURE_START_PRICE.ln() - 0.5 * (lo + hi);
            let closes: Vec<f64> = log_price.iter().map(|l| (l + shift).exp()).collect();
            if closes
                .iter()
                .any(|c| !c.is_finite() || *c < f64::MIN_POSITIVE)
            {
                return Err(IngestError::FixtureOverflow { seed });
            }
            closes
        }
    };

    let observations = dates
        .zip(closes)
        .map(|(date, close)| Observation { date, close })
        .collect();
    PriceSeries::new(id, observations)
}

//! Log returns and lag autocorrelation of returns and of their magnitudes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PriceSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReturnsError {
    #[error("transformed series is constant, autocorrelation is undefined")]
    ZeroVariance,
    #[error("series of length {len} is too short for lag {lag}")]
    SeriesTooShort { len: usize, lag: usize },
    #[error("lag must be at least 1")]
    ZeroLag,
    #[error("return at index {0} is not finite")]
    NonFinite(usize),
}

/// Per-instrument failure in [`table1_report`].
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{instrument_id}: {error}")]
pub struct RowError {
    pub instrument_id: String,
    pub error: ReturnsError,
}

/// Consecutive log returns `ln(p[i+1] / p[i])` of one instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    instrument_id: String,
    values: Vec<f64>,
    source_length: usize,
}

impl ReturnSeries {
    /// Wraps raw return values. `source_length` is taken as `values.len() + 1`.
    pub fn from_values(
        instrument_id: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<Self, ReturnsError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ReturnsError::NonFinite(i));
        }
        Ok(Self {
            instrument_id: instrument_id.into(),
            source_length: values.len() + 1,
            values,
        })
    }

    pub fn instrument_id(&self) -> &str {
        &self.instrument_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_length(&self) -> usize {
        self.source_length
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Shifted and scaled to mean 0 and population standard deviation 1,
    /// keeping the time order.
    pub fn standardized(&self) -> Result<ReturnSeries, ReturnsError> {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let var = self.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if !(var > 0.0) {
            return Err(ReturnsError::ZeroVariance);
        }
        let sd = var.sqrt();
        Ok(ReturnSeries {
            instrument_id: self.instrument_id.clone(),
            values: self.values.iter().map(|v| (v - mean) / sd).collect(),
            source_length: self.source_length,
        })
    }
}

/// Log returns between consecutive observations, ignoring calendar gaps.
pub fn log_returns(prices: &PriceSeries) -> ReturnSeries {
    let closes: Vec<f64> = prices.closes().collect();
    let values = closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    ReturnSeries {
        instrument_id: prices.instrument_id().to_string(),
        values,
        source_length: closes.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    AbsoluteValue,
}

impl Transform {
    fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::AbsoluteValue => v.abs(),
        }
    }
}

/// Sample autocorrelation at `lag` of `transform(x)`.
///
/// Uses the biased estimator: the lagged cross-products are divided by the
/// sum of squared deviations over the full sample, so the result always lies
/// in `[-1, 1]`.
pub fn autocorrelation(
    x: &ReturnSeries,
    lag: usize,
    transform: Transform,
) -> Result<f64, ReturnsError> {
    if lag == 0 {
        return Err(ReturnsError::ZeroLag);
    }
    let y: Vec<f64> = x.values.iter().map(|&v| transform.apply(v)).collect();
    autocorrelation_of(&y, lag)
}

/// Estimator behind [`autocorrelation`] on plain values; lag 0 is allowed
/// here and yields 1 for any non-constant input.
pub fn autocorrelation_of(y: &[f64], lag: usize) -> Result<f64, ReturnsError> {
    let n = y.len();
    if n <= lag || n < 2 {
        return Err(ReturnsError::SeriesTooShort { len: n, lag });
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(ReturnsError::ZeroVariance);
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let denom: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom <= 0.0 {
        return Err(ReturnsError::ZeroVariance);
    }
    let num: f64 = y
        .iter()
        .zip(&y[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    Ok((num / denom).clamp(-1.0, 1.0))
}

/// One row of the lag-1 autocorrelation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrelationReport {
    #[serde(rename = "instrument")]
    pub instrument_id: String,
    pub lag: usize,
    #[serde(rename = "raw_autocorr")]
    pub raw: f64,
    #[serde(rename = "abs_autocorr")]
    pub absolute: f64,
}

/// Lag-1 autocorrelation of returns and of absolute returns, one row per
/// instrument, in input order.
pub fn table1_report(series: &[ReturnSeries]) -> Vec<Result<AutocorrelationReport, RowError>> {
    series
        .iter()
        .map(|s| {
            let row_err = |error| RowError {
                instrument_id: s.instrument_id.clone(),
                error,
            };
            let raw = autocorrelation(s, 1, Transform::Identity).map_err(row_err)?;
            let absolute = autocorrelation(s, 1, Transform::AbsoluteValue).map_err(row_err)?;
            Ok(AutocorrelationReport {
                instrument_id: s.instrument_id.clone(),
                lag: 1,
                raw,
                absolute,
            })
        })
        .collect()
}

/// CSV form of the table: `instrument,lag,raw_autocorr,abs_autocorr`.
pub fn report_to_csv(rows: &[AutocorrelationReport]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["instrument", "lag", "raw_autocorr", "abs_autocorr"])
        .expect("in-memory write");
    for row in rows {
        writer
            .write_record([
                row.instrument_id.clone(),
                row.lag.to_string(),
                row.raw.to_string(),
                row.absolute.to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

//! Trajectory (Hankel) matrices of a return series and their spectra.
//!
//! A square Hankel matrix of side `m` is stored through its generator
//! `g[0..2m-1]`, with entry `(i, j) = g[i + j]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::returns::ReturnSeries;

pub mod lanczos;
pub mod matvec;
pub mod tridiagonal;

pub use matvec::{naive_matvec, HankelOperator, SymmetricOperator};
pub use tridiagonal::{symmetric_eigenvalues, tridiagonal_eigenvalues, SymmetricMatrix};

/// Largest side the dense solver is picked for by [`EigenMethod::auto`].
pub const DENSE_DEFAULT_MAX_SIDE: usize = 4096;

/// Dense storage limit; larger requests fail with [`HankelError::OutOfMemory`].
pub const DENSE_MAX_BYTES: usize = 4 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HankelError {
    #[error("series of length {len} cannot fill a {rows}x{cols} trajectory matrix")]
    SeriesTooShort { len: usize, rows: usize, cols: usize },
    #[error("matrix dimensions must be at least 1")]
    EmptyMatrix,
    #[error("generator length {0} is not of the form 2m - 1")]
    BadGenerator(usize),
    #[error("vector length {found} does not match matrix side {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("iterative eigensolver needs side >= 8, got {0}")]
    TooSmallForIterative(usize),
    #[error(
        "dense {m}x{m} matrix needs {bytes} bytes, above the {limit}-byte limit; use the iterative method"
    )]
    OutOfMemory { m: usize, bytes: usize, limit: usize },
    #[error("spectrum is already normalized")]
    AlreadyNormalized,
    #[error("generator entry {0} is not finite")]
    NonFinite(usize),
    #[error("malformed spectrum file: {0}")]
    Parse(String),
}

/// Window view of a series: row `i`, column `j` holds `x[i + j]`.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryMatrix<'a> {
    values: &'a [f64],
    rows: usize,
    cols: usize,
}

impl<'a> TrajectoryMatrix<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols);
        self.values[i + j]
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.values[i..i + self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// The square case as a [`HankelMatrix`].
    pub fn to_hankel(&self) -> Option<HankelMatrix> {
        (self.rows == self.cols)
            .then(|| HankelMatrix::new(self.values[..2 * self.rows - 1].to_vec()).ok())
            .flatten()
    }
}

/// `n` sliding windows of length `k` over the series.
pub fn trajectory_matrix(
    x: &ReturnSeries,
    k: usize,
    n: usize,
) -> Result<TrajectoryMatrix<'_>, HankelError> {
    if k == 0 || n == 0 {
        return Err(HankelError::EmptyMatrix);
    }
    if k + n - 1 > x.len() {
        return Err(HankelError::SeriesTooShort {
            len: x.len(),
            rows: n,
            cols: k,
        });
    }
    Ok(TrajectoryMatrix {
        values: x.values(),
        rows: n,
        cols: k,
    })
}

/// Square symmetric Hankel matrix held by its generator.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    generator: Vec<f64>,
}

impl HankelMatrix {
    pub fn new(generator: Vec<f64>) -> Result<Self, HankelError> {
        if generator.len().is_multiple_of(2) {
            return Err(HankelError::BadGenerator(generator.len()));
        }
        if let Some(i) = generator.iter().position(|g| !g.is_finite()) {
            return Err(HankelError::NonFinite(i));
        }
        Ok(Self { generator })
    }

    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    pub fn side(&self) -> usize {
        self.generator.len().div_ceil(2)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.generator[i + j]
    }

    /// `Σ_i g[2i]`.
    pub fn trace(&self) -> f64 {
        self.generator.iter().step_by(2).sum()
    }

    /// `Σ_{i,j} g[i+j]²`; generator entry `s` appears `min(s, 2m-2-s) + 1` times.
    pub fn frobenius_sq(&self) -> f64 {
        let last = self.generator.len() - 1;
        self.generator
            .iter()
            .enumerate()
            .map(|(s, g)| (s.min(last - s) + 1) as f64 * g * g)
            .sum()
    }

    pub fn to_dense(&self) -> SymmetricMatrix {
        let m = self.side();
        let mut data = Vec::with_capacity(m * m);
        for i in 0..m {
            data.extend_from_slice(&self.generator[i..i + m]);
        }
        SymmetricMatrix::from_row_major(m, data)
    }
}

/// The largest square trajectory matrix: side `m = ⌊(|x| + 1) / 2⌋` built from
/// the first `2m - 1` returns. An even-length series loses its final return.
pub fn maximal_square(x: &ReturnSeries) -> Result<HankelMatrix, HankelError> {
    if x.is_empty() {
        return Err(HankelError::EmptyMatrix);
    }
    let m = x.len().div_ceil(2);
    HankelMatrix::new(x.values()[..2 * m - 1].to_vec())
}

/// Checked FFT product `h·v`.
pub fn hankel_matvec(h: &HankelMatrix, v: &[f64]) -> Result<Vec<f64>, HankelError> {
    if v.len() != h.side() {
        return Err(HankelError::DimensionMismatch {
            expected: h.side(),
            found: v.len(),
        });
    }
    let mut y = vec![0.0; v.len()];
    HankelOperator::new(h).apply(v, &mut y);
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Householder tridiagonalization and implicit QL on the materialized matrix.
    Dense,
    /// Lanczos with full reorthogonalization driven by FFT products.
    Iterative,
}

impl EigenMethod {
    pub fn auto(m: usize) -> Self {
        if m <= DENSE_DEFAULT_MAX_SIDE {
            EigenMethod::Dense
        } else {
            EigenMethod::Iterative
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EigenMethod::Dense => "dense",
            EigenMethod::Iterative => "iterative",
        }
    }
}

impl std::str::FromStr for EigenMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(EigenMethod::Dense),
            "iterative" => Ok(EigenMethod::Iterative),
            other => Err(format!("unknown eigen method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Raw,
    NormalizedBySqrtM,
}

/// Ascending eigenvalues of a symmetric matrix, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub source: String,
    pub scaling: Scaling,
}

impl Spectrum {
    pub fn side(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `|Σλ - trace| / max(1, Σ|g_2i|)`, computed on raw eigenvalues.
    pub fn trace_residual(&self, h: &HankelMatrix) -> f64 {
        let factor = match self.scaling {
            Scaling::Raw => 1.0,
            Scaling::NormalizedBySqrtM => (self.side() as f64).sqrt(),
        };
        let sum: f64 = self.eigenvalues.iter().map(|l| l * factor).sum();
        let magnitude: f64 = h.generator().iter().step_by(2).map(|g| g.abs()).sum();
        (sum - h.trace()).abs() / magnitude.max(1.0)
    }

    /// One-column CSV with header `eigenvalue`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eigenvalue\n");
        for l in &self.eigenvalues {
            out.push_str(&format!("{l}\n"));
        }
        out
    }

    pub fn from_csv(text: &str, source: &str, scaling: Scaling) -> Result<Self, HankelError> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("eigenvalue") {
            return Err(HankelError::Parse("missing `eigenvalue` header".into()));
        }
        let eigenvalues = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| HankelError::Parse(format!("`{l}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(HankelError::Parse("eigenvalues not sorted".into()));
        }
        Ok(Self {
            eigenvalues,
            source: source.to_string(),
            scaling,
        })
    }
}

/// All `m` eigenvalues of `h`, ascending, with raw scaling.
pub fn eigenvalues(h: &HankelMatrix, method: EigenMethod) -> Result<Spectrum, HankelError> {
    let m = h.side();
    let eigenvalues = match method {
        EigenMethod::Dense => {
            let bytes = m.saturating_mul(m).saturating_mul(std::mem::size_of::<f64>());
            if bytes > DENSE_MAX_BYTES {
                return Err(HankelError::OutOfMemory {
                    m,
                    bytes,
                    limit: DENSE_MAX_BYTES,
                });
            }
            symmetric_eigenvalues(h.to_dense())?
        }
        EigenMethod::Iterative => {
            if m < 8 {
                return Err(HankelError::TooSmallForIterative(m));
            }
            lanczos::lanczos_eigenvalues(&HankelOperator::new(h))?.eigenvalues
        }
    };
    Ok(Spectrum {
        eigenvalues,
        source: String::new(),
        scaling: Scaling::Raw,
    })
}

/// Divides every eigenvalue by `√m`.
pub fn normalize_spectrum(s: &Spectrum) -> Result<Spectrum, HankelError> {
    if s.scaling != Scaling::Raw {
        return Err(HankelError::AlreadyNormalized);
    }
    let root = (s.side() as f64).sqrt();
    Ok(Spectrum {
        eigenvalues: s.eigenvalues.iter().map(|l| l / root).collect(),
        source: s.source.clone(),
        scaling: Scaling::NormalizedBySqrtM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: &[f64]) -> ReturnSeries {
        ReturnSeries::from_values("t", v.to_vec()).unwrap()
    }

    #[test]
    fn trajectory_examples() {
        let x = series(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let t = trajectory_matrix(&x, 3, 3).unwrap();
        assert_eq!(
            t.to_rows(),
            vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]]
        );
        let h = t.to_hankel().unwrap();
        assert_eq!(h.generator(), &[1.0, 2.0, 3.0, 4.0, 5.0]);

        let single = series(&[7.5]);
        let t = trajectory_matrix(&single, 1, 1).unwrap();
        assert_eq!(t.to_rows(), vec![vec![7.5]]);

        let rect = trajectory_matrix(&x, 2, 4).unwrap();
        assert_eq!((rect.rows(), rect.cols(), rect.entry(3, 1)), (4, 2, 5.0));
        assert!(rect.to_hankel().is_none());

        assert!(matches!(
            trajectory_matrix(&x, 3, 4),
            Err(HankelError::SeriesTooShort { len: 5, rows: 4, cols: 3 })
        ));
        assert!(matches!(trajectory_matrix(&x, 0, 1), Err(HankelError::EmptyMatrix)));
    }

    #[test]
    fn maximal_square_sizes() {
        let odd = series(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(maximal_square(&odd).unwrap().side(), 3);
        let even = series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let h = maximal_square(&even).unwrap();
        assert_eq!(h.side(), 3);
        assert_eq!(h.generator(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let long = series(&vec![0.5; 5999]);
        assert_eq!(maximal_square(&long).unwrap().side(), 3000);
        assert!(maximal_square(&series(&[])).is_err());
    }

    #[test]
    fn dense_materialization_is_symmetric() {
        let h = HankelMatrix::new((0..9).map(|i| (i * i) as f64 - 3.0).collect()).unwrap();
        let a = h.to_dense();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a.get(i, j), a.get(j, i));
                assert_eq!(a.get(i, j), h.entry(i, j));
            }
        }
        assert_eq!(h.trace(), (0..5).map(|i| a.get(i, i)).sum::<f64>());
        let frob: f64 = (0..5).flat_map(|i| a.row(i).to_vec()).map(|x| x * x).sum();
        assert_eq!(h.frobenius_sq(), frob);
    }

    #[test]
    fn generator_checks() {
        assert_eq!(HankelMatrix::new(vec![1.0, 2.0]), Err(HankelError::BadGenerator(2)));
        assert_eq!(HankelMatrix::new(vec![]), Err(HankelError::BadGenerator(0)));
        assert_eq!(HankelMatrix::new(vec![f64::NAN]), Err(HankelError::NonFinite(0)));
    }

    #[test]
    fn matvec_examples() {
        let h = HankelMatrix::new(vec![1.0, 2.0, 3.0]).unwrap();
        let y = hankel_matvec(&h, &[1.0, 0.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14 && (y[1] - 2.0).abs() < 1e-14);
        assert_eq!(hankel_matvec(&h, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(
            hankel_matvec(&h, &[1.0]),
            Err(HankelError::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn two_by_two_spectrum() {
        let h = HankelMatrix::new(vec![1.0, 2.0, 3.0]).unwrap();
        let s = eigenvalues(&h, EigenMethod::Dense).unwrap();
        assert!((s.eigenvalues[0] - (2.0 - 5f64.sqrt())).abs() < 1e-14);
        assert!((s.eigenvalues[1] - (2.0 + 5f64.sqrt())).abs() < 1e-14);
        assert!((s.eigenvalues[0] + 0.23607).abs() < 1e-5);
        assert!(s.trace_residual(&h) < 1e-14);
    }

    #[test]
    fn zero_generator() {
        let h = HankelMatrix::new(vec![0.0; 7]).unwrap();
        assert_eq!(eigenvalues(&h, EigenMethod::Dense).unwrap().eigenvalues, vec![0.0; 4]);
        let h = HankelMatrix::new(vec![0.0; 17]).unwrap();
        let s = eigenvalues(&h, EigenMethod::Iterative).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn iterative_needs_side_eight() {
        let h = HankelMatrix::new(vec![1.0; 13]).unwrap();
        assert_eq!(
            eigenvalues(&h, EigenMethod::Iterative),
            Err(HankelError::TooSmallForIterative(7))
        );
    }

    #[test]
    fn dense_memory_guard() {
        let m = 30_000;
        let h = HankelMatrix::new(vec![0.0; 2 * m - 1]).unwrap();
        assert!(matches!(
            eigenvalues(&h, EigenMethod::Dense),
            Err(HankelError::OutOfMemory { m: 30_000, .. })
        ));
        assert_eq!(EigenMethod::auto(4096), EigenMethod::Dense);
        assert_eq!(EigenMethod::auto(4097), EigenMethod::Iterative);
    }

    #[test]
    fn normalization() {
        let s = Spectrum {
            eigenvalues: vec![4.0],
            source: "x".into(),
            scaling: Scaling::Raw,
        };
        assert_eq!(normalize_spectrum(&s).unwrap().eigenvalues, vec![4.0]);
        let s = Spectrum {
            eigenvalues: vec![-2.0, 0.0, 0.0, 2.0],
            source: "x".into(),
            scaling: Scaling::Raw,
        };
        let n = normalize_spectrum(&s).unwrap();
        assert_eq!(n.eigenvalues, vec![-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(n.scaling, Scaling::NormalizedBySqrtM);
        assert_eq!(normalize_spectrum(&n), Err(HankelError::AlreadyNormalized));
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let s = Spectrum {
            eigenvalues: vec![-1.5e-300, 0.1, 2.0 / 3.0],
            source: "x".into(),
            scaling: Scaling::Raw,
        };
        let back = Spectrum::from_csv(&s.to_csv(), "x", Scaling::Raw).unwrap();
        assert_eq!(back, s);
        assert!(Spectrum::from_csv("value\n1\n", "x", Scaling::Raw).is_err());
    }
}

//! Hankel matrix-vector products in `O(m log m)` through circulant embedding.
//!
//! With `w[k] = v[m-1-k]`, the product `y[i] = Σ_j g[i+j]·v[j]` equals entry
//! `i + m - 1` of the linear convolution `g * w`. Computing that convolution
//! cyclically with length `L ≥ 2m - 1` leaves entries `m-1 ..= 2m-2` free of
//! wrap-around, so one forward and one inverse FFT suffice.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::HankelMatrix;

/// Symmetric linear operator on `R^n`.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    /// Writes `A·x` into `y`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// A Hankel matrix prepared for repeated FFT products.
pub struct HankelOperator {
    m: usize,
    generator_spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl HankelOperator {
    pub fn new(h: &HankelMatrix) -> Self {
        let m = h.side();
        let len = (2 * m).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut generator_spectrum = vec![Complex::new(0.0, 0.0); len];
        for (slot, &g) in generator_spectrum.iter_mut().zip(h.generator()) {
            slot.re = g;
        }
        forward.process(&mut generator_spectrum);
        Self {
            m,
            generator_spectrum,
            forward,
            inverse,
        }
    }

    /// Length of the circulant embedding.
    pub fn embedding_len(&self) -> usize {
        self.generator_spectrum.len()
    }
}

impl SymmetricOperator for HankelOperator {
    fn dim(&self) -> usize {
        self.m
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.m;
        assert_eq!(x.len(), m);
        assert_eq!(y.len(), m);
        let len = self.embedding_len();
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for (k, slot) in buf.iter_mut().take(m).enumerate() {
            slot.re = x[m - 1 - k];
        }
        self.forward.process(&mut buf);
        buf.iter_mut()
            .zip(&self.generator_spectrum)
            .for_each(|(b, g)| *b *= g);
        self.inverse.process(&mut buf);
        let scale = 1.0 / len as f64;
        for (i, out) in y.iter_mut().enumerate() {
            *out = buf[i + m - 1].re * scale;
        }
    }
}

/// The `O(m²)` reference product.
pub fn naive_matvec(h: &HankelMatrix, v: &[f64]) -> Vec<f64> {
    let g = h.generator();
    (0..h.side())
        .map(|i| g[i..i + v.len()].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

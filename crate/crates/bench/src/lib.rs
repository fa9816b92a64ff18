//! Shared inputs for the criterion benchmarks.

use trajspec::rmt::EnsembleSpec;
use trajspec::HankelMatrix;

/// One draw of the Gaussian Hankel ensemble of side `m`.
pub fn gaussian_hankel(m: usize, seed: u64) -> HankelMatrix {
    HankelMatrix::new(EnsembleSpec::new(m, 1, seed).generator(0)).expect("odd generator")
}

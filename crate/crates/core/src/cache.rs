//! Content-addressed on-disk cache for price series and spectra.
//!
//! Layout under the cache root:
//!
//! ```text
//! series/<sha256 of id + canonical csv>.csv
//! spectra/<sha256 of generator bits + method>.csv
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::hankel::{EigenMethod, HankelMatrix, Scaling, Spectrum};
use crate::ingest::PriceSeries;

/// Cache key of the eigen-decomposition of `h` by `method`.
pub fn spectrum_key(h: &HankelMatrix, method: EigenMethod) -> String {
    let mut hasher = Sha256::new();
    hasher.update((h.generator().len() as u64).to_le_bytes());
    for g in h.generator() {
        hasher.update(g.to_bits().to_le_bytes());
    }
    hasher.update(method.as_str().as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone)]
pub struct ContentCache {
    root: PathBuf,
}

impl ContentCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn write(&self, dir: &str, key: &str, contents: &str) -> io::Result<PathBuf> {
        let dir = self.root.join(dir);
        fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{key}.csv"));
        // write-then-rename so concurrent readers never see a partial file
        let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
        fs::write(&tmp, contents)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Stores the canonical CSV of `series` under its content hash.
    pub fn store_series(&self, series: &PriceSeries) -> io::Result<PathBuf> {
        self.write("series", &series.content_hash(), &series.to_csv())
    }

    /// Raw-scaled spectrum for `key`, if present and readable.
    pub fn load_spectrum(&self, key: &str, source: &str) -> Option<Spectrum> {
        let path = self.root.join("spectra").join(format!("{key}.csv"));
        let text = fs::read_to_string(path).ok()?;
        Spectrum::from_csv(&text, source, Scaling::Raw).ok()
    }

    pub fn store_spectrum(&self, key: &str, spectrum: &Spectrum) -> io::Result<PathBuf> {
        assert_eq!(spectrum.scaling, Scaling::Raw, "only raw spectra are cached");
        self.write("spectra", key, &spectrum.to_csv())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::eigenvalues;
    use crate::ingest::{synthetic_fixture, FixtureKind};

    #[test]
    fn spectrum_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ContentCache::new(dir.path());
        let h = HankelMatrix::new(vec![0.1, -0.7, 2.5, 0.3, 1.1]).unwrap();
        let key = spectrum_key(&h, EigenMethod::Dense);
        assert!(cache.load_spectrum(&key, "x").is_none());
        let s = eigenvalues(&h, EigenMethod::Dense).unwrap();
        cache.store_spectrum(&key, &s).unwrap();
        let back = cache.load_spectrum(&key, "").unwrap();
        assert_eq!(back.eigenvalues, s.eigenvalues);
    }

    #[test]
    fn keys_depend_on_generator_and_method() {
        let a = HankelMatrix::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = HankelMatrix::new(vec![1.0, 2.0, 3.0000000000000004]).unwrap();
        assert_ne!(spectrum_key(&a, EigenMethod::Dense), spectrum_key(&b, EigenMethod::Dense));
        assert_ne!(
            spectrum_key(&a, EigenMethod::Dense),
            spectrum_key(&a, EigenMethod::Iterative)
        );
        assert_eq!(spectrum_key(&a, EigenMethod::Dense), spectrum_key(&a.clone(), EigenMethod::Dense));
    }

    #[test]
    fn series_stored_by_hash() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ContentCache::new(dir.path());
        let s = synthetic_fixture(FixtureKind::GaussianWalk, 20, 3).unwrap();
        let path = cache.store_series(&s).unwrap();
        assert!(path.ends_with(format!("series/{}.csv", s.content_hash())));
        assert_eq!(fs::read_to_string(path).unwrap(), s.to_csv());
    }
}

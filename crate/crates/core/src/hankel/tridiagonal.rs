//! Dense symmetric eigenvalues: Householder reduction to tridiagonal form
//! followed by implicit QL iterations with Wilkinson shifts.

use rayon::prelude::*;

use super::HankelError;

/// Row-major square symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Wraps row-major data. The caller guarantees symmetry.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "data must hold n*n entries");
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

// Below this trailing-block size the rayon overhead is not worth it.
const PAR_THRESHOLD: usize = 128;

/// Reduces `a` in place to a symmetric tridiagonal matrix with the same
/// eigenvalues. Returns `(diagonal, off_diagonal)`, where `off_diagonal[i]`
/// couples rows `i` and `i + 1`.
pub fn tridiagonalize(mut a: SymmetricMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.n;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    if n == 0 {
        return (diag, off);
    }
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        diag[k] = a.get(k, k);
        let start = k + 1;
        let x = &a.data[k * n + start..(k + 1) * n];
        let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            off[k] = 0.0;
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        off[k] = alpha;

        // Reflector H = I - tau·v·vᵀ with H·x = alpha·e₁.
        let v = &mut v[start..];
        v.copy_from_slice(x);
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        let tau = 2.0 / vnorm2;

        // p = tau·B·v, w = p - (tau/2)(pᵀv)·v, B ← B - v·wᵀ - w·vᵀ.
        let w = &mut w[start..];
        let block = &mut a.data[start * n..];
        let row_dot = |row: &[f64]| -> f64 {
            tau * row[start..].iter().zip(v.iter()).map(|(r, s)| r * s).sum::<f64>()
        };
        if n - start >= PAR_THRESHOLD {
            w.par_iter_mut()
                .zip(block.par_chunks(n))
                .for_each(|(wi, row)| *wi = row_dot(row));
        } else {
            w.iter_mut()
                .zip(block.chunks(n))
                .for_each(|(wi, row)| *wi = row_dot(row));
        }
        let k_coef = 0.5 * tau * w.iter().zip(v.iter()).map(|(p, s)| p * s).sum::<f64>();
        w.iter_mut().zip(v.iter()).for_each(|(wi, vi)| *wi -= k_coef * vi);

        let v: &[f64] = v;
        let w: &[f64] = w;
        let update = |(i, row): (usize, &mut [f64])| {
            let (vi, wi) = (v[i], w[i]);
            row[start..]
                .iter_mut()
                .zip(v.iter().zip(w.iter()))
                .for_each(|(r, (vj, wj))| *r -= vi * wj + wi * vj);
        };
        if n - start >= PAR_THRESHOLD {
            block.par_chunks_mut(n).enumerate().for_each(update);
        } else {
            block.chunks_mut(n).enumerate().for_each(update);
        }
    }

    if n >= 2 {
        diag[n - 2] = a.get(n - 2, n - 2);
        off[n - 2] = a.get(n - 1, n - 2);
    }
    diag[n - 1] = a.get(n - 1, n - 1);
    (diag, off)
}

const MAX_QL_SWEEPS: usize = 60;

/// Eigenvalues of the symmetric tridiagonal matrix with the given diagonal and
/// off-diagonal, sorted ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>, HankelError> {
    let n = diag.len();
    assert!(off.len() + 1 == n || (n == 0 && off.is_empty()));
    let mut d = diag.to_vec();
    // e[i] couples d[i] and d[i + 1]; e[n - 1] is a sentinel zero.
    let mut e = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            // Find a negligible off-diagonal element to split at.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(HankelError::NoConvergence { iterations: sweeps });
            }

            // Wilkinson shift from the leading 2×2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// All eigenvalues of a dense symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: SymmetricMatrix) -> Result<Vec<f64>, HankelError> {
    let (d, e) = tridiagonalize(a);
    tridiagonal_eigenvalues(&d, &e)
}

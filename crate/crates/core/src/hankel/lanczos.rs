//! Full-spectrum symmetric Lanczos with full reorthogonalization.
//!
//! Every new Lanczos vector is orthogonalized twice (classical Gram-Schmidt)
//! against the whole basis, so after `n` steps the basis is orthonormal to
//! working precision and the tridiagonal projection has the same eigenvalues
//! as the operator. When the Krylov space closes early (an invariant subspace
//! is found) the iteration restarts from a fresh vector orthogonal to the
//! basis, which splits the tridiagonal matrix into blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::matvec::SymmetricOperator;
use super::tridiagonal::tridiagonal_eigenvalues;
use super::HankelError;

/// Matrix-vector product budget, as a multiple of the dimension.
pub const MATVEC_BUDGET_FACTOR: usize = 10;

// Start and restart vectors come from a fixed stream so results are reproducible.
const START_VECTOR_SEED: u64 = 0x004c_616e_637a_6f73;

// Relative size below which a residual counts as an invariant subspace.
const BREAKDOWN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOutcome {
    pub eigenvalues: Vec<f64>,
    pub matvecs: usize,
    pub restarts: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `w` along every basis vector.
fn project_out(basis: &[Vec<f64>], w: &mut [f64]) {
    let coefs: Vec<f64> = if basis.len() * w.len() > 1 << 16 {
        basis.par_iter().map(|q| dot(q, w)).collect()
    } else {
        basis.iter().map(|q| dot(q, w)).collect()
    };
    let n = w.len();
    let chunk = 256;
    let sub = |(c, wc): (usize, &mut [f64])| {
        let off = c * chunk;
        for (q, &coef) in basis.iter().zip(&coefs) {
            wc.iter_mut()
                .zip(&q[off..])
                .for_each(|(wi, qi)| *wi -= coef * qi);
        }
    };
    if basis.len() * n > 1 << 16 {
        w.par_chunks_mut(chunk).enumerate().for_each(sub);
    } else {
        w.chunks_mut(chunk).enumerate().for_each(sub);
    }
}

/// Orthogonalizes against the basis until the vector stops shrinking sharply.
/// Returns the final norm.
fn reorthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> f64 {
    let mut before = norm(w);
    for _ in 0..3 {
        project_out(basis, w);
        let after = norm(w);
        if after > 0.5 * before {
            return after;
        }
        before = after;
    }
    norm(w)
}

pub fn lanczos_eigenvalues(op: &dyn SymmetricOperator) -> Result<LanczosOutcome, HankelError> {
    let n = op.dim();
    let budget = MATVEC_BUDGET_FACTOR * n;
    let mut rng = ChaCha20Rng::seed_from_u64(START_VECTOR_SEED);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let raw = norm(&v);
            let r = reorthogonalize(basis, &mut v);
            if r > 1e-8 * raw {
                v.iter_mut().for_each(|x| *x /= r);
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut alphas = Vec::with_capacity(n);
    let mut betas: Vec<f64> = Vec::with_capacity(n);
    let mut matvecs = 0;
    let mut restarts = 0;
    let mut scale = 0.0f64;
    let mut w = vec![0.0; n];

    basis.push(random_unit(&basis).ok_or(HankelError::NoConvergence { iterations: 0 })?);
    while basis.len() <= n {
        if matvecs >= budget {
            return Err(HankelError::NoConvergence { iterations: matvecs });
        }
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        matvecs += 1;
        let alpha = dot(&basis[j], &w);
        alphas.push(alpha);
        if basis.len() == n {
            break;
        }
        let beta_prev = if j > 0 { betas[j - 1] } else { 0.0 };
        for (i, wi) in w.iter_mut().enumerate() {
            *wi -= alpha * basis[j][i];
            if j > 0 {
                *wi -= beta_prev * basis[j - 1][i];
            }
        }
        let beta = reorthogonalize(&basis, &mut w);
        scale = scale.max(alpha.abs() + beta + beta_prev);
        if beta > BREAKDOWN_TOL * scale {
            betas.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        } else {
            betas.push(0.0);
            restarts += 1;
            let fresh = random_unit(&basis).ok_or(HankelError::NoConvergence { iterations: matvecs })?;
            basis.push(fresh);
        }
    }

    let eigenvalues = tridiagonal_eigenvalues(&alphas, &betas)?;
    Ok(LanczosOutcome {
        eigenvalues,
        matvecs,
        restarts,
    })
}

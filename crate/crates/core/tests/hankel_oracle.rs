use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use trajspec::hankel::{
    eigenvalues, hankel_matvec, maximal_square, trajectory_matrix, EigenMethod, HankelError,
};
use trajspec::{HankelMatrix, ReturnSeries};

fn gaussian(n: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn dense_rows(g: &[f64]) -> Vec<Vec<f64>> {
    let m = (g.len() + 1) / 2;
    (0..m).map(|i| (0..m).map(|j| g[i + j]).collect()).collect()
}

/// Monic characteristic polynomial coefficients, lowest degree first, by
/// Faddeev-LeVerrier.
fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut mk = vec![vec![0.0; n]; n];
    for k in 1..=n {
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * mk[l][j]).sum::<f64>();
            }
            next[i][i] += c[n - k + 1];
        }
        mk = next;
        let mut tr = 0.0;
        for i in 0..n {
            tr += (0..n).map(|l| a[i][l] * mk[l][i]).sum::<f64>();
        }
        c[n - k] = -tr / k as f64;
    }
    c
}

fn horner(c: &[f64], x: f64) -> (f64, f64) {
    let (mut p, mut dp) = (0.0, 0.0);
    for &coef in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + coef;
    }
    (p, dp)
}

/// Real roots of a polynomial whose roots are all real. Newton started to the
/// right of every root decreases monotonically onto the largest one; that root
/// is then divided out and the search restarts from it.
fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    let mut roots = Vec::new();
    let mut x = 1.0 + c.iter().take(c.len() - 1).map(|v| v.abs()).fold(0.0, f64::max);
    while c.len() > 1 {
        for _ in 0..100_000 {
            let (p, dp) = horner(&c, x);
            if p == 0.0 || dp == 0.0 {
                break;
            }
            let next = x - p / dp;
            if next >= x {
                break;
            }
            x = next;
        }
        // polish on the undeflated polynomial
        for _ in 0..3 {
            let (p, dp) = horner(coeffs, x);
            if dp != 0.0 && (p / dp).abs() < 1e-6 {
                x -= p / dp;
            }
        }
        roots.push(x);
        let mut quotient = vec![0.0; c.len() - 1];
        let mut carry = 0.0;
        for k in (1..c.len()).rev() {
            carry = carry * x + c[k];
            quotient[k - 1] = carry;
        }
        c = quotient;
    }
    roots.sort_by(f64::total_cmp);
    roots
}

#[test]
fn dense_matches_characteristic_polynomial_roots() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for m in 1..=6 {
        for draw in 0..100 {
            let g = gaussian(2 * m - 1, &mut rng);
            let want = real_roots(&char_poly(&dense_rows(&g)));
            let got = eigenvalues(&HankelMatrix::new(g).unwrap(), EigenMethod::Dense)
                .unwrap()
                .eigenvalues;
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-8, "m {m} draw {draw}: {got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn trace_and_frobenius_identities_at_512() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let g = gaussian(2 * 512 - 1, &mut rng);
    let rows = dense_rows(&g);
    let trace: f64 = (0..512).map(|i| rows[i][i]).sum();
    let frob: f64 = rows.iter().flatten().map(|v| v * v).sum();
    let s = eigenvalues(&HankelMatrix::new(g).unwrap(), EigenMethod::Dense).unwrap();
    let sum: f64 = s.eigenvalues.iter().sum();
    let sq: f64 = s.eigenvalues.iter().map(|l| l * l).sum();
    let abs_trace: f64 = (0..512).map(|i| rows[i][i].abs()).sum();
    assert!((sum - trace).abs() <= 1e-8 * abs_trace, "{sum} vs {trace}");
    assert!((sq - frob).abs() <= 1e-8 * frob, "{sq} vs {frob}");
}

fn naive(g: &[f64], v: &[f64]) -> Vec<f64> {
    let m = v.len();
    (0..m).map(|i| (0..m).map(|j| g[i + j] * v[j]).sum()).collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn fft_matvec_matches_naive_product() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for m in [3, 17, 64, 257] {
        let g = gaussian(2 * m - 1, &mut rng);
        let v = gaussian(m, &mut rng);
        let h = HankelMatrix::new(g.clone()).unwrap();
        assert!(rel_diff(&hankel_matvec(&h, &v).unwrap(), &naive(&g, &v)) <= 1e-10);
    }
    for _ in 0..100 {
        let m = rng.random_range(1..=64);
        let g = gaussian(2 * m - 1, &mut rng);
        let v = gaussian(m, &mut rng);
        let h = HankelMatrix::new(g.clone()).unwrap();
        assert!(rel_diff(&hankel_matvec(&h, &v).unwrap(), &naive(&g, &v)) <= 1e-10, "m {m}");
    }
}

#[test]
fn matvec_rejects_wrong_length() {
    let h = HankelMatrix::new(vec![1.0, 2.0, 3.0]).unwrap();
    assert!(matches!(
        hankel_matvec(&h, &[1.0]),
        Err(HankelError::DimensionMismatch { expected: 2, found: 1 })
    ));
}

#[test]
fn iterative_agrees_with_dense() {
    let mut rng = ChaCha20Rng::seed_from_u64(16);
    for m in [8, 64, 512] {
        let h = HankelMatrix::new(gaussian(2 * m - 1, &mut rng)).unwrap();
        let dense = eigenvalues(&h, EigenMethod::Dense).unwrap().eigenvalues;
        let iter = eigenvalues(&h, EigenMethod::Iterative).unwrap().eigenvalues;
        let scale = dense.iter().map(|l| l.abs()).fold(0.0, f64::max);
        for (a, b) in dense.iter().zip(&iter) {
            assert!((a - b).abs() <= 1e-8 * scale, "m {m}: {a} vs {b}");
        }
    }
}

#[test]
fn iterative_handles_repeated_eigenvalues() {
    // rank-one Hankel: g = (1, 1, ..., 1) gives eigenvalues {m, 0, ..., 0}
    let m = 40;
    let h = HankelMatrix::new(vec![1.0; 2 * m - 1]).unwrap();
    let iter = eigenvalues(&h, EigenMethod::Iterative).unwrap().eigenvalues;
    assert!((iter[m - 1] - m as f64).abs() < 1e-9);
    assert!(iter[..m - 1].iter().all(|l| l.abs() < 1e-9));
}

#[test]
fn dense_agrees_with_nalgebra() {
    let mut rng = ChaCha20Rng::seed_from_u64(20);
    let m = 150;
    let g = gaussian(2 * m - 1, &mut rng);
    let a = DMatrix::from_fn(m, m, |i, j| g[i + j]);
    let mut want: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    want.sort_by(f64::total_cmp);
    let got = eigenvalues(&HankelMatrix::new(g).unwrap(), EigenMethod::Dense).unwrap().eigenvalues;
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-10 * m as f64);
    }
}

#[test]
fn maximal_square_side() {
    let x = ReturnSeries::from_values("x", (0..5999).map(|i| i as f64).collect()).unwrap();
    let h = maximal_square(&x).unwrap();
    assert_eq!(h.side(), 3000);
    assert_eq!(h.generator().len(), 5999);
    let even = ReturnSeries::from_values("x", (0..6000).map(|i| i as f64).collect()).unwrap();
    let h = maximal_square(&even).unwrap();
    assert_eq!(h.side(), 3000);
    assert_eq!(*h.generator().last().unwrap(), 5998.0);
}

proptest! {
    #[test]
    fn trajectory_entries_depend_on_index_sum(
        x in prop::collection::vec(-5.0f64..5.0, 3..40),
        k in 1usize..10,
    ) {
        prop_assume!(k < x.len());
        let n = x.len() - k + 1;
        let series = ReturnSeries::from_values("x", x.clone()).unwrap();
        let t = trajectory_matrix(&series, k, n).unwrap();
        prop_assert_eq!((t.rows(), t.cols()), (n, k));
        for i in 0..n {
            for j in 0..k {
                prop_assert_eq!(t.entry(i, j), x[i + j]);
            }
        }
    }

    #[test]
    fn dense_spectrum_conserves_trace_and_frobenius(
        g in prop::collection::vec(-3.0f64..3.0, 1..40).prop_map(|mut v| { if v.len() % 2 == 0 { v.pop(); } v })
    ) {
        prop_assume!(!g.is_empty());
        let h = HankelMatrix::new(g.clone()).unwrap();
        let s = eigenvalues(&h, EigenMethod::Dense).unwrap().eigenvalues;
        let rows = dense_rows(&g);
        let frob: f64 = rows.iter().flatten().map(|v| v * v).sum();
        let sq: f64 = s.iter().map(|l| l * l).sum();
        prop_assert!((sq - frob).abs() <= 1e-10 * frob.max(1.0));
        let trace: f64 = (0..rows.len()).map(|i| rows[i][i]).sum();
        prop_assert!((s.iter().sum::<f64>() - trace).abs() <= 1e-10 * frob.sqrt().max(1.0) * rows.len() as f64);
    }
}

#![allow(dead_code)]

use deadoil_core::{Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x5EED;

pub fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn random_field(g: Grid, rng: &mut impl Rng, lo: f64, hi: f64) -> Field {
    let v = (0..g.len()).map(|_| rng.gen_range(lo..hi)).collect();
    Field::from_values(g, v).unwrap()
}

pub fn bump(g: Grid, amp: f64) -> Field {
    Field::from_fn(g, |x, y| {
        amp * (-((x - 0.5f64).powi(2) + (y - 0.5f64).powi(2)) / 0.02).exp()
    })
}

pub fn max_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Row-major dense LU with partial pivoting, independent of the crate's solver.
pub fn dense_lu_solve(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut m: Vec<Vec<f64>> = (0..n).map(|r| a[r * n..(r + 1) * n].to_vec()).collect();
    let mut x = b.to_vec();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        m.swap(c, piv);
        x.swap(c, piv);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            x[r] -= f * x[c];
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (x[r] - s) / m[r][r];
    }
    x
}

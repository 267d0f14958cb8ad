#![allow(dead_code)]

use nullfem::constraints::{ConstraintSet, ConstraintSystem};
use nullfem::SparseMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn random_sparse(rng: &mut ChaCha8Rng, nrows: usize, ncols: usize, fill: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..nrows {
        for j in 0..ncols {
            if rng.gen_bool(fill) {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(nrows, ncols, &t).unwrap()
}

pub fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

pub fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, k) = (a.len(), b.len());
    let n = b.first().map_or(0, Vec::len);
    let mut c = vec![vec![0.0; n]; m];
    for i in 0..m {
        for l in 0..k {
            for j in 0..n {
                c[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    c
}

pub fn dense_transpose(a: &[Vec<f64>], ncols: usize) -> Vec<Vec<f64>> {
    (0..ncols)
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

/// Gaussian elimination with partial pivoting on a dense copy.
#[allow(clippy::needless_range_loop)]
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap())
            .unwrap();
        m.swap(k, p);
        x.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k][k];
    }
    x
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn dense_rel_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let fa: Vec<f64> = a.iter().flatten().copied().collect();
    let fb: Vec<f64> = b.iter().flatten().copied().collect();
    if max_abs(fb.iter().copied()) == 0.0 {
        return max_abs(fa);
    }
    rel_diff(&fa, &fb)
}

/// Mixed Dirichlet / tie / multipoint constraints over `n` dofs.
/// Returns `None` if a random draw collides with the declaration rules.
pub fn random_constraints(rng: &mut ChaCha8Rng, n: usize, count: usize) -> ConstraintSystem {
    let mut set = ConstraintSet::new(n);
    let mut tries = 0;
    while set.len() < count && tries < 10 * count {
        tries += 1;
        let kind = rng.gen_range(0..3);
        let res = match kind {
            0 => set
                .add_dirichlet(rng.gen_range(0..n), rng.gen_range(-2.0..2.0))
                .map(|_| ()),
            1 => {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                set.add_tie(a, b).map(|_| ())
            }
            _ => {
                let k = rng.gen_range(2..=4.min(n));
                let mut dofs: Vec<usize> = (0..n).collect();
                for i in 0..k {
                    let j = rng.gen_range(i..n);
                    dofs.swap(i, j);
                }
                let terms: Vec<_> = dofs[..k]
                    .iter()
                    .map(|&d| {
                        (
                            d,
                            rng.gen_range(0.2..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                        )
                    })
                    .collect();
                set.add_linear(&terms, rng.gen_range(-2.0..2.0)).map(|_| ())
            }
        };
        let _ = res;
    }
    set.assemble()
}

//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

/// Sparse matrix as unique `(row, col) -> value` entries with nonzero values.
#[derive(Debug, Clone)]
pub struct Triplets {
    pub n_rows: u64,
    pub n_cols: u64,
    pub entries: BTreeMap<(u64, u64), f32>,
}

impl Triplets {
    pub fn random<R: Rng>(rng: &mut R, max_rows: u64, max_cols: u64, max_density: f64) -> Self {
        let n_rows = rng.random_range(1..=max_rows);
        let n_cols = rng.random_range(1..=max_cols);
        let density = rng.random_range(0.0..=max_density);
        let target = ((n_rows * n_cols) as f64 * density).round() as usize;
        let mut entries = BTreeMap::new();
        while entries.len() < target {
            let r = rng.random_range(0..n_rows);
            let c = rng.random_range(0..n_cols);
            let v = match rng.random_range(0..3) {
                0 => rng.random_range(1..50) as f32,
                1 => -(rng.random_range(1..5) as f32),
                _ => rng.random_range(0.001f32..100.0),
            };
            entries.insert((r, c), v);
        }
        Self { n_rows, n_cols, entries }
    }

    pub fn dense_row(&self, r: u64) -> Vec<f32> {
        let mut row = vec![0.0; self.n_cols as usize];
        for (&(rr, c), &v) in self.entries.range((r, 0)..(r + 1, 0)) {
            debug_assert_eq!(rr, r);
            row[c as usize] = v;
        }
        row
    }

    /// Matrix Market text with entries in a shuffled order.
    pub fn to_mtx<R: Rng>(&self, rng: &mut R) -> String {
        use rand::seq::SliceRandom;
        let mut order: Vec<_> = self.entries.iter().collect();
        order.shuffle(rng);
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n% fixture\n");
        let _ = writeln!(out, "{} {} {}", self.n_rows, self.n_cols, order.len());
        for (&(r, c), &v) in order {
            // `{:?}` prints the shortest string that parses back to the same f32
            let _ = writeln!(out, "{} {} {:?}", r + 1, c + 1, v);
        }
        out
    }

    pub fn write_mtx<R: Rng>(&self, rng: &mut R, path: &Path) {
        std::fs::write(path, self.to_mtx(rng)).unwrap();
    }
}

pub fn densify(n_cols: u64, cols: &[u64], vals: &[f32]) -> Vec<f32> {
    let mut row = vec![0.0; n_cols as usize];
    for (&c, &v) in cols.iter().zip(vals) {
        row[c as usize] = v;
    }
    row
}

/// Brute-force rank encoding: score every expressed gene of a dense row,
/// stable-sort by descending score (genes enter in ascending order, so ties
/// keep ascending gene order), truncate, offset by 2.
pub fn brute_rank(dense: &[f32], medians: &[f32], max_len: usize) -> Vec<u32> {
    let mut scored: Vec<(u64, f64)> = Vec::new();
    for (g, &v) in dense.iter().enumerate() {
        if v != 0.0 {
            scored.push((g as u64, v as f64 / medians[g] as f64));
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    scored.truncate(max_len);
    scored.into_iter().map(|(g, _)| g as u32 + 2).collect()
}

/// Dense per-column median of nonzero values; 1.0 when none or not positive.
pub fn brute_medians(t: &Triplets) -> Vec<f32> {
    (0..t.n_cols)
        .map(|c| {
            let mut v: Vec<f64> = t.entries.iter().filter(|(&(_, cc), _)| cc == c).map(|(_, &x)| x as f64).collect();
            if v.is_empty() {
                return 1.0;
            }
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = v.len();
            let m = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
            if m > 0.0 && (m as f32) > 0.0 {
                m as f32
            } else {
                1.0
            }
        })
        .collect()
}

/// Least squares with an intercept column via the normal equations
/// `(X'X) b = X'y`, solved by Gauss-Jordan elimination with partial
/// pivoting. Returns `[intercept, w0, w1, ...]`.
pub fn normal_equations(xs: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let p = xs[0].len() + 1;
    let row = |x: &Vec<f64>| std::iter::once(1.0).chain(x.iter().copied()).collect::<Vec<f64>>();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (x, &y) in xs.iter().zip(ys) {
        let r = row(x);
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
            a[i][p] += r[i] * y;
        }
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        assert!(d.abs() > 1e-300, "singular normal equations");
        for k in col..=p {
            a[col][k] /= d;
        }
        for i in 0..p {
            if i != col {
                let f = a[i][col];
                for k in col..=p {
                    a[i][k] -= f * a[col][k];
                }
            }
        }
    }
    a.into_iter().map(|r| r[p]).collect()
}

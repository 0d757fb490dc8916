//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numeric kernels.

#![allow(dead_code)]

use foam::matrix::Matrix;
use foam::rng::SplitMix64;
use foam::tasks::TaskState;

/// Column ranges of the blocks of width `2^level` over `n` columns.
pub fn blocks(n: usize, level: u32) -> Vec<std::ops::Range<usize>> {
    let b = 1usize << level;
    (0..n).step_by(b).map(|s| s..(s + b).min(n)).collect()
}

/// Dense `n × k` fold matrix: column `j` averages block `j`.
pub fn dense_fold(n: usize, level: u32) -> Vec<Vec<f64>> {
    let bs = blocks(n, level);
    let mut a = vec![vec![0.0; bs.len()]; n];
    for (j, r) in bs.iter().enumerate() {
        for i in r.clone() {
            a[i][j] = 1.0 / r.len() as f64;
        }
    }
    a
}

/// Dense `k × n` unfold matrix: row `j` copies into block `j`.
pub fn dense_unfold(n: usize, level: u32) -> Vec<Vec<f64>> {
    let bs = blocks(n, level);
    let mut e = vec![vec![0.0; n]; bs.len()];
    for (j, r) in bs.iter().enumerate() {
        for i in r.clone() {
            e[j][i] = 1.0;
        }
    }
    e
}

/// Row-major matrix product of `rows × inner` data with a nested matrix.
pub fn matmul(data: &[f64], rows: usize, b: &[Vec<f64>]) -> Vec<f64> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for k in 0..inner {
            let a = data[i * inner + k];
            for j in 0..cols {
                out[i * cols + j] += a * b[k][j];
            }
        }
    }
    out
}

/// `P G`: each row replaced by its block means.
pub fn project(g: &Matrix, level: u32) -> Vec<f64> {
    let (rows, n) = g.shape();
    let mut out = vec![0.0; rows * n];
    for i in 0..rows {
        let row = g.row(i);
        for r in blocks(n, level) {
            let mean = row[r.clone()].iter().sum::<f64>() / r.len() as f64;
            for j in r {
                out[i * n + j] = mean;
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn gaussian(rng: &mut SplitMix64, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.next_normal()).collect()).unwrap()
}

/// Textbook Adam without bias correction.
#[derive(Clone, Debug)]
pub struct OracleAdam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OracleAdam {
    pub fn new(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        OracleAdam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        for i in 0..w.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            w[i] -= lr * self.m[i] / (self.v[i].sqrt() + self.eps);
        }
    }
}

/// Normwise relative error `‖a − b‖ / max(‖a‖, ‖b‖)`, zero if both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = sq_norm(a).sqrt().max(sq_norm(b).sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Largest per-parameter relative error between the analytic gradient and
/// central finite differences with step `h`, at `params` on `batch`.
pub fn gradient_check(task: &TaskState, params: &[Matrix], batch: &[usize], h: f64) -> f64 {
    let (_, analytic) = task.loss_and_grad_at(params, batch).unwrap();
    let mut worst = 0.0f64;
    for (p, g) in analytic.iter().enumerate() {
        let mut fd = vec![0.0; g.len()];
        for (k, slot) in fd.iter_mut().enumerate() {
            let eval = |delta: f64| {
                let mut shifted = params.to_vec();
                let (r, c) = shifted[p].shape();
                let mut data = shifted[p].as_slice().to_vec();
                data[k] += delta;
                shifted[p] = Matrix::new(r, c, data).unwrap();
                task.loss_and_grad_at(&shifted, batch).unwrap().0
            };
            *slot = (eval(h) - eval(-h)) / (2.0 * h);
        }
        worst = worst.max(rel_error(g.as_slice(), &fd));
    }
    worst
}

/// Task parameters moved to a random nearby point so every gradient entry is
/// exercised.
pub fn jittered_params(task: &TaskState, rng: &mut SplitMix64, scale: f64) -> Vec<Matrix> {
    task.params()
        .iter()
        .map(|p| {
            let (r, c) = p.value.shape();
            let data = p.value.as_slice().iter().map(|v| v + scale * rng.next_normal()).collect();
            Matrix::new(r, c, data).unwrap()
        })
        .collect()
}

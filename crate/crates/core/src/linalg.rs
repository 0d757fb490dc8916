//! Small dense symmetric eigen-solvers used by the projector checks.
//!
//! Sizes here never exceed 64×64, so a cyclic Jacobi sweep is plenty.

use crate::error::{FoamError, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(FoamError::Shape {
            op: "symmetric_eigenvalues",
            expected: (n, n),
            actual: a.shape(),
        });
    }
    let mut s: Vec<f64> = a.as_slice().to_vec();
    let idx = |i: usize, j: usize| i * n + j;

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[idx(i, j)] * s[idx(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = s[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = s[idx(p, p)];
                let aqq = s[idx(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = s[idx(k, p)];
                    let akq = s[idx(k, q)];
                    s[idx(k, p)] = c * akp - sn * akq;
                    s[idx(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = s[idx(p, k)];
                    let aqk = s[idx(q, k)];
                    s[idx(p, k)] = c * apk - sn * aqk;
                    s[idx(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| s[idx(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Largest |eigenvalue| of a square matrix by power iteration from a fixed
/// pseudo-random start. Returns 0 for the zero matrix.
pub fn spectral_radius(a: &Matrix, iterations: usize) -> Result<f64> {
    let n = a.rows();
    if a.cols() != n {
        return Err(FoamError::Shape {
            op: "spectral_radius",
            expected: (n, n),
            actual: a.shape(),
        });
    }
    let mut rng = SplitMix64::new(0x005e_ed0f_90e7);
    let mut x: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let y: Vec<f64> = (0..n)
            .map(|i| a.row(i).iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        estimate = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y;
    }
    Ok(estimate)
}

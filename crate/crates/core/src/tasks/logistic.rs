use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

use super::TaskParam;

/// Distance of each class mean from the origin along the planted direction.
pub(super) const CLASS_MARGIN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub(super) struct Data {
    features: usize,
    /// Row-major `N × d`.
    x: Vec<f64>,
    y: Vec<f64>,
}

/// Balanced labels `y_i = i mod 2`; `x_i = N(0, I) + (2 y_i - 1) * margin * u`
/// for a random unit vector `u`. Weights and bias start at zero.
pub(super) fn generate(d: usize, n: usize, rng: &mut SplitMix64) -> (Data, Vec<TaskParam>) {
    let mut u: Vec<f64> = (0..d).map(|_| rng.next_normal()).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        u.iter_mut().for_each(|v| *v /= norm);
    }
    let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let mut x = Vec::with_capacity(n * d);
    for &label in &y {
        let sign = 2.0 * label - 1.0;
        for &uj in &u {
            x.push(rng.next_normal() + sign * CLASS_MARGIN * uj);
        }
    }
    let params = vec![
        TaskParam::matrix("w", Matrix::zeros(1, d)),
        TaskParam::vector("b", Matrix::zeros(1, 1)),
    ];
    (Data { features: d, x, y }, params)
}

/// Numerically stable `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy `softplus(z) - y z` with `z = x·w + b`.
pub(super) fn loss_and_grad(data: &Data, params: &[Matrix], batch: &[usize]) -> Result<(f64, Vec<Matrix>)> {
    let d = data.features;
    let w = params[0].as_slice();
    let b = params[1].as_slice()[0];
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; d];
    let mut gb = 0.0;
    for &i in batch {
        let xi = &data.x[i * d..(i + 1) * d];
        let z = xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let yi = data.y[i];
        loss += softplus(z) - yi * z;
        let e = sigmoid(z) - yi;
        gw.iter_mut().zip(xi).for_each(|(g, x)| *g += e * x);
        gb += e;
    }
    gw.iter_mut().for_each(|g| *g *= inv_b);
    let grads = vec![
        Matrix::from_parts_checked(1, d, gw, "logistic weight gradient")?,
        Matrix::from_parts_checked(1, 1, vec![gb * inv_b], "logistic bias gradient")?,
    ];
    Ok((loss * inv_b, grads))
}

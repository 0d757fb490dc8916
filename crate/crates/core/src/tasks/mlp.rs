//! One-hidden-layer tanh network with softmax cross-entropy.
//!
//! ```text
//! H = tanh(X W1 + b1)      W1: d_in × d_hidden
//! Z = H W2 + b2            W2: d_hidden × d_out
//! L = mean_i [ -log softmax(Z_i)[y_i] ]
//! ```
//!
//! Backward pass, with `B` the batch size:
//!
//! ```text
//! dZ  = (softmax(Z) - onehot(y)) / B
//! gW2 = Hᵀ dZ            gb2 = Σ_i dZ_i
//! dA  = (dZ W2ᵀ) ⊙ (1 - H²)
//! gW1 = Xᵀ dA            gb1 = Σ_i dA_i
//! ```

use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

use super::TaskParam;

/// Scale of the blob centres. Small relative to the unit within-blob noise,
/// so classes overlap and the attainable loss stays well above zero.
pub(super) const CENTER_SCALE: f64 = 0.25;
const BLOBS_PER_CLASS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub(super) struct Data {
    d_in: usize,
    d_hidden: usize,
    d_out: usize,
    x: Vec<f64>,
    y: Vec<usize>,
}

pub(super) fn generate(
    d_in: usize,
    d_hidden: usize,
    d_out: usize,
    n: usize,
    rng: &mut SplitMix64,
) -> (Data, Vec<TaskParam>) {
    let centers: Vec<f64> = (0..d_out * BLOBS_PER_CLASS * d_in)
        .map(|_| CENTER_SCALE * rng.next_normal())
        .collect();
    let mut x = Vec::with_capacity(n * d_in);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % d_out;
        let blob = label * BLOBS_PER_CLASS + rng.next_index(BLOBS_PER_CLASS);
        let c = &centers[blob * d_in..(blob + 1) * d_in];
        x.extend(c.iter().map(|&cj| cj + rng.next_normal()));
        y.push(label);
    }

    let mut fan_in_uniform = |rows: usize, cols: usize| {
        let bound = 1.0 / (rows as f64).sqrt();
        let vals = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
        Matrix::from_parts(rows, cols, vals)
    };
    let w1 = fan_in_uniform(d_in, d_hidden);
    let w2 = fan_in_uniform(d_hidden, d_out);
    let params = vec![
        TaskParam::matrix("w1", w1),
        TaskParam::vector("b1", Matrix::zeros(1, d_hidden)),
        TaskParam::matrix("w2", w2),
        TaskParam::vector("b2", Matrix::zeros(1, d_out)),
    ];
    (
        Data {
            d_in,
            d_hidden,
            d_out,
            x,
            y,
        },
        params,
    )
}

pub(super) fn loss_and_grad(data: &Data, params: &[Matrix], batch: &[usize]) -> Result<(f64, Vec<Matrix>)> {
    let (d_in, h, o) = (data.d_in, data.d_hidden, data.d_out);
    let w1 = params[0].as_slice();
    let b1 = params[1].as_slice();
    let w2 = params[2].as_slice();
    let b2 = params[3].as_slice();
    let inv_b = 1.0 / batch.len() as f64;

    let mut gw1 = vec![0.0; d_in * h];
    let mut gb1 = vec![0.0; h];
    let mut gw2 = vec![0.0; h * o];
    let mut gb2 = vec![0.0; o];
    let mut hidden = vec![0.0; h];
    let mut logits = vec![0.0; o];
    let mut d_hidden = vec![0.0; h];
    let mut loss = 0.0;

    for &i in batch {
        let xi = &data.x[i * d_in..(i + 1) * d_in];
        hidden.copy_from_slice(b1);
        for (k, &xk) in xi.iter().enumerate() {
            let row = &w1[k * h..(k + 1) * h];
            hidden.iter_mut().zip(row).for_each(|(a, w)| *a += xk * w);
        }
        hidden.iter_mut().for_each(|a| *a = a.tanh());

        logits.copy_from_slice(b2);
        for (j, &hj) in hidden.iter().enumerate() {
            let row = &w2[j * o..(j + 1) * o];
            logits.iter_mut().zip(row).for_each(|(z, w)| *z += hj * w);
        }
        let zmax = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax + logits.iter().map(|z| (z - zmax).exp()).sum::<f64>().ln();
        let label = data.y[i];
        loss += lse - logits[label];

        // dZ for this example, already divided by the batch size.
        for (c, z) in logits.iter_mut().enumerate() {
            let p = (*z - lse).exp();
            *z = (p - if c == label { 1.0 } else { 0.0 }) * inv_b;
        }
        let dz = &logits;
        gb2.iter_mut().zip(dz).for_each(|(g, d)| *g += d);
        for (j, &hj) in hidden.iter().enumerate() {
            let grow = &mut gw2[j * o..(j + 1) * o];
            grow.iter_mut().zip(dz).for_each(|(g, d)| *g += hj * d);
            let wrow = &w2[j * o..(j + 1) * o];
            let back: f64 = wrow.iter().zip(dz).map(|(w, d)| w * d).sum();
            d_hidden[j] = back * (1.0 - hj * hj);
        }
        gb1.iter_mut().zip(&d_hidden).for_each(|(g, d)| *g += d);
        for (k, &xk) in xi.iter().enumerate() {
            let grow = &mut gw1[k * h..(k + 1) * h];
            grow.iter_mut().zip(&d_hidden).for_each(|(g, d)| *g += xk * d);
        }
    }

    let grads = vec![
        Matrix::from_parts_checked(d_in, h, gw1, "mlp w1 gradient")?,
        Matrix::from_parts_checked(1, h, gb1, "mlp b1 gradient")?,
        Matrix::from_parts_checked(h, o, gw2, "mlp w2 gradient")?,
        Matrix::from_parts_checked(1, o, gb2, "mlp b2 gradient")?,
    ];
    Ok((loss * inv_b, grads))
}

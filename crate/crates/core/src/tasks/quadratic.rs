use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

use super::TaskParam;

#[derive(Clone, Debug, PartialEq)]
pub(super) struct Data {
    pub(super) target: Matrix,
}

/// Target `W* ~ N(0, 1)` entrywise, start at `W = 0`.
pub(super) fn generate(rows: usize, cols: usize, rng: &mut SplitMix64) -> (Data, Vec<TaskParam>) {
    let target: Vec<f64> = (0..rows * cols).map(|_| rng.next_normal()).collect();
    let target = Matrix::from_parts(rows, cols, target);
    (Data { target }, vec![TaskParam::matrix("w", Matrix::zeros(rows, cols))])
}

pub(super) fn loss(data: &Data, params: &[Matrix]) -> f64 {
    0.5 * params[0]
        .as_slice()
        .iter()
        .zip(data.target.as_slice())
        .map(|(w, t)| (w - t) * (w - t))
        .sum::<f64>()
}

pub(super) fn loss_and_grad(data: &Data, params: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
    let grad = params[0].sub(&data.target)?;
    Ok((loss(data, params), vec![grad]))
}

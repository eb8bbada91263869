use ndarray::{Array2, ArrayView2};

use super::NeuralError;

/// Summed (not averaged) softmax cross-entropy over `idx`.
pub fn cross_entropy_loss(logits: ArrayView2<f64>, labels: &[usize], idx: &[usize]) -> Result<f64, NeuralError> {
    cross_entropy_with_grad(logits, labels, idx).map(|(l, _)| l)
}

/// Loss and `dL/dlogits` (zero outside `idx`).
pub fn cross_entropy_with_grad(
    logits: ArrayView2<f64>,
    labels: &[usize],
    idx: &[usize],
) -> Result<(f64, Array2<f64>), NeuralError> {
    if idx.is_empty() {
        return Err(NeuralError::EmptyTrainSet);
    }
    let classes = logits.ncols();
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for &i in idx {
        let y = labels[i];
        if y >= classes {
            return Err(NeuralError::Shape(format!("label {y} with only {classes} logits")));
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        total += log_z - row[y];
        let mut g = grad.row_mut(i);
        for (c, &v) in row.iter().enumerate() {
            g[c] += (v - log_z).exp();
        }
        g[y] -= 1.0;
    }
    Ok((total, grad))
}

/// Argmax with ties going to the lowest class index.
pub fn predict(logits: ArrayView2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction of `idx` whose argmax logit equals the label.
pub fn accuracy(logits: ArrayView2<f64>, labels: &[usize], idx: &[usize]) -> Result<f64, NeuralError> {
    if idx.is_empty() {
        return Err(NeuralError::EmptySplit);
    }
    let pred = predict(logits);
    let hits = idx.iter().filter(|&&i| pred[i] == labels[i]).count();
    Ok(hits as f64 / idx.len() as f64)
}

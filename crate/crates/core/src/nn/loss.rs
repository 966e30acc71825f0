use super::Scalar;
use crate::error::{Error, Result};

/// Mean squared error and its gradient `2 (pred − target) / N`.
pub fn mse_loss<F: Scalar>(prediction: &[F], target: &[F]) -> Result<(F, Vec<F>)> {
    if prediction.len() != target.len() || prediction.is_empty() {
        return Err(Error::shape(format!(
            "mse of {} predictions against {} targets",
            prediction.len(),
            target.len()
        )));
    }
    let n = F::from_f64(prediction.len() as f64);
    let two = F::from_f64(2.0);
    let mut loss = F::zero();
    let grad = prediction
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            loss = loss + d * d;
            two * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

pub fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Mean over rows of the cross-entropy between `softmax(logits row)` and the
/// target distribution row. Returns the loss, the row probabilities and the
/// gradient with respect to the logits.
pub fn softmax_cross_entropy<F: Scalar>(
    logits: &[F],
    targets: &[F],
    width: usize,
) -> Result<(F, Vec<F>, Vec<F>)> {
    if width == 0 || logits.len() != targets.len() || logits.len() % width != 0 || logits.is_empty() {
        return Err(Error::shape(format!(
            "cross-entropy of {} logits and {} targets in rows of {width}",
            logits.len(),
            targets.len()
        )));
    }
    let rows = logits.len() / width;
    let inv_rows = F::one() / F::from_f64(rows as f64);
    let mut probs = softmax_rows(logits, width);
    let mut loss = F::zero();
    let tiny = F::from_f64(1e-30);
    for (p, t) in probs.iter().zip(targets) {
        if *t > F::zero() {
            loss = loss - *t * (*p).max(tiny).ln();
        }
    }
    let grad = probs.iter().zip(targets).map(|(p, t)| (*p - *t) * inv_rows).collect();
    probs.shrink_to_fit();
    Ok((loss * inv_rows, probs, grad))
}

/// Numerically stable softmax applied to each row of `width` values.
pub fn softmax_rows<F: Scalar>(logits: &[F], width: usize) -> Vec<F> {
    let mut out = logits.to_vec();
    for row in out.chunks_exact_mut(width) {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum = sum + *x;
        }
        for x in row.iter_mut() {
            *x = *x / sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_cases() {
        let (l, g) = mse_loss(&[1.0f64, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
        let (l, g) = mse_loss(&[1.0f64, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![1.0, 0.0]);
        assert!(mse_loss(&[1.0f64], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let pred = [0.3f64, -1.2, 2.5, 0.0];
        let target = [1.0f64, 0.5, -0.5, 0.25];
        let (_, g) = mse_loss(&pred, &target).unwrap();
        let h = 1e-6;
        for i in 0..pred.len() {
            let (mut up, mut down) = (pred, pred);
            up[i] += h;
            down[i] -= h;
            let fd = (mse_loss(&up, &target).unwrap().0 - mse_loss(&down, &target).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let logits = [0.2f64, -0.4, 1.1, 0.0, 0.3, -2.0];
        let targets = [0.0f64, 1.0, 0.0, 0.2, 0.3, 0.5];
        let (_, probs, g) = softmax_cross_entropy(&logits, &targets, 3).unwrap();
        for row in probs.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let h = 1e-6;
        for i in 0..logits.len() {
            let (mut up, mut down) = (logits, logits);
            up[i] += h;
            down[i] -= h;
            let fd = (softmax_cross_entropy(&up, &targets, 3).unwrap().0
                - softmax_cross_entropy(&down, &targets, 3).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }
}

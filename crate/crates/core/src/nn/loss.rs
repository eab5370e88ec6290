use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Mean squared error averaged over samples and summed over output dimensions,
/// with its gradient with respect to `pred`.
///
/// For `n` rows, `loss = (1/n) * sum_i ||pred_i - target_i||^2` and
/// `grad = 2 (pred - target) / n`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction is {:?}, target is {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.rows();
    if n == 0 {
        return Ok((0.0, Matrix::zeros(0, pred.cols())));
    }
    let scale = 2.0 / n as f64;
    let mut grad = Matrix::zeros(n, pred.cols());
    let mut sum = 0.0;
    for ((g, &p), &t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let d = p - t;
        sum += d * d;
        *g = scale * d;
    }
    Ok((sum / n as f64, grad))
}

/// Loss value only.
pub fn mse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    mse_loss(pred, target).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs_give_zero() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let (l, g) = mse_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_sample_one_dim() {
        let (l, g) = mse_loss(&Matrix::column(&[2.0]), &Matrix::column(&[0.0])).unwrap();
        assert_eq!(l, 4.0);
        assert_eq!(g.as_slice(), &[4.0]);
    }

    #[test]
    fn two_samples() {
        let (l, _) = mse_loss(&Matrix::column(&[1.0, 3.0]), &Matrix::column(&[3.0, 1.0])).unwrap();
        assert_eq!(l, 4.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(mse_loss(&Matrix::zeros(2, 1), &Matrix::zeros(1, 2)).is_err());
    }
}

use crate::error::{Error, Result};

/// Mean squared error and its gradient `2 (pred - target) / n`.
pub fn mse_loss(prediction: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if prediction.len() != target.len() {
        return Err(Error::shape(
            format!("[{}]", target.len()),
            format!("[{}]", prediction.len()),
        ));
    }
    let n = prediction.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = prediction
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs_give_zero() {
        let (l, g) = mse_loss(&[0.3, -2.0], &[0.3, -2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_arithmetic() {
        let (l, g) = mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![1.0, 0.0]);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            mse_loss(&[1.0], &[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pred = [0.7, -1.3, 2.2, 0.05];
        let target = [0.1, 0.4, -0.9, 0.05];
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        let eps = 1e-6;
        for i in 0..pred.len() {
            let mut hi = pred;
            let mut lo = pred;
            hi[i] += eps;
            lo[i] -= eps;
            let fd = (mse_loss(&hi, &target).unwrap().0 - mse_loss(&lo, &target).unwrap().0)
                / (2.0 * eps);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-12);
            assert!(
                rel < 1e-6 || (fd - grad[i]).abs() < 1e-12,
                "component {i}: {fd} vs {}",
                grad[i]
            );
        }
    }
}

use super::{DenseMatrix, NodeId, Tape, TensorError};

/// Compares the tape gradient of a scalar function of one matrix leaf
/// against central differences.
///
/// Returns the maximum over coordinates of
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(f: F, point: &DenseMatrix, step: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId, TensorError>,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let eval = |p: &DenseMatrix| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let x = tape.leaf(p.clone());
        let out = f(&mut tape, x)?;
        let v = tape.value(out);
        if v.shape() != (1, 1) {
            return Err(TensorError::NonScalarLoss(v.shape()));
        }
        Ok(v.get(0, 0))
    };

    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let out = f(&mut tape, x)?;
    let analytic = tape.backward(out)?.get_or_zeros(x, point.shape());

    let mut worst: f64 = 0.0;
    let mut probe = point.clone();
    for i in 0..point.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + step;
        let plus = eval(&probe)?;
        probe.as_mut_slice()[i] = orig - step;
        let minus = eval(&probe)?;
        probe.as_mut_slice()[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic.as_slice()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let err = grad_check(
            |t, x| {
                let y = t.mul(x, x)?;
                t.sum(y)
            },
            &DenseMatrix::scalar(3.0),
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn non_scalar_function_rejected() {
        let res = grad_check(|t, x| t.exp(x), &DenseMatrix::row_vector(&[1.0, 2.0]), 1e-5);
        assert!(matches!(res, Err(TensorError::NonScalarLoss(_))));
    }
}

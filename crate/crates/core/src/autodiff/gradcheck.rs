use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares the tape gradient of a scalar function against central differences.
///
/// Returns `max_i |analytic_i − numeric_i| / max(|analytic_i|, 1e-8)`.
pub fn finite_difference_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidArgument(format!("step {h} outside [1e-7, 1e-3]")));
    }
    let mut tape = Tape::new();
    let xv = tape.leaf(&x.clone().with_grad());
    let out = f(&mut tape, xv)?;
    let grads = tape.backward(out)?;
    let analytic = grads.get(xv).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; x.numel()]);

    let eval = |data: Vec<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.leaf(&Tensor::new(x.shape().to_vec(), data)?);
        let out = f(&mut tape, v)?;
        Ok(tape.scalar(out))
    };
    let mut worst = 0.0f64;
    for i in 0..x.numel() {
        let mut plus = x.data().to_vec();
        let mut minus = x.data().to_vec();
        plus[i] += h;
        minus[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let x = Tensor::new(vec![2, 3], vec![0.1, -0.2, 0.3, 0.05, 0.0, -0.4]).unwrap();
        let err = finite_difference_check(|t, v| Ok(t.sum(v)), &x, 1e-5).unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn step_outside_range_rejected() {
        let x = Tensor::scalar(1.0);
        assert!(finite_difference_check(|t, v| Ok(t.sum(v)), &x, 1e-2).is_err());
    }
}

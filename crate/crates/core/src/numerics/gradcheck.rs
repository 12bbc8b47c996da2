use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Gradient magnitudes below this are compared on an absolute scale, so that
/// finite-difference round-off on near-zero gradients does not dominate.
pub const MAGNITUDE_FLOOR: f64 = 1e-4;

/// Worst relative error between tape gradients and central finite
/// differences of `f` over every element of every input.
///
/// `f` is evaluated on a fresh tape each time and must return a scalar.
pub fn grad_check<F>(f: F, inputs: &[Tensor]) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let analytic: Vec<Vec<f64>> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.var(t.clone())).collect();
        let out = f(&tape, &vars)?;
        let grads = tape.backward(out)?;
        vars.iter()
            .map(|v| grads.get(*v).map(<[f64]>::to_vec))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Degenerate("input without gradient".into()))?
    };

    let eval = |probe: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = probe.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(f(&tape, &vars)?.item())
    };

    let mut probe = inputs.to_vec();
    let mut worst = 0.0f64;
    for (i, grad) in analytic.iter().enumerate() {
        for (j, &g) in grad.iter().enumerate() {
            let orig = probe[i].data()[j];
            probe[i].data_mut()[j] = orig + FD_STEP;
            let plus = eval(&probe)?;
            probe[i].data_mut()[j] = orig - FD_STEP;
            let minus = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(g, numeric));
        }
    }
    Ok(worst)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(MAGNITUDE_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_exact() {
        let x = Tensor::new(&[2, 3], vec![0.3, -1.2, 2.5, 0.7, 1.1, -0.4]).unwrap();
        let err = grad_check(|_, v| v[0].sum(), &[x]).unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn relative_error_scale() {
        assert_eq!(relative_error(1.0, 2.0), 0.5);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(0.0, 1e-8) - 1e-4).abs() < 1e-18);
    }
}

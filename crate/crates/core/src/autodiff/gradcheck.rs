//! Central finite-difference gradient checking.

use super::{Result, Tape, Var};
use crate::matrix::Matrix;

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub checked: usize,
}

/// Denominator floor for the relative error, so entries whose true
/// derivative is ~0 are judged by absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-5;

/// Compares `∂f/∂inputs` from [`Tape::backward`] with central differences
/// of step `h`. `f` must build a scalar from the given leaves and must be
/// deterministic.
pub fn check_gradients<F>(inputs: &[Matrix], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Matrix> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, m)| tape.grad(v).cloned().unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())))
        .collect();

    let eval = |perturbed: &[Matrix]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|m| t.constant(m.clone())).collect();
        let o = f(&mut t, &vs)?;
        Ok(t.value(o).get(0, 0))
    };

    let mut report = GradCheck { max_relative_error: 0.0, max_absolute_error: 0.0, checked: 0 };
    let mut work: Vec<Matrix> = inputs.to_vec();
    for (k, m) in inputs.iter().enumerate() {
        for idx in 0..m.len() {
            let orig = m.as_slice()[idx];
            work[k].as_mut_slice()[idx] = orig + h;
            let plus = eval(&work)?;
            work[k].as_mut_slice()[idx] = orig - h;
            let minus = eval(&work)?;
            work[k].as_mut_slice()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[k].as_slice()[idx];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            report.max_absolute_error = report.max_absolute_error.max(abs);
            report.max_relative_error = report.max_relative_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}

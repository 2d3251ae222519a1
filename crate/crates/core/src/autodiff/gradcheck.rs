use super::{ParamSet, ParamVars, Tape, Var};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Central differences in f64 with `eps = 1e-5` only resolve gradients to
/// about 1e-11, so components below this are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// `|a − n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat parameter index where the maximum occurred.
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
}

/// Compares reverse-mode gradients with central differences for every scalar
/// of `params`.
///
/// `f` records the computation on a fresh tape and returns the scalar loss.
/// It is called once for the analytic pass and twice per parameter.
pub fn grad_check<F>(f: F, params: &ParamSet, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamVars) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mut work = params.clone();
    work.unfreeze();

    let mut tape = Tape::new();
    let vars = tape.params(&work);
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?.for_params(&tape, &vars);
    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.data().iter().copied()).collect();

    let eval = |set: &ParamSet| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.params(set);
        let l = f(&mut t, &v)?;
        t.value(l).item()
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic_at_worst: analytic.first().copied().unwrap_or(0.0),
        numeric_at_worst: 0.0,
        checked: analytic.len(),
    };
    for (k, &a) in analytic.iter().enumerate() {
        let (ti, off) = work.locate(k).expect("flat index in range");
        let orig = work.tensors()[ti].data()[off];
        work.tensors_mut()[ti].data_mut()[off] = orig + eps;
        let up = eval(&work)?;
        work.tensors_mut()[ti].data_mut()[off] = orig - eps;
        let down = eval(&work)?;
        work.tensors_mut()[ti].data_mut()[off] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = relative_error(a, numeric);
        if err > report.max_rel_error || k == 0 {
            report.max_rel_error = err.max(report.max_rel_error);
            report.worst_index = k;
            report.analytic_at_worst = a;
            report.numeric_at_worst = numeric;
        }
    }
    Ok(report)
}

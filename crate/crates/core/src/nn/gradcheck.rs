use super::params::ParamSet;
use super::tape::{GradTape, Var};
use crate::error::{Result, VenomError};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

fn evaluate<F>(f: &F, params: &ParamSet) -> Result<f64>
where
    F: Fn(&mut GradTape) -> Result<Var>,
{
    let mut tape = GradTape::new(params);
    let loss = f(&mut tape)?;
    let v = tape.value(loss);
    if v.len() != 1 {
        return Err(VenomError::Contract("gradient check needs a scalar function".into()));
    }
    let v = v.item();
    if !v.is_finite() {
        return Err(VenomError::NonFinite("gradient check objective".into()));
    }
    Ok(v)
}

/// Compare tape gradients with central differences of step `step`.
///
/// The error per scalar is `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`;
/// the report carries the maximum over every scalar of every parameter.
pub fn gradient_check<F>(f: F, params: &ParamSet, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut GradTape) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(VenomError::Contract("finite-difference step must be positive".into()));
    }
    let analytic = {
        let mut tape = GradTape::new(params);
        let loss = f(&mut tape)?;
        if !tape.value(loss).item().is_finite() {
            return Err(VenomError::NonFinite("gradient check objective".into()));
        }
        tape.backward(loss)?;
        tape.gradients()
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
    };
    for pi in 0..params.len() {
        let (name, tensor) = params.by_index(pi);
        let grad = analytic.get(name).expect("gradient for every parameter");
        for j in 0..tensor.len() {
            let orig = tensor.data()[j];
            probe.by_index_mut(pi).data_mut()[j] = orig + step;
            let up = evaluate(&f, &probe)?;
            probe.by_index_mut(pi).data_mut()[j] = orig - step;
            let down = evaluate(&f, &probe)?;
            probe.by_index_mut(pi).data_mut()[j] = orig;

            let numeric = (up - down) / (2.0 * step);
            let a = grad.data()[j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = name.to_string();
                report.worst_index = j;
            }
        }
    }
    Ok(report)
}

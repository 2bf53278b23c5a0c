use super::net::{forward, Op, loss_and_grad, masked_loss, ops, zero_grads, LayerRef, Map, ModelParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-3;
/// Gradients below this magnitude compare absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Largest analytic gradient on head rows of non-executed bins.
    pub masked_analytic_max: f64,
    /// Largest finite-difference gradient on those rows.
    pub masked_numeric_max: f64,
}

fn loss_at(ops: &[Op], w: &[(Vec<f64>, Vec<f64>)], input: &Map<f64>, label: bool, bin: usize) -> Result<f64> {
    let refs: Vec<LayerRef<'_, f64>> = w.iter().map(|(a, b)| (&a[..], &b[..])).collect();
    let (logits, _) = forward(ops, &refs, input.clone(), false)?;
    Ok(masked_loss(&logits.data, label, bin)?.0)
}

fn param_mut(w: &mut [(Vec<f64>, Vec<f64>)], layer: usize, which: usize, i: usize) -> &mut f64 {
    if which == 0 {
        &mut w[layer].0[i]
    } else {
        &mut w[layer].1[i]
    }
}

/// Compares backprop gradients with central differences in double precision.
///
/// Every parameter is checked; meant for the few-channel spec.
pub fn gradient_check(params: &ModelParams, patch: &Tensor, label: bool, executed_bin: usize, eps: f64) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let spec = params.spec();
    let op_list = ops(spec);
    let input = Map::<f64>::from_hwc(patch)?;
    let mut w = params.to_scalar::<f64>();
    let mut grads = zero_grads::<f64>(spec);
    {
        let refs: Vec<LayerRef<'_, f64>> = w.iter().map(|(a, b)| (&a[..], &b[..])).collect();
        loss_and_grad(&op_list, &refs, input.clone(), label, executed_bin, &mut grads)?;
    }
    let last = w.len() - 1;
    let n_bins = spec.n_bins();
    let fan_in = w[last].0.len() / n_bins;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        masked_analytic_max: 0.0,
        masked_numeric_max: 0.0,
    };
    for layer in 0..w.len() {
        for which in 0..2 {
            let len = if which == 0 { w[layer].0.len() } else { w[layer].1.len() };
            for i in 0..len {
                let orig = *param_mut(&mut w, layer, which, i);
                *param_mut(&mut w, layer, which, i) = orig + eps;
                let up = loss_at(&op_list, &w, &input, label, executed_bin)?;
                *param_mut(&mut w, layer, which, i) = orig - eps;
                let down = loss_at(&op_list, &w, &input, label, executed_bin)?;
                *param_mut(&mut w, layer, which, i) = orig;
                let numeric = (up - down) / (2.0 * eps);
                let analytic = if which == 0 { grads[layer].0[i] } else { grads[layer].1[i] };
                let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
                report.max_rel_error = report.max_rel_error.max((analytic - numeric).abs() / denom);
                report.checked += 1;
                let row = if which == 0 { i / fan_in } else { i };
                if layer == last && row != executed_bin {
                    report.masked_analytic_max = report.masked_analytic_max.max(analytic.abs());
                    report.masked_numeric_max = report.masked_numeric_max.max(numeric.abs());
                }
            }
        }
    }
    Ok(report)
}

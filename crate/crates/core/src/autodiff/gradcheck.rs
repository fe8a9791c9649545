use super::tape::{forward_backward, forward_loss};
use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::optim::{LossSpec, Target};

/// Outcome of comparing the analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// Worst relative error over parameters where the loss is smooth.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    /// Worst relative error including kink-pinned parameters.
    pub max_rel_error_all: f64,
    /// Parameters whose one-sided differences disagree and whose central
    /// difference fails: the loss has a kink there (e.g. a ModReLU unit
    /// sitting at `r + b = 0`). Reported, not counted.
    pub excluded: Vec<usize>,
    /// Parameters whose discrepancy lies below the round-off floor of the
    /// central difference, `4 eps max|L(theta +- h)| / h`; this happens for
    /// gradients too small to resolve at the given step. Reported, not counted.
    pub roundoff_limited: Vec<usize>,
    pub checked: usize,
}

impl FdReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

// Relative error tolerance above which a parameter is inspected for a kink.
const KINK_SUSPECT: f64 = 1e-6;
// Only errors above this are attributed to round-off.
const ROUNDOFF_SUSPECT: f64 = 1e-5;
const ROUNDOFF_FACTOR: f64 = 4.0;

/// Checks every parameter with central differences of step `step`. Relative
/// errors use the denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check(
    model: &Model,
    input: &Contour,
    extra: &[f64],
    loss: &LossSpec,
    target: &Target<'_>,
    step: f64,
) -> Result<FdReport> {
    let all: Vec<usize> = (0..model.num_params()).collect();
    finite_difference_check_subset(model, input, extra, loss, target, step, &all)
}

pub fn finite_difference_check_subset(
    model: &Model,
    input: &Contour,
    extra: &[f64],
    loss: &LossSpec,
    target: &Target<'_>,
    step: f64,
    indices: &[usize],
) -> Result<FdReport> {
    if !(step > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    let (l0, grad) = forward_backward(model, input, extra, loss, target)?;
    let mut probe = model.clone();
    let mut report = FdReport {
        max_rel_error: 0.0,
        worst_index: None,
        max_rel_error_all: 0.0,
        excluded: Vec::new(),
        roundoff_limited: Vec::new(),
        checked: indices.len(),
    };
    for &i in indices {
        let theta = model.params().values()[i];
        probe.params_mut().values_mut()[i] = theta + step;
        let up = forward_loss(&probe, input, extra, loss, target)?;
        probe.params_mut().values_mut()[i] = theta - step;
        let down = forward_loss(&probe, input, extra, loss, target)?;
        probe.params_mut().values_mut()[i] = theta;

        let numeric = (up - down) / (2.0 * step);
        let analytic = grad[i];
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / denom;
        report.max_rel_error_all = report.max_rel_error_all.max(rel);

        if rel > KINK_SUSPECT {
            let forward = (up - l0) / step;
            let backward = (l0 - down) / step;
            let scale = forward.abs().max(backward.abs());
            if (forward - backward).abs() > 1e-4 * scale + 1e-8 {
                report.excluded.push(i);
                continue;
            }
            if rel > ROUNDOFF_SUSPECT
                && (analytic - numeric).abs() <= ROUNDOFF_FACTOR * f64::EPSILON * up.abs().max(down.abs()) / step {
                report.roundoff_limited.push(i);
                continue;
            }
        }
        if report.worst_index.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = Some(i);
        }
    }
    Ok(report)
}

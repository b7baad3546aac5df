use ndarray::Array2;

use super::graph::{Graph, NodeId};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// max over coordinates of |a − n| / max(|a|, |n|, 1e-8)
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Checks the reverse-mode gradient of a scalar graph built by `build`
/// from a single `[1, n]` input leaf against central differences.
pub fn grad_check<F>(build: F, point: &[f64], step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    if point.is_empty() {
        return Err(Error::Empty("grad_check"));
    }
    let eval = |x: &[f64]| -> Result<(Graph, NodeId, NodeId)> {
        let mut g = Graph::new();
        let input = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .map_err(|e| Error::shape("grad_check", e.to_string()))?;
        let leaf = g.param("x", &input)?;
        let out = build(&mut g, leaf)?;
        Ok((g, leaf, out))
    };

    let (g, leaf, out) = eval(point)?;
    let grads = g.backward(out)?;
    let analytic: Vec<f64> = grads.get_or_zeros(&g, leaf).iter().copied().collect();

    grad_check_with(
        &analytic,
        |x| {
            let (g, _, out) = eval(x)?;
            Ok(g.scalar(out))
        },
        point,
        None,
        step,
        tolerance,
    )
}

/// Compares a precomputed `analytic` gradient against central differences
/// of `value` at `point`. `coordinates` restricts the check to a subset.
pub fn grad_check_with<V>(
    analytic: &[f64],
    mut value: V,
    point: &[f64],
    coordinates: Option<&[usize]>,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    V: FnMut(&[f64]) -> Result<f64>,
{
    if analytic.len() != point.len() {
        return Err(Error::shape(
            "grad_check",
            format!("{} gradient entries for {} coordinates", analytic.len(), point.len()),
        ));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let all: Vec<usize>;
    let coords = match coordinates {
        Some(c) => c,
        None => {
            all = (0..point.len()).collect();
            &all
        }
    };

    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_coordinate: 0,
        checked: 0,
        tolerance,
    };
    for &k in coords {
        let orig = x[k];
        x[k] = orig + step;
        let plus = value(&x)?;
        x[k] = orig - step;
        let minus = value(&x)?;
        x[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "function value at perturbed coordinate {k}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[k], numeric);
        if err > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = err;
            report.worst_coordinate = k;
        }
        report.checked += 1;
    }
    Ok(report)
}

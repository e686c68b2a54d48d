use alloc::vec::Vec;

use rand::Rng;

use super::{Graph, ParamId, ParamStore, Scalar, Var};
use crate::error::{Error, Result};
use crate::rng;

/// Which parameter coordinates to perturb.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordinateSelection {
    All,
    /// Up to `per_param` random coordinates of every parameter tensor.
    Sample {
        per_param: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `maxᵢ |g_analytic − g_fd| / max(|g_fd|, 1e-6)` over all checked coordinates.
    pub max_relative_error: f64,
    /// Per parameter: name, coordinates checked and worst relative error.
    pub per_param: Vec<(alloc::string::String, usize, f64)>,
}

/// Compares backward-pass gradients against central differences with step `eps`.
///
/// `f` must build the same scalar from the same parameters on every call;
/// two forward passes that disagree yield `NonDeterministicGraph`.
pub fn grad_check<T, F>(
    params: &mut ParamStore<T>,
    f: F,
    eps: f64,
    selection: CoordinateSelection,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: for<'g> Fn(&mut Graph<'g, T>) -> Result<Var>,
{
    let eval = |p: &ParamStore<T>| -> Result<f64> {
        let mut g = Graph::new(p);
        let out = f(&mut g)?;
        Ok(g.scalar_value(out))
    };
    let first = eval(params)?;
    let second = eval(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministicGraph { max_abs_diff: (first - second).abs() });
    }
    let analytic = {
        let mut g = Graph::new(&*params);
        let out = f(&mut g)?;
        g.backward(out)?
    };

    let mut picker = match selection {
        CoordinateSelection::Sample { seed, .. } => Some(rng::seeded(seed)),
        CoordinateSelection::All => None,
    };
    let ids: Vec<ParamId> = params.ids().collect();
    let mut report = GradCheckReport { max_relative_error: 0.0, per_param: Vec::new() };
    for id in ids {
        let numel = params.value(id).numel();
        let coords: Vec<usize> = match (selection, picker.as_mut()) {
            (CoordinateSelection::Sample { per_param, .. }, Some(r)) if per_param < numel => {
                (0..per_param).map(|_| r.random_range(0..numel)).collect()
            }
            _ => (0..numel).collect(),
        };
        let ga = analytic.get(id);
        let mut worst = 0.0f64;
        for &k in &coords {
            let orig = params.value(id).data()[k];
            let (hi, lo) = (T::lit(orig.as_f64() + eps), T::lit(orig.as_f64() - eps));
            params.value_mut(id).data_mut()[k] = hi;
            let plus = eval(params)?;
            params.value_mut(id).data_mut()[k] = lo;
            let minus = eval(params)?;
            params.value_mut(id).data_mut()[k] = orig;
            // Divide by the step actually taken after rounding to `T`.
            let fd = (plus - minus) / (hi.as_f64() - lo.as_f64());
            let an = ga.map_or(0.0, |g| g[k].as_f64());
            let rel = (an - fd).abs() / fd.abs().max(1e-6);
            worst = worst.max(rel);
        }
        report.max_relative_error = report.max_relative_error.max(worst);
        report.per_param.push((params.name(id).into(), coords.len(), worst));
    }
    Ok(report)
}

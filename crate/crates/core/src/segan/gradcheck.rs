//! Central finite-difference verification of tape gradients.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Tape, Var};
use super::{SeganError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_abs_err: f64,
    /// Largest `|analytic - numeric| / max(1e-4, 1e-3 * max(|analytic|, |numeric|))`;
    /// a value above 1 is a failure.
    pub worst_ratio: f64,
    pub failures: Vec<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compare the tape gradient of the scalar built by `build` against central
/// differences with step `h` on up to `samples` randomly chosen parameter
/// coordinates. `build` must record every entry of `params` with
/// `tape.param(name, tensor, true)`.
pub fn check_gradients<F>(
    params: &BTreeMap<String, Tensor>,
    build: F,
    samples: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport, SeganError>
where
    F: Fn(&mut Tape, &BTreeMap<String, Tensor>) -> Result<Var, SeganError>,
{
    let eval = |p: &BTreeMap<String, Tensor>| -> Result<f64, SeganError> {
        let mut tape = Tape::new();
        let out = build(&mut tape, p)?;
        Ok(tape.value(out).data()[0])
    };
    let mut tape = Tape::new();
    let out = build(&mut tape, params)?;
    let grads = tape.backward(out)?;

    let coords: Vec<(&String, usize)> = params
        .iter()
        .flat_map(|(name, t)| (0..t.len()).map(move |i| (name, i)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, coords.len(), samples.min(coords.len()));

    let mut report = GradCheckReport {
        checked: 0,
        max_abs_err: 0.0,
        worst_ratio: 0.0,
        failures: Vec::new(),
    };
    let mut probe = params.clone();
    for pick in picks.into_vec() {
        let (name, i) = coords[pick];
        let analytic = grads
            .params
            .get(name)
            .map(|g| g.data()[i])
            .ok_or_else(|| SeganError::GraphError(format!("no gradient for {name}")))?;
        let base = params[name].data()[i];
        probe.get_mut(name).unwrap().data_mut()[i] = base + h;
        let up = eval(&probe)?;
        probe.get_mut(name).unwrap().data_mut()[i] = base - h;
        let down = eval(&probe)?;
        probe.get_mut(name).unwrap().data_mut()[i] = base;
        let numeric = (up - down) / (2.0 * h);

        let err = (analytic - numeric).abs();
        let tol = 1e-4f64.max(1e-3 * analytic.abs().max(numeric.abs()));
        report.checked += 1;
        report.max_abs_err = report.max_abs_err.max(err);
        report.worst_ratio = report.worst_ratio.max(err / tol);
        if err > tol {
            report
                .failures
                .push(format!("{name}[{i}]: analytic {analytic:e}, numeric {numeric:e}"));
        }
    }
    Ok(report)
}

//! Central-difference verification of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamStore, Tape, Tensor, Var};
use crate::error::Result;

/// Denominator floor for the relative error.
pub const REL_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Coordinates to probe; all of them when the model is smaller.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            samples: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric derivative at the worst coordinate.
    pub worst_values: Option<(f64, f64)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the tape gradient of `loss` against central differences on a
/// random sample of parameter coordinates. `loss` must be deterministic.
pub fn finite_difference_check<F>(
    store: &mut ParamStore<f64>,
    mut loss: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = loss(&mut tape, store)?;
    let grads = tape.backward(out)?;
    let mut analytic = ParamStore::new();
    for p in store.iter() {
        analytic.add(p.name.clone(), Tensor::zeros(p.value.shape().to_vec()));
    }
    grads.accumulate_into(&mut analytic);

    let mut coords = Vec::new();
    for (pi, p) in store.iter().enumerate() {
        coords.extend((0..p.value.numel()).map(|i| (pi, i)));
    }
    let chosen: Vec<(usize, usize)> = if coords.len() <= cfg.samples {
        coords
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut idx = sample(&mut rng, coords.len(), cfg.samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| coords[i]).collect()
    };

    let ids: Vec<_> = store.ids().collect();
    let mut eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let out = loss(&mut tape, store)?;
        Ok(tape.value(out).item())
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coordinates: chosen.len(),
        worst: None,
        worst_values: None,
    };
    for (pi, i) in chosen {
        let id = ids[pi];
        let orig = store.value(id).data()[i];
        store.get_mut(id).value.data_mut()[i] = orig + cfg.eps;
        let plus = eval(store)?;
        store.get_mut(id).value.data_mut()[i] = orig - cfg.eps;
        let minus = eval(store)?;
        store.get_mut(id).value.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * cfg.eps);
        let a = analytic.get(id).grad.data()[i];
        let err = relative_error(a, numeric);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((store.get(id).name.clone(), i));
            report.worst_values = Some((a, numeric));
        }
    }
    Ok(report)
}

/// Checks a single operation: every input becomes a parameter and the
/// output is reduced against fixed random weights so that all output
/// coordinates contribute.
pub fn op_gradient_check<F>(inputs: &[Tensor<f64>], op: F, seed: u64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    use rand::Rng;
    let mut store = ParamStore::new();
    for (i, t) in inputs.iter().enumerate() {
        store.add(format!("in{i}"), t.clone());
    }
    let ids: Vec<_> = store.ids().collect();
    // the output shape is only known after one forward pass
    let probe = {
        let mut tape = Tape::new();
        let vars = ids
            .iter()
            .map(|&id| tape.param(&store, id))
            .collect::<Result<Vec<_>>>()?;
        let out = op(&mut tape, &vars)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..tape.value(out).numel())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Tensor::new(tape.shape(out).to_vec(), w)?
    };
    let cfg = GradCheckConfig {
        samples: usize::MAX,
        ..GradCheckConfig::default()
    };
    let report = finite_difference_check(
        &mut store,
        |tape, store| {
            let vars = ids
                .iter()
                .map(|&id| tape.param(store, id))
                .collect::<Result<Vec<_>>>()?;
            let out = op(tape, &vars)?;
            let w = tape.constant(probe.clone())?;
            let prod = tape.mul(out, w)?;
            tape.sum(prod)
        },
        &cfg,
    )?;
    Ok(report.max_rel_error)
}

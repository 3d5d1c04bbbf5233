//! Central finite-difference verification of tape gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::params::ParamStore;
use super::tape::{Tape, Var};

#[derive(Debug, Error, PartialEq)]
pub enum GradCheckError {
    #[error("loss is not finite: {0}")]
    NonFinite(f64),
    #[error("epsilon {0} outside [1e-6, 1e-3]")]
    BadEpsilon(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub coordinates: usize,
    /// Name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// Errors are `|a - n| / max(|a|, |n|, floor)`; the floor keeps coordinates
/// whose true gradient is zero from dividing roundoff by zero.
const DENOM_FLOOR: f64 = 1e-6;

/// Compares analytic gradients of `loss` against central differences on at
/// least `min_coords` sampled coordinates (every coordinate if fewer exist),
/// always including one coordinate from each tensor.
pub fn grad_check<F>(
    store: &ParamStore,
    loss: F,
    epsilon: f64,
    min_coords: usize,
    seed: u64,
) -> Result<GradCheckReport, GradCheckError>
where
    F: Fn(&mut Tape<'_>) -> Var,
{
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(GradCheckError::BadEpsilon(epsilon));
    }
    let mut tape = Tape::new(store);
    let out = loss(&mut tape);
    let base = tape.value(out).item();
    if !base.is_finite() {
        return Err(GradCheckError::NonFinite(base));
    }
    let grads = tape.backward(out);
    drop(tape);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords: Vec<(usize, usize)> = Vec::new();
    let total = store.num_scalars();
    if total <= min_coords {
        for i in 0..store.len() {
            coords.extend((0..store.get(i).len()).map(|k| (i, k)));
        }
    } else {
        for i in 0..store.len() {
            let n = store.get(i).len();
            if n > 0 {
                coords.push((i, rng.random_range(0..n)));
            }
        }
        let offsets: Vec<usize> = (0..store.len())
            .scan(0, |acc, i| {
                let o = *acc;
                *acc += store.get(i).len();
                Some(o)
            })
            .collect();
        let extra = min_coords.saturating_sub(coords.len());
        for flat in sample(&mut rng, total, extra) {
            let i = offsets.partition_point(|&o| o <= flat) - 1;
            coords.push((i, flat - offsets[i]));
        }
    }

    let mut probe = store.clone();
    let eval = |probe: &ParamStore| -> Result<f64, GradCheckError> {
        let mut t = Tape::new(probe);
        let v = loss(&mut t);
        let l = t.value(v).item();
        if l.is_finite() {
            Ok(l)
        } else {
            Err(GradCheckError::NonFinite(l))
        }
    };
    let mut report = GradCheckReport { max_relative_error: 0.0, coordinates: coords.len(), worst: None };
    for &(i, k) in &coords {
        let orig = probe.get(i).data[k];
        probe.get_mut(i).data[k] = orig + epsilon;
        let plus = eval(&probe)?;
        probe.get_mut(i).data[k] = orig - epsilon;
        let minus = eval(&probe)?;
        probe.get_mut(i).data[k] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let analytic = grads.entry(i, k);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOM_FLOOR);
        if err > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = report.max_relative_error.max(err);
            if err >= report.max_relative_error {
                report.worst = Some((store.name(i).to_string(), k));
            }
        }
    }
    Ok(report)
}

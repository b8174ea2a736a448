//! Central finite-difference check of analytic gradients.
//!
//! The numeric side only ever evaluates a caller-supplied loss closure on a
//! perturbed copy of the model, so it shares no code with backpropagation.

use crate::net::Gradients;
use crate::train::Model;

/// Step used for central differences.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Denominator floor: entries smaller than this are compared in absolute terms
/// scaled by the floor, since central differences carry ~1e-11 of noise.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Flat index (in [`Gradients::flatten`] order) of the worst entry.
    pub worst_index: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic` against `(L(θ+h) - L(θ-h)) / 2h` for every trainable
/// parameter of `model`, where `loss` evaluates the full objective.
pub fn check_gradients<M: Model>(
    model: &M,
    analytic: &Gradients,
    step: f64,
    loss: impl Fn(&M) -> f64,
) -> GradCheckReport {
    let flat = analytic.flatten();
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst_index: 0,
    };

    let trainable: Vec<usize> = model
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.frozen)
        .map(|(i, _)| i)
        .collect();

    let mut flat_index = 0;
    for li in trainable {
        let n_weights = model.layers()[li].weights.len();
        let n_biases = model.layers()[li].biases.len();
        for p in 0..n_weights + n_biases {
            let original = param(&probe, li, p);
            set_param(&mut probe, li, p, original + step);
            let plus = loss(&probe);
            set_param(&mut probe, li, p, original - step);
            let minus = loss(&probe);
            set_param(&mut probe, li, p, original);

            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(flat[flat_index], numeric);
            if err > report.max_relative_error || err.is_nan() {
                report.max_relative_error = err;
                report.worst_index = flat_index;
            }
            report.checked += 1;
            flat_index += 1;
        }
    }
    assert_eq!(flat_index, flat.len(), "gradient layout differs from trainable layers");
    report
}

fn param<M: Model>(m: &M, layer: usize, p: usize) -> f64 {
    let l = &m.layers()[layer];
    if p < l.weights.len() {
        l.weights[p]
    } else {
        l.biases[p - l.weights.len()]
    }
}

fn set_param<M: Model>(m: &mut M, layer: usize, p: usize, v: f64) {
    let l = &mut m.layers_mut()[layer];
    if p < l.weights.len() {
        l.weights[p] = v;
    } else {
        let k = p - l.weights.len();
        l.biases[k] = v;
    }
}

//! Kalman-based reference trackers for the clutter scenario: a clutter-free
//! Kalman filter, nearest neighbour, and probabilistic data association.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::clutter::{make_window, ClutterParams, ClutterScenario, Scan, Window};
use crate::error::{Error, Result};
use crate::linalg::symmetrize;

#[derive(Debug, Clone, PartialEq)]
pub struct KfState {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl KfState {
    pub fn new(x: DVector<f64>, p: DMatrix<f64>) -> Self {
        Self { x, p }
    }
}

/// `A`, `C`, a single observation row `H` and its noise standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct KfModel {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub g: f64,
}

impl KfModel {
    pub fn from_scenario(scenario: &ClutterScenario) -> Self {
        Self {
            a: scenario.a.clone(),
            c: scenario.c.clone(),
            h: scenario.params.h_nom.clone(),
            g: scenario.params.g_nom,
        }
    }

    /// Innovation variance `H P⁻ Hᵀ + g²` of a predicted state.
    pub fn innovation_variance(&self, predicted: &KfState) -> f64 {
        (&self.h * &predicted.p * self.h.transpose())[(0, 0)] + self.g * self.g
    }

    /// Gate for the step after `state`.
    pub fn window(&self, state: &KfState, params: &ClutterParams) -> Result<Window> {
        let s = self.innovation_variance(&kf_predict(state, self));
        make_window(&state.x, &self.a, params, s)
    }
}

pub fn kf_predict(state: &KfState, model: &KfModel) -> KfState {
    let x = &model.a * &state.x;
    let p = &model.a * &state.p * model.a.transpose() + &model.c * model.c.transpose();
    KfState {
        x,
        p: symmetrize(&p),
    }
}

pub fn kf_update(predicted: &KfState, y: f64, model: &KfModel) -> Result<KfState> {
    let s = model.innovation_variance(predicted);
    if !(s > 0.0) {
        return Err(Error::NonPositiveVariance(s));
    }
    let w = &predicted.p * model.h.transpose() / s;
    let nu = y - (&model.h * &predicted.x)[(0, 0)];
    let x = &predicted.x + &w * nu;
    let p = &predicted.p - &w * w.transpose() * s;
    Ok(KfState {
        x,
        p: symmetrize(&p),
    })
}

pub fn kf_step(state: &KfState, y: f64, model: &KfModel) -> Result<KfState> {
    kf_update(&kf_predict(state, model), y, model)
}

/// Index of the detection closest to the predicted measurement; ties go to
/// the lower index.
pub fn nearest_index(values: &[f64], predicted: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        let d = (v - predicted) * (v - predicted);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i)
}

/// Kalman update with the nearest detection; predict-only on an empty scan.
pub fn nn_step(state: &KfState, scan: &Scan, model: &KfModel) -> Result<KfState> {
    let predicted = kf_predict(state, model);
    let y_hat = (&model.h * &predicted.x)[(0, 0)];
    match nearest_index(&scan.values, y_hat) {
        Some(i) => kf_update(&predicted, scan.values[i], model),
        None => Ok(predicted),
    }
}

/// Association probabilities of one PDA update.
#[derive(Debug, Clone, PartialEq)]
pub struct PdaWeights {
    /// Probability that no detection is target-originated.
    pub beta0: f64,
    pub beta: Vec<f64>,
}

impl PdaWeights {
    pub fn total(&self) -> f64 {
        self.beta0 + self.beta.iter().sum::<f64>()
    }
}

/// Parametric PDA weights. Computed in log space so that far-away
/// detections or a zero clutter density do not produce 0/0.
pub fn pda_weights(innovations: &[f64], s: f64, params: &ClutterParams) -> PdaWeights {
    let lambda = params.spatial_density();
    let b = lambda * libm::sqrt(2.0 * core::f64::consts::PI * s) * (1.0 - params.p_d * params.p_g)
        / params.p_d;
    let log_b = if b > 0.0 {
        libm::log(b)
    } else {
        f64::NEG_INFINITY
    };
    let logs: Vec<f64> = innovations.iter().map(|nu| -0.5 * nu * nu / s).collect();
    let max = logs.iter().copied().fold(log_b, f64::max);
    if max == f64::NEG_INFINITY {
        return PdaWeights {
            beta0: 1.0,
            beta: alloc::vec![0.0; innovations.len()],
        };
    }
    let e0 = libm::exp(log_b - max);
    let e: Vec<f64> = logs.iter().map(|l| libm::exp(l - max)).collect();
    let total = e0 + e.iter().sum::<f64>();
    PdaWeights {
        beta0: e0 / total,
        beta: e.iter().map(|v| v / total).collect(),
    }
}

/// PDA update, returning the association weights as well.
pub fn pda_step_detailed(
    state: &KfState,
    scan: &Scan,
    model: &KfModel,
    params: &ClutterParams,
) -> Result<(KfState, PdaWeights)> {
    let predicted = kf_predict(state, model);
    if scan.is_empty() {
        let w = PdaWeights {
            beta0: 1.0,
            beta: Vec::new(),
        };
        return Ok((predicted, w));
    }
    let s = model.innovation_variance(&predicted);
    if !(s > 0.0) {
        return Err(Error::NonPositiveVariance(s));
    }
    let y_hat = (&model.h * &predicted.x)[(0, 0)];
    let innovations: Vec<f64> = scan.values.iter().map(|y| y - y_hat).collect();
    let weights = pda_weights(&innovations, s, params);

    let nu_bar: f64 = weights
        .beta
        .iter()
        .zip(&innovations)
        .map(|(b, nu)| b * nu)
        .sum();
    let spread: f64 = weights
        .beta
        .iter()
        .zip(&innovations)
        .map(|(b, nu)| b * nu * nu)
        .sum::<f64>()
        - nu_bar * nu_bar;
    let w = &predicted.p * model.h.transpose() / s;
    let p_c = &predicted.p - &w * w.transpose() * s;
    let x = &predicted.x + &w * nu_bar;
    let p =
        &predicted.p * weights.beta0 + p_c * (1.0 - weights.beta0) + &w * w.transpose() * spread;
    Ok((
        KfState {
            x,
            p: symmetrize(&p),
        },
        weights,
    ))
}

pub fn pda_step(
    state: &KfState,
    scan: &Scan,
    model: &KfModel,
    params: &ClutterParams,
) -> Result<KfState> {
    pda_step_detailed(state, scan, model, params).map(|(s, _)| s)
}

//! Single-target tracking in uniform clutter, cast as a white-mode jump
//! system whose measurement dimension is the number of gated detections.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expectations::{
    clutter_expectations, dynamics_expectations, DynamicsExpectations, MeasurementExpectations,
};
use crate::filter::{predict_moments, step_with, FilterState, StepOutput};
use crate::linalg::kron;
use crate::model::{Atom, ModeDistribution, ModeRealization};
use crate::sampling::{normal_quantile, poisson_from_uniform};

/// Probability assigned to the "true measurement absent" atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissModel {
    /// Always-detected law; no all-clutter atom.
    Disabled,
    /// `(1 − P_D)(1 − P_G)`.
    Product,
    /// `1 − P_D·P_G`.
    Standard,
}

impl MissModel {
    pub fn weight(self, p_d: f64, p_g: f64) -> f64 {
        match self {
            MissModel::Disabled => 0.0,
            MissModel::Product => (1.0 - p_d) * (1.0 - p_g),
            MissModel::Standard => 1.0 - p_d * p_g,
        }
    }
}

/// Law of the number of clutter points in a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClutterCount {
    /// Poisson with mean `λ·d`, λ = ρ / G_nom.
    Poisson,
    /// Exactly this many clutter points per scan.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterParams {
    /// 1×n nominal observation row.
    pub h_nom: DMatrix<f64>,
    /// True-measurement noise standard deviation.
    pub g_nom: f64,
    /// Detection probability.
    pub p_d: f64,
    /// Gate probability.
    pub p_g: f64,
    /// Expected clutter points per one `g_nom` of window length.
    pub rho: f64,
    pub count: ClutterCount,
    pub miss: MissModel,
}

impl ClutterParams {
    /// Position-only observation with `G_nom = √30`, `P_D = 0.95`, `P_G = 0.99`.
    pub fn reference(rho: f64) -> Self {
        Self {
            h_nom: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            g_nom: libm::sqrt(30.0),
            p_d: 0.95,
            p_g: 0.99,
            rho,
            count: ClutterCount::Poisson,
            miss: MissModel::Product,
        }
    }

    /// Gate multiplier: the standard-normal quantile at `(1 + P_G) / 2`.
    pub fn gate_multiplier(&self) -> f64 {
        normal_quantile(0.5 * (1.0 + self.p_g))
    }

    /// Clutter points per unit length.
    pub fn spatial_density(&self) -> f64 {
        self.rho / self.g_nom
    }

    pub fn miss_weight(&self) -> f64 {
        self.miss.weight(self.p_d, self.p_g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_d > 0.0 && self.p_d <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pd out of range: {}",
                self.p_d
            )));
        }
        if !(self.p_g > 0.0 && self.p_g < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pg out of range: {}",
                self.p_g
            )));
        }
        if !(self.rho >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho out of range: {}",
                self.rho
            )));
        }
        if !(self.g_nom >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "g_nom out of range: {}",
                self.g_nom
            )));
        }
        if self.h_nom.nrows() != 1 {
            return Err(Error::InvalidParameter(format!(
                "h_nom must be a single row, got {} rows",
                self.h_nom.nrows()
            )));
        }
        Ok(())
    }
}

/// Validation window around the predicted measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub center: f64,
    pub halfwidth: f64,
}

impl Window {
    /// Full length `d`.
    pub fn length(&self) -> f64 {
        2.0 * self.halfwidth
    }

    /// Uniform-clutter standard deviation, `d / √12`.
    pub fn g_cl(&self) -> f64 {
        self.length() / libm::sqrt(12.0)
    }

    pub fn lower(&self) -> f64 {
        self.center - self.halfwidth
    }

    pub fn upper(&self) -> f64 {
        self.center + self.halfwidth
    }

    pub fn contains(&self, y: f64) -> bool {
        (y - self.center).abs() <= self.halfwidth
    }
}

/// Window centred on `H_nom·A·x̂_prev` with half-width `g·√S`.
pub fn make_window(
    x_hat_prev: &DVector<f64>,
    a: &DMatrix<f64>,
    params: &ClutterParams,
    s: f64,
) -> Result<Window> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveVariance(s));
    }
    let center = (&params.h_nom * (a * x_hat_prev))[(0, 0)];
    Ok(Window {
        center,
        halfwidth: params.gate_multiplier() * libm::sqrt(s),
    })
}

/// What happened to the target-originated measurement in one scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthOutcome {
    pub value: f64,
    pub detected: bool,
    pub in_gate: bool,
}

/// All gated detections of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub values: Vec<f64>,
    /// Position of the target measurement in `values`; ground truth only.
    pub truth_index: Option<usize>,
    pub window: Window,
    pub truth: TruthOutcome,
}

impl Scan {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}

/// Randomness consumed by one scan. Sharing a `ScanDraws` between filters
/// with different windows gives them common random numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanDraws {
    pub detect_u: f64,
    /// Standard normal driving the true measurement noise.
    pub truth_noise: f64,
    pub count_u: f64,
    pub slot_u: f64,
    /// Seeds the stream of unit uniforms placing clutter in the window.
    pub clutter_seed: u64,
}

impl ScanDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            detect_u: rng.random(),
            truth_noise: StandardNormal.sample(rng),
            count_u: rng.random(),
            slot_u: rng.random(),
            clutter_seed: rng.random(),
        }
    }
}

fn clutter_points(window: &Window, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            window.lower() + window.length() * u
        })
        .collect()
}

fn clutter_count(window: &Window, params: &ClutterParams, u: f64) -> usize {
    match params.count {
        ClutterCount::Poisson => {
            poisson_from_uniform(params.spatial_density() * window.length(), u)
        }
        ClutterCount::Fixed(n) => n,
    }
}

/// Builds a scan from pre-drawn randomness.
pub fn assemble_scan(
    x_true: &DVector<f64>,
    window: &Window,
    params: &ClutterParams,
    draws: &ScanDraws,
) -> Scan {
    let value = (&params.h_nom * x_true)[(0, 0)] + params.g_nom * draws.truth_noise;
    let detected = draws.detect_u < params.p_d;
    let in_gate = window.contains(value);
    let count = clutter_count(window, params, draws.count_u);
    let mut values = clutter_points(window, count, draws.clutter_seed);
    let truth_index = if detected && in_gate {
        let slot = ((draws.slot_u * (count + 1) as f64) as usize).min(count);
        values.insert(slot, value);
        Some(slot)
    } else {
        None
    };
    debug_assert!(values.iter().all(|v| window.contains(*v)));
    Scan {
        values,
        truth_index,
        window: *window,
        truth: TruthOutcome {
            value,
            detected,
            in_gate,
        },
    }
}

/// Draws the scan of one step: a Gaussian true measurement kept when
/// detected and gated, plus uniformly placed clutter.
pub fn generate_scan<R: Rng + ?Sized>(
    x_true: &DVector<f64>,
    window: &Window,
    params: &ClutterParams,
    rng: &mut R,
) -> Scan {
    let draws = ScanDraws::sample(rng);
    assemble_scan(x_true, window, params, &draws)
}

/// Samples a scan exactly from the always-detected mode law: the target
/// measurement is always present (even outside the window) at a uniformly
/// random slot among `clutter` uniform clutter points.
pub fn sample_from_mode_law<R: Rng + ?Sized>(
    x_true: &DVector<f64>,
    window: &Window,
    params: &ClutterParams,
    clutter: usize,
    rng: &mut R,
) -> Scan {
    let draws = ScanDraws::sample(rng);
    let value = (&params.h_nom * x_true)[(0, 0)] + params.g_nom * draws.truth_noise;
    let mut values = clutter_points(window, clutter, draws.clutter_seed);
    let slot = ((draws.slot_u * (clutter + 1) as f64) as usize).min(clutter);
    values.insert(slot, value);
    Scan {
        values,
        truth_index: Some(slot),
        window: *window,
        truth: TruthOutcome {
            value,
            detected: true,
            in_gate: window.contains(value),
        },
    }
}

/// Enumerates the clutter mode law for a scan of `n_det` detections.
///
/// Atom `i` places the target measurement in row `i`; the others are clutter
/// centred on the predicted measurement through the feedback term. When the
/// miss model is enabled an all-clutter atom is appended.
pub fn build_mode_distribution(
    n_det: usize,
    window: &Window,
    params: &ClutterParams,
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<ModeDistribution> {
    if n_det < 1 {
        return Err(Error::NoDetections(n_det));
    }
    let n = a.nrows();
    let h = &params.h_nom;
    let ha = h * a;
    let g_cl = window.g_cl();
    let w0 = params.miss_weight();
    let each = (1.0 - w0) / n_det as f64;

    let mut atoms = Vec::with_capacity(n_det + 1);
    for i in 0..n_det {
        let mut hm = DMatrix::zeros(n_det, n);
        let mut fm = DMatrix::zeros(n_det, n);
        let mut gdiag = DVector::from_element(n_det, g_cl);
        for row in 0..n_det {
            if row == i {
                hm.row_mut(row).copy_from(&h.row(0));
                gdiag[row] = params.g_nom;
            } else {
                fm.row_mut(row).copy_from(&ha.row(0));
            }
        }
        atoms.push(Atom {
            weight: each,
            mode: ModeRealization {
                a: a.clone(),
                b: DMatrix::zeros(n, 0),
                c: c.clone(),
                h: hm,
                g: DMatrix::from_diagonal(&gdiag),
                f: fm,
            },
        });
    }
    if params.miss != MissModel::Disabled {
        let ones = DMatrix::from_element(n_det, 1, 1.0);
        atoms.push(Atom {
            weight: w0,
            mode: ModeRealization {
                a: a.clone(),
                b: DMatrix::zeros(n, 0),
                c: c.clone(),
                h: DMatrix::zeros(n_det, n),
                g: DMatrix::identity(n_det, n_det) * g_cl,
                f: kron(&ones, &ha),
            },
        });
    }
    ModeDistribution::new(atoms)
}

/// Target dynamics plus the clutter sensor: everything the LMMSE tracker
/// needs to run the clutter scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterScenario {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub params: ClutterParams,
}

impl ClutterScenario {
    /// Constant-velocity-like target with `A = [[1, 0.2], [0, 0.95]]`,
    /// `C = (0.25, 0.5)ᵀ` and the default sensor.
    pub fn reference(rho: f64) -> Self {
        Self {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.95]),
            c: DMatrix::from_row_slice(2, 1, &[0.25, 0.5]),
            params: ClutterParams::reference(rho),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn dynamics(&self, state: &FilterState) -> Result<DynamicsExpectations> {
        let n = self.state_dim();
        let mode =
            ModeRealization::dynamics_only(self.a.clone(), DMatrix::zeros(n, 0), self.c.clone())?;
        dynamics_expectations(
            &ModeDistribution::deterministic(mode),
            &state.sigma,
            &state.upsilon,
            &state.delta,
        )
    }

    /// Predicted variance of the target measurement about the window
    /// centre: `H_nom (Σ⁺ − A Λ Aᵀ) H_nomᵀ + G_nom²`.
    pub fn lmmse_innovation_variance(&self, state: &FilterState) -> Result<f64> {
        let dynamics = self.dynamics(state)?;
        let (_, sigma_next) = predict_moments(state, &dynamics, &DVector::zeros(0))?;
        let h = &self.params.h_nom;
        let err = sigma_next - &self.a * &state.lambda * self.a.transpose();
        Ok((h * err * h.transpose())[(0, 0)] + self.params.g_nom * self.params.g_nom)
    }

    pub fn lmmse_window(&self, state: &FilterState) -> Result<Window> {
        let s = self.lmmse_innovation_variance(state)?;
        make_window(&state.x_hat, &self.a, &self.params, s)
    }

    /// One LMMSE step on a scan, using the closed-form expectations. An
    /// empty scan is a pure time update.
    pub fn lmmse_step(&self, state: &FilterState, scan: &Scan) -> Result<StepOutput> {
        let dynamics = self.dynamics(state)?;
        let none = DVector::zeros(0);
        if scan.is_empty() {
            let n = self.state_dim();
            return step_with(
                state,
                dynamics,
                |_| Ok(MeasurementExpectations::empty(n)),
                &none,
                &none,
                &none,
            );
        }
        let g_cl = scan.window.g_cl();
        let w0 = self.params.miss_weight();
        step_with(
            state,
            dynamics,
            |sigma_next| {
                clutter_expectations(
                    &self.params,
                    scan.len(),
                    &self.a,
                    sigma_next,
                    &state.lambda,
                    g_cl,
                    w0,
                )
            },
            &scan.as_vector(),
            &none,
            &none,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn window(center: f64, halfwidth: f64) -> Window {
        Window { center, halfwidth }
    }

    #[test]
    fn gate_multiplier_default() {
        let p = ClutterParams::reference(1.0);
        assert!((p.gate_multiplier() - 2.5758).abs() < 1e-4);
    }

    #[test]
    fn window_geometry() {
        let mut p = ClutterParams::reference(1.0);
        // pick P_G so that g = 2 exactly: (1 + P_G)/2 = Φ(2)
        p.p_g = 2.0 * crate::sampling::normal_cdf(2.0) - 1.0;
        let w = make_window(&DVector::zeros(2), &DMatrix::identity(2, 2), &p, 1.0).unwrap();
        assert_relative_eq!(w.length(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(w.g_cl() * w.g_cl(), 16.0 / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn window_centre_at_zero_estimate() {
        let p = ClutterParams::reference(1.0);
        let a = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, 2.0, 7.0]);
        let w = make_window(&DVector::zeros(2), &a, &p, 5.0).unwrap();
        assert_eq!(w.center, 0.0);
    }

    #[test]
    fn window_rejects_non_positive_variance() {
        let p = ClutterParams::reference(1.0);
        assert_eq!(
            make_window(&DVector::zeros(2), &DMatrix::identity(2, 2), &p, 0.0),
            Err(Error::NonPositiveVariance(0.0))
        );
    }

    #[test]
    fn scan_without_clutter() {
        let mut p = ClutterParams::reference(0.0);
        p.p_d = 1.0;
        p.g_nom = 1e-9;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let scan = generate_scan(&x, &window(0.0, 10.0), &p, &mut rng);
        assert_eq!(scan.len(), 1);
        assert_eq!(scan.truth_index, Some(0));
        assert!((scan.values[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scan_without_detection() {
        let mut p = ClutterParams::reference(3.0);
        p.p_d = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DVector::zeros(2);
        for _ in 0..200 {
            let scan = generate_scan(&x, &window(0.0, 20.0), &p, &mut rng);
            assert!(scan.truth_index.is_none());
            assert!(!scan.truth.detected);
        }
    }

    #[test]
    fn clutter_stays_in_window() {
        let p = ClutterParams::reference(5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = window(-4.0, 13.0);
        for _ in 0..500 {
            let scan = generate_scan(&DVector::from_vec(vec![100.0, 0.0]), &w, &p, &mut rng);
            assert!(scan.values.iter().all(|v| w.contains(*v)));
            assert!(scan.truth_index.is_none());
        }
    }

    #[test]
    fn clutter_count_mean() {
        let mut p = ClutterParams::reference(2.0);
        p.p_d = 0.0;
        let w = window(0.0, 5.0);
        let mean = 2.0 * 10.0 / libm::sqrt(30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = 100_000;
        let mut total = 0usize;
        for _ in 0..draws {
            total += generate_scan(&DVector::zeros(2), &w, &p, &mut rng).len();
        }
        let sample = total as f64 / draws as f64;
        let se = libm::sqrt(mean / draws as f64);
        assert!((sample - mean).abs() < 3.0 * se, "{sample} vs {mean}");
    }

    #[test]
    fn shared_draws_couple_windows() {
        let p = ClutterParams::reference(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = ScanDraws::sample(&mut rng);
        let x = DVector::zeros(2);
        let narrow = assemble_scan(&x, &window(0.0, 10.0), &p, &draws);
        let wide = assemble_scan(&x, &window(0.0, 40.0), &p, &draws);
        assert_eq!(narrow.truth.value, wide.truth.value);
        let clutter = |s: &Scan| s.values.len() - usize::from(s.truth_index.is_some());
        assert!(clutter(&narrow) <= clutter(&wide));
    }

    #[test]
    fn single_detection_law() {
        let mut p = ClutterParams::reference(1.0);
        p.miss = MissModel::Disabled;
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.95]);
        let d =
            build_mode_distribution(1, &window(0.0, 5.0), &p, &a, &DMatrix::zeros(2, 1)).unwrap();
        assert_eq!(d.len(), 1);
        let m = &d.atoms()[0].mode;
        assert_eq!(d.atoms()[0].weight, 1.0);
        assert_eq!(m.h, p.h_nom);
        assert_relative_eq!(m.g[(0, 0)], p.g_nom);
        assert_eq!(m.f, DMatrix::zeros(1, 2));
    }

    #[test]
    fn three_detection_placements() {
        let mut p = ClutterParams::reference(1.0);
        p.miss = MissModel::Disabled;
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.95]);
        let ha = &p.h_nom * &a;
        let d =
            build_mode_distribution(3, &window(0.0, 6.0), &p, &a, &DMatrix::zeros(2, 1)).unwrap();
        assert_eq!(d.len(), 3);
        for (i, atom) in d.atoms().iter().enumerate() {
            assert_relative_eq!(atom.weight, 1.0 / 3.0);
            for row in 0..3 {
                if row == i {
                    assert_eq!(atom.mode.h.row(row), p.h_nom.row(0));
                    assert_eq!(atom.mode.f.row(row).amax(), 0.0);
                } else {
                    assert_eq!(atom.mode.h.row(row).amax(), 0.0);
                    assert_eq!(atom.mode.f.row(row), ha.row(0));
                }
            }
        }
    }

    #[test]
    fn miss_atom_weight() {
        let p = ClutterParams::reference(1.0);
        let a = DMatrix::identity(2, 2);
        let d =
            build_mode_distribution(2, &window(0.0, 6.0), &p, &a, &DMatrix::zeros(2, 1)).unwrap();
        assert_eq!(d.len(), 3);
        assert_relative_eq!(d.atoms()[2].weight, 5e-4, epsilon = 1e-15);
        assert_relative_eq!(d.atoms()[0].weight, (1.0 - 5e-4) / 2.0, epsilon = 1e-15);
        assert!(crate::model::validate(&d).is_empty());
        let std = MissModel::Standard.weight(0.95, 0.99);
        assert_relative_eq!(std, 1.0 - 0.9405, epsilon = 1e-15);
    }

    #[test]
    fn empty_law_is_error() {
        let p = ClutterParams::reference(1.0);
        let r = build_mode_distribution(
            0,
            &window(0.0, 1.0),
            &p,
            &DMatrix::identity(2, 2),
            &DMatrix::zeros(2, 1),
        );
        assert_eq!(r, Err(Error::NoDetections(0)));
    }

    #[test]
    fn param_validation() {
        let mut p = ClutterParams::reference(1.0);
        p.p_d = 1.7;
        assert!(
            matches!(p.validate(), Err(Error::InvalidParameter(m)) if m.starts_with("pd out of range"))
        );
        let mut p = ClutterParams::reference(1.0);
        p.p_g = 1.0;
        assert!(p.validate().is_err());
    }

    fn scenario_without_misses() -> ClutterScenario {
        let mut sc = ClutterScenario::reference(1.0);
        sc.params.miss = MissModel::Disabled;
        sc
    }

    fn scan_of(values: Vec<f64>, window: Window) -> Scan {
        Scan {
            values,
            truth_index: None,
            window,
            truth: TruthOutcome {
                value: 0.0,
                detected: true,
                in_gate: true,
            },
        }
    }

    #[test]
    fn innovation_covariance_is_block_diagonal() {
        let sc = scenario_without_misses();
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let state = crate::filter::init(&x0, &(DMatrix::identity(2, 2) * 30.0), &DVector::zeros(0))
            .unwrap();
        let w = sc.lmmse_window(&state).unwrap();
        for n in 1..7 {
            let values: Vec<f64> = (0..n).map(|i| w.center + i as f64 - 2.0).collect();
            let out = sc.lmmse_step(&state, &scan_of(values, w)).unwrap();
            let (_, sigma_next) =
                predict_moments(&state, &out.expectations.dynamics, &DVector::zeros(0)).unwrap();
            let h = &sc.params.h_nom;
            let s = (h * &sigma_next * h.transpose())[(0, 0)];
            let q = (h * &sc.a * &state.lambda * sc.a.transpose() * h.transpose())[(0, 0)];
            let nf = n as f64;
            let g_cl = w.g_cl();
            let d = (s - q + sc.params.g_nom * sc.params.g_nom + (nf - 1.0) * g_cl * g_cl) / nf;
            let expected = DMatrix::identity(n, n) * d;
            assert!((&out.gains.gamma_yy - expected).amax() < 1e-10 * d.max(1.0));
            for i in 1..n {
                assert!((out.gains.k.column(i) - out.gains.k.column(0)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn single_detection_step_is_kalman() {
        let sc = scenario_without_misses();
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let p0 = DMatrix::identity(2, 2) * 30.0;
        let state = crate::filter::init(&x0, &p0, &DVector::zeros(0)).unwrap();
        let w = sc.lmmse_window(&state).unwrap();
        let out = sc.lmmse_step(&state, &scan_of(vec![3.5], w)).unwrap();
        let model = crate::baselines::KfModel::from_scenario(&sc);
        let kf = crate::baselines::kf_step(&crate::baselines::KfState::new(x0, p0), 3.5, &model)
            .unwrap();
        assert_relative_eq!(out.state.x_hat, kf.x, epsilon = 1e-10);
        assert_relative_eq!(out.state.error_moment(), kf.p, epsilon = 1e-9);
    }

    #[test]
    fn empty_scan_step_predicts() {
        let sc = ClutterScenario::reference(1.0);
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let state = crate::filter::init(&x0, &(DMatrix::identity(2, 2) * 30.0), &DVector::zeros(0))
            .unwrap();
        let w = sc.lmmse_window(&state).unwrap();
        let out = sc.lmmse_step(&state, &scan_of(vec![], w)).unwrap();
        assert_relative_eq!(out.state.x_hat, &sc.a * x0, epsilon = 1e-14);
        assert_eq!(out.gains.inversion, crate::linalg::InversionPath::Empty);
    }
}

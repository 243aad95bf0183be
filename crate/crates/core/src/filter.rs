//! Recursive LMMSE filter for feedback jump-linear systems.
//!
//! One step runs in three phases so callers can act between them (the
//! clutter scenario sizes its validation window from the predicted moments
//! before the scan exists):
//!
//! 1. [`predict_moments`]: E[x_{k+1}] and Σ_{k+1} from the dynamics expectations.
//! 2. [`innovation_covariances`] and [`gains`]: Γ_{xỹ}, Γ_{ỹỹ}, then K, L, J.
//! 3. [`correct`]: x̂_{k+1} = L x̂_k + K y_{k+1} + J u_k and the Λ recursion.
//!
//! [`update`] chains all three for a generic [`ModeDistribution`].

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::expectations::{
    dynamics_expectations, measurement_expectations, DynamicsExpectations, MeasurementExpectations,
    StepExpectations,
};
use crate::linalg::{
    is_symmetric, min_eigenvalue, outer, right_divide_spd, symmetrize, InversionPath,
};
use crate::model::{
    draw_initial_state, measure, standard_normal_vector, step_state, InputPolicy, ModeDistribution,
    ModeLaw, ModeRealization, SystemSpec,
};

/// Absolute floor for the PSD diagnostics on Λ and Σ − Λ, scaled by the
/// magnitude of Σ.
pub const PSD_TOL: f64 = 1e-8;

/// Carry of the recursion between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub k: usize,
    /// LMMSE estimate of x_k from y_1..y_k.
    pub x_hat: DVector<f64>,
    /// E[x_k]
    pub ex: DVector<f64>,
    /// Σ_k = E[x_k x_kᵀ]
    pub sigma: DMatrix<f64>,
    /// Λ_k = E[x̂_k x̂_kᵀ] = E[x̂_k x_kᵀ]
    pub lambda: DMatrix<f64>,
    /// Υ_k = E[x_k] u_kᵀ
    pub upsilon: DMatrix<f64>,
    /// Δ_k = u_k u_kᵀ
    pub delta: DMatrix<f64>,
}

impl FilterState {
    pub fn state_dim(&self) -> usize {
        self.x_hat.len()
    }

    /// Second moment of the estimation error, Σ − Λ.
    pub fn error_moment(&self) -> DMatrix<f64> {
        &self.sigma - &self.lambda
    }

    /// Replaces the input-dependent moments for a new `u_k`.
    pub fn with_input(mut self, u: &DVector<f64>) -> Self {
        self.upsilon = outer(&self.ex, u);
        self.delta = outer(u, u);
        self
    }
}

/// Gains and innovation covariances of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    /// n×m
    pub k: DMatrix<f64>,
    /// n×n
    pub l: DMatrix<f64>,
    /// n×p
    pub j: DMatrix<f64>,
    /// Γ_{x_{k+1} ỹ_{k+1}}, n×m
    pub gamma_xy: DMatrix<f64>,
    /// Γ_{ỹ_{k+1} ỹ_{k+1}}, m×m
    pub gamma_yy: DMatrix<f64>,
    pub inversion: InversionPath,
}

/// Result of a full step, keeping the intermediate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: FilterState,
    pub gains: GainSet,
    pub expectations: StepExpectations,
    /// ŷ⁻_{k+1}, the one-step measurement prediction.
    pub predicted_measurement: DVector<f64>,
}

/// `x̂_0 = x̄0`, `Σ_0 = P0 + x̄0 x̄0ᵀ`, `Λ_0 = x̄0 x̄0ᵀ`, `Υ_0 = x̄0 u0ᵀ`, `Δ_0 = u0 u0ᵀ`.
pub fn init(x0_mean: &DVector<f64>, p0: &DMatrix<f64>, u0: &DVector<f64>) -> Result<FilterState> {
    let n = x0_mean.len();
    check_dim("P0 rows", n, p0.nrows())?;
    check_dim("P0 cols", n, p0.ncols())?;
    if !is_symmetric(p0, 1e-12) {
        return Err(Error::NotSymmetric("P0"));
    }
    let mean_outer = outer(x0_mean, x0_mean);
    Ok(FilterState {
        k: 0,
        x_hat: x0_mean.clone(),
        ex: x0_mean.clone(),
        sigma: p0 + &mean_outer,
        lambda: mean_outer,
        upsilon: outer(x0_mean, u0),
        delta: outer(u0, u0),
    })
}

/// E[x_{k+1}] and Σ_{k+1}.
pub fn predict_moments(
    state: &FilterState,
    dynamics: &DynamicsExpectations,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_dim("E[A] cols", state.state_dim(), dynamics.ea.ncols())?;
    check_dim("u", dynamics.eb.ncols(), u.len())?;
    let ex = &dynamics.ea * &state.ex + &dynamics.eb * u;
    let sigma = &dynamics.easa
        + &dynamics.eaub
        + dynamics.eaub.transpose()
        + &dynamics.ebdb
        + &dynamics.ecc;
    Ok((ex, symmetrize(&sigma)))
}

/// E[y_{k+1}] = (E[H] E[A] + E[F]) E[x_k] + E[H] E[B] u_k.
pub fn expected_measurement(
    state: &FilterState,
    exps: &StepExpectations,
    u: &DVector<f64>,
) -> DVector<f64> {
    let d = &exps.dynamics;
    let m = &exps.measurement;
    (&m.eh * &d.ea + &m.ef) * &state.ex + &m.eh * (&d.eb * u)
}

/// Γ_{xỹ} and Γ_{ỹỹ}, assembled term by term; Γ_{ỹỹ} is symmetrized.
pub fn innovation_covariances(
    state: &FilterState,
    sigma_next: &DMatrix<f64>,
    exps: &StepExpectations,
    u: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = &exps.dynamics;
    let m = &exps.measurement;
    let lam = &state.lambda;
    let ups = &state.upsilon;
    let ea_t = d.ea.transpose();
    let eb_t = d.eb.transpose();
    let eh_t = m.eh.transpose();

    // E[x_{k+1} x̂⁻ᵀ-like] correction inside Γ_xy
    let cross = &d.ea * (lam * &ea_t + ups * &eb_t)
        + &d.eb * (ups.transpose() * &ea_t + &state.delta * &eb_t);
    let gamma_xy = (sigma_next - cross) * &eh_t;

    let ey = expected_measurement(state, exps, u);
    let eh_ea = &m.eh * &d.ea;
    let ef_t = m.ef.transpose();
    let gamma_yy =
        &m.ehsh + &m.egg + &m.eflf - &m.ef * lam * &ef_t - &eh_ea * lam * eh_ea.transpose()
            + &m.ehxf
            + m.ehxf.transpose()
            - &eh_ea * lam * &ef_t
            - &m.ef * lam * eh_ea.transpose()
            - &eh_ea * ups * &eb_t * &eh_t
            - &m.ef * ups * &eb_t * &eh_t
            - &m.eh * (&d.eb * u) * ey.transpose();
    (gamma_xy, symmetrize(&gamma_yy))
}

/// K = Γ_xy Γ_yy⁻¹, L = (I − K E[H]) E[A] − K E[F], J = (I − K E[H]) E[B].
pub fn gains(gamma_xy: DMatrix<f64>, gamma_yy: DMatrix<f64>, exps: &StepExpectations) -> GainSet {
    let d = &exps.dynamics;
    let m = &exps.measurement;
    let (k, inversion) = right_divide_spd(&gamma_xy, &gamma_yy);
    let n = d.ea.nrows();
    let i_kh = DMatrix::identity(n, n) - &k * &m.eh;
    let l = &i_kh * &d.ea - &k * &m.ef;
    let j = &i_kh * &d.eb;
    GainSet {
        k,
        l,
        j,
        gamma_xy,
        gamma_yy,
        inversion,
    }
}

/// Applies the gains to `y` and propagates Λ, Υ, Δ.
#[allow(clippy::too_many_arguments)]
pub fn correct(
    state: &FilterState,
    ex_next: DVector<f64>,
    sigma_next: DMatrix<f64>,
    exps: &StepExpectations,
    gains: &GainSet,
    y: &DVector<f64>,
    u: &DVector<f64>,
    u_next: &DVector<f64>,
) -> Result<FilterState> {
    check_dim("y", exps.measurement.measurement_dim(), y.len())?;
    let d = &exps.dynamics;
    let m = &exps.measurement;
    let x_hat = &gains.l * &state.x_hat + &gains.k * y + &gains.j * u;

    let ea_t = d.ea.transpose();
    let eb_t = d.eb.transpose();
    let lam_next = (&gains.l + &gains.k * &m.ef) * (&state.lambda * &ea_t + &state.upsilon * &eb_t)
        + &gains.j * (state.upsilon.transpose() * &ea_t + &state.delta * &eb_t)
        + &gains.k * &m.eh * &sigma_next;
    let lambda = symmetrize(&lam_next);
    check_moments(&sigma_next, &lambda)?;

    Ok(FilterState {
        k: state.k + 1,
        x_hat,
        upsilon: outer(&ex_next, u_next),
        delta: outer(u_next, u_next),
        ex: ex_next,
        sigma: sigma_next,
        lambda,
    })
}

fn check_moments(sigma: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<()> {
    let tol = -PSD_TOL * sigma.amax().max(1.0);
    let l_min = min_eigenvalue(lambda);
    if l_min < tol {
        return Err(Error::NotPsd("Λ", l_min));
    }
    let e_min = min_eigenvalue(&(sigma - lambda));
    if e_min < tol {
        return Err(Error::NotPsd("Σ − Λ", e_min));
    }
    Ok(())
}

/// Runs one step with precomputed measurement expectations.
///
/// `measurement` is called with Σ_{k+1} once it is available.
pub fn step_with<M>(
    state: &FilterState,
    dynamics: DynamicsExpectations,
    measurement: M,
    y: &DVector<f64>,
    u: &DVector<f64>,
    u_next: &DVector<f64>,
) -> Result<StepOutput>
where
    M: FnOnce(&DMatrix<f64>) -> Result<MeasurementExpectations>,
{
    let (ex_next, sigma_next) = predict_moments(state, &dynamics, u)?;
    let meas = measurement(&sigma_next)?;
    let exps = StepExpectations {
        dynamics,
        measurement: meas,
    };
    let predicted_measurement = predicted_measurement(state, &exps, u);
    let (gxy, gyy) = innovation_covariances(state, &sigma_next, &exps, u);
    let gains = gains(gxy, gyy, &exps);
    let next = correct(state, ex_next, sigma_next, &exps, &gains, y, u, u_next)?;
    Ok(StepOutput {
        state: next,
        gains,
        expectations: exps,
        predicted_measurement,
    })
}

/// ŷ⁻_{k+1} = (E[H] E[A] + E[F]) x̂_k + E[H] E[B] u_k.
pub fn predicted_measurement(
    state: &FilterState,
    exps: &StepExpectations,
    u: &DVector<f64>,
) -> DVector<f64> {
    let d = &exps.dynamics;
    let m = &exps.measurement;
    (&m.eh * &d.ea + &m.ef) * &state.x_hat + &m.eh * (&d.eb * u)
}

/// Full step with expectations enumerated over `dist_k` (dynamics) and
/// `dist_next` (measurement). An empty measurement takes the predict-only path.
pub fn update_detailed(
    state: &FilterState,
    y: &DVector<f64>,
    u: &DVector<f64>,
    u_next: &DVector<f64>,
    dist_k: &ModeDistribution,
    dist_next: &ModeDistribution,
) -> Result<StepOutput> {
    check_dim("y", dist_next.measurement_dim(), y.len())?;
    let dynamics = dynamics_expectations(dist_k, &state.sigma, &state.upsilon, &state.delta)?;
    let ea = dynamics.ea.clone();
    let eb = dynamics.eb.clone();
    step_with(
        state,
        dynamics,
        |sigma_next| {
            measurement_expectations(
                dist_next,
                sigma_next,
                &state.lambda,
                &ea,
                &eb,
                &state.upsilon,
            )
        },
        y,
        u,
        u_next,
    )
}

pub fn update(
    state: &FilterState,
    y: &DVector<f64>,
    u: &DVector<f64>,
    u_next: &DVector<f64>,
    dist_k: &ModeDistribution,
    dist_next: &ModeDistribution,
) -> Result<FilterState> {
    if y.is_empty() {
        return predict_only(state, dist_k, u, u_next);
    }
    update_detailed(state, y, u, u_next, dist_k, dist_next).map(|o| o.state)
}

/// Time update without a measurement (empty scan): K = 0, L = E[A], J = E[B].
pub fn predict_only(
    state: &FilterState,
    dist_k: &ModeDistribution,
    u: &DVector<f64>,
    u_next: &DVector<f64>,
) -> Result<FilterState> {
    let dynamics = dynamics_expectations(dist_k, &state.sigma, &state.upsilon, &state.delta)?;
    predict_only_with(state, dynamics, u, u_next)
}

pub fn predict_only_with(
    state: &FilterState,
    dynamics: DynamicsExpectations,
    u: &DVector<f64>,
    u_next: &DVector<f64>,
) -> Result<FilterState> {
    let n = state.state_dim();
    step_with(
        state,
        dynamics,
        |_| Ok(MeasurementExpectations::empty(n)),
        &DVector::zeros(0),
        u,
        u_next,
    )
    .map(|o| o.state)
}

/// Mode law with every atom's `A` replaced by `A + B` and `B` zeroed.
struct FeedbackTransformed(Arc<dyn ModeLaw>);

impl ModeLaw for FeedbackTransformed {
    fn distribution(&self, k: usize) -> ModeDistribution {
        self.0.distribution(k).map_modes(absorb_input_gain)
    }
}

fn absorb_input_gain(m: &ModeRealization) -> ModeRealization {
    ModeRealization {
        a: &m.a + &m.b,
        b: DMatrix::zeros(m.b.nrows(), m.b.ncols()),
        ..m.clone()
    }
}

/// Rewrites a `u_k = x̂_k` system as a zero-input one with `A ← A + B`.
pub fn feedback_variant(spec: &SystemSpec) -> Result<SystemSpec> {
    if spec.input != InputPolicy::FeedbackEstimate {
        return Err(Error::InvalidParameter(
            "feedback_variant needs a feedback input policy".into(),
        ));
    }
    let dist = spec.mode_law.distribution(0);
    check_dim("B cols (must equal n)", dist.state_dim(), dist.input_dim())?;
    Ok(SystemSpec {
        x0_mean: spec.x0_mean.clone(),
        p0: spec.p0.clone(),
        input: InputPolicy::Zero,
        mode_law: Arc::new(FeedbackTransformed(spec.mode_law.clone())),
    })
}

/// Step for `u_k = x̂_k` that keeps the input's randomness in the moments.
///
/// The input is replaced by its cross moments E[x_k u_kᵀ] = E[u_k u_kᵀ] = Λ_k
/// when propagating Σ; the remaining expressions depend on A and B only
/// through A + B, so gains come from the absorbed law.
pub fn update_closed_loop(
    state: &FilterState,
    y: &DVector<f64>,
    dist_k: &ModeDistribution,
    dist_next: &ModeDistribution,
) -> Result<StepOutput> {
    let n = state.state_dim();
    check_dim("B cols (must equal n)", n, dist_k.input_dim())?;
    let plant = dynamics_expectations(dist_k, &state.sigma, &state.lambda, &state.lambda)?;
    let sigma_next = symmetrize(
        &(&plant.easa + &plant.eaub + plant.eaub.transpose() + &plant.ebdb + &plant.ecc),
    );
    let ex_next = (&plant.ea + &plant.eb) * &state.ex;

    let zero_input = FilterState {
        upsilon: DMatrix::zeros(n, n),
        delta: DMatrix::zeros(n, n),
        ..state.clone()
    };
    let absorbed = dist_k.map_modes(absorb_input_gain);
    let dynamics = dynamics_expectations(
        &absorbed,
        &state.sigma,
        &zero_input.upsilon,
        &zero_input.delta,
    )?;
    let u0 = DVector::zeros(n);
    let measurement = if y.is_empty() {
        MeasurementExpectations::empty(n)
    } else {
        measurement_expectations(
            &dist_next.map_modes(absorb_input_gain),
            &sigma_next,
            &state.lambda,
            &dynamics.ea,
            &dynamics.eb,
            &zero_input.upsilon,
        )?
    };
    let exps = StepExpectations {
        dynamics,
        measurement,
    };
    let predicted_measurement = predicted_measurement(&zero_input, &exps, &u0);
    let (gxy, gyy) = innovation_covariances(&zero_input, &sigma_next, &exps, &u0);
    let gains = gains(gxy, gyy, &exps);
    let next = correct(&zero_input, ex_next, sigma_next, &exps, &gains, y, &u0, &u0)?;
    Ok(StepOutput {
        state: next,
        gains,
        expectations: exps,
        predicted_measurement,
    })
}

/// Record of a closed-loop simulation: plant and estimator run together
/// because the plant input and the measurement both read the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    /// x_0 … x_horizon
    pub states: Vec<DVector<f64>>,
    /// x̂_0 … x̂_horizon
    pub estimates: Vec<DVector<f64>>,
    /// y_1 … y_horizon
    pub measurements: Vec<DVector<f64>>,
    /// Filter state after each step, starting with the initial one.
    pub filter_states: Vec<FilterState>,
}

/// Simulates `spec` for `horizon` steps with `estimator` in the loop.
///
/// `estimator(state, y_{k+1}, k)` must return the state at `k + 1`. The
/// plant input is `x̂_k` under a feedback policy and the scheduled input
/// otherwise.
pub fn simulate_closed_loop<E>(
    spec: &SystemSpec,
    horizon: usize,
    seed: u64,
    initial: FilterState,
    mut estimator: E,
) -> Result<ClosedLoopRun>
where
    E: FnMut(&FilterState, &DVector<f64>, usize) -> Result<FilterState>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = draw_initial_state(spec, &mut rng);
    let mut state = initial;
    let mut mode = spec.mode_law.distribution(0).sample(&mut rng).clone();
    let mut run = ClosedLoopRun {
        states: alloc::vec![x.clone()],
        estimates: alloc::vec![state.x_hat.clone()],
        measurements: Vec::with_capacity(horizon),
        filter_states: alloc::vec![state.clone()],
    };
    for k in 0..horizon {
        let u = match spec.input {
            InputPolicy::FeedbackEstimate => state.x_hat.clone(),
            _ => spec.input_at(k, mode.input_dim()),
        };
        let w = standard_normal_vector(mode.process_noise_dim(), &mut rng);
        x = step_state(&x, &mode, &u, &w)?;
        mode = spec.mode_law.distribution(k + 1).sample(&mut rng).clone();
        let v = standard_normal_vector(mode.measurement_noise_dim(), &mut rng);
        let y = measure(&x, &mode, &v, &state.x_hat)?;
        state = estimator(&state, &y, k)?;
        run.states.push(x.clone());
        run.estimates.push(state.x_hat.clone());
        run.measurements.push(y);
        run.filter_states.push(state.clone());
    }
    Ok(run)
}

/// Filter state at time zero for `spec`.
pub fn init_for(spec: &SystemSpec) -> Result<FilterState> {
    let p = spec.mode_law.distribution(0).input_dim();
    let u0 = match spec.input {
        InputPolicy::FeedbackEstimate => spec.x0_mean.clone(),
        _ => spec.input_at(0, p),
    };
    init(&spec.x0_mean, &spec.p0, &u0)
}

/// One step of the LMMSE filter for `spec`, dispatching on the input policy.
///
/// Feedback inputs go through [`update_closed_loop`].
pub fn filter_step(
    spec: &SystemSpec,
    state: &FilterState,
    y: &DVector<f64>,
) -> Result<FilterState> {
    let k = state.k;
    let dist_k = spec.mode_law.distribution(k);
    let dist_next = spec.mode_law.distribution(k + 1);
    match spec.input {
        InputPolicy::FeedbackEstimate => {
            update_closed_loop(state, y, &dist_k, &dist_next).map(|o| o.state)
        }
        _ => {
            let p = dist_k.input_dim();
            let u = spec.input_at(k, p);
            let u_next = spec.input_at(k + 1, p);
            update(state, y, &u, &u_next, &dist_k, &dist_next)
        }
    }
}

/// Runs the filter over a recorded measurement sequence `y_1 … y_T`.
pub fn run_filter(spec: &SystemSpec, measurements: &[DVector<f64>]) -> Result<Vec<FilterState>> {
    let mut state = init_for(spec)?;
    let mut out = Vec::with_capacity(measurements.len() + 1);
    out.push(state.clone());
    for y in measurements {
        state = filter_step(spec, &state, y)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Feeds `u_k = x̂_k` as if it were a known input, through the
/// deterministic-input recursion.
pub fn run_feedback_as_known_input(
    spec: &SystemSpec,
    measurements: &[DVector<f64>],
) -> Result<Vec<FilterState>> {
    let mut state = init(&spec.x0_mean, &spec.p0, &spec.x0_mean)?;
    let mut out = Vec::with_capacity(measurements.len() + 1);
    out.push(state.clone());
    for y in measurements {
        let k = state.k;
        let dist_k = spec.mode_law.distribution(k);
        let dist_next = spec.mode_law.distribution(k + 1);
        let u = state.x_hat.clone();
        let placeholder = DVector::zeros(u.len());
        let next = update(&state, y, &u, &placeholder, &dist_k, &dist_next)?;
        let x_hat = next.x_hat.clone();
        state = next.with_input(&x_hat);
        out.push(state.clone());
    }
    Ok(out)
}

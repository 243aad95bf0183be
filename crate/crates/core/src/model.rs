//! Jump-linear system with white random modes and estimate feedback:
//!
//! ```text
//! x[k+1] = A[k] x[k] + B[k] u[k] + C[k] w[k]
//! y[k]   = H[k] x[k] + G[k] v[k] + F[k] x̂[k-1]
//! ```
//!
//! The mode `{A, B, C, H, G, F}` is drawn independently at every step from a
//! finitely supported distribution.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{is_symmetric, min_eigenvalue, psd_sqrt};

/// Tolerance on the sum of atom weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One joint draw of the six system matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRealization {
    /// n×n state transition.
    pub a: DMatrix<f64>,
    /// n×p input gain.
    pub b: DMatrix<f64>,
    /// n×q process-noise shaping.
    pub c: DMatrix<f64>,
    /// m×n observation.
    pub h: DMatrix<f64>,
    /// m×r measurement-noise shaping.
    pub g: DMatrix<f64>,
    /// m×n estimate-feedback observation term.
    pub f: DMatrix<f64>,
}

impl ModeRealization {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        h: DMatrix<f64>,
        g: DMatrix<f64>,
        f: DMatrix<f64>,
    ) -> Result<Self> {
        let mode = Self { a, b, c, h, g, f };
        let problems = mode.violations();
        if problems.is_empty() {
            Ok(mode)
        } else {
            Err(Error::InvalidDistribution(join(&problems)))
        }
    }

    /// A mode with no measurement rows (`m = 0`), useful for dynamics-only steps.
    pub fn dynamics_only(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(
            a,
            b,
            c,
            DMatrix::zeros(0, n),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, n),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn process_noise_dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn measurement_noise_dim(&self) -> usize {
        self.g.ncols()
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.a.nrows();
        if !self.a.is_square() {
            out.push(Violation::StateDims(format!(
                "A is {}x{}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.b.nrows() != n || self.c.nrows() != n {
            out.push(Violation::StateDims(format!(
                "A, B, C row counts {}, {}, {}",
                n,
                self.b.nrows(),
                self.c.nrows()
            )));
        }
        if self.h.ncols() != n || self.f.ncols() != n {
            out.push(Violation::StateDims(format!(
                "A, H, F column counts {}, {}, {}",
                self.a.ncols(),
                self.h.ncols(),
                self.f.ncols()
            )));
        }
        let m = self.h.nrows();
        if self.g.nrows() != m || self.f.nrows() != m {
            out.push(Violation::MeasurementDims(format!(
                "H, G, F row counts {}, {}, {}",
                m,
                self.g.nrows(),
                self.f.nrows()
            )));
        }
        out
    }
}

/// A single invariant violation reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    NegativeWeight { atom: usize, weight: f64 },
    WeightSum(f64),
    StateDims(String),
    MeasurementDims(String),
    InconsistentAtoms(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "distribution has no atoms"),
            Violation::NegativeWeight { atom, weight } => {
                write!(f, "atom {atom} has weight {weight} outside [0, 1]")
            }
            Violation::WeightSum(s) => write!(f, "weights sum to {s}"),
            Violation::StateDims(s) => write!(f, "state dims differ: {s}"),
            Violation::MeasurementDims(s) => write!(f, "measurement dims differ: {s}"),
            Violation::InconsistentAtoms(s) => write!(f, "atoms disagree: {s}"),
        }
    }
}

fn join(v: &[Violation]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push_str("; ");
        }
        s.push_str(&format!("{x}"));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub mode: ModeRealization,
}

/// Finitely supported law of the mode at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDistribution {
    atoms: Vec<Atom>,
}

impl ModeDistribution {
    /// Builds a distribution, rejecting it if [`validate`] reports anything.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let dist = Self { atoms };
        let problems = validate(&dist);
        if problems.is_empty() {
            Ok(dist)
        } else {
            Err(Error::InvalidDistribution(join(&problems)))
        }
    }

    /// Skips validation; pair with [`validate`] when the input is untrusted.
    pub fn from_atoms_unchecked(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn deterministic(mode: ModeRealization) -> Self {
        Self {
            atoms: alloc::vec![Atom { weight: 1.0, mode }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.atoms[0].mode.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.atoms[0].mode.input_dim()
    }

    pub fn measurement_dim(&self) -> usize {
        self.atoms[0].mode.measurement_dim()
    }

    /// Index of the atom selected by a uniform variate `u ∈ [0, 1)`.
    pub fn index_for_uniform(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, atom) in self.atoms.iter().enumerate() {
            acc += atom.weight;
            if u < acc {
                return i;
            }
        }
        self.atoms.len() - 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &ModeRealization {
        let u: f64 = rng.random();
        &self.atoms[self.index_for_uniform(u)].mode
    }

    /// Exact weighted sum `Σ wᵢ f(modeᵢ)`.
    pub fn expect<F>(&self, f: F) -> DMatrix<f64>
    where
        F: Fn(&ModeRealization) -> DMatrix<f64>,
    {
        let mut it = self.atoms.iter();
        let first = it.next().expect("non-empty distribution");
        let mut acc = f(&first.mode) * first.weight;
        for atom in it {
            acc += f(&atom.mode) * atom.weight;
        }
        acc
    }

    /// Applies `f` to every atom, keeping the weights.
    pub fn map_modes<F>(&self, f: F) -> Self
    where
        F: Fn(&ModeRealization) -> ModeRealization,
    {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    weight: a.weight,
                    mode: f(&a.mode),
                })
                .collect(),
        }
    }
}

/// Returns every invariant violation of `dist`; an empty list means valid.
pub fn validate(dist: &ModeDistribution) -> Vec<Violation> {
    let mut out = Vec::new();
    if dist.atoms.is_empty() {
        out.push(Violation::Empty);
        return out;
    }
    let mut sum = 0.0;
    for (i, atom) in dist.atoms.iter().enumerate() {
        if !(0.0..=1.0).contains(&atom.weight) {
            out.push(Violation::NegativeWeight {
                atom: i,
                weight: atom.weight,
            });
        }
        sum += atom.weight;
        out.extend(atom.mode.violations());
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        out.push(Violation::WeightSum(sum));
    }
    let first = &dist.atoms[0].mode;
    for (i, atom) in dist.atoms.iter().enumerate().skip(1) {
        let m = &atom.mode;
        if m.state_dim() != first.state_dim()
            || m.input_dim() != first.input_dim()
            || m.process_noise_dim() != first.process_noise_dim()
        {
            out.push(Violation::InconsistentAtoms(format!(
                "atom {i} dynamics shape differs from atom 0"
            )));
        }
        if m.measurement_dim() != first.measurement_dim()
            || m.measurement_noise_dim() != first.measurement_noise_dim()
        {
            out.push(Violation::MeasurementDims(format!(
                "atom {i} has m={}, atom 0 has m={}",
                m.measurement_dim(),
                first.measurement_dim()
            )));
        }
    }
    out
}

/// `A·x + B·u + C·w`.
pub fn step_state(
    x: &DVector<f64>,
    mode: &ModeRealization,
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("step_state x", mode.a.ncols(), x.len())?;
    check_dim("step_state u", mode.b.ncols(), u.len())?;
    check_dim("step_state w", mode.c.ncols(), w.len())?;
    Ok(&mode.a * x + &mode.b * u + &mode.c * w)
}

/// `H·x + G·v + F·x̂_prev`.
pub fn measure(
    x: &DVector<f64>,
    mode: &ModeRealization,
    v: &DVector<f64>,
    x_hat_prev: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("measure x", mode.h.ncols(), x.len())?;
    check_dim("measure v", mode.g.ncols(), v.len())?;
    check_dim("measure x_hat_prev", mode.f.ncols(), x_hat_prev.len())?;
    Ok(&mode.h * x + &mode.g * v + &mode.f * x_hat_prev)
}

/// Produces the mode law for each time index.
pub trait ModeLaw: Send + Sync {
    fn distribution(&self, k: usize) -> ModeDistribution;
}

/// The same distribution at every step.
#[derive(Debug, Clone)]
pub struct StationaryLaw(pub ModeDistribution);

impl ModeLaw for StationaryLaw {
    fn distribution(&self, _k: usize) -> ModeDistribution {
        self.0.clone()
    }
}

impl<F> ModeLaw for F
where
    F: Fn(usize) -> ModeDistribution + Send + Sync,
{
    fn distribution(&self, k: usize) -> ModeDistribution {
        self(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputPolicy {
    /// Known input sequence `u_0, u_1, …`.
    Deterministic(Vec<DVector<f64>>),
    /// `u_k = x̂_k`, the latest LMMSE estimate.
    FeedbackEstimate,
    /// `u_k ≡ 0`.
    Zero,
}

#[derive(Clone)]
pub struct SystemSpec {
    pub x0_mean: DVector<f64>,
    /// Covariance of `x_0`.
    pub p0: DMatrix<f64>,
    pub input: InputPolicy,
    pub mode_law: Arc<dyn ModeLaw>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("x0_mean", &self.x0_mean)
            .field("p0", &self.p0)
            .field("input", &self.input)
            .finish_non_exhaustive()
    }
}

impl SystemSpec {
    pub fn state_dim(&self) -> usize {
        self.x0_mean.len()
    }

    /// Input at step `k`; zero-length when the system has no input.
    pub fn input_at(&self, k: usize, p: usize) -> DVector<f64> {
        match &self.input {
            InputPolicy::Deterministic(seq) if p > 0 => seq[k].clone(),
            InputPolicy::FeedbackEstimate => panic!("feedback input depends on the estimate"),
            _ => DVector::zeros(p),
        }
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let n = self.state_dim();
        check_dim("P0 rows", n, self.p0.nrows())?;
        check_dim("P0 cols", n, self.p0.ncols())?;
        if !is_symmetric(&self.p0, 1e-12) {
            return Err(Error::NotSymmetric("P0"));
        }
        let lmin = min_eigenvalue(&self.p0);
        if lmin < -1e-10 * self.p0.amax().max(1.0) {
            return Err(Error::NotPsd("P0", lmin));
        }
        if let InputPolicy::Deterministic(seq) = &self.input {
            let p = self.mode_law.distribution(0).input_dim();
            if p > 0 && seq.len() < horizon + 1 {
                return Err(Error::InvalidParameter(format!(
                    "input sequence has {} entries, horizon {} needs {}",
                    seq.len(),
                    horizon,
                    horizon + 1
                )));
            }
        }
        Ok(())
    }
}

/// Independent standard normal vector.
pub fn standard_normal_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// Draws `x_0 ~ N(x̄0, P0)`.
pub fn draw_initial_state<R: Rng + ?Sized>(spec: &SystemSpec, rng: &mut R) -> DVector<f64> {
    let z = standard_normal_vector(spec.state_dim(), rng);
    &spec.x0_mean + psd_sqrt(&spec.p0) * z
}

/// One simulated trajectory with every random draw kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_0 … x_horizon`.
    pub states: Vec<DVector<f64>>,
    /// Mode drawn at each step `0 … horizon`.
    pub modes: Vec<ModeRealization>,
    /// `w_0 … w_{horizon-1}`.
    pub process_noise: Vec<DVector<f64>>,
    /// `v_0 … v_horizon` (`v_0` is drawn but no measurement exists at step 0).
    pub measurement_noise: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// `y_k` given the estimate of the previous step.
    pub fn measurement(&self, k: usize, x_hat_prev: &DVector<f64>) -> Result<DVector<f64>> {
        measure(
            &self.states[k],
            &self.modes[k],
            &self.measurement_noise[k],
            x_hat_prev,
        )
    }
}

/// Simulates the state recursion for a deterministic-input system.
///
/// `u_k = x̂_k` couples the plant to an estimator, so a feedback policy is
/// rejected here; run it through the closed-loop driver in `filter` instead.
pub fn simulate(spec: &SystemSpec, horizon: usize, seed: u64) -> Result<Trajectory> {
    if matches!(spec.input, InputPolicy::FeedbackEstimate) {
        return Err(Error::InvalidParameter(String::from(
            "feedback inputs need an estimator in the loop",
        )));
    }
    spec.validate(horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = draw_initial_state(spec, &mut rng);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut modes = Vec::with_capacity(horizon + 1);
    let mut process_noise = Vec::with_capacity(horizon);
    let mut measurement_noise = Vec::with_capacity(horizon + 1);
    states.push(x0);
    for k in 0..=horizon {
        let dist = spec.mode_law.distribution(k);
        let mode = dist.sample(&mut rng).clone();
        let v = standard_normal_vector(mode.measurement_noise_dim(), &mut rng);
        measurement_noise.push(v);
        if k < horizon {
            let w = standard_normal_vector(mode.process_noise_dim(), &mut rng);
            let u = spec.input_at(k, mode.input_dim());
            let next = step_state(&states[k], &mode, &u, &w)?;
            states.push(next);
            process_noise.push(w);
        }
        modes.push(mode);
    }
    Ok(Trajectory {
        states,
        modes,
        process_noise,
        measurement_noise,
    })
}

//! Monte-Carlo comparison of the LMMSE tracker with NN and PDA in clutter.

use std::fmt;
use std::str::FromStr;

use modal_lmmse_core::baselines::{kf_predict, nn_step, pda_step, KfModel, KfState};
use modal_lmmse_core::clutter::{assemble_scan, ClutterScenario, ScanDraws, Window};
use modal_lmmse_core::filter::{init, FilterState};
use modal_lmmse_core::linalg::psd_sqrt;
use modal_lmmse_core::model::standard_normal_vector;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Worker-count cap for the run pool.
pub const THREADS_ENV: &str = "MODAL_LMMSE_THREADS";

/// Consecutive out-of-gate detections that count as a lost track.
pub const LOSS_STREAK: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error("{filter} failed at rho={rho}, run {run}, step {step}: {source}")]
    Filter {
        filter: FilterKind,
        rho: f64,
        run: usize,
        step: usize,
        source: modal_lmmse_core::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lmmse,
    Nn,
    Pda,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Lmmse, FilterKind::Nn, FilterKind::Pda];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Lmmse => "lmmse",
            FilterKind::Nn => "nn",
            FilterKind::Pda => "pda",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lmmse" => Ok(FilterKind::Lmmse),
            "nn" => Ok(FilterKind::Nn),
            "pda" => Ok(FilterKind::Pda),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub horizon: usize,
    pub runs: usize,
    pub densities: Vec<f64>,
    /// Target and sensor; `params.rho` is replaced by each swept density.
    pub scenario: ClutterScenario,
    pub x0_mean: DVector<f64>,
    pub p0: DMatrix<f64>,
    pub seed: u64,
    pub filters: Vec<FilterKind>,
}

impl ExperimentConfig {
    /// 400 steps, 1000 runs, `x̄0 = 0`, `P0 = 30 I`, all three filters.
    pub fn reference(densities: Vec<f64>) -> Self {
        Self {
            horizon: 400,
            runs: 1000,
            densities,
            scenario: ClutterScenario::reference(0.0),
            x0_mean: DVector::zeros(2),
            p0: DMatrix::identity(2, 2) * 30.0,
            seed: 1,
            filters: FilterKind::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if self.densities.is_empty() {
            return bad("no clutter densities".into());
        }
        if self.filters.is_empty() {
            return bad("no filters selected".into());
        }
        let n = self.scenario.a.nrows();
        if self.scenario.a.ncols() != n
            || self.scenario.c.nrows() != n
            || self.scenario.params.h_nom.ncols() != n
            || self.x0_mean.len() != n
            || self.p0.shape() != (n, n)
        {
            return bad(format!(
                "inconsistent state dimension (A is {}x{})",
                n,
                self.scenario.a.ncols()
            ));
        }
        for &rho in &self.densities {
            let mut params = self.scenario.params.clone();
            params.rho = rho;
            params
                .validate()
                .map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    fn scenario_at(&self, rho: f64) -> ClutterScenario {
        let mut sc = self.scenario.clone();
        sc.params.rho = rho;
        sc
    }
}

/// Gate outcome of the target measurement at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateRecord {
    pub step: usize,
    pub detected: bool,
    pub in_gate: bool,
}

/// Incremental form of [`detect_track_loss`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LossTracker {
    streak: usize,
    loss: Option<usize>,
}

impl LossTracker {
    /// Feeds one step; returns the loss step once it has occurred.
    pub fn observe(&mut self, record: GateRecord) -> Option<usize> {
        if self.loss.is_none() && record.detected {
            if record.in_gate {
                self.streak = 0;
            } else {
                self.streak += 1;
                if self.streak >= LOSS_STREAK {
                    self.loss = Some(record.step);
                }
            }
        }
        self.loss
    }

    pub fn loss(&self) -> Option<usize> {
        self.loss
    }
}

/// Step of the third consecutive detected-but-outside-the-gate target
/// measurement. Missed detections neither extend nor break the streak.
pub fn detect_track_loss(history: &[GateRecord]) -> Option<usize> {
    let mut tracker = LossTracker::default();
    for &r in history {
        if let Some(step) = tracker.observe(r) {
            return Some(step);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub filter: FilterKind,
    pub loss_time: Option<usize>,
    /// Squared position error at steps 1..=truncation_time.
    pub squared_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub filters: Vec<FilterRun>,
    /// First loss over all filters, or the horizon.
    pub truncation_time: usize,
}

impl RunRecord {
    pub fn rmse(&self, i: usize) -> f64 {
        let e = &self.filters[i].squared_errors;
        (e.iter().sum::<f64>() / e.len() as f64).sqrt()
    }

    pub fn loss_or_horizon(&self, i: usize, horizon: usize) -> usize {
        self.filters[i].loss_time.unwrap_or(horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterSummary {
    pub filter: FilterKind,
    pub mean_rmse: f64,
    pub rmse_se: f64,
    /// Runs without a loss count as the horizon.
    pub mean_loss_time: f64,
    pub loss_time_se: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityResult {
    pub rho: f64,
    pub filters: Vec<FilterSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    pub seed: u64,
    pub horizon: usize,
    pub runs: usize,
    pub densities: Vec<DensityResult>,
}

impl AggregateResult {
    pub fn summary(&self, rho_index: usize, filter: FilterKind) -> Option<&FilterSummary> {
        self.densities
            .get(rho_index)?
            .filters
            .iter()
            .find(|f| f.filter == filter)
    }
}

/// Random stream of one run, a function of the base seed and the run's
/// position in the sweep only.
pub fn run_rng(seed: u64, rho_index: usize, run_index: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(rho_index as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(run_index as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

enum Tracker {
    Lmmse(FilterState),
    Nn(KfState),
    Pda(KfState),
}

/// What one filter saw and did at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStepView {
    pub filter: FilterKind,
    pub estimate: DVector<f64>,
    pub detections: usize,
    pub window: Window,
    /// Frobenius norm of the gain applied (zero when nothing was gated).
    pub gain_norm: f64,
    pub lost: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepView {
    pub step: usize,
    pub truth: DVector<f64>,
    pub filters: Vec<FilterStepView>,
}

struct Lane {
    kind: FilterKind,
    tracker: Tracker,
    loss: LossTracker,
    squared_errors: Vec<f64>,
}

impl Lane {
    fn estimate(&self) -> &DVector<f64> {
        match &self.tracker {
            Tracker::Lmmse(s) => &s.x_hat,
            Tracker::Nn(s) | Tracker::Pda(s) => &s.x,
        }
    }
}

/// Simulates one run. With `stop_at_loss` a filter is retired at its loss
/// step; otherwise every filter runs the full horizon. `observe` sees every
/// step.
pub fn drive_run<O>(
    config: &ExperimentConfig,
    rho_index: usize,
    run_index: usize,
    stop_at_loss: bool,
    mut observe: O,
) -> Result<RunRecord, BenchError>
where
    O: FnMut(&StepView),
{
    let rho = config.densities[rho_index];
    let scenario = config.scenario_at(rho);
    let params = &scenario.params;
    let kf_model = KfModel::from_scenario(&scenario);
    let mut rng = run_rng(config.seed, rho_index, run_index);

    let n = scenario.state_dim();
    let mut x = &config.x0_mean + psd_sqrt(&config.p0) * standard_normal_vector(n, &mut rng);
    let lmmse0 = init(&config.x0_mean, &config.p0, &DVector::zeros(0)).map_err(|source| {
        BenchError::Filter {
            filter: FilterKind::Lmmse,
            rho,
            run: run_index,
            step: 0,
            source,
        }
    })?;
    let kf0 = KfState::new(config.x0_mean.clone(), config.p0.clone());
    let mut lanes: Vec<Lane> = config
        .filters
        .iter()
        .map(|&kind| Lane {
            kind,
            tracker: match kind {
                FilterKind::Lmmse => Tracker::Lmmse(lmmse0.clone()),
                FilterKind::Nn => Tracker::Nn(kf0.clone()),
                FilterKind::Pda => Tracker::Pda(kf0.clone()),
            },
            loss: LossTracker::default(),
            squared_errors: Vec::with_capacity(config.horizon),
        })
        .collect();

    let q = scenario.c.ncols();
    for step in 1..=config.horizon {
        if stop_at_loss && lanes.iter().all(|l| l.loss.loss().is_some()) {
            break;
        }
        let w = standard_normal_vector(q, &mut rng);
        x = &scenario.a * &x + &scenario.c * w;
        let draws = ScanDraws::sample(&mut rng);
        let mut views = Vec::with_capacity(lanes.len());

        for lane in lanes.iter_mut() {
            if stop_at_loss && lane.loss.loss().is_some() {
                continue;
            }
            let fail = |source| BenchError::Filter {
                filter: lane.kind,
                rho,
                run: run_index,
                step,
                source,
            };
            let (window, scan, gain_norm) = match &mut lane.tracker {
                Tracker::Lmmse(state) => {
                    let window = scenario.lmmse_window(state).map_err(fail)?;
                    let scan = assemble_scan(&x, &window, params, &draws);
                    let out = scenario.lmmse_step(state, &scan).map_err(fail)?;
                    *state = out.state;
                    (window, scan, out.gains.k.norm())
                }
                Tracker::Nn(state) | Tracker::Pda(state) => {
                    let window = kf_model.window(state, params).map_err(fail)?;
                    let scan = assemble_scan(&x, &window, params, &draws);
                    let predicted = kf_predict(state, &kf_model);
                    let gain = if scan.is_empty() {
                        0.0
                    } else {
                        (&predicted.p * kf_model.h.transpose()).norm()
                            / kf_model.innovation_variance(&predicted)
                    };
                    *state = if lane.kind == FilterKind::Nn {
                        nn_step(state, &scan, &kf_model)
                    } else {
                        pda_step(state, &scan, &kf_model, params)
                    }
                    .map_err(fail)?;
                    (window, scan, gain)
                }
            };
            let err = lane.estimate()[0] - x[0];
            lane.squared_errors.push(err * err);
            lane.loss.observe(GateRecord {
                step,
                detected: scan.truth.detected,
                in_gate: scan.truth.in_gate,
            });
            views.push(FilterStepView {
                filter: lane.kind,
                estimate: lane.estimate().clone(),
                detections: scan.len(),
                window,
                gain_norm,
                lost: lane.loss.loss().is_some(),
            });
        }
        observe(&StepView {
            step,
            truth: x.clone(),
            filters: views,
        });
    }

    let truncation_time = lanes
        .iter()
        .map(|l| l.loss.loss().unwrap_or(config.horizon))
        .min()
        .unwrap_or(config.horizon);
    let filters = lanes
        .into_iter()
        .map(|mut l| {
            l.squared_errors.truncate(truncation_time);
            FilterRun {
                filter: l.kind,
                loss_time: l.loss.loss(),
                squared_errors: l.squared_errors,
            }
        })
        .collect();
    Ok(RunRecord {
        filters,
        truncation_time,
    })
}

pub fn simulate_run(
    config: &ExperimentConfig,
    rho_index: usize,
    run_index: usize,
) -> Result<RunRecord, BenchError> {
    drive_run(config, rho_index, run_index, true, |_| {})
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Summaries of a set of runs at one density, in `config.filters` order.
pub fn summarize(config: &ExperimentConfig, records: &[RunRecord]) -> Vec<FilterSummary> {
    config
        .filters
        .iter()
        .enumerate()
        .map(|(i, &filter)| {
            let (mean_rmse, rmse_se) = mean_and_se(records.iter().map(|r| r.rmse(i)));
            let (mean_loss_time, loss_time_se) = mean_and_se(
                records
                    .iter()
                    .map(|r| r.loss_or_horizon(i, config.horizon) as f64),
            );
            FilterSummary {
                filter,
                mean_rmse,
                rmse_se,
                mean_loss_time,
                loss_time_se,
                runs: records.len(),
            }
        })
        .collect()
}

fn thread_pool() -> Result<rayon::ThreadPool, BenchError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            builder = builder.num_threads(n);
        }
    }
    builder
        .build()
        .map_err(|e| BenchError::ThreadPool(e.to_string()))
}

/// Runs the whole sweep. Runs execute in parallel; the result depends only
/// on the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateResult, BenchError> {
    config.validate()?;
    let pool = thread_pool()?;
    let mut densities = Vec::with_capacity(config.densities.len());
    for (rho_index, &rho) in config.densities.iter().enumerate() {
        let records: Vec<RunRecord> = pool.install(|| {
            (0..config.runs)
                .into_par_iter()
                .map(|run| simulate_run(config, rho_index, run))
                .collect::<Result<_, _>>()
        })?;
        log::info!("rho={rho}: {} runs done", records.len());
        densities.push(DensityResult {
            rho,
            filters: summarize(config, &records),
        });
    }
    Ok(AggregateResult {
        seed: config.seed,
        horizon: config.horizon,
        runs: config.runs,
        densities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize, detected: bool, in_gate: bool) -> GateRecord {
        GateRecord {
            step,
            detected,
            in_gate,
        }
    }

    #[test]
    fn loss_on_third_consecutive_exit() {
        let h = [
            rec(5, true, false),
            rec(6, true, false),
            rec(7, true, false),
        ];
        assert_eq!(detect_track_loss(&h), Some(7));
    }

    #[test]
    fn streak_resets_when_back_in_gate() {
        let h: Vec<_> = [false, false, true, false, false, false]
            .iter()
            .enumerate()
            .map(|(i, &g)| rec(i + 1, true, g))
            .collect();
        assert_eq!(detect_track_loss(&h), Some(6));
    }

    #[test]
    fn in_gate_never_loses() {
        let h: Vec<_> = (1..100).map(|k| rec(k, true, true)).collect();
        assert_eq!(detect_track_loss(&h), None);
    }

    #[test]
    fn missed_detections_do_not_touch_the_streak() {
        let h = [
            rec(1, true, false),
            rec(2, false, true),
            rec(3, true, false),
            rec(4, false, false),
            rec(5, true, false),
        ];
        assert_eq!(detect_track_loss(&h), Some(5));
    }

    fn tiny(densities: Vec<f64>) -> ExperimentConfig {
        let mut c = ExperimentConfig::reference(densities);
        c.runs = 4;
        c.horizon = 30;
        c
    }

    #[test]
    fn repeatable() {
        let c = tiny(vec![0.5, 2.0]);
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
    }

    #[test]
    fn run_stream_depends_on_position_only() {
        let c = tiny(vec![0.5, 2.0]);
        let a = simulate_run(&c, 1, 3).unwrap();
        let mut single = c.clone();
        single.runs = 10;
        assert_eq!(a, simulate_run(&single, 1, 3).unwrap());
    }

    #[test]
    fn single_step_horizon() {
        let mut c = tiny(vec![1.0]);
        c.horizon = 1;
        let r = run_experiment(&c).unwrap();
        for f in &r.densities[0].filters {
            assert_eq!(f.mean_loss_time, 1.0);
            assert!(f.mean_rmse >= 0.0);
        }
    }

    #[test]
    fn clean_scene_makes_filters_agree() {
        let mut c = tiny(vec![0.0]);
        c.runs = 1;
        c.horizon = 400;
        c.scenario.params.p_d = 1.0;
        let rec = simulate_run(&c, 0, 0).unwrap();
        let r0 = rec.rmse(0);
        assert!((rec.rmse(1) - r0).abs() < 1e-6 && (rec.rmse(2) - r0).abs() < 1e-6);
    }

    #[test]
    fn truncation_is_first_loss() {
        let mut c = tiny(vec![4.0]);
        c.horizon = 400;
        c.runs = 8;
        for run in 0..c.runs {
            let rec = simulate_run(&c, 0, run).unwrap();
            let first = (0..3)
                .map(|i| rec.loss_or_horizon(i, c.horizon))
                .min()
                .unwrap();
            assert_eq!(rec.truncation_time, first);
            assert!(rec.filters.iter().all(|f| f.squared_errors.len() == first));
        }
    }

    #[test]
    fn rejects_empty_sweep() {
        let c = tiny(vec![]);
        assert!(matches!(
            run_experiment(&c),
            Err(BenchError::InvalidConfig(_))
        ));
    }

    #[test]
    fn filter_names_round_trip() {
        for f in FilterKind::ALL {
            assert_eq!(f.name().parse::<FilterKind>().unwrap(), f);
        }
        assert_eq!("kalman".parse::<FilterKind>(), Err("kalman".to_string()));
    }
}

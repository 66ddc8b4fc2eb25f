//! Ensemble scenarios, per-iteration quartiles and scaling fits.
//!
//! Every trial draws a random true state, an initial guess, and then runs SPSA
//! against a shot-noise oracle. Trials are independent: trial `i` of qubit
//! count `n` uses a ChaCha8 stream keyed by `(base_seed, n)` with stream
//! number `i`, so any single trial can be reproduced in isolation and the
//! ensemble result does not depend on scheduling or thread count.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SgqtError};
use crate::fit::{fit_power_law, quartiles, ScalingFit, SlopeConvention};
use crate::measurement::{FidelityOracle, OracleConfig, Shots, TrueStateModel};
use crate::spsa::{self, GainSchedule, Trajectory};
use crate::state::{
    haar_random_state, perturb_params, physical_dim, Parametrization, WClassParams, MAX_QUBITS,
};

/// Largest register run without `allow_large`.
pub const DESK_MAX_QUBITS_FULL: usize = 6;
pub const DESK_MAX_QUBITS_W: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// One qubit, Haar-random pure states.
    SingleQubit,
    /// Several qubits, Haar-random pure states, full parametrization.
    MultiQubit,
    /// Haar-random W-class state under depolarizing noise; W-class estimates.
    WDepolarized,
    /// Pure W-class states measured against Gaussian-perturbed targets.
    NoisyMeasurement,
}

impl Scenario {
    pub fn parametrization(self) -> Parametrization {
        match self {
            Scenario::SingleQubit | Scenario::MultiQubit => Parametrization::Full,
            Scenario::WDepolarized | Scenario::NoisyMeasurement => Parametrization::WClass,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SingleQubit => "single-qubit",
            Scenario::MultiQubit => "multi-qubit",
            Scenario::WDepolarized => "w-depolarized",
            Scenario::NoisyMeasurement => "noisy-measurement",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the initial guess is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitMode {
    /// An independent random state from the same class as the truth.
    Haar,
    /// The true state's parameters plus Gaussian noise of this std per coordinate.
    Perturbed(f64),
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitMode::Haar => f.write_str("haar"),
            InitMode::Perturbed(std) => write!(f, "perturbed:{std}"),
        }
    }
}

impl FromStr for InitMode {
    type Err = SgqtError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("haar") {
            return Ok(InitMode::Haar);
        }
        if let Some(rest) = s.strip_prefix("perturbed:") {
            return match rest.parse::<f64>() {
                Ok(std) if std >= 0.0 && std.is_finite() => Ok(InitMode::Perturbed(std)),
                _ => Err(SgqtError::Config(format!(
                    "perturbation std must be a finite number >= 0, got {rest:?}"
                ))),
            };
        }
        Err(SgqtError::Config(format!(
            "init mode must be \"haar\" or \"perturbed:STD\", got {s:?}"
        )))
    }
}

impl TryFrom<String> for InitMode {
    type Error = SgqtError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitMode> for String {
    fn from(m: InitMode) -> String {
        m.to_string()
    }
}

/// Everything needed to reproduce an ensemble run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n_qubits: Vec<usize>,
    #[serde(rename = "shots_N")]
    pub shots: Shots,
    #[serde(rename = "iterations_k")]
    pub iterations: u64,
    pub n_trials: usize,
    pub gains: GainSchedule,
    pub init_mode: InitMode,
    pub depolarizing_p: f64,
    pub measurement_noise_std: f64,
    pub base_seed: u64,
    /// Inclusive `k` range for γ fits; `None` means the last decade.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    /// Iteration counts at which η is fitted; empty means `{k/10, k}`.
    #[serde(default)]
    pub eta_ks: Vec<u64>,
    /// Permit registers beyond the desk-scale caps.
    #[serde(default)]
    pub allow_large: bool,
}

impl ExperimentConfig {
    /// Parameter presets per scenario.
    ///
    /// Single qubit: `a=3, A=0, b=0.1`, `N=100`, `k=1000`, Haar start.
    /// Others: `a=0.3, A=1000, b=0.1`, `N=10^4`, `k=10^4`; the multi-qubit and
    /// depolarized runs start from the truth perturbed by 0.01, the noisy
    /// measurement run starts from a Haar-random W state.
    pub fn preset(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            n_qubits: vec![1],
            shots: Shots::Finite(100),
            iterations: 1000,
            n_trials: 100,
            gains: GainSchedule::single_qubit(),
            init_mode: InitMode::Haar,
            depolarizing_p: 0.0,
            measurement_noise_std: 0.0,
            base_seed: 0,
            fit_window: None,
            eta_ks: Vec::new(),
            allow_large: false,
        };
        let multi = Self {
            shots: Shots::Finite(10_000),
            iterations: 10_000,
            gains: GainSchedule::multi_qubit(),
            init_mode: InitMode::Perturbed(0.01),
            ..base.clone()
        };
        match scenario {
            Scenario::SingleQubit => base,
            // shot-noise-limited runs use the s = 1, t = 1/6 exponents
            Scenario::MultiQubit => Self {
                n_qubits: (1..=DESK_MAX_QUBITS_FULL).collect(),
                gains: GainSchedule::multi_qubit().asymptotic(),
                ..multi
            },
            Scenario::WDepolarized => Self {
                n_qubits: vec![2, 4, 6, 8],
                gains: GainSchedule::multi_qubit().asymptotic(),
                depolarizing_p: 0.05,
                ..multi
            },
            Scenario::NoisyMeasurement => Self {
                n_qubits: vec![2, 4, 6, 8],
                init_mode: InitMode::Haar,
                measurement_noise_std: 0.1,
                ..multi
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(SgqtError::Config(msg));
        if self.n_qubits.is_empty() {
            return err("n_qubits must list at least one register size".into());
        }
        let tag = self.scenario.parametrization();
        let (min, desk_max) = match tag {
            Parametrization::Full => (1, DESK_MAX_QUBITS_FULL),
            Parametrization::WClass => (2, DESK_MAX_QUBITS_W),
        };
        let max = if self.allow_large {
            MAX_QUBITS
        } else {
            desk_max
        };
        for &n in &self.n_qubits {
            if n < min || n > max {
                return err(format!(
                    "{} needs n_qubits in {min}..={max}, got {n}{}",
                    self.scenario,
                    if n > desk_max && !self.allow_large {
                        " (set allow_large for bigger registers)"
                    } else {
                        ""
                    }
                ));
            }
        }
        let mut sorted = self.n_qubits.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.n_qubits.len() {
            return err("n_qubits contains duplicates".into());
        }
        if self.scenario == Scenario::SingleQubit && self.n_qubits != [1] {
            return err("single-qubit scenario requires n_qubits = [1]".into());
        }
        if self.iterations == 0 {
            return err("iterations_k must be >= 1".into());
        }
        if self.n_trials == 0 {
            return err("n_trials must be >= 1".into());
        }
        if self.shots == Shots::Finite(0) {
            return err("shots_N must be positive".into());
        }
        self.gains.validate()?;
        if let InitMode::Perturbed(std) = self.init_mode {
            if !(std >= 0.0) || !std.is_finite() {
                return err(format!("init perturbation std must be >= 0, got {std}"));
            }
        }
        if !(0.0..=1.0).contains(&self.depolarizing_p) {
            return err(format!(
                "depolarizing_p must be in [0,1], got {}",
                self.depolarizing_p
            ));
        }
        if !(self.measurement_noise_std >= 0.0) || !self.measurement_noise_std.is_finite() {
            return err(format!(
                "measurement_noise_std must be >= 0, got {}",
                self.measurement_noise_std
            ));
        }
        if self.scenario != Scenario::WDepolarized && self.depolarizing_p != 0.0 {
            return err(format!(
                "depolarizing_p is only used by w-depolarized and must be 0 for {}",
                self.scenario
            ));
        }
        if self.scenario != Scenario::NoisyMeasurement && self.measurement_noise_std != 0.0 {
            return err(format!(
                "measurement_noise_std is only used by noisy-measurement and must be 0 for {}",
                self.scenario
            ));
        }
        if let Some((lo, hi)) = self.fit_window {
            if !(lo > 0.0 && lo < hi) {
                return err(format!(
                    "fit_window must satisfy 0 < lo < hi, got ({lo}, {hi})"
                ));
            }
        }
        if let Some(&k) = self.eta_ks.iter().find(|&&k| k == 0 || k > self.iterations) {
            return err(format!("eta_ks entry {k} outside 1..={}", self.iterations));
        }
        Ok(())
    }

    /// Human-readable notes about unusually expensive settings.
    pub fn warnings(&self) -> Vec<String> {
        let desk_max = match self.scenario.parametrization() {
            Parametrization::Full => DESK_MAX_QUBITS_FULL,
            Parametrization::WClass => DESK_MAX_QUBITS_W,
        };
        self.n_qubits
            .iter()
            .filter(|&&n| n > desk_max)
            .map(|n| format!("running {n} qubits exceeds the desk-scale cap of {desk_max}; expect long runtimes"))
            .collect()
    }

    /// γ fit window: the configured one or the last decade of iterations.
    pub fn gamma_window(&self) -> (f64, f64) {
        self.fit_window.unwrap_or_else(|| {
            let k = self.iterations as f64;
            ((k / 10.0).max(1.0), k)
        })
    }

    /// Iteration counts for η fits.
    pub fn eta_iterations(&self) -> Vec<u64> {
        if !self.eta_ks.is_empty() {
            return self.eta_ks.clone();
        }
        let mut ks = vec![(self.iterations / 10).max(1), self.iterations];
        ks.dedup();
        ks
    }

    /// Infidelity no pure estimate can beat for register size `n`.
    pub fn floor(&self, n_qubits: usize) -> f64 {
        if self.scenario == Scenario::WDepolarized {
            min_infidelity_depolarized(self.depolarizing_p, n_qubits)
        } else {
            0.0
        }
    }
}

/// The stream for trial `trial_index`: key = `base_seed ‖ n_qubits`, stream = trial index.
pub fn trial_rng(base_seed: u64, n_qubits: usize, trial_index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&base_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(n_qubits as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(trial_index);
    rng
}

/// One independent run: draw the truth, draw the start, run SPSA.
pub fn run_trial(cfg: &ExperimentConfig, n_qubits: usize, trial_index: u64) -> Result<Trajectory> {
    cfg.validate()?;
    if !cfg.n_qubits.contains(&n_qubits) {
        return Err(SgqtError::Config(format!(
            "n_qubits = {n_qubits} is not part of the configuration"
        )));
    }
    let mut rng = trial_rng(cfg.base_seed, n_qubits, trial_index);
    let (model, truth, haar_start) = match cfg.scenario.parametrization() {
        Parametrization::Full => {
            let truth = haar_random_state(n_qubits, &mut rng)?;
            let start = haar_random_state(n_qubits, &mut rng)?;
            (
                TrueStateModel::pure(truth.clone()),
                truth.to_params(),
                start.to_params(),
            )
        }
        Parametrization::WClass => {
            let truth = WClassParams::haar_random(n_qubits, &mut rng)?;
            let start = WClassParams::haar_random(n_qubits, &mut rng)?;
            (
                TrueStateModel::w_class(truth.clone(), cfg.depolarizing_p)?,
                truth.to_params(),
                start.to_params(),
            )
        }
    };
    let initial = match cfg.init_mode {
        InitMode::Haar => haar_start,
        InitMode::Perturbed(std) => perturb_params(&truth, std, &mut rng)?,
    };
    let oracle_cfg = OracleConfig::new(cfg.shots, cfg.measurement_noise_std)?;
    let mut oracle = FidelityOracle::new(model, oracle_cfg)?;
    spsa::run(initial, cfg.iterations, &mut oracle, &cfg.gains, &mut rng)
}

/// All trials for one register size, in trial-index order.
pub fn run_trials(cfg: &ExperimentConfig, n_qubits: usize) -> Result<Vec<Trajectory>> {
    (0..cfg.n_trials as u64)
        .into_par_iter()
        .map(|i| run_trial(cfg, n_qubits, i))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub k: u64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Per-iteration quartiles of the true infidelity across trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_qubits: usize,
    pub physical_dim: usize,
    pub n_trials: usize,
    /// Quartiles before the first iteration (`k = 0`).
    pub initial: SummaryRow,
    pub rows: Vec<SummaryRow>,
    pub total_shots: u64,
    /// Amount subtracted by [`rescale_infidelity`]; zero for raw summaries.
    pub floor: f64,
    /// Iterations at which a rescaled statistic fell below zero.
    pub below_floor: Vec<u64>,
}

impl EnsembleSummary {
    pub fn medians(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.median).collect()
    }

    pub fn ks(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.k as f64).collect()
    }

    pub fn median_at(&self, k: u64) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k).map(|r| r.median)
    }

    pub fn final_median(&self) -> f64 {
        self.rows.last().map_or(self.initial.median, |r| r.median)
    }
}

/// Reduces trajectories (all of equal length) to per-iteration quartiles.
pub fn summarize(
    n_qubits: usize,
    tag: Parametrization,
    trajectories: &[Trajectory],
) -> Result<EnsembleSummary> {
    let first = trajectories
        .first()
        .ok_or_else(|| SgqtError::Config("cannot summarize zero trials".into()))?;
    let len = first.len();
    if trajectories.iter().any(|t| t.len() != len) {
        return Err(SgqtError::Dimension(
            "trajectories have different lengths".into(),
        ));
    }
    let row = |k: u64, values: &[f64]| {
        let (q25, median, q75) = quartiles(values);
        SummaryRow {
            k,
            median,
            q25,
            q75,
        }
    };
    let initial: Vec<f64> = trajectories.iter().map(|t| t.initial_infidelity).collect();
    let mut column = vec![0.0; trajectories.len()];
    let rows = (0..len)
        .map(|i| {
            for (slot, t) in column.iter_mut().zip(trajectories) {
                *slot = t.records[i].infidelity;
            }
            row(first.records[i].k, &column)
        })
        .collect();
    Ok(EnsembleSummary {
        n_qubits,
        physical_dim: physical_dim(n_qubits, tag)?,
        n_trials: trajectories.len(),
        initial: row(0, &initial),
        rows,
        total_shots: trajectories.iter().map(|t| t.shots_used).sum(),
        floor: 0.0,
        below_floor: Vec::new(),
    })
}

/// Runs every trial for one register size and summarizes.
pub fn run_ensemble(cfg: &ExperimentConfig, n_qubits: usize) -> Result<EnsembleSummary> {
    summarize(
        n_qubits,
        cfg.scenario.parametrization(),
        &run_trials(cfg, n_qubits)?,
    )
}

/// Infidelity of the best pure state to `(1−p)|ψ⟩⟨ψ| + p·I/2^n`, i.e. `p(1 − 2^−n)`.
pub fn min_infidelity_depolarized(p: f64, n_qubits: usize) -> f64 {
    p * (1.0 - 0.5f64.powi(n_qubits as i32))
}

/// Subtracts `floor` from every statistic. Negative results are kept signed
/// and their iterations listed in `below_floor`.
pub fn rescale_infidelity(summary: &EnsembleSummary, floor: f64) -> EnsembleSummary {
    let shift = |r: &SummaryRow| SummaryRow {
        k: r.k,
        median: r.median - floor,
        q25: r.q25 - floor,
        q75: r.q75 - floor,
    };
    let rows: Vec<SummaryRow> = summary.rows.iter().map(shift).collect();
    let below_floor = rows
        .iter()
        .filter(|r| r.q25 < 0.0 || r.median < 0.0 || r.q75 < 0.0)
        .map(|r| r.k)
        .collect();
    EnsembleSummary {
        initial: shift(&summary.initial),
        rows,
        floor: summary.floor + floor,
        below_floor,
        ..summary.clone()
    }
}

/// γ from the median curve over `window`.
pub fn gamma_fit(summary: &EnsembleSummary, window: (f64, f64)) -> Result<ScalingFit> {
    fit_power_law(
        &summary.ks(),
        &summary.medians(),
        window,
        SlopeConvention::Decay,
    )
}

/// η at each fixed iteration count: median infidelity against physical dimension.
pub fn dimension_sweep(summaries: &[EnsembleSummary], fixed_ks: &[u64]) -> Result<Vec<ScalingFit>> {
    if summaries.len() < 3 {
        return Err(SgqtError::Fit(format!(
            "dimension sweep needs at least 3 register sizes, got {}",
            summaries.len()
        )));
    }
    let dims: Vec<f64> = summaries.iter().map(|s| s.physical_dim as f64).collect();
    let window = (
        dims.iter().copied().fold(f64::INFINITY, f64::min),
        dims.iter().copied().fold(0.0, f64::max),
    );
    fixed_ks
        .iter()
        .map(|&k| {
            let medians = summaries
                .iter()
                .map(|s| {
                    s.median_at(k).ok_or_else(|| {
                        SgqtError::Fit(format!(
                            "no median recorded at k = {k} for n = {}",
                            s.n_qubits
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            fit_power_law(&dims, &medians, window, SlopeConvention::Growth)
        })
        .collect()
}

/// A fit tagged with what it was made for; failures are kept as messages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledFit {
    /// Register size for γ fits, iteration count for η fits.
    pub label: u64,
    pub fit: Option<ScalingFit>,
    pub error: Option<String>,
}

impl LabeledFit {
    fn from_result(label: u64, r: Result<ScalingFit>) -> Self {
        match r {
            Ok(fit) => Self {
                label,
                fit: Some(fit),
                error: None,
            },
            Err(e) => Self {
                label,
                fit: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Raw quartiles per register size.
    pub summaries: Vec<EnsembleSummary>,
    /// What the fits see: floor-subtracted for `WDepolarized`, raw otherwise.
    pub fitted: Vec<EnsembleSummary>,
    pub gamma_fits: Vec<LabeledFit>,
    pub eta_fits: Vec<LabeledFit>,
    /// Trajectories per register size, when requested.
    pub trajectories: Option<Vec<Vec<Trajectory>>>,
}

/// Runs every register size, summarizes, and fits γ per size and η across sizes.
pub fn run_experiment(cfg: &ExperimentConfig, keep_trajectories: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let tag = cfg.scenario.parametrization();
    let mut summaries = Vec::with_capacity(cfg.n_qubits.len());
    let mut kept = Vec::new();
    for &n in &cfg.n_qubits {
        let trajectories = run_trials(cfg, n)?;
        summaries.push(summarize(n, tag, &trajectories)?);
        if keep_trajectories {
            kept.push(trajectories);
        }
    }
    let fitted: Vec<EnsembleSummary> = summaries
        .iter()
        .map(|s| match cfg.floor(s.n_qubits) {
            f if f > 0.0 => rescale_infidelity(s, f),
            _ => s.clone(),
        })
        .collect();
    let window = cfg.gamma_window();
    let gamma_fits = fitted
        .iter()
        .map(|s| LabeledFit::from_result(s.n_qubits as u64, gamma_fit(s, window)))
        .collect();
    let eta_fits = if fitted.len() >= 3 {
        cfg.eta_iterations()
            .into_iter()
            .map(|k| {
                LabeledFit::from_result(k, dimension_sweep(&fitted, &[k]).map(|mut v| v.remove(0)))
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        summaries,
        fitted,
        gamma_fits,
        eta_fits,
        trajectories: keep_trajectories.then_some(kept),
    })
}

//! Shot-limited infidelity estimation against a hidden true state.
//!
//! Measuring in a basis that contains the target `|φ⟩` is a Bernoulli trial
//! with success probability `F = ⟨φ|ρ|φ⟩`. With `N` shots the count of
//! `|φ⟩` outcomes is `Binomial(N, F)` and the infidelity estimate is
//! `1 − count/N`; that distribution is sampled directly.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SgqtError};
use crate::spsa::Objective;
use crate::state::{
    fidelity_pure, perturb_params, to_state, w_fidelity, DepolarizedTrueState, ParamVector,
    Parametrization, StateVector, WClassParams,
};

/// Number of repetitions per fidelity estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shots {
    Finite(u64),
    /// Exact expectation values; shot counters stay at zero.
    Infinite,
}

impl Shots {
    pub fn finite(self) -> Option<u64> {
        match self {
            Shots::Finite(n) => Some(n),
            Shots::Infinite => None,
        }
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Finite(n) => write!(f, "{n}"),
            Shots::Infinite => f.write_str("infinite"),
        }
    }
}

impl FromStr for Shots {
    type Err = SgqtError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("infinite") || s.eq_ignore_ascii_case("inf") {
            return Ok(Shots::Infinite);
        }
        match s.parse::<u64>() {
            Ok(n) if n > 0 => Ok(Shots::Finite(n)),
            _ => Err(SgqtError::Config(format!(
                "shots must be a positive integer or \"infinite\", got {s:?}"
            ))),
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Finite(n) => serializer.serialize_u64(*n),
            Shots::Infinite => serializer.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Count(0) => Err(serde::de::Error::custom("shots must be positive")),
            Raw::Count(n) => Ok(Shots::Finite(n)),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Pure,
    Depolarized,
}

/// The state that generates the data. Only this module reads it.
#[derive(Clone, Debug)]
pub struct TrueStateModel {
    state: DepolarizedTrueState,
    kind: ModelKind,
    // W-class coefficients of the pure part, when known, for the O(n) overlap.
    w_class: Option<WClassParams>,
}

impl TrueStateModel {
    pub fn pure(state: StateVector) -> Self {
        Self {
            state: DepolarizedTrueState::new(state, 0.0).expect("p = 0 is valid"),
            kind: ModelKind::Pure,
            w_class: None,
        }
    }

    pub fn depolarized(state: StateVector, p: f64) -> Result<Self> {
        Ok(Self {
            state: DepolarizedTrueState::new(state, p)?,
            kind: ModelKind::Depolarized,
            w_class: None,
        })
    }

    /// A W-class pure part, depolarized with probability `p` (pure when `p = 0`).
    pub fn w_class(params: WClassParams, p: f64) -> Result<Self> {
        let kind = if p == 0.0 {
            ModelKind::Pure
        } else {
            ModelKind::Depolarized
        };
        Ok(Self {
            state: DepolarizedTrueState::new(params.to_state(), p)?,
            kind,
            w_class: Some(params),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_qubits(&self) -> usize {
        self.state.pure_part().n_qubits()
    }

    pub fn p(&self) -> f64 {
        self.state.p()
    }

    /// `⟨φ|ρ|φ⟩` for the state `φ` that `target` parametrizes.
    pub fn fidelity(&self, target: &ParamVector) -> Result<f64> {
        let pure = match (&self.w_class, target.tag()) {
            (Some(truth), Parametrization::WClass) => {
                if target.len() != 2 * truth.n_qubits() {
                    return Err(SgqtError::Dimension(format!(
                        "W-class target has {} reals, model has {} qubits",
                        target.len(),
                        truth.n_qubits()
                    )));
                }
                w_fidelity(truth, &WClassParams::from_params(target)?)?
            }
            _ => fidelity_pure(self.state.pure_part(), &to_state(target, self.n_qubits())?)?,
        };
        Ok(self.state.mix(pure))
    }
}

/// Shots per estimate and the optional target-perturbation noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub shots: Shots,
    pub measurement_noise_std: f64,
}

impl OracleConfig {
    pub fn new(shots: Shots, measurement_noise_std: f64) -> Result<Self> {
        let cfg = Self {
            shots,
            measurement_noise_std,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn exact() -> Self {
        Self {
            shots: Shots::Infinite,
            measurement_noise_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == Shots::Finite(0) {
            return Err(SgqtError::Config("shots must be positive".into()));
        }
        if !(self.measurement_noise_std >= 0.0) || !self.measurement_noise_std.is_finite() {
            return Err(SgqtError::Config(format!(
                "measurement noise std must be finite and >= 0, got {}",
                self.measurement_noise_std
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfidelityEstimate {
    pub value: f64,
    pub shots_used: u64,
}

/// One noisy evaluation of `1 − ⟨φ|ρ|φ⟩`.
///
/// When `measurement_noise_std > 0` the target is normalized and then perturbed
/// with fresh Gaussian noise on every real coordinate, so the measurement is
/// made against a slightly wrong state. The noise scale is therefore relative
/// to the physical unit-norm state, not to the optimizer's unnormalized vector.
pub fn estimate_infidelity<R: Rng + ?Sized>(
    model: &TrueStateModel,
    target: &ParamVector,
    cfg: &OracleConfig,
    rng: &mut R,
) -> Result<InfidelityEstimate> {
    let fidelity = if cfg.measurement_noise_std > 0.0 {
        model.fidelity(&perturb_params(
            &target.normalized()?,
            cfg.measurement_noise_std,
            rng,
        )?)?
    } else {
        model.fidelity(target)?
    };
    match cfg.shots {
        Shots::Infinite => Ok(InfidelityEstimate {
            value: 1.0 - fidelity,
            shots_used: 0,
        }),
        Shots::Finite(n) => {
            let binomial =
                Binomial::new(n, fidelity).map_err(|e| SgqtError::Parameter(e.to_string()))?;
            let count = binomial.sample(rng);
            Ok(InfidelityEstimate {
                value: 1.0 - count as f64 / n as f64,
                shots_used: n,
            })
        }
    }
}

/// A measurement session: the hidden model plus running call and shot counters.
#[derive(Clone, Debug)]
pub struct FidelityOracle {
    model: TrueStateModel,
    cfg: OracleConfig,
    calls: u64,
    shots: u64,
}

impl FidelityOracle {
    pub fn new(model: TrueStateModel, cfg: OracleConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            model,
            cfg,
            calls: 0,
            shots: 0,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn n_qubits(&self) -> usize {
        self.model.n_qubits()
    }

    pub fn estimate<R: Rng + ?Sized>(
        &mut self,
        target: &ParamVector,
        rng: &mut R,
    ) -> Result<InfidelityEstimate> {
        let est = estimate_infidelity(&self.model, target, &self.cfg, rng)?;
        self.calls += 1;
        self.shots += est.shots_used;
        Ok(est)
    }

    /// Cumulative shots consumed. Exact-mode calls consume none; see [`Self::is_exact`].
    pub fn oracle_call_count(&self) -> u64 {
        self.shots
    }

    /// Number of estimates requested so far, in either mode.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn is_exact(&self) -> bool {
        self.cfg.shots == Shots::Infinite
    }

    /// Noise-free infidelity of `target` to the hidden model. Diagnostics only.
    pub fn true_infidelity(&self, target: &ParamVector) -> Result<f64> {
        Ok(1.0 - self.model.fidelity(target)?)
    }
}

impl Objective for FidelityOracle {
    fn estimate<R: Rng + ?Sized>(&mut self, x: &ParamVector, rng: &mut R) -> Result<f64> {
        Ok(FidelityOracle::estimate(self, x, rng)?.value)
    }

    fn exact(&self, x: &ParamVector) -> Result<f64> {
        self.true_infidelity(x)
    }

    fn shots_consumed(&self) -> u64 {
        self.shots
    }
}

//! Simultaneous perturbation stochastic approximation.
//!
//! Each iteration draws a Rademacher direction `Δ_k`, makes two noisy
//! evaluations at `σ_k ± β_k Δ_k` and steps against the two-point gradient
//! estimate:
//!
//! ```text
//! g_k     = (f(σ_k + β_k Δ_k) − f(σ_k − β_k Δ_k)) / (2 β_k) · Δ_k
//! σ_{k+1} = σ_k − α_k g_k
//! α_k     = a / (k + 1 + A)^s
//! β_k     = b / (k + 1)^t
//! ```
//!
//! The iterate is never normalized here. Parametrizations that need a unit
//! vector normalize on use.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SgqtError};
use crate::state::ParamVector;

/// A noisy objective to be minimized.
pub trait Objective {
    /// One noisy evaluation; the only information the optimizer sees.
    fn estimate<R: Rng + ?Sized>(&mut self, x: &ParamVector, rng: &mut R) -> Result<f64>;

    /// Noise-free value, recorded in trajectories for diagnostics.
    fn exact(&self, x: &ParamVector) -> Result<f64>;

    fn shots_consumed(&self) -> u64 {
        0
    }
}

/// Gain sequences `α_k = a/(k+1+A)^s` and `β_k = b/(k+1)^t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    pub a: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub b: f64,
    pub s: f64,
    pub t: f64,
}

impl GainSchedule {
    /// Standard practical exponents.
    pub const DEFAULT_S: f64 = 0.602;
    pub const DEFAULT_T: f64 = 0.101;
    /// Asymptotically optimal exponents.
    pub const ASYMPTOTIC_S: f64 = 1.0;
    pub const ASYMPTOTIC_T: f64 = 1.0 / 6.0;

    pub fn new(a: f64, big_a: f64, b: f64, s: f64, t: f64) -> Result<Self> {
        let g = Self { a, big_a, b, s, t };
        g.validate()?;
        Ok(g)
    }

    /// `a=3, A=0, b=0.1` with the default exponents (single-qubit runs).
    pub fn single_qubit() -> Self {
        Self {
            a: 3.0,
            big_a: 0.0,
            b: 0.1,
            s: Self::DEFAULT_S,
            t: Self::DEFAULT_T,
        }
    }

    /// `a=0.3, A=1000, b=0.1` with the default exponents (multi-qubit and W-class runs).
    pub fn multi_qubit() -> Self {
        Self {
            a: 0.3,
            big_a: 1000.0,
            b: 0.1,
            s: Self::DEFAULT_S,
            t: Self::DEFAULT_T,
        }
    }

    /// Same `a, A, b` with `s = 1, t = 1/6`.
    pub fn asymptotic(self) -> Self {
        Self {
            s: Self::ASYMPTOTIC_S,
            t: Self::ASYMPTOTIC_T,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.big_a >= 0.0
            && self.b > 0.0
            && self.s > 0.0
            && self.t > 0.0
            && [self.a, self.big_a, self.b, self.s, self.t]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SgqtError::Config(format!(
                "gains need a>0, A>=0, b>0, s>0, t>0; got {self:?}"
            )))
        }
    }

    pub fn alpha(&self, k: u64) -> f64 {
        alpha(k, self)
    }

    pub fn beta(&self, k: u64) -> f64 {
        beta(k, self)
    }
}

impl Default for GainSchedule {
    fn default() -> Self {
        Self::multi_qubit()
    }
}

pub fn alpha(k: u64, g: &GainSchedule) -> f64 {
    g.a / (k as f64 + 1.0 + g.big_a).powf(g.s)
}

pub fn beta(k: u64, g: &GainSchedule) -> f64 {
    g.b / (k as f64 + 1.0).powf(g.t)
}

/// Independent fair ±1 entries.
pub fn sample_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Two-point gradient estimate along `delta`.
pub fn gradient_estimate(
    f_plus: f64,
    f_minus: f64,
    beta_k: f64,
    delta: &[f64],
) -> Result<Vec<f64>> {
    if !(beta_k > 0.0) {
        return Err(SgqtError::Parameter(format!(
            "perturbation size must be positive, got {beta_k}"
        )));
    }
    let slope = (f_plus - f_minus) / (2.0 * beta_k);
    Ok(delta.iter().map(|d| slope * d).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsaIterate {
    pub k: u64,
    pub sigma: ParamVector,
}

impl SpsaIterate {
    pub fn start(sigma: ParamVector) -> Self {
        Self { k: 0, sigma }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: SpsaIterate,
    pub f_plus: f64,
    pub f_minus: f64,
}

/// One SPSA iteration. The perturbed points are only measured; the stored
/// iterate moves from `σ_k` itself.
pub fn step<O, R>(
    it: &SpsaIterate,
    objective: &mut O,
    gains: &GainSchedule,
    rng: &mut R,
) -> Result<StepOutcome>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let alpha_k = gains.alpha(it.k);
    let beta_k = gains.beta(it.k);
    let delta = sample_direction(it.sigma.len(), rng);
    let f_plus = objective.estimate(&it.sigma.offset(&delta, beta_k)?, rng)?;
    let f_minus = objective.estimate(&it.sigma.offset(&delta, -beta_k)?, rng)?;
    let grad = gradient_estimate(f_plus, f_minus, beta_k, &delta)?;
    Ok(StepOutcome {
        next: SpsaIterate {
            k: it.k + 1,
            sigma: it.sigma.offset(&grad, -alpha_k)?,
        },
        f_plus,
        f_minus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Iterations completed.
    pub k: u64,
    /// Noise-free objective at `σ_k`.
    pub infidelity: f64,
    pub f_plus: f64,
    pub f_minus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Noise-free objective at the starting point.
    pub initial_infidelity: f64,
    /// One record per iteration, `k = 1..=iterations`.
    pub records: Vec<TrajectoryRecord>,
    pub final_params: ParamVector,
    pub shots_used: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_infidelity(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_infidelity, |r| r.infidelity)
    }
}

/// Runs `iterations` SPSA steps from `initial`.
pub fn run<O, R>(
    initial: ParamVector,
    iterations: u64,
    objective: &mut O,
    gains: &GainSchedule,
    rng: &mut R,
) -> Result<Trajectory>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    if iterations == 0 {
        return Err(SgqtError::Config("iterations must be >= 1".into()));
    }
    gains.validate()?;
    let shots_before = objective.shots_consumed();
    let initial_infidelity = objective.exact(&initial)?;
    let mut it = SpsaIterate::start(initial);
    let mut records = Vec::with_capacity(iterations as usize);
    for _ in 0..iterations {
        let out = step(&it, objective, gains, rng)?;
        it = out.next;
        records.push(TrajectoryRecord {
            k: it.k,
            infidelity: objective.exact(&it.sigma)?,
            f_plus: out.f_plus,
            f_minus: out.f_minus,
        });
    }
    Ok(Trajectory {
        initial_infidelity,
        records,
        final_params: it.sigma,
        shots_used: objective.shots_consumed() - shots_before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Parametrization;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Quadratic {
        center: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn estimate<R: Rng + ?Sized>(&mut self, x: &ParamVector, _rng: &mut R) -> Result<f64> {
            self.exact(x)
        }

        fn exact(&self, x: &ParamVector) -> Result<f64> {
            Ok(x.values()
                .iter()
                .zip(&self.center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum())
        }
    }

    #[test]
    fn alpha_examples() {
        let g = GainSchedule::new(3.0, 0.0, 0.1, 1.0, 0.101).unwrap();
        assert_eq!(alpha(0, &g), 3.0);
        let g = GainSchedule::new(0.3, 1000.0, 0.1, 0.602, 0.101).unwrap();
        // 0.3 / 1001^0.602, evaluated with mpmath at 50 digits
        assert!((alpha(0, &g) - 4.686_622_142_579_511e-3).abs() < 1e-15);
    }

    #[test]
    fn beta_examples() {
        let g = GainSchedule::single_qubit();
        assert_eq!(beta(0, &g), 0.1);
        let g = GainSchedule::new(1.0, 0.0, 0.1, 1.0, 1.0 / 6.0).unwrap();
        assert!((beta(63, &g) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn gains_are_positive_and_decreasing() {
        for g in [
            GainSchedule::single_qubit(),
            GainSchedule::multi_qubit(),
            GainSchedule::multi_qubit().asymptotic(),
        ] {
            let mut prev = (g.alpha(0), g.beta(0));
            for k in (1..=1_000_000u64).step_by(997) {
                let cur = (g.alpha(k), g.beta(k));
                assert!(cur.0 > 0.0 && cur.1 > 0.0);
                assert!(cur.0 < prev.0 && cur.1 < prev.1);
                prev = cur;
            }
        }
    }

    #[test]
    fn invalid_gains_rejected() {
        assert!(GainSchedule::new(0.0, 0.0, 0.1, 0.6, 0.1).is_err());
        assert!(GainSchedule::new(1.0, -1.0, 0.1, 0.6, 0.1).is_err());
        assert!(GainSchedule::new(1.0, 0.0, 0.1, 0.6, f64::NAN).is_err());
    }

    #[test]
    fn direction_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d = sample_direction(4, &mut rng);
        assert!(d.iter().all(|v| *v == 1.0 || *v == -1.0));

        let samples = 100_000;
        let mut sums = [0.0f64; 2];
        let mut cross = 0.0;
        for _ in 0..samples {
            let d = sample_direction(2, &mut rng);
            sums[0] += d[0];
            sums[1] += d[1];
            cross += d[0] * d[1];
        }
        let n = samples as f64;
        assert!((sums[0] / n).abs() < 0.01);
        assert!((sums[1] / n).abs() < 0.01);
        assert!((cross / n).abs() < 0.01);
    }

    #[test]
    fn gradient_estimate_examples() {
        let g = gradient_estimate(0.3, 0.3, 0.1, &[1.0, -1.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let g = gradient_estimate(0.6, 0.4, 0.1, &[1.0, -1.0]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] + 1.0).abs() < 1e-12);
        assert!(gradient_estimate(0.6, 0.4, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn stored_iterate_is_unperturbed_sigma() {
        // With f ≡ const the gradient vanishes, so σ must not move at all.
        struct Flat;
        impl Objective for Flat {
            fn estimate<R: Rng + ?Sized>(&mut self, _: &ParamVector, _: &mut R) -> Result<f64> {
                Ok(0.25)
            }
            fn exact(&self, _: &ParamVector) -> Result<f64> {
                Ok(0.25)
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sigma = ParamVector::new(vec![0.3, -0.2, 0.1], Parametrization::Full);
        let out = step(
            &SpsaIterate::start(sigma.clone()),
            &mut Flat,
            &GainSchedule::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.next.sigma, sigma);
        assert_eq!(out.next.k, 1);
    }

    #[test]
    fn descends_noiseless_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let center: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.3).collect();
        let mut f = Quadratic { center };
        let x0 = ParamVector::new(vec![1.0; 8], Parametrization::Full);
        let initial = f.exact(&x0).unwrap();
        let traj = run(x0, 500, &mut f, &GainSchedule::default(), &mut rng).unwrap();
        assert_eq!(traj.len(), 500);
        assert!(traj.final_infidelity() < 1e-3 * initial);
    }

    #[test]
    fn run_rejects_zero_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut f = Quadratic { center: vec![0.0] };
        let x0 = ParamVector::new(vec![1.0], Parametrization::Full);
        assert!(run(x0, 0, &mut f, &GainSchedule::default(), &mut rng).is_err());
    }
}

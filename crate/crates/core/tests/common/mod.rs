//! Property checks shared by the property tests and the acceptance run.
//! Each returns a short detail string on success and a reason on failure.

#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sgqt::experiments::{run_trial, run_trials, ExperimentConfig, InitMode, Scenario};
use sgqt::fit::{fit_power_law, SlopeConvention};
use sgqt::measurement::{estimate_infidelity, OracleConfig, Shots, TrueStateModel};
use sgqt::spsa::{gradient_estimate, sample_direction, Objective};
use sgqt::state::{
    fidelity_pure, haar_random_state, w_fidelity, ParamVector, Parametrization, StateVector,
    WClassParams,
};
use sgqt::Result;

pub type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Mean of `1 − count/N` at `F = 1/2` over `seeds` independent streams.
pub fn estimator_unbiased(shots: u64, seeds: u64) -> Check {
    let model = TrueStateModel::pure(StateVector::basis(1, 0).unwrap());
    let target = ParamVector::new(vec![1.0, 0.0, 1.0, 0.0], Parametrization::Full);
    let cfg = OracleConfig::new(Shots::Finite(shots), 0.0).unwrap();
    let mean = (0..seeds)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            estimate_infidelity(&model, &target, &cfg, &mut rng)
                .unwrap()
                .value
        })
        .sum::<f64>()
        / seeds as f64;
    let sigma = (0.25 / (shots as f64 * seeds as f64)).sqrt();
    let dev = (mean - 0.5).abs();
    ensure(dev < 3.0 * sigma, || {
        format!("mean {mean} is {:.2} sigma from 0.5", dev / sigma)
    })?;
    Ok(format!("mean {mean:.6}, {:.2} sigma", dev / sigma))
}

/// Mean Haar fidelity to `|0…0⟩` against `1/2^n`, 3σ from the sample spread.
pub fn haar_mean(max_n: usize, samples: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4a11);
    let mut worst: f64 = 0.0;
    for n in 1..=max_n {
        let reference = StateVector::basis(n, 0).unwrap();
        let values: Vec<f64> = (0..samples)
            .map(|_| fidelity_pure(&reference, &haar_random_state(n, &mut rng).unwrap()).unwrap())
            .collect();
        let m = samples as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let sigma = (var / m).sqrt();
        let z = (mean - 0.5f64.powi(n as i32)).abs() / sigma;
        ensure(z < 3.0, || {
            format!("n={n}: mean {mean} is {z:.2} sigma off")
        })?;
        worst = worst.max(z);
    }
    Ok(format!("n=1..{max_n}, worst {worst:.2} sigma"))
}

/// `w_fidelity` against the dense overlap on `pairs` random pairs per size.
pub fn w_equivalence(pairs: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e);
    let mut worst: f64 = 0.0;
    for n in 2..=8 {
        for _ in 0..pairs {
            let a = WClassParams::haar_random(n, &mut rng).unwrap();
            let b = WClassParams::haar_random(n, &mut rng).unwrap();
            let fast = w_fidelity(&a, &b).unwrap();
            let dense = fidelity_pure(&a.to_state(), &b.to_state()).unwrap();
            worst = worst.max((fast - dense).abs());
        }
    }
    ensure(worst < 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "n=2..8, {pairs} pairs each, max deviation {worst:.1e}"
    ))
}

/// `Σ c_i (x_i − x0_i)²`.
pub struct Quadratic {
    pub center: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadratic {
    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .zip(&self.weights)
            .map(|((x, c), w)| w * (x - c).powi(2))
            .sum()
    }
}

impl Objective for Quadratic {
    fn estimate<R: Rng + ?Sized>(&mut self, x: &ParamVector, _rng: &mut R) -> Result<f64> {
        Ok(self.value(x.values()))
    }

    fn exact(&self, x: &ParamVector) -> Result<f64> {
        Ok(self.value(x.values()))
    }
}

/// Central finite-difference gradient with step `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale
}

/// Mean SPSA gradient over `directions` random directions against the
/// finite-difference gradient of an 8-dimensional quadratic.
pub fn gradient_vs_fd_quadratic(beta: f64, directions: usize, tol: f64) -> Check {
    let q = Quadratic {
        center: (0..8).map(|i| 0.2 * i as f64 - 0.7).collect(),
        weights: (0..8).map(|i| 1.0 + 0.25 * i as f64).collect(),
    };
    let x: Vec<f64> = (0..8).map(|i| 0.5 - 0.1 * i as f64).collect();
    let truth = fd_gradient(|p| q.value(p), &x, 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d);
    let mut mean = vec![0.0; 8];
    for _ in 0..directions {
        let delta = sample_direction(8, &mut rng);
        let plus: Vec<f64> = x.iter().zip(&delta).map(|(x, d)| x + beta * d).collect();
        let minus: Vec<f64> = x.iter().zip(&delta).map(|(x, d)| x - beta * d).collect();
        let g = gradient_estimate(q.value(&plus), q.value(&minus), beta, &delta).unwrap();
        for (m, gi) in mean.iter_mut().zip(g) {
            *m += gi / directions as f64;
        }
    }
    let err = rel_err(&mean, &truth);
    ensure(err < tol, || {
        format!("relative error {err:.4} at beta={beta}")
    })?;
    Ok(format!("beta={beta}, relative error {err:.4}"))
}

/// Mean SPSA gradient of a quadratic-plus-quartic objective against the mean
/// of finite-difference gradients projected on the same directions, so the
/// direction sampling noise cancels and only the finite-β bias remains.
pub fn gradient_bias_quartic(beta: f64, directions: usize, tol: f64) -> Check {
    let center: Vec<f64> = (0..8).map(|i| 0.15 * i as f64 - 0.5).collect();
    let f = |p: &[f64]| -> f64 {
        p.iter()
            .zip(&center)
            .map(|(x, c)| (x - c).powi(2) + 0.25 * (x - c).powi(4))
            .sum()
    };
    let x: Vec<f64> = (0..8).map(|i| 0.6 - 0.12 * i as f64).collect();
    let grad = fd_gradient(f, &x, 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a);
    let mut spsa_mean = vec![0.0; 8];
    let mut fd_mean = vec![0.0; 8];
    for _ in 0..directions {
        let delta = sample_direction(8, &mut rng);
        let plus: Vec<f64> = x.iter().zip(&delta).map(|(x, d)| x + beta * d).collect();
        let minus: Vec<f64> = x.iter().zip(&delta).map(|(x, d)| x - beta * d).collect();
        let g = gradient_estimate(f(&plus), f(&minus), beta, &delta).unwrap();
        let directional: f64 = grad.iter().zip(&delta).map(|(g, d)| g * d).sum();
        for i in 0..8 {
            spsa_mean[i] += g[i] / directions as f64;
            fd_mean[i] += directional * delta[i] / directions as f64;
        }
    }
    let err = rel_err(&spsa_mean, &fd_mean);
    ensure(err < tol, || {
        format!("relative error {err:.2e} at beta={beta}")
    })?;
    Ok(format!("beta={beta}, relative error {err:.2e}"))
}

/// Exact recovery of synthetic exponents.
pub fn fit_recovery() -> Check {
    let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
    let mut worst: f64 = 0.0;
    for &(prefactor, exponent) in &[(1.0, 1.0), (5.0, 1.18), (0.02, 0.5), (3e-3, 2.0)] {
        let ys: Vec<f64> = xs
            .iter()
            .map(|x: &f64| prefactor * x.powf(-exponent))
            .collect();
        let fit = fit_power_law(&xs, &ys, (100.0, 1000.0), SlopeConvention::Decay)
            .map_err(|e| e.to_string())?;
        worst = worst.max((fit.exponent - exponent).abs());
    }
    let dims = [2.0, 6.0, 14.0, 30.0, 62.0, 126.0];
    let ys: Vec<f64> = dims.iter().map(|d: &f64| 1e-4 * d.powf(1.2)).collect();
    let fit = fit_power_law(&dims, &ys, (2.0, 126.0), SlopeConvention::Growth)
        .map_err(|e| e.to_string())?;
    worst = worst.max((fit.exponent - 1.2).abs());
    ensure(worst < 1e-10, || format!("max exponent error {worst:e}"))?;
    Ok(format!("max exponent error {worst:.1e}"))
}

fn small_config(scenario: Scenario) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(scenario);
    cfg.n_qubits = match scenario {
        Scenario::SingleQubit => vec![1],
        Scenario::MultiQubit => vec![1, 2],
        _ => vec![2, 3],
    };
    cfg.shots = Shots::Finite(500);
    cfg.iterations = 300;
    cfg.n_trials = 6;
    cfg.base_seed = 11;
    cfg
}

/// Every trial consumes exactly `2·N·k` shots.
pub fn shot_accounting() -> Check {
    let mut checked = 0;
    for scenario in [
        Scenario::SingleQubit,
        Scenario::MultiQubit,
        Scenario::WDepolarized,
    ] {
        let cfg = small_config(scenario);
        let per_trial = 2 * 500 * cfg.iterations;
        for &n in &cfg.n_qubits {
            let trajectories = run_trials(&cfg, n).map_err(|e| e.to_string())?;
            let total: u64 = trajectories.iter().map(|t| t.shots_used).sum();
            ensure(total == cfg.n_trials as u64 * per_trial, || {
                format!("{scenario} n={n}: {total} shots")
            })?;
            checked += trajectories.len();
        }
    }
    Ok(format!("{checked} trials, 2*N*k each"))
}

/// Same seed and config give byte-identical serialized trajectories.
pub fn trajectory_determinism() -> Check {
    let mut cfg = small_config(Scenario::NoisyMeasurement);
    cfg.init_mode = InitMode::Perturbed(0.05);
    for trial in 0..3 {
        let a = serde_json::to_string(&run_trial(&cfg, 3, trial).unwrap()).unwrap();
        let b = serde_json::to_string(&run_trial(&cfg, 3, trial).unwrap()).unwrap();
        ensure(a == b, || format!("trial {trial} differs between runs"))?;
    }
    Ok("3 trials reproduced byte for byte".into())
}

/// Runs the binary with `args` into `out`; panics on a non-zero exit.
pub fn run_cli(out: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_sgqt"))
        .arg("run")
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SGQT_SEED")
        .output()
        .expect("binary runs");
    assert!(
        status.status.success(),
        "sgqt run failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
}

/// Every file under `dir`, relative path and bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files);
    files.sort();
    files
}

/// Two CLI runs with the same seed, at different thread counts, write identical bytes.
pub fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let common = [
        "--scenario",
        "w-depolarized",
        "--qubits",
        "2,3,4",
        "--iterations",
        "200",
        "--trials",
        "5",
        "--seed",
        "7",
        "--trajectories",
        "--svg",
    ];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_cli(&a, &[&common[..], &["--threads", "1"]].concat());
    run_cli(&b, &[&common[..], &["--threads", "3"]].concat());
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    ensure(!sa.is_empty() && sa == sb, || "output trees differ".into())?;
    Ok(format!("{} files identical across runs", sa.len()))
}

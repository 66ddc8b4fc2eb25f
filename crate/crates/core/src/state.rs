//! Pure-state representation, parametrizations and fidelities.
//!
//! Two parametrizations are supported. `Full` stores the real and imaginary
//! part of every one of the `2^n` amplitudes; `WClass` stores only the `n`
//! single-excitation amplitudes `α_i` of a W-class state
//! `α_1|10…0⟩ + α_2|01…0⟩ + … + α_n|00…1⟩`. In both cases the vector is kept
//! unnormalized and [`to_state`] divides by its norm, so the optimizer can
//! move freely in an unconstrained real space.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SgqtError};

/// Largest register the dense representation accepts.
pub const MAX_QUBITS: usize = 24;

const NORM_TOL: f64 = 1e-12;

fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(SgqtError::Parameter(format!(
            "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    Ok(())
}

fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// A unit-norm vector of `2^n_qubits` complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes that are already normalized.
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(SgqtError::Dimension(format!(
                "expected {} amplitudes for {n_qubits} qubits, got {}",
                1usize << n_qubits,
                amplitudes.len()
            )));
        }
        let norm = norm_sqr(&amplitudes).sqrt();
        if (norm - 1.0).abs() >= NORM_TOL {
            return Err(SgqtError::Parameter(format!(
                "amplitudes have norm {norm}, expected 1"
            )));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Divides the amplitudes by their Euclidean norm.
    pub fn from_unnormalized(n_qubits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(SgqtError::Dimension(format!(
                "expected {} amplitudes for {n_qubits} qubits, got {}",
                1usize << n_qubits,
                amplitudes.len()
            )));
        }
        let norm = norm_sqr(&amplitudes).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SgqtError::DegenerateParametrization);
        }
        let inv = 1.0 / norm;
        for a in amplitudes.iter_mut() {
            *a *= inv;
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(SgqtError::Dimension(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(SgqtError::Dimension(format!(
                "inner product of {}-qubit and {}-qubit states",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        Self {
            n_qubits: self.n_qubits,
            amplitudes: self.amplitudes.iter().map(|a| a * phase).collect(),
        }
    }

    /// The `Full` parameter vector whose [`to_state`] image is this state.
    pub fn to_params(&self) -> ParamVector {
        ParamVector {
            values: self.amplitudes.iter().flat_map(|a| [a.re, a.im]).collect(),
            tag: Parametrization::Full,
        }
    }
}

/// Which coordinates a [`ParamVector`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// Real and imaginary parts of all `2^n` amplitudes.
    Full,
    /// Real and imaginary parts of the `n` W-class coefficients.
    WClass,
}

impl Parametrization {
    /// Number of reals a parameter vector of this kind holds for `n_qubits`.
    pub fn param_len(self, n_qubits: usize) -> usize {
        match self {
            Parametrization::Full => 2 << n_qubits,
            Parametrization::WClass => 2 * n_qubits,
        }
    }
}

/// Unnormalized real coordinates of a state. This is the space SPSA moves in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    tag: Parametrization,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, tag: Parametrization) -> Self {
        Self { values, tag }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tag(&self) -> Parametrization {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Unit-norm copy; the zero vector is degenerate.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SgqtError::DegenerateParametrization);
        }
        Ok(Self {
            values: self.values.iter().map(|v| v / norm).collect(),
            tag: self.tag,
        })
    }

    /// `self + scale·direction`, keeping the tag.
    pub fn offset(&self, direction: &[f64], scale: f64) -> Result<Self> {
        if direction.len() != self.values.len() {
            return Err(SgqtError::Dimension(format!(
                "direction has {} entries, parameters have {}",
                direction.len(),
                self.values.len()
            )));
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(direction)
                .map(|(v, d)| v + scale * d)
                .collect(),
            tag: self.tag,
        })
    }

    fn check_len(&self, n_qubits: usize) -> Result<()> {
        let expected = self.tag.param_len(n_qubits);
        if self.values.len() != expected {
            return Err(SgqtError::Dimension(format!(
                "{:?} parametrization of {n_qubits} qubits needs {expected} reals, got {}",
                self.tag,
                self.values.len()
            )));
        }
        Ok(())
    }
}

/// Basis index of the single excitation on qubit `i` (qubit 0 is the leftmost
/// label, so `α_1` multiplies `|10…0⟩`).
pub fn w_basis_index(n_qubits: usize, i: usize) -> usize {
    1 << (n_qubits - 1 - i)
}

fn pair_up(values: &[f64]) -> Vec<Complex64> {
    values
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect()
}

/// Maps a parameter vector onto the normalized state it represents.
pub fn to_state(params: &ParamVector, n_qubits: usize) -> Result<StateVector> {
    check_qubits(n_qubits)?;
    if params.tag == Parametrization::WClass && n_qubits < 2 {
        return Err(SgqtError::Parameter(
            "W-class states need at least 2 qubits".into(),
        ));
    }
    params.check_len(n_qubits)?;
    let amplitudes = match params.tag {
        Parametrization::Full => pair_up(&params.values),
        Parametrization::WClass => {
            let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
            for (i, alpha) in pair_up(&params.values).into_iter().enumerate() {
                amps[w_basis_index(n_qubits, i)] = alpha;
            }
            amps
        }
    };
    StateVector::from_unnormalized(n_qubits, amplitudes)
}

/// `|⟨ψ|φ⟩|²`
pub fn fidelity_pure(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    Ok(psi.inner(phi)?.norm_sqr().min(1.0))
}

/// A pure state passed through a depolarizing channel:
/// `ρ = (1−p)|ψ⟩⟨ψ| + p·I/2^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepolarizedTrueState {
    pure_part: StateVector,
    p: f64,
}

impl DepolarizedTrueState {
    pub fn new(pure_part: StateVector, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SgqtError::Parameter(format!(
                "depolarizing probability must be in [0,1], got {p}"
            )));
        }
        Ok(Self { pure_part, p })
    }

    pub fn pure_part(&self) -> &StateVector {
        &self.pure_part
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `(1−p)·f + p/2^n` for a pure-state overlap `f`.
    pub(crate) fn mix(&self, pure_fidelity: f64) -> f64 {
        let maximally_mixed = 1.0 / self.pure_part.dim() as f64;
        ((1.0 - self.p) * pure_fidelity + self.p * maximally_mixed).clamp(0.0, 1.0)
    }
}

/// `⟨φ|ρ|φ⟩` for the depolarized model, evaluated without forming `ρ`.
pub fn fidelity_depolarized(model: &DepolarizedTrueState, phi: &StateVector) -> Result<f64> {
    Ok(model.mix(fidelity_pure(&model.pure_part, phi)?))
}

/// Normalized coefficients `α_1…α_n` of a W-class state.
#[derive(Clone, Debug, PartialEq)]
pub struct WClassParams {
    alphas: Vec<Complex64>,
}

impl WClassParams {
    /// Normalizes `alphas`; needs at least two qubits and a nonzero vector.
    pub fn new(alphas: Vec<Complex64>) -> Result<Self> {
        if alphas.len() < 2 || alphas.len() > MAX_QUBITS {
            return Err(SgqtError::Parameter(format!(
                "W-class states need 2..={MAX_QUBITS} qubits, got {}",
                alphas.len()
            )));
        }
        let norm = norm_sqr(&alphas).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SgqtError::DegenerateParametrization);
        }
        Ok(Self {
            alphas: alphas.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// Reads a `WClass` parameter vector.
    pub fn from_params(params: &ParamVector) -> Result<Self> {
        if params.tag != Parametrization::WClass {
            return Err(SgqtError::Parameter(
                "expected a W-class parameter vector".into(),
            ));
        }
        if !params.values.len().is_multiple_of(2) {
            return Err(SgqtError::Dimension(
                "W-class parameter vector must have even length".into(),
            ));
        }
        Self::new(pair_up(&params.values))
    }

    /// Uniformly random on the W-class sphere: `n` complex Gaussians, normalized.
    pub fn haar_random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        if n_qubits < 2 {
            return Err(SgqtError::Parameter(
                "W-class states need at least 2 qubits".into(),
            ));
        }
        Self::new(complex_gaussians(n_qubits, rng))
    }

    pub fn n_qubits(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[Complex64] {
        &self.alphas
    }

    pub fn to_params(&self) -> ParamVector {
        ParamVector {
            values: self.alphas.iter().flat_map(|a| [a.re, a.im]).collect(),
            tag: Parametrization::WClass,
        }
    }

    pub fn to_state(&self) -> StateVector {
        let n = self.n_qubits();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (i, alpha) in self.alphas.iter().enumerate() {
            amplitudes[w_basis_index(n, i)] = *alpha;
        }
        StateVector {
            n_qubits: n,
            amplitudes,
        }
    }
}

/// `|Σ_i conj(a_i)·b_i|²`, the overlap of two W-class states in `O(n)`.
pub fn w_fidelity(a: &WClassParams, b: &WClassParams) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(SgqtError::Dimension(format!(
            "W-class overlap of {}-qubit and {}-qubit states",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    let overlap: Complex64 = a
        .alphas
        .iter()
        .zip(&b.alphas)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(overlap.norm_sqr().min(1.0))
}

fn complex_gaussians<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        })
        .collect()
}

/// Haar-random pure state: `2^n` independent complex Gaussians, normalized.
pub fn haar_random_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<StateVector> {
    check_qubits(n_qubits)?;
    StateVector::from_unnormalized(n_qubits, complex_gaussians(1 << n_qubits, rng))
}

/// Adds independent `N(0, std²)` noise to every real coordinate.
pub fn perturb_params<R: Rng + ?Sized>(
    params: &ParamVector,
    std: f64,
    rng: &mut R,
) -> Result<ParamVector> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(SgqtError::Parameter(format!(
            "perturbation std must be finite and >= 0, got {std}"
        )));
    }
    if std == 0.0 {
        return Ok(params.clone());
    }
    let normal = Normal::new(0.0, std).map_err(|e| SgqtError::Parameter(e.to_string()))?;
    Ok(ParamVector {
        values: params
            .values
            .iter()
            .map(|v| v + normal.sample(rng))
            .collect(),
        tag: params.tag,
    })
}

/// Real dimension `d` of the physical state manifold the parametrization covers.
///
/// `Full`: `2(2^n − 1)`; `WClass`: `2(n − 1)`. Scaling fits are made against this.
pub fn physical_dim(n_qubits: usize, tag: Parametrization) -> Result<usize> {
    check_qubits(n_qubits)?;
    match tag {
        Parametrization::Full => Ok(2 * ((1 << n_qubits) - 1)),
        Parametrization::WClass if n_qubits >= 2 => Ok(2 * (n_qubits - 1)),
        Parametrization::WClass => Err(SgqtError::Parameter(
            "W-class states need at least 2 qubits".into(),
        )),
    }
}

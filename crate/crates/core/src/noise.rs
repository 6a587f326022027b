//! Truncated Q-Wiener increments from a counter-based generator, and the
//! multiplicative noise coefficient of the fluid step.
//!
//! Every Gaussian sample is addressed by `(noise seed, master seed, path,
//! stream, counter)`: the ChaCha20 key encodes the first three, the stream
//! separates increments from bridge refinements, and the counter encodes
//! `(step, mode, sub-step)`. Samples therefore do not depend on the order in
//! which paths or steps are generated.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FsiError, Result};
use crate::sparse::CscMatrix;

pub const GENERATOR_ID: &str = "chacha20-box-muller-v1";

/// Covariance `Q = diag(q)` on `R^K` and the coefficient `Phi` of the
/// noise operator against the `U_0` basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub modes: usize,
    pub q: Vec<f64>,
    pub amplitude: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_generator")]
    pub generator: String,
    /// When set, increments are drawn on a grid of `base_steps` steps and
    /// summed down, so runs with different `N` dividing `base_steps` see the
    /// same Wiener path.
    #[serde(default)]
    pub base_steps: Option<usize>,
}

fn default_generator() -> String {
    GENERATOR_ID.to_string()
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            modes: 1,
            q: vec![1.0],
            amplitude: vec![0.0],
            seed: 0,
            generator: default_generator(),
            base_steps: None,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.generator != GENERATOR_ID {
            return Err(FsiError::config(
                "noise.generator",
                format!("unknown generator `{}` (supported: {GENERATOR_ID})", self.generator),
            ));
        }
        if self.modes == 0 && self.amplitude.iter().any(|&a| a != 0.0) {
            return Err(FsiError::config("noise.modes", "zero modes with nonzero amplitudes"));
        }
        if self.q.len() != self.modes {
            return Err(FsiError::config(
                "noise.q",
                format!("expected {} eigenvalues, got {}", self.modes, self.q.len()),
            ));
        }
        if self.amplitude.len() != self.modes {
            return Err(FsiError::config(
                "noise.amplitude",
                format!("expected {} coefficients, got {}", self.modes, self.amplitude.len()),
            ));
        }
        if let Some(k) = self.q.iter().position(|&q| !(q > 0.0 && q.is_finite())) {
            return Err(FsiError::config(format!("noise.q[{k}]"), "eigenvalues must be positive and finite"));
        }
        if let Some(k) = self.amplitude.iter().position(|a| !a.is_finite()) {
            return Err(FsiError::config(format!("noise.amplitude[{k}]"), "must be finite"));
        }
        if self.base_steps == Some(0) {
            return Err(FsiError::config("noise.base_steps", "must be at least 1"));
        }
        Ok(())
    }

    pub fn trace_q(&self) -> f64 {
        self.q.iter().sum()
    }

    /// `|Phi|_{L2(U_0; R)} = (sum a_k^2 q_k)^{1/2}`
    pub fn phi_norm(&self) -> f64 {
        self.amplitude.iter().zip(&self.q).map(|(a, q)| a * a * q).sum::<f64>().sqrt()
    }

    pub fn is_silent(&self) -> bool {
        self.amplitude.iter().all(|&a| a == 0.0)
    }

    /// Scalar `xi = Phi(increment) = sum a_k dW_k`.
    pub fn project(&self, increment: &[f64]) -> f64 {
        self.amplitude.iter().zip(increment).map(|(a, w)| a * w).sum()
    }

    /// `|dW|_{U_0} = (sum dW_k^2 / q_k)^{1/2}`
    pub fn increment_norm(&self, increment: &[f64]) -> f64 {
        increment.iter().zip(&self.q).map(|(w, q)| w * w / q).sum::<f64>().sqrt()
    }
}

/// Identifies one Monte Carlo path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathKey {
    pub master_seed: u64,
    pub path: u64,
}

/// Standard normals addressed by `(stream, counter)` for one path.
pub struct KeyedNormals {
    rng: ChaCha20Rng,
}

impl KeyedNormals {
    pub fn new(noise_seed: u64, key: PathKey) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&noise_seed.to_le_bytes());
        bytes[8..16].copy_from_slice(&key.master_seed.to_le_bytes());
        bytes[16..24].copy_from_slice(&key.path.to_le_bytes());
        Self { rng: ChaCha20Rng::from_seed(bytes) }
    }

    /// Box-Muller on the two 64-bit words at position `counter`.
    pub fn normal(&mut self, stream: u64, counter: u64) -> f64 {
        self.rng.set_stream(stream);
        self.rng.set_word_pos(u128::from(counter) * 4);
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = 1.0 - (a >> 11) as f64 / (1u64 << 53) as f64;
        let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Wiener increments `dW_{n,k}` in `U_0` coordinates, row-major in `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub steps: usize,
    pub modes: usize,
    pub dt: f64,
    increments: Vec<f64>,
    q: Vec<f64>,
    noise_seed: u64,
    key: PathKey,
}

impl NoisePath {
    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.modes..(n + 1) * self.modes]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn key(&self) -> PathKey {
        self.key
    }

    /// Brownian-bridge refinement of step `n` into `m` equal sub-steps,
    /// conditioned on the coarse increment: returns `m x K` sub-increments
    /// whose column sums reproduce `increment(n)` up to roundoff.
    pub fn bridge(&self, n: usize, m: usize) -> Result<DMatrix<f64>> {
        if m < 2 {
            return Err(FsiError::config("diagnostics.refinement", "must be at least 2"));
        }
        let mut normals = KeyedNormals::new(self.noise_seed, self.key);
        let stream = 1 + m as u64;
        let mut out = DMatrix::zeros(m, self.modes);
        for k in 0..self.modes {
            let base = (n * self.modes + k) as u64 * m as u64;
            let z: Vec<f64> = (0..m as u64).map(|j| normals.normal(stream, base + j)).collect();
            let mean = z.iter().sum::<f64>() / m as f64;
            let scale = (self.dt * self.q[k] / m as f64).sqrt();
            let coarse = self.increment(n)[k] / m as f64;
            for j in 0..m {
                out[(j, k)] = scale * (z[j] - mean) + coarse;
            }
        }
        Ok(out)
    }
}

/// Draws `steps` increments of length `dt` for one path.
pub fn sample_path(spec: &NoiseSpec, key: PathKey, steps: usize, dt: f64) -> Result<NoisePath> {
    spec.validate()?;
    if steps == 0 {
        return Err(FsiError::config("time.N", "must be at least 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FsiError::config("time.T", "time step must be positive"));
    }
    let k = spec.modes;
    let mut normals = KeyedNormals::new(spec.seed, key);
    let (fine_steps, group) = match spec.base_steps {
        Some(b) if b != steps => {
            if b % steps != 0 {
                return Err(FsiError::config(
                    "noise.base_steps",
                    format!("{b} is not a multiple of the step count {steps}"),
                ));
            }
            (b, b / steps)
        }
        _ => (steps, 1),
    };
    let fine_dt = dt / group as f64;
    let mut increments = vec![0.0; steps * k];
    // a silent coefficient ignores the Wiener process entirely, so runs
    // without noise are identical for every seed
    let fine_steps = if spec.is_silent() { 0 } else { fine_steps };
    for f in 0..fine_steps {
        let n = f / group;
        for mode in 0..k {
            let z = normals.normal(0, (f * k + mode) as u64);
            increments[n * k + mode] += (fine_dt * spec.q[mode]).sqrt() * z;
        }
    }
    Ok(NoisePath { steps, modes: k, dt, increments, q: spec.q.clone(), noise_seed: spec.seed, key })
}

/// Discrete forcing `(G(U, eta*) dW, Q)` of the example coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseForcing {
    pub xi: f64,
    /// `xi * M(R + eta*) u`
    pub fluid: DVector<f64>,
    /// `xi * M_H v`
    pub structure: DVector<f64>,
}

/// Applies `G(u, v, eta*) = ((R + eta*) u, v) Phi` to an increment, given the
/// Jacobian-weighted fluid mass `M(R + eta*)` and the wall mass.
pub fn apply_g(
    mass: &CscMatrix,
    wall_mass: &DMatrix<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    increment: &[f64],
    spec: &NoiseSpec,
) -> Result<NoiseForcing> {
    if increment.len() != spec.modes {
        return Err(FsiError::config(
            "noise.modes",
            format!("increment has {} entries, expected {}", increment.len(), spec.modes),
        ));
    }
    if u.len() != mass.dim() || v.len() != wall_mass.nrows() {
        return Err(FsiError::config("state", "state dimensions do not match the discretization"));
    }
    let xi = spec.project(increment);
    Ok(NoiseForcing { xi, fluid: mass.mul_vec(u) * xi, structure: wall_mass * v * xi })
}

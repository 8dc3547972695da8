//! Diagonal Q-Wiener covariances, deterministic replica-keyed noise
//! streams, and the p = 2 noise-regularity functional.
//!
//! Covariances are diagonal in the Dirichlet eigenbasis, so increments,
//! traces and the regularity functional are all closed-form per-mode
//! expressions. A mollification parameter `delta` damps mode `n` by
//! `exp(-2 delta lambda_n)`; `delta = 0` is the identity.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::spectral::{dirichlet_eigenvalue, EigenBasis, SpectralField};

/// Which equation a stream drives. Distinct roles never alias: the role
/// tag enters the counter key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamRole {
    SlowNoise,
    FastNoise,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::SlowNoise => 0x736c_6f77, // "slow"
            StreamRole::FastNoise => 0x6661_7374, // "fast"
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamRole::SlowNoise => "slow-noise",
            StreamRole::FastNoise => "fast-noise",
        }
    }
}

#[inline]
fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Counter-based Gaussian stream keyed by `(seed, replica, role, step,
/// mode)`. Draws depend only on the key, never on call order, so replicas
/// are reproducible bit-for-bit under any parallel schedule.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    replica: u64,
    role: StreamRole,
    step: u64,
    base: u64,
}

impl RngStream {
    pub fn new(seed: u64, replica: u64, role: StreamRole) -> Self {
        let mut base = avalanche(seed ^ GOLDEN);
        base = avalanche(base ^ replica.wrapping_mul(0xd6e8_feb8_6659_fd93));
        base = avalanche(base ^ role.tag().wrapping_mul(0xca5a_8269_51ed_58f3));
        Self {
            seed,
            replica,
            role,
            step: 0,
            base,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    pub fn role(&self) -> StreamRole {
        self.role
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Standard Gaussian for `(current step, mode)` by Box-Muller over two
    /// counter words.
    #[inline]
    fn gaussian(&self, mode: u64) -> f64 {
        let k = avalanche(
            self.base ^ self.step.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ mode.wrapping_mul(GOLDEN),
        );
        let a = avalanche(k.wrapping_add(GOLDEN));
        let b = avalanche(k.wrapping_add(GOLDEN.wrapping_mul(2)));
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0);
        let u2 = (b >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fill one mode-indexed Gaussian block and advance the step counter.
    pub fn fill_gaussians(&mut self, out: &mut [f64]) {
        for (mode, o) in out.iter_mut().enumerate() {
            *o = self.gaussian(mode as u64);
        }
        self.step += 1;
    }

    /// Single Gaussian draw (mode 0 of the current step).
    pub fn next_gaussian(&mut self) -> f64 {
        let z = self.gaussian(0);
        self.step += 1;
        z
    }
}

/// Families of diagonal mode weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovarianceFamily {
    /// `q_n = 0` (noise switched off).
    Zero,
    /// `q_n = 1`.
    White,
    /// `q_n = lambda_n^{-b}`, `b >= 0`.
    PowerLaw { b: f64 },
    /// `q_n = 1` for the single given mode (1-based), else 0.
    Single { mode: usize },
}

/// Diagonal covariance with optional mollification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    family: CovarianceFamily,
    delta: f64,
    trace_class: bool,
}

impl CovarianceSpec {
    pub fn white() -> Self {
        Self {
            family: CovarianceFamily::White,
            delta: 0.0,
            trace_class: false,
        }
    }

    pub fn power_law(b: f64) -> Result<Self> {
        if b < 0.0 || !b.is_finite() {
            return Err(SimError::Config(format!(
                "power-law exponent must be nonnegative (got {b})"
            )));
        }
        Ok(Self {
            family: CovarianceFamily::PowerLaw { b },
            delta: 0.0,
            // sum lambda_n^{-b} ~ sum n^{-2b} converges iff b > 1/2
            trace_class: b > 0.5,
        })
    }

    pub fn single_mode(mode: usize) -> Result<Self> {
        if mode == 0 {
            return Err(SimError::Config("mode index is 1-based".into()));
        }
        Ok(Self {
            family: CovarianceFamily::Single { mode },
            delta: 0.0,
            trace_class: true,
        })
    }

    pub fn zero() -> Self {
        Self {
            family: CovarianceFamily::Zero,
            delta: 0.0,
            trace_class: true,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if delta < 0.0 || !delta.is_finite() {
            return Err(SimError::Config(format!(
                "mollification must be nonnegative (got {delta})"
            )));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn with_trace_class(mut self, flag: bool) -> Self {
        self.trace_class = flag;
        self
    }

    pub fn family(&self) -> CovarianceFamily {
        self.family
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn trace_class(&self) -> bool {
        self.trace_class
    }

    /// Raw mode weight `q_n` (1-based).
    pub fn weight(&self, n: usize) -> f64 {
        match self.family {
            CovarianceFamily::Zero => 0.0,
            CovarianceFamily::White => 1.0,
            CovarianceFamily::PowerLaw { b } => dirichlet_eigenvalue(n).powf(-b),
            CovarianceFamily::Single { mode } => {
                if n == mode {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Mollified weight `q_n exp(-2 delta lambda_n)`.
    pub fn effective_weight(&self, n: usize) -> f64 {
        let q = self.weight(n);
        if q == 0.0 || self.delta == 0.0 {
            return q;
        }
        q * (-2.0 * self.delta * dirichlet_eigenvalue(n)).exp()
    }

    /// Declared spatial-regularity exponent of the driven convolution.
    pub fn alpha_max(&self) -> f64 {
        match self.family {
            CovarianceFamily::Zero => 1.0,
            CovarianceFamily::White => 0.25,
            CovarianceFamily::PowerLaw { b } => (b / 2.0 + 0.25).min(1.0),
            CovarianceFamily::Single { .. } => 1.0,
        }
    }

    /// `Tr(e^{2 delta A} Q)` on the first `n_modes` modes.
    pub fn trace(&self, n_modes: usize) -> f64 {
        (1..=n_modes).map(|n| self.effective_weight(n)).sum()
    }

    /// Closed form of the p = 2 regularity functional
    /// `M_{alpha,2}(e^{delta A} Q^{1/2}, T)` on the truncation:
    /// `sqrt( sum_n q_n e^{-2 delta lambda_n} lambda_n^{2 alpha}
    ///        (1 - e^{-2 lambda_n T}) / (2 lambda_n) )`.
    pub fn regularity_functional(&self, alpha: f64, horizon: f64, n_modes: usize) -> Result<f64> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(SimError::Domain(format!(
                "horizon must be positive (got {horizon})"
            )));
        }
        let mut acc = 0.0;
        for n in 1..=n_modes {
            let q = self.effective_weight(n);
            if q == 0.0 {
                continue;
            }
            let l = dirichlet_eigenvalue(n);
            acc += q * l.powf(2.0 * alpha) * (1.0 - (-2.0 * l * horizon).exp()) / (2.0 * l);
        }
        Ok(acc.sqrt())
    }

    /// Per-mode standard deviations of an increment over `dt`.
    pub fn increment_std(&self, n_modes: usize, dt: f64) -> Result<Vec<f64>> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(SimError::Domain(format!(
                "increment length must be positive (got {dt})"
            )));
        }
        Ok((1..=n_modes)
            .map(|n| (self.effective_weight(n) * dt).sqrt())
            .collect())
    }

    /// One Q-Wiener increment over `dt` from the given stream.
    pub fn wiener_increment(
        &self,
        basis: &Arc<EigenBasis>,
        dt: f64,
        rng: &mut RngStream,
    ) -> Result<SpectralField> {
        let std = self.increment_std(basis.n_modes(), dt)?;
        let mut z = vec![0.0; basis.n_modes()];
        rng.fill_gaussians(&mut z);
        let coeffs = std.iter().zip(&z).map(|(s, g)| s * g).collect();
        SpectralField::from_coeffs(basis, coeffs)
    }
}

//! The fast Ornstein-Uhlenbeck process: exact transitions, the
//! linear-implicit Euler micro-scheme, both invariant laws in closed form,
//! and the exponential mixing rate.
//!
//! Per mode the continuous process is `dy_n = -lambda_n y_n dt + sqrt(q_n)
//! dw_n`, so its invariant variance is `v_n = q_n / (2 lambda_n)` and the
//! micro chain `y' = (y + sqrt(q_n tau) Z) / (1 + tau lambda_n)` has the
//! stationary variance `v_n^tau = q_n / (lambda_n (2 + tau lambda_n))`.

use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::forcing::{CovarianceSpec, RngStream};
use crate::spectral::{dirichlet_eigenvalue, EigenBasis, SpectralField};

/// The linear fast process: covariance of its driving noise, declared
/// regularity exponent, and the spectral gap driving `rho(t) = e^{-c t}`.
#[derive(Debug, Clone)]
pub struct FastProcessModel {
    covariance: CovarianceSpec,
    gamma_max: f64,
    spectral_gap: f64,
}

impl FastProcessModel {
    pub fn new(covariance: CovarianceSpec) -> Self {
        let gamma_max = default_gamma_max(&covariance);
        Self {
            covariance,
            gamma_max,
            spectral_gap: dirichlet_eigenvalue(1),
        }
    }

    pub fn with_gamma_max(mut self, gamma_max: f64) -> Result<Self> {
        if !(0.0 < gamma_max && gamma_max <= 0.5) {
            return Err(SimError::Config(format!(
                "gamma_max must lie in (0, 1/2] (got {gamma_max})"
            )));
        }
        self.gamma_max = gamma_max;
        Ok(self)
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        &self.covariance
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    pub fn spectral_gap(&self) -> f64 {
        self.spectral_gap
    }

    /// Stationary variance `v_n` of mode `n` (1-based).
    pub fn invariant_variance(&self, n: usize) -> f64 {
        self.covariance.effective_weight(n) / (2.0 * dirichlet_eigenvalue(n))
    }

    /// Stationary variance `v_n^tau` of the micro chain.
    pub fn micro_variance(&self, n: usize, tau: f64) -> f64 {
        let l = dirichlet_eigenvalue(n);
        self.covariance.effective_weight(n) / (l * (2.0 + tau * l))
    }

    /// Per-mode variances of the invariant law: `tau = 0` gives the law of
    /// the continuous process, `tau > 0` the law of the micro chain.
    pub fn invariant_law_moments(&self, n_modes: usize, tau: f64) -> Result<Vec<f64>> {
        if tau < 0.0 || !tau.is_finite() {
            return Err(SimError::Domain(format!(
                "tau must be nonnegative (got {tau})"
            )));
        }
        Ok((1..=n_modes)
            .map(|n| {
                if tau == 0.0 {
                    self.invariant_variance(n)
                } else {
                    self.micro_variance(n, tau)
                }
            })
            .collect())
    }

    /// Exponential mixing rate `rho(t) = e^{-c t}` with `c = lambda_1`.
    pub fn mixing_rate(&self, t: f64) -> Result<f64> {
        if t < 0.0 || !t.is_finite() {
            return Err(SimError::Domain(format!(
                "mixing rate needs t >= 0 (got {t})"
            )));
        }
        Ok((-self.spectral_gap * t).exp())
    }

    /// Exact OU transition over `dt`:
    /// `y' = e^{-lambda dt} y + sqrt(v (1 - e^{-2 lambda dt})) Z`.
    pub fn ou_exact_step(
        &self,
        y: &SpectralField,
        dt: f64,
        rng: &mut RngStream,
    ) -> Result<SpectralField> {
        let stepper = OuStepper::new(self, y.basis().n_modes(), dt)?;
        let mut coeffs = y.coeffs().to_vec();
        let mut z = vec![0.0; coeffs.len()];
        stepper.step(&mut coeffs, &mut z, rng);
        SpectralField::from_coeffs(y.basis(), coeffs)
    }

    /// Draw one sample from the invariant law (`tau = 0`: exact process,
    /// `tau > 0`: micro chain).
    pub fn sample_invariant(
        &self,
        basis: &Arc<EigenBasis>,
        tau: f64,
        rng: &mut RngStream,
    ) -> Result<SpectralField> {
        let v = self.invariant_law_moments(basis.n_modes(), tau)?;
        let mut z = vec![0.0; basis.n_modes()];
        rng.fill_gaussians(&mut z);
        let coeffs = v.iter().zip(&z).map(|(vi, zi)| vi.sqrt() * zi).collect();
        SpectralField::from_coeffs(basis, coeffs)
    }
}

fn default_gamma_max(cov: &CovarianceSpec) -> f64 {
    // sum lambda_n^{2 gamma - 1} q_n < infinity for gamma < gamma_max,
    // capped at 1/2
    use crate::forcing::CovarianceFamily::*;
    match cov.family() {
        Zero | Single { .. } => 0.5,
        White => 0.25,
        PowerLaw { b } => (b / 2.0 + 0.25).min(0.5),
    }
}

/// Precomputed exact OU transition for a fixed step.
#[derive(Debug, Clone)]
pub struct OuStepper {
    decay: Vec<f64>,
    noise_std: Vec<f64>,
}

impl OuStepper {
    pub fn new(model: &FastProcessModel, n_modes: usize, dt: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(SimError::Domain(format!(
                "transition length must be positive (got {dt})"
            )));
        }
        let mut decay = Vec::with_capacity(n_modes);
        let mut noise_std = Vec::with_capacity(n_modes);
        for n in 1..=n_modes {
            let l = dirichlet_eigenvalue(n);
            let d = (-l * dt).exp();
            decay.push(d);
            noise_std.push((model.invariant_variance(n) * (1.0 - d * d)).sqrt());
        }
        Ok(Self { decay, noise_std })
    }

    pub fn step(&self, y: &mut [f64], zbuf: &mut [f64], rng: &mut RngStream) {
        rng.fill_gaussians(zbuf);
        for ((yi, &d), (&s, &z)) in y
            .iter_mut()
            .zip(&self.decay)
            .zip(self.noise_std.iter().zip(zbuf.iter()))
        {
            *yi = d * *yi + s * z;
        }
    }
}

/// Precomputed micro transition `y' = (y + sqrt(q tau) Z) / (1 + tau lambda)`.
#[derive(Debug, Clone)]
pub struct MicroStepper {
    gain: Vec<f64>,
    noise_std: Vec<f64>,
}

impl MicroStepper {
    pub fn new(model: &FastProcessModel, n_modes: usize, tau: f64) -> Result<Self> {
        if tau <= 0.0 || !tau.is_finite() {
            return Err(SimError::Domain(format!(
                "micro step must be positive (got {tau})"
            )));
        }
        let mut gain = Vec::with_capacity(n_modes);
        let mut noise_std = Vec::with_capacity(n_modes);
        for n in 1..=n_modes {
            let l = dirichlet_eigenvalue(n);
            gain.push(1.0 / (1.0 + tau * l));
            noise_std.push((model.covariance().effective_weight(n) * tau).sqrt());
        }
        Ok(Self { gain, noise_std })
    }

    pub fn step(&self, y: &mut [f64], zbuf: &mut [f64], rng: &mut RngStream) {
        rng.fill_gaussians(zbuf);
        for ((yi, &g), (&s, &z)) in y
            .iter_mut()
            .zip(&self.gain)
            .zip(self.noise_std.iter().zip(zbuf.iter()))
        {
            *yi = g * (*yi + s * z);
        }
    }
}

/// Micro-chain state: the current field, the micro step, and the number of
/// steps taken so far.
#[derive(Debug, Clone)]
pub struct MicroSchemeState {
    field: SpectralField,
    tau: f64,
    steps: u64,
}

impl MicroSchemeState {
    pub fn new(field: SpectralField, tau: f64) -> Result<Self> {
        if tau <= 0.0 || !tau.is_finite() {
            return Err(SimError::Config(format!(
                "micro step must be positive (got {tau})"
            )));
        }
        Ok(Self {
            field,
            tau,
            steps: 0,
        })
    }

    pub fn field(&self) -> &SpectralField {
        &self.field
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Swap in a field advanced elsewhere, bumping the step counter.
    pub(crate) fn replace_field(&mut self, field: SpectralField, extra_steps: u64) {
        self.field = field;
        self.steps += extra_steps;
    }

    /// One linear-implicit Euler step of the chain.
    pub fn advance(&mut self, model: &FastProcessModel, rng: &mut RngStream) -> Result<()> {
        let stepper = MicroStepper::new(model, self.field.basis().n_modes(), self.tau)?;
        let mut coeffs = self.field.coeffs().to_vec();
        let mut z = vec![0.0; coeffs.len()];
        stepper.step(&mut coeffs, &mut z, rng);
        self.field = SpectralField::from_coeffs(self.field.basis(), coeffs)?;
        self.steps += 1;
        Ok(())
    }
}

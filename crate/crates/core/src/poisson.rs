//! Numerical probes of the corrector equation for the fast generator:
//! the semigroup representation of the corrector, a finite-difference
//! check of the generator identity, and sweeps of the zeroth-order growth
//! bounds.
//!
//! For the linear fast process, `Y_y(t)` is Gaussian per mode with mean
//! `e^{-lambda_n t} y_n` and variance `v_n (1 - e^{-2 lambda_n t})`, so the
//! inner expectation of the representation integral reduces to pointwise
//! scalar Gaussian averages, evaluated here by Gauss-Hermite quadrature;
//! the time integral uses Gauss-Legendre panels on a dyadic subdivision so
//! every modal decay scale is resolved.

use crate::error::{Result, SimError};
use crate::fast::FastProcessModel;
use crate::quad::{gauss_hermite, gauss_legendre_on};
use crate::reaction::{apply_nonlinearity, AveragedCoefficient, NonlinearitySpec};
use crate::spectral::SpectralField;

/// One corrector evaluation point plus its quadrature configuration.
#[derive(Debug, Clone)]
pub struct PoissonProbe {
    pub x: SpectralField,
    pub y: SpectralField,
    pub theta: SpectralField,
    /// Truncation horizon of the time integral.
    pub horizon: f64,
    /// Number of dyadic Gauss-Legendre panels on `[0, horizon]`.
    pub panels: usize,
    /// Gauss-Legendre order per panel.
    pub gl_order: usize,
    /// Gauss-Hermite order for the inner Gaussian averages.
    pub hermite_order: usize,
    /// Acceptable truncation tail `e^{-lambda_1 horizon}`.
    pub tail_tol: f64,
}

impl PoissonProbe {
    pub fn new(x: SpectralField, y: SpectralField, theta: SpectralField) -> Result<Self> {
        x.check_basis(&y)?;
        x.check_basis(&theta)?;
        Ok(Self {
            x,
            y,
            theta,
            horizon: 3.0,
            panels: 24,
            gl_order: 16,
            hermite_order: 40,
            tail_tol: 1e-10,
        })
    }

    pub fn with_horizon(mut self, horizon: f64, tail_tol: f64) -> Self {
        self.horizon = horizon;
        self.tail_tol = tail_tol;
        self
    }

    pub fn with_quadrature(mut self, panels: usize, gl_order: usize, hermite_order: usize) -> Self {
        self.panels = panels;
        self.gl_order = gl_order;
        self.hermite_order = hermite_order;
        self
    }

    fn validate(&self, model: &FastProcessModel) -> Result<()> {
        if self.horizon <= 0.0 {
            return Err(SimError::Config("horizon must be positive".into()));
        }
        let tail = (-model.spectral_gap() * self.horizon).exp();
        if tail >= self.tail_tol {
            return Err(SimError::Config(format!(
                "mixing tail {tail:.3e} exceeds the allowed {:.3e}; increase the horizon",
                self.tail_tol
            )));
        }
        if self.panels == 0 || self.gl_order == 0 || self.hermite_order < 2 {
            return Err(SimError::Config("quadrature orders too small".into()));
        }
        Ok(())
    }
}

/// Corrector value
/// `Phi(x, y, theta) = int_0^T E[<F(x, Y_y(t)) - F_bar(x), theta>] dt`.
pub fn evaluate_corrector(
    probe: &PoissonProbe,
    spec: &NonlinearitySpec,
    model: &FastProcessModel,
) -> Result<f64> {
    probe.validate(model)?;
    let basis = probe.x.basis();
    let n = basis.n_modes();
    let p = basis.grid().len();
    let w = basis.quad_weight();

    let mut x_grid = vec![0.0; p];
    basis.synthesize(probe.x.coeffs(), &mut x_grid);
    let mut theta_grid = vec![0.0; p];
    basis.synthesize(probe.theta.coeffs(), &mut theta_grid);

    let v: Vec<f64> = (1..=n).map(|k| model.invariant_variance(k)).collect();
    let mut sigma_inf = vec![0.0; p];
    basis.synthesize_squared(&v, &mut sigma_inf);
    let fbar: Vec<f64> = x_grid
        .iter()
        .zip(&sigma_inf)
        .map(|(&z1, &var)| spec.gaussian_average(z1, 0.0, var))
        .collect();

    let (h_nodes, h_weights) = gauss_hermite(probe.hermite_order);
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();

    let mut mean_coeff = vec![0.0; n];
    let mut var_coeff = vec![0.0; n];
    let mut mean_grid = vec![0.0; p];
    let mut var_grid = vec![0.0; p];

    let mut edges = Vec::with_capacity(probe.panels + 1);
    edges.push(0.0);
    for i in 1..=probe.panels {
        edges.push(probe.horizon * 2.0f64.powi(i as i32 - probe.panels as i32));
    }

    let mut total = 0.0;
    for win in edges.windows(2) {
        let (ts, tw) = gauss_legendre_on(probe.gl_order, win[0], win[1]);
        for (&t, &wt) in ts.iter().zip(&tw) {
            for k in 0..n {
                let decay = (-basis.eigenvalue(k + 1) * t).exp();
                mean_coeff[k] = decay * probe.y.coeffs()[k];
                var_coeff[k] = v[k] * (1.0 - decay * decay);
            }
            basis.synthesize(&mean_coeff, &mut mean_grid);
            basis.synthesize_squared(&var_coeff, &mut var_grid);
            let mut space = 0.0;
            for j in 0..p {
                let th = theta_grid[j];
                if th == 0.0 {
                    continue;
                }
                let scale = (2.0 * var_grid[j]).sqrt();
                let mut e_f = 0.0;
                for (&u, &hw) in h_nodes.iter().zip(&h_weights) {
                    e_f += hw * spec.eval(x_grid[j], mean_grid[j] + scale * u);
                }
                e_f *= inv_sqrt_pi;
                space += th * (e_f - fbar[j]);
            }
            total += wt * space * w;
        }
    }
    Ok(total)
}

/// Residual of the generator identity
/// `|L Phi(y) + <F(x, y) - F_bar(x), theta>|`, with
/// `L Phi = <A y, grad Phi> + (1/2) sum_n q_n d^2 Phi / d y_n^2`
/// evaluated by central finite differences in the mode coordinates.
pub fn generator_identity_check(
    probe: &PoissonProbe,
    spec: &NonlinearitySpec,
    model: &FastProcessModel,
    h_y: f64,
) -> Result<f64> {
    if h_y <= 0.0 {
        return Err(SimError::Domain("finite-difference step must be positive".into()));
    }
    let basis = probe.x.basis();
    let n = basis.n_modes();
    let phi0 = evaluate_corrector(probe, spec, model)?;

    let mut generator = 0.0;
    for k in 0..n {
        let mut plus = probe.clone();
        let mut coeffs = probe.y.coeffs().to_vec();
        coeffs[k] += h_y;
        plus.y = SpectralField::from_coeffs(basis, coeffs.clone())?;
        let phi_plus = evaluate_corrector(&plus, spec, model)?;
        coeffs[k] -= 2.0 * h_y;
        let mut minus = probe.clone();
        minus.y = SpectralField::from_coeffs(basis, coeffs)?;
        let phi_minus = evaluate_corrector(&minus, spec, model)?;

        let grad = (phi_plus - phi_minus) / (2.0 * h_y);
        let second = (phi_plus - 2.0 * phi0 + phi_minus) / (h_y * h_y);
        let lambda = basis.eigenvalue(k + 1);
        let q = model.covariance().effective_weight(k + 1);
        generator += -lambda * probe.y.coeffs()[k] * grad + 0.5 * q * second;
    }

    let avg = AveragedCoefficient::new(spec, model, basis, 0.0)?;
    let residual_field = apply_nonlinearity(spec, &probe.x, &probe.y)?.sub(&avg.apply(&probe.x)?)?;
    let rhs = residual_field.inner(&probe.theta)?;
    Ok((generator + rhs).abs())
}

/// Which zeroth-order corrector bound a sweep probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectorBound {
    /// `|Phi(x, y, theta)| <= C (1 + |y|_{L^2}) |theta|_{L^2}`, swept over
    /// scaled fast states `y = s y0`.
    GrowthInY,
    /// `|Phi(x, y, theta)| <= C |(-A)^{-gamma} theta|_{L^2}`, swept over
    /// `theta = e_k`.
    DualNormInTheta,
}

impl CorrectorBound {
    pub fn id(self) -> &'static str {
        match self {
            CorrectorBound::GrowthInY => "growth_in_y",
            CorrectorBound::DualNormInTheta => "dual_norm_in_theta",
        }
    }
}

/// One row of a bound sweep: the swept input scale, the corrector value,
/// the bound evaluated with constant 1, and their ratio.
#[derive(Debug, Clone)]
pub struct BoundRow {
    pub id: &'static str,
    pub scale: f64,
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Sweep one of the zeroth-order bounds. For [`CorrectorBound::GrowthInY`]
/// the `scales` multiply the probe's `y`; for
/// [`CorrectorBound::DualNormInTheta`] they are ignored and the sweep runs
/// over `theta = e_k`, `k = 1..=n_modes`, reporting against
/// `|(-A)^{-gamma} e_k| = lambda_k^{-gamma}`.
pub fn bound_probe(
    kind: CorrectorBound,
    probe: &PoissonProbe,
    spec: &NonlinearitySpec,
    model: &FastProcessModel,
    scales: &[f64],
    gamma: f64,
) -> Result<Vec<BoundRow>> {
    let basis = probe.x.basis();
    let mut rows = Vec::new();
    match kind {
        CorrectorBound::GrowthInY => {
            for &s in scales {
                let mut p = probe.clone();
                p.y = probe.y.scale(s);
                let value = evaluate_corrector(&p, spec, model)?.abs();
                let bound = (1.0 + p.y.l2_norm()) * probe.theta.l2_norm();
                rows.push(BoundRow {
                    id: kind.id(),
                    scale: s,
                    value,
                    bound,
                    ratio: if bound > 0.0 { value / bound } else { 0.0 },
                });
            }
        }
        CorrectorBound::DualNormInTheta => {
            for k in 1..=basis.n_modes() {
                let mut p = probe.clone();
                p.theta = SpectralField::unit_mode(basis, k);
                let value = evaluate_corrector(&p, spec, model)?.abs();
                let bound = basis.eigenvalue(k).powf(-gamma);
                rows.push(BoundRow {
                    id: kind.id(),
                    scale: k as f64,
                    value,
                    bound,
                    ratio: value / bound,
                });
            }
        }
    }
    Ok(rows)
}

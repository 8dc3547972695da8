//! Pointwise nonlinearities `f(z1, z2) = g(z1) + c h(z2)`, their Nemytskii
//! lift, and the averaged coefficients against the product-Gaussian
//! invariant laws of the fast process.
//!
//! Because the invariant law is a product Gaussian over modes, the marginal
//! of `y(xi)` at a point is the scalar Gaussian `N(0, sigma^2(xi))` with
//! `sigma^2(xi) = sum_n v_n e_n(xi)^2`. The average of `f` in its second
//! slot therefore reduces to a pointwise scalar Gaussian average, which is
//! closed-form for every shipped family.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::fast::FastProcessModel;
use crate::spectral::{EigenBasis, SpectralField};

/// Slow part `g(z1)`, C^4 with bounded derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlowPart {
    Zero,
    Sin,
    /// `scale * tanh(z / scale)`.
    Tanh { scale: f64 },
    /// Smooth clipped identity `z / sqrt(1 + (z/limit)^2)`.
    SoftClip { limit: f64 },
}

impl SlowPart {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            SlowPart::Zero => 0.0,
            SlowPart::Sin => z.sin(),
            SlowPart::Tanh { scale } => scale * (z / scale).tanh(),
            SlowPart::SoftClip { limit } => {
                let r = z / limit;
                z / (1.0 + r * r).sqrt()
            }
        }
    }

    pub fn d1(&self, z: f64) -> f64 {
        match *self {
            SlowPart::Zero => 0.0,
            SlowPart::Sin => z.cos(),
            SlowPart::Tanh { scale } => {
                let t = (z / scale).tanh();
                1.0 - t * t
            }
            SlowPart::SoftClip { limit } => {
                let r = z / limit;
                (1.0 + r * r).powf(-1.5)
            }
        }
    }

    pub fn d2(&self, z: f64) -> f64 {
        match *self {
            SlowPart::Zero => 0.0,
            SlowPart::Sin => -z.sin(),
            SlowPart::Tanh { scale } => {
                let t = (z / scale).tanh();
                -2.0 * t * (1.0 - t * t) / scale
            }
            SlowPart::SoftClip { limit } => {
                let r = z / limit;
                -3.0 * r / (limit * (1.0 + r * r).powf(2.5))
            }
        }
    }

    /// `sup |g'|`; each family is normalized so this is 1 (0 for `Zero`).
    pub fn lipschitz(&self) -> f64 {
        match *self {
            SlowPart::Zero => 0.0,
            _ => 1.0,
        }
    }
}

/// Fast part `h(z2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FastPart {
    /// `h = z2` (family `affine_y`).
    Affine,
    /// `h = z2^2` (family `quadratic_y`).
    Quadratic,
    /// `h = cos(z2)` (family `cosine_y`).
    Cosine,
}

impl FastPart {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            FastPart::Affine => z,
            FastPart::Quadratic => z * z,
            FastPart::Cosine => z.cos(),
        }
    }

    pub fn d1(&self, z: f64) -> f64 {
        match self {
            FastPart::Affine => 1.0,
            FastPart::Quadratic => 2.0 * z,
            FastPart::Cosine => -z.sin(),
        }
    }

    /// `E h(Z)` for `Z ~ N(mean, var)`, in closed form.
    pub fn gaussian_mean(&self, mean: f64, var: f64) -> f64 {
        match self {
            FastPart::Affine => mean,
            FastPart::Quadratic => mean * mean + var,
            FastPart::Cosine => mean.cos() * (-var / 2.0).exp(),
        }
    }
}

/// `f(z1, z2) = g(z1) + c h(z2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub g: SlowPart,
    pub family: FastPart,
    pub c: f64,
}

impl NonlinearitySpec {
    pub fn new(g: SlowPart, family: FastPart, c: f64) -> Self {
        Self { g, family, c }
    }

    #[inline]
    pub fn eval(&self, z1: f64, z2: f64) -> f64 {
        self.g.eval(z1) + self.c * self.family.eval(z2)
    }

    pub fn d_z1(&self, z1: f64, _z2: f64) -> f64 {
        self.g.d1(z1)
    }

    pub fn d_z2(&self, _z1: f64, z2: f64) -> f64 {
        self.c * self.family.d1(z2)
    }

    pub fn d2_z1(&self, z1: f64, _z2: f64) -> f64 {
        self.g.d2(z1)
    }

    /// Lipschitz constant of `x |-> F(x, y)`, i.e. `sup |d f / d z1|`.
    pub fn lipschitz_z1(&self) -> f64 {
        self.g.lipschitz()
    }

    /// `E f(z1, Z)` for `Z ~ N(mean, var)`: the pointwise averaged
    /// nonlinearity.
    #[inline]
    pub fn gaussian_average(&self, z1: f64, mean: f64, var: f64) -> f64 {
        self.g.eval(z1) + self.c * self.family.gaussian_mean(mean, var)
    }
}

/// Nemytskii application `F(x, y)(xi) = f(x(xi), y(xi))`, projected back to
/// the truncation by quadrature.
pub fn apply_nonlinearity(
    spec: &NonlinearitySpec,
    x: &SpectralField,
    y: &SpectralField,
) -> Result<SpectralField> {
    x.check_basis(y)?;
    let basis = x.basis();
    let p = basis.grid().len();
    let mut gx = vec![0.0; p];
    let mut gy = vec![0.0; p];
    basis.synthesize(x.coeffs(), &mut gx);
    basis.synthesize(y.coeffs(), &mut gy);
    let mut fv = vec![0.0; p];
    for ((f, &a), &b) in fv.iter_mut().zip(&gx).zip(&gy) {
        *f = spec.eval(a, b);
    }
    let mut out = vec![0.0; basis.n_modes()];
    basis.project(&fv, &mut out);
    SpectralField::from_coeffs(basis, out)
}

/// Closed-form averaged coefficient: the pointwise variance profile of the
/// chosen invariant law, frozen on the grid.
#[derive(Debug, Clone)]
pub struct AveragedCoefficient {
    spec: NonlinearitySpec,
    basis: Arc<EigenBasis>,
    variance_grid: Vec<f64>,
}

impl AveragedCoefficient {
    /// Build from the fast model; `tau = 0` averages against the law of the
    /// continuous process, `tau > 0` against the micro-chain law.
    pub fn new(
        spec: &NonlinearitySpec,
        model: &FastProcessModel,
        basis: &Arc<EigenBasis>,
        tau: f64,
    ) -> Result<Self> {
        let v = model.invariant_law_moments(basis.n_modes(), tau)?;
        let mut variance_grid = vec![0.0; basis.grid().len()];
        basis.synthesize_squared(&v, &mut variance_grid);
        Ok(Self {
            spec: spec.clone(),
            basis: Arc::clone(basis),
            variance_grid,
        })
    }

    pub fn variance_grid(&self) -> &[f64] {
        &self.variance_grid
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    /// Evaluate the averaged nonlinearity on already-synthesized grid
    /// values of `x`.
    pub fn eval_grid(&self, x_grid: &[f64], out: &mut [f64]) {
        for ((o, &z1), &var) in out.iter_mut().zip(x_grid).zip(&self.variance_grid) {
            *o = self.spec.gaussian_average(z1, 0.0, var);
        }
    }

    /// `F_bar(x)` as a spectral field.
    pub fn apply(&self, x: &SpectralField) -> Result<SpectralField> {
        if !EigenBasis::same_basis(&self.basis, x.basis()) {
            return Err(SimError::BasisMismatch(
                "averaged coefficient built on a different basis".into(),
            ));
        }
        let p = self.basis.grid().len();
        let mut gx = vec![0.0; p];
        self.basis.synthesize(x.coeffs(), &mut gx);
        let mut fv = vec![0.0; p];
        self.eval_grid(&gx, &mut fv);
        let mut out = vec![0.0; self.basis.n_modes()];
        self.basis.project(&fv, &mut out);
        SpectralField::from_coeffs(&self.basis, out)
    }
}

/// `F(x, y) - F_bar(x)`; mean zero when `y` follows the averaged law.
pub fn averaging_residual(
    spec: &NonlinearitySpec,
    avg: &AveragedCoefficient,
    x: &SpectralField,
    y: &SpectralField,
) -> Result<SpectralField> {
    apply_nonlinearity(spec, x, y)?.sub(&avg.apply(x)?)
}

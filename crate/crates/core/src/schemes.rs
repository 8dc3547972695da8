//! Time integrators for the slow equation: the fully-coupled fine
//! reference, the averaged scheme (exact or micro-chain law), and the
//! multiscale macro scheme fed by temporal averages of the micro chain.
//!
//! Every scheme advances the slow state by the linear-implicit Euler
//! update `x' = (I - h A)^{-1} (x + h * drift + dw)`, which is diagonal on
//! the truncation and unconditionally stable. Noise increments are drawn
//! outside the steppers so several schemes can be driven by the same
//! Q-Wiener path.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::fast::{FastProcessModel, MicroSchemeState, MicroStepper, OuStepper};
use crate::forcing::{CovarianceSpec, RngStream, StreamRole};
use crate::reaction::{AveragedCoefficient, NonlinearitySpec};
use crate::spectral::{EigenBasis, SpectralField};

/// Full multiscale configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    /// Time-scale separation, in (0, 1].
    pub epsilon: f64,
    /// Macro step.
    pub dt: f64,
    /// Micro step (fast clock).
    pub tau: f64,
    /// Micro steps per macro step (M).
    pub micro_steps: usize,
    /// Averaging window (M_a), the trailing states entering the average.
    pub avg_window: usize,
    /// Horizon T; `T / dt` must be an integer.
    pub horizon: f64,
    pub n_modes: usize,
    /// Extra mollification applied to the slow covariance.
    pub delta: f64,
}

impl HmmParams {
    /// `M = ceil(dt / (epsilon tau))`, the time-scale coupling.
    pub fn auto_micro_steps(dt: f64, epsilon: f64, tau: f64) -> usize {
        (dt / (epsilon * tau)).ceil() as usize
    }

    pub fn macro_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(SimError::Config(format!(
                "epsilon must lie in (0, 1] (got {})",
                self.epsilon
            )));
        }
        if self.dt <= 0.0 || self.tau <= 0.0 {
            return Err(SimError::Config(
                "macro and micro steps must be positive".into(),
            ));
        }
        if self.avg_window == 0 || self.avg_window > self.micro_steps {
            return Err(SimError::Config(format!(
                "averaging window must satisfy 1 <= Ma <= M (got Ma={}, M={})",
                self.avg_window, self.micro_steps
            )));
        }
        if self.horizon < 0.0 {
            return Err(SimError::Config("horizon must be nonnegative".into()));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(SimError::Config(format!(
                "horizon must be an integer number of macro steps (T/dt = {steps})"
            )));
        }
        if self.n_modes == 0 {
            return Err(SimError::Config("n_modes must be positive".into()));
        }
        if self.delta < 0.0 {
            return Err(SimError::Config("mollification must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Snapshots of one integration at the macro times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// Coefficient vectors of the slow state at each time.
    pub snapshots: Vec<Vec<f64>>,
    /// Fast-state checkpoints (direct and multiscale schemes only).
    pub fast_checkpoints: Option<Vec<Vec<f64>>>,
    /// Descriptors of the streams consumed.
    pub streams: Vec<String>,
}

/// Q-Wiener increment source for a fixed step, with its own stream.
pub struct WienerSource {
    std: Vec<f64>,
    stream: RngStream,
    z: Vec<f64>,
    out: Vec<f64>,
}

impl WienerSource {
    pub fn new(cov: &CovarianceSpec, n_modes: usize, dt: f64, stream: RngStream) -> Result<Self> {
        let std = cov.increment_std(n_modes, dt)?;
        Ok(Self {
            std,
            stream,
            z: vec![0.0; n_modes],
            out: vec![0.0; n_modes],
        })
    }

    /// Draw the next increment; the slice is valid until the next call.
    pub fn draw(&mut self) -> &[f64] {
        self.stream.fill_gaussians(&mut self.z);
        for ((o, &s), &z) in self.out.iter_mut().zip(&self.std).zip(&self.z) {
            *o = s * z;
        }
        &self.out
    }

    /// Total increment variance `sum_n q_n dt` (trace times step).
    pub fn increment_variance(&self) -> f64 {
        self.std.iter().map(|s| s * s).sum()
    }
}

fn resolvent_gain(basis: &EigenBasis, h: f64) -> Vec<f64> {
    basis
        .eigenvalues()
        .iter()
        .map(|&l| 1.0 / (1.0 + h * l))
        .collect()
}

#[inline]
fn implicit_euler_update(gain: &[f64], x: &mut [f64], drift: &[f64], h: f64, dw: &[f64]) {
    for (((xi, &g), &f), &w) in x.iter_mut().zip(gain).zip(drift).zip(dw) {
        *xi = g * (*xi + h * f + w);
    }
}

/// Averaged scheme: `x' = S_dt (x + dt F_bar(x) + dw)`. The choice of
/// invariant law (exact or micro-chain) is fixed by the coefficient.
pub struct AveragedStepper {
    basis: Arc<EigenBasis>,
    avg: AveragedCoefficient,
    gain: Vec<f64>,
    dt: f64,
    gx: Vec<f64>,
    gf: Vec<f64>,
    fc: Vec<f64>,
}

impl AveragedStepper {
    pub fn new(basis: &Arc<EigenBasis>, avg: AveragedCoefficient, dt: f64) -> Result<Self> {
        if dt <= 0.0 {
            return Err(SimError::Config("step must be positive".into()));
        }
        let p = basis.grid().len();
        Ok(Self {
            gain: resolvent_gain(basis, dt),
            basis: Arc::clone(basis),
            avg,
            dt,
            gx: vec![0.0; p],
            gf: vec![0.0; p],
            fc: vec![0.0; basis.n_modes()],
        })
    }

    pub fn step(&mut self, x: &mut [f64], dw: &[f64]) {
        self.basis.synthesize(x, &mut self.gx);
        self.avg.eval_grid(&self.gx, &mut self.gf);
        self.basis.project(&self.gf, &mut self.fc);
        implicit_euler_update(&self.gain, x, &self.fc, self.dt, dw);
    }
}

/// Fully-coupled reference: the slow state advances with fine step `h`
/// using the current fast state in the drift; the fast state advances by
/// the exact OU transition over `h / epsilon`, so the only fast-scale
/// error source is the averaging itself.
pub struct DirectStepper {
    basis: Arc<EigenBasis>,
    spec: NonlinearitySpec,
    gain: Vec<f64>,
    h: f64,
    fast: OuStepper,
    gx: Vec<f64>,
    gy: Vec<f64>,
    gf: Vec<f64>,
    fc: Vec<f64>,
    z: Vec<f64>,
}

impl DirectStepper {
    pub fn new(
        basis: &Arc<EigenBasis>,
        spec: &NonlinearitySpec,
        fast_model: &FastProcessModel,
        epsilon: f64,
        h: f64,
    ) -> Result<Self> {
        if h <= 0.0 {
            return Err(SimError::Config("fine step must be positive".into()));
        }
        if h > epsilon {
            return Err(SimError::Config(format!(
                "fine step {h} does not resolve the fast scale (epsilon = {epsilon})"
            )));
        }
        let p = basis.grid().len();
        let n = basis.n_modes();
        Ok(Self {
            gain: resolvent_gain(basis, h),
            basis: Arc::clone(basis),
            spec: spec.clone(),
            h,
            fast: OuStepper::new(fast_model, n, h / epsilon)?,
            gx: vec![0.0; p],
            gy: vec![0.0; p],
            gf: vec![0.0; p],
            fc: vec![0.0; n],
            z: vec![0.0; n],
        })
    }

    pub fn step(&mut self, x: &mut [f64], y: &mut [f64], dw: &[f64], fast_rng: &mut RngStream) {
        self.basis.synthesize(x, &mut self.gx);
        self.basis.synthesize(y, &mut self.gy);
        for ((f, &a), &b) in self.gf.iter_mut().zip(&self.gx).zip(&self.gy) {
            *f = self.spec.eval(a, b);
        }
        self.basis.project(&self.gf, &mut self.fc);
        implicit_euler_update(&self.gain, x, &self.fc, self.h, dw);
        self.fast.step(y, &mut self.z, fast_rng);
    }
}

/// Multiscale macro scheme: per macro step the micro chain advances `M`
/// steps and the drift is the temporal average of `F(x, .)` over the
/// trailing `M_a` chain states.
pub struct HmmStepper {
    basis: Arc<EigenBasis>,
    spec: NonlinearitySpec,
    gain: Vec<f64>,
    dt: f64,
    micro: MicroStepper,
    micro_steps: usize,
    avg_window: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
    /// `avg_window x grid` rows of pointwise `f` values, reduced pairwise.
    window: Vec<f64>,
    fc: Vec<f64>,
    z: Vec<f64>,
}

impl HmmStepper {
    pub fn new(
        basis: &Arc<EigenBasis>,
        spec: &NonlinearitySpec,
        fast_model: &FastProcessModel,
        params: &HmmParams,
    ) -> Result<Self> {
        params.validate()?;
        let p = basis.grid().len();
        let n = basis.n_modes();
        Ok(Self {
            gain: resolvent_gain(basis, params.dt),
            basis: Arc::clone(basis),
            spec: spec.clone(),
            dt: params.dt,
            micro: MicroStepper::new(fast_model, n, params.tau)?,
            micro_steps: params.micro_steps,
            avg_window: params.avg_window,
            gx: vec![0.0; p],
            gy: vec![0.0; p],
            window: vec![0.0; params.avg_window * p],
            fc: vec![0.0; n],
            z: vec![0.0; n],
        })
    }

    pub fn step(&mut self, x: &mut [f64], chain: &mut [f64], dw: &[f64], fast_rng: &mut RngStream) {
        let p = self.gx.len();
        self.basis.synthesize(x, &mut self.gx);
        let first_in_window = self.micro_steps - self.avg_window;
        for m in 0..self.micro_steps {
            self.micro.step(chain, &mut self.z, fast_rng);
            if m >= first_in_window {
                let row = &mut self.window[(m - first_in_window) * p..(m - first_in_window + 1) * p];
                self.basis.synthesize(chain, &mut self.gy);
                for ((r, &a), &b) in row.iter_mut().zip(&self.gx).zip(&self.gy) {
                    *r = self.spec.eval(a, b);
                }
            }
        }
        pairwise_mean_rows(&mut self.window, self.avg_window, p);
        let mean_row = &self.window[..p];
        self.basis.project(mean_row, &mut self.fc);
        implicit_euler_update(&self.gain, x, &self.fc, self.dt, dw);
    }
}

/// In-place pairwise reduction of `rows` rows to their mean in row 0.
/// For a power-of-two row count over bitwise-identical rows the result is
/// exactly the common row, so degenerate drifts cancel without rounding.
fn pairwise_mean_rows(buf: &mut [f64], rows: usize, width: usize) {
    let mut n = rows;
    while n > 1 {
        let keep = n.div_ceil(2);
        let (head, tail) = buf.split_at_mut(keep * width);
        for i in 0..n - keep {
            let dst = &mut head[i * width..(i + 1) * width];
            let src = &tail[i * width..(i + 1) * width];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        n = keep;
    }
    let scale = 1.0 / rows as f64;
    for v in buf[..width].iter_mut() {
        *v *= scale;
    }
}

/// One averaged-scheme step on spectral fields.
pub fn step_averaged(
    x: &SpectralField,
    avg: &AveragedCoefficient,
    dt: f64,
    dw: &SpectralField,
) -> Result<SpectralField> {
    x.check_basis(dw)?;
    let mut stepper = AveragedStepper::new(x.basis(), avg.clone(), dt)?;
    let mut coeffs = x.coeffs().to_vec();
    stepper.step(&mut coeffs, dw.coeffs());
    SpectralField::from_coeffs(x.basis(), coeffs)
}

/// One fine step of the coupled pair `(x, y)`.
#[allow(clippy::too_many_arguments)]
pub fn step_direct(
    x: &SpectralField,
    y: &SpectralField,
    spec: &NonlinearitySpec,
    fast_model: &FastProcessModel,
    epsilon: f64,
    h: f64,
    dw: &SpectralField,
    fast_rng: &mut RngStream,
) -> Result<(SpectralField, SpectralField)> {
    x.check_basis(y)?;
    x.check_basis(dw)?;
    let mut stepper = DirectStepper::new(x.basis(), spec, fast_model, epsilon, h)?;
    let mut xc = x.coeffs().to_vec();
    let mut yc = y.coeffs().to_vec();
    stepper.step(&mut xc, &mut yc, dw.coeffs(), fast_rng);
    Ok((
        SpectralField::from_coeffs(x.basis(), xc)?,
        SpectralField::from_coeffs(x.basis(), yc)?,
    ))
}

/// One macro step of the multiscale scheme, advancing the carried chain.
pub fn step_hmm_macro(
    x: &SpectralField,
    chain: &mut MicroSchemeState,
    params: &HmmParams,
    spec: &NonlinearitySpec,
    fast_model: &FastProcessModel,
    dw: &SpectralField,
    fast_rng: &mut RngStream,
) -> Result<SpectralField> {
    x.check_basis(dw)?;
    x.check_basis(chain.field())?;
    if (chain.tau() - params.tau).abs() > 1e-15 {
        return Err(SimError::Config(
            "chain micro step differs from the configured tau".into(),
        ));
    }
    let mut stepper = HmmStepper::new(x.basis(), spec, fast_model, params)?;
    let mut xc = x.coeffs().to_vec();
    let mut yc = chain.field().coeffs().to_vec();
    stepper.step(&mut xc, &mut yc, dw.coeffs(), fast_rng);
    chain.replace_field(
        SpectralField::from_coeffs(x.basis(), yc)?,
        params.micro_steps as u64,
    );
    SpectralField::from_coeffs(x.basis(), xc)
}

/// Scheme selector for whole-trajectory integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeKind {
    Direct,
    Averaged,
    TauAveraged,
    Hmm,
}

/// Everything needed to integrate one trajectory.
#[derive(Clone)]
pub struct SimSetup {
    pub basis: Arc<EigenBasis>,
    pub slow_cov: CovarianceSpec,
    pub fast_model: FastProcessModel,
    pub nonlinearity: NonlinearitySpec,
    pub params: HmmParams,
    /// Fine step of the direct scheme: `h = epsilon / fine_divisor`.
    pub fine_divisor: u64,
    pub x0: SpectralField,
    pub y0: SpectralField,
}

impl SimSetup {
    /// Slow covariance with the scheme-level mollification folded in.
    pub fn effective_slow_cov(&self) -> Result<CovarianceSpec> {
        let total = self.slow_cov.delta() + self.params.delta;
        self.slow_cov.clone().with_delta(total)
    }
}

/// Integrate one trajectory, snapshotting the slow state at macro times.
/// Deterministic in `(seed, replica)`.
pub fn integrate(
    setup: &SimSetup,
    kind: SchemeKind,
    seed: u64,
    replica: u64,
) -> Result<TrajectoryRecord> {
    setup.params.validate()?;
    let basis = &setup.basis;
    let n_macro = setup.params.macro_steps();
    let slow_cov = setup.effective_slow_cov()?;
    let slow_stream = RngStream::new(seed, replica, StreamRole::SlowNoise);
    let mut fast_stream = RngStream::new(seed, replica, StreamRole::FastNoise);
    let streams = vec![
        format!("seed={seed} replica={replica} role={}", StreamRole::SlowNoise.name()),
        format!("seed={seed} replica={replica} role={}", StreamRole::FastNoise.name()),
    ];

    let mut times = Vec::with_capacity(n_macro + 1);
    let mut snapshots = Vec::with_capacity(n_macro + 1);
    let mut x = setup.x0.coeffs().to_vec();
    times.push(0.0);
    snapshots.push(x.clone());

    match kind {
        SchemeKind::Averaged | SchemeKind::TauAveraged => {
            if n_macro > 0 {
                let tau = if kind == SchemeKind::TauAveraged {
                    setup.params.tau
                } else {
                    0.0
                };
                let avg =
                    AveragedCoefficient::new(&setup.nonlinearity, &setup.fast_model, basis, tau)?;
                let mut source =
                    WienerSource::new(&slow_cov, basis.n_modes(), setup.params.dt, slow_stream)?;
                let mut stepper = AveragedStepper::new(basis, avg, setup.params.dt)?;
                for k in 1..=n_macro {
                    let dw = source.draw();
                    stepper.step(&mut x, dw);
                    times.push(k as f64 * setup.params.dt);
                    snapshots.push(x.clone());
                }
            }
            Ok(TrajectoryRecord {
                times,
                snapshots,
                fast_checkpoints: None,
                streams,
            })
        }
        SchemeKind::Hmm => {
            let mut y = setup.y0.coeffs().to_vec();
            let mut checkpoints = Vec::with_capacity(n_macro + 1);
            checkpoints.push(y.clone());
            if n_macro > 0 {
                let mut source =
                    WienerSource::new(&slow_cov, basis.n_modes(), setup.params.dt, slow_stream)?;
                let mut stepper =
                    HmmStepper::new(basis, &setup.nonlinearity, &setup.fast_model, &setup.params)?;
                for k in 1..=n_macro {
                    let dw = source.draw();
                    stepper.step(&mut x, &mut y, dw, &mut fast_stream);
                    times.push(k as f64 * setup.params.dt);
                    snapshots.push(x.clone());
                    checkpoints.push(y.clone());
                }
            }
            Ok(TrajectoryRecord {
                times,
                snapshots,
                fast_checkpoints: Some(checkpoints),
                streams,
            })
        }
        SchemeKind::Direct => {
            if setup.fine_divisor == 0 {
                return Err(SimError::Config("fine divisor must be positive".into()));
            }
            let h = setup.params.epsilon / setup.fine_divisor as f64;
            let per_macro = setup.params.dt / h;
            if (per_macro - per_macro.round()).abs() > 1e-9 * per_macro.max(1.0) {
                return Err(SimError::Config(format!(
                    "macro step must be an integer number of fine steps (dt/h = {per_macro})"
                )));
            }
            let per_macro = per_macro.round() as usize;
            let mut y = setup.y0.coeffs().to_vec();
            let mut checkpoints = Vec::with_capacity(n_macro + 1);
            checkpoints.push(y.clone());
            if n_macro > 0 {
                let mut source = WienerSource::new(&slow_cov, basis.n_modes(), h, slow_stream)?;
                let mut stepper = DirectStepper::new(
                    basis,
                    &setup.nonlinearity,
                    &setup.fast_model,
                    setup.params.epsilon,
                    h,
                )?;
                for k in 1..=n_macro {
                    for _ in 0..per_macro {
                        let dw = source.draw();
                        stepper.step(&mut x, &mut y, dw, &mut fast_stream);
                    }
                    times.push(k as f64 * setup.params.dt);
                    snapshots.push(x.clone());
                    checkpoints.push(y.clone());
                }
            }
            Ok(TrajectoryRecord {
                times,
                snapshots,
                fast_checkpoints: Some(checkpoints),
                streams,
            })
        }
    }
}

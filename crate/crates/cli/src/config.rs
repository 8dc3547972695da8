//! Flat key-value run configuration.
//!
//! Grammar (one entry per line):
//!
//! ```text
//! # comment
//! section.key = value
//! ```
//!
//! Values are decimal numbers (exponent notation allowed), booleans,
//! identifiers (`cosine_y`, `sin`, `hmm`, ...), covariance families
//! (`zero`, `white`, `powerlaw(b)`, `single(n)`), mode selectors (`zero`,
//! `e(k)`), or comma-separated lists of numbers. Unknown keys are
//! rejected. [`RunConfig::canonical`] emits every field in a fixed order
//! and re-parses to an equal configuration.

use std::fmt::Write as _;

use spde_hmm_core::forcing::{CovarianceFamily, CovarianceSpec};
use spde_hmm_core::harness::{ExperimentConfig, HmmSweepConfig, ScalarMap};
use spde_hmm_core::reaction::{FastPart, NonlinearitySpec, SlowPart};
use spde_hmm_core::schemes::SchemeKind;

/// One field-level diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_modes: usize,
    pub oversample: usize,
    pub slow_family: CovarianceFamily,
    pub slow_delta: f64,
    pub slow_trace_class: Option<bool>,
    pub fast_family: CovarianceFamily,
    pub fast_delta: f64,
    pub fast_gamma_max: Option<f64>,
    pub g: SlowPart,
    pub family: FastPart,
    pub c: f64,
    pub scheme: SchemeKind,
    pub epsilon: f64,
    pub dt: f64,
    pub tau: f64,
    /// Micro steps per macro step; 0 derives `ceil(dt / (epsilon tau))`.
    pub micro_steps: usize,
    pub avg_window: usize,
    pub horizon: f64,
    pub delta: f64,
    pub fine_divisor: u64,
    pub x0_mode: usize,
    pub y0_mode: usize,
    pub seed: u64,
    pub epsilons: Vec<f64>,
    pub replicas: u32,
    pub snapshots: usize,
    pub ma_list: Vec<usize>,
    pub m_over_ma: usize,
    pub regular_case: bool,
    pub phi_map: ScalarMap,
    pub phi_weight_mode: usize,
    pub mixing_m: usize,
    pub mixing_ma: usize,
    pub mixing_tau: f64,
    pub mixing_c: f64,
    pub poisson_horizon: f64,
    pub poisson_tail_tol: f64,
    pub poisson_panels: usize,
    pub poisson_gl_order: usize,
    pub poisson_hermite_order: usize,
    pub poisson_gamma: f64,
    pub poisson_scales: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_modes: 32,
            oversample: 8,
            slow_family: CovarianceFamily::PowerLaw { b: 1.0 },
            slow_delta: 0.0,
            slow_trace_class: None,
            fast_family: CovarianceFamily::PowerLaw { b: 1.0 },
            fast_delta: 0.0,
            fast_gamma_max: None,
            g: SlowPart::Sin,
            family: FastPart::Cosine,
            c: 1.0,
            scheme: SchemeKind::Hmm,
            epsilon: 0.25,
            dt: 0.0625,
            tau: 0.05,
            micro_steps: 0,
            avg_window: 4,
            horizon: 0.5,
            delta: 0.0,
            fine_divisor: 64,
            x0_mode: 1,
            y0_mode: 0,
            seed: 1_598_690_817,
            epsilons: vec![0.25, 0.125, 0.0625, 0.03125, 0.015625],
            replicas: 128,
            snapshots: 8,
            ma_list: vec![4, 16, 64, 256],
            m_over_ma: 2,
            regular_case: false,
            phi_map: ScalarMap::Cos,
            phi_weight_mode: 1,
            mixing_m: 10,
            mixing_ma: 3,
            mixing_tau: 0.1,
            mixing_c: 1.0,
            poisson_horizon: 3.0,
            poisson_tail_tol: 1e-10,
            poisson_panels: 20,
            poisson_gl_order: 12,
            poisson_hermite_order: 40,
            poisson_gamma: 0.2,
            poisson_scales: vec![0.0, 1.0, 2.0, 4.0, 8.0],
        }
    }
}

fn parse_covariance(field: &str, value: &str) -> Result<CovarianceFamily, ConfigError> {
    let v = value.trim();
    if v == "zero" {
        return Ok(CovarianceFamily::Zero);
    }
    if v == "white" {
        return Ok(CovarianceFamily::White);
    }
    if let Some(arg) = v.strip_prefix("powerlaw(").and_then(|s| s.strip_suffix(')')) {
        let b: f64 = arg
            .trim()
            .parse()
            .map_err(|_| ConfigError::new(field, format!("bad power-law exponent '{arg}'")))?;
        if b < 0.0 || !b.is_finite() {
            return Err(ConfigError::new(field, "power-law exponent must be >= 0"));
        }
        return Ok(CovarianceFamily::PowerLaw { b });
    }
    if let Some(arg) = v.strip_prefix("single(").and_then(|s| s.strip_suffix(')')) {
        let mode: usize = arg
            .trim()
            .parse()
            .map_err(|_| ConfigError::new(field, format!("bad mode index '{arg}'")))?;
        if mode == 0 {
            return Err(ConfigError::new(field, "mode indices are 1-based"));
        }
        return Ok(CovarianceFamily::Single { mode });
    }
    Err(ConfigError::new(
        field,
        format!("unknown covariance '{v}' (expected zero, white, powerlaw(b) or single(n))"),
    ))
}

fn format_covariance(family: CovarianceFamily) -> String {
    match family {
        CovarianceFamily::Zero => "zero".to_string(),
        CovarianceFamily::White => "white".to_string(),
        CovarianceFamily::PowerLaw { b } => format!("powerlaw({b})"),
        CovarianceFamily::Single { mode } => format!("single({mode})"),
    }
}

/// `zero` or `e(k)`.
fn parse_mode_selector(field: &str, value: &str) -> Result<usize, ConfigError> {
    let v = value.trim();
    if v == "zero" {
        return Ok(0);
    }
    if let Some(arg) = v.strip_prefix("e(").and_then(|s| s.strip_suffix(')')) {
        let k: usize = arg
            .trim()
            .parse()
            .map_err(|_| ConfigError::new(field, format!("bad mode index '{arg}'")))?;
        if k == 0 {
            return Err(ConfigError::new(field, "mode indices are 1-based"));
        }
        return Ok(k);
    }
    Err(ConfigError::new(
        field,
        format!("unknown state '{v}' (expected zero or e(k))"),
    ))
}

fn format_mode_selector(mode: usize) -> String {
    if mode == 0 {
        "zero".to_string()
    } else {
        format!("e({mode})")
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| ConfigError::new(field, format!("cannot parse '{value}'")))
}

fn parse_bool(field: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(ConfigError::new(field, format!("expected true/false, got '{other}'"))),
    }
}

fn parse_list<T: std::str::FromStr>(field: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| ConfigError::new(field, format!("cannot parse list item '{s}'")))
        })
        .collect()
}

fn format_list<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Vec<ConfigError>> {
        let mut cfg = Self::default();
        let mut errors = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(ConfigError::new(
                    &format!("line {}", lineno + 1),
                    format!("expected 'key = value', got '{line}'"),
                ));
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            if let Err(e) = cfg.apply(key, value) {
                errors.push(e);
            }
        }
        if let Err(mut v) = cfg.validate() {
            errors.append(&mut v);
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "basis.n_modes" => self.n_modes = parse_num(key, value)?,
            "basis.oversample" => self.oversample = parse_num(key, value)?,
            "slow.covariance" => self.slow_family = parse_covariance(key, value)?,
            "slow.delta" => self.slow_delta = parse_num(key, value)?,
            "slow.trace_class" => self.slow_trace_class = Some(parse_bool(key, value)?),
            "fast.covariance" => self.fast_family = parse_covariance(key, value)?,
            "fast.delta" => self.fast_delta = parse_num(key, value)?,
            "fast.gamma_max" => self.fast_gamma_max = Some(parse_num(key, value)?),
            "nonlinearity.family" => {
                self.family = match value {
                    "affine_y" => FastPart::Affine,
                    "quadratic_y" => FastPart::Quadratic,
                    "cosine_y" => FastPart::Cosine,
                    other => {
                        return Err(ConfigError::new(
                            key,
                            format!("unknown family '{other}' (affine_y, quadratic_y, cosine_y)"),
                        ))
                    }
                }
            }
            "nonlinearity.g" => {
                self.g = match value {
                    "zero" => SlowPart::Zero,
                    "sin" => SlowPart::Sin,
                    "tanh" => SlowPart::Tanh { scale: 1.0 },
                    "softclip" => SlowPart::SoftClip { limit: 1.0 },
                    other => {
                        return Err(ConfigError::new(
                            key,
                            format!("unknown slow part '{other}' (zero, sin, tanh, softclip)"),
                        ))
                    }
                }
            }
            "nonlinearity.g_scale" => {
                let s: f64 = parse_num(key, value)?;
                if s <= 0.0 {
                    return Err(ConfigError::new(key, "scale must be positive"));
                }
                self.g = match self.g {
                    SlowPart::Tanh { .. } => SlowPart::Tanh { scale: s },
                    SlowPart::SoftClip { .. } => SlowPart::SoftClip { limit: s },
                    other => other,
                };
            }
            "nonlinearity.c" => self.c = parse_num(key, value)?,
            "scheme" => {
                self.scheme = match value {
                    "hmm" => SchemeKind::Hmm,
                    "averaged" => SchemeKind::Averaged,
                    "tau_averaged" => SchemeKind::TauAveraged,
                    "direct" => SchemeKind::Direct,
                    other => {
                        return Err(ConfigError::new(
                            key,
                            format!("unknown scheme '{other}' (hmm, averaged, tau_averaged, direct)"),
                        ))
                    }
                }
            }
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "dt" => self.dt = parse_num(key, value)?,
            "tau" | "micro.tau" => self.tau = parse_num("tau", value)?,
            "M" => self.micro_steps = parse_num(key, value)?,
            "Ma" => self.avg_window = parse_num(key, value)?,
            "T" => self.horizon = parse_num(key, value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "fine_divisor" => self.fine_divisor = parse_num(key, value)?,
            "init.x0" => self.x0_mode = parse_mode_selector(key, value)?,
            "init.y0" => self.y0_mode = parse_mode_selector(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "experiment.epsilons" => self.epsilons = parse_list(key, value)?,
            "experiment.replicas" => self.replicas = parse_num(key, value)?,
            "experiment.snapshots" => self.snapshots = parse_num(key, value)?,
            "experiment.ma_list" => self.ma_list = parse_list(key, value)?,
            "experiment.m_over_ma" => self.m_over_ma = parse_num(key, value)?,
            "experiment.regular_case" => self.regular_case = parse_bool(key, value)?,
            "experiment.phi.map" => {
                self.phi_map = match value {
                    "cos" => ScalarMap::Cos,
                    "tanh" => ScalarMap::Tanh,
                    other => {
                        return Err(ConfigError::new(key, format!("unknown map '{other}' (cos, tanh)")))
                    }
                }
            }
            "experiment.phi.weight" => self.phi_weight_mode = parse_mode_selector(key, value)?,
            "mixing.m" => self.mixing_m = parse_num(key, value)?,
            "mixing.ma" => self.mixing_ma = parse_num(key, value)?,
            "mixing.tau" => self.mixing_tau = parse_num(key, value)?,
            "mixing.c" => self.mixing_c = parse_num(key, value)?,
            "poisson.horizon" => self.poisson_horizon = parse_num(key, value)?,
            "poisson.tail_tol" => self.poisson_tail_tol = parse_num(key, value)?,
            "poisson.panels" => self.poisson_panels = parse_num(key, value)?,
            "poisson.gl_order" => self.poisson_gl_order = parse_num(key, value)?,
            "poisson.hermite_order" => self.poisson_hermite_order = parse_num(key, value)?,
            "poisson.gamma" => self.poisson_gamma = parse_num(key, value)?,
            "poisson.scales" => self.poisson_scales = parse_list(key, value)?,
            other => {
                return Err(ConfigError::new(other, "unknown configuration key"));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Vec<ConfigError>> {
        let mut errors = Vec::new();
        if self.n_modes == 0 {
            errors.push(ConfigError::new("basis.n_modes", "must be positive"));
        }
        if self.oversample < 4 {
            errors.push(ConfigError::new(
                "basis.oversample",
                "must be at least 4 for exact discrete orthonormality",
            ));
        }
        if self.slow_delta < 0.0 || self.fast_delta < 0.0 || self.delta < 0.0 {
            errors.push(ConfigError::new("delta", "mollification must be nonnegative"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            errors.push(ConfigError::new("epsilon", "must lie in (0, 1]"));
        }
        if self.dt <= 0.0 {
            errors.push(ConfigError::new("dt", "must be positive"));
        }
        if self.tau <= 0.0 {
            errors.push(ConfigError::new("tau", "must be positive"));
        }
        if self.horizon < 0.0 {
            errors.push(ConfigError::new("T", "must be nonnegative"));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            errors.push(ConfigError::new(
                "T",
                format!("must be an integer number of macro steps (T/dt = {steps})"),
            ));
        }
        let m = self.effective_micro_steps();
        if self.avg_window == 0 || self.avg_window > m {
            errors.push(ConfigError::new(
                "Ma",
                format!("must satisfy 1 <= Ma <= M (Ma = {}, M = {m})", self.avg_window),
            ));
        }
        if self.fine_divisor == 0 {
            errors.push(ConfigError::new("fine_divisor", "must be positive"));
        }
        if self.x0_mode > self.n_modes || self.y0_mode > self.n_modes {
            errors.push(ConfigError::new("init", "initial mode exceeds the truncation"));
        }
        if self.phi_weight_mode == 0 || self.phi_weight_mode > self.n_modes {
            errors.push(ConfigError::new(
                "experiment.phi.weight",
                "weight mode must be a valid basis mode",
            ));
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= 1.0) {
                errors.push(ConfigError::new(
                    "experiment.epsilons",
                    format!("epsilon {e} outside (0, 1]"),
                ));
                break;
            }
        }
        if let Some(g) = self.fast_gamma_max {
            if !(g > 0.0 && g <= 0.5) {
                errors.push(ConfigError::new("fast.gamma_max", "must lie in (0, 1/2]"));
            }
        }
        if self.regular_case {
            match (self.slow_covariance(), self.fast_model()) {
                (Ok(slow), Ok(fast)) => {
                    let sum = slow.alpha_max() + fast.gamma_max();
                    if sum <= 1.0 {
                        errors.push(ConfigError::new(
                            "experiment.regular_case",
                            format!("requires alpha_max + gamma_max > 1 (got {sum})"),
                        ));
                    }
                    if !slow.trace_class() {
                        errors.push(ConfigError::new(
                            "experiment.regular_case",
                            "requires a trace-class slow covariance",
                        ));
                    }
                }
                _ => errors.push(ConfigError::new(
                    "experiment.regular_case",
                    "covariances failed to build",
                )),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn effective_micro_steps(&self) -> usize {
        if self.micro_steps > 0 {
            self.micro_steps
        } else {
            (self.dt / (self.epsilon * self.tau)).ceil() as usize
        }
    }

    fn build_cov(
        field: &str,
        family: CovarianceFamily,
        delta: f64,
        trace_class: Option<bool>,
    ) -> Result<CovarianceSpec, Vec<ConfigError>> {
        let base = match family {
            CovarianceFamily::Zero => CovarianceSpec::zero(),
            CovarianceFamily::White => CovarianceSpec::white(),
            CovarianceFamily::PowerLaw { b } => CovarianceSpec::power_law(b)
                .map_err(|e| vec![ConfigError::new(field, e.to_string())])?,
            CovarianceFamily::Single { mode } => CovarianceSpec::single_mode(mode)
                .map_err(|e| vec![ConfigError::new(field, e.to_string())])?,
        };
        let mut cov = base
            .with_delta(delta)
            .map_err(|e| vec![ConfigError::new(field, e.to_string())])?;
        if let Some(flag) = trace_class {
            cov = cov.with_trace_class(flag);
        }
        Ok(cov)
    }

    pub fn slow_covariance(&self) -> Result<CovarianceSpec, Vec<ConfigError>> {
        Self::build_cov(
            "slow.covariance",
            self.slow_family,
            self.slow_delta,
            self.slow_trace_class,
        )
    }

    pub fn fast_covariance(&self) -> Result<CovarianceSpec, Vec<ConfigError>> {
        Self::build_cov("fast.covariance", self.fast_family, self.fast_delta, None)
    }

    pub fn fast_model(&self) -> Result<spde_hmm_core::fast::FastProcessModel, Vec<ConfigError>> {
        let model = spde_hmm_core::fast::FastProcessModel::new(self.fast_covariance()?);
        match self.fast_gamma_max {
            Some(g) => model
                .with_gamma_max(g)
                .map_err(|e| vec![ConfigError::new("fast.gamma_max", e.to_string())]),
            None => Ok(model),
        }
    }

    pub fn nonlinearity(&self) -> NonlinearitySpec {
        NonlinearitySpec::new(self.g, self.family, self.c)
    }

    /// Rate-experiment view; the scheme-level `delta` folds into the slow
    /// covariance's mollification.
    pub fn experiment(&self) -> Result<ExperimentConfig, Vec<ConfigError>> {
        let slow = self.slow_covariance()?;
        let slow = slow
            .clone()
            .with_delta(self.slow_delta + self.delta)
            .map_err(|e| vec![ConfigError::new("delta", e.to_string())])?;
        Ok(ExperimentConfig {
            n_modes: self.n_modes,
            oversample: self.oversample,
            slow_cov: slow,
            fast_cov: self.fast_covariance()?,
            nonlinearity: self.nonlinearity(),
            horizon: self.horizon,
            fine_divisor: self.fine_divisor,
            snapshots: self.snapshots,
            x0_mode: self.x0_mode,
            master_seed: self.seed,
        })
    }

    pub fn hmm_sweep(&self) -> Result<HmmSweepConfig, Vec<ConfigError>> {
        Ok(HmmSweepConfig {
            n_modes: self.n_modes,
            oversample: self.oversample,
            slow_cov: self.slow_covariance()?,
            fast_cov: self.fast_covariance()?,
            nonlinearity: self.nonlinearity(),
            dt: self.dt,
            tau: self.tau,
            horizon: self.horizon,
            m_over_ma: self.m_over_ma,
            x0_mode: self.x0_mode,
            master_seed: self.seed,
        })
    }

    /// Canonical text form; parsing it back yields an equal configuration.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "basis.n_modes = {}", self.n_modes);
        let _ = writeln!(s, "basis.oversample = {}", self.oversample);
        let _ = writeln!(s, "slow.covariance = {}", format_covariance(self.slow_family));
        let _ = writeln!(s, "slow.delta = {}", self.slow_delta);
        if let Some(tc) = self.slow_trace_class {
            let _ = writeln!(s, "slow.trace_class = {tc}");
        }
        let _ = writeln!(s, "fast.covariance = {}", format_covariance(self.fast_family));
        let _ = writeln!(s, "fast.delta = {}", self.fast_delta);
        if let Some(g) = self.fast_gamma_max {
            let _ = writeln!(s, "fast.gamma_max = {g}");
        }
        let family = match self.family {
            FastPart::Affine => "affine_y",
            FastPart::Quadratic => "quadratic_y",
            FastPart::Cosine => "cosine_y",
        };
        let _ = writeln!(s, "nonlinearity.family = {family}");
        let (g_name, g_scale) = match self.g {
            SlowPart::Zero => ("zero", None),
            SlowPart::Sin => ("sin", None),
            SlowPart::Tanh { scale } => ("tanh", Some(scale)),
            SlowPart::SoftClip { limit } => ("softclip", Some(limit)),
        };
        let _ = writeln!(s, "nonlinearity.g = {g_name}");
        if let Some(scale) = g_scale {
            let _ = writeln!(s, "nonlinearity.g_scale = {scale}");
        }
        let _ = writeln!(s, "nonlinearity.c = {}", self.c);
        let scheme = match self.scheme {
            SchemeKind::Hmm => "hmm",
            SchemeKind::Averaged => "averaged",
            SchemeKind::TauAveraged => "tau_averaged",
            SchemeKind::Direct => "direct",
        };
        let _ = writeln!(s, "scheme = {scheme}");
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "M = {}", self.micro_steps);
        let _ = writeln!(s, "Ma = {}", self.avg_window);
        let _ = writeln!(s, "T = {}", self.horizon);
        let _ = writeln!(s, "delta = {}", self.delta);
        let _ = writeln!(s, "fine_divisor = {}", self.fine_divisor);
        let _ = writeln!(s, "init.x0 = {}", format_mode_selector(self.x0_mode));
        let _ = writeln!(s, "init.y0 = {}", format_mode_selector(self.y0_mode));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "experiment.epsilons = {}", format_list(&self.epsilons));
        let _ = writeln!(s, "experiment.replicas = {}", self.replicas);
        let _ = writeln!(s, "experiment.snapshots = {}", self.snapshots);
        let _ = writeln!(s, "experiment.ma_list = {}", format_list(&self.ma_list));
        let _ = writeln!(s, "experiment.m_over_ma = {}", self.m_over_ma);
        let _ = writeln!(s, "experiment.regular_case = {}", self.regular_case);
        let phi = match self.phi_map {
            ScalarMap::Cos => "cos",
            ScalarMap::Tanh => "tanh",
        };
        let _ = writeln!(s, "experiment.phi.map = {phi}");
        let _ = writeln!(
            s,
            "experiment.phi.weight = {}",
            format_mode_selector(self.phi_weight_mode)
        );
        let _ = writeln!(s, "mixing.m = {}", self.mixing_m);
        let _ = writeln!(s, "mixing.ma = {}", self.mixing_ma);
        let _ = writeln!(s, "mixing.tau = {}", self.mixing_tau);
        let _ = writeln!(s, "mixing.c = {}", self.mixing_c);
        let _ = writeln!(s, "poisson.horizon = {}", self.poisson_horizon);
        let _ = writeln!(s, "poisson.tail_tol = {}", self.poisson_tail_tol);
        let _ = writeln!(s, "poisson.panels = {}", self.poisson_panels);
        let _ = writeln!(s, "poisson.gl_order = {}", self.poisson_gl_order);
        let _ = writeln!(s, "poisson.hermite_order = {}", self.poisson_hermite_order);
        let _ = writeln!(s, "poisson.gamma = {}", self.poisson_gamma);
        let _ = writeln!(s, "poisson.scales = {}", format_list(&self.poisson_scales));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.canonical();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn variants_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.slow_family = CovarianceFamily::White;
        cfg.fast_family = CovarianceFamily::Single { mode: 3 };
        cfg.g = SlowPart::Tanh { scale: 2.5 };
        cfg.scheme = SchemeKind::Direct;
        cfg.slow_trace_class = Some(false);
        cfg.fast_gamma_max = Some(0.25);
        cfg.x0_mode = 0;
        cfg.epsilons = vec![0.5, 0.125];
        let back = RunConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let errs = RunConfig::parse("bogus.key = 1\n").unwrap_err();
        assert!(errs.iter().any(|e| e.field == "bogus.key"));
        let errs = RunConfig::parse("epsilon = 2.0\n").unwrap_err();
        assert!(errs.iter().any(|e| e.field == "epsilon"));
        let errs = RunConfig::parse("slow.covariance = powerlaw(-1)\n").unwrap_err();
        assert!(errs.iter().any(|e| e.field == "slow.covariance"));
        let errs = RunConfig::parse("T = 0.3\ndt = 0.125\n").unwrap_err();
        assert!(errs.iter().any(|e| e.field == "T"));
    }

    #[test]
    fn cross_field_window_check() {
        // Ma exceeds the automatic M = ceil(dt / (eps tau))
        let text = "epsilon = 0.5\ndt = 0.1\ntau = 0.1\nMa = 5\n";
        let errs = RunConfig::parse(text).unwrap_err();
        assert!(errs.iter().any(|e| e.field == "Ma"));
    }

    #[test]
    fn regular_case_flag_checks_regularity() {
        let text = "slow.covariance = white\nexperiment.regular_case = true\n";
        let errs = RunConfig::parse(text).unwrap_err();
        assert!(errs.iter().any(|e| e.field == "experiment.regular_case"));
        let ok = "slow.covariance = powerlaw(1)\nfast.covariance = powerlaw(1)\nexperiment.regular_case = true\n";
        assert!(RunConfig::parse(ok).is_ok());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = RunConfig::parse("# a comment\n\nseed = 7\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }
}

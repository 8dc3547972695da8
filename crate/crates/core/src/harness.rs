//! Monte Carlo estimation of the averaging error versus the time-scale
//! separation, log-log rate regression, the mixing sums of the multiscale
//! scheme, and the mollification balancing rule.
//!
//! Strong and weak errors are measured on coupled pairs: the reference and
//! the averaged trajectory consume the same slow-noise increments, so the
//! pathwise difference is exactly the averaging deviation with no Monte
//! Carlo floor. Replicas fan out over deterministic streams keyed by the
//! replica index and aggregate in replica order, so every report is
//! reproducible bit-for-bit.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::exec::map_replicas;
use crate::fast::FastProcessModel;
use crate::forcing::{CovarianceSpec, RngStream, StreamRole};
use crate::reaction::{AveragedCoefficient, NonlinearitySpec};
use crate::schemes::{AveragedStepper, DirectStepper, HmmParams, HmmStepper, WienerSource};
use crate::spectral::{EigenBasis, SpectralField};

/// Bounded scalar maps for weak-error test functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarMap {
    Cos,
    Tanh,
}

impl ScalarMap {
    fn eval(self, z: f64) -> f64 {
        match self {
            ScalarMap::Cos => z.cos(),
            ScalarMap::Tanh => z.tanh(),
        }
    }
}

/// Test functional `phi(x) = <omega, map(x(.))>` evaluated by quadrature.
#[derive(Debug, Clone)]
pub struct TestFunctional {
    weight: SpectralField,
    map: ScalarMap,
    weight_grid: Vec<f64>,
}

impl TestFunctional {
    pub fn new(weight: SpectralField, map: ScalarMap) -> Self {
        let basis = Arc::clone(weight.basis());
        let mut weight_grid = vec![0.0; basis.grid().len()];
        basis.synthesize(weight.coeffs(), &mut weight_grid);
        Self {
            weight,
            map,
            weight_grid,
        }
    }

    pub fn map(&self) -> ScalarMap {
        self.map
    }

    pub fn weight(&self) -> &SpectralField {
        &self.weight
    }

    /// Evaluate on already-synthesized grid values.
    pub fn eval_grid(&self, x_grid: &[f64]) -> f64 {
        let w = self.weight.basis().quad_weight();
        let mut acc = 0.0;
        for (&om, &xv) in self.weight_grid.iter().zip(x_grid) {
            acc += om * self.map.eval(xv);
        }
        acc * w
    }

    pub fn eval(&self, x: &SpectralField) -> Result<f64> {
        x.check_basis(&self.weight)?;
        let basis = x.basis();
        let mut grid = vec![0.0; basis.grid().len()];
        basis.synthesize(x.coeffs(), &mut grid);
        Ok(self.eval_grid(&grid))
    }
}

/// Ordinary least squares on `(ln parameter, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub se: f64,
    pub points: usize,
    pub excluded: usize,
}

/// Fit a log-log rate. Nonpositive or nonfinite errors are excluded; fewer
/// than two surviving points is a statistics error.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut excluded = 0usize;
    for &(p, e) in points {
        if p > 0.0 && e > 0.0 && p.is_finite() && e.is_finite() {
            xs.push(p.ln());
            ys.push(e.ln());
        } else {
            excluded += 1;
        }
    }
    let n = xs.len();
    if n < 2 {
        return Err(SimError::Statistics(format!(
            "rate fit needs at least 2 positive points ({n} left, {excluded} excluded)"
        )));
    }
    let xm = xs.iter().sum::<f64>() / n as f64;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let se = if n == 2 {
        0.0
    } else {
        let ssr: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - ym - slope * (x - xm);
                r * r
            })
            .sum();
        (ssr / (n as f64 - 2.0) / sxx).sqrt()
    };
    Ok(RateFit {
        slope,
        se,
        points: n,
        excluded,
    })
}

/// Mixing sums of the multiscale window for `rho(t) = e^{-c t}`:
/// `R1 = (1/Ma) sum_{m=M-Ma+1}^{M} rho(m tau)` and
/// `R2 = (1/Ma^2) sum_{M-Ma+1 <= m1 < m2 <= M} rho((m2 - m1) tau)`.
pub fn mixing_sums(m: usize, ma: usize, tau: f64, c: f64) -> Result<(f64, f64)> {
    if ma == 0 || ma > m {
        return Err(SimError::Domain(format!(
            "window must satisfy 1 <= Ma <= M (got Ma={ma}, M={m})"
        )));
    }
    if tau <= 0.0 || c < 0.0 {
        return Err(SimError::Domain(
            "mixing sums need tau > 0 and c >= 0".into(),
        ));
    }
    let rate = c * tau;
    let r1 = if rate == 0.0 {
        1.0
    } else {
        // e^{-rate (M-Ma+1)} (1 - e^{-rate Ma}) / (1 - e^{-rate}) / Ma
        (-rate * (m - ma + 1) as f64).exp() * (-rate * ma as f64).exp_m1()
            / (-rate).exp_m1()
            / ma as f64
    };
    // gap form: sum_{g=1}^{Ma-1} (Ma - g) e^{-rate g}, O(Ma) and stable
    let mut pair_sum = 0.0;
    for g in 1..ma {
        pair_sum += (ma - g) as f64 * (-rate * g as f64).exp();
    }
    let r2 = pair_sum / (ma as f64 * ma as f64);
    Ok((r1, r2))
}

/// Mollification/rate balance of the less regular case:
/// `delta = epsilon^{1/(1 + alpha - gamma)}` with the predicted strong rate
/// `alpha / (1 + alpha - gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaBalance {
    pub delta: f64,
    pub strong_rate: f64,
}

pub fn balance_delta(epsilon: f64, alpha: f64, gamma: f64) -> Result<DeltaBalance> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(SimError::Domain(format!(
            "epsilon must lie in (0, 1] (got {epsilon})"
        )));
    }
    if !(0.0 < gamma && gamma <= alpha && alpha < 1.0) {
        return Err(SimError::Domain(format!(
            "exponents must satisfy 0 < gamma <= alpha < 1 (got alpha={alpha}, gamma={gamma})"
        )));
    }
    let inv = 1.0 / (1.0 + alpha - gamma);
    Ok(DeltaBalance {
        delta: epsilon.powf(inv),
        strong_rate: alpha * inv,
    })
}

/// Replay information: the streams are derived from `(master_seed,
/// replica, role)` alone, so this reproduces every draw of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedManifest {
    pub master_seed: u64,
    pub replicas: u32,
    pub roles: Vec<String>,
    pub derivation: String,
}

impl SeedManifest {
    pub fn new(master_seed: u64, replicas: u32) -> Self {
        Self {
            master_seed,
            replicas,
            roles: vec![
                StreamRole::SlowNoise.name().to_string(),
                StreamRole::FastNoise.name().to_string(),
            ],
            derivation: "counter stream keyed by (seed, replica, role, step, mode)".to_string(),
        }
    }
}

/// Errors at one snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub time: f64,
    pub strong: f64,
    pub weak: Option<f64>,
}

/// Per-parameter results (the parameter is epsilon for rate experiments,
/// the averaging window for the multiscale sweep).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub parameter: f64,
    pub strong_error: f64,
    pub strong_se: f64,
    pub weak_error: Option<f64>,
    pub weak_se: Option<f64>,
    pub replicas: u32,
    pub per_time: Vec<TimePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub experiment: String,
    pub parameter_name: String,
    pub rows: Vec<ParameterRow>,
    pub fit: Option<RateFit>,
    pub config_snapshot: String,
    pub seed_manifest: SeedManifest,
}

impl ErrorReport {
    pub fn with_config_snapshot(mut self, snapshot: String) -> Self {
        self.config_snapshot = snapshot;
        self
    }
}

/// Shared configuration of the epsilon-rate experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_modes: usize,
    pub oversample: usize,
    pub slow_cov: CovarianceSpec,
    pub fast_cov: CovarianceSpec,
    pub nonlinearity: NonlinearitySpec,
    pub horizon: f64,
    /// Fine step `h = epsilon / fine_divisor` for both coupled schemes.
    pub fine_divisor: u64,
    /// Number of snapshot times on (0, T].
    pub snapshots: usize,
    /// Initial slow state `e_k`; 0 means the zero field.
    pub x0_mode: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Reference configuration with `alpha_max + gamma_max > 1` and a
    /// trace-class slow covariance: strong rate 1/2, weak rate 1.
    pub fn regular_case() -> Self {
        use crate::reaction::{FastPart, SlowPart};
        Self {
            n_modes: 32,
            oversample: 8,
            slow_cov: CovarianceSpec::power_law(1.0).expect("valid exponent"),
            fast_cov: CovarianceSpec::power_law(1.0).expect("valid exponent"),
            nonlinearity: NonlinearitySpec::new(SlowPart::Sin, FastPart::Cosine, 1.0),
            horizon: 0.5,
            fine_divisor: 64,
            snapshots: 8,
            x0_mode: 1,
            master_seed: 0x5eed_0001,
        }
    }

    /// White noise in both equations: `alpha_max = gamma_max = 1/4`,
    /// predicted strong rate `1/4`.
    pub fn less_regular_case() -> Self {
        Self {
            slow_cov: CovarianceSpec::white(),
            fast_cov: CovarianceSpec::white(),
            ..Self::regular_case()
        }
    }

    pub fn basis(&self) -> Result<Arc<EigenBasis>> {
        EigenBasis::dirichlet_1d(self.n_modes, self.oversample)
    }

    pub fn initial_state(&self, basis: &Arc<EigenBasis>) -> SpectralField {
        if self.x0_mode == 0 {
            SpectralField::zero(basis)
        } else {
            SpectralField::unit_mode(basis, self.x0_mode)
        }
    }
}

struct ReplicaStats {
    strong_sq: Vec<f64>,
    weak_diff: Option<Vec<f64>>,
}

fn run_coupled_replica(
    cfg: &ExperimentConfig,
    basis: &Arc<EigenBasis>,
    avg_coeff: &AveragedCoefficient,
    functional: Option<&TestFunctional>,
    epsilon: f64,
    replica: u32,
) -> Result<ReplicaStats> {
    let h = epsilon / cfg.fine_divisor as f64;
    let n_fine = (cfg.horizon / h).round() as usize;
    let stride = n_fine / cfg.snapshots;
    let fast_model = FastProcessModel::new(cfg.fast_cov.clone());
    let mut direct = DirectStepper::new(basis, &cfg.nonlinearity, &fast_model, epsilon, h)?;
    let mut averaged = AveragedStepper::new(basis, avg_coeff.clone(), h)?;
    let mut source = WienerSource::new(
        &cfg.slow_cov,
        basis.n_modes(),
        h,
        RngStream::new(cfg.master_seed, replica as u64, StreamRole::SlowNoise),
    )?;
    let mut fast_rng = RngStream::new(cfg.master_seed, replica as u64, StreamRole::FastNoise);

    let x0 = cfg.initial_state(basis);
    let mut x_ref = x0.coeffs().to_vec();
    let mut x_avg = x0.coeffs().to_vec();
    let mut y = vec![0.0; basis.n_modes()];

    let mut strong_sq = Vec::with_capacity(cfg.snapshots);
    let mut weak_diff = functional.map(|_| Vec::with_capacity(cfg.snapshots));
    let mut grid_ref = vec![0.0; basis.grid().len()];
    let mut grid_avg = vec![0.0; basis.grid().len()];

    for k in 1..=n_fine {
        let dw = source.draw();
        direct.step(&mut x_ref, &mut y, dw, &mut fast_rng);
        averaged.step(&mut x_avg, dw);
        if k % stride == 0 {
            let d2: f64 = x_ref
                .iter()
                .zip(&x_avg)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            strong_sq.push(d2);
            if let (Some(diffs), Some(phi)) = (weak_diff.as_mut(), functional) {
                basis.synthesize(&x_ref, &mut grid_ref);
                basis.synthesize(&x_avg, &mut grid_avg);
                diffs.push(phi.eval_grid(&grid_ref) - phi.eval_grid(&grid_avg));
            }
        }
    }
    Ok(ReplicaStats {
        strong_sq,
        weak_diff,
    })
}

fn validate_epsilon_grid(cfg: &ExperimentConfig, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(SimError::Config(format!(
            "epsilon must lie in (0, 1] (got {epsilon})"
        )));
    }
    if cfg.fine_divisor == 0 {
        return Err(SimError::Config("fine divisor must be positive".into()));
    }
    let h = epsilon / cfg.fine_divisor as f64;
    let n_fine = cfg.horizon / h;
    if (n_fine - n_fine.round()).abs() > 1e-9 * n_fine.max(1.0) {
        return Err(SimError::Config(format!(
            "horizon is not an integer number of fine steps (T/h = {n_fine})"
        )));
    }
    let n_fine = n_fine.round() as usize;
    if n_fine == 0 {
        return Err(SimError::Config(
            "horizon is shorter than one fine step".into(),
        ));
    }
    if cfg.snapshots == 0 || !n_fine.is_multiple_of(cfg.snapshots) {
        return Err(SimError::Config(format!(
            "snapshot count {} must divide the {} fine steps",
            cfg.snapshots, n_fine
        )));
    }
    Ok(())
}

/// Jackknife standard error of `sup_t sqrt(mean_k d_{k,t})`.
fn sup_rms_with_jackknife(per_replica: &[Vec<f64>]) -> (f64, f64, Vec<f64>) {
    let k = per_replica.len();
    let snaps = per_replica[0].len();
    let mut sums = vec![0.0f64; snaps];
    for row in per_replica {
        for (s, &d) in sums.iter_mut().zip(row) {
            *s += d;
        }
    }
    let per_time: Vec<f64> = sums.iter().map(|s| (s / k as f64).sqrt()).collect();
    let full = per_time.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut loo = Vec::with_capacity(k);
    for row in per_replica {
        let mut sup = 0.0f64;
        for (s, &d) in sums.iter().zip(row) {
            sup = sup.max(((s - d) / (k as f64 - 1.0)).sqrt());
        }
        loo.push(sup);
    }
    let mean_loo = loo.iter().sum::<f64>() / k as f64;
    let var = loo
        .iter()
        .map(|v| (v - mean_loo) * (v - mean_loo))
        .sum::<f64>();
    let se = ((k as f64 - 1.0) / k as f64 * var).sqrt();
    (full, se, per_time)
}

fn weak_sup_with_se(per_replica: &[Vec<f64>]) -> (f64, f64, Vec<f64>) {
    let k = per_replica.len() as f64;
    let snaps = per_replica[0].len();
    let mut means = vec![0.0f64; snaps];
    let mut sq = vec![0.0f64; snaps];
    for row in per_replica {
        for ((m, s), &d) in means.iter_mut().zip(sq.iter_mut()).zip(row) {
            *m += d;
            *s += d * d;
        }
    }
    for m in means.iter_mut() {
        *m /= k;
    }
    let per_time: Vec<f64> = means.iter().map(|m| m.abs()).collect();
    let mut best = 0usize;
    for (i, &v) in per_time.iter().enumerate() {
        if v > per_time[best] {
            best = i;
        }
    }
    let var = (sq[best] / k - means[best] * means[best]).max(0.0);
    let se = (var / k).sqrt();
    (per_time[best], se, per_time)
}

fn coupled_error_experiment(
    cfg: &ExperimentConfig,
    epsilons: &[f64],
    replicas: u32,
    functional: Option<&TestFunctional>,
    experiment: &str,
) -> Result<ErrorReport> {
    if replicas < 2 {
        return Err(SimError::Statistics(
            "error estimation needs at least 2 replicas".into(),
        ));
    }
    if epsilons.is_empty() {
        return Err(SimError::Config("empty epsilon grid".into()));
    }
    for &eps in epsilons {
        validate_epsilon_grid(cfg, eps)?;
    }
    let basis = cfg.basis()?;
    let fast_model = FastProcessModel::new(cfg.fast_cov.clone());
    let avg_coeff = AveragedCoefficient::new(&cfg.nonlinearity, &fast_model, &basis, 0.0)?;

    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let results = map_replicas(replicas, |rep| {
            run_coupled_replica(cfg, &basis, &avg_coeff, functional, eps, rep)
                .expect("validated configuration")
        });
        let strong: Vec<Vec<f64>> = results.iter().map(|r| r.strong_sq.clone()).collect();
        let (strong_error, strong_se, strong_per_time) = sup_rms_with_jackknife(&strong);
        let (weak_error, weak_se, weak_per_time) = if functional.is_some() {
            let weak: Vec<Vec<f64>> = results
                .iter()
                .map(|r| r.weak_diff.clone().expect("weak stats requested"))
                .collect();
            let (e, se, pt) = weak_sup_with_se(&weak);
            (Some(e), Some(se), Some(pt))
        } else {
            (None, None, None)
        };
        let h = eps / cfg.fine_divisor as f64;
        let stride = ((cfg.horizon / h).round() as usize) / cfg.snapshots;
        let per_time = strong_per_time
            .iter()
            .enumerate()
            .map(|(i, &s)| TimePoint {
                time: (i + 1) as f64 * stride as f64 * h,
                strong: s,
                weak: weak_per_time.as_ref().map(|w| w[i]),
            })
            .collect();
        rows.push(ParameterRow {
            parameter: eps,
            strong_error,
            strong_se,
            weak_error,
            weak_se,
            replicas,
            per_time,
        });
    }

    let fit_points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let err = if functional.is_some() {
                r.weak_error.unwrap_or(0.0)
            } else {
                r.strong_error
            };
            (r.parameter, err)
        })
        .collect();
    let fit = fit_rate(&fit_points).ok();

    Ok(ErrorReport {
        experiment: experiment.to_string(),
        parameter_name: "epsilon".to_string(),
        rows,
        fit,
        config_snapshot: String::new(),
        seed_manifest: SeedManifest::new(cfg.master_seed, replicas),
    })
}

/// Strong averaging error `sup_t sqrt(E |X^eps(t) - X_bar(t)|^2)` per
/// epsilon, with a log-log rate fit.
pub fn strong_error_vs_epsilon(
    cfg: &ExperimentConfig,
    epsilons: &[f64],
    replicas: u32,
) -> Result<ErrorReport> {
    coupled_error_experiment(cfg, epsilons, replicas, None, "strong-rate")
}

/// Weak averaging error `sup_t |E phi(X^eps(t)) - E phi(X_bar(t))|` per
/// epsilon, estimated by the coupled-difference estimator.
pub fn weak_error_vs_epsilon(
    cfg: &ExperimentConfig,
    epsilons: &[f64],
    functional: &TestFunctional,
    replicas: u32,
) -> Result<ErrorReport> {
    coupled_error_experiment(cfg, epsilons, replicas, Some(functional), "weak-rate")
}

/// Verdict of the weak-rate run against its acceptance band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateVerdict {
    Pass,
    /// The slope confidence interval includes the strong rate 1/2, but the
    /// two smallest epsilons still certify decay faster than sqrt(eps).
    Inconclusive,
    Fail,
}

/// Classify a weak-rate report: pass when the fitted slope lies in
/// `[lo, hi]` and its 95% interval excludes 1/2; otherwise check that
/// `(weak + 2 se) / sqrt(eps)` at the two smallest epsilons stays below
/// the same ratio at the largest epsilon.
pub fn weak_rate_verdict(report: &ErrorReport, lo: f64, hi: f64) -> RateVerdict {
    let Some(fit) = report.fit else {
        return RateVerdict::Fail;
    };
    let in_band = fit.slope >= lo && fit.slope <= hi;
    if !in_band {
        return RateVerdict::Fail;
    }
    let ci_half = 1.96 * fit.se;
    if fit.slope - ci_half > 0.5 {
        return RateVerdict::Pass;
    }
    let mut rows: Vec<&ParameterRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    if rows.len() < 3 {
        return RateVerdict::Inconclusive;
    }
    let largest = rows.last().expect("nonempty");
    let ref_ratio = largest.weak_error.unwrap_or(0.0) / largest.parameter.sqrt();
    let certified = rows.iter().take(2).all(|r| {
        let bound = r.weak_error.unwrap_or(0.0) + 2.0 * r.weak_se.unwrap_or(0.0);
        bound / r.parameter.sqrt() < ref_ratio
    });
    if certified {
        RateVerdict::Inconclusive
    } else {
        RateVerdict::Fail
    }
}

/// Configuration of the multiscale-window sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmSweepConfig {
    pub n_modes: usize,
    pub oversample: usize,
    pub slow_cov: CovarianceSpec,
    pub fast_cov: CovarianceSpec,
    pub nonlinearity: NonlinearitySpec,
    pub dt: f64,
    pub tau: f64,
    pub horizon: f64,
    /// Micro batch per macro step: `M = m_over_ma * Ma`.
    pub m_over_ma: usize,
    pub x0_mode: usize,
    pub master_seed: u64,
}

impl HmmSweepConfig {
    /// Quadratic-family sweep used by the structural convergence check.
    pub fn reference() -> Self {
        use crate::reaction::{FastPart, SlowPart};
        Self {
            n_modes: 16,
            oversample: 8,
            slow_cov: CovarianceSpec::power_law(1.0).expect("valid exponent"),
            fast_cov: CovarianceSpec::white(),
            nonlinearity: NonlinearitySpec::new(SlowPart::Sin, FastPart::Quadratic, 1.0),
            dt: 0.0625,
            tau: 0.1,
            horizon: 0.5,
            m_over_ma: 2,
            x0_mode: 1,
            master_seed: 0x5eed_0002,
        }
    }
}

/// RMS terminal gap between the multiscale scheme and the tau-averaged
/// scheme, per averaging window, on common slow noise.
pub fn hmm_gap_vs_window(
    cfg: &HmmSweepConfig,
    windows: &[usize],
    replicas: u32,
) -> Result<ErrorReport> {
    if replicas < 2 {
        return Err(SimError::Statistics(
            "gap estimation needs at least 2 replicas".into(),
        ));
    }
    if windows.is_empty() {
        return Err(SimError::Config("empty window list".into()));
    }
    let basis = EigenBasis::dirichlet_1d(cfg.n_modes, cfg.oversample)?;
    let fast_model = FastProcessModel::new(cfg.fast_cov.clone());
    let avg_coeff = AveragedCoefficient::new(&cfg.nonlinearity, &fast_model, &basis, cfg.tau)?;

    let mut rows = Vec::with_capacity(windows.len());
    for &ma in windows {
        let params = HmmParams {
            epsilon: 1.0,
            dt: cfg.dt,
            tau: cfg.tau,
            micro_steps: cfg.m_over_ma * ma,
            avg_window: ma,
            horizon: cfg.horizon,
            n_modes: cfg.n_modes,
            delta: 0.0,
        };
        params.validate()?;
        let n_macro = params.macro_steps();
        let gaps = map_replicas(replicas, |rep| {
            let mut hmm =
                HmmStepper::new(&basis, &cfg.nonlinearity, &fast_model, &params)
                    .expect("validated parameters");
            let mut avg = AveragedStepper::new(&basis, avg_coeff.clone(), cfg.dt)
                .expect("validated parameters");
            let mut source = WienerSource::new(
                &cfg.slow_cov,
                basis.n_modes(),
                cfg.dt,
                RngStream::new(cfg.master_seed, rep as u64, StreamRole::SlowNoise),
            )
            .expect("validated covariance");
            let mut fast_rng =
                RngStream::new(cfg.master_seed, rep as u64, StreamRole::FastNoise);
            let x0 = if cfg.x0_mode == 0 {
                SpectralField::zero(&basis)
            } else {
                SpectralField::unit_mode(&basis, cfg.x0_mode)
            };
            let mut x_hmm = x0.coeffs().to_vec();
            let mut x_avg = x0.coeffs().to_vec();
            let mut chain = vec![0.0; basis.n_modes()];
            for _ in 0..n_macro {
                let dw = source.draw().to_vec();
                hmm.step(&mut x_hmm, &mut chain, &dw, &mut fast_rng);
                avg.step(&mut x_avg, &dw);
            }
            x_hmm
                .iter()
                .zip(&x_avg)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        });
        let mean_sq = gaps.iter().sum::<f64>() / replicas as f64;
        let rms = mean_sq.sqrt();
        let var_sq = gaps
            .iter()
            .map(|g| (g - mean_sq) * (g - mean_sq))
            .sum::<f64>()
            / (replicas as f64 - 1.0);
        let se_sq = (var_sq / replicas as f64).sqrt();
        let se = if rms > 0.0 { se_sq / (2.0 * rms) } else { 0.0 };
        rows.push(ParameterRow {
            parameter: ma as f64,
            strong_error: rms,
            strong_se: se,
            weak_error: None,
            weak_se: None,
            replicas,
            per_time: vec![TimePoint {
                time: cfg.horizon,
                strong: rms,
                weak: None,
            }],
        });
    }
    let fit = fit_rate(
        &rows
            .iter()
            .map(|r| (r.parameter, r.strong_error))
            .collect::<Vec<_>>(),
    )
    .ok();
    Ok(ErrorReport {
        experiment: "hmm-window-sweep".to_string(),
        parameter_name: "averaging_window".to_string(),
        rows,
        fit,
        config_snapshot: String::new(),
        seed_manifest: SeedManifest::new(cfg.master_seed, replicas),
    })
}

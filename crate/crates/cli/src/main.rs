use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use spde_hmm::config::{ConfigError, RunConfig};
use spde_hmm_core::exec::map_replicas;
use spde_hmm_core::fast::MicroSchemeState;
use spde_hmm_core::forcing::{RngStream, StreamRole};
use spde_hmm_core::harness::{
    hmm_gap_vs_window, mixing_sums, strong_error_vs_epsilon, weak_error_vs_epsilon,
    weak_rate_verdict, ErrorReport, RateVerdict, SeedManifest, TestFunctional,
};
use spde_hmm_core::poisson::{
    bound_probe, evaluate_corrector, generator_identity_check, CorrectorBound, PoissonProbe,
};
use spde_hmm_core::schemes::{integrate, HmmParams, SimSetup, TrajectoryRecord};
use spde_hmm_core::spectral::{EigenBasis, SpectralField};
use spde_hmm_core::SimError;

/// Slow-fast SPDE simulator: spectral-Galerkin schemes and averaging-rate
/// experiments.
#[derive(Parser)]
#[command(name = "spde-hmm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (flat key-value file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Cap the worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Master seed override (beats SPDE_HMM_SEED and the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and record snapshot norms.
    Simulate,
    /// Check the fast-process invariant laws against Monte Carlo.
    InvariantCheck,
    /// Strong averaging error versus epsilon with a rate fit.
    RateStrong,
    /// Weak averaging error versus epsilon (coupled estimator).
    RateWeak,
    /// Gap between the multiscale and tau-averaged schemes versus the
    /// averaging window.
    HmmSweep,
    /// Corrector bound sweeps and the generator-identity residual.
    PoissonCheck,
    /// Closed-form mixing sums R1 and R2.
    MixingSums,
}

enum CliError {
    Config(Vec<ConfigError>),
    Statistics(String),
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Statistics(m) => CliError::Statistics(m),
            other => CliError::Config(vec![ConfigError {
                field: "runtime".to_string(),
                message: other.to_string(),
            }]),
        }
    }
}

impl From<Vec<ConfigError>> for CliError {
    fn from(e: Vec<ConfigError>) -> Self {
        CliError::Config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, record) = match &err {
                CliError::Config(diags) => (
                    2,
                    serde_json::json!({
                        "error": "config",
                        "diagnostics": diags
                            .iter()
                            .map(|d| serde_json::json!({"field": d.field, "message": d.message}))
                            .collect::<Vec<_>>(),
                    }),
                ),
                CliError::Statistics(m) => {
                    (3, serde_json::json!({"error": "statistics", "message": m}))
                }
                CliError::Io(m) => (1, serde_json::json!({"error": "io", "message": m})),
            };
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        // a pool may already exist (e.g. under a test harness); that's fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let config_path = cli.config.as_ref().ok_or_else(|| {
        CliError::Config(vec![ConfigError {
            field: "--config".to_string(),
            message: "a configuration file is required".to_string(),
        }])
    })?;
    let text = fs::read_to_string(config_path).map_err(|e| {
        CliError::Config(vec![ConfigError {
            field: "--config".to_string(),
            message: format!("cannot read {}: {e}", config_path.display()),
        }])
    })?;
    let mut config = RunConfig::parse(&text)?;
    if let Ok(env_seed) = std::env::var("SPDE_HMM_SEED") {
        config.seed = env_seed.parse().map_err(|_| {
            CliError::Config(vec![ConfigError {
                field: "SPDE_HMM_SEED".to_string(),
                message: format!("cannot parse '{env_seed}' as a seed"),
            }])
        })?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    fs::create_dir_all(&cli.out)?;

    match cli.command {
        Command::Simulate => simulate(&config, &cli.out),
        Command::InvariantCheck => invariant_check(&config, &cli.out),
        Command::RateStrong => rate_strong(&config, &cli.out),
        Command::RateWeak => rate_weak(&config, &cli.out),
        Command::HmmSweep => hmm_sweep(&config, &cli.out),
        Command::PoissonCheck => poisson_check(&config, &cli.out),
        Command::MixingSums => mixing_sums_cmd(&config, &cli.out),
    }
}

fn write_seed_manifest(out: &Path, manifest: &SeedManifest) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(manifest).expect("serializable manifest");
    fs::write(out.join("seed_manifest.json"), json + "\n")?;
    Ok(())
}

fn write_report(out: &Path, report: &ErrorReport) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report).expect("serializable report");
    fs::write(out.join("report.json"), json + "\n")?;

    let mut errors_csv = String::from("parameter,time,strong_error,weak_error\n");
    for row in &report.rows {
        for tp in &row.per_time {
            let weak = tp
                .weak
                .map(|w| w.to_string())
                .unwrap_or_default();
            errors_csv.push_str(&format!(
                "{},{},{},{weak}\n",
                row.parameter, tp.time, tp.strong
            ));
        }
    }
    fs::write(out.join("errors.csv"), errors_csv)?;

    let mut rates_csv = String::from("experiment,slope,se,points,excluded\n");
    if let Some(fit) = report.fit {
        rates_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            report.experiment, fit.slope, fit.se, fit.points, fit.excluded
        ));
    }
    fs::write(out.join("rates.csv"), rates_csv)?;
    Ok(())
}

fn build_setup(config: &RunConfig) -> Result<SimSetup, CliError> {
    let basis = EigenBasis::dirichlet_1d(config.n_modes, config.oversample)?;
    let x0 = mode_state(&basis, config.x0_mode);
    let y0 = mode_state(&basis, config.y0_mode);
    let params = HmmParams {
        epsilon: config.epsilon,
        dt: config.dt,
        tau: config.tau,
        micro_steps: config.effective_micro_steps(),
        avg_window: config.avg_window,
        horizon: config.horizon,
        n_modes: config.n_modes,
        delta: config.delta,
    };
    Ok(SimSetup {
        basis,
        slow_cov: config.slow_covariance()?,
        fast_model: config.fast_model()?,
        nonlinearity: config.nonlinearity(),
        params,
        fine_divisor: config.fine_divisor,
        x0,
        y0,
    })
}

fn mode_state(basis: &Arc<EigenBasis>, mode: usize) -> SpectralField {
    if mode == 0 {
        SpectralField::zero(basis)
    } else {
        SpectralField::unit_mode(basis, mode)
    }
}

fn simulate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let setup = build_setup(config)?;
    let record: TrajectoryRecord = integrate(&setup, config.scheme, config.seed, 0)?;
    let mut csv = String::from("time,l2_norm,linf_norm\n");
    for (t, coeffs) in record.times.iter().zip(&record.snapshots) {
        let field = SpectralField::from_coeffs(&setup.basis, coeffs.clone())?;
        let l2 = field.l2_norm();
        let linf = field.lp_norm(f64::INFINITY, 0.0)?;
        csv.push_str(&format!("{t},{l2},{linf}\n"));
    }
    fs::write(out.join("trajectory.csv"), csv)?;
    write_seed_manifest(out, &SeedManifest::new(config.seed, 1))?;
    println!(
        "simulate: {} snapshots written to {}",
        record.times.len(),
        out.join("trajectory.csv").display()
    );
    Ok(())
}

fn invariant_check(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let model = config.fast_model()?;
    let modes = config.n_modes.min(8);
    let basis = EigenBasis::dirichlet_1d(modes, config.oversample)?;
    let chains = config.replicas;
    if chains < 2 {
        return Err(CliError::Statistics(
            "invariant check needs at least 2 chains".into(),
        ));
    }
    let tau = config.tau;
    let seed = config.seed;

    let micro = map_replicas(chains, |rep| {
        let mut init = RngStream::new(seed ^ 0xa5a5, rep as u64, StreamRole::SlowNoise);
        let start = model.sample_invariant(&basis, tau, &mut init).unwrap();
        let mut chain = MicroSchemeState::new(start, tau).unwrap();
        let mut rng = RngStream::new(seed, rep as u64, StreamRole::FastNoise);
        chain.advance(&model, &mut rng).unwrap();
        chain.field().coeffs().to_vec()
    });
    let gap = model.spectral_gap();
    let dt = 50.0 / gap;
    let y0 = SpectralField::zero(&basis);
    let exact = map_replicas(chains, |rep| {
        let mut rng = RngStream::new(seed ^ 0x5a5a, rep as u64, StreamRole::FastNoise);
        model
            .ou_exact_step(&y0, dt, &mut rng)
            .unwrap()
            .coeffs()
            .to_vec()
    });

    let mut csv = String::from("mode,law,closed_form,mc_estimate,se,deviation_se\n");
    let mut worst: f64 = 0.0;
    for (law, samples, closed) in [
        (
            "micro",
            &micro,
            (1..=modes)
                .map(|n| model.micro_variance(n, tau))
                .collect::<Vec<_>>(),
        ),
        (
            "exact",
            &exact,
            (1..=modes)
                .map(|n| model.invariant_variance(n))
                .collect::<Vec<_>>(),
        ),
    ] {
        for n in 1..=modes {
            let want = closed[n - 1];
            let got =
                samples.iter().map(|c| c[n - 1] * c[n - 1]).sum::<f64>() / chains as f64;
            let se = want * (2.0 / chains as f64).sqrt();
            let dev = if se > 0.0 { (got - want).abs() / se } else { 0.0 };
            worst = worst.max(dev);
            csv.push_str(&format!("{n},{law},{want},{got},{se},{dev}\n"));
        }
    }
    fs::write(out.join("invariant_check.csv"), csv)?;
    write_seed_manifest(out, &SeedManifest::new(seed, chains))?;
    println!("invariant-check: worst deviation {worst:.2} se over modes 1..={modes}");
    if worst > 3.0 {
        return Err(CliError::Statistics(format!(
            "invariant-law deviation {worst:.2} se exceeds 3 se"
        )));
    }
    Ok(())
}

fn rate_strong(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let cfg = config.experiment()?;
    let report = strong_error_vs_epsilon(&cfg, &config.epsilons, config.replicas)?
        .with_config_snapshot(config.canonical());
    write_report(out, &report)?;
    write_seed_manifest(out, &report.seed_manifest)?;
    match report.fit {
        Some(fit) => println!(
            "rate-strong: slope {:.4} (se {:.4}) over {} epsilons",
            fit.slope,
            fit.se,
            report.rows.len()
        ),
        None => println!("rate-strong: all errors vanished; nothing to fit"),
    }
    Ok(())
}

fn rate_weak(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let cfg = config.experiment()?;
    let basis = cfg.basis()?;
    let phi = TestFunctional::new(
        SpectralField::unit_mode(&basis, config.phi_weight_mode),
        config.phi_map,
    );
    let report = weak_error_vs_epsilon(&cfg, &config.epsilons, &phi, config.replicas)?
        .with_config_snapshot(config.canonical());
    write_report(out, &report)?;
    write_seed_manifest(out, &report.seed_manifest)?;
    let verdict = weak_rate_verdict(&report, 0.70, 1.30);
    match report.fit {
        Some(fit) => println!(
            "rate-weak: slope {:.4} (se {:.4}), verdict {}",
            fit.slope,
            fit.se,
            match verdict {
                RateVerdict::Pass => "PASS",
                RateVerdict::Inconclusive => "INCONCLUSIVE",
                RateVerdict::Fail => "FAIL",
            }
        ),
        None => println!("rate-weak: all errors vanished; nothing to fit"),
    }
    Ok(())
}

fn hmm_sweep(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let cfg = config.hmm_sweep()?;
    let report = hmm_gap_vs_window(&cfg, &config.ma_list, config.replicas)?
        .with_config_snapshot(config.canonical());
    write_report(out, &report)?;
    write_seed_manifest(out, &report.seed_manifest)?;
    match report.fit {
        Some(fit) => println!(
            "hmm-sweep: gap slope {:.4} (se {:.4}) over windows {:?}",
            fit.slope, fit.se, config.ma_list
        ),
        None => println!("hmm-sweep: gaps vanished; nothing to fit"),
    }
    Ok(())
}

fn poisson_check(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let basis = EigenBasis::dirichlet_1d(config.n_modes, config.oversample)?;
    let model = config.fast_model()?;
    let spec = config.nonlinearity();
    let x = mode_state(&basis, config.x0_mode);
    // the growth sweep needs a nonzero reference fast state
    let y_base = if config.y0_mode == 0 {
        SpectralField::unit_mode(&basis, 1)
    } else {
        mode_state(&basis, config.y0_mode)
    };
    let theta = SpectralField::unit_mode(&basis, config.phi_weight_mode);
    let probe = PoissonProbe::new(x, y_base, theta)?
        .with_quadrature(
            config.poisson_panels,
            config.poisson_gl_order,
            config.poisson_hermite_order,
        )
        .with_horizon(config.poisson_horizon, config.poisson_tail_tol);

    let mut rows = bound_probe(
        CorrectorBound::GrowthInY,
        &probe,
        &spec,
        &model,
        &config.poisson_scales,
        config.poisson_gamma,
    )?;
    rows.extend(bound_probe(
        CorrectorBound::DualNormInTheta,
        &probe,
        &spec,
        &model,
        &[],
        config.poisson_gamma,
    )?);
    let mut csv = String::from("bound_id,scale,value,bound,ratio\n");
    let mut max_ratio: f64 = 0.0;
    for row in &rows {
        max_ratio = max_ratio.max(row.ratio);
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.id, row.scale, row.value, row.bound, row.ratio
        ));
    }
    fs::write(out.join("poisson_bounds.csv"), csv)?;
    write_seed_manifest(out, &SeedManifest::new(config.seed, 1))?;

    let value = evaluate_corrector(&probe, &spec, &model)?;
    let residual = generator_identity_check(&probe, &spec, &model, 1e-4)?;
    println!(
        "poisson-check: corrector {value:.6e}, generator residual {residual:.3e}, \
         max bound ratio {max_ratio:.4}"
    );
    Ok(())
}

fn mixing_sums_cmd(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (r1, r2) = mixing_sums(
        config.mixing_m,
        config.mixing_ma,
        config.mixing_tau,
        config.mixing_c,
    )?;
    let mut csv = String::from("m,ma,tau,c,r1,r2\n");
    csv.push_str(&format!(
        "{},{},{},{},{r1},{r2}\n",
        config.mixing_m, config.mixing_ma, config.mixing_tau, config.mixing_c
    ));
    fs::write(out.join("mixing_sums.csv"), csv)?;
    write_seed_manifest(out, &SeedManifest::new(config.seed, 1))?;
    println!("mixing-sums: R1 = {r1}, R2 = {r2}");
    Ok(())
}

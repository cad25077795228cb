//! `bkpz`: runs boundary-kpz experiments and writes their artifacts.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
//! 3 numerical guard.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boundary_kpz::experiments::{
    self, ExperimentConfig, GrowthMode, Kind, Manifest, RunRecord, SpdeMode, SuiteReport,
};
use boundary_kpz::growth::KernelSpec;
use boundary_kpz::parallel;
use boundary_kpz::spde::SolverKind;
use boundary_kpz::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bkpz", version, about = "Steklov spectra, singular boundary KPZ and reflected-particle growth")]
struct Cli {
    /// Master seed; overrides the seed of the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output root; each experiment writes into `<out>/<name>/`.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment TOML; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment name (output directory).
    #[arg(long)]
    name: Option<String>,
    /// Curve preset: `disk`, `ellipse:a:b` or `perturbed-disk:amplitude:mode`.
    #[arg(long)]
    curve: Option<String>,
    /// Boundary nodes.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Steklov spectrum; checked against `⌈k/2⌉` on the disk.
    Spectrum(Common),
    /// Spectral gap, Weyl band, local Weyl law and order-zero defect.
    Weyl(Common),
    /// Renormalization constants and their logarithmic fit.
    Renorm(Common),
    /// OU stationarity and the coupled Cauchy identity.
    Oucheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// SPDE trajectories and consistency checks.
    Spde {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<SpdeModeArg>,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Coupled Ψ^η refinement study.
    Psi {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Reflected-particle growth: bracket comparison or sanity run.
    Growth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<GrowthModeArg>,
        /// Comma-separated ε values.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        replicas: Option<usize>,
        /// Use the heat kernel of width ρ.
        #[arg(long)]
        kernel_rho: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Runs every experiment of a manifest.
    Suite {
        manifest: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SpdeModeArg {
    Run,
    DpdConsistency,
    TrivialDrift,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Kpz,
    Singular,
    Dpd,
    Psi,
}

#[derive(Clone, Copy, ValueEnum)]
enum GrowthModeArg {
    Bracket,
    Sanity,
}

fn exit_for(e: &Error) -> ExitCode {
    if experiments::is_config_error(e) {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn base(common: &Common, kind: Kind, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.kind()? != kind {
                return Err(Error::Config {
                    path: path.display().to_string(),
                    message: format!("expected a `{}` experiment", kind.as_str()),
                });
            }
            cfg
        }
        None => ExperimentConfig::with_defaults(kind.as_str(), kind, 0),
    };
    if let Some(name) = &common.name {
        cfg.name = name.clone();
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn build(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let seed = cli.seed;
    let set = |slot: &mut String, v: &Option<String>| {
        if let Some(v) = v {
            slot.clone_from(v);
        }
    };
    let setn = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    Ok(match &cli.command {
        Command::Spectrum(c) => {
            let mut cfg = base(c, Kind::Spectrum, seed)?;
            let p = cfg.spectrum.as_mut().unwrap();
            set(&mut p.curve, &c.curve);
            setn(&mut p.n, c.n);
            cfg
        }
        Command::Weyl(c) => {
            let mut cfg = base(c, Kind::Weyl, seed)?;
            let p = cfg.weyl.as_mut().unwrap();
            set(&mut p.curve, &c.curve);
            setn(&mut p.n, c.n);
            cfg
        }
        Command::Renorm(c) => {
            let mut cfg = base(c, Kind::Renorm, seed)?;
            let p = cfg.renorm.as_mut().unwrap();
            set(&mut p.curve, &c.curve);
            setn(&mut p.n, c.n);
            cfg
        }
        Command::Oucheck { common, replicas, steps } => {
            let mut cfg = base(common, Kind::Oucheck, seed)?;
            let p = cfg.oucheck.as_mut().unwrap();
            set(&mut p.curve, &common.curve);
            setn(&mut p.n, common.n);
            setn(&mut p.replicas, *replicas);
            setn(&mut p.steps, *steps);
            cfg
        }
        Command::Spde { common, mode, solver, eta, dt, horizon } => {
            let mut cfg = base(common, Kind::Spde, seed)?;
            let p = cfg.spde.as_mut().unwrap();
            set(&mut p.config.curve, &common.curve);
            setn(&mut p.config.n, common.n);
            if let Some(m) = mode {
                p.mode = match m {
                    SpdeModeArg::Run => SpdeMode::Run,
                    SpdeModeArg::DpdConsistency => SpdeMode::DpdConsistency,
                    SpdeModeArg::TrivialDrift => SpdeMode::TrivialDrift,
                };
            }
            if let Some(s) = solver {
                p.config.solver = match s {
                    SolverArg::Kpz => SolverKind::Kpz,
                    SolverArg::Singular => SolverKind::Singular,
                    SolverArg::Dpd => SolverKind::Dpd,
                    SolverArg::Psi => SolverKind::Psi,
                };
            }
            if let Some(v) = eta {
                p.config.eta = *v;
            }
            if let Some(v) = dt {
                p.config.dt = *v;
            }
            if let Some(v) = horizon {
                p.config.horizon = *v;
            }
            cfg
        }
        Command::Psi { common, replicas } => {
            let mut cfg = base(common, Kind::Psi, seed)?;
            let p = cfg.psi.as_mut().unwrap();
            set(&mut p.curve, &common.curve);
            setn(&mut p.n, common.n);
            setn(&mut p.replicas, *replicas);
            cfg
        }
        Command::Growth { common, mode, eps, replicas, kernel_rho, horizon } => {
            let mut cfg = base(common, Kind::Growth, seed)?;
            if common.curve.as_deref().is_some_and(|c| c != "disk") {
                return Err(Error::Config {
                    path: "curve".into(),
                    message: "the growth model lives on the disk".into(),
                });
            }
            let p = cfg.growth.as_mut().unwrap();
            setn(&mut p.config.n, common.n);
            if let Some(m) = mode {
                p.mode = match m {
                    GrowthModeArg::Bracket => GrowthMode::Bracket,
                    GrowthModeArg::Sanity => GrowthMode::Sanity,
                };
            }
            if let Some(e) = eps {
                p.eps_list.clone_from(e);
                if let Some(&last) = e.last() {
                    p.config.eps = last;
                }
            }
            setn(&mut p.config.replicas, *replicas);
            if let Some(rho) = kernel_rho {
                p.config.kernel = KernelSpec::Heat { rho: *rho };
            }
            if let Some(h) = horizon {
                p.config.horizon = *h;
            }
            cfg
        }
        Command::Suite { .. } => unreachable!("suites are not single experiments"),
    })
}

fn print_record(r: &RunRecord) {
    println!("{} [{}] id={} {:.1}s", r.name, r.kind.as_str(), &r.id[..12], r.wall_seconds);
    for c in &r.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("  {tag} {:<28} {:<14.6e} {}", c.name, c.value, c.condition);
    }
    for w in &r.warnings {
        println!("  WARN {w}");
    }
}

fn suite_exit(report: &SuiteReport) -> ExitCode {
    let mut code = 0u8;
    for e in &report.entries {
        match (&e.record, &e.error) {
            (Some(r), _) => {
                print_record(r);
                if !r.passed && code == 0 {
                    code = 1;
                }
            }
            (None, Some(msg)) => {
                println!("{} ERROR {msg}", e.name);
                let c = if e.error_kind.as_deref() == Some("config") { 2 } else { 3 };
                code = code.max(c);
            }
            (None, None) => {}
        }
    }
    println!("suite: {}", if report.passed { "pass" } else { "fail" });
    ExitCode::from(code)
}

fn run(cli: &Cli) -> ExitCode {
    if let Command::Suite { manifest } = &cli.command {
        let mut m = match Manifest::load(manifest) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {e}");
                return exit_for(&e);
            }
        };
        if let Some(s) = cli.seed {
            for e in &mut m.experiment {
                e.seed = s;
            }
        }
        return match experiments::suite(&m, &cli.out) {
            Ok(report) => suite_exit(&report),
            Err(e) => {
                eprintln!("error: {e}");
                exit_for(&e)
            }
        };
    }
    let result = build(cli).and_then(|cfg| experiments::run_experiment(&cfg, Path::new(&cli.out)));
    match result {
        Ok(r) => {
            print_record(&r);
            if r.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    parallel::with_threads(cli.threads, || run(&cli))
}

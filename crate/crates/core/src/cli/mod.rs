//! Command-line front end: subcommands, experiment dispatch and exit codes.

pub mod config;
pub mod suite;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::dtheta::{band_filling_report, band_prediction, dtheta_eigenvalues, ladder_trend, FillingReport};
use crate::error::{Error, Result};
use crate::linalg::reflection_defect;
use crate::mehler::{mehler_apply, MehlerFockKernel, QuadratureGrid, SampledFunction};
use crate::scattering1d::{parse_grid, scan_csv, sigma_scan, smatrix, LatticeModel};
use crate::sho::{assemble_sho_circle, predict_bands, SymbolSpec};
use crate::specfun::{conical_p, m_tau, zeta_kernel};
use config::{
    atomic_write, read_json, write_json, CheckRecord, DthetaParams, ExperimentConfig, GridChoice,
    Identity, MehlerParams, Parameters, RunManifest, ScatterParams, ShoBandsParams,
    ShoSpectrumParams, SpecfunParams, SpecialFunction,
};
use suite::{reproduce_all, SuiteOptions, TolProfile, Tolerances};

#[derive(Debug, Parser)]
#[command(name = "sho-spectra", version, about = "Spectral experiments for singular Hankel-type operators")]
pub struct Cli {
    /// worker threads
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t)]
    pub tol_profile: TolProfile,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Special-function evaluation
    Specfun {
        #[command(subcommand)]
        cmd: SpecfunCmd,
    },
    /// Mehler and Mehler-Fock identities
    Mehler {
        #[command(subcommand)]
        cmd: MehlerCmd,
    },
    /// Truncated Hankel operators with piecewise continuous symbols
    Sho {
        #[command(subcommand)]
        cmd: ShoCmd,
    },
    /// One-dimensional lattice scattering
    Scatter {
        #[command(subcommand)]
        cmd: ScatterCmd,
    },
    /// theta(H) - theta(H0) on a Dirichlet box
    Dtheta {
        #[command(subcommand)]
        cmd: DthetaCmd,
    },
    /// Run an experiment described by a JSON config
    Run { config: PathBuf },
    /// Run the acceptance suite
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Subcommand)]
pub enum SpecfunCmd {
    Eval {
        #[arg(long = "fn", value_enum)]
        function: SpecialFunction,
        /// `zeta`: lambda values; `conical`: tau, x pairs; `mtau`: tau values
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
        args: Vec<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MehlerCmd {
    Verify {
        #[arg(long, value_enum)]
        identity: Identity,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.25, 0.5, 1.0, 2.0, 3.0])]
        tau: Vec<f64>,
        #[arg(long, value_enum, default_value_t)]
        grid: GridChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ShoCmd {
    Spectrum {
        #[arg(long)]
        symbol: PathBuf,
        #[arg(long)]
        modes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Bands {
        #[arg(long)]
        symbol: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScatterCmd {
    Smatrix {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
    },
    Scan {
        #[arg(long)]
        model: PathBuf,
        /// `start:stop:step`
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DthetaCmd {
    Run {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        theta: Option<PathBuf>,
        #[arg(long = "box", default_value_t = 4096)]
        box_size: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [1024usize, 2048, 4096])]
        ladder: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// restrict to these families
    #[arg(long, value_enum, value_delimiter = ',')]
    pub only: Vec<suite::Family>,
    /// also write the suite report as JSON
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Where and how a run writes.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub profile: TolProfile,
}

impl RunContext {
    fn tol(&self) -> Tolerances {
        Tolerances::for_profile(self.profile)
    }
}

fn profile_name(p: TolProfile) -> &'static str {
    match p {
        TolProfile::Default => "default",
        TolProfile::Strict => "strict",
    }
}

fn default_output(cfg: &ExperimentConfig) -> &'static str {
    match cfg.parameters {
        Parameters::ShoSpectrum(_) => "eig.csv",
        Parameters::ShoBands(_) => "bands.json",
        Parameters::MehlerVerify(_) => "report.json",
        Parameters::ScatterScan(_) => "scan.csv",
        Parameters::DthetaRun(_) => "report.json",
        Parameters::SpecfunEval(_) => "values.txt",
    }
}

struct Produced {
    outputs: Vec<PathBuf>,
    checks: Vec<CheckRecord>,
}

/// Runs one experiment, writing its outputs and `<output>.manifest.json`.
pub fn run(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(&ctx.out_dir)?;
    let primary = ctx
        .out_dir
        .join(cfg.output.clone().unwrap_or_else(|| default_output(cfg).into()));
    let produced = match &cfg.parameters {
        Parameters::SpecfunEval(p) => run_specfun(p, &primary)?,
        Parameters::MehlerVerify(p) => run_mehler(p, &primary, ctx)?,
        Parameters::ShoSpectrum(p) => run_sho_spectrum(p, &primary, ctx)?,
        Parameters::ShoBands(p) => run_sho_bands(p, &primary)?,
        Parameters::ScatterScan(p) => run_scatter_scan(p, &primary, ctx)?,
        Parameters::DthetaRun(p) => run_dtheta(p, cfg.seed, &primary, start)?,
    };
    let passed = produced.checks.iter().all(|c| c.passed);
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        kind: serde_json::to_value(cfg.kind)?
            .as_str()
            .unwrap_or_default()
            .to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        wall_seconds: start.elapsed().as_secs_f64(),
        tolerance_profile: profile_name(ctx.profile).to_string(),
        outputs: produced.outputs,
        checks: produced.checks,
        passed,
    };
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    write_json(&primary.with_file_name(name), &manifest)?;
    Ok(manifest)
}

fn specfun_values(p: &SpecfunParams) -> Result<Vec<String>> {
    match p.function {
        SpecialFunction::Zeta => Ok(p.args.iter().map(|&l| format!("{l} {:.17e}", zeta_kernel(l))).collect()),
        SpecialFunction::Mtau => p
            .args
            .iter()
            .map(|&t| m_tau(t).map(|m| format!("{t} {:.17e} {:.17e}", m.re, m.im)))
            .collect(),
        SpecialFunction::Conical => p
            .args
            .chunks(2)
            .map(|c| match c {
                [t, x] => conical_p(*t, *x).map(|v| format!("{t} {x} {v:.17e}")),
                _ => Err(Error::config("parameters.args", "conical takes tau, x pairs")),
            })
            .collect(),
    }
}

fn run_specfun(p: &SpecfunParams, out: &Path) -> Result<Produced> {
    let lines = specfun_values(p)?;
    atomic_write(out, (lines.join("\n") + "\n").as_bytes())?;
    let finite = lines.iter().all(|l| !l.contains("NaN") && !l.contains("inf"));
    Ok(Produced {
        outputs: vec![out.to_path_buf()],
        checks: vec![CheckRecord::flag("all values finite", finite)],
    })
}

#[derive(Serialize)]
struct MehlerRow {
    tau: f64,
    residual: f64,
}

fn grids(choice: GridChoice) -> (QuadratureGrid, QuadratureGrid) {
    match choice {
        GridChoice::Default => (QuadratureGrid::default_t(), QuadratureGrid::default_tau()),
        GridChoice::Refined => (QuadratureGrid::refined_t(), QuadratureGrid::refined_tau()),
    }
}

fn run_mehler(p: &MehlerParams, out: &Path, ctx: &RunContext) -> Result<Produced> {
    let tol = ctx.tol();
    let (t_grid, tau_grid) = grids(p.grid);
    let t_grid = Arc::new(t_grid);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let (label, bound) = match p.identity {
        Identity::F1 => {
            for &tau in &p.taus {
                let f = SampledFunction::from_real_fn(Arc::clone(&t_grid), |t| {
                    conical_p(tau, 1.0 + t).unwrap_or(f64::NAN)
                });
                let mf = mehler_apply(&f);
                warnings.extend(mf.warnings);
                let scale = 1.0 / (std::f64::consts::PI * tau).cosh();
                let residual = mf
                    .value
                    .values()
                    .iter()
                    .zip(f.values())
                    .map(|(a, b)| (a - b * scale).norm())
                    .fold(0.0, f64::max);
                rows.push(MehlerRow { tau, residual });
            }
            ("max |M P - P / cosh(pi tau)|", tol.mehler_identity)
        }
        Identity::F3 | Identity::Unitarity => {
            let kernel = MehlerFockKernel::new(Arc::clone(&t_grid), tau_grid.nodes())?;
            // rows indexed by the decay rate `a` of f(t) = exp(-a t)
            for &a in &p.taus {
                let f = SampledFunction::from_real_fn(Arc::clone(&t_grid), |t| (-a * t).exp());
                let g = kernel.forward(&f)?;
                warnings.extend(g.warnings);
                let residual = if p.identity == Identity::Unitarity {
                    (tau_grid.l2_norm(&g.value) / f.l2_norm() - 1.0).abs()
                } else {
                    let gm = kernel.forward(&mehler_apply(&f).value)?.value;
                    gm.iter()
                        .zip(&g.value)
                        .zip(tau_grid.nodes())
                        .map(|((x, y), tau): ((&Complex64, &Complex64), &f64)| {
                            (x - y / (std::f64::consts::PI * tau).cosh()).norm()
                        })
                        .fold(0.0, f64::max)
                };
                rows.push(MehlerRow { tau: a, residual });
            }
            if p.identity == Identity::Unitarity {
                let bound = match p.grid {
                    GridChoice::Default => tol.isometry_default,
                    GridChoice::Refined => tol.isometry_refined,
                };
                ("| ||Psi f|| / ||f|| - 1 | for f = exp(-a t)", bound)
            } else {
                ("max |Psi(M f) - Psi f / cosh(pi tau)| for f = exp(-a t)", tol.mehler_fock_diagonal)
            }
        }
    };
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    write_json(out, &json!({ "identity": p.identity, "grid": p.grid, "rows": rows, "warnings": warnings }))?;
    Ok(Produced {
        outputs: vec![out.to_path_buf()],
        checks: vec![CheckRecord::at_most(label, worst, bound)],
    })
}

fn run_sho_spectrum(p: &ShoSpectrumParams, out: &Path, ctx: &RunContext) -> Result<Produced> {
    let t = assemble_sho_circle(&p.symbol.build()?, p.modes)?;
    let eigs = t.eigenvalues()?;
    let mut csv = String::from("index,eigenvalue\n");
    for (i, e) in eigs.iter().enumerate() {
        csv.push_str(&format!("{i},{e:.17e}\n"));
    }
    atomic_write(out, csv.as_bytes())?;
    let bands = predict_bands(&p.symbol.build()?)?;
    let max = eigs.iter().map(|e| e.abs()).fold(0.0, f64::max);
    Ok(Produced {
        outputs: vec![out.to_path_buf()],
        checks: vec![
            CheckRecord::at_most("+- symmetry defect", reflection_defect(&eigs), ctx.tol().spectral_symmetry),
            CheckRecord::at_most("max |eigenvalue| vs predicted band edge", max, bands.max_half_width() + 0.05),
        ],
    })
}

fn run_sho_bands(p: &ShoBandsParams, out: &Path) -> Result<Produced> {
    let bands = predict_bands(&p.symbol.build()?)?;
    write_json(out, &bands)?;
    Ok(Produced {
        outputs: vec![out.to_path_buf()],
        checks: Vec::new(),
    })
}

fn run_scatter_scan(p: &ScatterParams, out: &Path, ctx: &RunContext) -> Result<Produced> {
    let lambdas = parse_grid(&p.grid).map_err(|e| match e {
        Error::Config { message, .. } => Error::config("parameters.grid", message),
        other => other,
    })?;
    let scan = sigma_scan(&p.model, &lambdas)?;
    atomic_write(out, scan_csv(&scan).as_bytes())?;
    let mut worst = 0.0f64;
    for &l in &lambdas {
        worst = worst.max(smatrix(&p.model, l)?.unitarity_defect());
    }
    Ok(Produced {
        outputs: vec![out.to_path_buf()],
        checks: vec![CheckRecord::at_most("max ||S*S - I||", worst, ctx.tol().unitarity)],
    })
}

fn run_dtheta(p: &DthetaParams, seed: u64, out: &Path, start: Instant) -> Result<Produced> {
    let theta = p.theta.build()?;
    let scat: Vec<_> = theta
        .jumps()
        .iter()
        .map(|j| smatrix(&p.model, j.lambda))
        .collect::<Result<_>>()?;
    let bands = band_prediction(&theta, &scat)?;
    let mut sizes = p.ladder.clone();
    if !sizes.contains(&p.box_size) {
        sizes.push(p.box_size);
    }
    sizes.sort_unstable();
    let mut reports: Vec<FillingReport> = Vec::new();
    let mut eig_files = Vec::new();
    for &n in &sizes {
        let eigs = dtheta_eigenvalues(&p.model, &theta, n, seed)?;
        if n == p.box_size {
            let mut csv = String::from("index,eigenvalue\n");
            for (i, e) in eigs.iter().enumerate() {
                csv.push_str(&format!("{i},{e:.17e}\n"));
            }
            let path = out.with_file_name(format!("eig_box{n}.csv"));
            atomic_write(&path, csv.as_bytes())?;
            eig_files.push(path);
        }
        reports.push(band_filling_report(&eigs, &bands, n));
    }
    let ladder: Vec<FillingReport> = reports.iter().filter(|r| p.ladder.contains(&r.n)).cloned().collect();
    let trend = ladder_trend(&ladder);
    write_json(
        out,
        &json!({
            "predicted_bands": bands,
            "scattering": scat,
            "rungs": reports,
            "trend": trend,
            "runtime_seconds": start.elapsed().as_secs_f64(),
        }),
    )?;
    let outside = ladder.last().map(|r| r.outside_count).unwrap_or(0);
    let mut outputs = vec![out.to_path_buf()];
    outputs.extend(eig_files);
    Ok(Produced {
        outputs,
        checks: vec![
            CheckRecord::at_most("eigenvalues outside the predicted bands at the largest rung", outside as f64, 5.0),
            CheckRecord::flag("outside count non-increasing along the ladder", trend.outside_non_increasing),
        ],
    })
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. }
        | Error::Linalg(_)
        | Error::TailMismatch { .. }
        | Error::PoleProximity { .. }
        | Error::JumpCollision { .. }
        | Error::Aliasing { .. } => 3,
        _ => 2,
    }
}

fn print_manifest(m: &RunManifest) {
    for c in &m.checks {
        println!("[{}] {} = {:.6e} ({})", if c.passed { "ok" } else { "FAIL" }, c.name, c.value, c.bound);
    }
    for o in &m.outputs {
        println!("wrote {}", o.display());
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let ctx = RunContext {
        out_dir: cli.out_dir.clone(),
        profile: cli.tol_profile,
    };
    let seed = cli.seed;
    let experiment = |params: Parameters, out: Option<PathBuf>| -> Result<bool> {
        let cfg = ExperimentConfig::new(params, seed, out)?;
        let m = run(&cfg, &ctx)?;
        print_manifest(&m);
        Ok(m.passed)
    };
    match cli.command {
        Command::Specfun { cmd: SpecfunCmd::Eval { function, args } } => {
            let p = SpecfunParams { function, args };
            ExperimentConfig::new(Parameters::SpecfunEval(p.clone()), seed, None)?;
            for line in specfun_values(&p)? {
                println!("{line}");
            }
            Ok(true)
        }
        Command::Mehler { cmd: MehlerCmd::Verify { identity, tau, grid, out } } => experiment(
            Parameters::MehlerVerify(MehlerParams { identity, taus: tau, grid }),
            out,
        ),
        Command::Sho { cmd: ShoCmd::Spectrum { symbol, modes, out } } => {
            let symbol: SymbolSpec = read_json(&symbol, "symbol")?;
            experiment(Parameters::ShoSpectrum(ShoSpectrumParams { symbol, modes }), out)
        }
        Command::Sho { cmd: ShoCmd::Bands { symbol } } => {
            let symbol: SymbolSpec = read_json(&symbol, "symbol")?;
            let bands = predict_bands(&symbol.build()?)?;
            println!("{}", serde_json::to_string_pretty(&bands)?);
            Ok(true)
        }
        Command::Scatter { cmd: ScatterCmd::Smatrix { model, lambda } } => {
            let model: LatticeModel = read_json(&model, "model")?;
            model.validate()?;
            let s = smatrix(&model, lambda)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(s.unitarity_defect() <= ctx.tol().unitarity)
        }
        Command::Scatter { cmd: ScatterCmd::Scan { model, grid, out } } => {
            let model: LatticeModel = read_json(&model, "model")?;
            experiment(Parameters::ScatterScan(ScatterParams { model, grid }), out)
        }
        Command::Dtheta { cmd: DthetaCmd::Run { model, theta, box_size, ladder, out } } => {
            let mut p: DthetaParams = serde_json::from_value(json!({}))?;
            if let Some(m) = model {
                p.model = read_json(&m, "model")?;
            }
            if let Some(t) = theta {
                p.theta = read_json(&t, "theta")?;
            }
            p.box_size = box_size;
            p.ladder = ladder;
            experiment(Parameters::DthetaRun(p), out)
        }
        Command::Run { config } => {
            let cfg = config::parse_config(&config)?;
            let m = run(&cfg, &ctx)?;
            print_manifest(&m);
            Ok(m.passed)
        }
        Command::Reproduce(args) => {
            let opts = SuiteOptions {
                profile: cli.tol_profile,
                only: args.only,
                seed,
                jobs: cli.jobs,
                ..SuiteOptions::default()
            };
            let report = reproduce_all(&opts, |r| println!("{}", r.detail()))?;
            println!(
                "suite {} in {:.1} s",
                if report.passed { "PASS" } else { "FAIL" },
                report.wall_seconds
            );
            if let Some(path) = args.report {
                write_json(&ctx.out_dir.join(path), &report)?;
            }
            Ok(report.passed)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if cli.jobs > 1 {
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    match execute(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

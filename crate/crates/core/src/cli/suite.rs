//! The reproduction suite: numbered acceptance criteria, each a small
//! experiment with pass/fail checks.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::CheckRecord;
use crate::dtheta::{band_prediction, dtheta_eigenvalues, model_half_widths, StepFunction};
use crate::error::{Error, Result};
use crate::linalg::{reflection_defect, singular_values, CMat};
use crate::mehler::{
    log_grid, mehler_apply, w_suprema, w_tau, BoundFit, MehlerFockKernel, QuadratureGrid,
    SampledFunction,
};
use crate::scattering1d::{smatrix, LatticeModel, Site};
use crate::sho::{
    assemble_sho_circle, block_hat_k, compactness_ladder, hat_k_eigenvectors,
    inverse_log_extrapolation, max_gap, one_jump_symbol, scalar_matrix, PiecewiseSymbol,
    Remainder, SymbolJump,
};
use crate::specfun::{
    conical_legendre_repr, conical_p, m_tau, zeta_kernel, ConicalArg, ConicalRepresentation,
    SeriesPolicy,
};

/// Environment variable overriding the directory holding `golden.json`.
pub const DATA_DIR_ENV: &str = "SHO_SPECTRA_DATA_DIR";

const EMBEDDED_GOLDEN: &str = include_str!("../../data/golden.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Specfun,
    Mehler,
    Sho,
    Scatter,
    Dtheta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TolProfile {
    #[default]
    Default,
    Strict,
}

/// Tolerances of the residual-type checks; ladder and band thresholds are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub mehler_identity: f64,
    pub mehler_fock_diagonal: f64,
    pub isometry_default: f64,
    pub isometry_refined: f64,
    pub series_crossover: f64,
    pub golden_relative: f64,
    pub w_refinement: f64,
    pub hat_k: f64,
    pub spectral_symmetry: f64,
    pub unitarity: f64,
    pub free_identity: f64,
    pub jump_operator: f64,
}

impl Tolerances {
    pub fn for_profile(p: TolProfile) -> Self {
        let base = Self {
            mehler_identity: 1e-6,
            mehler_fock_diagonal: 1e-6,
            isometry_default: 1e-3,
            isometry_refined: 1e-4,
            series_crossover: 1e-8,
            golden_relative: 1e-9,
            w_refinement: 0.05,
            hat_k: 1e-10,
            spectral_symmetry: 1e-10,
            unitarity: 1e-10,
            free_identity: 1e-14,
            jump_operator: 1e-12,
        };
        match p {
            TolProfile::Default => base,
            TolProfile::Strict => Self {
                mehler_identity: 1e-8,
                mehler_fock_diagonal: 1e-8,
                isometry_default: 1e-4,
                isometry_refined: 1e-6,
                series_crossover: 1e-10,
                golden_relative: 1e-10,
                w_refinement: 0.02,
                hat_k: 1e-12,
                spectral_symmetry: 1e-12,
                unitarity: 1e-12,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct GoldenConical {
    tau: f64,
    x: f64,
    value: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct GoldenZeta {
    lambda: f64,
    value: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct GoldenComplex {
    tau: f64,
    #[serde(default)]
    lambda: f64,
    re: f64,
    im: f64,
}

/// Reference values computed with an independent arbitrary-precision library.
#[derive(Debug, Clone, Deserialize)]
pub struct Golden {
    conical: Vec<GoldenConical>,
    zeta: Vec<GoldenZeta>,
    m_tau: Vec<GoldenComplex>,
    w_tau: Vec<GoldenComplex>,
}

impl Golden {
    /// Loads `golden.json` from `dir`, or the copy compiled into the binary.
    pub fn load(dir: Option<&Path>) -> Result<Self> {
        match dir {
            Some(d) => {
                let path = d.join("golden.json");
                let text = std::fs::read_to_string(&path)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::config("golden", format!("{}: {e}", path.display())))
            }
            None => Ok(serde_json::from_str(EMBEDDED_GOLDEN)?),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub profile: TolProfile,
    /// empty: all families
    pub only: Vec<Family>,
    pub seed: u64,
    pub data_dir: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            profile: TolProfile::Default,
            only: Vec::new(),
            seed: 0,
            data_dir: std::env::var_os(DATA_DIR_ENV).map(PathBuf::from),
            jobs: 1,
        }
    }
}

/// Outcome of one criterion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub family: Family,
    pub title: String,
    pub checks: Vec<CheckRecord>,
    pub notes: Vec<String>,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }

    pub fn status_line(&self) -> String {
        format!(
            "criterion {:>2} {}: {} ({:.1} s)",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.title,
            self.wall_seconds
        )
    }

    /// Status line followed by one indented line per check and note.
    pub fn detail(&self) -> String {
        let mut s = self.status_line();
        for c in &self.checks {
            s.push_str(&format!(
                "\n    [{}] {} = {:.6e} ({})",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.value,
                c.bound
            ));
        }
        if let Some(e) = &self.error {
            s.push_str(&format!("\n    error: {e}"));
        }
        for n in &self.notes {
            s.push_str(&format!("\n    note: {n}"));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub criteria: Vec<CriterionReport>,
    pub wall_seconds: f64,
    pub passed: bool,
}

pub const CRITERIA: [(u8, Family, &str); 11] = [
    (1, Family::Mehler, "Mehler operator on conical functions"),
    (2, Family::Mehler, "Mehler-Fock diagonalization and isometry"),
    (3, Family::Specfun, "conical function large-x asymptotics"),
    (4, Family::Mehler, "w_tau weighted suprema under refinement"),
    (5, Family::Sho, "block matrix eigenvalues are +-singular values"),
    (6, Family::Sho, "sawtooth band-edge ladder and band filling"),
    (7, Family::Sho, "two-jump multiplicity step"),
    (8, Family::Scatter, "lattice scattering matrix unitarity"),
    (9, Family::Dtheta, "theta(H) - theta(H0) band edge, single site, unit step"),
    (10, Family::Dtheta, "dropped band where sigma = 1"),
    (11, Family::Sho, "weighted compactness of SHO minus one-jump model"),
];

/// Ladder of the sawtooth experiment.
pub const SAW_LADDER: [usize; 5] = [512, 1024, 2048, 4096, 8192];
/// Ladder of the lattice experiment.
pub const BOX_LADDER: [usize; 3] = [1024, 2048, 4096];
/// Ladder of the compactness diagnostic.
pub const COMPACTNESS_LADDER: [usize; 4] = [256, 512, 1024, 2048];

type EigCache = Mutex<HashMap<usize, Arc<OnceLock<std::result::Result<Arc<Vec<f64>>, String>>>>>;

/// Shared state of a suite run.
pub struct SuiteContext {
    pub tol: Tolerances,
    pub seed: u64,
    golden: std::result::Result<Golden, String>,
    saw: EigCache,
}

impl SuiteContext {
    pub fn new(opts: &SuiteOptions) -> Self {
        Self {
            tol: Tolerances::for_profile(opts.profile),
            seed: opts.seed,
            golden: Golden::load(opts.data_dir.as_deref()).map_err(|e| e.to_string()),
            saw: Mutex::new(HashMap::new()),
        }
    }

    fn golden(&self) -> Result<&Golden> {
        self.golden
            .as_ref()
            .map_err(|e| Error::config("golden", e.clone()))
    }

    /// Eigenvalues of the `kappa = 1` sawtooth truncation, computed once per size.
    fn saw_eigenvalues(&self, n: usize) -> Result<Arc<Vec<f64>>> {
        let cell = {
            let mut map = self.saw.lock().expect("cache lock");
            Arc::clone(map.entry(n).or_default())
        };
        cell.get_or_init(|| {
            circle_jumps(&[(1.0, 0.0)])
                .and_then(|s| assemble_sho_circle(&s, n))
                .and_then(|t| t.eigenvalues())
                .map(Arc::new)
                .map_err(|e| e.to_string())
        })
        .clone()
        .map_err(Error::Linalg)
    }
}

fn circle_jumps(jumps: &[(f64, f64)]) -> Result<PiecewiseSymbol> {
    PiecewiseSymbol::circle_sawtooth(
        1,
        jumps
            .iter()
            .map(|&(kappa, at)| SymbolJump {
                location: at,
                k: scalar_matrix(kappa),
            })
            .collect(),
        None,
        "sawtooth",
    )
}

struct Outcome {
    checks: Vec<CheckRecord>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, c: CheckRecord) {
        self.checks.push(c);
    }

    fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }
}

fn max_abs_diff<'a>(a: impl IntoIterator<Item = &'a Complex64>, b: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn c1_mehler_identity(ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let grid = Arc::new(QuadratureGrid::default_t());
    let mut worst = 0.0f64;
    for tau in [0.25, 0.5, 1.0, 2.0, 3.0] {
        let f = SampledFunction::from_real_fn(Arc::clone(&grid), |t| {
            conical_p(tau, 1.0 + t).unwrap_or(f64::NAN)
        });
        let mf = mehler_apply(&f).value;
        let scale = 1.0 / (PI * tau).cosh();
        let r = mf
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a - b * scale).norm())
            .fold(0.0, f64::max);
        out.note(format!("tau = {tau}: max residual {r:.3e}"));
        worst = worst.max(r);
    }
    out.check(CheckRecord::at_most("max residual over tau", worst, ctx.tol.mehler_identity));
    Ok(())
}

type TestFunction = (&'static str, fn(f64) -> f64);

const MF_TEST_FUNCTIONS: [TestFunction; 5] = [
    ("exp(-t)", |t| (-t).exp()),
    ("exp(-(t-2)^2)", |t| (-(t - 2.0) * (t - 2.0)).exp()),
    ("t exp(-t)", |t| t * (-t).exp()),
    ("exp(-t/2) cos t", |t| (-t / 2.0).exp() * t.cos()),
    ("(1+t)^-3", |t| (1.0 + t).powi(-3)),
];

/// Worst isometry defect and worst diagonalization residual over the test functions.
fn mehler_fock_on(t_grid: QuadratureGrid, tau_grid: &QuadratureGrid) -> Result<(f64, f64)> {
    let t_grid = Arc::new(t_grid);
    let kernel = MehlerFockKernel::new(Arc::clone(&t_grid), tau_grid.nodes())?;
    let mut iso = 0.0f64;
    let mut diag = 0.0f64;
    for (_, f) in MF_TEST_FUNCTIONS {
        let sf = SampledFunction::from_real_fn(Arc::clone(&t_grid), f);
        let g = kernel.forward(&sf)?.value;
        iso = iso.max((tau_grid.l2_norm(&g) / sf.l2_norm() - 1.0).abs());
        let gm = kernel.forward(&mehler_apply(&sf).value)?.value;
        let scaled: Vec<Complex64> = g
            .iter()
            .zip(tau_grid.nodes())
            .map(|(v, tau)| v / (PI * tau).cosh())
            .collect();
        diag = diag.max(max_abs_diff(&gm, &scaled));
    }
    Ok((iso, diag))
}

fn c2_mehler_fock(ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let (iso_d, diag_d) = mehler_fock_on(QuadratureGrid::default_t(), &QuadratureGrid::default_tau())?;
    let (iso_r, diag_r) = mehler_fock_on(QuadratureGrid::refined_t(), &QuadratureGrid::refined_tau())?;
    out.check(CheckRecord::at_most("diagonalization residual, default grids", diag_d, ctx.tol.mehler_fock_diagonal));
    out.check(CheckRecord::at_most("diagonalization residual, refined grids", diag_r, ctx.tol.mehler_fock_diagonal));
    out.check(CheckRecord::at_most("isometry defect, default grids", iso_d, ctx.tol.isometry_default));
    out.check(CheckRecord::at_most("isometry defect, refined grids", iso_r, ctx.tol.isometry_refined));
    out.note(format!(
        "test functions: {}",
        MF_TEST_FUNCTIONS.map(|(n, _)| n).join(", ")
    ));
    Ok(())
}

/// `P_{-1/2 + i tau}(x) = (1/pi) int_0^pi (x + sqrt(x^2 - 1) cos phi)^{-1/2 + i tau} d phi`
/// by the trapezoid rule, which converges geometrically for this periodic integrand.
pub fn conical_laplace_integral(tau: f64, x: f64, points: usize) -> f64 {
    let r = (x * x - 1.0).sqrt();
    let nu = Complex64::new(-0.5, tau);
    let h = PI / points as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..=points {
        let base = Complex64::new(x + r * (k as f64 * h).cos(), 0.0);
        let w = if k == 0 || k == points { 0.5 } else { 1.0 };
        acc += base.powc(nu) * w;
    }
    acc.re * h / PI
}

fn c3_conical_asymptotics(ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let xs = log_grid(50.0, 200.0, 24);
    let taus: Vec<f64> = (0..=10).map(|k| 0.5 + 0.25 * k as f64).collect();
    let rows: Vec<(f64, f64)> = xs
        .par_iter()
        .map(|&x| {
            let mut scaled = 0.0f64;
            let mut agree = 0.0f64;
            for &tau in &taus {
                let p = conical_laplace_integral(tau, x, 1 << 15);
                let lead = (m_tau(tau)? * Complex64::new(x, 0.0).powc(Complex64::new(-0.5, tau))).re;
                scaled = scaled.max((p - lead).abs() * x.powf(2.5));
                agree = agree.max((conical_p(tau, x)? - p).abs());
            }
            Ok((scaled, agree))
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let fit = BoundFit::fit("|P - Re(m x^{-1/2 + i tau})| x^{5/2}", &ratios);
    out.note(format!(
        "fitted constant {:.4} (x in [50, 100]: {:.4}, x in [100, 200]: {:.4})",
        fit.fitted_c, fit.inner_c, fit.outer_c
    ));
    out.check(CheckRecord::flag("scaled remainder bounded by the fitted constant", !fit.violated));
    let agree = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    out.check(CheckRecord::at_most("series vs integral representation, x in [50, 200]", agree, 1e-10));

    let policy = SeriesPolicy::default();
    let mut cross = 0.0f64;
    for &tau in &taus {
        for dx in [-0.1, -0.05, 0.0, 0.05, 0.1] {
            let arg = ConicalArg::new(tau, policy.crossover_x + dx)?;
            let (a, _) = conical_legendre_repr(arg, ConicalRepresentation::NearOne, &policy)?;
            let (b, _) = conical_legendre_repr(arg, ConicalRepresentation::LargeX, &policy)?;
            cross = cross.max((a - b).abs());
        }
    }
    out.check(CheckRecord::at_most("series crossover agreement", cross, ctx.tol.series_crossover));

    let golden = ctx.golden()?;
    let mut rel = 0.0f64;
    for g in &golden.conical {
        rel = rel.max(((conical_p(g.tau, g.x)? - g.value) / g.value).abs());
    }
    for g in &golden.zeta {
        rel = rel.max(((zeta_kernel(g.lambda) - g.value) / g.value).abs());
    }
    for g in &golden.m_tau {
        let want = Complex64::new(g.re, g.im);
        rel = rel.max((m_tau(g.tau)? - want).norm() / want.norm());
    }
    out.check(CheckRecord::at_most("relative error vs golden values", rel, ctx.tol.golden_relative));
    Ok(())
}

fn symmetric(ls: &[f64]) -> Vec<f64> {
    ls.iter().flat_map(|&l| [l, -l]).collect()
}

fn c4_w_bounds(ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let taus = [0.5, 1.0, 2.0, 3.0];
    let levels = [24usize, 48, 96];
    let mut sups = Vec::new();
    for &n in &levels {
        let s = w_suprema(&taus, &symmetric(&log_grid(1.0, 1e3, n)), &symmetric(&log_grid(1e-4, 0.5, n)))?;
        out.note(format!(
            "{n} points per decade range: sup |w||lambda| = {:.6}, sup |w||lambda|^(1/2) = {:.6}",
            s.large, s.small
        ));
        sups.push(s);
    }
    let finite = sups.iter().all(|s| s.large.is_finite() && s.small.is_finite());
    out.check(CheckRecord::flag("suprema finite", finite));
    let change = |a: f64, b: f64| ((b - a) / a).abs();
    let large = sups.windows(2).map(|w| change(w[0].large, w[1].large)).fold(0.0, f64::max);
    let small = sups.windows(2).map(|w| change(w[0].small, w[1].small)).fold(0.0, f64::max);
    out.check(CheckRecord::at_most("relative change of sup |w||lambda|", large, ctx.tol.w_refinement));
    out.check(CheckRecord::at_most("relative change of sup |w||lambda|^(1/2)", small, ctx.tol.w_refinement));

    let golden = ctx.golden()?;
    let mut rel = 0.0f64;
    for g in &golden.w_tau {
        let want = Complex64::new(g.re, g.im);
        rel = rel.max((w_tau(g.tau, g.lambda)? - want).norm() / want.norm());
    }
    out.check(CheckRecord::at_most("relative error vs golden w_tau", rel, ctx.tol.golden_relative));
    Ok(())
}

fn c5_block_matrix(ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut eig_err = 0.0f64;
    let mut vec_res = 0.0f64;
    for case in 0..200 {
        let d = rng.random_range(1..=8usize);
        let mut k = CMat::from_fn(d, d, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        if case % 10 == 0 && d > 1 {
            // rank-deficient cases exercise the kernel vectors
            for r in 0..d {
                k[(r, d - 1)] = Complex64::new(0.0, 0.0);
            }
        }
        let (_, eigs) = block_hat_k(&k)?;
        let s = singular_values(&k)?;
        let mut expected: Vec<f64> = s.iter().flat_map(|&v| [v, -v]).collect();
        expected.sort_by(f64::total_cmp);
        eig_err = eig_err.max(
            eigs.iter()
                .zip(&expected)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        let basis = hat_k_eigenvectors(&k)?;
        vec_res = vec_res.max(basis.vectors.iter().map(|v| v.residual).fold(0.0, f64::max));
    }
    out.check(CheckRecord::at_most("max |eig - (+-s)| over 200 matrices", eig_err, ctx.tol.hat_k));
    out.check(CheckRecord::at_most("max eigenvector residual", vec_res, ctx.tol.hat_k));
    Ok(())
}

fn c6_sawtooth_ladder(ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let mut tops = Vec::new();
    let mut sym = 0.0f64;
    let mut dense_dev = 0.0f64;
    for &n in &SAW_LADDER {
        let e = ctx.saw_eigenvalues(n)?;
        tops.push(*e.last().expect("nonempty"));
        sym = sym.max(reflection_defect(&e));
        if n <= 1024 {
            // independent route: dense Hermitian solve of the assembled matrix
            let dense = assemble_sho_circle(&circle_jumps(&[(1.0, 0.0)])?, n)?.dense_eigenvalues()?;
            sym = sym.max(reflection_defect(&dense));
            dense_dev = dense_dev.max(
                dense.iter().zip(e.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            );
        }
    }
    out.note(format!("max eigenvalue along N = {SAW_LADDER:?}: {tops:?}"));
    out.check(CheckRecord::flag("max eigenvalue strictly increasing", tops.windows(2).all(|w| w[1] > w[0])));
    out.check(CheckRecord::at_most("largest max eigenvalue", tops.iter().copied().fold(0.0, f64::max), 0.5 - f64::EPSILON));
    let extrap = inverse_log_extrapolation(&SAW_LADDER, &tops);
    let extrap_top = inverse_log_extrapolation(&SAW_LADDER[3..], &tops[3..]);
    out.note(format!("1/ln N fit through the two largest rungs: {extrap_top:.4}"));
    out.check(CheckRecord::within("1/ln N extrapolation of the max eigenvalue", extrap, 0.49, 0.51));
    out.check(CheckRecord::at_most("+- symmetry defect (dense route for N <= 1024)", sym, ctx.tol.spectral_symmetry));
    out.check(CheckRecord::at_most("dense vs structured eigenvalues, N <= 1024", dense_dev, ctx.tol.spectral_symmetry));
    let top = ctx.saw_eigenvalues(*SAW_LADDER.last().expect("nonempty"))?;
    let empty = (0..18)
        .filter(|&i| {
            let lo = -0.45 + 0.05 * i as f64;
            !top.iter().any(|&e| e > lo && e < lo + 0.05)
        })
        .count();
    out.note(format!(
        "N = 8192: largest gap in (-0.45, 0.45) is {:.4}",
        max_gap(&top, -0.45, 0.45)
    ));
    out.check(CheckRecord::at_most("empty length-0.05 cells of (-0.45, 0.45) at N = 8192", empty as f64, 0.0));
    Ok(())
}

fn count_abs(e: &[f64], lo: f64, hi: f64) -> usize {
    e.iter().filter(|v| v.abs() > lo && v.abs() < hi).count()
}

fn c7_two_jumps(_ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let n = *SAW_LADDER.last().expect("nonempty");
    let two = assemble_sho_circle(&circle_jumps(&[(2.0, 0.0), (1.0, PI)])?, n)?.eigenvalues()?;
    // kappa = 2 alone is twice the kappa = 1 sawtooth truncation
    let single: Vec<f64> = _ctx.saw_eigenvalues(n)?.iter().map(|e| 2.0 * e).collect();
    let (inside, outside) = ((0.1, 0.5), (0.5, 1.0));
    let ci = count_abs(&two, inside.0, inside.1) as f64;
    let co = count_abs(&two, outside.0, outside.1) as f64;
    let bi = count_abs(&single, inside.0, inside.1) as f64;
    let bo = count_abs(&single, outside.0, outside.1) as f64;
    out.note(format!(
        "N = {n}: counts in 0.1 < |e| < 0.5: {ci} (kappa = 2 alone: {bi}); in 0.5 < |e| < 1: {co} (alone: {bo})"
    ));
    out.note(format!("largest eigenvalue {:.4}", two.last().copied().unwrap_or(0.0)));
    let density = (ci / (inside.1 - inside.0)) / (co / (outside.1 - outside.0)).max(f64::MIN_POSITIVE);
    out.check(CheckRecord::at_least("density ratio inside vs outside [-0.5, 0.5]", density, 1.5));
    let normalized = (ci / bi.max(1.0)) / (co / bo.max(1.0)).max(f64::MIN_POSITIVE);
    out.check(CheckRecord::at_least("same ratio relative to the kappa = 2 jump alone", normalized, 1.5));
    Ok(())
}

fn random_model(rng: &mut ChaCha8Rng) -> LatticeModel {
    let count = rng.random_range(0..=5usize);
    let mut sites: Vec<Site> = Vec::new();
    while sites.len() < count {
        let n = rng.random_range(-6..=6i64);
        if sites.iter().all(|s| s.n != n) {
            sites.push(Site {
                n,
                v: rng.random_range(-3.0..3.0),
            });
        }
    }
    LatticeModel { sites }
}

fn c8_unitarity(ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(8));
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let model = random_model(&mut rng);
        let lambda = rng.random_range(-1.95..1.95);
        worst = worst.max(smatrix(&model, lambda)?.unitarity_defect());
    }
    out.check(CheckRecord::at_most("max ||S*S - I|| over 1000 (model, lambda)", worst, ctx.tol.unitarity));
    let mut free = 0.0f64;
    for _ in 0..200 {
        let s = smatrix(&LatticeModel::free(), rng.random_range(-1.95..1.95))?;
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                free = free.max((s.s[i][j] - id).norm());
            }
        }
    }
    out.check(CheckRecord::at_most("V = 0: max |S - I|", free, ctx.tol.free_identity));
    Ok(())
}

fn c9_dtheta(ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let model = LatticeModel::single_site(2.0);
    let theta = StepFunction::unit_step(0.0);
    let scat = smatrix(&model, 0.0)?;
    let bands = band_prediction(&theta, std::slice::from_ref(&scat))?;
    let a1 = bands.max_half_width();
    out.note(format!(
        "transfer-matrix oracle: a1 = {a1:.15} (sqrt(2)/2 = {:.15})",
        0.5f64.sqrt()
    ));
    let mut maxes = Vec::new();
    let mut outside = Vec::new();
    for &n in &BOX_LADDER {
        let e = dtheta_eigenvalues(&model, &theta, n, ctx.seed)?;
        maxes.push(e.iter().map(|v| v.abs()).fold(0.0, f64::max));
        outside.push(e.iter().filter(|v| v.abs() > a1 + 0.05).count());
    }
    out.note(format!("max |eig| along N = {BOX_LADDER:?}: {maxes:?}"));
    out.note(format!(
        "1/ln N extrapolation of max |eig|: {:.4}",
        inverse_log_extrapolation(&BOX_LADDER, &maxes)
    ));
    let last = *maxes.last().expect("nonempty");
    out.check(CheckRecord::within("max |eig| at N = 4096 / a1", last / a1, 0.85, 1.0));
    out.check(CheckRecord::flag("max |eig| increasing along the ladder", maxes.windows(2).all(|w| w[1] > w[0])));
    out.check(CheckRecord::at_most(
        "eigenvalues outside [-a1 - 0.05, a1 + 0.05] (largest rung count)",
        outside.iter().copied().max().unwrap_or(0) as f64,
        5.0,
    ));
    out.check(CheckRecord::flag("outside count non-increasing", outside.windows(2).all(|w| w[1] <= w[0])));
    let widths = model_half_widths(&theta, std::slice::from_ref(&scat))?;
    let predicted = scat.sigma_distances().map(|d| 0.5 * d);
    let consistency = widths
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.check(CheckRecord::at_most("s_n(kappa (S - I)) / 2 vs a_n", consistency, ctx.tol.jump_operator));
    Ok(())
}

fn c10_dropped_band(_ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let scat = smatrix(&LatticeModel::single_site(2.0), 0.0)?;
    let theta = StepFunction::unit_step(0.0);
    let bands = band_prediction(&theta, std::slice::from_ref(&scat))?;
    let [d1, d2] = scat.sigma_distances();
    out.note(format!("sigma = {:?}, |sigma - 1| = [{d1:.3e}, {d2:.3e}]", scat.sigmas));
    out.check(CheckRecord::at_most("|sigma_2 - 1|", d2, 1e-12));
    out.check(CheckRecord::within("predicted band count", bands.entries.len() as f64, 1.0, 1.0));
    out.check(CheckRecord::within(
        "multiplicity of the band",
        bands.entries.first().map(|b| b.multiplicity as f64).unwrap_or(0.0),
        1.0,
        1.0,
    ));
    Ok(())
}

fn c11_compactness(_ctx: &SuiteContext, out: &mut Outcome) -> Result<()> {
    let betas = [1.1, 1.4];
    let good = one_jump_symbol(1.0, 0.0, Remainder::Holder)?;
    for v in compactness_ladder(&good, 1.0, 0.0, &betas, &COMPACTNESS_LADDER)? {
        out.note(format!(
            "beta = {}: tracked values {:?}; HS norms {:?}",
            v.beta,
            v.series.iter().map(|(f, s)| (*f, s.clone())).collect::<Vec<_>>(),
            v.hs_norms
        ));
        out.check(CheckRecord::flag(
            format!("beta = {}: tracked weighted singular values decrease", v.beta),
            v.decreasing_everywhere,
        ));
        out.check(CheckRecord::flag(format!("beta = {}: no non-decay flag", v.beta), !v.non_decay));
    }
    let bad = one_jump_symbol(1.0, 0.0, Remainder::LogHolder { exponent: 0.5 })?;
    let control = compactness_ladder(&bad, 1.0, 0.0, &[1.4], &[64, 128, 256, 512])?;
    out.check(CheckRecord::flag(
        "control (log-Holder exponent 0.5, beta = 1.4) flagged as non-decaying",
        control.iter().all(|v| v.non_decay),
    ));
    Ok(())
}

/// Runs one numbered criterion.
pub fn run_criterion(id: u8, ctx: &SuiteContext) -> CriterionReport {
    let (_, family, title) = *CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .expect("known criterion");
    let budget = match id {
        1 => 30.0,
        2 => 60.0,
        4 => 120.0,
        5 | 8 => 5.0,
        6 | 9 => 600.0,
        11 => 300.0,
        _ => f64::INFINITY,
    };
    let start = Instant::now();
    let mut out = Outcome::new();
    let result = match id {
        1 => c1_mehler_identity(ctx, &mut out),
        2 => c2_mehler_fock(ctx, &mut out),
        3 => c3_conical_asymptotics(ctx, &mut out),
        4 => c4_w_bounds(ctx, &mut out),
        5 => c5_block_matrix(ctx, &mut out),
        6 => c6_sawtooth_ladder(ctx, &mut out),
        7 => c7_two_jumps(ctx, &mut out),
        8 => c8_unitarity(ctx, &mut out),
        9 => c9_dtheta(ctx, &mut out),
        10 => c10_dropped_band(ctx, &mut out),
        11 => c11_compactness(ctx, &mut out),
        _ => unreachable!(),
    };
    let wall = start.elapsed().as_secs_f64();
    if budget.is_finite() {
        out.check(CheckRecord::at_most("runtime seconds", wall, budget));
    }
    CriterionReport {
        id,
        family,
        title: title.to_string(),
        checks: out.checks,
        notes: out.notes,
        wall_seconds: wall,
        error: result.err().map(|e| e.to_string()),
    }
}

/// Runs the selected criteria with `opts.jobs` workers, calling `on_done` as
/// each finishes; reports come back in criterion order.
pub fn reproduce_all(opts: &SuiteOptions, on_done: impl Fn(&CriterionReport) + Sync) -> Result<SuiteReport> {
    let ctx = SuiteContext::new(opts);
    let ids: Vec<u8> = CRITERIA
        .iter()
        .filter(|c| opts.only.is_empty() || opts.only.contains(&c.1))
        .map(|c| c.0)
        .collect();
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let criteria: Vec<CriterionReport> = pool.install(|| {
        ids.par_iter()
            .map(|&id| {
                let r = run_criterion(id, &ctx);
                on_done(&r);
                r
            })
            .collect()
    });
    let passed = criteria.iter().all(CriterionReport::passed);
    Ok(SuiteReport {
        criteria,
        wall_seconds: start.elapsed().as_secs_f64(),
        passed,
    })
}

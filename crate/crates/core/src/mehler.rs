//! The Mehler operator `(M f)(t) = (1/pi) int_0^inf f(s) / (2 + t + s) ds`,
//! the Mehler-Fock transform
//! `(Psi f)(tau) = sqrt(tau tanh(pi tau)) int_0^inf P_{-1/2 + i tau}(t + 1) f(t) dt`
//! and the kernels `w_tau(lambda)` of the explicit diagonalization.
//!
//! Integrals over the half-line are discretized on a [`QuadratureGrid`]. The
//! default `t` grid uses the substitution `t = sinh^2(u)` with composite
//! Gauss-Legendre panels in `u`, which resolves both `t -> 0` and the slow
//! `t^{-1/2}` decay of the conical functions.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, RMat};
use crate::quadrature::{filon_panel, GaussLegendreRule};
use crate::specfun::{
    conical_legendre, large_x_coefficients, m_tau, upper_incomplete_gamma, zeta_hat, ConicalArg,
    SeriesPolicy,
};

/// Relative size of `|f|` at the last node above which a tail warning is raised.
pub const TAIL_WARNING_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    TransformedGauss,
    TruncatedTrapezoid,
}

/// Nodes and positive weights for integrals over a half-line.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: GridKind,
}

impl QuadratureGrid {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, kind: GridKind) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} nodes vs {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidGrid("nodes must be finite and >= 0".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidGrid("weights must be positive".into()));
        }
        Ok(Self {
            nodes,
            weights,
            kind,
        })
    }

    /// `t = sinh^2(u)`, `u` in `[0, u_max]` split into `panels` Gauss panels of `order` nodes.
    pub fn sinh_squared(u_max: f64, panels: usize, order: usize) -> Result<Self> {
        if !(u_max > 0.0) || panels == 0 || order == 0 {
            return Err(Error::InvalidGrid("sinh^2 grid needs u_max > 0 and panels".into()));
        }
        let rule = GaussLegendreRule::new(order);
        let width = u_max / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = p as f64 * width;
            for (u, w) in rule.mapped(a, a + width) {
                nodes.push(u.sinh().powi(2));
                weights.push(w * (2.0 * u).sinh());
            }
        }
        Self::new(nodes, weights, GridKind::TransformedGauss)
    }

    /// Default `t` grid: `u_max = 20` (`t_max ~ 6e16`), 40 panels of 16 nodes.
    pub fn default_t() -> Self {
        Self::sinh_squared(20.0, 40, 16).expect("valid default grid")
    }

    /// Refined `t` grid with twice as many nodes per unit of `u`.
    pub fn refined_t() -> Self {
        Self::sinh_squared(22.0, 88, 16).expect("valid refined grid")
    }

    /// Composite Gauss-Legendre grid on `[a, b]`.
    pub fn gauss_interval(a: f64, b: f64, panels: usize, order: usize) -> Result<Self> {
        if !(b > a) || a < 0.0 || panels == 0 || order == 0 {
            return Err(Error::InvalidGrid(format!("bad interval [{a}, {b}]")));
        }
        let rule = GaussLegendreRule::new(order);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in 0..panels {
            let lo = a + p as f64 * width;
            for (x, w) in rule.mapped(lo, lo + width) {
                nodes.push(x);
                weights.push(w);
            }
        }
        Self::new(nodes, weights, GridKind::TransformedGauss)
    }

    /// Uniform trapezoid grid with `n` nodes on `[a, b]`.
    pub fn trapezoid(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || a < 0.0 || n < 2 {
            return Err(Error::InvalidGrid(format!("bad trapezoid [{a}, {b}] n={n}")));
        }
        let h = (b - a) / (n - 1) as f64;
        let nodes = (0..n).map(|k| a + h * k as f64).collect();
        let weights = (0..n)
            .map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h })
            .collect();
        Self::new(nodes, weights, GridKind::TruncatedTrapezoid)
    }

    /// Default spectral grid: Gauss-Legendre on `[0, 16]`.
    pub fn default_tau() -> Self {
        Self::gauss_interval(0.0, 16.0, 32, 16).expect("valid tau grid")
    }

    /// Refined spectral grid: Gauss-Legendre on `[0, 20]` with finer panels.
    pub fn refined_tau() -> Self {
        Self::gauss_interval(0.0, 20.0, 80, 16).expect("valid tau grid")
    }

    /// Uniform trapezoid grid on `[0.05, 6]`.
    pub fn uniform_tau(n: usize) -> Result<Self> {
        Self::trapezoid(0.05, 6.0, n)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(sum w |f|^2)^{1/2}`.
    pub fn l2_norm(&self, values: &[Complex64]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// A function sampled on the nodes of a grid.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    grid: Arc<QuadratureGrid>,
    values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values on a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<QuadratureGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: Arc<QuadratureGrid>, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |t| Complex64::new(f(t), 0.0))
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid.l2_norm(&self.values)
    }

    /// `|f(last node)| / max |f|`, or 0 for the zero function.
    pub fn tail_ratio(&self) -> f64 {
        let max = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            0.0
        } else {
            self.values.last().map(|v| v.norm()).unwrap_or(0.0) / max
        }
    }
}

/// Result of a transform together with non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct Checked<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

fn tail_warnings(f: &SampledFunction) -> Vec<String> {
    let ratio = f.tail_ratio();
    if ratio > TAIL_WARNING_RATIO {
        vec![format!(
            "tail truncation: |f(t_max)| / max|f| = {ratio:.3e} exceeds {TAIL_WARNING_RATIO:e}"
        )]
    } else {
        Vec::new()
    }
}

/// `(M f)(t_i) = (1/pi) sum_j w_j f(s_j) / (2 + t_i + s_j)` at the grid nodes.
pub fn mehler_apply(f: &SampledFunction) -> Checked<SampledFunction> {
    let grid = f.grid();
    let nodes = grid.nodes();
    let weights = grid.weights();
    let values: Vec<Complex64> = nodes
        .par_iter()
        .map(|&t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((s, w), v) in nodes.iter().zip(weights).zip(f.values()) {
                acc += v * (w / (2.0 + t + s));
            }
            acc / PI
        })
        .collect();
    Checked {
        warnings: tail_warnings(f),
        value: SampledFunction {
            grid: Arc::clone(grid),
            values,
        },
    }
}

/// Symmetrized Nystrom matrix `sqrt(w_i) K(t_i, t_j) sqrt(w_j)` of the Mehler operator.
pub fn mehler_matrix(grid: &QuadratureGrid) -> RMat {
    let n = grid.len();
    let t = grid.nodes();
    let w = grid.weights();
    RMat::from_fn(n, n, |i, j| {
        (w[i] * w[j]).sqrt() / (PI * (2.0 + t[i] + t[j]))
    })
}

/// The same matrix assembled from the Hankel kernel `(2 pi)^{-1/2} * 2i * zeta_hat(t + s)`.
pub fn hankel_kernel_matrix(grid: &QuadratureGrid) -> RMat {
    let n = grid.len();
    let t = grid.nodes();
    let w = grid.weights();
    let factor = Complex64::new(0.0, 2.0) / (2.0 * PI).sqrt();
    RMat::from_fn(n, n, |i, j| {
        let k = factor * zeta_hat(t[i] + t[j]);
        (w[i] * w[j]).sqrt() * k.re
    })
}

/// Eigenvalues of the symmetrized Mehler matrix, ascending.
pub fn mehler_spectrum(grid: &QuadratureGrid) -> Result<Vec<f64>> {
    sym_eigenvalues(&mehler_matrix(grid))
}

/// Table of `P_{-1/2 + i tau_k}(t_j + 1)` times `sqrt(tau_k tanh(pi tau_k))`.
#[derive(Debug, Clone)]
pub struct MehlerFockKernel {
    t_grid: Arc<QuadratureGrid>,
    taus: Vec<f64>,
    /// row-major: `kernel[k * n_t + j]`
    kernel: Vec<f64>,
}

impl MehlerFockKernel {
    pub fn new(t_grid: Arc<QuadratureGrid>, taus: &[f64]) -> Result<Self> {
        if taus.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Domain {
                what: "mehler_fock tau",
                value: taus.iter().copied().fold(f64::INFINITY, f64::min),
                expected: "tau > 0",
            });
        }
        let policy = SeriesPolicy::default();
        let nodes = t_grid.nodes().to_vec();
        let rows: Result<Vec<Vec<f64>>> = taus
            .par_iter()
            .map(|&tau| {
                let norm = (tau * (PI * tau).tanh()).sqrt();
                nodes
                    .iter()
                    .map(|&t| {
                        conical_legendre(ConicalArg::new(tau, t + 1.0)?, &policy).map(|p| norm * p)
                    })
                    .collect()
            })
            .collect();
        let kernel = rows?.into_iter().flatten().collect();
        Ok(Self {
            t_grid,
            taus: taus.to_vec(),
            kernel,
        })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn t_grid(&self) -> &Arc<QuadratureGrid> {
        &self.t_grid
    }

    fn row(&self, k: usize) -> &[f64] {
        let n = self.t_grid.len();
        &self.kernel[k * n..(k + 1) * n]
    }

    /// `(Psi f)(tau_k)`.
    pub fn forward(&self, f: &SampledFunction) -> Result<Checked<Vec<Complex64>>> {
        if !Arc::ptr_eq(f.grid(), &self.t_grid) && **f.grid() != *self.t_grid {
            return Err(Error::InvalidGrid("function sampled on a different t grid".into()));
        }
        let w = self.t_grid.weights();
        let value = (0..self.taus.len())
            .map(|k| {
                self.row(k)
                    .iter()
                    .zip(w)
                    .zip(f.values())
                    .map(|((p, w), v)| v * (p * w))
                    .sum()
            })
            .collect();
        Ok(Checked {
            value,
            warnings: tail_warnings(f),
        })
    }

    /// Adjoint transform `f(t_j) = sum_k v_k sqrt(tau_k tanh(pi tau_k)) P(t_j + 1) g(tau_k)`
    /// where `v_k` are the weights of `tau_grid` (whose nodes must equal `taus`).
    pub fn inverse(&self, g: &[Complex64], tau_grid: &QuadratureGrid) -> Result<SampledFunction> {
        if tau_grid.nodes() != self.taus.as_slice() || g.len() != self.taus.len() {
            return Err(Error::InvalidGrid("tau grid does not match the kernel".into()));
        }
        let n = self.t_grid.len();
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        for (k, (gk, vk)) in g.iter().zip(tau_grid.weights()).enumerate() {
            let c = gk * *vk;
            for (slot, p) in values.iter_mut().zip(self.row(k)) {
                *slot += c * p;
            }
        }
        SampledFunction::new(Arc::clone(&self.t_grid), values)
    }
}

/// `(Psi f)(tau)` for each `tau` in `taus`.
pub fn mehler_fock_forward(f: &SampledFunction, taus: &[f64]) -> Result<Checked<Vec<Complex64>>> {
    MehlerFockKernel::new(Arc::clone(f.grid()), taus)?.forward(f)
}

/// Adjoint (= inverse) transform of `g` sampled on `tau_grid`, evaluated at `ts`.
pub fn mehler_fock_inverse(
    g: &[Complex64],
    tau_grid: &QuadratureGrid,
    ts: &[f64],
) -> Result<Vec<Complex64>> {
    if g.len() != tau_grid.len() {
        return Err(Error::InvalidGrid("g does not match the tau grid".into()));
    }
    let policy = SeriesPolicy::default();
    ts.par_iter()
        .map(|&t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((tau, v), gk) in tau_grid.nodes().iter().zip(tau_grid.weights()).zip(g) {
                if *tau <= 0.0 {
                    continue;
                }
                let p = conical_legendre(ConicalArg::new(*tau, t + 1.0)?, &policy)?;
                acc += gk * (v * (tau * (PI * tau).tanh()).sqrt() * p);
            }
            Ok(acc)
        })
        .collect()
}

/// Parameters of the oscillatory integral defining `w_tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WConfig {
    /// Split point `T`: quadrature on `[0, T]`, asymptotic series beyond.
    pub split: f64,
    /// Gauss nodes per Filon panel.
    pub order: usize,
    /// Ratio of consecutive panel lengths on `[1, T]`.
    pub growth: f64,
    /// Terms of the large-`x` series used on the tail.
    pub tail_terms: usize,
    /// Allowed mismatch between the tail series and the conical function at `T`.
    pub match_tol: f64,
}

impl Default for WConfig {
    fn default() -> Self {
        Self {
            split: 200.0,
            order: 24,
            growth: 1.5,
            tail_terms: 6,
            match_tol: 1e-11,
        }
    }
}

/// `w_tau(lambda) = (2 pi)^{-1/2} int_0^inf P_{-1/2 + i tau}(t + 1) e^{-i lambda t} dt`
/// for a fixed `tau`, with the conical function tabulated on the Filon panels.
#[derive(Debug, Clone)]
pub struct WKernel {
    tau: f64,
    config: WConfig,
    rule: GaussLegendreRule,
    panels: Vec<(f64, f64, Vec<Complex64>)>,
    /// `m(tau) p_n(tau)`
    tail_coef: Vec<Complex64>,
}

impl WKernel {
    pub fn new(tau: f64, config: WConfig) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Domain {
                what: "w_tau tau",
                value: tau,
                expected: "tau > 0",
            });
        }
        let policy = SeriesPolicy::default();
        let rule = GaussLegendreRule::new(config.order);
        let mut edges = vec![0.0, 0.5, 1.0];
        while *edges.last().unwrap() < config.split {
            let next = (edges.last().unwrap() * config.growth).min(config.split);
            edges.push(next);
        }
        let mut panels = Vec::with_capacity(edges.len());
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let values: Result<Vec<Complex64>> = rule
                .mapped(a, b)
                .map(|(t, _)| {
                    conical_legendre(ConicalArg::new(tau, t + 1.0)?, &policy)
                        .map(|p| Complex64::new(p, 0.0))
                })
                .collect();
            panels.push((a, b, values?));
        }
        let m = m_tau(tau)?;
        let tail_coef: Vec<Complex64> = large_x_coefficients(tau, config.tail_terms)
            .into_iter()
            .map(|p| m * p)
            .collect();

        // the truncated tail series must reproduce P at the split point
        let x = config.split + 1.0;
        let a = Complex64::new(-0.5, tau);
        let series: f64 = tail_coef
            .iter()
            .enumerate()
            .map(|(n, c)| c * ((a - 2.0 * n as f64) * x.ln()).exp())
            .sum::<Complex64>()
            .re;
        let direct = conical_legendre(ConicalArg::new(tau, x)?, &policy)?;
        if (series - direct).abs() > config.match_tol {
            return Err(Error::TailMismatch {
                t: config.split,
                quadrature: direct,
                asymptotic: series,
            });
        }
        Ok(Self {
            tau,
            config,
            rule,
            panels,
            tail_coef,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `int_X^inf x^b e^{-i lambda x} dx` for `lambda > 0`.
    fn tail_power_integral(b: Complex64, x: f64, lambda: f64) -> Result<Complex64> {
        let s = b + 1.0;
        let z = Complex64::new(0.0, lambda * x);
        let ln_il = Complex64::new(lambda.ln(), 0.5 * PI);
        Ok((-s * ln_il).exp() * upper_incomplete_gamma(s, z)?)
    }

    pub fn eval(&self, lambda: f64) -> Result<Complex64> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::Domain {
                what: "w_tau lambda",
                value: lambda,
                expected: "lambda != 0",
            });
        }
        if lambda < 0.0 {
            return self.eval(-lambda).map(|v| v.conj());
        }
        let mut body = Complex64::new(0.0, 0.0);
        for (a, b, values) in &self.panels {
            body += filon_panel(&self.rule, *a, *b, values, lambda);
        }
        // tail: int_T^inf P(t+1) e^{-i l t} dt = e^{i l} int_X^inf P(x) e^{-i l x} dx
        let x = self.config.split + 1.0;
        let a = Complex64::new(-0.5, self.tau);
        let mut tail = Complex64::new(0.0, 0.0);
        for (n, c) in self.tail_coef.iter().enumerate() {
            let shift = 2.0 * n as f64;
            let up = Self::tail_power_integral(a - shift, x, lambda)?;
            let down = Self::tail_power_integral(a.conj() - shift, x, lambda)?;
            tail += 0.5 * (c * up + c.conj() * down);
        }
        tail *= Complex64::new(0.0, lambda).exp();
        Ok((body + tail) / (2.0 * PI).sqrt())
    }
}

/// `w_tau(lambda)` with the default configuration.
pub fn w_tau(tau: f64, lambda: f64) -> Result<Complex64> {
    WKernel::new(tau, WConfig::default())?.eval(lambda)
}

/// Outcome of an empirical bound check `|g(tau, lambda)| <= C rate(lambda)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundFit {
    pub regime: String,
    /// Largest ratio `|g| / rate` over the whole grid.
    pub fitted_c: f64,
    /// Largest ratio over the half of the grid nearer the limit (`|lambda| -> inf` or `-> 0`).
    pub outer_c: f64,
    /// Largest ratio over the other half.
    pub inner_c: f64,
    /// Set when the ratio grows toward the limit by more than 50%.
    pub violated: bool,
}

impl BoundFit {
    /// `lambdas` ordered so that the last entries are nearest the limit.
    pub fn fit(regime: &str, ratios_by_lambda: &[f64]) -> Self {
        let n = ratios_by_lambda.len();
        let half = n / 2;
        let max = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
        let inner_c = max(&ratios_by_lambda[..half]);
        let outer_c = max(&ratios_by_lambda[half..]);
        let fitted_c = inner_c.max(outer_c);
        let violated = !fitted_c.is_finite() || outer_c > 1.5 * inner_c.max(f64::MIN_POSITIVE) && outer_c > 0.0;
        Self {
            regime: regime.to_string(),
            fitted_c,
            outer_c,
            inner_c,
            violated,
        }
    }
}

/// Fitted constants for the derivative bounds on `partial w / partial tau`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeBoundReport {
    pub tau_step: f64,
    /// `|d w / d tau| |lambda|` for `|lambda| >= 1/2`.
    pub large_lambda: Option<BoundFit>,
    /// `|d w / d tau| |lambda|^{1/2} / |ln |lambda||` for `|lambda| <= 1/2`.
    pub small_lambda: Option<BoundFit>,
}

impl DerivativeBoundReport {
    pub fn any_violation(&self) -> bool {
        self.large_lambda.as_ref().is_some_and(|b| b.violated)
            || self.small_lambda.as_ref().is_some_and(|b| b.violated)
    }
}

/// Checks the derivative bounds for an arbitrary kernel `w(tau, lambda)` by
/// forward differences with step `tau_step`.
pub fn check_derivative_bounds_with(
    w: impl Fn(f64, f64) -> Result<Complex64> + Sync,
    taus: &[f64],
    lambdas: &[f64],
    tau_step: f64,
) -> Result<DerivativeBoundReport> {
    let mut large: Vec<f64> = lambdas.iter().copied().filter(|l| l.abs() >= 0.5).collect();
    let mut small: Vec<f64> = lambdas
        .iter()
        .copied()
        .filter(|l| l.abs() < 0.5 && *l != 0.0)
        .collect();
    // order toward the limit: increasing |lambda| for the large regime, decreasing for small
    large.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    small.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let ratios = |ls: &[f64], rate: &(dyn Fn(f64) -> f64 + Sync)| -> Result<Vec<f64>> {
        ls.par_iter()
            .map(|&l| {
                let mut worst = 0.0f64;
                for &tau in taus {
                    let d = (w(tau + tau_step, l)? - w(tau, l)?) / tau_step;
                    worst = worst.max(d.norm() / rate(l));
                }
                Ok(worst)
            })
            .collect()
    };
    let large_lambda = if large.is_empty() {
        None
    } else {
        let r = ratios(&large, &|l: f64| 1.0 / l.abs())?;
        Some(BoundFit::fit("|dw/dtau| <= C/|lambda|, |lambda| >= 1/2", &r))
    };
    let small_lambda = if small.is_empty() {
        None
    } else {
        let r = ratios(&small, &|l: f64| l.abs().powf(-0.5) * l.abs().ln().abs())?;
        Some(BoundFit::fit(
            "|dw/dtau| <= C |lambda|^{-1/2} |ln|lambda||, |lambda| <= 1/2",
            &r,
        ))
    };
    Ok(DerivativeBoundReport {
        tau_step,
        large_lambda,
        small_lambda,
    })
}

/// Derivative bound check on the actual kernels `w_tau`.
pub fn check_w_derivative_bounds(
    taus: &[f64],
    lambdas: &[f64],
    tau_step: f64,
) -> Result<DerivativeBoundReport> {
    let mut all_taus: Vec<f64> = taus.iter().flat_map(|&t| [t, t + tau_step]).collect();
    all_taus.sort_by(f64::total_cmp);
    all_taus.dedup();
    let kernels: Vec<WKernel> = all_taus
        .par_iter()
        .map(|&t| WKernel::new(t, WConfig::default()))
        .collect::<Result<_>>()?;
    let lookup = |tau: f64| {
        kernels
            .iter()
            .find(|k| (k.tau() - tau).abs() < 1e-15 * tau.max(1.0))
            .expect("tau tabulated")
    };
    check_derivative_bounds_with(|tau, l| lookup(tau).eval(l), taus, lambdas, tau_step)
}

/// Suprema of `|w_tau(lambda)| |lambda|` (`|lambda| >= 1`) and
/// `|w_tau(lambda)| |lambda|^{1/2}` (`|lambda| <= 1/2`) over the given grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WSuprema {
    pub large: f64,
    pub small: f64,
}

pub fn w_suprema(taus: &[f64], large: &[f64], small: &[f64]) -> Result<WSuprema> {
    let kernels: Vec<WKernel> = taus
        .par_iter()
        .map(|&t| WKernel::new(t, WConfig::default()))
        .collect::<Result<_>>()?;
    let sup = |ls: &[f64], weight: &(dyn Fn(f64) -> f64 + Sync)| -> Result<f64> {
        let vals: Vec<f64> = ls
            .par_iter()
            .map(|&l| {
                kernels
                    .iter()
                    .map(|k| k.eval(l).map(|w| w.norm() * weight(l)))
                    .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
            })
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    };
    Ok(WSuprema {
        large: sup(large, &|l: f64| l.abs())?,
        small: sup(small, &|l: f64| l.abs().sqrt())?,
    })
}

/// `n` points log-spaced on `[a, b]`, `0 < a < b`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conical_sampled(grid: &Arc<QuadratureGrid>, tau: f64) -> SampledFunction {
        SampledFunction::from_real_fn(Arc::clone(grid), |s| {
            crate::specfun::conical_p(tau, 1.0 + s).unwrap()
        })
    }

    #[test]
    fn grid_validation() {
        assert!(QuadratureGrid::new(vec![0.0, 1.0], vec![1.0], GridKind::TruncatedTrapezoid).is_err());
        assert!(QuadratureGrid::new(vec![1.0, 0.5], vec![1.0, 1.0], GridKind::TruncatedTrapezoid).is_err());
        assert!(QuadratureGrid::new(vec![0.0, 1.0], vec![1.0, 0.0], GridKind::TruncatedTrapezoid).is_err());
        let g = QuadratureGrid::default_t();
        assert_eq!(g.kind(), GridKind::TransformedGauss);
        // int_0^inf e^{-t} dt
        let s: f64 = g.nodes().iter().zip(g.weights()).map(|(t, w)| w * (-t).exp()).sum();
        assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mehler_of_zero_is_zero() {
        let grid = Arc::new(QuadratureGrid::default_t());
        let f = SampledFunction::from_real_fn(Arc::clone(&grid), |_| 0.0);
        let out = mehler_apply(&f);
        assert!(out.value.values().iter().all(|v| v.norm() == 0.0));
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn mehler_of_exponential_matches_closed_form() {
        // (1/pi) int_0^inf e^{-s} / (2 + t + s) ds = e^{2+t} E_1(2 + t) / pi
        let grid = Arc::new(QuadratureGrid::default_t());
        let f = SampledFunction::from_real_fn(Arc::clone(&grid), |s| (-s).exp());
        let mf = mehler_apply(&f).value;
        for (t, expected) in [(0.0, 0.115_014_470_916_637), (1.0, 0.083_423_845_531_292_6)] {
            let direct: f64 = grid
                .nodes()
                .iter()
                .zip(grid.weights())
                .map(|(s, w)| w * (-s).exp() / (2.0 + t + s))
                .sum::<f64>()
                / PI;
            assert!((direct - expected).abs() < 1e-13, "t={t}: {direct} vs {expected}");
        }
        assert!(mf.values().iter().all(|v| v.re > 0.0 && v.im == 0.0));
    }

    #[test]
    fn mehler_identity_on_conical_functions() {
        let grid = Arc::new(QuadratureGrid::default_t());
        for tau in [0.5, 1.0, 2.0] {
            let f = conical_sampled(&grid, tau);
            let mf = mehler_apply(&f).value;
            let scale = 1.0 / (PI * tau).cosh();
            let worst = mf
                .values()
                .iter()
                .zip(f.values())
                .map(|(a, b)| (a - b * scale).norm())
                .fold(0.0, f64::max);
            assert!(worst < 1e-6, "tau={tau}: {worst:e}");
        }
    }

    #[test]
    fn mehler_matrix_equals_hankel_kernel_form() {
        let grid = QuadratureGrid::sinh_squared(6.0, 6, 8).unwrap();
        let a = mehler_matrix(&grid);
        let b = hankel_kernel_matrix(&grid);
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                assert!((a[(i, j)] - b[(i, j)]).abs() < 1e-15 * a[(i, j)].abs().max(1e-300));
            }
        }
    }

    #[test]
    fn w_tau_matches_contour_oracle() {
        // mpmath: -i (2 pi)^{-1/2} int_0^inf P(1 - i s) e^{-lambda s} ds
        let cases = [
            (1.0, 2.0, 0.052_760_361_169_158_42, -0.180_715_097_239_906_76),
            (1.0, 0.01, -3.605_541_943_029_478, 2.033_715_772_376_624),
            (0.5, 10.0, 0.000_990_804_347_592_479_9, -0.039_832_898_514_934_84),
            (3.0, 0.5, -0.317_560_574_782_913_7, -0.062_935_413_365_028_13),
            (2.0, 100.0, 8.475_261_691_515_937e-5, -0.003_988_098_650_303_812),
        ];
        for (tau, lambda, re, im) in cases {
            let w = w_tau(tau, lambda).unwrap();
            let err = (w - Complex64::new(re, im)).norm();
            assert!(err < 1e-9 * (re * re + im * im).sqrt().max(1e-3), "tau={tau} l={lambda}: {w} err {err:e}");
        }
    }

    #[test]
    fn w_tau_conjugation_symmetry() {
        let k = WKernel::new(1.3, WConfig::default()).unwrap();
        for l in [0.3, 2.0, 17.0] {
            assert_eq!(k.eval(-l).unwrap(), k.eval(l).unwrap().conj());
        }
        assert!(k.eval(0.0).is_err());
    }

    #[test]
    fn tail_mismatch_detected() {
        let cfg = WConfig {
            split: 3.0,
            tail_terms: 1,
            ..WConfig::default()
        };
        assert!(matches!(WKernel::new(1.0, cfg), Err(Error::TailMismatch { .. })));
    }

    #[test]
    fn derivative_harness_on_zero_kernel() {
        let rep = check_derivative_bounds_with(
            |_, _| Ok(Complex64::new(0.0, 0.0)),
            &[1.0],
            &[1e-3, 0.1, 2.0, 10.0],
            1e-3,
        )
        .unwrap();
        assert!(!rep.any_violation());
        assert_eq!(rep.large_lambda.unwrap().fitted_c, 0.0);
    }

    #[test]
    fn derivative_harness_flags_growth() {
        // |g| = |lambda|^0 violates the C/|lambda| rate
        let rep = check_derivative_bounds_with(
            |tau, _| Ok(Complex64::new(tau, 0.0)),
            &[1.0],
            &[1.0, 2.0, 10.0, 100.0],
            1e-3,
        )
        .unwrap();
        assert!(rep.large_lambda.unwrap().violated);
    }
}

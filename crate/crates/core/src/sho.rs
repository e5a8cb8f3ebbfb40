//! Symmetrised Hankel operators `M = P_- Psi P_+ + P_+ Psi^* P_-` on the circle,
//! their finite sections in the Fourier basis, band prediction from the jumps
//! of the symbol, and diagnostics (weighted singular values, spectral
//! localization under the evolution).
//!
//! Circle symbols are functions of the angle `phi` of `mu = e^{i phi}`. Line
//! symbols are functions of `lambda` and are analyzed after the Cayley map
//! `lambda = -cot(phi / 2)`, which sends `lambda = 0` to `mu = -1` and
//! `lambda = +-inf` to `mu = 1`.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, herm_eigenvalues, svd, sym_eigenvalues, CMat, RMat};
use crate::specfun::zeta_kernel;

/// Eigenvalues with modulus below this are treated as the numerical kernel.
pub const AC_EPSILON: f64 = crate::AC_THRESHOLD;

/// Singular values below this are treated as zero when predicting bands.
pub const ZERO_SINGULAR_VALUE: f64 = 1e-12;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Line,
    Circle,
}

/// How the jump part of a symbol is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JumpProfile {
    /// `zeta(lambda - lambda_l) K_l` on the line.
    Zeta,
    /// `saw(phi - phi_l) K_l` on the circle.
    Sawtooth,
    /// `zeta(lambda(phi) - lambda_l) K_l` on the circle.
    TransportedZeta,
}

/// A jump `K` at `location` (`lambda` on the line, angle `phi` in `[0, 2 pi)` on the circle).
#[derive(Debug, Clone)]
pub struct SymbolJump {
    pub location: f64,
    pub k: CMat,
}

/// Continuous part of a symbol as a map to `dim x dim` matrices.
pub type ContinuousPart = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// A scalar or matrix symbol, continuous apart from finitely many jumps.
#[derive(Clone)]
pub struct PiecewiseSymbol {
    domain: Domain,
    dim: usize,
    jumps: Vec<SymbolJump>,
    profile: JumpProfile,
    /// Line locations of the jumps of a transported symbol.
    line_locations: Vec<f64>,
    continuous: Option<ContinuousPart>,
    /// `(limit at -inf, limit at +inf)`, line symbols only.
    limits: Option<(CMat, CMat)>,
    label: String,
}

impl std::fmt::Debug for PiecewiseSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PiecewiseSymbol")
            .field("domain", &self.domain)
            .field("dim", &self.dim)
            .field("jumps", &self.jumps)
            .field("label", &self.label)
            .finish()
    }
}

/// `(pi - phi mod 2 pi) / (2 pi)`, with value 0 at the jump; jump `+1` at `phi = 0`.
pub fn sawtooth(phi: f64) -> f64 {
    let p = phi.rem_euclid(2.0 * PI);
    if p == 0.0 {
        0.0
    } else {
        (PI - p) / (2.0 * PI)
    }
}

/// Cayley angle of a point on the line: `lambda = -cot(phi / 2)`, `phi in (0, 2 pi)`.
pub fn cayley_angle(lambda: f64) -> f64 {
    2.0 * 1f64.atan2(-lambda)
}

/// Inverse of [`cayley_angle`]; `phi = 0` maps to infinity.
pub fn cayley_line_point(phi: f64) -> f64 {
    -1.0 / (0.5 * phi.rem_euclid(2.0 * PI)).tan()
}

fn check_square(k: &CMat, dim: usize) -> Result<()> {
    if k.nrows() != dim || k.ncols() != dim {
        return Err(Error::InvalidSymbol(format!(
            "jump matrix is {}x{}, expected {dim}x{dim}",
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(())
}

fn is_zero(k: &CMat) -> bool {
    k.col_iter().all(|c| c.iter().all(|z| *z == C0))
}

fn scalar(v: Complex64) -> CMat {
    CMat::from_fn(1, 1, |_, _| v)
}

/// `1 x 1` matrix holding a real number.
pub fn scalar_matrix(v: f64) -> CMat {
    scalar(Complex64::new(v, 0.0))
}

fn validate_jumps(jumps: &[SymbolJump], dim: usize, circle: bool) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidSymbol("dimension must be positive".into()));
    }
    for (i, j) in jumps.iter().enumerate() {
        check_square(&j.k, dim)?;
        if is_zero(&j.k) {
            return Err(Error::InvalidSymbol(format!("jump {i} has K = 0")));
        }
        if !j.location.is_finite() || (circle && !(0.0..2.0 * PI).contains(&j.location)) {
            return Err(Error::InvalidSymbol(format!(
                "jump {i} location {} out of range",
                j.location
            )));
        }
        for other in &jumps[..i] {
            if other.location == j.location {
                return Err(Error::InvalidSymbol(format!(
                    "duplicate jump location {}",
                    j.location
                )));
            }
        }
    }
    Ok(())
}

impl PiecewiseSymbol {
    /// Circle symbol `continuous(phi) + sum_l saw(phi - phi_l) K_l`.
    pub fn circle_sawtooth(
        dim: usize,
        jumps: Vec<SymbolJump>,
        continuous: Option<ContinuousPart>,
        label: impl Into<String>,
    ) -> Result<Self> {
        validate_jumps(&jumps, dim, true)?;
        Ok(Self {
            domain: Domain::Circle,
            dim,
            jumps,
            profile: JumpProfile::Sawtooth,
            line_locations: Vec::new(),
            continuous,
            limits: None,
            label: label.into(),
        })
    }

    /// Line symbol `continuous(lambda) + sum_l zeta(lambda - lambda_l) K_l` with the given
    /// limits of the continuous part at `-inf` and `+inf`.
    pub fn line(
        dim: usize,
        jumps: Vec<SymbolJump>,
        continuous: Option<ContinuousPart>,
        limits: (CMat, CMat),
        label: impl Into<String>,
    ) -> Result<Self> {
        validate_jumps(&jumps, dim, false)?;
        check_square(&limits.0, dim)?;
        check_square(&limits.1, dim)?;
        Ok(Self {
            domain: Domain::Line,
            dim,
            jumps,
            profile: JumpProfile::Zeta,
            line_locations: Vec::new(),
            continuous,
            limits: Some(limits),
            label: label.into(),
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jumps(&self) -> &[SymbolJump] {
        &self.jumps
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Line coordinates of the jumps (`lambda_l`); for sawtooth circle
    /// symbols these are the Cayley images, with `phi = 0` mapped to infinity.
    pub fn line_jump_points(&self) -> Vec<f64> {
        match (self.domain, self.profile) {
            (Domain::Line, _) => self.jumps.iter().map(|j| j.location).collect(),
            (_, JumpProfile::TransportedZeta) => self.line_locations.clone(),
            _ => self
                .jumps
                .iter()
                .map(|j| cayley_line_point(j.location))
                .filter(|l| l.is_finite())
                .collect(),
        }
    }

    fn add_scaled(acc: &mut CMat, k: &CMat, c: f64) {
        if c != 0.0 {
            *acc += k * faer::Scale(Complex64::new(c, 0.0));
        }
    }

    fn continuous_at(&self, x: f64) -> CMat {
        match &self.continuous {
            Some(f) => f(x),
            None => CMat::zeros(self.dim, self.dim),
        }
    }

    /// Value at `x` (`lambda` for line symbols, `phi` for circle symbols);
    /// at a jump point the jump part contributes the two-sided mean.
    pub fn value(&self, x: f64) -> CMat {
        let mut acc = if self.domain == Domain::Circle && self.profile == JumpProfile::TransportedZeta
        {
            let p = x.rem_euclid(2.0 * PI);
            if p == 0.0 {
                self.limits
                    .as_ref()
                    .map(|l| l.0.clone())
                    .unwrap_or_else(|| CMat::zeros(self.dim, self.dim))
            } else {
                self.continuous_at(p)
            }
        } else {
            self.continuous_at(x)
        };
        for (i, j) in self.jumps.iter().enumerate() {
            let c = match self.profile {
                JumpProfile::Zeta => mean_zeta(x - j.location),
                JumpProfile::Sawtooth => sawtooth(x - j.location),
                JumpProfile::TransportedZeta => {
                    let p = x.rem_euclid(2.0 * PI);
                    if p == 0.0 {
                        0.0
                    } else {
                        mean_zeta(cayley_line_point(p) - self.line_locations[i])
                    }
                }
            };
            Self::add_scaled(&mut acc, &j.k, c);
        }
        acc
    }

    /// Stable identifier of the symbol data.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.label.hash(&mut h);
        self.dim.hash(&mut h);
        for j in &self.jumps {
            j.location.to_bits().hash(&mut h);
            for c in j.k.col_iter() {
                for z in c.iter() {
                    z.re.to_bits().hash(&mut h);
                    z.im.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }
}

fn mean_zeta(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        zeta_kernel(x)
    }
}

/// Cayley transport of a line symbol to the circle: `Psi(mu) = Xi(-cot(phi / 2))`.
pub fn cayley_transport(symbol: &PiecewiseSymbol) -> Result<PiecewiseSymbol> {
    if symbol.domain != Domain::Line {
        return Err(Error::InvalidSymbol("cayley_transport expects a line symbol".into()));
    }
    let (minus, plus) = symbol.limits.clone().expect("line symbols carry limits");
    let scale = 1.0 + minus.norm_l2().max(plus.norm_l2());
    if (&minus - &plus).norm_l2() > 1e-12 * scale {
        return Err(Error::JumpAtInfinity);
    }
    let jumps = symbol
        .jumps
        .iter()
        .map(|j| SymbolJump {
            location: cayley_angle(j.location),
            k: j.k.clone(),
        })
        .collect();
    let continuous = symbol.continuous.clone().map(|f| {
        Arc::new(move |phi: f64| f(cayley_line_point(phi))) as ContinuousPart
    });
    Ok(PiecewiseSymbol {
        domain: Domain::Circle,
        dim: symbol.dim,
        jumps,
        profile: JumpProfile::TransportedZeta,
        line_locations: symbol.jumps.iter().map(|j| j.location).collect(),
        continuous,
        limits: Some((minus, plus)),
        label: format!("cayley({})", symbol.label),
    })
}

/// Fourier coefficients `Psi^(n)`, `|n| <= max_mode`, each a `dim x dim` block.
#[derive(Debug, Clone)]
pub struct FourierCoefficients {
    dim: usize,
    max_mode: usize,
    /// index `(n + max_mode) * dim^2 + a * dim + b`
    data: Vec<Complex64>,
}

impl FourierCoefficients {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_mode(&self) -> usize {
        self.max_mode
    }

    /// Row-major `dim x dim` block of `Psi^(n)`.
    pub fn block(&self, n: i64) -> &[Complex64] {
        assert!(n.unsigned_abs() as usize <= self.max_mode, "mode {n} out of range");
        let d2 = self.dim * self.dim;
        let start = (n + self.max_mode as i64) as usize * d2;
        &self.data[start..start + d2]
    }

    /// Scalar coefficient (`dim = 1`).
    pub fn scalar(&self, n: i64) -> Complex64 {
        self.block(n)[0]
    }
}

/// Fourier coefficients of a circle symbol by FFT of its continuous remainder
/// plus the exact coefficients `e^{-i n phi_l} / (2 pi i n)` of the sawtooth jump profiles.
pub fn fourier_coefficients(
    symbol: &PiecewiseSymbol,
    max_mode: usize,
    oversample: usize,
) -> Result<FourierCoefficients> {
    if symbol.domain != Domain::Circle {
        return Err(Error::InvalidSymbol("fourier_coefficients expects a circle symbol".into()));
    }
    if oversample < 4 {
        return Err(Error::Aliasing { oversample });
    }
    let d = symbol.dim;
    let d2 = d * d;
    let m = max_mode as i64;
    let mut data = vec![C0; (2 * max_mode + 1) * d2];

    let smooth_remainder =
        symbol.continuous.is_some() || symbol.profile == JumpProfile::TransportedZeta;
    if smooth_remainder {
        let len = (oversample * max_mode.max(1)).next_power_of_two().max(8);
        let mut samples = vec![vec![C0; len]; d2];
        for s in 0..len {
            let phi = 2.0 * PI * s as f64 / len as f64;
            let mut v = symbol.value(phi);
            if symbol.profile != JumpProfile::Sawtooth {
                for j in &symbol.jumps {
                    PiecewiseSymbol::add_scaled(&mut v, &j.k, -sawtooth(phi - j.location));
                }
            }
            for a in 0..d {
                for b in 0..d {
                    samples[a * d + b][s] = v[(a, b)];
                }
            }
        }
        let fft = FftPlanner::new().plan_fft_forward(len);
        for (entry, buf) in samples.iter_mut().enumerate() {
            fft.process(buf);
            for n in -m..=m {
                let idx = n.rem_euclid(len as i64) as usize;
                data[(n + m) as usize * d2 + entry] += buf[idx] / len as f64;
            }
        }
    }
    for j in &symbol.jumps {
        for n in (-m..=m).filter(|n| *n != 0) {
            let c = Complex64::from_polar(1.0, -(n as f64) * j.location)
                / Complex64::new(0.0, 2.0 * PI * n as f64);
            for a in 0..d {
                for b in 0..d {
                    data[(n + m) as usize * d2 + a * d + b] += c * j.k[(a, b)];
                }
            }
        }
    }
    Ok(FourierCoefficients {
        dim: d,
        max_mode,
        data,
    })
}

/// Oversampling factor used when assembling truncations.
pub const DEFAULT_OVERSAMPLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationBasis {
    FourierModes,
    LatticeBox,
}

/// Finite section of `M_Psi` on Fourier modes `-N..N-1`.
///
/// Only the coupling block between negative and nonnegative modes is nonzero:
/// entry `(j < 0, k >= 0)` is `Psi^(j - k)` and its adjoint sits at `(k, j)`.
/// The block depends on `j - k` only through the lags `1..=2N`, which is all
/// that is stored; [`HermitianTruncation::to_dense`] materializes the matrix.
#[derive(Debug, Clone)]
pub struct HermitianTruncation {
    n_modes: usize,
    dim: usize,
    /// `lags[m - 1]` is the row-major block `Psi^(-m)`, `m = 1..=2N`.
    lags: Vec<Vec<Complex64>>,
    symbol_hash: u64,
}

/// Route taken by [`HermitianTruncation::eigenvalues`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenRoute {
    /// all coefficients share one phase: real symmetric `N x N` problem
    RealHankel,
    /// scalar complex symbol: real symmetric `2N x 2N` problem
    ComplexSymmetric,
    /// matrix symbol: complex singular values
    ComplexSvd,
}

impl HermitianTruncation {
    pub fn from_coefficients(coeffs: &FourierCoefficients, n_modes: usize, symbol_hash: u64) -> Result<Self> {
        if coeffs.max_mode < 2 * n_modes {
            return Err(Error::InvalidSymbol(format!(
                "need coefficients to lag {}, have {}",
                2 * n_modes,
                coeffs.max_mode
            )));
        }
        let lags = (1..=2 * n_modes as i64)
            .map(|m| coeffs.block(-m).to_vec())
            .collect();
        Ok(Self {
            n_modes,
            dim: coeffs.dim,
            lags,
            symbol_hash,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Size of the full matrix, `2 N dim`.
    pub fn size(&self) -> usize {
        2 * self.n_modes * self.dim
    }

    pub fn basis(&self) -> TruncationBasis {
        TruncationBasis::FourierModes
    }

    pub fn symbol_hash(&self) -> u64 {
        self.symbol_hash
    }

    /// `Psi^(-m)` entry `(a, b)`.
    fn lag(&self, m: usize, a: usize, b: usize) -> Complex64 {
        self.lags[m - 1][a * self.dim + b]
    }

    /// Coupling block with rows `p = -j - 1` (negative modes reversed) and
    /// columns `k >= 0`: entry `Psi^(-(p + k + 1))`, a block Hankel matrix.
    pub fn coupling(&self) -> CMat {
        let d = self.dim;
        CMat::from_fn(self.n_modes * d, self.n_modes * d, |r, c| {
            self.lag(r / d + c / d + 1, r % d, c % d)
        })
    }

    /// Full Hermitian matrix over modes `-N..N-1` in increasing order.
    pub fn to_dense(&self) -> CMat {
        let d = self.dim;
        let n = self.n_modes as i64;
        CMat::from_fn(self.size(), self.size(), |r, c| {
            let (j, a) = ((r / d) as i64 - n, r % d);
            let (k, b) = ((c / d) as i64 - n, c % d);
            if j < 0 && k >= 0 {
                self.lag((k - j) as usize, a, b)
            } else if j >= 0 && k < 0 {
                self.lag((j - k) as usize, b, a).conj()
            } else {
                C0
            }
        })
    }

    /// Common phase `e^{i alpha}` of all stored coefficients, if there is one.
    pub fn common_phase(&self) -> Option<Complex64> {
        if self.dim != 1 {
            return None;
        }
        let largest = self
            .lags
            .iter()
            .map(|l| l[0])
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
        if largest.norm() == 0.0 {
            return Some(Complex64::new(1.0, 0.0));
        }
        let phase = largest / largest.norm();
        let scale = largest.norm();
        let aligned = self
            .lags
            .iter()
            .all(|l| (l[0] * phase.conj()).im.abs() <= 1e-15 * scale);
        aligned.then_some(phase)
    }

    pub fn route(&self) -> EigenRoute {
        if self.dim > 1 {
            EigenRoute::ComplexSvd
        } else if self.common_phase().is_some() {
            EigenRoute::RealHankel
        } else {
            EigenRoute::ComplexSymmetric
        }
    }

    /// Singular values of the coupling block, nonincreasing.
    pub fn coupling_singular_values(&self) -> Result<Vec<f64>> {
        let n = self.n_modes;
        let mut s = match self.route() {
            EigenRoute::RealHankel => {
                let phase = self.common_phase().expect("checked");
                let r = RMat::from_fn(n, n, |p, k| (self.lag(p + k + 1, 0, 0) * phase.conj()).re);
                sym_eigenvalues(&r)?.into_iter().map(f64::abs).collect::<Vec<_>>()
            }
            EigenRoute::ComplexSymmetric => {
                // x -> A conj(x) as a real-linear map has eigenvalues +-s_n(A)
                let r = RMat::from_fn(2 * n, 2 * n, |i, j| {
                    let z = self.lag(i % n + j % n + 1, 0, 0);
                    match (i < n, j < n) {
                        (true, true) => z.re,
                        (true, false) | (false, true) => z.im,
                        (false, false) => -z.re,
                    }
                });
                let mut e = sym_eigenvalues(&r)?;
                e.retain(|v| *v >= 0.0);
                e.resize(n, 0.0);
                e
            }
            EigenRoute::ComplexSvd => crate::linalg::singular_values(&self.coupling())?,
        };
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }

    /// All `2 N dim` eigenvalues, ascending; exactly the multiset `{+-s_n}` of
    /// the coupling block.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let s = self.coupling_singular_values()?;
        let mut e: Vec<f64> = s.iter().map(|v| -v).chain(s.iter().copied()).collect();
        e.sort_by(f64::total_cmp);
        Ok(e)
    }

    /// Eigenvalues from a dense Hermitian solve of [`Self::to_dense`].
    pub fn dense_eigenvalues(&self) -> Result<Vec<f64>> {
        herm_eigenvalues(&self.to_dense())
    }

    /// Truncation of a difference of two symbols' operators on the same modes.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.n_modes != other.n_modes || self.dim != other.dim {
            return Err(Error::InvalidSymbol("truncations differ in shape".into()));
        }
        let lags = self
            .lags
            .iter()
            .zip(&other.lags)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Ok(Self {
            n_modes: self.n_modes,
            dim: self.dim,
            lags,
            symbol_hash: self.symbol_hash ^ other.symbol_hash.rotate_left(1),
        })
    }
}

/// Finite section of `M_Psi` on modes `-N..N-1`.
pub fn assemble_sho_circle(symbol: &PiecewiseSymbol, n_modes: usize) -> Result<HermitianTruncation> {
    let coeffs = fourier_coefficients(symbol, 2 * n_modes, DEFAULT_OVERSAMPLE)?;
    HermitianTruncation::from_coefficients(&coeffs, n_modes, symbol.fingerprint())
}

/// One interval `[-a, a]` of predicted a.c. spectrum with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub half_width: f64,
    pub multiplicity: usize,
}

/// Predicted a.c. bands, sorted by half-width descending.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectralBands {
    pub entries: Vec<Band>,
}

impl SpectralBands {
    /// Groups half-widths into bands; zero widths are dropped, equal widths merged.
    pub fn from_half_widths(widths: impl IntoIterator<Item = f64>) -> Self {
        let mut w: Vec<f64> = widths
            .into_iter()
            .filter(|a| *a > 0.5 * ZERO_SINGULAR_VALUE)
            .collect();
        w.sort_by(|a, b| b.total_cmp(a));
        let mut entries: Vec<Band> = Vec::new();
        for a in w {
            match entries.last_mut() {
                Some(last) if (last.half_width - a).abs() <= 1e-12 * last.half_width.max(1.0) => {
                    last.multiplicity += 1
                }
                _ => entries.push(Band {
                    half_width: a,
                    multiplicity: 1,
                }),
            }
        }
        Self { entries }
    }

    pub fn max_half_width(&self) -> f64 {
        self.entries.first().map(|b| b.half_width).unwrap_or(0.0)
    }

    /// Total multiplicity of the a.c. spectrum at `x`.
    pub fn multiplicity_at(&self, x: f64) -> usize {
        self.entries
            .iter()
            .filter(|b| x.abs() < b.half_width)
            .map(|b| b.multiplicity)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Bands `[-s_n(K_l) / 2, s_n(K_l) / 2]` over all jumps and singular values.
pub fn predict_bands(symbol: &PiecewiseSymbol) -> Result<SpectralBands> {
    let mut widths = Vec::new();
    for j in symbol.jumps() {
        let (_, s, _) = svd(&j.k)?;
        widths.extend(s.into_iter().map(|v| v / 2.0));
    }
    Ok(SpectralBands::from_half_widths(widths))
}

/// `[[0, -i K^*], [i K, 0]]` and its eigenvalues (ascending).
pub fn block_hat_k(k: &CMat) -> Result<(CMat, Vec<f64>)> {
    let d = k.nrows();
    if k.ncols() != d {
        return Err(Error::InvalidSymbol("K must be square".into()));
    }
    let m = CMat::from_fn(2 * d, 2 * d, |r, c| match (r < d, c < d) {
        (true, false) => -I * k[(c - d, r)].conj(),
        (false, true) => I * k[(r - d, c)],
        _ => C0,
    });
    let e = herm_eigenvalues(&m)?;
    Ok((m, e))
}

/// An eigenvector of the block matrix from [`block_hat_k`].
#[derive(Debug, Clone)]
pub struct HatKEigenvector {
    /// `+1`, `-1`, or `0` for kernel vectors.
    pub sign: i8,
    pub singular_value: f64,
    pub vector: Vec<Complex64>,
    /// `|hat K b - sign s b| / |b|`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct HatKEigenbasis {
    pub vectors: Vec<HatKEigenvector>,
    pub warnings: Vec<String>,
}

/// Eigenvectors `(s a, +-i K a)` built from right singular vectors `a` of `K`,
/// and kernel vectors `(a, 0)`, `(0, c)` with `K a = 0`, `K^* c = 0`.
pub fn hat_k_eigenvectors(k: &CMat) -> Result<HatKEigenbasis> {
    let d = k.nrows();
    let (m, _) = block_hat_k(k)?;
    let (u, s, v) = svd(k)?;
    let scale = s.first().copied().unwrap_or(0.0).max(1.0);
    let mut vectors = Vec::new();
    let mut warnings = Vec::new();
    let residual = |b: &[Complex64], lam: f64| {
        let norm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut worst = 0.0f64;
        for r in 0..2 * d {
            let mut acc = C0;
            for (c, bc) in b.iter().enumerate() {
                acc += m[(r, c)] * bc;
            }
            worst += (acc - b[r] * lam).norm_sqr();
        }
        worst.sqrt() / norm
    };
    for (n, &sn) in s.iter().enumerate() {
        if n > 0 && (s[n - 1] - sn).abs() < 1e-8 * scale && sn > ZERO_SINGULAR_VALUE * scale {
            warnings.push(format!(
                "degenerate singular value {sn}: eigenvectors span an eigenspace"
            ));
        }
        if sn > ZERO_SINGULAR_VALUE * scale {
            let a: Vec<Complex64> = (0..d).map(|i| v[(i, n)]).collect();
            let ka: Vec<Complex64> = (0..d)
                .map(|i| (0..d).map(|j| k[(i, j)] * a[j]).sum())
                .collect();
            for sign in [1i8, -1] {
                let mut b: Vec<Complex64> = a.iter().map(|z| z * sn).collect();
                b.extend(ka.iter().map(|z| I * f64::from(sign) * z));
                let res = residual(&b, f64::from(sign) * sn);
                vectors.push(HatKEigenvector {
                    sign,
                    singular_value: sn,
                    vector: b,
                    residual: res,
                });
            }
        } else {
            let mut right: Vec<Complex64> = (0..d).map(|i| v[(i, n)]).collect();
            right.extend(std::iter::repeat_n(C0, d));
            let mut left: Vec<Complex64> = vec![C0; d];
            left.extend((0..d).map(|i| u[(i, n)]));
            for b in [right, left] {
                let res = residual(&b, 0.0);
                vectors.push(HatKEigenvector {
                    sign: 0,
                    singular_value: 0.0,
                    vector: b,
                    residual: res,
                });
            }
        }
    }
    Ok(HatKEigenbasis { vectors, warnings })
}

/// Model symbol `zeta(lambda - lambda0) K` on the line; its jump at `lambda0` is `K`.
pub fn model_symbol(k: CMat, lambda0: f64) -> Result<PiecewiseSymbol> {
    let d = k.nrows();
    if is_zero(&k) {
        return Err(Error::InvalidSymbol("model symbol needs K != 0".into()));
    }
    PiecewiseSymbol::line(
        d,
        vec![SymbolJump {
            location: lambda0,
            k,
        }],
        None,
        (CMat::zeros(d, d), CMat::zeros(d, d)),
        format!("zeta-model@{lambda0}"),
    )
}

/// Logarithmic weight `q(lambda) = prod_l q0(lambda - lambda_l)` with exponent `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightQ {
    pub singular_points: Vec<f64>,
    pub beta: f64,
}

/// `q0(lambda) = |ln |lambda||^{-1}` for `|lambda| < e^{-1}`, else 1.
pub fn q0(lambda: f64) -> f64 {
    let a = lambda.abs();
    if a == 0.0 {
        0.0
    } else if a < (-1f64).exp() {
        1.0 / a.ln().abs()
    } else {
        1.0
    }
}

pub fn weight_q(w: &WeightQ, lambda: f64) -> f64 {
    w.singular_points.iter().map(|p| q0(lambda - p)).product()
}

/// Unitary DFT from modes `-N..N-1` to the `2N` angles `2 pi (j + 1/2) / (2N)`.
fn mode_to_grid(n_modes: usize) -> (Vec<f64>, CMat) {
    let size = 2 * n_modes;
    let angles: Vec<f64> = (0..size)
        .map(|j| 2.0 * PI * (j as f64 + 0.5) / size as f64)
        .collect();
    let norm = 1.0 / (size as f64).sqrt();
    let f = CMat::from_fn(size, size, |j, m| {
        let mode = m as f64 - n_modes as f64;
        Complex64::from_polar(norm, mode * angles[j])
    });
    (angles, f)
}

/// Applies the unitary DFT of [`mode_to_grid`] to every column of `x` by FFT.
fn to_grid_columns(x: &CMat, n_modes: usize, planner: &mut FftPlanner<f64>) -> CMat {
    let size = 2 * n_modes;
    let fft = planner.plan_fft_inverse(size);
    let norm = 1.0 / (size as f64).sqrt();
    let twist: Vec<Complex64> = (0..size)
        .map(|m| Complex64::from_polar(norm, PI * (m as f64 - n_modes as f64) / size as f64))
        .collect();
    let mut out = CMat::zeros(size, x.ncols());
    let mut buf = vec![C0; size];
    for c in 0..x.ncols() {
        for m in 0..size {
            buf[m] = x[(m, c)] * twist[m];
        }
        fft.process(&mut buf);
        // e^{-i N theta_j} contributes (-1)^j beyond the half-step twist
        for j in 0..size {
            out[(j, c)] = if j % 2 == 0 { buf[j] } else { -buf[j] };
        }
    }
    out
}

/// The truncation expressed on the physical circle grid: `F T F^*`.
fn physical_matrix(t: &HermitianTruncation) -> Result<(Vec<f64>, CMat)> {
    if t.dim != 1 {
        return Err(Error::InvalidSymbol("physical-grid diagnostics need a scalar symbol".into()));
    }
    let n = t.n_modes;
    let size = 2 * n;
    let angles = (0..size)
        .map(|j| 2.0 * PI * (j as f64 + 0.5) / size as f64)
        .collect();
    let mut planner = FftPlanner::new();
    let ft = to_grid_columns(&t.to_dense(), n, &mut planner);
    let m = to_grid_columns(&ft.adjoint().to_owned(), n, &mut planner)
        .adjoint()
        .to_owned();
    Ok((angles, m))
}

/// Singular values of `q^{-beta} T q^{-beta}` on the circle grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichReport {
    pub n_modes: usize,
    pub beta: f64,
    /// nonincreasing
    pub singular_values: Vec<f64>,
    /// `(fraction, index, value)`: singular value at index `fraction * size`.
    pub tracked: Vec<(f64, usize, f64)>,
}

/// Fractions of the matrix size at which singular values are tracked.
pub const TRACKED_FRACTIONS: [f64; 4] = [0.01, 0.02, 0.05, 0.1];

/// Smallest weight used on grid points, avoiding division by zero at singular points.
pub const WEIGHT_FLOOR: f64 = 1e-3;

pub fn sandwich_singular_values(t: &HermitianTruncation, w: &WeightQ) -> Result<SandwichReport> {
    let (angles, m) = physical_matrix(t)?;
    weighted_report(&angles, &m, t.n_modes, w)
}

fn weighted_report(angles: &[f64], m: &CMat, n_modes: usize, w: &WeightQ) -> Result<SandwichReport> {
    let d: Vec<f64> = angles
        .iter()
        .map(|&phi| {
            let q = weight_q(w, cayley_line_point(phi)).max(WEIGHT_FLOOR);
            q.powf(-w.beta)
        })
        .collect();
    let size = angles.len();
    let weighted = CMat::from_fn(size, size, |i, j| m[(i, j)] * (d[i] * d[j]));
    let mut s: Vec<f64> = herm_eigenvalues(&weighted)?.into_iter().map(f64::abs).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let tracked = TRACKED_FRACTIONS
        .iter()
        .map(|&f| {
            let idx = ((f * size as f64) as usize).min(size - 1);
            (f, idx, s[idx])
        })
        .collect();
    Ok(SandwichReport {
        n_modes,
        beta: w.beta,
        singular_values: s,
        tracked,
    })
}

/// Continuous remainder added to a single `zeta` jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Remainder {
    /// makes the symbol `kappa sign(d) e^{-|d|} / 2`, Lipschitz away from the jump
    Holder,
    /// `0.3 |ln min(|d|, 1/2)|^{-exponent} e^{-d^2}`: continuous but only log-Holder
    LogHolder { exponent: f64 },
}

/// Line symbol with one jump `kappa` at `lambda0` plus a continuous remainder,
/// transported to the circle. `d = lambda - lambda0`.
pub fn one_jump_symbol(kappa: f64, lambda0: f64, remainder: Remainder) -> Result<PiecewiseSymbol> {
    let g = move |x: f64| -> f64 {
        let d = x - lambda0;
        match remainder {
            Remainder::Holder => {
                if d == 0.0 {
                    0.0
                } else {
                    kappa * (0.5f64.copysign(d) * (-d.abs()).exp() - zeta_kernel(d))
                }
            }
            Remainder::LogHolder { exponent } => {
                let a = d.abs();
                if a == 0.0 {
                    0.0
                } else {
                    0.3 * a.min(0.5).ln().abs().powf(-exponent) * (-d * d).exp()
                }
            }
        }
    };
    let continuous: ContinuousPart = Arc::new(move |x| scalar_matrix(g(x)));
    let line = PiecewiseSymbol::line(
        1,
        vec![SymbolJump {
            location: lambda0,
            k: scalar_matrix(kappa),
        }],
        Some(continuous),
        (CMat::zeros(1, 1), CMat::zeros(1, 1)),
        format!("one-jump({kappa}@{lambda0}, {remainder:?})"),
    )?;
    cayley_transport(&line)
}

/// Weighted singular values of `SHO(symbol) - SHO(one-jump model)` along a
/// ladder, one verdict per `beta`. The weight is singular at `lambda0`.
pub fn compactness_ladder(
    symbol: &PiecewiseSymbol,
    kappa: f64,
    lambda0: f64,
    betas: &[f64],
    ladder: &[usize],
) -> Result<Vec<DecayVerdict>> {
    let model = cayley_transport(&model_symbol(scalar_matrix(kappa), lambda0)?)?;
    let mut reports: Vec<Vec<SandwichReport>> = vec![Vec::new(); betas.len()];
    for &n in ladder {
        let diff = assemble_sho_circle(symbol, n)?.difference(&assemble_sho_circle(&model, n)?)?;
        let (angles, m) = physical_matrix(&diff)?;
        for (slot, &beta) in reports.iter_mut().zip(betas) {
            let w = WeightQ {
                singular_points: vec![lambda0],
                beta,
            };
            slot.push(weighted_report(&angles, &m, n, &w)?);
        }
    }
    Ok(reports.iter().map(|r| decay_verdict(r)).collect())
}

/// Tracked values below this fraction of the largest singular value are at
/// round-off level and count as decayed.
pub const TAIL_NOISE_FLOOR: f64 = 1e-12;

/// Largest ratio of successive Hilbert-Schmidt norm increments still read as convergence.
pub const HS_CONTRACTION: f64 = 0.85;

/// Outcome of a refinement ladder of [`SandwichReport`]s.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayVerdict {
    pub beta: f64,
    /// per tracked fraction, the values along the ladder
    pub series: Vec<(f64, Vec<f64>)>,
    /// every tracked value decreases (or has reached the noise floor) at every rung
    pub decreasing_everywhere: bool,
    /// Hilbert-Schmidt norms of the weighted truncations along the ladder
    pub hs_norms: Vec<f64>,
    /// ratios of successive increments of `hs_norms`
    pub hs_increment_ratios: Vec<f64>,
    /// raised when the weighted norm keeps growing without contraction, the
    /// signature of an unbounded (hence non-compact) weighted operator
    pub non_decay: bool,
}

impl SandwichReport {
    pub fn hilbert_schmidt(&self) -> f64 {
        self.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

pub fn decay_verdict(reports: &[SandwichReport]) -> DecayVerdict {
    let beta = reports.first().map(|r| r.beta).unwrap_or(0.0);
    let series: Vec<(f64, Vec<f64>)> = TRACKED_FRACTIONS
        .iter()
        .enumerate()
        .map(|(i, &f)| (f, reports.iter().map(|r| r.tracked[i].2).collect()))
        .collect();
    let floors: Vec<f64> = reports
        .iter()
        .map(|r| TAIL_NOISE_FLOOR * r.singular_values.first().copied().unwrap_or(0.0))
        .collect();
    let decreasing_everywhere = series.iter().all(|(_, v)| {
        v.windows(2)
            .enumerate()
            .all(|(k, w)| w[1] < w[0] || (w[1] <= floors[k + 1] && w[0] <= floors[k]))
    });
    let hs_norms: Vec<f64> = reports.iter().map(SandwichReport::hilbert_schmidt).collect();
    let increments: Vec<f64> = hs_norms.windows(2).map(|w| w[1] - w[0]).collect();
    let hs_increment_ratios: Vec<f64> = increments
        .windows(2)
        .map(|w| if w[0].abs() > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let non_decay = !decreasing_everywhere
        || (!hs_increment_ratios.is_empty()
            && hs_increment_ratios.iter().all(|r| *r >= HS_CONTRACTION));
    DecayVerdict {
        beta,
        series,
        decreasing_everywhere,
        hs_norms,
        hs_increment_ratios,
        non_decay,
    }
}

/// `mass(t) = |G U e^{-i Lambda t} c|^2` for a Hermitian generator with
/// eigenpairs `(Lambda, U)`, initial coefficients `c = U^* f`, and an
/// observation matrix `G` whose rows span the window.
pub struct EvolutionProbe {
    eigenvalues: Vec<f64>,
    /// `G U`, rows = window, columns = eigenvectors with nonzero weight
    observed: CMat,
    coefficients: Vec<Complex64>,
}

impl EvolutionProbe {
    /// Restricts `f` to eigenvectors with `|eigenvalue| > epsilon` and sets up `mass(t)`.
    pub fn new(
        eigenvalues: &[f64],
        eigenvectors: &CMat,
        window: &CMat,
        f: &[Complex64],
        epsilon: f64,
    ) -> Self {
        let keep: Vec<usize> = (0..eigenvalues.len())
            .filter(|&i| eigenvalues[i].abs() > epsilon)
            .collect();
        let n = eigenvectors.nrows();
        let coefficients: Vec<Complex64> = keep
            .iter()
            .map(|&i| (0..n).map(|r| eigenvectors[(r, i)].conj() * f[r]).sum())
            .collect();
        let kept = CMat::from_fn(n, keep.len(), |r, c| eigenvectors[(r, keep[c])]);
        let observed = window * &kept;
        Self {
            eigenvalues: keep.iter().map(|&i| eigenvalues[i]).collect(),
            observed,
            coefficients,
        }
    }

    /// `|f_ac|^2`.
    pub fn initial_norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn mass(&self, t: f64) -> f64 {
        let evolved: Vec<Complex64> = self
            .coefficients
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, e)| c * Complex64::from_polar(1.0, -e * t))
            .collect();
        (0..self.observed.nrows())
            .map(|r| {
                (0..evolved.len())
                    .map(|c| self.observed[(r, c)] * evolved[c])
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum()
    }

    /// Mean of `mass` over `samples` equally spaced times in `[t1, 2 t1]`.
    pub fn averaged_mass(&self, t1: f64, samples: usize) -> f64 {
        let samples = samples.max(1);
        (0..samples)
            .map(|k| self.mass(t1 + t1 * (k as f64 + 0.5) / samples as f64))
            .sum::<f64>()
            / samples as f64
    }
}

/// Mass curve and horizon averages of an evolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassCurve {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    /// `(t1, mean mass over [t1, 2 t1])`
    pub averages: Vec<(f64, f64)>,
    pub initial_norm_sqr: f64,
    /// set when the generator has no numerically a.c. part to speak of
    pub no_ac_case: bool,
}

/// Number of time samples used for horizon averages.
pub const AVERAGE_SAMPLES: usize = 256;

/// Evolution of `f` under the truncation `T`, observed through `chi_Q(lambda(phi))`
/// on the circle grid, where `window` is an interval of the line variable.
pub fn localization_evolution(
    t: &HermitianTruncation,
    f: &[Complex64],
    window: (f64, f64),
    times: &[f64],
    horizons: &[f64],
    has_jumps: bool,
) -> Result<MassCurve> {
    let (angles, fmat) = mode_to_grid(t.n_modes);
    let rows: Vec<usize> = (0..angles.len())
        .filter(|&j| {
            let l = cayley_line_point(angles[j]);
            l >= window.0 && l <= window.1
        })
        .collect();
    let g = CMat::from_fn(rows.len(), fmat.ncols(), |r, c| fmat[(rows[r], c)]);
    let (vals, vecs) = herm_eigen(&t.to_dense())?;
    let probe = EvolutionProbe::new(&vals, &vecs, &g, f, AC_EPSILON);
    Ok(MassCurve {
        times: times.to_vec(),
        mass: times.iter().map(|&s| probe.mass(s)).collect(),
        averages: horizons
            .iter()
            .map(|&h| (h, probe.averaged_mass(h, AVERAGE_SAMPLES)))
            .collect(),
        initial_norm_sqr: probe.initial_norm_sqr(),
        no_ac_case: !has_jumps,
    })
}

/// Vector on modes `-N..N-1` whose physical-grid values are `g(lambda(phi_j))`.
pub fn grid_function_to_modes(n_modes: usize, g: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let (angles, f) = mode_to_grid(n_modes);
    let values: Vec<Complex64> = angles.iter().map(|&p| g(cayley_line_point(p))).collect();
    (0..f.ncols())
        .map(|m| (0..f.nrows()).map(|j| f[(j, m)].conj() * values[j]).sum())
        .collect()
}

/// Linear fit `v = a + b / ln N`; returns the intercept `a`.
pub fn inverse_log_extrapolation(ns: &[usize], values: &[f64]) -> f64 {
    let x: Vec<f64> = ns.iter().map(|&n| 1.0 / (n as f64).ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = values.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(values).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    my - (sxy / sxx) * mx
}

/// Largest gap of `points` inside `[lo, hi]`, counting the interval ends as points.
pub fn max_gap(points: &[f64], lo: f64, hi: f64) -> f64 {
    let mut inside: Vec<f64> = points
        .iter()
        .copied()
        .filter(|p| *p >= lo && *p <= hi)
        .collect();
    inside.push(lo);
    inside.push(hi);
    inside.sort_by(f64::total_cmp);
    inside.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// JSON description of a symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub domain: Domain,
    pub jumps: Vec<JumpSpec>,
    pub continuous: ContinuousPreset,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    /// `lambda` for line symbols, angle `phi` in `[0, 2 pi)` for circle symbols
    pub location: f64,
    #[serde(rename = "K")]
    pub k: Vec<Vec<Entry>>,
}

/// A matrix entry: a real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(x) => Complex64::new(x, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuousPreset {
    /// jumps carried by sawtooth profiles on the circle, no continuous part
    Sawtooth,
    /// sawtooth profiles plus the smooth bump `exp(cos phi) / 4`
    SmoothBump,
    /// jumps carried by `zeta(lambda - lambda_l)` on the line
    ZetaModel,
}

impl SymbolSpec {
    /// Builds the circle symbol to be truncated.
    pub fn build(&self) -> Result<PiecewiseSymbol> {
        let d = self.dim;
        let mut jumps = Vec::with_capacity(self.jumps.len());
        for (i, j) in self.jumps.iter().enumerate() {
            if j.k.len() != d || j.k.iter().any(|row| row.len() != d) {
                return Err(Error::config(
                    format!("jumps[{i}].K"),
                    format!("expected a {d}x{d} matrix"),
                ));
            }
            let k = CMat::from_fn(d, d, |r, c| j.k[r][c].value());
            jumps.push(SymbolJump {
                location: j.location,
                k,
            });
        }
        let as_angle = |x: f64| match self.domain {
            Domain::Circle => x,
            Domain::Line => cayley_angle(x),
        };
        let as_line = |x: f64| match self.domain {
            Domain::Line => x,
            Domain::Circle => cayley_line_point(x),
        };
        match self.continuous {
            ContinuousPreset::Sawtooth | ContinuousPreset::SmoothBump => {
                for j in &mut jumps {
                    j.location = as_angle(j.location);
                }
                let bump = (self.continuous == ContinuousPreset::SmoothBump).then(|| {
                    Arc::new(move |phi: f64| {
                        CMat::from_fn(d, d, |r, c| {
                            if r == c {
                                Complex64::new(0.25 * phi.cos().exp(), 0.0)
                            } else {
                                C0
                            }
                        })
                    }) as ContinuousPart
                });
                PiecewiseSymbol::circle_sawtooth(d, jumps, bump, format!("{:?}", self.continuous))
            }
            ContinuousPreset::ZetaModel => {
                for j in &mut jumps {
                    j.location = as_line(j.location);
                    if !j.location.is_finite() {
                        return Err(Error::JumpAtInfinity);
                    }
                }
                let zero = CMat::zeros(d, d);
                let line = PiecewiseSymbol::line(d, jumps, None, (zero.clone(), zero), "zeta-model")?;
                cayley_transport(&line)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn saw_symbol(kappa: f64, at: f64) -> PiecewiseSymbol {
        PiecewiseSymbol::circle_sawtooth(
            1,
            vec![SymbolJump {
                location: at,
                k: scalar_matrix(kappa),
            }],
            None,
            "saw",
        )
        .unwrap()
    }

    fn continuous_symbol(f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> PiecewiseSymbol {
        PiecewiseSymbol::circle_sawtooth(1, vec![], Some(Arc::new(move |p| scalar(f(p)))), "c")
            .unwrap()
    }

    #[test]
    fn constant_symbol_coefficients() {
        let s = continuous_symbol(|_| Complex64::new(2.5, -1.0));
        let c = fourier_coefficients(&s, 16, 8).unwrap();
        assert!((c.scalar(0) - Complex64::new(2.5, -1.0)).norm() < 1e-15);
        for n in (-16..=16).filter(|n| *n != 0) {
            assert!(c.scalar(n).norm() < 1e-15);
        }
    }

    #[test]
    fn sawtooth_coefficients_match_closed_form() {
        // direct integration: int_0^{2 pi} (pi - phi)/(2 pi) e^{-i n phi} dphi / (2 pi) = 1/(2 pi i n)
        let s = saw_symbol(1.0, 0.0);
        let c = fourier_coefficients(&s, 64, 8).unwrap();
        for n in (-64i64..=64).filter(|n| *n != 0) {
            let exact = 1.0 / Complex64::new(0.0, 2.0 * PI * n as f64);
            assert!((c.scalar(n) - exact).norm() < 1e-6);
        }
        assert_eq!(c.scalar(0), C0);
    }

    #[test]
    fn sawtooth_sampled_through_remainder_path() {
        // the same sawtooth given as a continuous part goes through the FFT; its
        // coefficients converge to 1/(2 pi i n) as the sampling is refined
        let s = continuous_symbol(|p| Complex64::new(sawtooth(p), 0.0));
        let c = fourier_coefficients(&s, 8, 4096).unwrap();
        for n in 1..=8i64 {
            let exact = 1.0 / Complex64::new(0.0, 2.0 * PI * n as f64);
            assert!((c.scalar(n) - exact).norm() < 1e-6, "n={n}");
        }
    }

    #[test]
    fn single_mode_symbol() {
        let s = continuous_symbol(|p| Complex64::from_polar(1.0, -p));
        let c = fourier_coefficients(&s, 8, 8).unwrap();
        for n in -8..=8 {
            let expected = if n == -1 { 1.0 } else { 0.0 };
            assert!((c.scalar(n) - expected).norm() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn aliasing_guard() {
        let s = saw_symbol(1.0, 0.0);
        assert!(matches!(fourier_coefficients(&s, 8, 3), Err(Error::Aliasing { oversample: 3 })));
    }

    #[test]
    fn analytic_symbol_gives_zero_truncation() {
        let one = continuous_symbol(|_| Complex64::new(1.0, 0.0));
        let t = assemble_sho_circle(&one, 8).unwrap();
        assert!(t.to_dense().norm_max() < 1e-15);
        let analytic = continuous_symbol(|p| Complex64::from_polar(1.0, 2.0 * p) + 0.5);
        let t = assemble_sho_circle(&analytic, 8).unwrap();
        assert!(t.to_dense().norm_max() < 1e-14);
    }

    #[test]
    fn single_negative_mode_truncation() {
        // Psi = mu^{-1}: only the (j=-1, k=0) pair is nonzero
        let s = continuous_symbol(|p| Complex64::from_polar(1.0, -p));
        let t = assemble_sho_circle(&s, 2).unwrap();
        let dense = t.to_dense();
        assert!((dense[(1, 2)] - 1.0).norm() < 1e-14);
        assert!((dense[(2, 1)] - 1.0).norm() < 1e-14);
        let e = t.dense_eigenvalues().unwrap();
        for (got, want) in e.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let e = t.eigenvalues().unwrap();
        for (got, want) in e.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn structured_eigenvalues_match_dense_solve_on_every_route() {
        let saw = saw_symbol(1.0, 0.0);
        let shifted = saw_symbol(0.7, 2.0);
        let kmat = CMat::from_fn(2, 2, |r, c| Complex64::new(1.0 + r as f64, c as f64 - 0.5));
        let matrix = PiecewiseSymbol::circle_sawtooth(
            2,
            vec![SymbolJump { location: 1.0, k: kmat }],
            None,
            "m",
        )
        .unwrap();
        let bump = SymbolSpec {
            domain: Domain::Circle,
            jumps: vec![JumpSpec { location: 3.0, k: vec![vec![Entry::Real(1.0)]] }],
            continuous: ContinuousPreset::SmoothBump,
            dim: 1,
        }
        .build()
        .unwrap();
        for (sym, route) in [
            (&saw, EigenRoute::RealHankel),
            (&shifted, EigenRoute::ComplexSymmetric),
            (&matrix, EigenRoute::ComplexSvd),
            (&bump, EigenRoute::ComplexSymmetric),
        ] {
            let t = assemble_sho_circle(sym, 24).unwrap();
            assert_eq!(t.route(), route);
            let a = t.eigenvalues().unwrap();
            let b = t.dense_eigenvalues().unwrap();
            assert_eq!(a.len(), b.len());
            let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-12, "{route:?}: {worst:e}");
            assert!(crate::linalg::reflection_defect(&b) < 1e-12);
        }
    }

    #[test]
    fn sawtooth_band_edge_grows_toward_half() {
        let s = saw_symbol(1.0, 0.0);
        let tops: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| *assemble_sho_circle(&s, n).unwrap().eigenvalues().unwrap().last().unwrap())
            .collect();
        assert!(tops.windows(2).all(|w| w[1] > w[0]));
        assert!(tops.iter().all(|t| *t < 0.5 && *t > 0.3));
    }

    #[test]
    fn cayley_map_points() {
        assert!((cayley_angle(0.0) - PI).abs() < 1e-15);
        assert!(cayley_angle(1e12) > 2.0 * PI - 1e-11);
        assert!(cayley_angle(-1e12) < 1e-11);
        for l in [-3.0, -0.2, 0.0, 0.7, 10.0] {
            assert!((cayley_line_point(cayley_angle(l)) - l).abs() < 1e-12 * (1.0 + l * l));
        }
        // orientation: increasing lambda gives increasing angle
        assert!(cayley_angle(0.1) > cayley_angle(0.0));
    }

    #[test]
    fn transported_model_keeps_jump() {
        let k = scalar_matrix(1.5);
        let line = model_symbol(k, 0.0).unwrap();
        let circle = cayley_transport(&line).unwrap();
        assert!((circle.jumps()[0].location - PI).abs() < 1e-15);
        let eps = 1e-9;
        let jump = circle.value(PI + eps)[(0, 0)] - circle.value(PI - eps)[(0, 0)];
        assert!((jump.re - 1.5).abs() < 1e-6);
        // continuous at mu = 1
        let gap = circle.value(1e-9)[(0, 0)] - circle.value(2.0 * PI - 1e-9)[(0, 0)];
        assert!(gap.norm() < 1e-6);
    }

    #[test]
    fn jump_at_infinity_rejected() {
        let line = PiecewiseSymbol::line(
            1,
            vec![],
            Some(Arc::new(|l: f64| scalar_matrix(l.atan()))),
            (scalar_matrix(-PI / 2.0), scalar_matrix(PI / 2.0)),
            "atan",
        )
        .unwrap();
        assert!(matches!(cayley_transport(&line), Err(Error::JumpAtInfinity)));
    }

    #[test]
    fn model_symbol_jump_and_decay() {
        let k = CMat::from_fn(2, 2, |r, c| Complex64::new((r + 2 * c) as f64, 1.0));
        let s = model_symbol(k.clone(), 0.3).unwrap();
        let jump = s.value(0.3 + 1e-12) - s.value(0.3 - 1e-12);
        assert!((&jump - &k).norm_max() < 1e-9);
        for d in [1.0, 10.0, 100.0] {
            let v = s.value(0.3 + d).norm_l2() * d;
            assert!(v < 2.0 * k.norm_l2());
        }
        assert!(model_symbol(CMat::zeros(2, 2), 0.0).is_err());
    }

    #[test]
    fn band_prediction_examples() {
        let one = |k: f64, at: f64| SymbolJump { location: at, k: scalar_matrix(k) };
        let s = PiecewiseSymbol::circle_sawtooth(1, vec![one(2.0, 0.0)], None, "a").unwrap();
        assert_eq!(
            predict_bands(&s).unwrap().entries,
            vec![Band { half_width: 1.0, multiplicity: 1 }]
        );
        let s = PiecewiseSymbol::circle_sawtooth(1, vec![one(2.0, 0.0), one(1.0, 3.0)], None, "b")
            .unwrap();
        let b = predict_bands(&s).unwrap();
        assert_eq!(b.entries.len(), 2);
        assert!((b.entries[1].half_width - 0.5).abs() < 1e-15);
        assert_eq!(b.multiplicity_at(0.2), 2);
        assert_eq!(b.multiplicity_at(0.7), 1);
        let diag = CMat::from_fn(2, 2, |r, c| if r == c && r == 0 { Complex64::new(3.0, 0.0) } else { C0 });
        let s = PiecewiseSymbol::circle_sawtooth(2, vec![SymbolJump { location: 1.0, k: diag }], None, "c")
            .unwrap();
        assert_eq!(
            predict_bands(&s).unwrap().entries,
            vec![Band { half_width: 1.5, multiplicity: 1 }]
        );
    }

    #[test]
    fn hat_k_small_cases() {
        let (_, e) = block_hat_k(&scalar_matrix(2.0)).unwrap();
        assert!((e[0] + 2.0).abs() < 1e-14 && (e[1] - 2.0).abs() < 1e-14);
        let (_, e) = block_hat_k(&CMat::zeros(2, 2)).unwrap();
        assert!(e.iter().all(|v| *v == 0.0));
        let basis = hat_k_eigenvectors(&scalar_matrix(2.0)).unwrap();
        assert_eq!(basis.vectors.len(), 2);
        for v in &basis.vectors {
            // (2, +-2i) up to the sign of the singular vector
            let ratio = v.vector[1] / v.vector[0];
            assert!((ratio - I * f64::from(v.sign)).norm() < 1e-14);
            assert!((v.vector[0].norm() - 2.0).abs() < 1e-14);
            assert!(v.residual < 1e-15);
        }
        let diag = CMat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => Complex64::new(3.0, 0.0),
            (1, 1) => Complex64::new(1.0, 0.0),
            _ => C0,
        });
        let basis = hat_k_eigenvectors(&diag).unwrap();
        assert_eq!(basis.vectors.len(), 4);
        assert!(basis.vectors.iter().all(|v| v.residual < 1e-12));
        let singular = CMat::from_fn(2, 2, |r, c| if r == 0 && c == 1 { Complex64::new(1.0, 1.0) } else { C0 });
        let basis = hat_k_eigenvectors(&singular).unwrap();
        let kernel: Vec<_> = basis.vectors.iter().filter(|v| v.sign == 0).collect();
        assert_eq!(kernel.len(), 2);
        assert!(kernel.iter().all(|v| v.residual < 1e-14));
    }

    #[test]
    fn weight_values() {
        assert!((q0((-2f64).exp()) - 0.5).abs() < 1e-15);
        assert_eq!(q0(1.0), 1.0);
        let w = WeightQ { singular_points: vec![0.0, 0.02], beta: 1.0 };
        let mid = 0.01;
        assert!((weight_q(&w, mid) - q0(0.01) * q0(-0.01)).abs() < 1e-15);
    }

    #[test]
    fn physical_grid_fft_matches_dense_dft() {
        let t = assemble_sho_circle(&saw_symbol(1.0, 0.7), 8).unwrap();
        let (_, f) = mode_to_grid(8);
        let dense = &f * t.to_dense() * f.adjoint();
        let (_, fast) = physical_matrix(&t).unwrap();
        assert!((&dense - &fast).norm_max() < 1e-13);
    }

    #[test]
    fn compactness_diagnostic_separates_holder_from_log_holder() {
        let ladder = [64, 128, 256, 512];
        let betas = [1.1, 1.4];
        let good = one_jump_symbol(1.0, 0.0, Remainder::Holder).unwrap();
        for v in compactness_ladder(&good, 1.0, 0.0, &betas, &ladder).unwrap() {
            assert!(v.decreasing_everywhere && !v.non_decay, "{v:?}");
        }
        let bad = one_jump_symbol(1.0, 0.0, Remainder::LogHolder { exponent: 0.5 }).unwrap();
        for v in compactness_ladder(&bad, 1.0, 0.0, &betas, &ladder).unwrap() {
            assert!(v.non_decay, "{v:?}");
        }
    }

    #[test]
    fn zero_difference_has_zero_weighted_singular_values() {
        let s = saw_symbol(1.0, 1.0);
        let t = assemble_sho_circle(&s, 16).unwrap();
        let d = t.difference(&t).unwrap();
        let w = WeightQ { singular_points: vec![cayley_line_point(1.0)], beta: 1.1 };
        let r = sandwich_singular_values(&d, &w).unwrap();
        assert!(r.singular_values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn evolution_starts_with_window_mass() {
        let s = saw_symbol(1.0, PI);
        let t = assemble_sho_circle(&s, 32).unwrap();
        // window covering the whole line: mass is the norm of the a.c. part
        let f = grid_function_to_modes(32, |l| Complex64::new((-(l - 2.0).powi(2)).exp(), 0.0));
        let curve = localization_evolution(&t, &f, (-1e300, 1e300), &[0.0, 5.0], &[], true).unwrap();
        assert!((curve.mass[0] - curve.initial_norm_sqr).abs() < 1e-12);
        assert!((curve.mass[1] - curve.initial_norm_sqr).abs() < 1e-12);
    }

    #[test]
    fn symbol_json_round_trip() {
        let json = r#"{"domain":"line","jumps":[{"location":0.0,"K":[[[1.0,0.5]]]}],"continuous":"zeta-model","dim":1}"#;
        let spec: SymbolSpec = serde_json::from_str(json).unwrap();
        let sym = spec.build().unwrap();
        assert_eq!(sym.domain(), Domain::Circle);
        assert!((sym.jumps()[0].location - PI).abs() < 1e-15);
        let bad = r#"{"domain":"line","jumps":[],"continuous":"wiggle","dim":1}"#;
        assert!(serde_json::from_str::<SymbolSpec>(bad).is_err());
    }

    #[test]
    fn extrapolation_recovers_intercept() {
        let ns = [100usize, 1000];
        let v: Vec<f64> = ns.iter().map(|&n| 0.5 - 0.7 / (n as f64).ln()).collect();
        assert!((inverse_log_extrapolation(&ns, &v) - 0.5).abs() < 1e-12);
    }

    fn random_matrix(d: usize, entries: &[(f64, f64)]) -> CMat {
        CMat::from_fn(d, d, |r, c| {
            let (a, b) = entries[r * d + c];
            Complex64::new(a, b)
        })
    }

    proptest! {
        #[test]
        fn hat_k_spectrum_is_plus_minus_svd(
            d in 1usize..=8,
            entries in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 64),
        ) {
            let k = random_matrix(d, &entries);
            let (_, e) = block_hat_k(&k).unwrap();
            let (_, s, _) = svd(&k).unwrap();
            let mut expected: Vec<f64> = s.iter().map(|v| -v).chain(s.iter().copied()).collect();
            expected.sort_by(f64::total_cmp);
            for (a, b) in e.iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            let basis = hat_k_eigenvectors(&k).unwrap();
            prop_assert!(basis.vectors.iter().all(|v| v.residual < 1e-10));
        }

        #[test]
        fn bands_invariant_under_unimodular_scaling(
            kappa in 0.1f64..5.0,
            angle in 0.0f64..std::f64::consts::TAU,
        ) {
            let base = PiecewiseSymbol::circle_sawtooth(1, vec![SymbolJump { location: 1.0, k: scalar_matrix(kappa) }], None, "a").unwrap();
            let rotated = PiecewiseSymbol::circle_sawtooth(1, vec![SymbolJump { location: 1.0, k: scalar(Complex64::from_polar(kappa, angle)) }], None, "b").unwrap();
            let a = predict_bands(&base).unwrap();
            let b = predict_bands(&rotated).unwrap();
            prop_assert!((a.max_half_width() - b.max_half_width()).abs() < 1e-12);
        }

        #[test]
        fn truncation_spectrum_is_symmetric(angle in 0.1f64..6.0, kappa in 0.2f64..3.0) {
            let s = saw_symbol(kappa, angle);
            let t = assemble_sho_circle(&s, 12).unwrap();
            let e = t.dense_eigenvalues().unwrap();
            prop_assert!(crate::linalg::reflection_defect(&e) < 1e-10);
            prop_assert!(crate::linalg::hermitian_defect(&t.to_dense()) == 0.0);
        }
    }
}

//! `D = theta(H) - theta(H0)` for the lattice pair on a Dirichlet box, computed
//! by eigendecomposition, and comparison of its spectrum with the bands
//! `a = |kappa| |sigma - 1| / 2` predicted from the scattering matrix at the
//! jump points of `theta`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, sym_eigen, sym_eigenvalues, CMat, RMat};
use crate::scattering1d::{LatticeModel, ScatteringData};
use crate::sho::{Band, EvolutionProbe, SpectralBands};

/// Distance below which an eigenvalue counts as sitting on a jump point.
pub const COLLISION_TOL: f64 = 1e-12;

/// Largest random shift applied to a jump point that collides with an eigenvalue.
pub const MAX_NUDGE: f64 = 1e-8;

/// Margin beyond the largest predicted half-width for counting stray eigenvalues.
pub const OUTSIDE_MARGIN: f64 = 0.05;

/// A jump of `theta` at `lambda` of size `kappa = theta(lambda + 0) - theta(lambda - 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaJump {
    pub lambda: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaBase {
    /// no continuous part beyond the interpolation between the limits
    Step,
    /// adds `exp(-lambda^2)`
    Smooth,
    /// adds `(tanh(4 (lambda + 1)) - tanh(4 (lambda - 1))) / 2`
    TanhWindow,
}

impl ThetaBase {
    fn eval(self, x: f64) -> f64 {
        match self {
            ThetaBase::Step => 0.0,
            ThetaBase::Smooth => (-x * x).exp(),
            ThetaBase::TanhWindow => 0.5 * ((4.0 * (x + 1.0)).tanh() - (4.0 * (x - 1.0)).tanh()),
        }
    }
}

/// JSON description of `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSpec {
    pub jumps: Vec<ThetaJump>,
    pub base: ThetaBase,
    /// `[theta(-inf), theta(+inf)]`
    pub limits: [f64; 2],
}

/// A real function, continuous apart from finitely many jumps.
///
/// `theta(x) = c(x) + sum_l kappa_l [x > lambda_l]`; at a jump point the
/// right-continuous value is taken.
#[derive(Clone)]
pub struct StepFunction {
    continuous: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    jumps: Vec<ThetaJump>,
    /// exponent of the logarithmic modulus of continuity at the jumps;
    /// `None` when the continuous part is Holder
    pub log_holder_exponent: Option<f64>,
}

impl std::fmt::Debug for StepFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StepFunction")
            .field("jumps", &self.jumps)
            .finish()
    }
}

impl StepFunction {
    pub fn new(
        continuous: impl Fn(f64) -> f64 + Send + Sync + 'static,
        jumps: Vec<ThetaJump>,
    ) -> Result<Self> {
        for (i, j) in jumps.iter().enumerate() {
            if j.kappa == 0.0 || !j.kappa.is_finite() {
                return Err(Error::config(format!("jumps[{i}].kappa"), "must be nonzero and finite"));
            }
            if !j.lambda.is_finite() {
                return Err(Error::config(format!("jumps[{i}].lambda"), "must be finite"));
            }
        }
        Ok(Self {
            continuous: Arc::new(continuous),
            jumps,
            log_holder_exponent: None,
        })
    }

    /// Unit step at `lambda0`.
    pub fn unit_step(lambda0: f64) -> Self {
        Self::new(|_| 0.0, vec![ThetaJump { lambda: lambda0, kappa: 1.0 }]).expect("valid step")
    }

    pub fn continuous_only(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(f, Vec::new()).expect("no jumps")
    }

    pub fn jumps(&self) -> &[ThetaJump] {
        &self.jumps
    }

    pub fn eval(&self, x: f64) -> f64 {
        let steps: f64 = self
            .jumps
            .iter()
            .filter(|j| x > j.lambda)
            .map(|j| j.kappa)
            .sum();
        (self.continuous)(x) + steps
    }

    /// Copy with jump points replaced.
    pub fn with_jump_points(&self, points: &[f64]) -> Self {
        let mut out = self.clone();
        for (j, p) in out.jumps.iter_mut().zip(points) {
            j.lambda = *p;
        }
        out
    }
}

impl ThetaSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, j) in self.jumps.iter().enumerate() {
            if !(j.lambda > -2.0 && j.lambda < 2.0) {
                return Err(Error::config(
                    format!("jumps[{i}].lambda"),
                    format!("{} is outside (-2, 2)", j.lambda),
                ));
            }
            if j.kappa == 0.0 || !j.kappa.is_finite() {
                return Err(Error::config(format!("jumps[{i}].kappa"), "must be nonzero"));
            }
        }
        if self.limits.iter().any(|l| !l.is_finite()) {
            return Err(Error::config("limits", "must be finite"));
        }
        Ok(())
    }

    /// `theta(x) = base(x) + l_- + (l_+ - l_- - sum kappa) (1 + tanh x) / 2 + sum kappa_l [x > lambda_l]`.
    pub fn build(&self) -> Result<StepFunction> {
        self.validate()?;
        let base = self.base;
        let [lo, hi] = self.limits;
        let total: f64 = self.jumps.iter().map(|j| j.kappa).sum();
        let ramp = hi - lo - total;
        StepFunction::new(
            move |x| base.eval(x) + lo + ramp * 0.5 * (1.0 + x.tanh()),
            self.jumps.clone(),
        )
    }
}

/// Dirichlet box of `n` sites with the model's site 0 at index `n / 2`.
#[derive(Debug, Clone)]
pub struct BoxPair {
    pub n: usize,
    pub h0: RMat,
    pub h: RMat,
}

impl BoxPair {
    pub fn new(model: &LatticeModel, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("box", "need at least 2 sites"));
        }
        let center = (n / 2) as i64;
        let h0 = RMat::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
        let mut h = h0.clone();
        for (site, v) in model.potential() {
            let idx = center + site;
            if idx < 0 || idx >= n as i64 {
                return Err(Error::config("box", format!("site {site} lies outside a box of {n}")));
            }
            h[(idx as usize, idx as usize)] += v;
        }
        Ok(Self { n, h0, h })
    }
}

/// Eigendecomposition `A = U diag(values) U^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub values: Vec<f64>,
    pub vectors: RMat,
}

impl SpectralData {
    pub fn new(a: &RMat) -> Result<Self> {
        let (values, vectors) = sym_eigen(a)?;
        Ok(Self { values, vectors })
    }

    fn check_collisions(&self, theta: &StepFunction) -> Result<()> {
        for j in theta.jumps() {
            if let Some(e) = self
                .values
                .iter()
                .find(|e| (*e - j.lambda).abs() < COLLISION_TOL)
            {
                return Err(Error::JumpCollision {
                    jump: j.lambda,
                    eigenvalue: *e,
                });
            }
        }
        Ok(())
    }

    /// `U theta(Lambda) U^T`.
    pub fn apply(&self, theta: &StepFunction) -> Result<RMat> {
        self.check_collisions(theta)?;
        let n = self.values.len();
        let scaled = RMat::from_fn(n, n, |i, k| self.vectors[(i, k)] * theta.eval(self.values[k]));
        Ok(&scaled * self.vectors.transpose())
    }
}

/// `theta(A)` by eigendecomposition.
pub fn functional_calculus(a: &RMat, theta: &StepFunction) -> Result<RMat> {
    SpectralData::new(a)?.apply(theta)
}

/// `D` together with the jump points actually used.
#[derive(Debug, Clone)]
pub struct DthetaResult {
    pub matrix: RMat,
    pub jump_points: Vec<f64>,
    pub nudged: bool,
}

/// `theta(H) - theta(H0)`; jump points that collide with an eigenvalue of
/// either operator are shifted by a seeded random offset of at most [`MAX_NUDGE`].
pub fn dtheta_matrix(pair: &BoxPair, theta: &StepFunction, seed: u64) -> Result<DthetaResult> {
    let h = SpectralData::new(&pair.h)?;
    let h0 = SpectralData::new(&pair.h0)?;
    dtheta_from_spectra(&h, &h0, theta, seed)
}

pub fn dtheta_from_spectra(
    h: &SpectralData,
    h0: &SpectralData,
    theta: &StepFunction,
    seed: u64,
) -> Result<DthetaResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<f64> = theta.jumps().iter().map(|j| j.lambda).collect();
    let mut nudged = false;
    for p in points.iter_mut() {
        let collides = |x: f64| {
            h.values
                .iter()
                .chain(&h0.values)
                .any(|e| (e - x).abs() < COLLISION_TOL)
        };
        let mut tries = 0;
        while collides(*p) {
            *p += rng.random_range(-MAX_NUDGE..MAX_NUDGE);
            nudged = true;
            tries += 1;
            if tries > 100 {
                return Err(Error::JumpCollision {
                    jump: *p,
                    eigenvalue: *p,
                });
            }
        }
    }
    let theta = theta.with_jump_points(&points);
    let matrix = h.apply(&theta)? - h0.apply(&theta)?;
    Ok(DthetaResult {
        matrix,
        jump_points: points,
        nudged,
    })
}

/// Half-widths `|kappa_l| |sigma_n(lambda_l) - 1| / 2`; `scat[l]` belongs to the `l`-th jump.
pub fn band_prediction(theta: &StepFunction, scat: &[ScatteringData]) -> Result<SpectralBands> {
    if scat.len() != theta.jumps().len() {
        return Err(Error::config(
            "scattering",
            format!("{} jumps but {} scattering matrices", theta.jumps().len(), scat.len()),
        ));
    }
    let widths = theta.jumps().iter().zip(scat).flat_map(|(j, d)| {
        d.sigma_distances()
            .into_iter()
            .map(move |s| 0.5 * j.kappa.abs() * s)
    });
    Ok(SpectralBands::from_half_widths(widths))
}

/// `K = kappa (S(lambda_l) - I)`.
pub fn model_jump_operator(kappa: f64, scat: &ScatteringData) -> CMat {
    CMat::from_fn(2, 2, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        (scat.s[i][j] - id) * kappa
    })
}

/// `s_n(K) / 2` for the model jump operators of all jumps.
pub fn model_half_widths(theta: &StepFunction, scat: &[ScatteringData]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (j, d) in theta.jumps().iter().zip(scat) {
        let (_, s, _) = svd(&model_jump_operator(j.kappa, d))?;
        out.extend(s.into_iter().map(|v| v / 2.0));
    }
    Ok(out)
}

/// Eigenvalue statistics of one truncation against the predicted bands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FillingReport {
    pub n: usize,
    pub max_abs: f64,
    pub predicted_max: f64,
    /// `max_abs / predicted_max`
    pub edge_ratio: f64,
    /// eigenvalues with `|e| > predicted_max + OUTSIDE_MARGIN`
    pub outside_count: usize,
    pub outside_max: f64,
    /// for each band: eigenvalue counts in ten equal subintervals of `[-a, a]`
    pub band_counts: Vec<(Band, Vec<usize>)>,
    /// eigenvalues above [`crate::AC_THRESHOLD`] in modulus
    pub nonzero_count: usize,
}

pub fn band_filling_report(eigs: &[f64], bands: &SpectralBands, n: usize) -> FillingReport {
    let max_abs = eigs.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let predicted_max = bands.max_half_width();
    let limit = predicted_max + OUTSIDE_MARGIN;
    let outside: Vec<f64> = eigs.iter().map(|e| e.abs()).filter(|e| *e > limit).collect();
    let band_counts = bands
        .entries
        .iter()
        .map(|b| {
            let a = b.half_width;
            let counts = (0..10)
                .map(|i| {
                    let lo = -a + 0.2 * a * i as f64;
                    let hi = lo + 0.2 * a;
                    eigs.iter().filter(|e| **e >= lo && **e < hi).count()
                })
                .collect();
            (*b, counts)
        })
        .collect();
    FillingReport {
        n,
        max_abs,
        predicted_max,
        edge_ratio: if predicted_max > 0.0 { max_abs / predicted_max } else { 0.0 },
        outside_count: outside.len(),
        outside_max: outside.iter().copied().fold(0.0, f64::max),
        band_counts,
        nonzero_count: eigs.iter().filter(|e| e.abs() > crate::AC_THRESHOLD).count(),
    }
}

/// Trend of [`FillingReport`]s along a ladder of box sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderTrend {
    pub max_abs_increasing: bool,
    pub outside_non_increasing: bool,
}

pub fn ladder_trend(reports: &[FillingReport]) -> LadderTrend {
    LadderTrend {
        max_abs_increasing: reports.windows(2).all(|w| w[1].max_abs > w[0].max_abs),
        outside_non_increasing: reports
            .windows(2)
            .all(|w| w[1].outside_count <= w[0].outside_count),
    }
}

/// Eigenvalues of `D` for a box of size `n`.
pub fn dtheta_eigenvalues(model: &LatticeModel, theta: &StepFunction, n: usize, seed: u64) -> Result<Vec<f64>> {
    let pair = BoxPair::new(model, n)?;
    let d = dtheta_matrix(&pair, theta, seed)?;
    sym_eigenvalues(&d.matrix)
}

/// Mass of `E_{H0}(window) e^{-i D t} f` over time for several windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowMass {
    pub window: (f64, f64),
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    /// `(t1, mean mass over [t1, 2 t1])`
    pub averages: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub initial_norm_sqr: f64,
    pub windows: Vec<WindowMass>,
    /// `theta` has no jumps: `D` is compact and no concentration is claimed
    pub continuous_case: bool,
}

fn to_complex(a: &RMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| Complex64::new(a[(i, j)], 0.0))
}

/// Evolves the numerically a.c. part of `f` (`|eig(D)| > AC_THRESHOLD`) under
/// `D` and records its mass in spectral windows of `H0`.
pub fn evolution_localization(
    pair: &BoxPair,
    theta: &StepFunction,
    f: &[f64],
    windows: &[(f64, f64)],
    times: &[f64],
    horizons: &[f64],
    seed: u64,
) -> Result<LocalizationReport> {
    let h0 = SpectralData::new(&pair.h0)?;
    let h = SpectralData::new(&pair.h)?;
    let d = dtheta_from_spectra(&h, &h0, theta, seed)?;
    let dspec = SpectralData::new(&d.matrix)?;
    let vecs = to_complex(&dspec.vectors);
    let fc: Vec<Complex64> = f.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    let mut out = Vec::new();
    let mut initial = 0.0;
    for &(lo, hi) in windows {
        let rows: Vec<usize> = (0..h0.values.len())
            .filter(|&k| h0.values[k] >= lo && h0.values[k] <= hi)
            .collect();
        let g = CMat::from_fn(rows.len(), pair.n, |r, c| {
            Complex64::new(h0.vectors[(c, rows[r])], 0.0)
        });
        let probe = EvolutionProbe::new(&dspec.values, &vecs, &g, &fc, crate::AC_THRESHOLD);
        initial = probe.initial_norm_sqr();
        out.push(WindowMass {
            window: (lo, hi),
            times: times.to_vec(),
            mass: times.iter().map(|&t| probe.mass(t)).collect(),
            averages: horizons
                .iter()
                .map(|&t1| (t1, probe.averaged_mass(t1, crate::sho::AVERAGE_SAMPLES)))
                .collect(),
        });
    }
    Ok(LocalizationReport {
        initial_norm_sqr: initial,
        windows: out,
        continuous_case: theta.jumps().is_empty(),
    })
}

/// Vector of the a.c. part of `D` concentrated away from the jumps: the
/// normalized projection of a site-localized vector onto eigenvectors with
/// `|eig(D)| > AC_THRESHOLD`.
pub fn ac_vector(d: &RMat, site: usize) -> Result<Vec<f64>> {
    let spec = SpectralData::new(d)?;
    let n = d.nrows();
    let mut f = vec![0.0; n];
    for (k, e) in spec.values.iter().enumerate() {
        if e.abs() > crate::AC_THRESHOLD {
            let c = spec.vectors[(site, k)];
            for (i, slot) in f.iter_mut().enumerate() {
                *slot += c * spec.vectors[(i, k)];
            }
        }
    }
    let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Linalg("a.c. projection of the probe vector vanishes".into()));
    }
    Ok(f.into_iter().map(|x| x / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering1d::smatrix;
    use num_complex::Complex64;

    fn single_site() -> LatticeModel {
        LatticeModel::single_site(2.0)
    }

    #[test]
    fn identity_function_recovers_potential() {
        let pair = BoxPair::new(&single_site(), 40).unwrap();
        let id = StepFunction::continuous_only(|x| x);
        let d = dtheta_matrix(&pair, &id, 0).unwrap().matrix;
        let v = &pair.h - &pair.h0;
        assert!((&d - &v).norm_max() < 1e-12);
    }

    #[test]
    fn constant_theta_gives_zero() {
        let pair = BoxPair::new(&single_site(), 30).unwrap();
        let c = StepFunction::continuous_only(|_| 0.7);
        assert!(dtheta_matrix(&pair, &c, 0).unwrap().matrix.norm_max() < 1e-12);
    }

    #[test]
    fn indicator_on_diagonal_matrix() {
        let a = RMat::from_fn(2, 2, |i, j| if i == j { if i == 0 { -1.0 } else { 1.0 } } else { 0.0 });
        let step = StepFunction::unit_step(0.0);
        let t = functional_calculus(&a, &step).unwrap();
        assert!(t[(0, 0)].abs() < 1e-15 && (t[(1, 1)] - 1.0).abs() < 1e-15 && t[(0, 1)].abs() < 1e-15);
        let at_jump = StepFunction::unit_step(1.0);
        assert!(matches!(functional_calculus(&a, &at_jump), Err(Error::JumpCollision { .. })));
    }

    #[test]
    fn collisions_are_nudged() {
        // H0 on an odd box has the eigenvalue 0
        let pair = BoxPair::new(&LatticeModel::free(), 9).unwrap();
        let r = dtheta_matrix(&pair, &StepFunction::unit_step(0.0), 7).unwrap();
        assert!(r.nudged);
        assert!(r.jump_points[0].abs() <= MAX_NUDGE && r.jump_points[0] != 0.0);
        assert!(r.matrix.norm_max() < 1e-12);
    }

    #[test]
    fn zero_potential_gives_zero() {
        let pair = BoxPair::new(&LatticeModel::free(), 64).unwrap();
        let r = dtheta_matrix(&pair, &StepFunction::unit_step(0.3), 1).unwrap();
        assert!(r.matrix.norm_max() < 1e-12);
        let bands = SpectralBands::default();
        let eigs = sym_eigenvalues(&r.matrix).unwrap();
        let rep = band_filling_report(&eigs, &bands, 64);
        assert_eq!(rep.nonzero_count, 0);
    }

    #[test]
    fn band_prediction_examples() {
        let fake = |sigma: Complex64| ScatteringData {
            lambda: 0.0,
            k: 1.0,
            s: [[sigma, Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]],
            sigmas: [sigma, Complex64::new(1.0, 0.0)],
        };
        let step = |kappa: f64| StepFunction::new(|_| 0.0, vec![ThetaJump { lambda: 0.0, kappa }]).unwrap();
        let b = band_prediction(&step(1.0), &[fake(Complex64::new(-1.0, 0.0))]).unwrap();
        assert_eq!(b.entries, vec![Band { half_width: 1.0, multiplicity: 1 }]);
        let b = band_prediction(&step(1.0), &[fake(Complex64::new(1.0, 0.0))]).unwrap();
        assert!(b.is_empty());
        let b = band_prediction(&step(2.0), &[fake(Complex64::new(0.0, 1.0))]).unwrap();
        assert!((b.max_half_width() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn model_jump_operator_matches_band_formula() {
        let scat = smatrix(&single_site(), 0.0).unwrap();
        let theta = StepFunction::unit_step(0.0);
        let widths = model_half_widths(&theta, std::slice::from_ref(&scat)).unwrap();
        let bands = band_prediction(&theta, std::slice::from_ref(&scat)).unwrap();
        assert_eq!(bands.entries.len(), 1);
        assert!((widths[0] - bands.max_half_width()).abs() < 1e-12);
        assert!((widths[0] - 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert!(widths[1] < 1e-12);
        let free = smatrix(&LatticeModel::free(), 0.0).unwrap();
        assert_eq!(model_jump_operator(1.0, &free).norm_max(), 0.0);
    }

    #[test]
    fn smooth_theta_is_bounded_and_compact_like() {
        let theta = ThetaSpec { jumps: vec![], base: ThetaBase::Smooth, limits: [0.0, 0.0] }
            .build()
            .unwrap();
        let tops: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| {
                let e = dtheta_eigenvalues(&single_site(), &theta, n, 0).unwrap();
                let mut a: Vec<f64> = e.iter().map(|x| x.abs()).collect();
                a.sort_by(|x, y| y.total_cmp(x));
                assert!(a[0] <= 2.0 + 1e-12);
                a[4]
            })
            .collect();
        // singular values of a compact D settle as the box grows
        assert!(tops.windows(2).all(|w| (w[1] - w[0]).abs() < 1e-10), "{tops:?}");
    }

    #[test]
    fn theta_spec_validation() {
        let bad = ThetaSpec { jumps: vec![ThetaJump { lambda: 2.5, kappa: 1.0 }], base: ThetaBase::Step, limits: [0.0, 1.0] };
        match bad.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "jumps[0].lambda"),
            other => panic!("{other:?}"),
        }
        let ok = ThetaSpec { jumps: vec![ThetaJump { lambda: 0.0, kappa: 1.0 }], base: ThetaBase::Step, limits: [0.0, 1.0] };
        let theta = ok.build().unwrap();
        assert_eq!(theta.eval(-1.0), 0.0);
        assert_eq!(theta.eval(1.0), 1.0);
        assert!((theta.eval(-50.0) - 0.0).abs() < 1e-12 && (theta.eval(50.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evolution_conserves_mass_at_time_zero() {
        let pair = BoxPair::new(&single_site(), 64).unwrap();
        let theta = StepFunction::unit_step(0.0);
        let d = dtheta_matrix(&pair, &theta, 0).unwrap();
        let f = ac_vector(&d.matrix, 32).unwrap();
        let rep = evolution_localization(&pair, &theta, &f, &[(-3.0, 3.0)], &[0.0, 2.0], &[], 0).unwrap();
        let w = &rep.windows[0];
        assert!((w.mass[0] - rep.initial_norm_sqr).abs() < 1e-10);
        assert!((w.mass[1] - rep.initial_norm_sqr).abs() < 1e-10);
        assert!((rep.initial_norm_sqr - 1.0).abs() < 1e-10);
    }

    proptest::proptest! {
        #[test]
        fn step_difference_is_symmetric_and_bounded_by_jump(
            v in -3.0f64..3.0,
            site in -4i64..4,
            lambda in -1.9f64..1.9,
            kappa in -2.0f64..2.0,
        ) {
            let model = LatticeModel::new(vec![crate::scattering1d::Site { n: site, v }]).unwrap();
            let pair = BoxPair::new(&model, 24).unwrap();
            let theta = StepFunction::new(|_| 0.0, vec![ThetaJump { lambda, kappa }]).unwrap();
            let d = dtheta_matrix(&pair, &theta, 1).unwrap().matrix;
            let asym = (0..24)
                .flat_map(|i| (0..24).map(move |j| (i, j)))
                .map(|(i, j)| (d[(i, j)] - d[(j, i)]).abs())
                .fold(0.0, f64::max);
            proptest::prop_assert!(asym < 1e-12);
            let top = sym_eigenvalues(&d).unwrap().iter().map(|e| e.abs()).fold(0.0, f64::max);
            proptest::prop_assert!(top <= kappa.abs() + 1e-10);
        }
    }
}

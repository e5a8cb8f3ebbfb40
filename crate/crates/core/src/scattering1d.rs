//! Scattering for the lattice pair `H0 u(n) = u(n + 1) + u(n - 1)`, `H = H0 + V`
//! with a finitely supported potential.
//!
//! At energy `lambda = 2 cos k`, `k in (0, pi)`, the right-moving plane wave is
//! `e^{-i k n}` (group velocity `-d lambda / dk > 0`). Transfer matrices act on
//! the amplitudes `(right-moving, left-moving)`. The scattering matrix is
//! `S = [[t, r'], [r, t]]` with columns indexed by the incoming channel (left,
//! right) and rows by the outgoing channel (right, left); its eigenvalues do
//! not depend on this labeling.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energies with `sin k` below this are rejected as band edges.
pub const BAND_EDGE_GUARD: f64 = 1e-6;

type C2 = [[Complex64; 2]; 2];

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn mul(a: &C2, b: &C2) -> C2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// One site of the JSON model description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub n: i64,
    pub v: f64,
}

/// Lattice potential with finite support.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeModel {
    pub sites: Vec<Site>,
}

impl LatticeModel {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        let m = Self { sites };
        m.validate()?;
        Ok(m)
    }

    pub fn single_site(v: f64) -> Self {
        Self {
            sites: vec![Site { n: 0, v }],
        }
    }

    pub fn free() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, s) in self.sites.iter().enumerate() {
            if !s.v.is_finite() {
                return Err(Error::config(format!("sites[{i}].v"), "must be finite"));
            }
            if !seen.insert(s.n) {
                return Err(Error::config(format!("sites[{i}].n"), "duplicate site"));
            }
        }
        Ok(())
    }

    /// Nonzero potential values by site, in increasing site order.
    pub fn potential(&self) -> BTreeMap<i64, f64> {
        self.sites
            .iter()
            .filter(|s| s.v != 0.0)
            .map(|s| (s.n, s.v))
            .collect()
    }

    /// `v(n) = v(-n)` for all sites.
    pub fn is_parity_symmetric(&self) -> bool {
        let p = self.potential();
        p.iter().all(|(n, v)| p.get(&-n) == Some(v))
    }
}

/// `k in (0, pi)` with `lambda = 2 cos k`, checked against the band-edge guard.
pub fn momentum(lambda: f64) -> Result<f64> {
    if !(lambda > -2.0 && lambda < 2.0) {
        return Err(Error::Domain {
            what: "lattice energy",
            value: lambda,
            expected: "-2 < lambda < 2",
        });
    }
    let k = (lambda / 2.0).acos();
    let sin_k = k.sin();
    if sin_k < BAND_EDGE_GUARD {
        return Err(Error::BandEdge { lambda, sin_k });
    }
    Ok(k)
}

/// Transfer matrix in the plane-wave basis `(e^{-ikn}, e^{ikn})`, mapping
/// amplitudes left of the support to amplitudes right of it. `det = 1`.
pub fn transfer_matrix(model: &LatticeModel, lambda: f64) -> Result<C2> {
    let k = momentum(lambda)?;
    // right-moving wave e^{iqn} with q = -k
    let q = -k;
    let two_i_sin = Complex64::new(0.0, 2.0 * q.sin());
    let mut total = [[ONE, ZERO], [ZERO, ONE]];
    for (&n, &v) in &model.potential() {
        let c = v / two_i_sin;
        let phase = Complex64::from_polar(1.0, 2.0 * q * n as f64);
        // D_n^{-1} M_0 D_n with M_0 = I + c [[-1, -1], [1, 1]], D_n = diag(e^{iqn}, e^{-iqn})
        let step = [[ONE - c, -c / phase], [c * phase, ONE + c]];
        total = mul(&step, &total);
    }
    Ok(total)
}

/// Scattering data at one energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringData {
    pub lambda: f64,
    pub k: f64,
    /// `[[t, r'], [r, t]]`
    pub s: C2,
    /// eigenvalues of `S`, sorted by `|sigma - 1|` descending
    pub sigmas: [Complex64; 2],
}

impl ScatteringData {
    pub fn t(&self) -> Complex64 {
        self.s[0][0]
    }

    pub fn r(&self) -> Complex64 {
        self.s[1][0]
    }

    pub fn r_prime(&self) -> Complex64 {
        self.s[0][1]
    }

    /// Largest entry of `S^* S - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = ZERO;
                for m in 0..2 {
                    acc += self.s[m][i].conj() * self.s[m][j];
                }
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }

    /// `|sigma_n - 1|`, in the stored order.
    pub fn sigma_distances(&self) -> [f64; 2] {
        self.sigmas.map(|s| (s - ONE).norm())
    }
}

fn eigenvalues_2x2(m: &C2) -> [Complex64; 2] {
    let half_trace = (m[0][0] + m[1][1]) / 2.0;
    let disc = ((m[0][0] - m[1][1]) / 2.0).powi(2) + m[0][1] * m[1][0];
    let root = disc.sqrt();
    [half_trace + root, half_trace - root]
}

/// Scattering matrix from the transfer matrix `M`: `t = t' = 1 / M22`,
/// `r = -M21 / M22`, `r' = M12 / M22`.
pub fn smatrix(model: &LatticeModel, lambda: f64) -> Result<ScatteringData> {
    let k = momentum(lambda)?;
    let m = transfer_matrix(model, lambda)?;
    let m22 = m[1][1];
    let t = ONE / m22;
    let r = -m[1][0] / m22;
    let r_prime = m[0][1] / m22;
    let s = [[t, r_prime], [r, t]];
    let mut sigmas = eigenvalues_2x2(&s);
    sigmas.sort_by(|a, b| (b - ONE).norm().total_cmp(&(a - ONE).norm()));
    Ok(ScatteringData {
        lambda,
        k,
        s,
        sigmas,
    })
}

/// One line of a scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub t: Complex64,
    pub r: Complex64,
    pub sigma1: Complex64,
    pub sigma2: Complex64,
    pub abs_sigma1_minus_1: f64,
    pub abs_sigma2_minus_1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaScan {
    pub rows: Vec<ScanRow>,
    /// largest `|sigma_n(lambda_{i+1}) - sigma_n(lambda_i)|`
    pub max_step: f64,
    /// fitted `(C, gamma)` in `max step <= C h^gamma`, from grids `h` and `2h`
    pub holder_fit: Option<(f64, f64)>,
    /// energies within 0.05 of a band edge, where `sigma` is not asserted
    pub edge_flags: Vec<f64>,
}

fn max_sigma_step(rows: &[&ScanRow]) -> f64 {
    rows.windows(2)
        .map(|w| {
            let a = (w[1].sigma1 - w[0].sigma1).norm();
            let b = (w[1].sigma2 - w[0].sigma2).norm();
            a.max(b)
        })
        .fold(0.0, f64::max)
}

/// Scattering eigenvalues along a grid of energies inside `(-2, 2)`.
pub fn sigma_scan(model: &LatticeModel, lambdas: &[f64]) -> Result<SigmaScan> {
    let rows: Vec<ScanRow> = lambdas
        .par_iter()
        .map(|&l| {
            smatrix(model, l).map(|d| {
                let [a, b] = d.sigma_distances();
                ScanRow {
                    lambda: l,
                    t: d.t(),
                    r: d.r(),
                    sigma1: d.sigmas[0],
                    sigma2: d.sigmas[1],
                    abs_sigma1_minus_1: a,
                    abs_sigma2_minus_1: b,
                }
            })
        })
        .collect::<Result<_>>()?;
    let all: Vec<&ScanRow> = rows.iter().collect();
    let max_step = max_sigma_step(&all);
    let holder_fit = uniform_step(lambdas).and_then(|h| {
        let coarse: Vec<&ScanRow> = rows.iter().step_by(2).collect();
        let coarse_step = max_sigma_step(&coarse);
        (max_step > 0.0 && coarse_step > 0.0 && coarse.len() > 2).then(|| {
            let gamma = (coarse_step / max_step).log2();
            (max_step / h.powf(gamma), gamma)
        })
    });
    let edge_flags = lambdas
        .iter()
        .copied()
        .filter(|l| 2.0 - l.abs() < 0.05)
        .collect();
    Ok(SigmaScan {
        rows,
        max_step,
        holder_fit,
        edge_flags,
    })
}

fn uniform_step(lambdas: &[f64]) -> Option<f64> {
    if lambdas.len() < 3 {
        return None;
    }
    let h = lambdas[1] - lambdas[0];
    lambdas
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs())
        .then_some(h)
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::config("grid", format!("expected start:stop:step, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (a, b, h) = (nums[0], nums[1], nums[2]);
    if !(h > 0.0) || !(b >= a) {
        return Err(bad());
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + h * i as f64).collect())
}

/// CSV text of a scan with the documented column order.
pub fn scan_csv(scan: &SigmaScan) -> String {
    let mut out = String::from(
        "lambda,t_re,t_im,r_re,r_im,sigma1_re,sigma1_im,sigma2_re,sigma2_im,abs_sigma1_minus_1\n",
    );
    for r in &scan.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.lambda,
            r.t.re,
            r.t.im,
            r.r.re,
            r.r.im,
            r.sigma1.re,
            r.sigma1.im,
            r.sigma2.re,
            r.sigma2.im,
            r.abs_sigma1_minus_1
        ));
    }
    out
}

//! Gauss-Legendre rules and a Filon-type rule for `int g(t) e^{-i lambda t} dt`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes increasing.
#[derive(Debug, Clone)]
pub struct GaussLegendreRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendreRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).expect("nonzero");
        let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(order)
            .as_node_weight_pairs()
            .to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Legendre polynomials `P_0..P_{n-1}` at `x`.
fn legendre_values(x: f64, n: usize, out: &mut Vec<f64>) {
    out.clear();
    if n == 0 {
        return;
    }
    out.push(1.0);
    if n == 1 {
        return;
    }
    out.push(x);
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

/// Spherical Bessel functions `j_0..j_{n-1}` at `w >= 0`.
pub fn spherical_bessel(w: f64, n: usize) -> Vec<f64> {
    let w = w.abs();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if w < 1e-6 {
        // leading terms of the power series
        let mut lead = 1.0;
        for (k, slot) in out.iter_mut().enumerate() {
            let kf = k as f64;
            *slot = lead * (1.0 - w * w / (2.0 * (2.0 * kf + 3.0)));
            lead *= w / (2.0 * kf + 3.0);
        }
        return out;
    }
    let j0 = w.sin() / w;
    if w > n as f64 {
        // upward recurrence is stable for orders below the argument
        out[0] = j0;
        if n > 1 {
            out[1] = w.sin() / (w * w) - w.cos() / w;
        }
        for k in 1..n.saturating_sub(1) {
            out[k + 1] = (2.0 * k as f64 + 1.0) / w * out[k] - out[k - 1];
        }
        return out;
    }
    // Miller's downward recurrence normalized by j_0
    let start = n + 20 + w as usize;
    let mut hi = 0.0f64;
    let mut cur = 1e-300f64;
    let mut buf = vec![0.0; start + 1];
    buf[start] = cur;
    for k in (1..=start).rev() {
        let lower = (2.0 * k as f64 + 1.0) / w * cur - hi;
        hi = cur;
        cur = lower;
        buf[k - 1] = cur;
        if cur.abs() > 1e250 {
            for v in buf[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            hi *= 1e-250;
            cur *= 1e-250;
        }
    }
    let scale = j0 / buf[0];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = buf[k] * scale;
    }
    out
}

/// Filon-type rule on one panel: `int_a^b g(t) e^{-i lambda t} dt` where `g`
/// is replaced by its Legendre interpolant through the Gauss nodes of `rule`.
/// `values` are `g` at the mapped nodes of `rule` on `[a, b]`.
pub fn filon_panel(
    rule: &GaussLegendreRule,
    a: f64,
    b: f64,
    values: &[Complex64],
    lambda: f64,
) -> Complex64 {
    let n = rule.order();
    debug_assert_eq!(values.len(), n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut coef = vec![Complex64::new(0.0, 0.0); n];
    let mut pk = Vec::with_capacity(n);
    for ((x, w), g) in rule.nodes.iter().zip(&rule.weights).zip(values) {
        legendre_values(*x, n, &mut pk);
        for (k, c) in coef.iter_mut().enumerate() {
            *c += g * (w * pk[k]);
        }
    }
    for (k, c) in coef.iter_mut().enumerate() {
        *c *= (2.0 * k as f64 + 1.0) / 2.0;
    }
    let omega = lambda * half;
    let jk = spherical_bessel(omega, n);
    // int_{-1}^{1} P_k(x) e^{-i omega x} dx = 2 (-i)^k j_k(omega) for omega >= 0
    let sign = if omega < 0.0 { -1.0 } else { 1.0 };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut phase = Complex64::new(1.0, 0.0);
    let minus_i = Complex64::new(0.0, -sign);
    for (c, j) in coef.iter().zip(&jk) {
        acc += c * phase * (2.0 * j);
        phase *= minus_i;
    }
    acc * half * Complex64::new(0.0, -lambda * mid).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = GaussLegendreRule::new(8);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-10);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn spherical_bessel_closed_forms() {
        for w in [1e-8, 0.3, 2.0, 7.5, 40.0] {
            let j = spherical_bessel(w, 6);
            let j0 = w.sin() / w;
            let j1 = w.sin() / (w * w) - w.cos() / w;
            let j2 = (3.0 / (w * w) - 1.0) * w.sin() / w - 3.0 * w.cos() / (w * w);
            assert!((j[0] - j0).abs() < 1e-13, "w={w}");
            if w > 1e-3 {
                assert!((j[1] - j1).abs() < 1e-12, "w={w}");
                assert!((j[2] - j2).abs() < 1e-11, "w={w}");
            }
        }
    }

    #[test]
    fn filon_matches_exact_oscillatory_integral() {
        // int_0^3 t^2 e^{-i l t} dt, exact by parts
        let rule = GaussLegendreRule::new(12);
        for lambda in [0.0, 0.01, 1.0, 7.0, -5.0] {
            let vals: Vec<Complex64> = rule
                .mapped(0.0, 3.0)
                .map(|(t, _)| Complex64::new(t * t, 0.0))
                .collect();
            let got = filon_panel(&rule, 0.0, 3.0, &vals, lambda);
            let exact = if lambda.abs() < 1.0 {
                // power series: sum_k (-i l)^k / k! * 3^{k+3} / (k + 3)
                let mut sum = Complex64::new(0.0, 0.0);
                let mut term = Complex64::new(27.0, 0.0);
                for k in 0..200 {
                    sum += term / (k as f64 + 3.0);
                    term *= Complex64::new(0.0, -lambda * 3.0) / (k as f64 + 1.0);
                }
                sum
            } else {
                // antiderivative e^{-ilt} (-t^2/(il) - 2t/(il)^2 - 2/(il)^3)
                let il = Complex64::new(0.0, lambda);
                let f = |t: f64| {
                    (-il * t).exp() * (-(t * t) / il - 2.0 * t / (il * il) - 2.0 / (il * il * il))
                };
                f(3.0) - f(0.0)
            };
            assert!((got - exact).norm() < 1e-11, "lambda={lambda}: {got} vs {exact}");
        }
    }
}

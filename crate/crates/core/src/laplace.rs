//! Forward Laplace quadrature and inversion along a vertical line.

use crate::error::{Error, Result};
use crate::linalg::{re, CVec};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Points per Gauss–Legendre panel.
pub const GL_POINTS: usize = 16;
/// Largest node count a configuration may request.
pub const MAX_NODES: usize = 40_000_000;

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on [a, b] with `panels` equal panels.
pub fn composite_rule(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(GL_POINTS);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * GL_POINTS);
    let mut weights = Vec::with_capacity(panels * GL_POINTS);
    for k in 0..panels {
        let lo = a + k as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

#[derive(Clone, Debug)]
pub struct LaplaceValue {
    pub value: CVec,
    /// e^{(ω − Re λ) T}, the relative size of the neglected tail.
    pub tail_bound: f64,
}

/// Samples of g on a composite Gauss–Legendre grid over [0, T], reusable
/// for many λ.
pub struct LaplaceSampler {
    horizon: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<CVec>,
}

impl LaplaceSampler {
    pub fn new<G: Fn(f64) -> CVec + Sync>(g: G, horizon: f64, panels: usize) -> Result<Self> {
        if !(horizon > 0.0) || panels == 0 {
            return Err(Error::InvalidInput("need T > 0 and at least one panel".into()));
        }
        let (nodes, weights) = composite_rule(0.0, horizon, panels);
        let values: Vec<CVec> = nodes.par_iter().map(|&t| g(t)).collect();
        Ok(LaplaceSampler { horizon, nodes, weights, values })
    }

    /// `∫₀^T e^{−λt} g(t) dt`; fails when `e^{(ω − Re λ)T} > 1e−10`.
    pub fn transform(&self, lambda: Complex64, omega: f64) -> Result<LaplaceValue> {
        let tail_bound = ((omega - lambda.re) * self.horizon).exp();
        if !(tail_bound <= 1e-10) {
            return Err(Error::TailTooLarge(tail_bound));
        }
        let dim = self.values.first().map(|v| v.len()).unwrap_or(0);
        let mut acc = CVec::zeros(dim);
        for ((t, w), v) in self.nodes.iter().zip(&self.weights).zip(&self.values) {
            acc += v * ((-lambda * t).exp() * w);
        }
        Ok(LaplaceValue { value: acc, tail_bound })
    }
}

/// Panels for resolving `e^{−λt}g(t)` on [0, T] when g varies on unit scale.
pub fn default_panels(horizon: f64, lambda_scale: f64) -> usize {
    ((horizon * (1.0 + lambda_scale) / 2.0).ceil() as usize).max(32)
}

pub fn forward_laplace<G: Fn(f64) -> CVec + Sync>(g: G, lambda: Complex64, horizon: f64, panels: usize, omega: f64) -> Result<LaplaceValue> {
    LaplaceSampler::new(g, horizon, panels)?.transform(lambda, omega)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourConfig {
    pub sigma: f64,
    pub half_height: f64,
    /// Number of trapezoid intervals on [−Λ, Λ]; even.
    pub n_nodes: usize,
    /// Forward-transform horizon used by round-trip checks.
    pub horizon: f64,
}

impl ContourConfig {
    pub fn new(sigma: f64, half_height: f64, n_nodes: usize, horizon: f64) -> Result<Self> {
        if n_nodes == 0 || n_nodes % 2 == 1 || n_nodes > MAX_NODES {
            return Err(Error::InvalidInput(format!("n_nodes must be even and in (0, {MAX_NODES}], got {n_nodes}")));
        }
        if !(half_height > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput("need Λ > 0 and finite σ".into()));
        }
        Ok(ContourConfig { sigma, half_height, n_nodes, horizon })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_height / self.n_nodes as f64
    }

    /// Node spacing small enough for inversion at times up to `t_max`.
    pub fn resolves(&self, t_max: f64) -> bool {
        self.spacing() <= PI / (4.0 * t_max.max(f64::MIN_POSITIVE)) * (1.0 + 1e-12)
    }

    /// Configuration for F with `|F(λ)| ≈ scale/|λ|^decay` on the line.
    ///
    /// `gap` is the distance from the line to the nearest singularity on
    /// either side; it sets the aliasing period. `t_min` may be 0 when
    /// `decay ≥ 2`.
    pub fn for_decay(sigma: f64, decay: usize, scale: f64, gap: f64, t_min: f64, t_max: f64, tol: f64) -> Result<Self> {
        if decay == 0 {
            return Err(Error::InvalidInput("F must decay at least like 1/|λ|".into()));
        }
        let growth = scale.max(f64::MIN_POSITIVE) * (sigma * t_max).exp().max((sigma * t_min).exp());
        let d = decay as f64;
        let mut lambda = f64::INFINITY;
        if t_min > 0.0 {
            // oscillatory tail: ∫_Λ^∞ e^{iyt} y^{-d} dy ~ Λ^{-d}/t
            lambda = lambda.min((growth / (PI * t_min * tol)).powf(1.0 / d));
        }
        if decay >= 2 {
            lambda = lambda.min((growth / (PI * (d - 1.0) * tol)).powf(1.0 / (d - 1.0)));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidInput("decay 1 requires t_min > 0".into()));
        }
        let lambda = lambda.max(10.0);
        // aliasing period 2π/h must exceed t_max by enough that the alias of a pole of
        // order `decay`, scale·P^{d−1}/(d−1)!·e^{-gap·(P − t)}, is below tol
        let gap = gap.max(1e-3);
        let log_fact: f64 = (1..decay).map(|j| (j as f64).ln()).sum();
        let mut period = (8.0 * t_max).max(t_max + (1.0 / tol).ln() / gap);
        for _ in 0..8 {
            let excess = (scale.max(1.0) / tol).ln() + (d - 1.0) * period.ln() - log_fact;
            period = period.max(t_max + excess.max(0.0) / gap);
        }
        let h = 2.0 * PI / period;
        let mut n = (2.0 * lambda / h).ceil() as usize;
        n += n % 2;
        ContourConfig::new(sigma, lambda, n.max(2), t_max)
    }
}

impl ContourConfig {
    /// Refine the node spacing until the aliasing period `2π/h` is at least `period`.
    pub fn with_min_period(self, period: f64) -> Result<Self> {
        if 2.0 * PI / self.spacing() >= period {
            return Ok(self);
        }
        let mut n = (self.half_height * period / PI).ceil() as usize;
        n += n % 2;
        ContourConfig::new(self.sigma, self.half_height, n, self.horizon)
    }
}

/// Values of F at the trapezoid nodes of a configuration.
pub struct ContourSamples {
    cfg: ContourConfig,
    nodes: Vec<Complex64>,
    values: Vec<CVec>,
}

impl ContourSamples {
    pub fn sample<F: Fn(Complex64) -> CVec + Sync>(f: F, cfg: ContourConfig) -> Result<Self> {
        let h = cfg.spacing();
        let k = cfg.n_nodes / 2;
        let nodes: Vec<Complex64> = (0..=cfg.n_nodes).map(|j| Complex64::new(cfg.sigma, (j as f64 - k as f64) * h)).collect();
        let values: Vec<CVec> = nodes
            .par_iter()
            .map(|&l| {
                let v = f(l);
                if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteSample(l))
                }
            })
            .collect::<Result<_>>()?;
        Ok(ContourSamples { cfg, nodes, values })
    }

    pub fn config(&self) -> &ContourConfig {
        &self.cfg
    }

    /// `(1/2πi) ∫ e^{λt} λ^k F(λ) dλ` by the trapezoid rule (k = −1 gives
    /// the antiderivative vanishing at 0, since σ > 0); symmetric
    /// node pairs are summed from the ends inwards in a fixed order.
    pub fn invert_weighted(&self, t: f64, k: i32) -> CVec {
        let h = self.cfg.spacing();
        let n = self.cfg.n_nodes;
        let dim = self.values[0].len();
        let term = |j: usize| -> CVec {
            let l = self.nodes[j];
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            &self.values[j] * ((l * t).exp() * l.powi(k) * w)
        };
        let mut acc = CVec::zeros(dim);
        for j in 0..n / 2 {
            acc += term(j) + term(n - j);
        }
        acc += term(n / 2);
        acc * re(h / (2.0 * PI))
    }

    pub fn invert(&self, t: f64) -> CVec {
        self.invert_weighted(t, 0)
    }
}

pub fn bromwich_invert<F: Fn(Complex64) -> CVec + Sync>(f: F, t: f64, cfg: ContourConfig) -> Result<CVec> {
    Ok(ContourSamples::sample(f, cfg)?.invert(t))
}

pub fn bromwich_invert_many<F: Fn(Complex64) -> CVec + Sync>(f: F, ts: &[f64], cfg: ContourConfig) -> Result<Vec<CVec>> {
    let s = ContourSamples::sample(f, cfg)?;
    Ok(ts.iter().map(|&t| s.invert(t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(z: Complex64) -> CVec {
        CVec::from_element(1, z)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(GL_POINTS);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn forward_examples() {
        let v = forward_laplace(|t| scalar(re((-t).exp())), re(2.0), 40.0, 64, -1.0).unwrap();
        assert!((v.value[0] - re(1.0 / 3.0)).norm() < 1e-8);
        let g = |t: f64| scalar(re(t - 1.0 + (-t).exp()));
        let v = forward_laplace(g, re(2.0), 40.0, 64, 0.0).unwrap();
        assert!((v.value[0] * 4.0 - re(1.0 / 3.0)).norm() < 1e-6);
        let v = forward_laplace(|_| scalar(re(0.0)), re(2.0), 40.0, 64, 0.0).unwrap();
        assert_eq!(v.value[0], re(0.0));
        assert!(matches!(forward_laplace(|_| scalar(re(1.0)), re(0.1), 40.0, 64, 0.0), Err(Error::TailTooLarge(_))));
    }

    #[test]
    fn invert_simple_pole() {
        let cfg = ContourConfig::for_decay(1.0, 1, 1.0, 2.0, 1.0, 1.0, 1e-7).unwrap();
        let v = bromwich_invert(|l| scalar((l + 1.0).inv()), 1.0, cfg).unwrap();
        assert!((v[0] - re((-1.0f64).exp())).norm() < 1e-6, "{}", v[0]);
    }

    #[test]
    fn invert_double_pole() {
        let cfg = ContourConfig::for_decay(1.0, 2, 1.0, 1.0, 2.0, 2.0, 1e-7).unwrap();
        assert!(cfg.resolves(2.0));
        let v = bromwich_invert(|l| scalar((l * l).inv()), 2.0, cfg).unwrap();
        assert!((v[0] - re(2.0)).norm() < 1e-6, "{}", v[0]);
    }

    #[test]
    fn high_order_pole_near_line() {
        // 6/(λ − a)^4 ↔ t³ e^{at}; the alias carries the polynomial factor
        let a = 0.19;
        let cfg = ContourConfig::for_decay(1.0, 4, 6.0, 1.0 - a, 0.5, 3.0, 1e-9).unwrap();
        let v = bromwich_invert(|l| scalar(6.0 * (l - a).powu(4).inv()), 0.5, cfg).unwrap();
        assert!((v[0] - re(0.125 * (0.5 * a).exp())).norm() < 1e-8, "{}", v[0]);
    }

    #[test]
    fn non_finite_is_reported() {
        let cfg = ContourConfig::new(0.0, 1.0, 4, 1.0).unwrap();
        assert!(matches!(bromwich_invert(|l| scalar(l.inv()), 1.0, cfg), Err(Error::NonFiniteSample(_))));
        assert!(ContourConfig::new(0.0, 1.0, 3, 1.0).is_err());
    }

    #[test]
    fn derivative_weighting() {
        // F = 1/(λ+1)^3 ↔ t² e^{-t}/2; λF ↔ derivative
        let cfg = ContourConfig::for_decay(1.0, 2, 1.0, 2.0, 1.5, 3.0, 1e-9).unwrap();
        let s = ContourSamples::sample(|l| scalar((l + 1.0).powu(3).inv()), cfg).unwrap();
        let t: f64 = 1.5;
        let f = t * t * (-t).exp() / 2.0;
        let df = (t - t * t / 2.0) * (-t).exp();
        assert!((s.invert(t)[0] - re(f)).norm() < 1e-8);
        assert!((s.invert_weighted(t, 1)[0] - re(df)).norm() < 1e-7);
    }
}

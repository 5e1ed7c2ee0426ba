//! Vector-valued exp-polynomials `f(t) = Σ c·t^m·e^{a t}`.

use crate::error::{Error, Result};
use crate::linalg::{re, CMat, CVec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Rates closer than this (relative) are merged into one term.
const RATE_MERGE_RTOL: f64 = 1e-13;
/// Rates below this modulus are treated as zero when integrating.
const ZERO_RATE: f64 = 1e-13;
/// Derivative orders scanned by [`Signal::vanishing_order`].
pub const VANISHING_CAP: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Vec<Complex64>,
    pub power: u32,
    pub rate: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    terms: Vec<Term>,
}

fn falling(q: usize, k: usize) -> f64 {
    // q! / (q-k)!
    ((q - k + 1)..=q).fold(1.0, |acc, i| acc * i as f64)
}

fn same_rate(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= RATE_MERGE_RTOL * (1.0 + a.norm().max(b.norm()))
}

impl Signal {
    pub fn zero(dim: usize) -> Self {
        Signal { dim: Some(dim), terms: vec![] }
    }

    pub fn from_terms(dim: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.coeff.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "signal term has {} components, expected {dim}",
                    t.coeff.len()
                )));
            }
            if !t.rate.re.is_finite() || !t.rate.im.is_finite() || t.coeff.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidInput("non-finite signal term".into()));
            }
        }
        Ok(Signal { dim: Some(dim), terms }.canonical())
    }

    /// `c·t^m·e^{a t}`.
    pub fn term(coeff: &CVec, power: u32, rate: Complex64) -> Self {
        Signal {
            dim: Some(coeff.len()),
            terms: vec![Term { coeff: coeff.iter().copied().collect(), power, rate }],
        }
    }

    pub fn constant(v: &CVec) -> Self {
        Self::term(v, 0, Complex64::new(0.0, 0.0))
    }

    /// Dimension, inferred from the terms when deserialized without one.
    pub fn dim(&self) -> usize {
        self.dim.unwrap_or_else(|| self.terms.first().map(|t| t.coeff.len()).unwrap_or(0))
    }

    /// Fix the dimension after deserialization and validate the terms.
    pub fn with_dim(self, dim: usize) -> Result<Self> {
        Self::from_terms(dim, self.terms)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn canonical(mut self) -> Self {
        let dim = self.dim();
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            if let Some(o) = out.iter_mut().find(|o| o.power == t.power && same_rate(o.rate, t.rate)) {
                for (x, y) in o.coeff.iter_mut().zip(&t.coeff) {
                    *x += y;
                }
            } else {
                out.push(t);
            }
        }
        out.retain(|t| t.coeff.iter().any(|z| *z != Complex64::new(0.0, 0.0)));
        out.sort_by(|a, b| {
            (a.rate.re, a.rate.im, a.power)
                .partial_cmp(&(b.rate.re, b.rate.im, b.power))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Signal { dim: Some(dim), terms: out }
    }

    pub fn eval(&self, t: f64) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for term in &self.terms {
            let w = re(t.powi(term.power as i32)) * (term.rate * t).exp();
            for (o, c) in out.iter_mut().zip(&term.coeff) {
                *o += c * w;
            }
        }
        out
    }

    pub fn derivative(&self) -> Self {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            if t.power > 0 {
                let m = t.power as f64;
                terms.push(Term { coeff: t.coeff.iter().map(|c| c * m).collect(), power: t.power - 1, rate: t.rate });
            }
            if t.rate.norm() > 0.0 {
                terms.push(Term { coeff: t.coeff.iter().map(|c| c * t.rate).collect(), power: t.power, rate: t.rate });
            }
        }
        Signal { dim: Some(self.dim()), terms }.canonical()
    }

    pub fn nth_derivative(&self, k: usize) -> Self {
        (0..k).fold(self.clone(), |s, _| s.derivative())
    }

    /// `t ↦ ∫₀^t f(τ) dτ`.
    pub fn antiderivative(&self) -> Self {
        let dim = self.dim();
        let mut terms = Vec::new();
        let mut constant = vec![Complex64::new(0.0, 0.0); dim];
        for t in &self.terms {
            let m = t.power as usize;
            if t.rate.norm() <= ZERO_RATE {
                let s = 1.0 / (m as f64 + 1.0);
                terms.push(Term { coeff: t.coeff.iter().map(|c| c * s).collect(), power: t.power + 1, rate: Complex64::new(0.0, 0.0) });
                continue;
            }
            // ∫₀^t τ^m e^{aτ} = e^{at} Σ_j (-1)^j m!/(m-j)! t^{m-j}/a^{j+1} - (-1)^m m!/a^{m+1}
            let a = t.rate;
            let mut ainv = a.inv();
            for j in 0..=m {
                let w = ainv * (if j % 2 == 0 { 1.0 } else { -1.0 }) * falling(m, j);
                terms.push(Term { coeff: t.coeff.iter().map(|c| c * w).collect(), power: (m - j) as u32, rate: a });
                if j == m {
                    for (k, c) in constant.iter_mut().zip(&t.coeff) {
                        *k -= c * w;
                    }
                }
                ainv /= a;
            }
        }
        terms.push(Term { coeff: constant, power: 0, rate: Complex64::new(0.0, 0.0) });
        Signal { dim: Some(dim), terms }.canonical()
    }

    /// `t ↦ e^{c t} f(t)`.
    pub fn mul_exp(&self, c: Complex64) -> Self {
        let terms = self.terms.iter().map(|t| Term { coeff: t.coeff.clone(), power: t.power, rate: t.rate + c }).collect();
        Signal { dim: Some(self.dim()), terms }.canonical()
    }

    /// `t ↦ M f(t)`.
    pub fn left_mul(&self, m: &CMat) -> Self {
        assert_eq!(m.ncols(), self.dim(), "left_mul dimension");
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let v = m * CVec::from_column_slice(&t.coeff);
                Term { coeff: v.iter().copied().collect(), power: t.power, rate: t.rate }
            })
            .collect();
        Signal { dim: Some(m.nrows()), terms }.canonical()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let terms = self.terms.iter().map(|t| Term { coeff: t.coeff.iter().map(|c| c * s).collect(), ..t.clone() }).collect();
        Signal { dim: Some(self.dim()), terms }.canonical()
    }

    pub fn add(&self, other: &Signal) -> Self {
        assert_eq!(self.dim(), other.dim(), "signal dimension");
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Signal { dim: Some(self.dim()), terms }.canonical()
    }

    pub fn sub(&self, other: &Signal) -> Self {
        self.add(&other.scale(re(-1.0)))
    }

    /// `f^{(q)}(0)`.
    pub fn derivative_at_zero(&self, q: usize) -> CVec {
        self.derivative_at_zero_with_scale(q).0
    }

    fn derivative_at_zero_with_scale(&self, q: usize) -> (CVec, f64) {
        let mut out = CVec::zeros(self.dim());
        let mut scale = 0.0;
        for t in &self.terms {
            let m = t.power as usize;
            if q < m {
                continue;
            }
            // d^q/dt^q [t^m e^{at}] at 0 = q!/(q-m)! a^{q-m}
            let w = t.rate.powu((q - m) as u32) * falling(q, m);
            let cn: f64 = t.coeff.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            scale += cn * falling(q, m) * t.rate.norm().powi((q - m) as i32);
            for (o, c) in out.iter_mut().zip(&t.coeff) {
                *o += c * w;
            }
        }
        (out, scale)
    }

    /// Number of leading derivatives that vanish at 0: the largest q with
    /// f(0) = … = f^{(q−1)}(0) = 0. Returns [`VANISHING_CAP`] for the zero signal.
    pub fn vanishing_order(&self) -> usize {
        for q in 0..VANISHING_CAP {
            let (v, scale) = self.derivative_at_zero_with_scale(q);
            if v.norm() > 1e-10 * scale {
                return q;
            }
        }
        VANISHING_CAP
    }

    /// Sum of coefficient norms; a cheap size proxy.
    pub fn coeff_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()).sum()
    }

    pub fn max_rate_re(&self) -> f64 {
        self.terms.iter().map(|t| t.rate.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Laplace transform at λ (requires Re λ above every rate).
    pub fn laplace(&self, lambda: Complex64) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for t in &self.terms {
            // L[t^m e^{at}](λ) = m!/(λ-a)^{m+1}
            let m = t.power as usize;
            let w = re(falling(m, m)) / (lambda - t.rate).powu(m as u32 + 1);
            for (o, c) in out.iter_mut().zip(&t.coeff) {
                *o += c * w;
            }
        }
        out
    }
}

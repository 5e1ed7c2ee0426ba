//! State-space closed forms `t ↦ C·exp(M t)·b`.
//!
//! Semigroup quantities (integrated propagators, convolutions, shifts) stay
//! inside this class: differentiation multiplies by `M`, integration and
//! convolution augment the generator with a block-triangular coupling.

use crate::linalg::{block_diag, expm, hcat, re, CMat, CVec};
use crate::signal::Signal;
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct Realized {
    pub output: CMat,
    pub generator: CMat,
    pub state: CVec,
}

impl Realized {
    pub fn zero(dim: usize) -> Self {
        Realized { output: CMat::zeros(dim, 0), generator: CMat::zeros(0, 0), state: CVec::zeros(0) }
    }

    pub fn new(output: CMat, generator: CMat, state: CVec) -> Self {
        assert_eq!(output.ncols(), generator.nrows());
        assert_eq!(generator.nrows(), generator.ncols());
        assert_eq!(state.len(), generator.nrows());
        Realized { output, generator, state }
    }

    pub fn dim(&self) -> usize {
        self.output.nrows()
    }

    pub fn order(&self) -> usize {
        self.state.len()
    }

    pub fn eval(&self, t: f64) -> CVec {
        if self.order() == 0 {
            return CVec::zeros(self.dim());
        }
        &self.output * (expm(&(&self.generator * re(t))) * &self.state)
    }

    /// Evaluate on many times sharing one exponential per distinct step.
    pub fn eval_many(&self, ts: &[f64]) -> Vec<CVec> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn derivative(&self) -> Self {
        Realized { output: &self.output * &self.generator, generator: self.generator.clone(), state: self.state.clone() }
    }

    pub fn nth_derivative(&self, k: usize) -> Self {
        let mut out = self.output.clone();
        for _ in 0..k {
            out = &out * &self.generator;
        }
        Realized { output: out, generator: self.generator.clone(), state: self.state.clone() }
    }

    /// `t ↦ ∫₀^t x(τ) dτ`.
    pub fn integral(&self) -> Self {
        let n = self.order();
        if n == 0 {
            return self.clone();
        }
        let mut g = CMat::zeros(n + 1, n + 1);
        g.view_mut((0, 0), (n, n)).copy_from(&self.generator);
        g.view_mut((0, n), (n, 1)).copy_from(&self.state);
        let mut s = CVec::zeros(n + 1);
        s[n] = re(1.0);
        let out = hcat(&[&self.output, &CMat::zeros(self.dim(), 1)]);
        Realized { output: out, generator: g, state: s }
    }

    /// `t ↦ e^{c t} x(t)`.
    pub fn mul_exp(&self, c: Complex64) -> Self {
        let n = self.order();
        Realized { output: self.output.clone(), generator: &self.generator + CMat::identity(n, n) * c, state: self.state.clone() }
    }

    pub fn left_mul(&self, m: &CMat) -> Self {
        Realized { output: m * &self.output, generator: self.generator.clone(), state: self.state.clone() }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Realized { output: &self.output * s, ..self.clone() }
    }

    pub fn add(&self, other: &Realized) -> Self {
        assert_eq!(self.dim(), other.dim());
        if other.order() == 0 {
            return self.clone();
        }
        if self.order() == 0 {
            return other.clone();
        }
        let mut s = CVec::zeros(self.order() + other.order());
        s.rows_mut(0, self.order()).copy_from(&self.state);
        s.rows_mut(self.order(), other.order()).copy_from(&other.state);
        Realized {
            output: hcat(&[&self.output, &other.output]),
            generator: block_diag(&[&self.generator, &other.generator]),
            state: s,
        }
    }

    /// Jordan-chain realization of an exp-polynomial.
    pub fn from_signal(f: &Signal) -> Self {
        let dim = f.dim();
        let mut acc = Realized::zero(dim);
        for t in f.terms() {
            let m = t.power as usize;
            // t^m e^{at} = m! · e₀ᵀ exp((aI + shift) t) e_m
            let mut g = CMat::identity(m + 1, m + 1) * t.rate;
            for i in 0..m {
                g[(i, i + 1)] = re(1.0);
            }
            let fact: f64 = (1..=m).map(|i| i as f64).product();
            let mut out = CMat::zeros(dim, m + 1);
            for (i, c) in t.coeff.iter().enumerate() {
                out[(i, 0)] = c * fact;
            }
            let mut s = CVec::zeros(m + 1);
            s[m] = re(1.0);
            acc = acc.add(&Realized { output: out, generator: g, state: s });
        }
        acc
    }
}

/// Matrix-valued kernel `K(t) = C·exp(M t)·B`.
#[derive(Clone, Debug)]
pub struct KernelRealization {
    pub output: CMat,
    pub generator: CMat,
    pub input: CMat,
}

impl KernelRealization {
    pub fn eval(&self, t: f64) -> CMat {
        &self.output * expm(&(&self.generator * re(t))) * &self.input
    }

    /// `K(t) x₀ + ∫₀^t K(t−τ) u(τ) dτ` as one realization.
    pub fn respond(&self, x0: &CVec, u: &Realized) -> Realized {
        let n = self.generator.nrows();
        let nu = u.order();
        let mut g = CMat::zeros(n + nu, n + nu);
        g.view_mut((0, 0), (n, n)).copy_from(&self.generator);
        if nu > 0 {
            g.view_mut((0, n), (n, nu)).copy_from(&(&self.input * &u.output));
            g.view_mut((n, n), (nu, nu)).copy_from(&u.generator);
        }
        let mut s = CVec::zeros(n + nu);
        s.rows_mut(0, n).copy_from(&(&self.input * x0));
        if nu > 0 {
            s.rows_mut(n, nu).copy_from(&u.state);
        }
        Realized { output: hcat(&[&self.output, &CMat::zeros(self.output.nrows(), nu)]), generator: g, state: s }
    }
}

/// Exp-polynomial part plus state-space part.
#[derive(Clone, Debug)]
pub struct ClosedForm {
    pub poly: Signal,
    pub modal: Realized,
}

impl ClosedForm {
    pub fn from_signal(s: Signal) -> Self {
        let d = s.dim();
        ClosedForm { poly: s, modal: Realized::zero(d) }
    }

    pub fn from_realized(r: Realized) -> Self {
        ClosedForm { poly: Signal::zero(r.dim()), modal: r }
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    pub fn eval(&self, t: f64) -> CVec {
        self.poly.eval(t) + self.modal.eval(t)
    }

    pub fn derivative(&self) -> Self {
        ClosedForm { poly: self.poly.derivative(), modal: self.modal.derivative() }
    }

    pub fn integral(&self) -> Self {
        ClosedForm { poly: self.poly.antiderivative(), modal: self.modal.integral() }
    }

    pub fn mul_exp(&self, c: Complex64) -> Self {
        ClosedForm { poly: self.poly.mul_exp(c), modal: self.modal.mul_exp(c) }
    }

    pub fn left_mul(&self, m: &CMat) -> Self {
        ClosedForm { poly: self.poly.left_mul(m), modal: self.modal.left_mul(m) }
    }

    pub fn add(&self, other: &ClosedForm) -> Self {
        ClosedForm { poly: self.poly.add(&other.poly), modal: self.modal.add(&other.modal) }
    }

    /// Fold the exp-polynomial part into the state-space part.
    pub fn to_realized(&self) -> Realized {
        Realized::from_signal(&self.poly).add(&self.modal)
    }
}

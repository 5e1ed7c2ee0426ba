//! p-times integrated semigroups `S_r`, `S_l` of a pencil and the
//! strongly continuous semigroup `S_r^{(p)}` on X_ran.

use crate::error::{Error, Result};
use crate::laplace::{composite_rule, default_panels, ContourConfig, ContourSamples, LaplaceSampler};
use crate::linalg::{self, eigenvalues, expm, inverse, norm2, re, CMat, CVec, COND_CAP};
use crate::pencil::{default_index_window, estimate_resolvent_index, left_resolvent, right_resolvent, solve_shifted, IndexReport, Pencil};
use crate::realized::KernelRealization;
use crate::subspaces::{hilbert_decomposition, DecompositionReport, SubspaceBasis, ANGLE_TOL};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Relative tolerance of the contour evaluation of S_r and S_l.
pub const CONTOUR_TOL: f64 = 1e-9;
/// Added to the generator abscissa to absorb polynomial growth of S_r.
pub const GROWTH_MARGIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    ClosedForm,
    Contour,
}

/// `S(t) = Q·[exp(M t)]_{0,p}·Qᴴ` where `M` chains `G` with p integrators.
#[derive(Clone, Debug)]
pub struct IntegratedSemigroup {
    basis: CMat,
    generator: CMat,
    p: usize,
    chain: CMat,
}

impl IntegratedSemigroup {
    pub fn new(basis: CMat, generator: CMat, p: usize) -> Self {
        let r = generator.nrows();
        let mut chain = CMat::zeros((p + 1) * r, (p + 1) * r);
        chain.view_mut((0, 0), (r, r)).copy_from(&generator);
        for k in 0..p {
            chain.view_mut((k * r, (k + 1) * r), (r, r)).fill_with_identity();
        }
        IntegratedSemigroup { basis, generator, p, chain }
    }

    pub fn rank(&self) -> usize {
        self.generator.nrows()
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// Generator of the induced semigroup in basis coordinates.
    pub fn generator(&self) -> &CMat {
        &self.generator
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `[exp(M t)]_{0,j}` for j = 0..=p: block j is the j-fold integral of `e^{Gt}`.
    pub fn coordinate_blocks(&self, t: f64) -> Vec<CMat> {
        let r = self.rank();
        let e = expm(&(&self.chain * re(t)));
        (0..=self.p).map(|j| e.view((0, j * r), (r, r)).into_owned()).collect()
    }

    /// `S^{(j)}(t)` in coordinates; j = 0 gives S itself, j = p gives `e^{Gt}`.
    pub fn coords_derivative(&self, t: f64, j: usize) -> CMat {
        assert!(j <= self.p);
        self.coordinate_blocks(t).swap_remove(self.p - j)
    }

    fn lift(&self, c: CMat) -> CMat {
        &self.basis * c * self.basis.adjoint()
    }

    /// Ambient `S(t)`, acting as zero on the orthogonal complement of the basis.
    pub fn s(&self, t: f64) -> CMat {
        self.lift(self.coords_derivative(t, 0))
    }

    pub fn s_derivative(&self, t: f64, j: usize) -> CMat {
        self.lift(self.coords_derivative(t, j))
    }

    /// Kernel `t ↦ S(t)` acting on coordinates.
    pub fn kernel(&self) -> KernelRealization {
        let r = self.rank();
        let n = (self.p + 1) * r;
        let mut out = CMat::zeros(r, n);
        out.view_mut((0, 0), (r, r)).fill_with_identity();
        let mut input = CMat::zeros(n, r);
        input.view_mut((self.p * r, 0), (r, r)).fill_with_identity();
        KernelRealization { output: out, generator: self.chain.clone(), input }
    }
}

/// `G = μI − R̂⁻¹` where `R̂` is `R(μ)` compressed to `span(q)`.
fn induced_generator(q: &CMat, resolvent_at_mu: &CMat, mu: Complex64) -> Option<CMat> {
    let r = q.ncols();
    if r == 0 {
        return Some(CMat::zeros(0, 0));
    }
    let rhat = q.adjoint() * resolvent_at_mu * q;
    if linalg::cond(&rhat) > COND_CAP {
        return None;
    }
    Some(CMat::identity(r, r) * mu - inverse(&rhat)?)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Growth {
    /// `‖S_r(t)‖ ≤ C e^{ωt}` on the sampled horizon.
    pub c: f64,
    pub omega: f64,
    /// Largest real part in the spectrum of the induced generator.
    pub generator_abscissa: f64,
}

#[derive(Clone, Debug)]
pub struct EvaluatorOptions {
    pub mu: Option<Complex64>,
    pub p: Option<usize>,
    pub backend: Backend,
}

impl Default for EvaluatorOptions {
    fn default() -> Self {
        EvaluatorOptions { mu: None, p: None, backend: Backend::ClosedForm }
    }
}

#[derive(Clone, Debug)]
pub struct SemigroupEvaluator {
    pencil: Pencil,
    mu: Complex64,
    p: usize,
    backend: Backend,
    decomposition: DecompositionReport,
    index: Option<IndexReport>,
    right: Option<IntegratedSemigroup>,
    left: Option<IntegratedSemigroup>,
    growth: Growth,
}

impl SemigroupEvaluator {
    pub fn new(pencil: &Pencil, opts: EvaluatorOptions) -> Result<Self> {
        let (p, index) = match opts.p {
            Some(p) => (p, None),
            None => {
                let (lo, hi, n) = default_index_window(pencil);
                let rep = estimate_resolvent_index(pencil, lo, hi, n)?;
                (rep.p_res + 1, Some(rep))
            }
        };
        if p == 0 {
            return Err(Error::InvalidInput("integration order p must be at least 1".into()));
        }
        let mu = match opts.mu {
            Some(m) => m,
            None => pencil.default_mu()?,
        };
        let decomposition = hilbert_decomposition(pencil, mu, p)?;
        let rr = right_resolvent(pencil, mu)?;
        let rl = left_resolvent(pencil, mu)?;
        let right = induced_generator(decomposition.x_ran().basis(), &rr, mu)
            .map(|g| IntegratedSemigroup::new(decomposition.x_ran().basis().clone(), g, p));
        let left = induced_generator(decomposition.z_ran().basis(), &rl, mu)
            .map(|g| IntegratedSemigroup::new(decomposition.z_ran().basis().clone(), g, p));
        if opts.backend == Backend::ClosedForm && (right.is_none() || left.is_none()) {
            return Err(Error::DecompositionUnavailable("R(μ) is not invertible on the range part; use the contour backend".into()));
        }
        let abscissa = right
            .as_ref()
            .map(|s| eigenvalues(s.generator()).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
            .unwrap_or(f64::NEG_INFINITY);
        let abscissa = if abscissa.is_finite() { abscissa } else { pencil.omega_hint().unwrap_or(0.0) };
        let omega = abscissa.max(0.0) + GROWTH_MARGIN;
        let c = match &right {
            Some(s) if s.rank() > 0 => (0..=200)
                .map(|i| {
                    let t = i as f64 * 0.1;
                    norm2(&s.coords_derivative(t, 0)) * (-omega * t).exp()
                })
                .fold(0.0, f64::max),
            _ => 0.0,
        };
        Ok(SemigroupEvaluator {
            pencil: pencil.clone(),
            mu,
            p,
            backend: opts.backend,
            decomposition,
            index,
            right,
            left,
            growth: Growth { c, omega, generator_abscissa: abscissa },
        })
    }

    pub fn pencil(&self) -> &Pencil {
        &self.pencil
    }

    pub fn mu(&self) -> Complex64 {
        self.mu
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn with_backend(mut self, b: Backend) -> Self {
        self.backend = b;
        self
    }

    pub fn decomposition(&self) -> &DecompositionReport {
        &self.decomposition
    }

    pub fn index(&self) -> Option<&IndexReport> {
        self.index.as_ref()
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    pub fn x_ran(&self) -> &SubspaceBasis {
        self.decomposition.x_ran()
    }

    pub fn z_ran(&self) -> &SubspaceBasis {
        self.decomposition.z_ran()
    }

    pub fn right(&self) -> Result<&IntegratedSemigroup> {
        self.right.as_ref().ok_or_else(|| Error::DecompositionUnavailable("no closed form for S_r".into()))
    }

    pub fn left(&self) -> Result<&IntegratedSemigroup> {
        self.left.as_ref().ok_or_else(|| Error::DecompositionUnavailable("no closed form for S_l".into()))
    }

    /// Project onto a subspace, rejecting vectors further than the angle tolerance.
    fn admit(space: &SubspaceBasis, x: &CVec) -> Result<CVec> {
        let d = space.distance(x);
        if d > ANGLE_TOL * x.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotInXran(d));
        }
        Ok(space.project(x))
    }

    /// Contour configuration for `F(λ) = R(λ)x/λ^p`.
    fn contour_config(&self, scale: f64, t: f64) -> Result<ContourConfig> {
        let sigma = self.growth.generator_abscissa.max(0.0) + 1.0;
        ContourConfig::for_decay(sigma, self.p + 1, scale, sigma.min(1.0), t, t, CONTOUR_TOL)
    }

    fn contour_eval(&self, t: f64, x: &CVec, left: bool) -> Result<CVec> {
        if t == 0.0 || x.norm() == 0.0 {
            return Ok(CVec::zeros(x.len()));
        }
        let p = self.p as u32;
        let pencil = &self.pencil;
        let f = |l: Complex64| -> CVec {
            let v = if left {
                match solve_shifted(pencil, l, &CMat::from_column_slice(x.len(), 1, x.as_slice())) {
                    Some(y) => pencil.e() * y.column(0),
                    None => CVec::from_element(x.len(), Complex64::new(f64::NAN, 0.0)),
                }
            } else {
                let ex = pencil.e() * x;
                match solve_shifted(pencil, l, &CMat::from_column_slice(ex.len(), 1, ex.as_slice())) {
                    Some(y) => y.column(0).into_owned(),
                    None => CVec::from_element(x.len(), Complex64::new(f64::NAN, 0.0)),
                }
            };
            v / l.powu(p)
        };
        let sigma = self.growth.generator_abscissa.max(0.0) + 1.0;
        let probe = Complex64::new(sigma, 1e3 * (1.0 + sigma));
        let scale = f(probe).norm() * probe.norm().powi(self.p as i32 + 1);
        let cfg = self.contour_config(scale.max(x.norm()), t)?;
        Ok(ContourSamples::sample(f, cfg)?.invert(t))
    }

    pub fn eval_s_r(&self, t: f64, x0: &CVec) -> Result<CVec> {
        if t < 0.0 {
            return Err(Error::InvalidInput("t must be nonnegative".into()));
        }
        let x = Self::admit(self.x_ran(), x0)?;
        match self.backend {
            Backend::ClosedForm => Ok(self.right()?.s(t) * x),
            Backend::Contour => self.contour_eval(t, &x, false),
        }
    }

    pub fn eval_s_l(&self, t: f64, z0: &CVec) -> Result<CVec> {
        if t < 0.0 {
            return Err(Error::InvalidInput("t must be nonnegative".into()));
        }
        let z = Self::admit(self.z_ran(), z0)?;
        match self.backend {
            Backend::ClosedForm => Ok(self.left()?.s(t) * z),
            Backend::Contour => self.contour_eval(t, &z, true),
        }
    }

    /// `S_r^{(p)}(t)` on X_ran; refuses when X_ran meets ker E.
    pub fn cp_semigroup(&self, t: f64) -> Result<CMat> {
        self.require_disjoint()?;
        Ok(self.right()?.s_derivative(t, self.p))
    }

    fn require_disjoint(&self) -> Result<()> {
        let d = self.decomposition.disjointness.as_ref().expect("hilbert decomposition carries flags");
        if !d.disjoint_ran_e {
            return Err(Error::DisjointnessViolated(d.angle_ran_ker_e.unwrap_or(0.0)));
        }
        Ok(())
    }

    /// `max_{t ∈ grid} ‖e^{−ωt} S_r^{(p)}(t) x₀‖` on `n` equispaced points of [0, T];
    /// ω defaults to the generator abscissa clipped at 0.
    pub fn f_norm(&self, x0: &CVec, omega: Option<f64>, horizon: f64, n: usize) -> Result<f64> {
        self.require_disjoint()?;
        let x = Self::admit(self.x_ran(), x0)?;
        let s = self.right()?;
        let w = omega.unwrap_or(self.growth.generator_abscissa.max(0.0));
        let c = s.basis().adjoint() * x;
        let n = n.max(2);
        Ok((0..n)
            .map(|i| {
                let t = horizon * i as f64 / (n - 1) as f64;
                (s.coords_derivative(t, s.p()) * &c).norm() * (-w * t).exp()
            })
            .fold(0.0, f64::max))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyEntry {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub grid: Vec<f64>,
    pub entries: Vec<PropertyEntry>,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

fn rel(diff: &CMat, a: &CMat, b: &CMat) -> f64 {
    if diff.is_empty() {
        return 0.0;
    }
    norm2(diff) / (1.0 + norm2(a) + norm2(b))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `∫₀^t w(τ) S(τ+shift)Q dτ` by composite 16-point Gauss–Legendre
/// (4 panels; exact for polynomial integrands of degree ≤ 31 per panel).
fn quad(s: &IntegratedSemigroup, t: f64, shift: f64, weight: impl Fn(f64) -> f64) -> CMat {
    let r = s.rank();
    let (nodes, weights) = composite_rule(0.0, t, 4);
    let mut acc = CMat::zeros(r, r);
    for (tau, w) in nodes.iter().zip(&weights) {
        acc += s.coords_derivative(tau + shift, 0) * re(w * weight(*tau));
    }
    acc
}

/// Functional equation residual for one integrated semigroup, in coordinates.
fn functional_equation(s: &IntegratedSemigroup, t: f64, sv: f64) -> (f64, f64) {
    let p = s.p();
    let c = 1.0 / factorial(p - 1);
    let lhs = s.coords_derivative(t, 0) * s.coords_derivative(sv, 0);
    let rhs = quad(s, t, sv, |tau| c * (t - tau).powi(p as i32 - 1)) - quad(s, t, 0.0, |tau| c * (t + sv - tau).powi(p as i32 - 1));
    let swapped = s.coords_derivative(sv, 0) * s.coords_derivative(t, 0);
    (rel(&(&lhs - &rhs), &lhs, &rhs), rel(&(&lhs - &swapped), &lhs, &swapped))
}

/// Residuals of the integrated-semigroup identities (commutation, intertwining,
/// integrated DAE, integral identity, functional equation) on `grid`.
pub fn verify_properties(ev: &SemigroupEvaluator, grid: &[f64], tolerance: f64) -> Result<PropertyReport> {
    let sr = ev.right()?;
    let sl = ev.left()?;
    let p = ev.p();
    let e = ev.pencil().e();
    let a = ev.pencil().a();
    let q = sr.basis();
    let qz = sl.basis();
    let rr = right_resolvent(ev.pencil(), ev.mu())?;
    let rl = left_resolvent(ev.pencil(), ev.mu())?;
    let pf = factorial(p);
    let pf1 = factorial(p - 1);

    let per_t: Vec<[f64; 6]> = grid
        .par_iter()
        .map(|&t| {
            let s = sr.s(t);
            let sz = sl.s(t);
            let sq = &s * q;
            // (a) commutation on X_ran and Z_ran
            let a1 = rel(&(&rr * &sq - &s * &rr * q), &(&rr * &sq), &(&s * &rr * q));
            let a2 = rel(&(&rl * &sz * qz - &sz * &rl * qz), &(&rl * &sz * qz), &(&sz * &rl * qz));
            // (b) E S_r = S_l E and A S_r = S_l A on X_ran
            let b1 = rel(&(e * &sq - &sz * e * q), &(e * &sq), &(&sz * e * q));
            let b2 = rel(&(a * &sq - &sz * a * q), &(a * &sq), &(&sz * a * q));
            // (c) d/dt E S_r = A S_r + t^{p-1}/(p-1)! E
            let ds = sr.s_derivative(t, 1) * q;
            let lhs = e * &ds;
            let rhs = a * &sq + e * q * re(t.powi(p as i32 - 1) / pf1);
            let c = rel(&(&lhs - &rhs), &lhs, &rhs);
            // (d) A ∫ S_r = E S_r − t^p/p! E
            let int = q * quad(sr, t, 0.0, |_| 1.0) * q.adjoint() * q;
            let lhs = a * int;
            let rhs = e * &sq - e * q * re(t.powi(p as i32) / pf);
            let d = rel(&(&lhs - &rhs), &lhs, &rhs);
            [a1.max(a2), b1, b2, c, d, 0.0]
        })
        .collect();

    let pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&t| grid.iter().map(move |&s| (t, s))).collect();
    let fe: Vec<(f64, f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(t, s)| {
            let (fr, cr) = if sr.rank() > 0 { functional_equation(sr, t, s) } else { (0.0, 0.0) };
            let (fl, cl) = if sl.rank() > 0 { functional_equation(sl, t, s) } else { (0.0, 0.0) };
            (fr, cr, fl, cl)
        })
        .collect();

    let col = |k: usize| per_t.iter().map(|r| r[k]).fold(0.0, f64::max);
    let entry = |name: &str, residual: f64| PropertyEntry { name: name.into(), residual, tolerance, pass: residual <= tolerance };
    let entries = vec![
        entry("a_commutation", col(0)),
        entry("b_intertwining_e", col(1)),
        entry("b_intertwining_a", col(2)),
        entry("c_integrated_dae", col(3)),
        entry("d_integral_identity", col(4)),
        entry("f_functional_equation_right", fe.iter().map(|x| x.0).fold(0.0, f64::max)),
        entry("f_functional_equation_left", fe.iter().map(|x| x.2).fold(0.0, f64::max)),
        entry("f_commutativity", fe.iter().map(|x| x.1.max(x.3)).fold(0.0, f64::max)),
    ];
    Ok(PropertyReport { grid: grid.to_vec(), entries })
}

/// Semigroup law, identity at zero and strong continuity of `S_r^{(p)}`.
pub fn verify_cp_semigroup(ev: &SemigroupEvaluator, grid: &[f64], x: &CVec, tolerance: f64) -> Result<PropertyReport> {
    let n = ev.pencil().n_x();
    let q = ev.x_ran().basis().clone();
    let mut law: f64 = 0.0;
    for &t in grid {
        for &s in grid {
            let lhs = ev.cp_semigroup(t + s)?;
            let rhs = ev.cp_semigroup(t)? * ev.cp_semigroup(s)?;
            law = law.max(norm2(&((&lhs - &rhs) * &q)));
        }
    }
    let id = norm2(&((ev.cp_semigroup(0.0)? - CMat::identity(n, n)) * &q));
    let x = SemigroupEvaluator::admit(ev.x_ran(), x)?;
    let hs: Vec<f64> = (0..=6).map(|k| 0.5f64.powi(k)).collect();
    let defects: Vec<f64> = hs.iter().map(|&h| ev.cp_semigroup(h).map(|s| (s * &x - &x).norm())).collect::<Result<_>>()?;
    let monotone = defects.windows(2).all(|w| w[1] <= w[0]);
    let entry = |name: &str, residual: f64, tol: f64| PropertyEntry { name: name.into(), residual, tolerance: tol, pass: residual <= tol };
    Ok(PropertyReport {
        grid: grid.to_vec(),
        entries: vec![
            entry("semigroup_law", law, tolerance),
            entry("identity_at_zero", id, tolerance),
            entry("strong_continuity_monotone", if monotone { 0.0 } else { 1.0 }, 0.5),
            entry("strong_continuity_defect_at_1_64", *defects.last().unwrap(), defects[0].max(f64::MIN_POSITIVE)),
        ],
    })
}

/// Abscissa of the line on which the Laplace representation is checked.
pub fn laplace_abscissa(ev: &SemigroupEvaluator) -> f64 {
    ev.growth().omega.max(0.0) + 2.0
}

/// `‖λ^p L[S_r(·)x₀](λ) − R_r(λ)x₀‖ / ‖x₀‖` at each λ, one entry per point.
pub fn verify_laplace_identity(ev: &SemigroupEvaluator, x0: &CVec, lambdas: &[Complex64], tolerance: f64) -> Result<PropertyReport> {
    let sr = ev.right()?;
    let x = SemigroupEvaluator::admit(ev.x_ran(), x0)?;
    let omega = ev.growth().omega;
    let gap = lambdas.iter().map(|l| l.re - omega).fold(f64::INFINITY, f64::min);
    if !(gap > 0.0) {
        return Err(Error::InvalidInput(format!("λ must lie right of Re λ = {omega:.3}")));
    }
    let horizon = 24.0 / gap;
    let lambda_scale = lambdas.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let sampler = LaplaceSampler::new(|t| sr.s(t) * &x, horizon, default_panels(horizon, lambda_scale))?;
    let scale = x0.norm().max(f64::MIN_POSITIVE);
    let mut entries = Vec::with_capacity(lambdas.len());
    for (i, &l) in lambdas.iter().enumerate() {
        let lap = sampler.transform(l, omega)?.value * l.powu(ev.p() as u32);
        let want = right_resolvent(ev.pencil(), l)? * &x;
        let residual = (lap - want).norm() / scale;
        entries.push(PropertyEntry { name: format!("laplace_{i}"), residual, tolerance, pass: residual <= tolerance });
    }
    Ok(PropertyReport { grid: lambdas.iter().map(|l| l.im).collect(), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cvec_real, from_real};

    fn diag() -> Pencil {
        Pencil::new(from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]), from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap()
    }

    fn diag_ev(backend: Backend) -> SemigroupEvaluator {
        SemigroupEvaluator::new(&diag(), EvaluatorOptions { mu: Some(re(0.0)), p: Some(2), backend }).unwrap()
    }

    #[test]
    fn diag_closed_form() {
        let ev = diag_ev(Backend::ClosedForm);
        let e1 = cvec_real(&[1.0, 0.0]);
        for &t in &[0.0, 0.5, 2.0] {
            let want = t - 1.0 + (-t as f64).exp();
            let v = ev.eval_s_r(t, &e1).unwrap();
            assert!((v[0] - re(want)).norm() < 1e-13 && v[1].norm() < 1e-14);
            let v = ev.eval_s_l(t, &e1).unwrap();
            assert!((v[0] - re(want)).norm() < 1e-13);
        }
        assert!(matches!(ev.eval_s_r(1.0, &cvec_real(&[0.0, 1.0])), Err(Error::NotInXran(_))));
    }

    #[test]
    fn diag_contour_agrees() {
        let ev = diag_ev(Backend::Contour);
        let e1 = cvec_real(&[1.0, 0.0]);
        let t: f64 = 1.3;
        let v = ev.eval_s_r(t, &e1).unwrap();
        assert!((v[0] - re(t - 1.0 + (-t).exp())).norm() < 1e-7, "{v}");
        let v = ev.eval_s_l(t, &e1).unwrap();
        assert!((v[0] - re(t - 1.0 + (-t).exp())).norm() < 1e-7, "{v}");
    }

    #[test]
    fn nilpotent_has_trivial_domain() {
        let p = Pencil::new(from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]), CMat::identity(2, 2)).unwrap();
        let ev = SemigroupEvaluator::new(&p, EvaluatorOptions { mu: Some(re(0.0)), p: Some(3), ..Default::default() }).unwrap();
        assert_eq!(ev.x_ran().rank(), 0);
        assert!(ev.eval_s_r(1.0, &CVec::zeros(2)).unwrap().norm() == 0.0);
    }

    #[test]
    fn diag_laplace_identity() {
        let ev = diag_ev(Backend::ClosedForm);
        let sigma = laplace_abscissa(&ev);
        let ls: Vec<Complex64> = [-5.0, -1.0, 0.0, 2.0, 7.0].iter().map(|&y| Complex64::new(sigma, y)).collect();
        let r = verify_laplace_identity(&ev, &cvec_real(&[1.0, 0.0]), &ls, 1e-8).unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert!(verify_laplace_identity(&ev, &cvec_real(&[1.0, 0.0]), &[re(-1.0)], 1e-8).is_err());
    }

    #[test]
    fn diag_properties() {
        let ev = diag_ev(Backend::ClosedForm);
        let r = verify_properties(&ev, &[0.1, 0.5, 1.0, 2.0], 1e-9).unwrap();
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn identity_pencil_p1_functional_equation() {
        let p = Pencil::new(CMat::identity(2, 2), CMat::zeros(2, 2)).unwrap();
        let ev = SemigroupEvaluator::new(&p, EvaluatorOptions { mu: Some(re(1.0)), p: Some(1), ..Default::default() }).unwrap();
        let s = ev.eval_s_r(0.7, &cvec_real(&[1.0, 0.0])).unwrap();
        assert!((s[0] - re(0.7)).norm() < 1e-14);
        let r = verify_properties(&ev, &[0.1, 0.5, 1.0, 2.0], 1e-12).unwrap();
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn cp_semigroup_and_f_norm() {
        let ev = diag_ev(Backend::ClosedForm);
        let s = ev.cp_semigroup(0.8).unwrap();
        assert!((s[(0, 0)] - re((-0.8f64).exp())).norm() < 1e-13);
        assert!((ev.cp_semigroup(0.0).unwrap()[(0, 0)] - re(1.0)).norm() < 1e-14);
        let f = ev.f_norm(&cvec_real(&[1.0, 0.0]), Some(0.0), 10.0, 101).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
        let r = verify_cp_semigroup(&ev, &[0.1, 0.5, 1.0], &cvec_real(&[1.0, 0.0]), 1e-12).unwrap();
        assert!(r.all_pass(), "{r:?}");
    }
}

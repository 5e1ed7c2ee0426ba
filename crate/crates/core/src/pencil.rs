//! Matrix pencils, resolvents and index notions.

use crate::error::{Error, Result};
use crate::linalg::{self, inverse, null_space, orth, pinv, re, CMat, CVec, COND_CAP, RANK_RTOL};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Slope tolerance when rounding the fitted growth exponent.
pub const TOL_SLOPE: f64 = 0.15;
/// Relative residual tolerance for accepting a chain extension.
pub const CHAIN_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Pencil {
    e: CMat,
    a: CMat,
    omega_hint: Option<f64>,
    name: Option<String>,
}

impl Pencil {
    pub fn new(e: CMat, a: CMat) -> Result<Self> {
        if e.shape() != a.shape() {
            return Err(Error::ShapeMismatch(format!("E is {:?}, A is {:?}", e.shape(), a.shape())));
        }
        if e.nrows() == 0 || e.ncols() == 0 {
            return Err(Error::ShapeMismatch("empty pencil".into()));
        }
        if !linalg::is_finite(&e) || !linalg::is_finite(&a) {
            return Err(Error::InvalidInput("non-finite pencil entry".into()));
        }
        Ok(Pencil { e, a, omega_hint: None, name: None })
    }

    pub fn with_omega_hint(mut self, omega: f64) -> Self {
        self.omega_hint = Some(omega);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn e(&self) -> &CMat {
        &self.e
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn n_x(&self) -> usize {
        self.e.ncols()
    }

    pub fn n_z(&self) -> usize {
        self.e.nrows()
    }

    pub fn is_square(&self) -> bool {
        self.n_x() == self.n_z()
    }

    pub fn omega_hint(&self) -> Option<f64> {
        self.omega_hint
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// `λE − A`.
    pub fn shifted(&self, lambda: Complex64) -> CMat {
        &self.e * lambda - &self.a
    }

    /// Transform `E → U E V`, `A → U A V`.
    pub fn transformed(&self, u: &CMat, v: &CMat) -> Result<Self> {
        let mut p = Pencil::new(u * &self.e * v, u * &self.a * v)?;
        p.omega_hint = self.omega_hint;
        p.name = self.name.clone();
        Ok(p)
    }

    /// A real point to the right of the hint that lies in the resolvent set.
    pub fn default_mu(&self) -> Result<Complex64> {
        let base = self.omega_hint.unwrap_or(0.0).max(0.0) + 1.0;
        for k in 0..20 {
            let mu = re(base + 0.37 * k as f64);
            if generalized_resolvent(self, mu).is_ok() {
                return Ok(mu);
            }
        }
        Err(Error::NotRegularOnRay(format!("no regular point found on [{base}, {}]", base + 7.4)))
    }

    pub fn scale(&self) -> f64 {
        linalg::norm2(&self.e) + linalg::norm2(&self.a)
    }
}

fn singular_check(lambda: Complex64, m: &CMat) -> Result<f64> {
    let s = linalg::singular_values(m);
    let smax = s[0];
    let smin = *s.last().unwrap();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= COND_CAP) {
        return Err(Error::SingularAtLambda { lambda, cond });
    }
    Ok(cond)
}

/// `(λE − A)⁻¹` for square pencils.
pub fn resolvent(p: &Pencil, lambda: Complex64) -> Result<CMat> {
    if !p.is_square() {
        return Err(Error::ShapeMismatch(format!("resolvent needs a square pencil, got {}×{}", p.n_z(), p.n_x())));
    }
    let m = p.shifted(lambda);
    let cond = singular_check(lambda, &m)?;
    let inv = inverse(&m).ok_or(Error::SingularAtLambda { lambda, cond })?;
    let n = p.n_x();
    let res = (&m * &inv - CMat::identity(n, n)).norm();
    let tol = (64.0 * f64::EPSILON * cond).max(1e-10) * (n as f64).sqrt();
    if !(res <= tol) {
        return Err(Error::SingularAtLambda { lambda, cond });
    }
    Ok(inv)
}

/// `(λE − A)⁻¹` when square, otherwise the Moore–Penrose left inverse of a
/// full-column-rank `λE − A`.
pub fn generalized_resolvent(p: &Pencil, lambda: Complex64) -> Result<CMat> {
    if p.is_square() {
        return resolvent(p, lambda);
    }
    if p.n_z() < p.n_x() {
        return Err(Error::ShapeMismatch("λE − A has more columns than rows; no left inverse".into()));
    }
    let m = p.shifted(lambda);
    singular_check(lambda, &m)?;
    Ok(pinv(&m, 0.0))
}

/// `(λE − A)⁻¹ rhs` by LU without the conditioning check (least squares
/// for rectangular pencils); `None` on breakdown.
pub fn solve_shifted(p: &Pencil, lambda: Complex64, rhs: &CMat) -> Option<CMat> {
    let m = p.shifted(lambda);
    if p.is_square() {
        linalg::lu_solve(&m, rhs)
    } else {
        Some(pinv(&m, 0.0) * rhs)
    }
}

/// `R_r(λ) = (λE − A)⁻¹E`.
pub fn right_resolvent(p: &Pencil, lambda: Complex64) -> Result<CMat> {
    Ok(generalized_resolvent(p, lambda)? * p.e())
}

/// `R_l(λ) = E(λE − A)⁻¹`.
pub fn left_resolvent(p: &Pencil, lambda: Complex64) -> Result<CMat> {
    Ok(p.e() * generalized_resolvent(p, lambda)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerticalEstimate {
    pub abscissa: f64,
    pub heights: Vec<f64>,
    pub norms: Vec<f64>,
    pub fitted_slope: f64,
    pub p_res: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexReport {
    pub sample_points: Vec<f64>,
    pub norms: Vec<f64>,
    pub fitted_slope: f64,
    pub p_res: usize,
    pub growth_constant: f64,
    pub omega_used: f64,
    /// Smallest and largest slope between consecutive samples.
    pub local_slope_range: (f64, f64),
    /// p_res recomputed from the extreme local slopes.
    pub p_res_band: (usize, usize),
    pub vertical: Option<VerticalEstimate>,
    /// False when the vertical-line estimate gives a different p_res.
    pub axes_agree: bool,
}

fn p_from_slope(slope: f64) -> usize {
    (slope + 1.0 - TOL_SLOPE).ceil().max(0.0) as usize
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// ‖(λE − A)⁻¹‖₂ = 1/σ_min, with the condition cap enforced.
fn inverse_norm(p: &Pencil, lambda: Complex64) -> Result<f64> {
    let m = p.shifted(lambda);
    let s = linalg::singular_values(&m);
    let smax = s[0];
    let smin = *s.last().unwrap();
    if p.n_z() < p.n_x() || !(smin > 0.0) || smax / smin > COND_CAP {
        return Err(Error::SingularAtLambda { lambda, cond: if smin > 0.0 { smax / smin } else { f64::INFINITY } });
    }
    Ok(1.0 / smin)
}

/// Reasonable sampling window for [`estimate_resolvent_index`]: two decades
/// above the hint, shortened while `λE − A` is too ill-conditioned at the top.
pub fn default_index_window(p: &Pencil) -> (f64, f64, usize) {
    let lo = 10.0 * (p.omega_hint().unwrap_or(0.0) + 1.0).max(1.0);
    let mut hi = 100.0 * lo;
    while hi > 8.0 * lo {
        let s = linalg::singular_values(&p.shifted(re(hi)));
        if s.last().is_some_and(|&smin| smin > 0.0 && s[0] / smin <= 1e-2 * COND_CAP) {
            break;
        }
        hi /= 2.0;
    }
    (lo, hi, 16)
}

/// Fit the growth exponent of ‖(λE − A)⁻¹‖ on real λ ∈ [λ_min, λ_max].
pub fn estimate_resolvent_index(p: &Pencil, lambda_min: f64, lambda_max: f64, n_samples: usize) -> Result<IndexReport> {
    let omega = p.omega_hint().unwrap_or(0.0);
    if !(lambda_min > omega.max(1.0)) || !(lambda_max > lambda_min) {
        return Err(Error::InvalidInput(format!(
            "need max(ω, 1) < λ_min < λ_max, got ω = {omega}, [{lambda_min}, {lambda_max}]"
        )));
    }
    if n_samples < 8 {
        return Err(Error::InvalidInput("n_samples must be at least 8".into()));
    }
    let pts = geometric(lambda_min, lambda_max, n_samples);
    let norms: Vec<f64> = pts
        .par_iter()
        .map(|&l| inverse_norm(p, re(l)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::NotRegularOnRay(e.to_string()))?;
    let lx: Vec<f64> = pts.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|x| x.ln()).collect();
    let slope = ls_slope(&lx, &ly);
    let p_res = p_from_slope(slope);
    let growth_constant = pts
        .iter()
        .zip(&norms)
        .map(|(l, n)| n / l.powi(p_res as i32 - 1))
        .fold(0.0, f64::max);
    let locals: Vec<f64> = lx.windows(2).zip(ly.windows(2)).map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0])).collect();
    let lo = locals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = locals.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let abscissa = omega.max(0.0) + 1.0;
    let vertical = (|| -> Result<VerticalEstimate> {
        let hs = geometric(lambda_min, lambda_max, n_samples);
        let norms: Vec<f64> = hs.par_iter().map(|&h| inverse_norm(p, Complex64::new(abscissa, h))).collect::<Result<_>>()?;
        let lx: Vec<f64> = hs.iter().map(|h| Complex64::new(abscissa, *h).norm().ln()).collect();
        let ly: Vec<f64> = norms.iter().map(|x| x.ln()).collect();
        let s = ls_slope(&lx, &ly);
        Ok(VerticalEstimate { abscissa, heights: hs, norms, fitted_slope: s, p_res: p_from_slope(s) })
    })()
    .ok();
    let axes_agree = vertical.as_ref().map(|v| v.p_res == p_res).unwrap_or(false);

    Ok(IndexReport {
        sample_points: pts,
        norms,
        fitted_slope: slope,
        p_res,
        growth_constant,
        omega_used: omega,
        local_slope_range: (lo, hi),
        p_res_band: (p_from_slope(lo), p_from_slope(hi)),
        vertical,
        axes_agree,
    })
}

#[derive(Clone, Debug)]
pub struct Chain {
    pub vectors: Vec<CVec>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Largest ‖E x_{i+1} − A x_i‖ / ((‖E‖+‖A‖)‖x_i‖) along the chain, and ‖E x₁‖.
    pub fn residuals(&self, p: &Pencil) -> (f64, f64) {
        let s = p.scale();
        let head = (p.e() * &self.vectors[0]).norm();
        let link = self
            .vectors
            .windows(2)
            .map(|w| (p.e() * &w[1] - p.a() * &w[0]).norm() / (s * w[0].norm()))
            .fold(0.0, f64::max);
        (link, head)
    }
}

/// Longest Jordan chain of the pencil at infinity.
///
/// All chains of length q span a linear space of tuples; only the first and
/// last members matter for extending them, so the recursion tracks the space
/// of tuples and prunes by rank.
pub fn chain_index(p: &Pencil) -> (usize, Vec<Chain>) {
    let n = p.n_x();
    let scale = p.scale();
    let ker = null_space(p.e(), RANK_RTOL * linalg::norm2(p.e()).max(f64::MIN_POSITIVE));
    if ker.ncols() == 0 {
        return (0, vec![]);
    }
    let ran_e = orth(p.e(), RANK_RTOL * linalg::norm2(p.e()));
    let e_pinv = pinv(p.e(), RANK_RTOL);
    let not_in_ran = CMat::identity(p.n_z(), p.n_z()) - &ran_e * ran_e.adjoint();

    // tuples: (q·n) × d, orthonormal columns
    let mut tuples = ker.clone();
    let mut q = 1;
    let mut best = tuples.clone();
    loop {
        if q > n + 1 {
            break;
        }
        let last = tuples.rows((q - 1) * n, n).into_owned();
        let img = p.a() * &last;
        let defect = &not_in_ran * &img;
        let c = null_space(&defect, RANK_RTOL * scale.max(f64::MIN_POSITIVE));
        if c.ncols() == 0 {
            break;
        }
        let ext = &tuples * &c;
        let next = &e_pinv * (&img * &c);
        let mut grown = CMat::zeros((q + 1) * n, ext.ncols() + ker.ncols());
        grown.view_mut((0, 0), (q * n, ext.ncols())).copy_from(&ext);
        grown.view_mut((q * n, 0), (n, ext.ncols())).copy_from(&next);
        grown.view_mut((q * n, ext.ncols()), (n, ker.ncols())).copy_from(&ker);
        let grown = orth(&grown, RANK_RTOL * linalg::norm2(&grown));
        let heads = grown.rows(0, n).into_owned();
        if linalg::norm2(&heads) <= 1e-8 {
            break;
        }
        q += 1;
        tuples = grown;
        best = tuples.clone();
    }

    // one witness per independent head vector of the longest chains
    let heads = best.rows(0, n).into_owned();
    let d = linalg::svd(&heads);
    let top = d.s.first().copied().unwrap_or(0.0);
    let mut witnesses = Vec::new();
    for (k, &s) in d.s.iter().enumerate() {
        if s <= 1e-8 * top.max(1.0) || s <= 1e-8 {
            break;
        }
        let coeffs = d.v.column(k) / re(s);
        let full = &best * coeffs;
        let vectors: Vec<CVec> = (0..q).map(|i| full.rows(i * n, n).into_owned()).collect();
        let chain = Chain { vectors };
        let (link, head) = chain.residuals(p);
        if link <= CHAIN_TOL && head <= CHAIN_TOL * scale {
            witnesses.push(chain);
        }
    }
    (q, witnesses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, from_real};

    fn nilpotent() -> Pencil {
        Pencil::new(from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]), CMat::identity(2, 2)).unwrap()
    }

    fn diag() -> Pencil {
        Pencil::new(from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]), from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap()
    }

    #[test]
    fn resolvent_examples() {
        let p = Pencil::new(CMat::identity(2, 2), CMat::zeros(2, 2)).unwrap();
        assert!((resolvent(&p, re(2.0)).unwrap() - CMat::identity(2, 2) * re(0.5)).norm() < 1e-15);
        let r = resolvent(&nilpotent(), re(2.0)).unwrap();
        assert!((r - from_real(2, 2, &[-1.0, -2.0, 0.0, -1.0])).norm() < 1e-14);
        let r = resolvent(&diag(), re(1.0)).unwrap();
        assert!((r - from_real(2, 2, &[0.5, 0.0, 0.0, -1.0])).norm() < 1e-15);
    }

    #[test]
    fn resolvent_rejects_eigenvalue_and_rectangle() {
        assert!(matches!(resolvent(&diag(), re(-1.0)), Err(Error::SingularAtLambda { .. })));
        let p = Pencil::new(CMat::zeros(3, 2), CMat::zeros(3, 2)).unwrap();
        assert!(matches!(resolvent(&p, re(1.0)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn right_resolvent_examples() {
        assert!((right_resolvent(&nilpotent(), re(0.0)).unwrap() - from_real(2, 2, &[0.0, -1.0, 0.0, 0.0])).norm() < 1e-15);
        assert!((right_resolvent(&diag(), re(0.0)).unwrap() - from_real(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-15);
        let a = from_real(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let p = Pencil::new(CMat::identity(2, 2), a).unwrap();
        let l = c64(1.0, 0.5);
        assert!((right_resolvent(&p, l).unwrap() - left_resolvent(&p, l).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn index_examples() {
        let p = Pencil::new(CMat::identity(2, 2), CMat::zeros(2, 2)).unwrap();
        let r = estimate_resolvent_index(&p, 10.0, 1000.0, 16).unwrap();
        assert!((r.fitted_slope + 1.0).abs() < 1e-10);
        assert_eq!(r.p_res, 0);
        let r = estimate_resolvent_index(&nilpotent(), 10.0, 1000.0, 16).unwrap();
        assert!((r.fitted_slope - 1.0).abs() < 0.05);
        assert_eq!(r.p_res, 2);
        assert!(r.axes_agree);
        assert!(estimate_resolvent_index(&p, 0.5, 10.0, 16).is_err());
        assert!(estimate_resolvent_index(&p, 10.0, 100.0, 4).is_err());
    }

    #[test]
    fn chain_examples() {
        let (q, w) = chain_index(&Pencil::new(CMat::identity(2, 2), CMat::zeros(2, 2)).unwrap());
        assert_eq!((q, w.len()), (0, 0));
        let (q, w) = chain_index(&nilpotent());
        assert_eq!(q, 2);
        let c = &w[0];
        // x₁ ∝ e₁, and E x₂ = x₁
        assert!(c.vectors[0][1].norm() < 1e-12);
        assert!((c.vectors[1][1] - c.vectors[0][0]).norm() < 1e-12);
        let (q, w) = chain_index(&diag());
        assert_eq!(q, 1);
        assert!(w[0].vectors[0][0].norm() < 1e-12);
    }

    #[test]
    fn chain_finds_longest_block_in_mixed_kernel() {
        // blocks of sizes 2 and 1 at infinity
        let e = from_real(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let u = linalg::random_unitary(3, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1));
        let p = Pencil::new(e, CMat::identity(3, 3)).unwrap().transformed(&u, &u.adjoint()).unwrap();
        assert_eq!(chain_index(&p).0, 2);
    }
}

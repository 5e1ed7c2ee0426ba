//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative singular value cutoff used for every rank decision.
pub const RANK_RTOL: f64 = 1e-10;
/// Condition numbers above this are treated as singular.
pub const COND_CAP: f64 = 1e12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| re(data[i * cols + j]))
}

pub fn cvec_real(data: &[f64]) -> CVec {
    CVec::from_iterator(data.len(), data.iter().map(|&x| re(x)))
}

/// Thin SVD with singular values sorted in decreasing order.
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

fn to_faer(m: &CMat) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD with singular values in decreasing order.
pub fn svd(m: &CMat) -> Svd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Svd { u: CMat::zeros(r, 0), s: vec![], v: CMat::zeros(c, 0) };
    }
    let d = to_faer(m).thin_svd().expect("SVD iteration converges for finite input");
    let (u, v, sd) = (d.U(), d.V(), d.S().column_vector());
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| sd[b].re.total_cmp(&sd[a].re));
    let s = idx.iter().map(|&i| sd[i].re).collect();
    let u = CMat::from_fn(r, k, |i, j| u[(i, idx[j])]);
    let v = CMat::from_fn(c, k, |i, j| v[(i, idx[j])]);
    Svd { u, s, v }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = to_faer(m).singular_values().expect("SVD iteration converges for finite input");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn norm2(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn vnorm(v: &CVec) -> f64 {
    v.norm()
}

/// Orthonormal basis of ran(m) keeping singular values above `abs_tol`.
pub fn orth(m: &CMat, abs_tol: f64) -> CMat {
    let d = svd(m);
    let r = d.s.iter().filter(|&&s| s > abs_tol).count();
    d.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the orthogonal complement of span(q) in C^n.
/// `q` must have orthonormal columns.
pub fn complement(q: &CMat, n: usize) -> CMat {
    if q.ncols() == 0 {
        return CMat::identity(n, n);
    }
    if q.ncols() >= n {
        return CMat::zeros(n, 0);
    }
    let p = CMat::identity(n, n) - q * q.adjoint();
    let d = svd(&p);
    let r = d.s.iter().filter(|&&s| s > 0.5).count();
    d.u.columns(0, r).into_owned()
}

/// Orthonormal basis of ker(m), singular values at most `abs_tol` count as zero.
pub fn null_space(m: &CMat, abs_tol: f64) -> CMat {
    let row_space = orth(&m.adjoint(), abs_tol);
    complement(&row_space, m.ncols())
}

/// Moore–Penrose pseudo-inverse with relative cutoff.
pub fn pinv(m: &CMat, rtol: f64) -> CMat {
    let d = svd(m);
    let cut = rtol * d.s.first().copied().unwrap_or(0.0);
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    for (k, &s) in d.s.iter().enumerate() {
        if s > cut && s > 0.0 {
            out += d.v.column(k) * d.u.column(k).adjoint() * re(1.0 / s);
        }
    }
    out
}

pub fn expm(m: &CMat) -> CMat {
    if m.nrows() == 0 {
        return CMat::zeros(0, 0);
    }
    m.clone().exp()
}

pub fn projector(q: &CMat) -> CMat {
    q * q.adjoint()
}

/// Sines of the principal angles between span(q1) and span(q2), ascending.
/// Both inputs must have orthonormal columns in the same ambient space.
pub fn principal_sines(q1: &CMat, q2: &CMat) -> Vec<f64> {
    let k = q1.ncols().min(q2.ncols());
    if k == 0 {
        return vec![];
    }
    // project the larger basis out of the smaller one
    let (small, large) = if q1.ncols() <= q2.ncols() { (q1, q2) } else { (q2, q1) };
    let resid = small - large * (large.adjoint() * small);
    let mut s = singular_values(&resid);
    s.truncate(k);
    s.iter_mut().for_each(|x| *x = x.min(1.0));
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

pub fn principal_angles(q1: &CMat, q2: &CMat) -> Vec<f64> {
    principal_sines(q1, q2).into_iter().map(f64::asin).collect()
}

pub fn eigenvalues(m: &CMat) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return vec![];
    }
    m.clone().schur().eigenvalues().map(|e| e.iter().copied().collect()).unwrap_or_default()
}

/// Solve `m x = b` by LU; `None` when the factorization breaks down.
pub fn lu_solve(m: &CMat, b: &CMat) -> Option<CMat> {
    m.clone().lu().solve(b)
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

pub fn cond(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&a), Some(&b)) if b > 0.0 => a / b,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        c64(s * a, s * b)
    })
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    complex_gaussian(n, 1, rng).column(0).into_owned()
}

/// Haar-distributed unitary matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let g = complex_gaussian(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { re(1.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// U diag(s) Vᴴ with singular values drawn uniformly from `[lo, hi]`.
pub fn random_well_conditioned<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> CMat {
    let u = random_unitary(n, rng);
    let v = random_unitary(n, rng);
    let s = CMat::from_diagonal(&CVec::from_fn(n, |_, _| re(rng.random_range(lo..=hi))));
    u * s * v.adjoint()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), b.shape()).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

pub fn hcat(blocks: &[&CMat]) -> CMat {
    let r = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(r, c);
    let mut j = 0;
    for b in blocks {
        assert_eq!(b.nrows(), r);
        out.view_mut((0, j), b.shape()).copy_from(b);
        j += b.ncols();
    }
    out
}

pub fn vcat(blocks: &[&CMat]) -> CMat {
    let c = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(r, c);
    let mut i = 0;
    for b in blocks {
        assert_eq!(b.ncols(), c);
        out.view_mut((i, 0), b.shape()).copy_from(b);
        i += b.nrows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn null_space_of_wide_matrix() {
        let m = from_real(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m, 1e-12);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-14);
        assert!((k.adjoint() * &k - CMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let m = from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = pinv(&m, RANK_RTOL);
        assert!((p - m).norm() < 1e-15);
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(5, &mut rng);
        assert!((u.adjoint() * &u - CMat::identity(5, 5)).norm() < 1e-13);
    }

    #[test]
    fn angles_between_coordinate_axes() {
        let e1 = from_real(2, 1, &[1.0, 0.0]);
        let e2 = from_real(2, 1, &[0.0, 1.0]);
        let a = principal_angles(&e1, &e2);
        assert!((a[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(principal_angles(&e1, &e1)[0] < 1e-12);
    }

    #[test]
    fn svd_sorted_descending() {
        let m = from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let d = svd(&m);
        for (a, b) in d.s.iter().zip([5.0, 3.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let rec = &d.u * CMat::from_diagonal(&CVec::from_iterator(3, d.s.iter().map(|&s| re(s)))) * d.v.adjoint();
        assert!((rec - m).norm() < 1e-13);
    }

    #[test]
    fn svd_of_complex_projectors() {
        let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = random_unitary(4, &mut g).columns(0, 3).into_owned();
            let p = CMat::identity(4, 4) - &q * q.adjoint();
            let d = svd(&p);
            let rec = &d.u * CMat::from_diagonal(&CVec::from_iterator(4, d.s.iter().map(|&s| re(s)))) * d.v.adjoint();
            assert!((rec - &p).norm() < 1e-13);
            assert!((d.s[0] - 1.0).abs() < 1e-13 && d.s[1] < 1e-13);
            assert!((q.adjoint() * complement(&q, 4)).norm() < 1e-13);
        }
    }
}

//! Example pencils: upwind transport discretization, Weierstraß-structured
//! pencils with a closed-form oracle, and dissipative-Hamiltonian pencils.

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, c64, inverse, re, CMat, CVec};
use crate::pencil::{estimate_resolvent_index, Pencil};
use crate::signal::{Signal, Term};
use crate::subspaces::{hilbert_decomposition, ANGLE_TOL};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 20240607;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(1/h)(I − shift)`: first-order upwind derivative with a zero ghost value.
fn upwind(k: usize) -> CMat {
    let h = 1.0 / k as f64;
    CMat::from_fn(k, k, |i, j| {
        if i == j {
            re(1.0 / h)
        } else if i == j + 1 {
            re(-1.0 / h)
        } else {
            re(0.0)
        }
    })
}

/// Upwind discretization of the coupled transport/constraint system on
/// (0,1) × (1,2): X = Cⁿ × Cᵐ, Z = Cⁿ × Cᵐ × C × C.
pub fn make_transport(n: usize, m: usize) -> Result<Pencil> {
    if n < 2 || m < 2 {
        return Err(Error::BadShape(format!("transport needs n, m ≥ 2, got n = {n}, m = {m}")));
    }
    let (nx, nz) = (n + m, n + m + 2);
    let mut e = CMat::zeros(nz, nx);
    e.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut a = CMat::zeros(nz, nx);
    a.view_mut((0, 0), (n, n)).copy_from(&(-upwind(n)));
    a.view_mut((n, n), (m, m)).copy_from(&(-upwind(m)));
    // −δ₀ on x₁, then −δ₁ on x₁ plus δ₁ on x₂ (left end of (1,2))
    a[(n + m, 0)] = re(-1.0);
    a[(n + m + 1, n - 1)] = re(-1.0);
    a[(n + m + 1, n)] = re(1.0);
    Ok(Pencil::new(e, a)?.with_omega_hint(0.0).with_name(format!("transport-{n}-{m}")))
}

/// Options beyond the basic `(n_s, n_n, k, seed)` parameters.
#[derive(Clone, Debug, Default)]
pub struct WeierstrassOptions {
    /// Use `T = S = I`.
    pub identity_transforms: bool,
    /// Prescribed spectrum of J (diagonal J when transforms are the identity).
    pub eigenvalues: Option<Vec<Complex64>>,
    /// Prescribed nilpotent block sizes (must sum to n_n, max = k).
    pub block_sizes: Option<Vec<usize>>,
}

/// Closed-form solutions of `d/dt(E x) = A x + f` for
/// `E = T·diag(I, N)·S`, `A = T·diag(J, I)·S`, `J = V·diag(d)·V⁻¹`.
#[derive(Clone, Debug)]
pub struct WeierstrassOracle {
    pub t: CMat,
    pub s: CMat,
    pub v: CMat,
    pub d: Vec<Complex64>,
    pub n_mat: CMat,
    pub block_sizes: Vec<usize>,
    pub n_s: usize,
    pub n_n: usize,
    t_inv: CMat,
    s_inv: CMat,
    v_inv: CMat,
}

impl WeierstrassOracle {
    pub fn dim(&self) -> usize {
        self.n_s + self.n_n
    }

    /// Largest nilpotent block (0 without an algebraic part).
    pub fn nilpotency_index(&self) -> usize {
        self.block_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Index of the resolvent growth: k with a nilpotent part, 0 otherwise.
    pub fn p_res(&self) -> usize {
        self.nilpotency_index()
    }

    pub fn j(&self) -> CMat {
        &self.v * CMat::from_diagonal(&CVec::from_vec(self.d.clone())) * &self.v_inv
    }

    /// Basis (not orthonormal) of the smooth subspace `S⁻¹[I; 0]`.
    pub fn smooth_space(&self) -> CMat {
        self.s_inv.columns(0, self.n_s).into_owned()
    }

    /// Basis of `S⁻¹[0; I]`.
    pub fn algebraic_space(&self) -> CMat {
        self.s_inv.columns(self.n_s, self.n_n).into_owned()
    }

    /// Basis of `T[I; 0]`.
    pub fn smooth_image(&self) -> CMat {
        self.t.columns(0, self.n_s).into_owned()
    }

    pub fn algebraic_image(&self) -> CMat {
        self.t.columns(self.n_s, self.n_n).into_owned()
    }

    /// Exact solution; only the smooth Weierstraß component of `x0` is used.
    pub fn solution(&self, x0: &CVec, f: &Signal) -> Result<Signal> {
        let n = self.dim();
        if x0.len() != n || f.dim() != n {
            return Err(Error::DimensionMismatch(format!("oracle dimension {n}")));
        }
        let y0 = &self.s * x0;
        let g = f.left_mul(&self.t_inv);
        let sel = |from: usize, len: usize| CMat::from_fn(len, n, |i, j| if j == from + i { re(1.0) } else { re(0.0) });

        // smooth part, mode by mode: w_i' = d_i w_i + h_i
        let h = g.left_mul(&(&self.v_inv * sel(0, self.n_s)));
        let w0 = &self.v_inv * y0.rows(0, self.n_s);
        let mut w = Signal::zero(self.n_s);
        for i in 0..self.n_s {
            let pick = CMat::from_fn(1, self.n_s, |_, j| if j == i { re(1.0) } else { re(0.0) });
            let hi = h.left_mul(&pick);
            let wi = hi
                .mul_exp(-self.d[i])
                .antiderivative()
                .add(&Signal::constant(&CVec::from_element(1, w0[i])))
                .mul_exp(self.d[i]);
            let place = CMat::from_fn(self.n_s, 1, |r, _| if r == i { re(1.0) } else { re(0.0) });
            w = w.add(&wi.left_mul(&place));
        }
        let ys = w.left_mul(&self.v);

        // algebraic part: y_n = −Σ N^i g_n^{(i)}
        let gn = g.left_mul(&sel(self.n_s, self.n_n));
        let mut yn = Signal::zero(self.n_n);
        let mut pow = CMat::identity(self.n_n, self.n_n);
        let mut gi = gn;
        for _ in 0..=self.nilpotency_index() {
            yn = yn.sub(&gi.left_mul(&pow));
            pow = &pow * &self.n_mat;
            gi = gi.derivative();
        }

        let stack_s = CMat::from_fn(n, self.n_s, |i, j| if i == j { re(1.0) } else { re(0.0) });
        let stack_n = CMat::from_fn(n, self.n_n, |i, j| if i == self.n_s + j { re(1.0) } else { re(0.0) });
        let y = ys.left_mul(&stack_s).add(&yn.left_mul(&stack_n));
        Ok(y.left_mul(&self.s_inv))
    }

    /// The initial value the exact solution actually takes.
    pub fn consistent_initial(&self, x0: &CVec, f: &Signal) -> Result<CVec> {
        Ok(self.solution(x0, f)?.eval(0.0))
    }
}

fn nilpotent_block(b: usize) -> CMat {
    CMat::from_fn(b, b, |i, j| if j == i + 1 { re(1.0) } else { re(0.0) })
}

pub fn make_weierstrass(n_s: usize, n_n: usize, k: usize, seed: u64) -> Result<(Pencil, WeierstrassOracle)> {
    make_weierstrass_with(n_s, n_n, k, seed, &WeierstrassOptions::default())
}

pub fn make_weierstrass_with(n_s: usize, n_n: usize, k: usize, seed: u64, opts: &WeierstrassOptions) -> Result<(Pencil, WeierstrassOracle)> {
    if n_s + n_n == 0 {
        return Err(Error::BadShape("empty pencil".into()));
    }
    if n_n > 0 && !(1..=n_n).contains(&k) {
        return Err(Error::BadShape(format!("need 1 ≤ k ≤ n_n, got k = {k}, n_n = {n_n}")));
    }
    let mut rng = rng(seed);
    let sizes = match &opts.block_sizes {
        Some(s) => {
            if s.iter().sum::<usize>() != n_n || s.iter().copied().max().unwrap_or(0) != if n_n == 0 { 0 } else { k } || s.contains(&0) {
                return Err(Error::BadShape(format!("block sizes {s:?} do not fit n_n = {n_n}, k = {k}")));
            }
            s.clone()
        }
        None if n_n == 0 => vec![],
        None => {
            let mut s = vec![k];
            let mut left = n_n - k;
            while left > 0 {
                let b = rng.random_range(1..=k.min(left));
                s.push(b);
                left -= b;
            }
            s
        }
    };
    let d: Vec<Complex64> = match &opts.eigenvalues {
        Some(d) if d.len() == n_s => d.clone(),
        Some(d) => return Err(Error::BadShape(format!("{} eigenvalues for n_s = {n_s}", d.len()))),
        None => (0..n_s).map(|_| c64(rng.random_range(-2.0..0.5), rng.random_range(-2.0..2.0))).collect(),
    };
    let (t, s, v) = if opts.identity_transforms {
        let n = n_s + n_n;
        (CMat::identity(n, n), CMat::identity(n, n), CMat::identity(n_s, n_s))
    } else {
        let n = n_s + n_n;
        let t = linalg::random_well_conditioned(n, 0.5, 2.0, &mut rng);
        let s = linalg::random_well_conditioned(n, 0.5, 2.0, &mut rng);
        let v = linalg::random_well_conditioned(n_s, 0.5, 2.0, &mut rng);
        (t, s, v)
    };
    let v_inv = inverse(&v).ok_or_else(|| Error::GenerationFailed("singular V".into()))?;
    let t_inv = inverse(&t).ok_or_else(|| Error::GenerationFailed("singular T".into()))?;
    let s_inv = inverse(&s).ok_or_else(|| Error::GenerationFailed("singular S".into()))?;
    let blocks: Vec<CMat> = sizes.iter().map(|&b| nilpotent_block(b)).collect();
    let n_mat = block_diag(&blocks.iter().collect::<Vec<_>>());
    let j = &v * CMat::from_diagonal(&CVec::from_vec(d.clone())) * &v_inv;
    let e = &t * block_diag(&[&CMat::identity(n_s, n_s), &n_mat]) * &s;
    let a = &t * block_diag(&[&j, &CMat::identity(n_n, n_n)]) * &s;
    let omega = d.iter().map(|z| z.re).fold(0.0, f64::max);
    let pencil = Pencil::new(e, a)?.with_omega_hint(omega).with_name(format!("weierstrass-{n_s}-{n_n}-{k}-{seed}"));
    let oracle = WeierstrassOracle { t, s, v, d, n_mat, block_sizes: sizes, n_s, n_n, t_inv, s_inv, v_inv };
    Ok((pencil, oracle))
}

/// `E = BBᴴ`, `A = K − P` from explicit parts.
pub fn hamiltonian_from_parts(b: &CMat, k: &CMat, p: &CMat) -> Result<Pencil> {
    let n = b.nrows();
    if k.shape() != (n, n) || p.shape() != (n, n) {
        return Err(Error::BadShape("K and P must be n×n".into()));
    }
    if (k + k.adjoint()).norm() > 1e-12 * (1.0 + k.norm()) {
        return Err(Error::InvalidInput("K is not skew-adjoint".into()));
    }
    if (p - p.adjoint()).norm() > 1e-12 * (1.0 + p.norm()) || linalg::eigenvalues(p).iter().any(|z| z.re < -1e-12) {
        return Err(Error::InvalidInput("P is not self-adjoint nonnegative".into()));
    }
    Ok(Pencil::new(b * b.adjoint(), k - p)?.with_omega_hint(0.0))
}

/// Seeded dissipative-Hamiltonian pencil with `rank E = rank_e`.
///
/// `P` carries a positive shift so `λE − A` is invertible on the closed right
/// half-plane; candidates failing the regularity or X_ran ∩ ker E = {0}
/// checks are redrawn a bounded number of times.
pub fn make_hamiltonian(n: usize, rank_e: usize, seed: u64) -> Result<Pencil> {
    if n == 0 || rank_e > n {
        return Err(Error::BadShape(format!("need 0 ≤ rank_E ≤ n, n ≥ 1; got n = {n}, rank_E = {rank_e}")));
    }
    let mut rng = rng(seed);
    for _ in 0..8 {
        let b = linalg::complex_gaussian(n, rank_e, &mut rng);
        let x = linalg::complex_gaussian(n, n, &mut rng);
        let k = (&x - x.adjoint()) * re(0.5);
        let c = linalg::complex_gaussian(n, n, &mut rng);
        let p = &c * c.adjoint() * re(1.0 / n as f64) + CMat::identity(n, n) * re(0.5);
        let pencil = hamiltonian_from_parts(&b, &k, &p)?.with_name(format!("hamiltonian-{n}-{rank_e}-{seed}"));
        if let Ok(report) = estimate_resolvent_index(&pencil, 10.0, 1000.0, 16) {
            let mu = re(1.0);
            if let Ok(d) = hilbert_decomposition(&pencil, mu, report.p_res + 1) {
                let ok = d.disjointness.as_ref().and_then(|f| f.angle_ran_ker_e).map(|a| a > 100.0 * ANGLE_TOL).unwrap_or(true);
                if ok {
                    return Ok(pencil);
                }
            }
        }
    }
    Err(Error::GenerationFailed(format!("no admissible dissipative-Hamiltonian pencil for n = {n}, rank {rank_e}")))
}

/// The 2×2 instance `B = e₁`, `K = [[0,1],[−1,0]]`, `P = I`.
pub fn small_hamiltonian() -> Pencil {
    let b = linalg::from_real(2, 1, &[1.0, 0.0]);
    let k = linalg::from_real(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    hamiltonian_from_parts(&b, &k, &CMat::identity(2, 2)).expect("valid parts").with_name("hamiltonian-2")
}

/// Random exp-polynomial with `n_terms` terms of degree ≤ `max_power`.
pub fn random_signal<R: Rng + ?Sized>(dim: usize, n_terms: usize, max_power: u32, rng: &mut R) -> Signal {
    let terms = (0..n_terms)
        .map(|_| Term {
            coeff: linalg::complex_gaussian_vec(dim, rng).iter().copied().collect(),
            power: rng.random_range(0..=max_power),
            rate: c64(rng.random_range(-1.0..0.5), rng.random_range(-2.0..2.0)),
        })
        .collect();
    Signal::from_terms(dim, terms).expect("finite terms")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cvec_real, from_real};
    use crate::pencil::{chain_index, resolvent};

    #[test]
    fn transport_shapes() {
        let p = make_transport(4, 3).unwrap();
        assert_eq!((p.n_z(), p.n_x()), (9, 7));
        assert!((p.e().view((0, 0), (4, 4)) - CMat::identity(4, 4)).norm() == 0.0);
        assert_eq!(p.e().iter().filter(|z| z.norm() != 0.0).count(), 4);
        assert!(make_transport(1, 3).is_err());
    }

    #[test]
    fn weierstrass_special_cases() {
        let opts = WeierstrassOptions { identity_transforms: true, eigenvalues: Some(vec![re(-1.0)]), block_sizes: None };
        let (p, _) = make_weierstrass_with(1, 1, 1, 0, &opts).unwrap();
        assert!((p.e() - from_real(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() == 0.0);
        assert!((p.a() - from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0])).norm() == 0.0);
        let opts = WeierstrassOptions { identity_transforms: true, ..Default::default() };
        let (p, _) = make_weierstrass_with(0, 2, 2, 0, &opts).unwrap();
        assert!((p.e() - from_real(2, 2, &[0.0, 1.0, 0.0, 0.0])).norm() == 0.0);
        assert!((p.a() - CMat::identity(2, 2)).norm() == 0.0);
        assert!(make_weierstrass(1, 2, 3, 0).is_err());
    }

    #[test]
    fn weierstrass_index_matches() {
        let (p, o) = make_weierstrass(2, 2, 2, 42).unwrap();
        let r = estimate_resolvent_index(&p, 10.0, 1000.0, 16).unwrap();
        assert_eq!(r.p_res, o.nilpotency_index());
        assert_eq!(chain_index(&p).0, 2);
    }

    #[test]
    fn oracle_solves_the_dae() {
        let (p, o) = make_weierstrass(3, 3, 2, 7).unwrap();
        let mut g = rng(1);
        let f = random_signal(6, 3, 2, &mut g);
        let x0 = linalg::complex_gaussian_vec(6, &mut g);
        let x = o.solution(&x0, &f).unwrap();
        let r = x.derivative().left_mul(p.e()).sub(&x.left_mul(p.a())).sub(&f);
        for &t in &[0.0, 0.7, 3.0] {
            assert!(r.eval(t).norm() < 1e-9 * (1.0 + f.eval(t).norm() + x.eval(t).norm()));
        }
    }

    #[test]
    fn small_hamiltonian_matches_hand_computation() {
        let p = small_hamiltonian();
        assert!((p.a() - from_real(2, 2, &[-1.0, 1.0, -1.0, -1.0])).norm() < 1e-15);
        // det(λE − A) = λ + 2
        let l = re(0.5);
        let m = p.shifted(l);
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        assert!((det - re(2.5)).norm() < 1e-14);
        assert_eq!(estimate_resolvent_index(&p, 10.0, 1000.0, 16).unwrap().p_res, 1);
        assert!(resolvent(&p, re(-2.0)).is_err());
        let _ = cvec_real(&[1.0]);
    }

    #[test]
    fn hamiltonian_is_reproducible() {
        let a = make_hamiltonian(6, 3, 5).unwrap();
        let b = make_hamiltonian(6, 3, 5).unwrap();
        assert_eq!(a.e(), b.e());
        assert_eq!(a.a(), b.a());
        let full = make_hamiltonian(4, 4, 1).unwrap();
        assert!(estimate_resolvent_index(&full, 10.0, 1000.0, 16).unwrap().p_res <= 1);
    }
}

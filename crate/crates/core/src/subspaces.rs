//! Range/kernel stabilization of the right and left resolvents and the
//! orthogonal splitting into a range part and complement blocks.

use crate::error::{Error, Result};
use crate::linalg::{self, complement, norm2, null_space, orth, principal_sines, CMat, CVec, RANK_RTOL};
use crate::pencil::{left_resolvent, right_resolvent, Pencil};
use num_complex::Complex64;
use serde::Serialize;

/// Smallest principal angle (radians) above which subspaces count as disjoint.
pub const ANGLE_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    basis: CMat,
}

fn normalize_phases(mut q: CMat) -> CMat {
    for mut col in q.column_iter_mut() {
        let (_, piv) = col.iter().fold((0.0, Complex64::new(0.0, 0.0)), |(m, z), &w| {
            if w.norm() > m + 1e-12 {
                (w.norm(), w)
            } else {
                (m, z)
            }
        });
        if piv.norm() > 0.0 {
            let ph = piv.conj() / piv.norm();
            col.iter_mut().for_each(|z| *z *= ph);
        }
    }
    q
}

impl SubspaceBasis {
    /// Wrap orthonormal columns; phases are normalized so the largest entry
    /// of each column is real and positive.
    pub fn from_orthonormal(q: CMat) -> Self {
        SubspaceBasis { basis: normalize_phases(q) }
    }

    /// Orthonormal basis of the column span of `m`.
    pub fn span_of(m: &CMat, abs_tol: f64) -> Self {
        Self::from_orthonormal(orth(m, abs_tol))
    }

    pub fn full(n: usize) -> Self {
        SubspaceBasis { basis: CMat::identity(n, n) }
    }

    pub fn empty(n: usize) -> Self {
        SubspaceBasis { basis: CMat::zeros(n, 0) }
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn projector(&self) -> CMat {
        linalg::projector(&self.basis)
    }

    pub fn project(&self, v: &CVec) -> CVec {
        &self.basis * (self.basis.adjoint() * v)
    }

    pub fn distance(&self, v: &CVec) -> f64 {
        (v - self.project(v)).norm()
    }

    pub fn complement(&self) -> Self {
        Self::from_orthonormal(complement(&self.basis, self.ambient_dim()))
    }

    /// Orthogonal complement of `self` inside `outer` (requires self ⊆ outer).
    pub fn complement_in(&self, outer: &SubspaceBasis) -> Self {
        let q = outer.basis();
        let inner = q.adjoint() * &self.basis;
        let c = complement(&orth(&inner, 0.5), q.ncols());
        Self::from_orthonormal(q * c)
    }

    pub fn smallest_angle(&self, other: &SubspaceBasis) -> Option<f64> {
        principal_sines(&self.basis, &other.basis).first().map(|s| s.asin())
    }

    /// Number of principal angles at most [`ANGLE_TOL`].
    pub fn intersection_dim(&self, other: &SubspaceBasis) -> usize {
        principal_sines(&self.basis, &other.basis).iter().filter(|s| s.asin() <= ANGLE_TOL).count()
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.rank();
        (self.basis.adjoint() * &self.basis - CMat::identity(k, k)).norm()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DisjointnessReport {
    /// Smallest principal angle between X_ran and ker E (None if one is trivial).
    pub angle_ran_ker_e: Option<f64>,
    pub disjoint_ran_e: bool,
    pub angle_ran_ker: Option<f64>,
    pub disjoint_kernel: bool,
    pub dim_x_ran_cap_x_ker: usize,
    pub dim_z_ran_cap_z_ker: usize,
    /// dim X_ran + dim X_ker == n_X
    pub x_direct_sum_complete: bool,
    pub z_direct_sum_complete: bool,
}

#[derive(Clone, Debug)]
pub struct DecompositionReport {
    pub mu: Complex64,
    pub p_used: usize,
    /// X₀ ⊇ X₁ ⊇ … ⊇ X_s with X_k = ran R_r(μ)^k.
    pub x_chain: Vec<SubspaceBasis>,
    pub z_chain: Vec<SubspaceBasis>,
    /// `w_x[k-1] = X_{k-1} ⊖ X_k`, k = 1..s.
    pub w_x: Vec<SubspaceBasis>,
    pub w_z: Vec<SubspaceBasis>,
    pub p_z_ran: CMat,
    pub p_w_z: Vec<CMat>,
    pub stagnation_k: usize,
    /// ker R_r(μ)^p_used and ker R_l(μ)^p_used.
    pub x_ker: SubspaceBasis,
    pub z_ker: SubspaceBasis,
    pub disjointness: Option<DisjointnessReport>,
    /// False when the number of complement levels differs from p_used − 1.
    pub block_count_matches: bool,
}

impl DecompositionReport {
    pub fn x_ran(&self) -> &SubspaceBasis {
        self.x_chain.last().unwrap()
    }

    pub fn z_ran(&self) -> &SubspaceBasis {
        self.z_chain.last().unwrap()
    }

    pub fn x_ranks(&self) -> Vec<usize> {
        self.x_chain.iter().map(|s| s.rank()).collect()
    }

    pub fn z_ranks(&self) -> Vec<usize> {
        self.z_chain.iter().map(|s| s.rank()).collect()
    }

    /// Unitary `[X_ran, W_{X,s}, …, W_{X,1}]`.
    pub fn x_unitary(&self) -> CMat {
        ordered_basis(self.x_ran(), &self.w_x)
    }

    /// Unitary `[Z_ran, W_{Z,s}, …, W_{Z,1}]`.
    pub fn z_unitary(&self) -> CMat {
        ordered_basis(self.z_ran(), &self.w_z)
    }

    pub fn disjoint_ran_e(&self) -> Option<bool> {
        self.disjointness.as_ref().map(|d| d.disjoint_ran_e)
    }

    pub fn disjoint_kernel(&self) -> Option<bool> {
        self.disjointness.as_ref().map(|d| d.disjoint_kernel)
    }
}

fn ordered_basis(ran: &SubspaceBasis, w: &[SubspaceBasis]) -> CMat {
    let mut blocks: Vec<&CMat> = vec![ran.basis()];
    blocks.extend(w.iter().rev().map(|b| b.basis()));
    linalg::hcat(&blocks)
}

/// `ran M, ran M², …` until the rank stops dropping.
fn range_chain(m: &CMat, p_max: usize) -> std::result::Result<Vec<SubspaceBasis>, Vec<usize>> {
    let n = m.nrows();
    let tol = RANK_RTOL * norm2(m);
    let mut chain = vec![SubspaceBasis::full(n)];
    for _ in 0..=p_max {
        let last = chain.last().unwrap();
        let next = if last.rank() == 0 {
            SubspaceBasis::empty(n)
        } else {
            // re-expressed inside `last` so the chain is nested to rounding
            let raw = SubspaceBasis::span_of(&(m * last.basis()), tol);
            SubspaceBasis::from_orthonormal(last.basis() * orth(&(last.basis().adjoint() * raw.basis()), 0.5))
        };
        if next.rank() == last.rank() {
            return Ok(chain);
        }
        chain.push(next);
    }
    Err(chain.iter().map(|s| s.rank()).collect())
}

/// `ker M^k` computed as `{x : M x ∈ ker M^{k−1}}`.
pub fn kernel_of_power(m: &CMat, k: usize) -> SubspaceBasis {
    let n = m.ncols();
    let tol = RANK_RTOL * norm2(m).max(f64::MIN_POSITIVE);
    let mut ker = SubspaceBasis::empty(n);
    for _ in 0..k {
        let away = CMat::identity(n, n) - ker.projector();
        let next = SubspaceBasis::from_orthonormal(null_space(&(away * m), tol));
        let done = next.rank() == ker.rank();
        ker = next;
        if done {
            break;
        }
    }
    if ker.rank() == n {
        SubspaceBasis::full(n)
    } else {
        ker
    }
}

fn stagnation(chain: &[SubspaceBasis]) -> usize {
    chain.len() - 1
}

/// X_k = ran R_r(μ)^k and Z_k = ran R_l(μ)^k up to stagnation.
pub fn stabilized_sequences(p: &Pencil, mu: Complex64, p_max: usize) -> Result<DecompositionReport> {
    let rr = right_resolvent(p, mu)?;
    let rl = left_resolvent(p, mu)?;
    let x_chain = range_chain(&rr, p_max).map_err(|ranks| Error::NoStagnation { p_max, ranks })?;
    let z_chain = range_chain(&rl, p_max).map_err(|ranks| Error::NoStagnation { p_max, ranks })?;
    let k = stagnation(&x_chain).max(stagnation(&z_chain));
    let pad = |mut c: Vec<SubspaceBasis>| {
        while c.len() <= k {
            c.push(c.last().unwrap().clone());
        }
        c
    };
    let x_chain = pad(x_chain);
    let z_chain = pad(z_chain);
    let z_ran = z_chain.last().unwrap().projector();
    Ok(DecompositionReport {
        mu,
        p_used: k,
        x_ker: kernel_of_power(&rr, k),
        z_ker: kernel_of_power(&rl, k),
        x_chain,
        z_chain,
        w_x: vec![],
        w_z: vec![],
        p_z_ran: z_ran,
        p_w_z: vec![],
        stagnation_k: k,
        disjointness: None,
        block_count_matches: true,
    })
}

/// Orthogonal decomposition `X = X_ran ⊕ W_{X,s} ⊕ … ⊕ W_{X,1}` and likewise for Z.
pub fn hilbert_decomposition(p: &Pencil, mu: Complex64, p_int: usize) -> Result<DecompositionReport> {
    let p_max = p_int.max(p.n_x().max(p.n_z()));
    let mut d = stabilized_sequences(p, mu, p_max)?;
    let w = |chain: &[SubspaceBasis]| -> Vec<SubspaceBasis> {
        chain.windows(2).map(|c| c[1].complement_in(&c[0])).collect()
    };
    d.w_x = w(&d.x_chain);
    d.w_z = w(&d.z_chain);
    d.p_w_z = d.w_z.iter().map(|b| b.projector()).collect();
    d.p_used = p_int;
    let rr = right_resolvent(p, mu)?;
    let rl = left_resolvent(p, mu)?;
    d.x_ker = kernel_of_power(&rr, p_int);
    d.z_ker = kernel_of_power(&rl, p_int);
    d.block_count_matches = d.stagnation_k + 1 == p_int;
    d.disjointness = Some(check_disjointness(&d, p));
    Ok(d)
}

pub fn check_disjointness(d: &DecompositionReport, p: &Pencil) -> DisjointnessReport {
    let ker_e = SubspaceBasis::from_orthonormal(null_space(p.e(), RANK_RTOL * norm2(p.e()).max(f64::MIN_POSITIVE)));
    let x_ran = d.x_ran();
    let angle_ran_ker_e = x_ran.smallest_angle(&ker_e);
    let angle_ran_ker = x_ran.smallest_angle(&d.x_ker);
    DisjointnessReport {
        angle_ran_ker_e,
        disjoint_ran_e: angle_ran_ker_e.map(|a| a > ANGLE_TOL).unwrap_or(true),
        angle_ran_ker,
        disjoint_kernel: angle_ran_ker.map(|a| a > ANGLE_TOL).unwrap_or(true),
        dim_x_ran_cap_x_ker: x_ran.intersection_dim(&d.x_ker),
        dim_z_ran_cap_z_ker: d.z_ran().intersection_dim(&d.z_ker),
        x_direct_sum_complete: x_ran.rank() + d.x_ker.rank() == p.n_x(),
        z_direct_sum_complete: d.z_ran().rank() + d.z_ker.rank() == p.n_z(),
    }
}

#[derive(Clone, Debug)]
pub struct BlockResolvent {
    /// `Uᴴ R_l(μ) U` in the ordered basis.
    pub matrix: CMat,
    pub basis: CMat,
    pub block_sizes: Vec<usize>,
    pub labels: Vec<String>,
    /// Largest norm among blocks that must vanish, relative to ‖R_l(μ)‖.
    pub pattern_violation: f64,
}

impl BlockResolvent {
    pub fn block(&self, i: usize, j: usize) -> CMat {
        let off = |k: usize| self.block_sizes[..k].iter().sum::<usize>();
        self.matrix.view((off(i), off(j)), (self.block_sizes[i], self.block_sizes[j])).into_owned()
    }

    pub fn reconstruct(&self) -> CMat {
        &self.basis * &self.matrix * self.basis.adjoint()
    }
}

/// `R_l(μ)` in the basis `(Z_ran, W_{Z,s}, …, W_{Z,1})`.
pub fn block_left_resolvent(d: &DecompositionReport, p: &Pencil, mu: Complex64) -> Result<BlockResolvent> {
    if d.w_z.len() + 1 != d.z_chain.len() {
        return Err(Error::BasisMismatch("report carries no complement blocks; use hilbert_decomposition".into()));
    }
    let u = d.z_unitary();
    let n = p.n_z();
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::BasisMismatch(format!("blocks span {} of {n} dimensions", u.ncols())));
    }
    if (u.adjoint() * &u - CMat::identity(n, n)).norm() > 1e-10 {
        return Err(Error::BasisMismatch("block basis is not unitary".into()));
    }
    let rl = left_resolvent(p, mu)?;
    let m = u.adjoint() * &rl * &u;
    let mut sizes = vec![d.z_ran().rank()];
    let mut labels = vec!["Z_ran".to_string()];
    for (k, w) in d.w_z.iter().enumerate().rev() {
        sizes.push(w.rank());
        labels.push(format!("W_Z{}", k + 1));
    }
    let mut out = BlockResolvent { matrix: m, basis: u, block_sizes: sizes, labels, pattern_violation: 0.0 };
    let scale = norm2(&rl).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for i in 1..out.block_sizes.len() {
        for j in 0..=i {
            let b = out.block(i, j);
            if b.len() > 0 {
                worst = worst.max(norm2(&b));
            }
        }
    }
    out.pattern_violation = worst / scale;
    Ok(out)
}

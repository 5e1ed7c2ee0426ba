//! The pencil restricted to the kernel spaces `X_ker = ker R_r(μ)^p`,
//! `Z_ker = ker R_l(μ)^p`, where it is `(N A_ker, A_ker)` with `N` nilpotent.

use crate::error::{Error, Result};
use crate::linalg::{self, inverse, norm2, CMat, COND_CAP};
use crate::pencil::{left_resolvent, right_resolvent, Pencil};
use crate::signal::Signal;
use crate::subspaces::{kernel_of_power, SubspaceBasis};
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct KernelRestriction {
    pub basis_x_ker: SubspaceBasis,
    pub basis_z_ker: SubspaceBasis,
    pub a_ker: CMat,
    pub e_ker: CMat,
    pub a_ker_inv: CMat,
    /// `N = E_ker A_ker⁻¹`.
    pub n: CMat,
    pub nilpotency_degree: usize,
    /// ‖(I − P_{Z_ker}) A X_ker‖ and the same for E; both vanish in exact arithmetic.
    pub leakage: f64,
}

fn nilpotency_degree(n: &CMat) -> usize {
    let dim = n.nrows();
    if dim == 0 {
        return 0;
    }
    let scale = norm2(n).max(1.0);
    let mut pow = n.clone();
    for d in 1..=dim + 1 {
        if norm2(&pow) <= 1e-10 * scale.powi(d as i32) {
            return d;
        }
        pow = &pow * n;
    }
    usize::MAX
}

pub fn restrict_to_kernel(p: &Pencil, mu: Complex64, p_int: usize) -> Result<KernelRestriction> {
    let xk = kernel_of_power(&right_resolvent(p, mu)?, p_int);
    let zk = kernel_of_power(&left_resolvent(p, mu)?, p_int);
    if xk.rank() != zk.rank() {
        return Err(Error::AKerSingular(format!("dim X_ker = {} but dim Z_ker = {}", xk.rank(), zk.rank())));
    }
    let (x, z) = (xk.basis(), zk.basis());
    let a_full = p.a() * x;
    let e_full = p.e() * x;
    let away = CMat::identity(p.n_z(), p.n_z()) - zk.projector();
    let leakage = if x.ncols() == 0 { 0.0 } else { norm2(&(&away * &a_full)).max(norm2(&(&away * &e_full))) / p.scale() };
    let a_ker = z.adjoint() * a_full;
    let e_ker = z.adjoint() * e_full;
    let k = a_ker.nrows();
    let a_ker_inv = if k == 0 {
        CMat::zeros(0, 0)
    } else {
        let c = linalg::cond(&a_ker);
        if !(c <= COND_CAP) {
            return Err(Error::AKerSingular(format!("condition number {c:.3e}")));
        }
        let inv = inverse(&a_ker).ok_or_else(|| Error::AKerSingular("LU breakdown".into()))?;
        if (&a_ker * &inv - CMat::identity(k, k)).norm() > 1e-10 * c.max(1.0) {
            return Err(Error::AKerSingular("inverse residual too large".into()));
        }
        inv
    };
    let n = &e_ker * &a_ker_inv;
    Ok(KernelRestriction {
        nilpotency_degree: nilpotency_degree(&n),
        basis_x_ker: xk,
        basis_z_ker: zk,
        a_ker,
        e_ker,
        a_ker_inv,
        n,
        leakage,
    })
}

impl KernelRestriction {
    pub fn dim(&self) -> usize {
        self.a_ker.nrows()
    }

    /// ‖N^p‖, the weight of the last term in the derivative sum.
    pub fn top_term_norm(&self, p_int: usize) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let mut pow = CMat::identity(self.dim(), self.dim());
        for _ in 0..p_int {
            pow = &pow * &self.n;
        }
        norm2(&pow)
    }

    /// True when `N^p = 0` to `1e−10·‖N‖^p`.
    pub fn top_term_vanishes(&self, p_int: usize) -> bool {
        self.top_term_norm(p_int) <= 1e-10 * norm2(&self.n).max(1.0).powi(p_int as i32)
    }
}

/// `x = −Σ_{i=0}^{p} A_ker⁻¹ N^i f^{(i)}` in X_ker coordinates.
pub fn solve_kernel_inhomogeneity(k: &KernelRestriction, f: &Signal, p_int: usize) -> Result<Signal> {
    if f.dim() != k.dim() {
        return Err(Error::DimensionMismatch(format!("signal has {} components, Z_ker has dimension {}", f.dim(), k.dim())));
    }
    let mut x = Signal::zero(k.dim());
    let mut weight = k.a_ker_inv.clone();
    let mut fi = f.clone();
    for _ in 0..=p_int {
        x = x.sub(&fi.left_mul(&weight));
        weight = &weight * &k.n;
        fi = fi.derivative();
    }
    Ok(x)
}

/// Solve with ambient-space data: `f` valued in Z (projected onto Z_ker),
/// result valued in X.
pub fn solve_kernel_ambient(k: &KernelRestriction, f: &Signal, p_int: usize) -> Result<Signal> {
    let fz = f.left_mul(&k.basis_z_ker.basis().adjoint());
    Ok(solve_kernel_inhomogeneity(k, &fz, p_int)?.left_mul(k.basis_x_ker.basis()))
}

/// max over `ts` of ‖d/dt(E_ker x) − A_ker x − f‖.
pub fn kernel_residual(k: &KernelRestriction, x: &Signal, f: &Signal, ts: &[f64]) -> f64 {
    let r = x.derivative().left_mul(&k.e_ker).sub(&x.left_mul(&k.a_ker)).sub(f);
    ts.iter().map(|&t| r.eval(t).norm()).fold(0.0, f64::max)
}

//! Solution of `d/dt(E x) = A x + f` with residual certification.
//!
//! Paths: homogeneous propagation on X_ran (closed form or contour
//! inversion), range-part forcing by convolution with `S_r`, and the full
//! back-substitution through the block structure of `R_l(μ)`.

use crate::error::{Error, Result};
use crate::kernel::{restrict_to_kernel, solve_kernel_ambient};
use crate::laplace::{ContourConfig, ContourSamples};
use crate::linalg::{self, expm, hcat, inverse, norm2, pinv, re, CMat, CVec};
use crate::pencil::{resolvent, right_resolvent, solve_shifted, Pencil};
use crate::realized::{ClosedForm, Realized};
use crate::semigroup::{Backend, EvaluatorOptions, SemigroupEvaluator, CONTOUR_TOL};
use crate::signal::Signal;
use crate::subspaces::block_left_resolvent;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Residual threshold for the classical/mild classification (relative).
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Agreement required between independent solution paths.
pub const CROSS_TOL: f64 = 1e-4;
/// Relative residual above which a lift through E is rejected.
pub const LIFT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Contour,
    Decomp,
    /// Closed form when available, cross-checked by contour inversion.
    Auto,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contour" => Ok(Method::Contour),
            "decomp" => Ok(Method::Decomp),
            "auto" => Ok(Method::Auto),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Classical,
    Mild,
    None,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    /// ‖x(0⁺) − x₀‖.
    pub distance: f64,
    /// `distance / max(1, ‖x₀‖)`.
    pub relative: f64,
    pub consistent: bool,
    /// "oblique" (along X_ker) or "least_squares" (through E).
    pub projection: &'static str,
}

/// Relative residuals on the verification grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Residuals {
    /// max ‖E x′ − A x − f‖ / scale.
    pub classical: f64,
    /// max ‖E x(t) − E x₀ − A∫x − ∫f‖ / scale.
    pub mild: f64,
    /// ‖x(0⁺) − x₀‖ / max(1, ‖x₀‖, max‖x‖).
    pub initial: f64,
    pub scale: f64,
}

impl Residuals {
    pub fn classify(&self, tol: f64) -> Classification {
        if self.classical <= tol && self.initial <= tol {
            Classification::Classical
        } else if self.mild <= tol {
            Classification::Mild
        } else {
            Classification::None
        }
    }
}

#[derive(Clone, Debug)]
pub enum Representation {
    ClosedForm(ClosedForm),
    /// Values with exact derivative samples at the same times.
    Sampled {
        derivatives: Vec<CVec>,
        /// Exact `∫₀^t x` at the same times, when the path provides it.
        integrals: Option<Vec<CVec>>,
    },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub method: &'static str,
    pub times: Vec<f64>,
    pub values: Vec<CVec>,
    pub representation: Representation,
    pub x0: CVec,
    pub residuals: Residuals,
    pub classification: Classification,
    pub consistency: ConsistencyReport,
    /// Relative difference to an independent path, when one was run.
    pub cross_check: Option<f64>,
}

impl Trajectory {
    pub fn closed_form(&self) -> Option<&ClosedForm> {
        match &self.representation {
            Representation::ClosedForm(c) => Some(c),
            Representation::Sampled { .. } => None,
        }
    }

    pub fn residual_max(&self) -> f64 {
        self.residuals.classical.max(self.residuals.initial)
    }

    /// max_t ‖x(t) − y(t)‖ / max(max_t ‖y(t)‖, floor).
    pub fn relative_difference(&self, other: &[CVec], floor: f64) -> f64 {
        let diff = self.values.iter().zip(other).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let size = other.iter().map(|v| v.norm()).fold(floor, f64::max);
        diff / size
    }
}

/// Inhomogeneity: an exp-polynomial, or samples joined linearly.
#[derive(Clone, Debug)]
pub enum Forcing {
    Signal(Signal),
    Sampled { times: Vec<f64>, values: Vec<CVec> },
}

impl Forcing {
    pub fn zero(dim: usize) -> Self {
        Forcing::Signal(Signal::zero(dim))
    }

    pub fn sampled(times: Vec<f64>, values: Vec<CVec>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidInput("sampled forcing needs ≥ 2 times with one value each".into()));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("sample times must start at 0 and increase strictly".into()));
        }
        let d = values[0].len();
        if values.iter().any(|v| v.len() != d || !v.iter().all(|z| z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidInput("sample values must be finite with a common dimension".into()));
        }
        Ok(Forcing::Sampled { times, values })
    }

    pub fn dim(&self) -> usize {
        match self {
            Forcing::Signal(s) => s.dim(),
            Forcing::Sampled { values, .. } => values[0].len(),
        }
    }

    fn segment(times: &[f64], t: f64) -> usize {
        match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(times.len() - 2),
            Err(i) => i.saturating_sub(1).min(times.len() - 2),
        }
    }

    pub fn eval(&self, t: f64) -> CVec {
        match self {
            Forcing::Signal(s) => s.eval(t),
            Forcing::Sampled { times, values } => {
                let i = Self::segment(times, t);
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                &values[i] * re(1.0 - w) + &values[i + 1] * re(w)
            }
        }
    }

    /// `∫₀^t f`.
    pub fn integral(&self, t: f64) -> CVec {
        match self {
            Forcing::Signal(s) => s.antiderivative().eval(t),
            Forcing::Sampled { times, values } => {
                let mut acc = CVec::zeros(values[0].len());
                for i in 0..times.len() - 1 {
                    if times[i] >= t {
                        break;
                    }
                    let b = times[i + 1].min(t);
                    let fb = self.eval(b);
                    acc += (&values[i] + fb) * re(0.5 * (b - times[i]));
                }
                acc
            }
        }
    }

    fn horizon(&self) -> f64 {
        match self {
            Forcing::Signal(_) => f64::INFINITY,
            Forcing::Sampled { times, .. } => *times.last().unwrap(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub mu: Option<Complex64>,
    /// Integration order; defaults to p_res + 1.
    pub p: Option<usize>,
    /// Reject inconsistent initial values instead of projecting them.
    pub strict: bool,
    pub tol: f64,
    pub cross_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { mu: None, p: None, strict: false, tol: RESIDUAL_TOL, cross_tol: CROSS_TOL }
    }
}

fn check_grid(ts: &[f64]) -> Result<Vec<f64>> {
    if ts.is_empty() || ts.iter().any(|t| !t.is_finite() || *t < 0.0) || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("time grid must be nonempty, nonnegative and strictly increasing".into()));
    }
    let mut g = ts.to_vec();
    if g[0] != 0.0 {
        g.insert(0, 0.0);
    }
    Ok(g)
}

/// `[B₁ B₂]⁻¹` when the two bases form a well-conditioned basis of the space.
fn splitting(b1: &CMat, b2: &CMat) -> Option<CMat> {
    if b1.nrows() != b1.ncols() + b2.ncols() {
        return None;
    }
    let b = hcat(&[b1, b2]);
    if b.ncols() == 0 || linalg::cond(&b) > 1e10 {
        return if b.ncols() == 0 { Some(b) } else { None };
    }
    inverse(&b)
}

/// Solution machinery for one pencil; the evaluator and splittings are
/// computed once and shared by every path.
pub struct Solver {
    pencil: Pencil,
    ev: SemigroupEvaluator,
    opts: SolveOptions,
    /// `[Q_ran Q_ker]⁻¹` on X.
    split_x: Option<CMat>,
    split_z: Option<CMat>,
}

impl Solver {
    pub fn new(pencil: &Pencil, opts: SolveOptions) -> Result<Self> {
        let eo = EvaluatorOptions { mu: opts.mu, p: opts.p, backend: Backend::ClosedForm };
        let ev = match SemigroupEvaluator::new(pencil, eo.clone()) {
            Err(Error::DecompositionUnavailable(_)) => SemigroupEvaluator::new(pencil, EvaluatorOptions { backend: Backend::Contour, ..eo })?,
            other => other?,
        };
        let d = ev.decomposition();
        let split_x = splitting(d.x_ran().basis(), d.x_ker.basis());
        let split_z = splitting(d.z_ran().basis(), d.z_ker.basis());
        Ok(Solver { pencil: pencil.clone(), ev, opts, split_x, split_z })
    }

    pub fn evaluator(&self) -> &SemigroupEvaluator {
        &self.ev
    }

    pub fn pencil(&self) -> &Pencil {
        &self.pencil
    }

    pub fn options(&self) -> &SolveOptions {
        &self.opts
    }

    fn q(&self) -> &CMat {
        self.ev.x_ran().basis()
    }

    fn rank(&self) -> usize {
        self.q().ncols()
    }

    fn projection_kind(&self) -> &'static str {
        if self.split_x.is_some() {
            "oblique"
        } else {
            "least_squares"
        }
    }

    /// X_ran coordinates of the projection of `v`: along X_ker when
    /// X = X_ran ⊕ X_ker, otherwise by least squares on `E v`.
    pub fn ran_coordinates(&self, v: &CVec) -> CVec {
        let r = self.rank();
        match &self.split_x {
            Some(inv) => (inv * v).rows(0, r).into_owned(),
            None => pinv(&(self.pencil.e() * self.q()), 1e-12) * (self.pencil.e() * v),
        }
    }

    /// Oblique component of `v` in X_ker, if the splitting exists.
    pub fn ker_component(&self, v: &CVec) -> Option<CVec> {
        let inv = self.split_x.as_ref()?;
        let r = self.rank();
        let k = self.ev.decomposition().x_ker.basis();
        let c = inv * v;
        Some(k * c.rows(r, k.ncols()))
    }

    /// Oblique splitting of a Z-valued signal into (Z_ran, Z_ker) parts.
    pub fn split_forcing(&self, f: &Signal) -> Option<(Signal, Signal)> {
        let inv = self.split_z.as_ref()?;
        let d = self.ev.decomposition();
        let (zr, zk) = (d.z_ran().basis(), d.z_ker.basis());
        let r = zr.ncols();
        let pr = zr * inv.rows(0, r);
        let pk = zk * inv.rows(r, zk.ncols());
        Some((f.left_mul(&pr), f.left_mul(&pk)))
    }

    fn consistency(&self, x0: &CVec, x_start: &CVec) -> Result<ConsistencyReport> {
        let distance = (x0 - x_start).norm();
        let relative = distance / x0.norm().max(1.0);
        let consistent = relative <= self.opts.tol;
        if self.opts.strict && !consistent {
            return Err(Error::InconsistentInitialValue(relative));
        }
        Ok(ConsistencyReport { distance, relative, consistent, projection: self.projection_kind() })
    }

    fn check_x0(&self, x0: &CVec) -> Result<()> {
        if x0.len() != self.pencil.n_x() {
            return Err(Error::DimensionMismatch(format!("x₀ has {} entries, X has dimension {}", x0.len(), self.pencil.n_x())));
        }
        Ok(())
    }

    fn finish_closed(&self, method: &'static str, x: ClosedForm, x0: &CVec, f: &Forcing, grid: Vec<f64>) -> Result<Trajectory> {
        let values: Vec<CVec> = grid.iter().map(|&t| x.eval(t)).collect();
        let consistency = self.consistency(x0, &values[0])?;
        let mut traj = Trajectory {
            method,
            times: grid,
            values,
            representation: Representation::ClosedForm(x),
            x0: x0.clone(),
            residuals: Residuals { classical: 0.0, mild: 0.0, initial: 0.0, scale: 1.0 },
            classification: Classification::None,
            consistency,
            cross_check: None,
        };
        traj.residuals = residual(&self.pencil, &traj, f)?;
        traj.classification = traj.residuals.classify(self.opts.tol);
        Ok(traj)
    }

    fn finish_sampled(&self, method: &'static str, grid: Vec<f64>, values: Vec<CVec>, derivatives: Vec<CVec>, integrals: Option<Vec<CVec>>, x0: &CVec, f: &Forcing) -> Result<Trajectory> {
        let consistency = self.consistency(x0, &values[0])?;
        let mut traj = Trajectory {
            method,
            times: grid,
            values,
            representation: Representation::Sampled { derivatives, integrals },
            x0: x0.clone(),
            residuals: Residuals { classical: 0.0, mild: 0.0, initial: 0.0, scale: 1.0 },
            classification: Classification::None,
            consistency,
            cross_check: None,
        };
        traj.residuals = residual(&self.pencil, &traj, f)?;
        traj.classification = traj.residuals.classify(self.opts.tol);
        Ok(traj)
    }

    /// `x(t) = S_r^{(p)}(t) x₀` with x₀ projected onto X_ran.
    pub fn solve_homogeneous(&self, x0: &CVec, ts: &[f64], method: Method) -> Result<Trajectory> {
        self.check_x0(x0)?;
        let grid = check_grid(ts)?;
        let f = Forcing::zero(self.pencil.n_z());
        let closed = self.ev.right().ok();
        match (method, closed) {
            (Method::Decomp, None) => Err(Error::DecompositionUnavailable("no generator on X_ran; use the contour method".into())),
            (Method::Contour, _) | (Method::Auto, None) => {
                let (values, derivs, ints) = self.contour_homogeneous(x0, &grid)?;
                self.finish_sampled("contour", grid, values, derivs, Some(ints), x0, &f)
            }
            (Method::Decomp, Some(s)) | (Method::Auto, Some(s)) => {
                let c0 = self.ran_coordinates(x0);
                let x = Realized::new(s.basis().clone(), s.generator().clone(), c0);
                let mut traj = self.finish_closed("decomp", ClosedForm::from_realized(x), x0, &f, grid)?;
                if method == Method::Auto {
                    let (values, _, _) = self.contour_homogeneous(x0, &traj.times)?;
                    let diff = traj.relative_difference(&values, x0.norm().max(f64::MIN_POSITIVE));
                    traj.cross_check = Some(diff);
                    if diff > self.opts.cross_tol {
                        return Err(Error::SolverMismatch(diff));
                    }
                }
                Ok(traj)
            }
        }
    }

    /// Contour inversion of `F(λ) = (−1)^q R_r(λ) z₀ / (λ − μ_c)^q` with
    /// `x₀ = R_r(μ_c)^q z₀`; returns values and derivatives on the grid.
    fn contour_homogeneous(&self, x0: &CVec, grid: &[f64]) -> Result<(Vec<CVec>, Vec<CVec>, Vec<CVec>)> {
        let n = self.pencil.n_x();
        let q_basis = self.q();
        let c0 = self.ran_coordinates(x0);
        if q_basis.ncols() == 0 || c0.norm() == 0.0 {
            return Ok((vec![CVec::zeros(n); grid.len()], vec![CVec::zeros(n); grid.len()], vec![CVec::zeros(n); grid.len()]));
        }
        let sigma = self.ev.growth().generator_abscissa.max(0.0) + 1.0;
        let mu_c = re(sigma + 1.0);
        let q = self.ev.p() + 3;
        let rhat = q_basis.adjoint() * right_resolvent(&self.pencil, mu_c)? * q_basis;
        let rinv = inverse(&rhat).ok_or_else(|| Error::DecompositionUnavailable("R_r(μ) is singular on X_ran".into()))?;
        let mut zc = c0;
        for _ in 0..q {
            zc = &rinv * zc;
        }
        let ez = self.pencil.e() * (q_basis * zc);
        let rhs = CMat::from_column_slice(ez.len(), 1, ez.as_slice());
        let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
        let pencil = &self.pencil;
        let f = |l: Complex64| -> CVec {
            match solve_shifted(pencil, l, &rhs) {
                Some(y) => y.column(0) * (re(sign) / (l - mu_c).powu(q as u32)),
                None => CVec::from_element(n, Complex64::new(f64::NAN, 0.0)),
            }
        };
        let probe = Complex64::new(sigma, 1e3 * (1.0 + sigma));
        let scale = (f(probe).norm() * probe.norm().powi(q as i32 + 1)).max(x0.norm());
        let t_max = *grid.last().unwrap();
        // the pole at μ_c aliases as ‖ẑ‖ e^{μ_c t − P} P^{q−1}/(q−1)! relative to ‖x₀‖
        let z_rel = (ez.norm() / x0.norm()).max(1.0) / (1..q).map(|i| i as f64).product::<f64>();
        let mut period = 8.0 * t_max;
        for _ in 0..50 {
            period = mu_c.re * t_max + (z_rel / CONTOUR_TOL).ln() + (q - 1) as f64 * period.max(1.0).ln();
        }
        let cfg = ContourConfig::for_decay(sigma, q + 1, scale, 1.0, 0.0, t_max.max(1e-3), CONTOUR_TOL)?.with_min_period(period)?;
        let samples = ContourSamples::sample(f, cfg)?;
        let values = grid.iter().map(|&t| samples.invert(t)).collect();
        let derivs = grid.iter().map(|&t| samples.invert_weighted(t, 1)).collect();
        // F differs from L[x] by a part with its pole at μ_c; over λ that part
        // inverts to the constant G(0), removed by anchoring at t = 0
        let i0 = samples.invert_weighted(0.0, -1);
        let ints = grid.iter().map(|&t| samples.invert_weighted(t, -1) - &i0).collect();
        Ok((values, derivs, ints))
    }

    /// X_ran coordinates `û` with `E Q û = f`, or LiftFailed.
    fn lift(&self, f: &Signal) -> Result<Signal> {
        let eq = self.pencil.e() * self.q();
        let l = pinv(&eq, 1e-12);
        let u = f.left_mul(&l);
        let miss = u.left_mul(&eq).sub(f).coeff_scale();
        let size = f.coeff_scale();
        if size > 0.0 && miss > LIFT_TOL * size {
            return Err(Error::LiftFailed(miss / size));
        }
        Ok(u)
    }

    /// Forcing valued in Z_ran: `x = d^p/dt^p [S_r(t)x₀ + ∫₀^t S_r(t−τ) f̃(τ) dτ]`.
    pub fn solve_inhomogeneous_ran(&self, x0: &CVec, f: &Forcing, ts: &[f64]) -> Result<Trajectory> {
        self.check_x0(x0)?;
        if f.dim() != self.pencil.n_z() {
            return Err(Error::DimensionMismatch(format!("forcing has {} components, Z has dimension {}", f.dim(), self.pencil.n_z())));
        }
        let grid = check_grid(ts)?;
        let s = self.ev.right()?;
        let c0 = self.ran_coordinates(x0);
        match f {
            Forcing::Signal(sig) => {
                let u = self.lift(sig)?;
                let v = s.kernel().respond(&c0, &Realized::from_signal(&u));
                let x = v.nth_derivative(s.p()).left_mul(s.basis());
                self.finish_closed("convolution", ClosedForm::from_realized(x), x0, f, grid)
            }
            Forcing::Sampled { times, values } => {
                if *grid.last().unwrap() > f.horizon() * (1.0 + 1e-12) {
                    return Err(Error::InvalidInput("time grid extends beyond the forcing samples".into()));
                }
                let eq = self.pencil.e() * s.basis();
                let l = pinv(&eq, 1e-12);
                for v in values {
                    let miss = (&eq * (&l * v) - v).norm();
                    if miss > LIFT_TOL * v.norm().max(f64::MIN_POSITIVE) {
                        return Err(Error::LiftFailed(miss / v.norm()));
                    }
                }
                let mut all: Vec<f64> = times.iter().chain(grid.iter()).copied().filter(|t| *t <= *grid.last().unwrap()).collect();
                all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                all.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
                let (xs, dxs) = foh_propagate(s.generator(), s.basis(), &l, f, &c0, &all);
                let mut vals = Vec::with_capacity(grid.len());
                let mut ders = Vec::with_capacity(grid.len());
                let mut j = 0;
                for &t in &grid {
                    while (all[j] - t).abs() > 1e-14 * t.abs().max(1.0) {
                        j += 1;
                    }
                    vals.push(xs[j].clone());
                    ders.push(dxs[j].clone());
                }
                self.finish_sampled("convolution_sampled", grid, vals, ders, None, x0, f)
            }
        }
    }

    /// Full-space solution by back-substitution through the blocks of
    /// `R_l(μ)` in the basis `(Z_ran, W_s, …, W_1)`.
    ///
    /// With `w = (μE − A) e^{−μt} x` and `g = e^{−μt} f` the system reads
    /// `d/dt(R_l(μ) w) = −w + g`; the W rows are solved top-down, the Z_ran
    /// row is a reduced pencil `(R̂, −I)` handled by the convolution path.
    pub fn solve_full(&self, x0: &CVec, f: &Forcing, ts: &[f64]) -> Result<Trajectory> {
        self.check_x0(x0)?;
        let f = match f {
            Forcing::Signal(s) => s,
            Forcing::Sampled { .. } => return Err(Error::SmoothnessInsufficient),
        };
        if f.dim() != self.pencil.n_z() {
            return Err(Error::DimensionMismatch(format!("forcing has {} components, Z has dimension {}", f.dim(), self.pencil.n_z())));
        }
        let grid = check_grid(ts)?;
        let mu = self.ev.mu();
        let d = self.ev.decomposition();
        let blocks = block_left_resolvent(d, &self.pencil, mu).map_err(|e| Error::DecompositionUnavailable(e.to_string()))?;
        let inv = resolvent(&self.pencil, mu).map_err(|e| Error::DecompositionUnavailable(e.to_string()))?;
        let nb = blocks.block_sizes.len();
        let offs: Vec<usize> = (0..nb).map(|k| blocks.block_sizes[..k].iter().sum()).collect();
        let ub = |k: usize| blocks.basis.columns(offs[k], blocks.block_sizes[k]).into_owned();

        let g = f.mul_exp(-mu);
        let mut w: Vec<Signal> = (0..nb).map(|k| Signal::zero(blocks.block_sizes[k])).collect();
        for i in (1..nb).rev() {
            let mut acc = Signal::zero(blocks.block_sizes[i]);
            for j in i + 1..nb {
                acc = acc.add(&w[j].left_mul(&blocks.block(i, j)));
            }
            w[i] = g.left_mul(&ub(i).adjoint()).sub(&acc.derivative());
        }
        let r = blocks.block_sizes[0];
        let mut acc = Signal::zero(r);
        for (j, wj) in w.iter().enumerate().skip(1) {
            acc = acc.add(&wj.left_mul(&blocks.block(0, j)));
        }
        let g_hat = g.left_mul(&ub(0).adjoint()).sub(&acc.derivative());
        let mut w_side = Signal::zero(self.pencil.n_z());
        for (j, wj) in w.iter().enumerate().skip(1) {
            w_side = w_side.add(&wj.left_mul(&ub(j)));
        }

        // initial state of the reduced problem from the X_ran part of x₀ − x_side(0)
        let m = &inv * ub(0);
        let b0 = &inv * w_side.eval(0.0);
        let c = if r == 0 {
            CVec::zeros(0)
        } else {
            let target = x0 - &b0;
            match &self.split_x {
                Some(_) => pinv(&m, 1e-12) * (self.q() * self.ran_coordinates(&target)),
                None => pinv(&(self.pencil.e() * &m), 1e-12) * (self.pencil.e() * target),
            }
        };
        let w_ran = if r == 0 {
            ClosedForm::from_signal(Signal::zero(0))
        } else {
            let r_hat = blocks.block(0, 0);
            let reduced = Pencil::new(r_hat, -CMat::identity(r, r))?;
            let sub = Solver::new(&reduced, SolveOptions { mu: None, p: Some(1), ..self.opts.clone() })?;
            let traj = sub.solve_inhomogeneous_ran(&c, &Forcing::Signal(g_hat), &[0.0])?;
            traj.closed_form().expect("signal forcing gives a closed form").clone()
        };
        let w_full = w_ran.left_mul(&ub(0)).add(&ClosedForm::from_signal(w_side));
        let x = w_full.left_mul(&inv).mul_exp(mu);
        let mut traj = self.finish_closed("back_substitution", x, x0, &Forcing::Signal(f.clone()), grid)?;
        if let Some(diff) = self.kernel_cross_check(&traj, f)? {
            traj.cross_check = Some(diff);
            if diff > self.opts.cross_tol {
                return Err(Error::SolverMismatch(diff));
            }
        }
        Ok(traj)
    }

    /// Compare the X_ker component of a trajectory with the derivative-sum
    /// formula applied to the Z_ker component of f.
    fn kernel_cross_check(&self, traj: &Trajectory, f: &Signal) -> Result<Option<f64>> {
        let Some((_, f_ker)) = self.split_forcing(f) else { return Ok(None) };
        if self.split_x.is_none() {
            return Ok(None);
        }
        let k = match restrict_to_kernel(&self.pencil, self.ev.mu(), self.ev.p()) {
            Ok(k) => k,
            Err(Error::AKerSingular(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let xk = solve_kernel_ambient(&k, &f_ker, self.ev.p())?;
        let mut diff: f64 = 0.0;
        let mut size: f64 = 0.0;
        for (t, x) in traj.times.iter().zip(&traj.values) {
            let mine = self.ker_component(x).expect("splitting exists");
            let theirs = xk.eval(*t);
            diff = diff.max((mine - &theirs).norm());
            size = size.max(x.norm()).max(theirs.norm());
        }
        Ok(Some(if size > 0.0 { diff / size } else { diff }))
    }
}

/// Exact propagation of `c′ = G c + L f` for piecewise-linear `f` on `times`.
fn foh_propagate(g: &CMat, q: &CMat, l: &CMat, f: &Forcing, c0: &CVec, times: &[f64]) -> (Vec<CVec>, Vec<CVec>) {
    let r = g.nrows();
    let mut c = c0.clone();
    let mut xs = Vec::with_capacity(times.len());
    let mut dxs = Vec::with_capacity(times.len());
    let u_at = |t: f64| l * f.eval(t);
    let mut u = u_at(times[0]);
    xs.push(q * &c);
    dxs.push(q * (g * &c + &u));
    for k in 0..times.len() - 1 {
        let h = times[k + 1] - times[k];
        let u_next = u_at(times[k + 1]);
        if r > 0 {
            let mut m = CMat::zeros(3 * r, 3 * r);
            m.view_mut((0, 0), (r, r)).copy_from(g);
            m.view_mut((0, r), (r, r)).fill_with_identity();
            m.view_mut((r, 2 * r), (r, r)).fill_with_identity();
            let phi = expm(&(m * re(h)));
            let du = (&u_next - &u) / re(h);
            c = phi.view((0, 0), (r, r)) * &c + phi.view((0, r), (r, r)) * &u + phi.view((0, 2 * r), (r, r)) * du;
        }
        u = u_next;
        xs.push(q * &c);
        dxs.push(q * (g * &c + &u));
    }
    (xs, dxs)
}

/// Relative classical and integral-form residuals of a trajectory.
///
/// Closed forms are differentiated and integrated exactly; sampled
/// trajectories use their derivative samples and the endpoint-corrected
/// trapezoid rule `h/2 (x₀ + x₁) + h²/12 (x₀′ − x₁′)`.
pub fn residual(p: &Pencil, traj: &Trajectory, f: &Forcing) -> Result<Residuals> {
    if f.dim() != p.n_z() {
        return Err(Error::DimensionMismatch(format!("forcing has {} components, Z has dimension {}", f.dim(), p.n_z())));
    }
    let (e, a) = (p.e(), p.a());
    let (ne, na) = (norm2(e), norm2(a));
    let ts = &traj.times;
    let (derivs, integrals): (Vec<CVec>, Vec<CVec>) = match &traj.representation {
        Representation::ClosedForm(x) => {
            let dx = x.derivative();
            let ix = x.integral();
            (ts.iter().map(|&t| dx.eval(t)).collect(), ts.iter().map(|&t| ix.eval(t)).collect())
        }
        Representation::Sampled { derivatives, integrals: Some(ints) } => (derivatives.clone(), ints.clone()),
        Representation::Sampled { derivatives, integrals: None } => {
            let mut acc = CVec::zeros(p.n_x());
            let mut ints = vec![acc.clone()];
            let mut prev_t = 0.0;
            let mut prev_x = traj.values[0].clone();
            let mut prev_d = derivatives[0].clone();
            if ts[0] != 0.0 {
                return Err(Error::InvalidInput("sampled trajectories must start at t = 0".into()));
            }
            for k in 1..ts.len() {
                let h = ts[k] - prev_t;
                acc += (&prev_x + &traj.values[k]) * re(h / 2.0) + (&prev_d - &derivatives[k]) * re(h * h / 12.0);
                ints.push(acc.clone());
                prev_t = ts[k];
                prev_x = traj.values[k].clone();
                prev_d = derivatives[k].clone();
            }
            (derivatives.clone(), ints)
        }
    };
    let ex0 = e * &traj.x0;
    let mut classical: f64 = 0.0;
    let mut mild: f64 = 0.0;
    let mut scale: f64 = 1.0;
    let mut xmax: f64 = traj.x0.norm();
    for (k, &t) in ts.iter().enumerate() {
        let x = &traj.values[k];
        let ft = f.eval(t);
        let fi = f.integral(t);
        classical = classical.max((e * &derivs[k] - a * x - &ft).norm());
        mild = mild.max((e * x - &ex0 - a * &integrals[k] - &fi).norm());
        scale = scale.max(ne * (derivs[k].norm() + x.norm() + traj.x0.norm()) + na * (x.norm() + integrals[k].norm()) + ft.norm() + fi.norm());
        xmax = xmax.max(x.norm());
    }
    let x_start = match &traj.representation {
        Representation::ClosedForm(x) => x.eval(0.0),
        Representation::Sampled { .. } => traj.values[0].clone(),
    };
    let initial = (&x_start - &traj.x0).norm() / xmax.max(1.0);
    Ok(Residuals { classical: classical / scale, mild: mild / scale, initial, scale })
}

pub fn solve_homogeneous(p: &Pencil, x0: &CVec, ts: &[f64], method: Method) -> Result<Trajectory> {
    Solver::new(p, SolveOptions::default())?.solve_homogeneous(x0, ts, method)
}

pub fn solve_inhomogeneous_ran(p: &Pencil, x0: &CVec, f: &Forcing, ts: &[f64]) -> Result<Trajectory> {
    Solver::new(p, SolveOptions::default())?.solve_inhomogeneous_ran(x0, f, ts)
}

pub fn solve_full(p: &Pencil, x0: &CVec, f: &Signal, ts: &[f64]) -> Result<Trajectory> {
    Solver::new(p, SolveOptions::default())?.solve_full(x0, &Forcing::Signal(f.clone()), ts)
}

pub fn uniform_grid(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| t0 + (t1 - t0) * i as f64 / steps.max(1) as f64).collect()
}

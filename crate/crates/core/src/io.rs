//! File formats: pencils, signals, trajectories and run reports.

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::pencil::{chain_index, default_index_window, estimate_resolvent_index, IndexReport, Pencil};
use crate::generators::rng;
use crate::linalg::complex_gaussian_vec;
use crate::semigroup::{laplace_abscissa, verify_cp_semigroup, verify_laplace_identity, verify_properties, EvaluatorOptions, PropertyReport, SemigroupEvaluator};
use crate::signal::Signal;
use crate::solver::{Classification, ConsistencyReport, Residuals, Trajectory};
use crate::subspaces::{check_disjointness, hilbert_decomposition, DecompositionReport, DisjointnessReport};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PencilMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_hint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// On-disk pencil: dimensions first, then `E` and `A` as row-major `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilFile {
    pub n_x: usize,
    pub n_z: usize,
    #[serde(rename = "E")]
    pub e: Vec<[f64; 2]>,
    #[serde(rename = "A")]
    pub a: Vec<[f64; 2]>,
    #[serde(default)]
    pub metadata: PencilMetadata,
}

fn pairs(m: &CMat) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

fn matrix(rows: usize, cols: usize, data: &[[f64; 2]], which: &str) -> Result<CMat> {
    if data.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!("{which} has {} entries, expected n_z·n_x = {}", data.len(), rows * cols)));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{which} has non-finite entries")));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| {
        let [r, im] = data[i * cols + j];
        Complex64::new(r, im)
    }))
}

impl PencilFile {
    pub fn from_pencil(p: &Pencil, provenance: Option<String>) -> Self {
        PencilFile {
            n_x: p.n_x(),
            n_z: p.n_z(),
            e: pairs(p.e()),
            a: pairs(p.a()),
            metadata: PencilMetadata { name: p.name().map(String::from), omega_hint: p.omega_hint(), provenance },
        }
    }

    pub fn to_pencil(&self) -> Result<Pencil> {
        let e = matrix(self.n_z, self.n_x, &self.e, "E")?;
        let a = matrix(self.n_z, self.n_x, &self.a, "A")?;
        let mut p = Pencil::new(e, a)?;
        if let Some(w) = self.metadata.omega_hint {
            p = p.with_omega_hint(w);
        }
        if let Some(n) = &self.metadata.name {
            p = p.with_name(n.clone());
        }
        Ok(p)
    }

    /// Canonical text: one `[re, im]` pair per line, trailing newline.
    pub fn to_json(&self) -> String {
        let num = |v: f64| serde_json::to_string(&v).expect("finite entries");
        let block = |data: &[[f64; 2]]| -> String {
            let rows: Vec<String> = data.iter().map(|[r, i]| format!("    [{}, {}]", num(*r), num(*i))).collect();
            if rows.is_empty() {
                "[]".into()
            } else {
                format!("[\n{}\n  ]", rows.join(",\n"))
            }
        };
        let meta = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes").replace('\n', "\n  ");
        format!(
            "{{\n  \"n_x\": {},\n  \"n_z\": {},\n  \"E\": {},\n  \"A\": {},\n  \"metadata\": {}\n}}\n",
            self.n_x,
            self.n_z,
            block(&self.e),
            block(&self.a),
            meta
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: PencilFile = serde_json::from_str(s)?;
        f.to_pencil()?;
        Ok(f)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_json())?)
    }
}

/// Parse a signal, fixing its dimension to `dim`.
pub fn signal_from_json(s: &str, dim: usize) -> Result<Signal> {
    let sig: Signal = serde_json::from_str(s)?;
    sig.with_dim(dim)
}

pub fn read_signal(path: impl AsRef<Path>, dim: usize) -> Result<Signal> {
    signal_from_json(&std::fs::read_to_string(path)?, dim)
}

pub fn signal_to_json(f: &Signal) -> String {
    serde_json::to_string_pretty(f).expect("signal serializes")
}

/// `re,im,re,im,…` into a vector of length `dim`; a real list of length `dim` is also accepted.
pub fn parse_vector(s: &str, dim: usize) -> Result<CVec> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("'{t}' is not a number"))))
        .collect::<Result<_>>()?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("vector has non-finite entries".into()));
    }
    if vals.len() == dim {
        Ok(CVec::from_iterator(dim, vals.iter().map(|&v| Complex64::new(v, 0.0))))
    } else if vals.len() == 2 * dim {
        Ok(CVec::from_iterator(dim, vals.chunks(2).map(|c| Complex64::new(c[0], c[1]))))
    } else {
        Err(Error::DimensionMismatch(format!("got {} numbers for a vector of dimension {dim}", vals.len())))
    }
}

/// `RE,IM` or `RE`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    Ok(parse_vector(s, 1)?[0])
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header `t,x_0_re,x_0_im,…`, one row per time, 17 significant digits.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.values.first().map(|v| v.len()).unwrap_or(0);
    let mut out = String::from("t");
    for i in 0..n {
        let _ = write!(out, ",x_{i}_re,x_{i}_im");
    }
    out.push('\n');
    for (t, v) in traj.times.iter().zip(&traj.values) {
        out.push_str(&sci(*t));
        for z in v.iter() {
            let _ = write!(out, ",{},{}", sci(z.re), sci(z.im));
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    pub method: String,
    pub x0: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<[f64; 2]>>,
    pub residuals: Residuals,
    pub classification: Classification,
    pub consistency: ConsistencyReport,
    pub cross_check: Option<f64>,
}

fn vec_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

impl From<&Trajectory> for TrajectoryRecord {
    fn from(t: &Trajectory) -> Self {
        TrajectoryRecord {
            method: t.method.to_string(),
            x0: vec_pairs(&t.x0),
            times: t.times.clone(),
            values: t.values.iter().map(vec_pairs).collect(),
            residuals: t.residuals,
            classification: t.classification,
            consistency: t.consistency.clone(),
            cross_check: t.cross_check,
        }
    }
}

pub fn trajectory_json(traj: &Trajectory) -> String {
    serde_json::to_string_pretty(&TrajectoryRecord::from(traj)).expect("trajectory serializes")
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionSummary {
    pub mu: [f64; 2],
    pub p_used: usize,
    pub stagnation_k: usize,
    pub x_chain_ranks: Vec<usize>,
    pub z_chain_ranks: Vec<usize>,
    pub w_x_ranks: Vec<usize>,
    pub w_z_ranks: Vec<usize>,
    pub x_ker_rank: usize,
    pub z_ker_rank: usize,
    pub block_count_matches: bool,
    pub disjointness: DisjointnessReport,
}

impl DecompositionSummary {
    pub fn new(d: &DecompositionReport, p: &Pencil) -> Self {
        DecompositionSummary {
            mu: [d.mu.re, d.mu.im],
            p_used: d.p_used,
            stagnation_k: d.stagnation_k,
            x_chain_ranks: d.x_ranks(),
            z_chain_ranks: d.z_ranks(),
            w_x_ranks: d.w_x.iter().map(|w| w.rank()).collect(),
            w_z_ranks: d.w_z.iter().map(|w| w.rank()).collect(),
            x_ker_rank: d.x_ker.rank(),
            z_ker_rank: d.z_ker.rank(),
            block_count_matches: d.block_count_matches,
            disjointness: d.disjointness.clone().unwrap_or_else(|| check_disjointness(d, p)),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PencilSummary {
    pub name: Option<String>,
    pub n_x: usize,
    pub n_z: usize,
}

/// Machine-readable record of one CLI run. Everything except `timings`
/// is a deterministic function of the inputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub pencil: PencilSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<IndexReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionSummary>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, PropertyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<Residuals>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(p: &Pencil) -> Self {
        RunReport {
            pencil: PencilSummary { name: p.name().map(String::from), n_x: p.n_x(), n_z: p.n_z() },
            index: None,
            chain_index: None,
            decomposition: None,
            properties: BTreeMap::new(),
            solver: None,
            timings: BTreeMap::new(),
        }
    }

    /// Run `f`, recording its duration under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(stage.to_string(), start.elapsed().as_secs_f64());
        out
    }

    pub fn all_pass(&self) -> bool {
        self.properties.values().all(|r| r.all_pass())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON without the timings, for comparing runs.
    pub fn to_stable_json(&self) -> String {
        let mut r = self.clone();
        r.timings.clear();
        r.to_json()
    }
}

/// Index estimate, chain index, decomposition and disjointness of a pencil.
pub fn analyze(p: &Pencil, mu: Option<Complex64>) -> Result<RunReport> {
    let mut report = RunReport::new(p);
    let (lo, hi, n) = default_index_window(p);
    let index = report.timed("index", || estimate_resolvent_index(p, lo, hi, n))?;
    let chain = report.timed("chain", || chain_index(p).0);
    let mu = match mu {
        Some(m) => m,
        None => p.default_mu()?,
    };
    let d = report.timed("decomposition", || hilbert_decomposition(p, mu, index.p_res + 1))?;
    report.decomposition = Some(DecompositionSummary::new(&d, p));
    report.index = Some(index);
    report.chain_index = Some(chain);
    Ok(report)
}

/// Time grid of the identity and semigroup suites.
pub const SUITE_GRID: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
pub const IDENTITY_TOL: f64 = 1e-6;
pub const SEMIGROUP_TOL: f64 = 1e-8;
pub const LAPLACE_TOL: f64 = 1e-5;
/// Number of contour points in the Laplace suite.
pub const LAPLACE_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// Integrated-semigroup identities (commutation, intertwining, integrated DAE,
    /// integral identity, functional equation).
    Lemma29,
    /// Semigroup law, identity at zero and strong continuity of `S_r^{(p)}`.
    Thm43,
    /// Laplace representation of `S_r` on a vertical line.
    Laplace,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma29 => "lemma29",
            Suite::Thm43 => "thm43",
            Suite::Laplace => "laplace",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemma29" => Ok(Suite::Lemma29),
            "thm43" => Ok(Suite::Thm43),
            "laplace" => Ok(Suite::Laplace),
            other => Err(Error::InvalidInput(format!("unknown suite '{other}'"))),
        }
    }
}

/// Run one property suite; random test vectors in X_ran and contour points come from `seed`.
pub fn verify_suite(p: &Pencil, suite: Suite, mu: Option<Complex64>, seed: u64) -> Result<RunReport> {
    let mut report = RunReport::new(p);
    let ev = report.timed("evaluator", || SemigroupEvaluator::new(p, EvaluatorOptions { mu, ..Default::default() }))?;
    report.index = ev.index().cloned();
    report.decomposition = Some(DecompositionSummary::new(ev.decomposition(), p));
    let mut g = rng(seed);
    let q = ev.x_ran().basis();
    let x = q * complex_gaussian_vec(q.ncols(), &mut g);
    let props = report.timed(suite.name(), || match suite {
        Suite::Lemma29 => verify_properties(&ev, &SUITE_GRID, IDENTITY_TOL),
        Suite::Thm43 => verify_cp_semigroup(&ev, &SUITE_GRID, &x, SEMIGROUP_TOL),
        Suite::Laplace => {
            let sigma = laplace_abscissa(&ev);
            let ls: Vec<Complex64> = (0..LAPLACE_POINTS).map(|_| Complex64::new(sigma, g.random_range(-10.0..10.0))).collect();
            verify_laplace_identity(&ev, &x, &ls, LAPLACE_TOL)
        }
    })?;
    report.properties.insert(suite.name().to_string(), props);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{make_transport, make_weierstrass};
    use crate::linalg::from_real;
    use crate::solver::{solve_homogeneous, uniform_grid, Method};

    fn diag() -> Pencil {
        Pencil::new(from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]), from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap().with_name("diag")
    }

    #[test]
    fn pencil_round_trip_is_byte_identical() {
        for (p, _) in [make_weierstrass(2, 2, 2, 7).unwrap(), make_weierstrass(3, 0, 0, 1).unwrap()] {
            let text = PencilFile::from_pencil(&p, Some("test".into())).to_json();
            let again = PencilFile::from_json(&text).unwrap().to_json();
            assert_eq!(text, again);
            let parsed: PencilFile = serde_json::from_str(&text).unwrap();
            assert_eq!(parsed, PencilFile::from_pencil(&p, Some("test".into())));
            let q = PencilFile::from_json(&text).unwrap().to_pencil().unwrap();
            assert_eq!(q.e(), p.e());
            assert_eq!(q.a(), p.a());
        }
    }

    #[test]
    fn rectangular_layout_is_row_major() {
        let p = make_transport(2, 2).unwrap();
        let f = PencilFile::from_pencil(&p, None);
        assert_eq!((f.n_x, f.n_z, f.e.len()), (4, 6, 24));
        assert_eq!(f.e[0], [1.0, 0.0]);
        assert_eq!(f.e[5], [1.0, 0.0]);
        assert_eq!(f.e[1], [0.0, 0.0]);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let bad_len = r#"{"n_x":2,"n_z":2,"E":[[1,0]],"A":[[1,0],[0,0],[0,0],[1,0]]}"#;
        assert!(matches!(PencilFile::from_json(bad_len), Err(Error::ShapeMismatch(_))));
        assert!(PencilFile::from_json("{").unwrap_err().is_validation());
        let ok = r#"{"n_x":1,"n_z":1,"E":[[1,0]],"A":[[-1,0]]}"#;
        assert_eq!(PencilFile::from_json(ok).unwrap().metadata, PencilMetadata::default());
    }

    #[test]
    fn signal_schema() {
        let s = r#"{"terms":[{"coeff":[[1,0],[0,2]],"power":1,"rate":[-1,0]}]}"#;
        let f = signal_from_json(s, 2).unwrap();
        let v = f.eval(1.0);
        assert!((v[1] - Complex64::new(0.0, 2.0 * (-1f64).exp())).norm() < 1e-15);
        assert!(signal_from_json(s, 3).is_err());
    }

    #[test]
    fn vectors_parse() {
        assert_eq!(parse_vector("1,0", 2).unwrap()[0], Complex64::new(1.0, 0.0));
        assert_eq!(parse_vector("1,2", 1).unwrap()[0], Complex64::new(1.0, 2.0));
        assert!(parse_vector("1,2,3", 2).is_err());
        assert!(parse_vector("a", 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let ts = uniform_grid(0.0, 1.0, 2);
        let tr = solve_homogeneous(&diag(), &CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]), &ts, Method::Decomp).unwrap();
        let csv = trajectory_csv(&tr);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x_0_re,x_0_im,x_1_re,x_1_im");
        assert_eq!(lines.len(), 4);
        let row: Vec<f64> = lines[3].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row[0], 1.0);
        assert!((row[1] - (-1f64).exp()).abs() < 1e-14);
        assert!(lines[3].starts_with("1.0000000000000000e0,"));
        let json: serde_json::Value = serde_json::from_str(&trajectory_json(&tr)).unwrap();
        assert_eq!(json["classification"], "classical");
    }

    #[test]
    fn suites_pass_on_diag() {
        for suite in [Suite::Lemma29, Suite::Thm43, Suite::Laplace] {
            let r = verify_suite(&diag(), suite, None, 3).unwrap();
            assert!(r.all_pass(), "{}: {}", suite.name(), r.to_json());
            assert_eq!(r.properties.len(), 1);
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        let a = verify_suite(&diag(), Suite::Laplace, None, 3).unwrap().to_stable_json();
        assert_eq!(a, verify_suite(&diag(), Suite::Laplace, None, 3).unwrap().to_stable_json());
    }

    #[test]
    fn analyze_diag() {
        let r = analyze(&diag(), None).unwrap();
        assert_eq!(r.index.as_ref().unwrap().p_res, 1);
        assert_eq!(r.chain_index, Some(1));
        let d = r.decomposition.as_ref().unwrap();
        assert_eq!(d.x_chain_ranks.last(), Some(&1));
        assert!(d.disjointness.disjoint_ran_e);
        assert_eq!(analyze(&diag(), None).unwrap().to_stable_json(), r.to_stable_json());
    }
}

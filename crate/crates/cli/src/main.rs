use clap::{Parser, Subcommand};
use daesemi::generators::{make_hamiltonian, make_transport, make_weierstrass_with, WeierstrassOptions, DEFAULT_SEED};
use daesemi::io::{analyze, parse_complex, parse_vector, read_signal, trajectory_csv, trajectory_json, verify_suite, PencilFile, Suite};
use daesemi::solver::{uniform_grid, Classification, Forcing, Method, SolveOptions, Solver};
use daesemi::{Complex64, Error, Pencil, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "daesemi", version, about = "Analyze and solve linear descriptor systems d/dt(E x) = A x + f")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index estimate, chain index, subspace decomposition and disjointness as JSON.
    Analyze {
        pencil: PathBuf,
        /// Shift μ as RE,IM (default: first regular point right of the hint).
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve on a uniform grid; CSV goes to stdout unless --csv is given.
    Solve {
        pencil: PathBuf,
        /// Initial value as x₁,x₂,… (real) or re,im,re,im,… (complex).
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        /// Exp-polynomial inhomogeneity (JSON).
        #[arg(long)]
        signal: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// contour, decomp or auto; forced problems always use back-substitution.
        #[arg(long, default_value = "auto")]
        method: Method,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Trajectory with residuals and classification.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a property suite (lemma29, thm43 or laplace) and emit its report.
    Verify {
        pencil: PathBuf,
        #[arg(long)]
        suite: Suite,
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
        #[arg(long, env = "DAESEMI_SEED")]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a generated pencil file.
    Example {
        #[command(subcommand)]
        kind: Example,
    },
}

#[derive(Subcommand)]
enum Example {
    /// Upwind discretization of the coupled transport problem.
    Transport {
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        m: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Pencil in disguised Weierstraß form.
    Weierstrass {
        #[arg(long)]
        ns: usize,
        #[arg(long)]
        nn: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, env = "DAESEMI_SEED")]
        seed: Option<u64>,
        /// Skip the random transformations (T = S = I).
        #[arg(long)]
        identity: bool,
        /// Spectrum of J: ns reals or ns RE,IM pairs.
        #[arg(long, allow_hyphen_values = true)]
        eig: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Dissipative-Hamiltonian pencil E = BBᴴ, A = K − P.
    Hamiltonian {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long, env = "DAESEMI_SEED")]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn load(path: &Path) -> Result<Pencil> {
    PencilFile::read(path)?.to_pencil()
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn mu_arg(mu: &Option<String>) -> Result<Option<Complex64>> {
    mu.as_deref().map(parse_complex).transpose()
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze { pencil, mu, output } => {
            let p = load(&pencil)?;
            let report = analyze(&p, mu_arg(&mu)?)?;
            emit(&report.to_json(), output.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { pencil, x0, signal, t0, t1, steps, method, csv, json } => {
            let p = load(&pencil)?;
            let x0 = parse_vector(&x0, p.n_x())?;
            if !(t1 > t0) || steps == 0 {
                return Err(Error::InvalidInput("need t1 > t0 and steps ≥ 1".into()));
            }
            let ts = uniform_grid(t0, t1, steps);
            let solver = Solver::new(&p, SolveOptions::default())?;
            let traj = match signal {
                Some(path) => {
                    if method == Method::Contour {
                        return Err(Error::InvalidInput("the contour method handles homogeneous problems only".into()));
                    }
                    let f = read_signal(path, p.n_z())?;
                    solver.solve_full(&x0, &Forcing::Signal(f), &ts)?
                }
                None => solver.solve_homogeneous(&x0, &ts, method)?,
            };
            emit(&trajectory_csv(&traj), csv.as_deref())?;
            if let Some(path) = json {
                std::fs::write(path, trajectory_json(&traj))?;
            }
            let r = traj.residuals;
            eprintln!(
                "{} ({}): classical {:.3e}, mild {:.3e}, initial {:.3e}",
                label(traj.classification),
                traj.method,
                r.classical,
                r.mild,
                r.initial
            );
            Ok(if traj.classification == Classification::None { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        Command::Verify { pencil, suite, mu, seed, output } => {
            let p = load(&pencil)?;
            let report = verify_suite(&p, suite, mu_arg(&mu)?, seed.unwrap_or(DEFAULT_SEED))?;
            emit(&report.to_json(), output.as_deref())?;
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
        Command::Example { kind } => {
            let (p, provenance, output) = match kind {
                Example::Transport { n, m, output } => (make_transport(n, m)?, format!("transport n={n} m={m}"), output),
                Example::Weierstrass { ns, nn, k, seed, identity, eig, output } => {
                    let seed = seed.unwrap_or(DEFAULT_SEED);
                    let eigenvalues = eig.as_deref().map(|s| parse_vector(s, ns).map(|v| v.iter().copied().collect())).transpose()?;
                    let opts = WeierstrassOptions { identity_transforms: identity, eigenvalues, block_sizes: None };
                    let (p, _) = make_weierstrass_with(ns, nn, k, seed, &opts)?;
                    (p, format!("weierstrass ns={ns} nn={nn} k={k} seed={seed} identity={identity}"), output)
                }
                Example::Hamiltonian { n, rank, seed, output } => {
                    let seed = seed.unwrap_or(DEFAULT_SEED);
                    (make_hamiltonian(n, rank, seed)?, format!("hamiltonian n={n} rank={rank} seed={seed}"), output)
                }
            };
            PencilFile::from_pencil(&p, Some(provenance)).write(&output)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn label(c: Classification) -> &'static str {
    match c {
        Classification::Classical => "classical",
        Classification::Mild => "mild",
        Classification::None => "unclassified",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

//! Command-line front end behind the `gridless` binary.
//!
//! Subcommands:
//!
//! ```text
//! gridless analyze   <array-file>
//! gridless decompose <generator-file>
//! gridless recover   <manifest> <measurement-file>
//! gridless mc        <manifest>
//! gridless tau-sweep <manifest>
//! ```
//!
//! Global flags `--seed N`, `--threads N` and `--out PATH` may appear
//! anywhere. Every failure prints one line starting with `error:` and exits
//! with 2 (input), 3 (non-convergence) or 4 (rank hypothesis violated).
//!
//! Lattice positions in array files are 1-based, as are the flat indices
//! printed by `analyze`; everything else is 0-based.

mod files;
pub mod format;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::evalkit::{
    noise_sigma, run_monte_carlo, run_solver, sweep_tau, EvalError, ExperimentConfig, SolverKind, Sweep, TauRule,
};
use crate::geometry::{
    check_injectivity, find_embedded_uniform, freq_from_angles, min_antennas_probabilistic, one_based_ranges,
    resolvable_region, active_dimension, GeometryError,
};
use crate::solvers::{extract_frequencies_with, SolverError, EXTRACT_PSD_TOL};
use crate::vandermonde::{decompose_with, DecomposeOptions, VandermondeError};

pub use files::{parse_array, parse_generator, parse_manifest, parse_measurement, ArrayFile, GeneratorFile, Manifest};
use format::ParseError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{error}")]
    Parse { path: String, error: ParseError },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Hypothesis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Hypothesis(_) => EXIT_HYPOTHESIS,
            _ => EXIT_INPUT,
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<VandermondeError> for CliError {
    fn from(e: VandermondeError) -> Self {
        match e {
            VandermondeError::RankConditionViolated { .. }
            | VandermondeError::RankDeficientStack { .. }
            | VandermondeError::PairingDegeneracy(_) => CliError::Hypothesis(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            SolverError::Decomposition(v) => v.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Solver(s) => s.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

/// Global flags shared by all subcommands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalFlags {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

/// What a subcommand produced: the main document, where it goes, and the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Printed to standard output.
    pub text: String,
    /// Written to a file, when one was requested.
    pub file: Option<(PathBuf, String)>,
    pub code: i32,
    /// One-line explanation accompanying a nonzero code.
    pub diagnostic: Option<String>,
}

impl Report {
    fn document(doc: String, out: Option<PathBuf>, code: i32) -> Self {
        match out {
            Some(p) => Report {
                text: String::new(),
                file: Some((p, doc)),
                code,
                diagnostic: None,
            },
            None => Report {
                text: doc,
                file: None,
                code,
                diagnostic: None,
            },
        }
    }
}

const USAGE: &str = "usage: gridless <analyze|decompose|recover|mc|tau-sweep> FILE... [--seed N] [--threads N] [--out PATH]";

/// Splits arguments into the subcommand, its positional arguments and the global flags.
pub fn parse_args(args: &[String]) -> Result<(String, Vec<String>, GlobalFlags), CliError> {
    let mut flags = GlobalFlags::default();
    let mut positional = vec![];
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if let Some(flag) = arg.strip_prefix("--") {
            let (name, inline) = match flag.split_once('=') {
                Some((n, v)) => (n, Some(v.to_string())),
                None => (flag, None),
            };
            let mut value = || {
                inline
                    .clone()
                    .or_else(|| it.next().cloned())
                    .ok_or_else(|| CliError::Usage(format!("--{name} needs a value")))
            };
            match name {
                "seed" => {
                    let v = value()?;
                    flags.seed = Some(v.parse().map_err(|_| CliError::Usage(format!("bad seed '{v}'")))?);
                }
                "threads" => {
                    let v = value()?;
                    let n: usize = v.parse().map_err(|_| CliError::Usage(format!("bad thread count '{v}'")))?;
                    if n == 0 {
                        return Err(CliError::Usage("--threads must be at least 1".into()));
                    }
                    flags.threads = Some(n);
                }
                "out" => flags.out = Some(PathBuf::from(value()?)),
                "help" => return Err(CliError::Usage(USAGE.into())),
                _ => return Err(CliError::Usage(format!("unknown flag --{name}"))),
            }
        } else {
            positional.push(arg.clone());
        }
    }
    if positional.is_empty() {
        return Err(CliError::Usage(USAGE.into()));
    }
    let cmd = positional.remove(0);
    Ok((cmd, positional, flags))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parsed<T>(path: &Path, r: Result<T, ParseError>) -> Result<T, CliError> {
    r.map_err(|error| CliError::Parse {
        path: path.display().to_string(),
        error,
    })
}

fn expect_args(cmd: &str, args: &[String], n: usize) -> Result<(), CliError> {
    if args.len() != n {
        return Err(CliError::Usage(format!(
            "{cmd} expects {n} file argument{}, got {}",
            if n == 1 { "" } else { "s" },
            args.len()
        )));
    }
    Ok(())
}

/// Dispatches one invocation without touching the process streams.
pub fn execute(args: &[String]) -> Result<Report, CliError> {
    let (cmd, files, flags) = parse_args(args)?;
    match cmd.as_str() {
        "analyze" => {
            expect_args(&cmd, &files, 1)?;
            cmd_analyze(Path::new(&files[0]), &flags)
        }
        "decompose" => {
            expect_args(&cmd, &files, 1)?;
            cmd_decompose(Path::new(&files[0]), &flags)
        }
        "recover" => {
            expect_args(&cmd, &files, 2)?;
            cmd_recover(Path::new(&files[0]), Path::new(&files[1]), &flags)
        }
        "mc" => {
            expect_args(&cmd, &files, 1)?;
            cmd_mc(Path::new(&files[0]), &flags, false)
        }
        "tau-sweep" => {
            expect_args(&cmd, &files, 1)?;
            cmd_mc(Path::new(&files[0]), &flags, true)
        }
        other => Err(CliError::Usage(format!("unknown subcommand '{other}'; {USAGE}"))),
    }
}

/// Runs the CLI, writing the report and diagnostics to the given streams, and
/// returns the process exit code.
pub fn run<W: Write, E: Write>(args: &[String], stdout: &mut W, stderr: &mut E) -> i32 {
    let result = execute(args).and_then(|report| {
        if let Some((path, doc)) = &report.file {
            std::fs::write(path, doc).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            let _ = stdout.write_all(report.text.as_bytes());
            if let Some(d) = &report.diagnostic {
                let _ = writeln!(stderr, "error: {d}");
            }
            report.code
        }
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error: {line}");
            e.exit_code()
        }
    }
}

/// Geometry report: embedded uniform sub-array, resolvable region and
/// antenna counts; `--out` also receives a one-row CSV summary.
pub fn cmd_analyze(path: &Path, flags: &GlobalFlags) -> Result<Report, CliError> {
    let array = parsed(path, parse_array(&read(path)?))?;
    let a = array.sensing()?;
    let dims = array.virtual_dims;
    let d = active_dimension(dims);
    let rep = find_embedded_uniform(&a);
    let region = resolvable_region(&rep, d);
    let mut t = String::new();
    let _ = writeln!(t, "virtual_dims = {dims:?}");
    let _ = writeln!(t, "d = {d}");
    let _ = writeln!(t, "N = {}", a.n());
    let _ = writeln!(t, "N_virtual = {}", a.n_virtual());
    let _ = writeln!(t, "sensed = {}", one_based_ranges(&a.sensed_set()));
    let _ = writeln!(t, "embedded_dims = {:?}", rep.sub_dims);
    let _ = writeln!(t, "embedded_strides = {:?}", rep.strides);
    let _ = writeln!(t, "embedded_offsets = {:?}", rep.offsets.map(|o| o + 1));
    let _ = writeln!(t, "I_c = {}", one_based_ranges(&rep.indices));
    let _ = writeln!(
        t,
        "S_c={}, N_c={}, K_cor={}, K_conj={}",
        rep.s_c(),
        rep.n_c(),
        region.k_corollary,
        region.k_conjecture
    );
    let eps = array.epsilon;
    for k in 1..=region.k_conjecture {
        let n = min_antennas_probabilistic(k, eps)?;
        let _ = writeln!(t, "min_antennas(K={k}, eps={eps}) = {n}");
    }
    if !array.sources_deg.is_empty() {
        let freqs: Vec<_> = array
            .sources_deg
            .iter()
            .map(|&[theta, phi]| freq_from_angles(theta.to_radians(), phi.to_radians(), array.spacing))
            .collect();
        for (i, f) in freqs.iter().enumerate() {
            let _ = writeln!(t, "source {} frequency = [{}, {}, {}]", i + 1, f[0], f[1], f[2]);
        }
        let inj = check_injectivity(&a, &freqs);
        let _ = writeln!(
            t,
            "sources injective = {} (sigma_min = {:e}, sigma_max = {:e})",
            inj.injective, inj.smallest_singular_value, inj.largest_singular_value
        );
    }
    let file = flags.out.clone().map(|p| {
        let csv = format!(
            "s_c,n_c,k_cor,k_conj\n{},{},{},{}\n",
            rep.s_c(),
            rep.n_c(),
            region.k_corollary,
            region.k_conjecture
        );
        (p, csv)
    });
    Ok(Report {
        text: t,
        file,
        code: EXIT_OK,
        diagnostic: None,
    })
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Vandermonde decomposition of a PSD multilevel Toeplitz matrix given by
/// its generator or by atoms.
pub fn cmd_decompose(path: &Path, flags: &GlobalFlags) -> Result<Report, CliError> {
    let gen = parsed(path, parse_generator(&read(path)?))?;
    let opts = DecomposeOptions {
        rank_tol: gen.rank_tol,
        seed: flags.seed.unwrap_or(0),
        ..Default::default()
    };
    let dec = decompose_with(&gen.matrix, &opts)?;
    let mut csv = String::from("k,fx,fy,fz,power\n");
    for (i, (f, p)) in dec.freqs.points().iter().zip(&dec.powers).enumerate() {
        let _ = writeln!(csv, "{},{},{},{},{}", i + 1, fmt17(f[0]), fmt17(f[1]), fmt17(f[2]), fmt17(*p));
    }
    Ok(Report::document(csv, flags.out.clone(), EXIT_OK))
}

/// Solves one recovery problem for a measurement file and lists the
/// frequencies with powers and fitted amplitudes.
pub fn cmd_recover(manifest_path: &Path, measurement: &Path, flags: &GlobalFlags) -> Result<Report, CliError> {
    let m = parsed(manifest_path, parse_manifest(&read(manifest_path)?, manifest_path.parent()))?;
    let array = parsed(&m.array, parse_array(&read(&m.array)?))?;
    let a = array.sensing_in(m.virtual_dims)?;
    let y = parsed(measurement, parse_measurement(&read(measurement)?))?;
    if y.len() != a.n() {
        return Err(CliError::Input(format!(
            "measurement has {} entries but the array has {} antennas",
            y.len(),
            a.n()
        )));
    }
    let seed = flags.seed.unwrap_or(m.seed);
    let params = crate::solvers::SolverParams { seed, ..m.params };
    let sigma_a = match (m.sigma, m.snr_db, m.k) {
        (Some(s), _, _) => s,
        (None, Some(snr), Some(k)) => noise_sigma(k as f64, snr),
        _ => 0.0,
    };
    if matches!(m.solver, SolverKind::L2L1(TauRule::Upper | TauRule::Lower)) && !(sigma_a > 0.0) {
        return Err(CliError::Input(
            "tau = upper/lower needs 'sigma' or both 'snr_db' and 'k' in the manifest".into(),
        ));
    }
    let sol = run_solver(m.solver, &y, &a, &params, None, sigma_a)?;
    let opts = DecomposeOptions {
        rank_tol: params.rank_tol,
        psd_tol: EXTRACT_PSD_TOL,
        seed,
        target_rank: m.k,
        pairing_tol: if m.k.is_some() { f64::INFINITY } else { DecomposeOptions::default().pairing_tol },

        ..Default::default()
    };
    let dec = extract_frequencies_with(&sol, &opts)?;
    let mut csv = String::from("k,fx,fy,fz,power,amplitude_re,amplitude_im\n");
    let amps = dec.freqs.amplitudes().unwrap_or(&[]);
    for (i, f) in dec.freqs.points().iter().enumerate() {
        let u = amps.get(i).copied().unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            i + 1,
            fmt17(f[0]),
            fmt17(f[1]),
            fmt17(f[2]),
            fmt17(dec.powers[i]),
            fmt17(u.re),
            fmt17(u.im)
        );
    }
    let code = if sol.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    let mut report = Report::document(csv, flags.out.clone().or(m.output.clone()), code);
    if !sol.converged {
        report.diagnostic = Some(format!(
            "solver stopped after {} iterations without converging; the last iterate is reported",
            sol.iterations
        ));
    }
    Ok(report)
}

/// Monte Carlo table for a manifest; tau sweeps add the bound rows.
pub fn cmd_mc(manifest_path: &Path, flags: &GlobalFlags, require_tau: bool) -> Result<Report, CliError> {
    let m = parsed(manifest_path, parse_manifest(&read(manifest_path)?, manifest_path.parent()))?;
    let array = parsed(&m.array, parse_array(&read(&m.array)?))?;
    let a = array.sensing_in(m.virtual_dims)?;
    let sweep = m
        .sweep
        .clone()
        .ok_or_else(|| CliError::Input(format!("{}: the manifest has no [sweep] section", manifest_path.display())))?;
    let is_tau = matches!(sweep, Sweep::Tau(_));
    if require_tau && !is_tau {
        return Err(CliError::Input("tau-sweep needs a 'tau' list in [sweep]".into()));
    }
    let mut cfg = ExperimentConfig::new(m.solver, a, sweep);
    cfg.k = m.k.unwrap_or(cfg.k);
    cfg.snr_db = m.snr_db;
    cfg.trials = m.trials;
    cfg.seed = flags.seed.unwrap_or(m.seed);
    cfg.params = m.params;
    cfg.success_tol = m.success_tol;
    cfg.threads = flags.threads.unwrap_or(m.threads);
    cfg.record_time = m.timing;
    let csv = if is_tau {
        sweep_tau(&cfg)?.to_csv()
    } else {
        run_monte_carlo(&cfg)?.to_csv()
    };
    Ok(Report::document(csv, flags.out.clone().or(m.output.clone()), EXIT_OK))
}

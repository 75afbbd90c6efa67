//! Array, manifest, measurement and generator files.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;

use super::format::{parse_row, Document, Entry, ParseError};
use super::CliError;
use crate::evalkit::{SolverKind, Sweep, TauRule};
use crate::geometry::{embed_in_virtual, ArrayDeployment, Dims, SensingMatrix};
use crate::mlt::{mlt_from_atoms, MLTMatrix};
use crate::solvers::SolverParams;

/// A parsed array description.
///
/// ```text
/// virtual_dims = [1, 3, 6]
/// spacing = [0.5, 0.5, 0.5]
/// positions = [
///   1, 1, 1
///   1, 2, 3
/// ]
/// [sources]
/// angles_deg = [30, 45]
/// ```
///
/// `full_grid = true` replaces `positions` with the whole lattice. Positions
/// are 1-based lattice coordinates; source angles are `[theta, phi]` in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    pub virtual_dims: Dims,
    pub spacing: [f64; 3],
    pub deployment: ArrayDeployment,
    pub sources_deg: Vec<[f64; 2]>,
    /// Failure probability used for the antenna-count report.
    pub epsilon: f64,
}

impl ArrayFile {
    pub fn sensing(&self) -> Result<SensingMatrix, CliError> {
        Ok(embed_in_virtual(&self.deployment, self.virtual_dims)?)
    }

    /// Sensing matrix on `dims`, or on the file's own lattice when `None`.
    pub fn sensing_in(&self, dims: Option<Dims>) -> Result<SensingMatrix, CliError> {
        Ok(embed_in_virtual(&self.deployment, dims.unwrap_or(self.virtual_dims))?)
    }
}

fn required<'a>(doc: &'a Document, section: &str, key: &str) -> Result<&'a Entry, ParseError> {
    doc.get(section, key)
        .ok_or_else(|| ParseError::new(1, 1, format!("missing required key '{key}'")))
}

pub fn parse_array(text: &str) -> Result<ArrayFile, ParseError> {
    let doc = Document::parse(text)?;
    doc.check_keys(
        &[
            ("", "virtual_dims"),
            ("", "spacing"),
            ("", "full_grid"),
            ("", "positions"),
            ("", "epsilon"),
            ("sources", "angles_deg"),
        ],
        &[],
    )?;
    let dims_entry = required(&doc, "", "virtual_dims")?;
    let dims = dims_entry.as_triple_usize()?;
    if dims.contains(&0) {
        return Err(dims_entry.error("dimensions must be positive"));
    }
    let spacing = match doc.get("", "spacing") {
        Some(e) => {
            let s = e.as_triple_f64()?;
            if s.iter().any(|&v| !(v > 0.0)) {
                return Err(e.error("spacing must be positive"));
            }
            s
        }
        None => [0.5; 3],
    };
    let full = match doc.get("", "full_grid") {
        Some(e) => e.as_bool()?,
        None => false,
    };
    let deployment = match (full, doc.get("", "positions")) {
        (true, Some(e)) => return Err(e.error("give either full_grid = true or positions, not both")),
        (true, None) => ArrayDeployment::uniform(dims, spacing).map_err(|e| dims_entry.error(e.to_string()))?,
        (false, None) => return Err(ParseError::new(1, 1, "missing 'positions' (or full_grid = true)")),
        (false, Some(e)) => {
            let mut points = vec![];
            for (p, line) in e.as_triples()? {
                if p.contains(&0) {
                    return Err(ParseError::new(line, 1, format!("positions are 1-based, found {p:?}")));
                }
                points.push([p[0] - 1, p[1] - 1, p[2] - 1]);
            }
            ArrayDeployment::new(dims, points, spacing).map_err(|err| e.error(err.to_string()))?
        }
    };
    let mut sources = vec![];
    for e in doc.all("sources", "angles_deg") {
        let v = e.as_f64_list()?;
        let [theta, phi] = v[..] else {
            return Err(e.error("expected [theta, phi]"));
        };
        sources.push([theta, phi]);
    }
    let epsilon = match doc.get("", "epsilon") {
        Some(e) => {
            let v = e.as_f64()?;
            if !(v > 0.0 && v < 1.0) {
                return Err(e.error("epsilon must lie in (0, 1)"));
            }
            v
        }
        None => 0.05,
    };
    Ok(ArrayFile {
        virtual_dims: dims,
        spacing,
        deployment,
        sources_deg: sources,
        epsilon,
    })
}

/// An experiment or recovery description.
///
/// ```text
/// array = planar.array        # relative to the manifest
/// solver = l1                 # l0 | l1 | l2l1
/// virtual_dims = [1, 3, 10]   # optional enlargement
/// k = 3
/// trials = 100
/// seed = 42
/// snr_db = 0                  # optional, noiseless when absent
/// tau = upper                 # l2l1 only: a number, upper or lower
/// [sweep]
/// k = [1, 2, 3]               # or snr_db = [...] or tau = [0.90:0.005:0.99]
/// [solver]
/// rho = 1
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub array: PathBuf,
    pub solver: SolverKind,
    pub virtual_dims: Option<Dims>,
    pub sweep: Option<Sweep>,
    pub k: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub snr_db: Option<f64>,
    /// Per-antenna noise level for single recoveries with bound-based `τ`.
    pub sigma: Option<f64>,
    pub success_tol: f64,
    pub threads: usize,
    pub timing: bool,
    pub params: SolverParams,
    pub output: Option<PathBuf>,
}

pub fn parse_manifest(text: &str, base: Option<&Path>) -> Result<Manifest, ParseError> {
    let doc = Document::parse(text)?;
    doc.check_keys(
        &[
            ("", "array"),
            ("", "solver"),
            ("", "virtual_dims"),
            ("", "k"),
            ("", "k_max"),
            ("", "trials"),
            ("", "seed"),
            ("", "snr_db"),
            ("", "sigma"),
            ("", "tau"),
            ("", "success_tol"),
            ("", "threads"),
            ("", "timing"),
            ("", "output"),
            ("sweep", "k"),
            ("sweep", "snr_db"),
            ("sweep", "tau"),
            ("solver", "max_iterations"),
            ("solver", "rho"),
            ("solver", "eps_abs"),
            ("solver", "eps_rel"),
            ("solver", "rank_tol"),
        ],
        &[],
    )?;
    let resolve = |s: &str| {
        let p = PathBuf::from(s);
        match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        }
    };
    let array = resolve(required(&doc, "", "array")?.as_str());
    let solver_entry = required(&doc, "", "solver")?;
    let k_max = doc.get("", "k_max").map(Entry::as_usize).transpose()?;
    let tau = match doc.get("", "tau") {
        None => None,
        Some(e) => Some(match e.as_str() {
            "upper" => TauRule::Upper,
            "lower" => TauRule::Lower,
            _ => {
                let t = e.as_f64()?;
                if !(t > 0.0 && t < 1.0) {
                    return Err(e.error("tau must lie in (0, 1)"));
                }
                TauRule::Fixed(t)
            }
        }),
    };
    let solver = match solver_entry.as_str() {
        "l0" => SolverKind::L0 { k_max },
        "l1" => SolverKind::L1,
        "l2l1" => SolverKind::L2L1(tau.unwrap_or(TauRule::Upper)),
        other => return Err(solver_entry.error(format!("unknown solver '{other}', expected l0, l1 or l2l1"))),
    };
    let virtual_dims = doc.get("", "virtual_dims").map(Entry::as_triple_usize).transpose()?;
    let sweep_entries: Vec<&Entry> = doc.entries.iter().filter(|e| e.section == "sweep").collect();
    let sweep = match sweep_entries.as_slice() {
        [] => None,
        [e] => Some(match e.key.as_str() {
            "k" => Sweep::K(e.as_usize_list()?),
            "snr_db" => Sweep::SnrDb(e.as_f64_list()?),
            _ => Sweep::Tau(e.as_f64_list()?),
        }),
        [_, second, ..] => return Err(second.error("[sweep] takes exactly one axis")),
    };
    let opt_f64 = |key: &str| doc.get("", key).map(Entry::as_f64).transpose();
    let defaults = SolverParams::default();
    let solver_f64 = |key: &str, default: f64| {
        doc.get("solver", key).map(Entry::as_f64).transpose().map(|v| v.unwrap_or(default))
    };
    let params = SolverParams {
        max_iterations: doc
            .get("solver", "max_iterations")
            .map(Entry::as_usize)
            .transpose()?
            .unwrap_or(defaults.max_iterations),
        rho: solver_f64("rho", defaults.rho)?,
        eps_abs: solver_f64("eps_abs", defaults.eps_abs)?,
        eps_rel: solver_f64("eps_rel", defaults.eps_rel)?,
        rank_tol: solver_f64("rank_tol", defaults.rank_tol)?,
        seed: 0,
    };
    if params.validate().is_err() {
        let line = doc.entries.iter().find(|e| e.section == "solver").map_or(1, |e| e.line);
        return Err(ParseError::new(line, 1, "solver parameters must be positive with tolerances below 1"));
    }
    let trials = doc.get("", "trials").map(Entry::as_usize).transpose()?.unwrap_or(100);
    if trials == 0 {
        return Err(doc.get("", "trials").map_or(ParseError::new(1, 1, ""), |e| e.error("trials must be at least 1")));
    }
    let threads = doc.get("", "threads").map(Entry::as_usize).transpose()?.unwrap_or(1).max(1);
    Ok(Manifest {
        array,
        solver,
        virtual_dims,
        sweep,
        k: doc.get("", "k").map(Entry::as_usize).transpose()?,
        trials,
        seed: doc.get("", "seed").map(Entry::as_u64).transpose()?.unwrap_or(0),
        snr_db: opt_f64("snr_db")?,
        sigma: opt_f64("sigma")?,
        success_tol: opt_f64("success_tol")?.unwrap_or(1e-3),
        threads,
        timing: doc.get("", "timing").map(Entry::as_bool).transpose()?.unwrap_or(false),
        params,
        output: doc.get("", "output").map(|e| resolve(e.as_str())),
    })
}

/// One complex entry per line, written `re,im`.
pub fn parse_measurement(text: &str) -> Result<DVector<Complex64>, ParseError> {
    let mut out = vec![];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bare = super::format::BareLine {
            section: String::new(),
            text: line.to_string(),
            line: i + 1,
        };
        let v = parse_row(&bare, 2)?;
        out.push(Complex64::new(v[0], v[1]));
    }
    Ok(DVector::from_vec(out))
}

/// A multilevel Toeplitz matrix given either by generator entries
/// (`[entries]` rows `a, b, c, re, im` for `v_abc`, mirrored entries implied)
/// or by atoms (`[atoms]` rows `fx, fy, fz, power`).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorFile {
    pub matrix: MLTMatrix,
    pub rank_tol: f64,
}

pub fn parse_generator(text: &str) -> Result<GeneratorFile, ParseError> {
    let doc = Document::parse(text)?;
    doc.check_keys(&[("", "dims"), ("", "rank_tol")], &["entries", "atoms"])?;
    let dims_entry = required(&doc, "", "dims")?;
    let dims = dims_entry.as_triple_usize()?;
    if dims.contains(&0) {
        return Err(dims_entry.error("dimensions must be positive"));
    }
    let rank_tol = match doc.get("", "rank_tol") {
        Some(e) => e.as_f64()?,
        None => 1e-8,
    };
    let entries: Vec<_> = doc.bare_in("entries").collect();
    let atoms: Vec<_> = doc.bare_in("atoms").collect();
    let matrix = match (entries.is_empty(), atoms.is_empty()) {
        (false, false) => return Err(ParseError::new(atoms[0].line, 1, "give [entries] or [atoms], not both")),
        (true, true) => MLTMatrix::zeros(dims),
        (false, true) => {
            let mut m = MLTMatrix::zeros(dims);
            for row in entries {
                let v = parse_row(row, 5)?;
                let off: Vec<isize> = v[..3].iter().map(|&x| x as isize).collect();
                let fits = v[..3].iter().all(|x| x.fract() == 0.0)
                    && (0..3).all(|a| off[a].unsigned_abs() < dims[a]);
                if !fits {
                    return Err(ParseError::new(row.line, 1, format!("offset {off:?} outside the lattice {dims:?}")));
                }
                if off == [0, 0, 0] && v[4] != 0.0 {
                    return Err(ParseError::new(row.line, 1, "the zero-offset entry must be real"));
                }
                m.set(off[0], off[1], off[2], Complex64::new(v[3], v[4]));
            }
            m
        }
        (true, false) => {
            let mut freqs = vec![];
            let mut powers = vec![];
            for row in atoms {
                let v = parse_row(row, 4)?;
                if v[..3].iter().any(|x| !(0.0..1.0).contains(x)) || !(v[3] > 0.0) {
                    return Err(ParseError::new(row.line, 1, "atoms need frequencies in [0, 1) and positive power"));
                }
                freqs.push([v[0], v[1], v[2]]);
                powers.push(v[3]);
            }
            mlt_from_atoms(dims, &freqs, &powers).map_err(|e| ParseError::new(1, 1, e.to_string()))?
        }
    };
    Ok(GeneratorFile { matrix, rank_tol })
}

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geometry::{active_dimension, canonicalize, SensingMatrix};
use crate::mlt::MLTMatrix;
use crate::solvers::{
    extract_frequencies_with, solve_l0_rank_min, solve_l1_an, solve_l2_l1_an, tau_bounds, SdpSolution,
    SolverError, SolverParams, EXTRACT_PSD_TOL,
};
use crate::vandermonde::DecomposeOptions;

use super::{crlb, sample_frequencies, score_recovery, synthesize_measurement, EvalError, Scene, UNMATCHED_PENALTY};

/// How the weighted program picks `τ` in cells that do not sweep it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    Fixed(f64),
    /// Upper closed-form bound for the cell's noise level.
    Upper,
    /// Lower closed-form bound for the cell's noise level.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    /// Rank heuristic; `k_max` defaults to `max(dims) − 1`.
    L0 { k_max: Option<usize> },
    L1,
    L2L1(TauRule),
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::L0 { .. } => "l0",
            SolverKind::L1 => "l1",
            SolverKind::L2L1(_) => "l2l1",
        }
    }
}

/// The swept quantity; one table row per value.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    K(Vec<usize>),
    SnrDb(Vec<f64>),
    Tau(Vec<f64>),
}

impl Sweep {
    pub fn axis(&self) -> &'static str {
        match self {
            Sweep::K(_) => "K",
            Sweep::SnrDb(_) => "snr_db",
            Sweep::Tau(_) => "tau",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::K(v) => v.len(),
            Sweep::SnrDb(v) => v.len(),
            Sweep::Tau(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A seeded experiment over one sweep axis.
///
/// Noise levels are given as a per-antenna SNR: with unit-modulus amplitudes
/// and `σ_a = √(K / SNR)`, each entry of the normalized-atom measurement
/// receives noise of standard deviation `σ_a/√N̄`. The closed-form `τ` bounds
/// are evaluated at `σ_a`, and the weighted program is run on `N̄·y` so that
/// its atomic-norm term is measured against unit-modulus atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub solver: SolverKind,
    pub sensing: SensingMatrix,
    pub sweep: Sweep,
    /// Number of sources when the sweep is not over `K`.
    pub k: usize,
    /// Noise level when the sweep is not over SNR; `None` is noiseless.
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub params: SolverParams,
    /// A trial succeeds when it has no failure and its error is at most this.
    pub success_tol: f64,
    pub threads: usize,
    /// Records wall-clock time per trial; off keeps tables reproducible bit for bit.
    pub record_time: bool,
}

impl ExperimentConfig {
    pub fn new(solver: SolverKind, sensing: SensingMatrix, sweep: Sweep) -> Self {
        Self {
            solver,
            sensing,
            sweep,
            k: 3,
            snr_db: None,
            trials: 100,
            seed: 0,
            params: SolverParams::default(),
            success_tol: 1e-3,
            threads: 1,
            record_time: false,
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        let dims = self.sensing.virtual_dims();
        if !canonicalize(dims).is_identity() {
            return bad(format!("virtual dims {dims:?} are not in ascending order"));
        }
        if self.trials == 0 || self.threads == 0 {
            return bad("trials and threads must be at least 1".into());
        }
        if self.sweep.is_empty() {
            return bad("empty sweep".into());
        }
        if !(self.success_tol > 0.0) {
            return bad(format!("success tolerance {}", self.success_tol));
        }
        match &self.sweep {
            Sweep::K(ks) if ks.contains(&0) => return bad("K must be at least 1".into()),
            Sweep::K(_) => {}
            _ if self.k == 0 => return bad("K must be at least 1".into()),
            Sweep::Tau(ts) => {
                if !matches!(self.solver, SolverKind::L2L1(_)) {
                    return bad("a tau sweep needs the l2l1 solver".into());
                }
                if let Some(t) = ts.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
                    return bad(format!("tau {t} outside (0, 1)"));
                }
            }
            Sweep::SnrDb(v) => {
                if v.iter().any(|s| !s.is_finite()) {
                    return bad("SNR values must be finite".into());
                }
            }
        }
        self.params.validate()?;
        Ok(())
    }

    fn cell(&self, index: usize) -> Cell {
        let mut c = Cell {
            k: self.k,
            snr_db: self.snr_db,
            tau: None,
        };
        match &self.sweep {
            Sweep::K(v) => c.k = v[index],
            Sweep::SnrDb(v) => c.snr_db = Some(v[index]),
            Sweep::Tau(v) => c.tau = Some(v[index]),
        }
        c
    }

    /// Scene stream of a cell. Cells that differ only in noise level or `τ`
    /// share their scenes, so their rows compare the same acquisitions.
    fn scene_stream(&self, index: usize) -> usize {
        match self.sweep {
            Sweep::K(_) => index,
            Sweep::SnrDb(_) | Sweep::Tau(_) => 0,
        }
    }

    fn cell_value(&self, index: usize) -> f64 {
        match &self.sweep {
            Sweep::K(v) => v[index] as f64,
            Sweep::SnrDb(v) => v[index],
            Sweep::Tau(v) => v[index],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    k: usize,
    snr_db: Option<f64>,
    tau: Option<f64>,
}

/// Per-antenna noise standard deviation for total source energy `energy`.
pub fn noise_sigma(energy: f64, snr_db: f64) -> f64 {
    (energy / 10f64.powf(snr_db / 10.0)).sqrt()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream owned by one trial.
pub fn trial_seed(master: u64, cell: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell as u64) ^ trial as u64)
}

/// Sum by recursive halving; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Runs one solver on `y` under the noise convention of [`ExperimentConfig`].
///
/// `tau` overrides the rule of the weighted program and `sigma_a` is the
/// per-antenna noise level its bounds are evaluated at. The weighted program
/// runs on `N̄·y`; its solution is scaled back before being returned.
pub fn run_solver(
    kind: SolverKind,
    y: &DVector<Complex64>,
    sensing: &SensingMatrix,
    params: &SolverParams,
    tau: Option<f64>,
    sigma_a: f64,
) -> Result<SdpSolution, SolverError> {
    let dims = sensing.virtual_dims();
    match kind {
        SolverKind::L0 { k_max } => {
            let k_max = k_max.unwrap_or(dims.iter().max().copied().unwrap_or(1) - 1);
            solve_l0_rank_min(y, sensing, dims, params, k_max)
        }
        SolverKind::L1 => solve_l1_an(y, sensing, dims, params),
        SolverKind::L2L1(rule) => {
            let tau = match (tau, rule) {
                (Some(t), _) | (None, TauRule::Fixed(t)) => t,
                (None, TauRule::Upper) => tau_bounds(sigma_a, sensing.n())?.1,
                (None, TauRule::Lower) => tau_bounds(sigma_a, sensing.n())?.0,
            };
            let scale = sensing.n_virtual() as f64;
            let sol = solve_l2_l1_an(&(y * Complex64::new(scale, 0.0)), sensing, dims, tau, params)?;
            let generator = sol.structured.generator().iter().map(|v| v / scale).collect();
            Ok(SdpSolution {
                scalar: sol.scalar / scale,
                s: sol.s / Complex64::new(scale, 0.0),
                structured: MLTMatrix::from_generator(dims, generator)?,
                primal_residual: sol.primal_residual / scale,
                dual_residual: sol.dual_residual / scale,
                ..sol
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    error: f64,
    failed: bool,
    seconds: f64,
    crlb: Option<f64>,
}

fn run_trial(cfg: &ExperimentConfig, cell_index: usize, cell: Cell, trial: usize) -> Outcome {
    let seed = trial_seed(cfg.seed, cfg.scene_stream(cell_index), trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = active_dimension(cfg.sensing.virtual_dims());
    let n_virtual = cfg.sensing.n_virtual() as f64;
    let truth = sample_frequencies(cell.k, d, &mut rng);
    let noise_seed: u64 = rng.gen();
    let sigma_a = cell.snr_db.map_or(0.0, |s| noise_sigma(cell.k as f64, s));
    let scene = Scene::new(truth, sigma_a / n_virtual.sqrt(), cfg.sensing.clone(), noise_seed)
        .expect("sampled scenes are valid");
    let y = synthesize_measurement(&scene);
    let bound = (scene.sigma > 0.0).then(|| crlb(&scene).ok()).flatten();
    let params = SolverParams { seed, ..cfg.params };

    let start = Instant::now();
    let solved = run_solver(cfg.solver, &y, &cfg.sensing, &params, cell.tau, sigma_a);
    let opts = DecomposeOptions {
        rank_tol: params.rank_tol,
        psd_tol: EXTRACT_PSD_TOL,
        seed,
        target_rank: Some(cell.k),
        pairing_tol: f64::INFINITY,

        ..Default::default()
    };
    let recovered = solved.and_then(|sol| {
        let converged = sol.converged;
        extract_frequencies_with(&sol, &opts).map(|dec| (dec, converged))
    });
    let seconds = if cfg.record_time {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    match recovered {
        Ok((dec, converged)) => {
            let score = score_recovery(dec.freqs.points(), scene.freqs.points(), d);
            Outcome {
                error: score.error,
                failed: score.mismatch || !converged,
                seconds,
                crlb: bound,
            }
        }
        Err(_) => Outcome {
            error: UNMATCHED_PENALTY,
            failed: true,
            seconds,
            crlb: bound,
        },
    }
}

/// Aggregates of one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub value: f64,
    pub mean_error: f64,
    pub success_rate: f64,
    pub failures: usize,
    pub trials: usize,
    pub mean_seconds: f64,
    /// Mean Cramér–Rao reference over noisy trials, when defined.
    pub mean_crlb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub axis: &'static str,
    pub solver: &'static str,
    pub rows: Vec<ErrorRow>,
}

/// Fixed 17-significant-digit scientific notation.
pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl ErrorTable {
    pub const HEADER: &'static str = "axis,value,mean_error,success_rate,failures,trials,mean_seconds";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let value = if self.axis == "K" {
                format!("{}", r.value as usize)
            } else {
                fmt17(r.value)
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.axis,
                value,
                fmt17(r.mean_error),
                fmt17(r.success_rate),
                r.failures,
                r.trials,
                fmt17(r.mean_seconds)
            );
        }
        out
    }

    pub fn row(&self, value: f64) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.value == value)
    }
}

fn aggregate(cfg: &ExperimentConfig, index: usize, outcomes: &[Outcome]) -> ErrorRow {
    let n = outcomes.len() as f64;
    let errors: Vec<f64> = outcomes.iter().map(|o| o.error).collect();
    let secs: Vec<f64> = outcomes.iter().map(|o| o.seconds).collect();
    let successes = outcomes
        .iter()
        .filter(|o| !o.failed && o.error <= cfg.success_tol)
        .count();
    let bounds: Vec<f64> = outcomes.iter().filter_map(|o| o.crlb).collect();
    ErrorRow {
        value: cfg.cell_value(index),
        mean_error: pairwise_sum(&errors) / n,
        success_rate: successes as f64 / n,
        failures: outcomes.iter().filter(|o| o.failed).count(),
        trials: outcomes.len(),
        mean_seconds: pairwise_sum(&secs) / n,
        mean_crlb: (!bounds.is_empty()).then(|| pairwise_sum(&bounds) / bounds.len() as f64),
    }
}

fn run_cells(cfg: &ExperimentConfig, cells: &[usize]) -> Result<ErrorTable, EvalError> {
    cfg.validate()?;
    if let Some(&bad) = cells.iter().find(|&&c| c >= cfg.sweep.len()) {
        return Err(EvalError::InvalidConfig(format!("cell {bad} outside the sweep")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
    let rows = pool.install(|| {
        cells
            .iter()
            .map(|&index| {
                let cell = cfg.cell(index);
                let outcomes: Vec<Outcome> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| run_trial(cfg, index, cell, t))
                    .collect();
                aggregate(cfg, index, &outcomes)
            })
            .collect()
    });
    Ok(ErrorTable {
        axis: cfg.sweep.axis(),
        solver: cfg.solver.name(),
        rows,
    })
}

/// Runs every cell of the sweep; per-trial failures are counted in the table.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<ErrorTable, EvalError> {
    let all: Vec<usize> = (0..cfg.sweep.len()).collect();
    run_cells(cfg, &all)
}

/// Runs one cell in isolation; it reproduces that cell's row of the full run.
pub fn run_cell(cfg: &ExperimentConfig, index: usize) -> Result<ErrorRow, EvalError> {
    Ok(run_cells(cfg, &[index])?.rows.remove(0))
}

/// Result of a sweep over `τ`, with the closed-form bounds for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct TauSweep {
    pub table: ErrorTable,
    /// Grid point of least mean error (first one on ties).
    pub argmin: f64,
    pub tau_l: f64,
    pub tau_u: f64,
}

impl TauSweep {
    pub fn argmin_within_bounds(&self) -> bool {
        self.tau_l <= self.argmin && self.argmin <= self.tau_u
    }

    /// The error table followed by `tau_l`, `tau_u` and `tau_argmin` rows.
    pub fn to_csv(&self) -> String {
        let mut out = self.table.to_csv();
        for (name, v) in [("tau_l", self.tau_l), ("tau_u", self.tau_u), ("tau_argmin", self.argmin)] {
            let _ = writeln!(out, "{name},{},,,,,", fmt17(v));
        }
        out
    }
}

/// Monte Carlo over a `τ` grid at one noise level.
pub fn sweep_tau(cfg: &ExperimentConfig) -> Result<TauSweep, EvalError> {
    if !matches!(cfg.sweep, Sweep::Tau(_)) {
        return Err(EvalError::InvalidConfig("sweep_tau needs a tau sweep".into()));
    }
    let snr = cfg
        .snr_db
        .ok_or_else(|| EvalError::InvalidConfig("sweep_tau needs an SNR".into()))?;
    let table = run_monte_carlo(cfg)?;
    let (tau_l, tau_u) = tau_bounds(noise_sigma(cfg.k as f64, snr), cfg.sensing.n())?;
    let mut argmin = table.rows[0].value;
    let mut best = table.rows[0].mean_error;
    for r in &table.rows[1..] {
        if r.mean_error < best {
            best = r.mean_error;
            argmin = r.value;
        }
    }
    Ok(TauSweep {
        table,
        argmin,
        tau_l,
        tau_u,
    })
}

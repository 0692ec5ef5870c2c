//! Seeded experiment sweeps, benchmark comparisons and CSV output.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::doppler::{doppler_slot, CoherenceModel};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::outer::{bcd_solve, scale_to_power, BcdOptions};
use crate::scenario::{build_channel_set, SystemConfig, TrainState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Solve,
    SweepPower,
    SweepElements,
    SweepAllocation,
    LeakageSweep,
    TrainSweep,
    PilotSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Solve,
        ExperimentKind::SweepPower,
        ExperimentKind::SweepElements,
        ExperimentKind::SweepAllocation,
        ExperimentKind::LeakageSweep,
        ExperimentKind::TrainSweep,
        ExperimentKind::PilotSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::SweepPower => "sweep_power",
            ExperimentKind::SweepElements => "sweep_elements",
            ExperimentKind::SweepAllocation => "sweep_allocation",
            ExperimentKind::LeakageSweep => "leakage_sweep",
            ExperimentKind::TrainSweep => "train_sweep",
            ExperimentKind::PilotSweep => "pilot_sweep",
        }
    }

    fn is_doppler(self) -> bool {
        matches!(self, ExperimentKind::TrainSweep | ExperimentKind::PilotSweep)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Optimized,
    RandomW,
    NoIrs1,
    NoIrs2,
    RandomPhaseIrs1,
    RandomPhaseIrs2,
    NoDopplerMitigation,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Optimized,
        Variant::RandomW,
        Variant::NoIrs1,
        Variant::NoIrs2,
        Variant::RandomPhaseIrs1,
        Variant::RandomPhaseIrs2,
        Variant::NoDopplerMitigation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Optimized => "optimized",
            Variant::RandomW => "random_W",
            Variant::NoIrs1 => "no_irs1",
            Variant::NoIrs2 => "no_irs2",
            Variant::RandomPhaseIrs1 => "random_phase_irs1",
            Variant::RandomPhaseIrs2 => "random_phase_irs2",
            Variant::NoDopplerMitigation => "no_doppler_mitigation",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown variant `{s}`")))
    }
}

/// Train and pilot settings for the Doppler sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    /// m/s.
    pub speed: f64,
    /// Slot length (s).
    pub dt: f64,
    /// Closest approach of the track to the IoTDs (m).
    pub lateral: f64,
    /// Along-track position used by pilot sweeps (m).
    pub position: f64,
    pub pilot_overhead: f64,
    pub coherence: CoherenceModel,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            speed: 70.0,
            dt: 1e-3,
            lateral: 1.0,
            position: -(20.0f64.powi(2) - 1.0).sqrt(),
            pilot_overhead: 6000.0,
            coherence: CoherenceModel::default(),
        }
    }
}

/// One experiment: what is swept, how the decision is altered, over how
/// many channel realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub variant: Variant,
    /// Swept values; their meaning depends on the kind (see `apply_grid`).
    pub grid: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    pub base: SystemConfig,
    pub train: TrainSettings,
    /// Worker threads; 0 uses every core.
    pub parallelism: usize,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, variant: Variant, base: SystemConfig) -> Self {
        let grid = default_grid(kind, &base);
        Self {
            kind,
            variant,
            grid,
            realizations: 100,
            master_seed: 0,
            base,
            train: TrainSettings::default(),
            parallelism: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Validation("grid must not be empty".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Validation("at least one realization is needed".into()));
        }
        if self.grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::Validation("grid values must be finite".into()));
        }
        let doppler_only = self.variant == Variant::NoDopplerMitigation;
        if doppler_only && !self.kind.is_doppler() {
            return Err(Error::Validation(format!(
                "variant {} only applies to train_sweep and pilot_sweep",
                self.variant
            )));
        }
        match self.kind {
            ExperimentKind::SweepPower => {
                if self.grid.iter().any(|&p| !(p > 0.0)) {
                    return Err(Error::Validation("transmit powers must be positive".into()));
                }
            }
            ExperimentKind::SweepElements | ExperimentKind::LeakageSweep => {
                if self.grid.iter().any(|&n| n < 1.0 || n.fract() != 0.0) {
                    return Err(Error::Validation("element counts must be positive integers".into()));
                }
            }
            ExperimentKind::SweepAllocation => {
                let total = (self.base.n1 + self.base.n2) as f64;
                if self.grid.iter().any(|&n| n < 0.0 || n > total || n.fract() != 0.0) {
                    return Err(Error::Validation(format!("IRS1 counts must be integers in [0, {total}]")));
                }
            }
            ExperimentKind::PilotSweep => {
                if self.grid.iter().any(|&p| !(p >= 0.0)) {
                    return Err(Error::Validation("pilot overheads must be non-negative".into()));
                }
            }
            ExperimentKind::TrainSweep | ExperimentKind::Solve => {}
        }
        if self.kind.is_doppler() && !(self.train.dt > 0.0 && self.train.speed >= 0.0) {
            return Err(Error::Validation("train speed and slot time must be valid".into()));
        }
        self.base.validate()
    }
}

/// Grid used when none is given.
pub fn default_grid(kind: ExperimentKind, base: &SystemConfig) -> Vec<f64> {
    match kind {
        ExperimentKind::Solve => vec![base.p_max],
        ExperimentKind::SweepPower => vec![1.0, 2.0, 4.0, 6.0, 8.0, 10.0],
        ExperimentKind::SweepElements => vec![25.0, 36.0, 49.0, 64.0, 81.0, 100.0],
        ExperimentKind::SweepAllocation => {
            let total = base.n1 + base.n2;
            (0..=8).map(|i| (i * total / 8) as f64).collect()
        }
        ExperimentKind::LeakageSweep => vec![36.0, 49.0, 64.0, 81.0, 100.0],
        ExperimentKind::TrainSweep => {
            let far = (20.0f64.powi(2) - 1.0).sqrt();
            (0..=8).map(|i| -far + i as f64 * far / 4.0).collect()
        }
        ExperimentKind::PilotSweep => vec![0.0, 1500.0, 3000.0, 4500.0, 6000.0],
    }
}

/// One (grid point, seed) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub variant: Variant,
    pub grid_index: usize,
    pub grid_value: f64,
    pub seed: u64,
    pub objective: f64,
    pub leakage: f64,
    pub beta: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub latency: Vec<f64>,
    /// Objective right after initialization, before any block ran.
    pub initial_objective: f64,
    /// Objective after the first outer iteration.
    pub first_iteration_objective: f64,
    /// Set when the cell failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub grid_value: f64,
    pub count: usize,
    pub failures: usize,
    pub mean_objective: f64,
    pub se_objective: f64,
    pub mean_leakage: f64,
    pub se_leakage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<GridSummary>,
    pub num_iotds: usize,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Channel seed of realization `seed_index`. It ignores the grid point so
/// that sweeps compare the same geometry and fading draws at every point.
pub fn channel_seed(master: u64, seed_index: usize) -> u64 {
    splitmix(splitmix(master) ^ seed_index as u64)
}

/// Seed of every other random draw in a cell.
pub fn cell_seed(master: u64, grid_index: usize, seed_index: usize) -> u64 {
    splitmix(channel_seed(master, seed_index) ^ splitmix(grid_index as u64 + 1))
}

/// Energy beams with entries whose real and imaginary parts are drawn
/// uniformly on (0, 1), scaled to the power budget.
pub fn random_beams(m1: usize, p_max: f64, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = CMat::from_fn(m1, m1, |_, _| C64::new(rng.random(), rng.random()));
    scale_to_power(&w, p_max)
}

/// Solver options of one cell: the shared initialization draw plus
/// whatever the variant fixes. `drop1`/`drop2` mark absent surfaces.
pub fn cell_options(
    cfg: &SystemConfig,
    variant: Variant,
    master: u64,
    grid_index: usize,
    seed_index: usize,
    drop1: bool,
    drop2: bool,
) -> BcdOptions {
    let draw_seed = cell_seed(master, grid_index, seed_index);
    // Every variant starts from the same beams; random_W just keeps them.
    let mut opts = BcdOptions {
        seed: draw_seed,
        init_w: Some(random_beams(cfg.m1, cfg.p_max, splitmix(draw_seed))),
        ..Default::default()
    };
    match variant {
        Variant::RandomW => opts.optimize_w = false,
        Variant::RandomPhaseIrs1 => opts.optimize_theta1 = false,
        Variant::RandomPhaseIrs2 => opts.optimize_theta2 = false,
        _ => {}
    }
    // Phases of an absent surface have no effect.
    opts.optimize_theta1 &= !(drop1 || variant == Variant::NoIrs1);
    opts.optimize_theta2 &= !(drop2 || variant == Variant::NoIrs2);
    opts
}

/// Grid-dependent configuration and which IRSs are absent.
struct CellSetup {
    cfg: SystemConfig,
    drop_irs1: bool,
    drop_irs2: bool,
    pilot_overhead: f64,
    train: Option<TrainState>,
}

fn apply_grid(spec: &ExperimentSpec, value: f64) -> CellSetup {
    let mut cfg = spec.base.clone();
    let mut drop_irs1 = false;
    let mut drop_irs2 = false;
    let mut pilot_overhead = spec.train.pilot_overhead;
    let mut train = None;
    let ts = &spec.train;
    match spec.kind {
        ExperimentKind::Solve => {}
        ExperimentKind::SweepPower => cfg.p_max = value,
        ExperimentKind::SweepElements => cfg.set_elements(value as usize, value as usize),
        ExperimentKind::LeakageSweep => cfg.set_elements(cfg.n1, value as usize),
        ExperimentKind::SweepAllocation => {
            // An empty surface is modeled as one element with no paths.
            let total = spec.base.n1 + spec.base.n2;
            let n1 = value as usize;
            let n2 = total - n1;
            drop_irs1 = n1 == 0;
            drop_irs2 = n2 == 0;
            cfg.set_elements(n1.max(1), n2.max(1));
        }
        ExperimentKind::TrainSweep => train = Some(TrainState::on_track(value, ts.speed, ts.dt, ts.lateral)),
        ExperimentKind::PilotSweep => {
            pilot_overhead = value;
            train = Some(TrainState::on_track(ts.position, ts.speed, ts.dt, ts.lateral));
        }
    }
    CellSetup { cfg, drop_irs1, drop_irs2, pilot_overhead, train }
}

struct CellOutcome {
    objective: f64,
    leakage: f64,
    beta: f64,
    iterations: usize,
    latency: Vec<f64>,
    initial: f64,
    first: f64,
}

fn run_cell(spec: &ExperimentSpec, grid_index: usize, seed_index: usize) -> Result<CellOutcome> {
    let setup = apply_grid(spec, spec.grid[grid_index]);
    let cfg = &setup.cfg;
    let ch_seed = channel_seed(spec.master_seed, seed_index);
    let v = spec.variant;
    let drop1 = setup.drop_irs1 || v == Variant::NoIrs1;
    let drop2 = setup.drop_irs2 || v == Variant::NoIrs2;
    let opts = cell_options(cfg, v, spec.master_seed, grid_index, seed_index, drop1, drop2);

    if let Some(train) = setup.train {
        if drop1 || drop2 {
            return Err(Error::Validation("Doppler sweeps need both surfaces".into()));
        }
        let slot = doppler_slot(cfg, &train, ch_seed, &opts, setup.pilot_overhead, &spec.train.coherence)?;
        let m = &slot.mitigation;
        let objective = if v == Variant::NoDopplerMitigation { m.baseline } else { m.objective };
        return Ok(CellOutcome {
            objective,
            leakage: slot.leakage,
            beta: slot.beta,
            iterations: slot.iterations,
            latency: Vec::new(),
            initial: f64::NAN,
            first: slot.clean_objective,
        });
    }

    let mut ch = build_channel_set(cfg, None, ch_seed)?;
    if drop1 {
        ch.zero_irs1();
    }
    if drop2 {
        ch.zero_irs2();
    }
    let sol = bcd_solve(cfg, &ch, &opts)?;
    let first = sol.outer_objectives.get(1).copied().unwrap_or(sol.initial_objective());
    Ok(CellOutcome {
        objective: sol.objective(),
        leakage: sol.report.leakage,
        beta: sol.downlink.beta,
        iterations: sol.outer_iterations,
        latency: sol.report.latency.clone(),
        initial: sol.initial_objective(),
        first,
    })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-grid-point means and standard errors over successful rows.
pub fn summarize(rows: &[ResultRow], grid: &[f64]) -> Vec<GridSummary> {
    grid.iter()
        .enumerate()
        .map(|(gi, &g)| {
            let cell: Vec<&ResultRow> = rows.iter().filter(|r| r.grid_index == gi).collect();
            let ok: Vec<&&ResultRow> = cell.iter().filter(|r| r.ok()).collect();
            let obj: Vec<f64> = ok.iter().map(|r| r.objective).collect();
            let leak: Vec<f64> = ok.iter().map(|r| r.leakage).collect();
            let (mean_objective, se_objective) = mean_se(&obj);
            let (mean_leakage, se_leakage) = mean_se(&leak);
            GridSummary {
                grid_value: g,
                count: ok.len(),
                failures: cell.len() - ok.len(),
                mean_objective,
                se_objective,
                mean_leakage,
                se_leakage,
            }
        })
        .collect()
}

/// Runs every (grid point, seed) cell, in parallel when allowed. Cells that
/// fail become error rows; more than 10% failures fails the experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> =
        (0..spec.grid.len()).flat_map(|g| (0..spec.realizations).map(move |s| (g, s))).collect();
    let work = || -> Vec<ResultRow> {
        cells
            .par_iter()
            .map(|&(gi, si)| {
                let start = Instant::now();
                let out = run_cell(spec, gi, si);
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                let mut row = ResultRow {
                    experiment: spec.kind,
                    variant: spec.variant,
                    grid_index: gi,
                    grid_value: spec.grid[gi],
                    seed: si as u64,
                    objective: f64::NAN,
                    leakage: f64::NAN,
                    beta: f64::NAN,
                    iterations: 0,
                    wall_ms,
                    latency: vec![f64::NAN; spec.base.num_iotds],
                    initial_objective: f64::NAN,
                    first_iteration_objective: f64::NAN,
                    error: None,
                };
                match out {
                    Ok(c) => {
                        row.objective = c.objective;
                        row.leakage = c.leakage;
                        row.beta = c.beta;
                        row.iterations = c.iterations;
                        if !c.latency.is_empty() {
                            row.latency = c.latency;
                        }
                        row.initial_objective = c.initial;
                        row.first_iteration_objective = c.first;
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
                row
            })
            .collect()
    };
    let rows = if spec.parallelism == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.parallelism)
            .build()
            .map_err(|e| Error::Validation(format!("cannot start {} workers: {e}", spec.parallelism)))?
            .install(work)
    };
    let failures = rows.iter().filter(|r| !r.ok()).count();
    if failures * 10 > rows.len() {
        let first = rows.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::Infeasible(format!(
            "{failures} of {} cells failed in {} / {}; first: {first}",
            rows.len(),
            spec.kind,
            spec.variant
        )));
    }
    let summary = summarize(&rows, &spec.grid);
    Ok(ResultTable { rows, summary, num_iotds: spec.base.num_iotds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub grid_value: f64,
    pub variant: Variant,
    pub mean_objective: f64,
    /// Mean over paired seeds of `variant − reference`.
    pub mean_gap: f64,
    pub paired: usize,
}

impl ComparisonRow {
    /// -1 when the variant is better than the reference, 1 when worse.
    pub fn sign(&self) -> i8 {
        if self.mean_gap < 0.0 {
            -1
        } else if self.mean_gap > 0.0 {
            1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub tables: Vec<ResultTable>,
    pub rows: Vec<ComparisonRow>,
}

/// Runs each variant on the same seeds; gaps are taken against the first
/// variant seed by seed.
pub fn compare_benchmarks(base: &ExperimentSpec, variants: &[Variant]) -> Result<Comparison> {
    if variants.is_empty() {
        return Err(Error::Validation("no variants to compare".into()));
    }
    let mut tables = Vec::with_capacity(variants.len());
    for &v in variants {
        let spec = ExperimentSpec { variant: v, ..base.clone() };
        tables.push(run_experiment(&spec).map_err(|e| e.context(format!("variant {v}")))?);
    }
    let reference = &tables[0];
    let mut rows = Vec::new();
    for (gi, &g) in base.grid.iter().enumerate() {
        for (t, &v) in tables.iter().zip(variants) {
            let mut gaps = Vec::new();
            for (a, b) in t.rows.iter().zip(&reference.rows) {
                debug_assert_eq!((a.grid_index, a.seed), (b.grid_index, b.seed));
                if a.grid_index == gi && a.ok() && b.ok() {
                    gaps.push(a.objective - b.objective);
                }
            }
            rows.push(ComparisonRow {
                grid_value: g,
                variant: v,
                mean_objective: t.summary[gi].mean_objective,
                mean_gap: mean_se(&gaps).0,
                paired: gaps.len(),
            });
        }
    }
    Ok(Comparison { tables, rows })
}

/// Column names of the CSV written by `emit_csv`.
pub fn csv_header(num_iotds: usize) -> Vec<String> {
    let mut h: Vec<String> =
        ["experiment", "variant", "grid_value", "seed", "objective_s", "leakage", "beta", "iterations", "wall_ms"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    h.extend((1..=num_iotds).map(|l| format!("D_{l}")));
    h.push("error".into());
    h
}

/// Writes rows ordered by grid point then seed. Floats use the shortest
/// representation that round-trips.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(csv_header(table.num_iotds)).map_err(csv_err)?;
    let mut rows: Vec<&ResultRow> = table.rows.iter().collect();
    rows.sort_by_key(|r| (r.grid_index, r.seed));
    for r in rows {
        let mut rec = vec![
            r.experiment.name().to_string(),
            r.variant.name().to_string(),
            r.grid_value.to_string(),
            r.seed.to_string(),
            r.objective.to_string(),
            r.leakage.to_string(),
            r.beta.to_string(),
            r.iterations.to_string(),
            r.wall_ms.to_string(),
        ];
        rec.extend(r.latency.iter().map(|d| d.to_string()));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use dual_irs::harness::{
    compare_benchmarks, default_grid, emit_csv, run_experiment, ExperimentKind, ExperimentSpec, ResultTable, Variant,
};
use dual_irs::scenario::SystemConfig;
use dual_irs::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Kind {
    Solve,
    SweepPower,
    SweepElements,
    SweepAllocation,
    LeakageSweep,
    TrainSweep,
    PilotSweep,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Solve => ExperimentKind::Solve,
            Kind::SweepPower => ExperimentKind::SweepPower,
            Kind::SweepElements => ExperimentKind::SweepElements,
            Kind::SweepAllocation => ExperimentKind::SweepAllocation,
            Kind::LeakageSweep => ExperimentKind::LeakageSweep,
            Kind::TrainSweep => ExperimentKind::TrainSweep,
            Kind::PilotSweep => ExperimentKind::PilotSweep,
        }
    }
}

/// Latency-minimizing allocation for double-IRS wireless-powered IoT
/// uplinks on a high-speed train.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// TOML system configuration; defaults to the built-in Table I values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Variant name. A comma-separated list runs a paired comparison
    /// against the first entry.
    #[arg(long, default_value = "optimized", value_delimiter = ',')]
    variant: Vec<String>,
    /// Swept values, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Channel realizations per grid point.
    #[arg(long, default_value_t = 100)]
    realizations: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Train speed for the Doppler sweeps (m/s).
    #[arg(long)]
    speed: Option<f64>,
    /// Pilot symbols per coherence interval for the Doppler sweeps.
    #[arg(long)]
    pilot_overhead: Option<f64>,
}

fn is_config_error(e: &Error) -> bool {
    matches!(e.root(), Error::Config { .. } | Error::Validation(_))
}

fn print_summary(table: &ResultTable, variant: Variant) {
    eprintln!("{:<24} {:>12} {:>14} {:>12} {:>14} {:>6}", "variant", "grid", "objective_s", "se", "leakage", "fail");
    for s in &table.summary {
        eprintln!(
            "{:<24} {:>12} {:>14.6e} {:>12.3e} {:>14.6e} {:>6}",
            variant.name(),
            s.grid_value,
            s.mean_objective,
            s.se_objective,
            s.mean_leakage,
            s.failures
        );
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let base = match &cli.config {
        Some(p) => SystemConfig::load(p)?,
        None => SystemConfig::table_one(),
    };
    let variants = cli.variant.iter().map(|v| v.parse::<Variant>()).collect::<Result<Vec<_>, _>>()?;
    let kind = ExperimentKind::from(cli.kind);
    let mut spec = ExperimentSpec::new(kind, variants[0], base);
    spec.grid = cli.grid.unwrap_or_else(|| default_grid(kind, &spec.base));
    spec.realizations = cli.realizations;
    spec.master_seed = cli.seed;
    spec.parallelism = cli.parallelism;
    if let Some(v) = cli.speed {
        spec.train.speed = v;
    }
    if let Some(po) = cli.pilot_overhead {
        spec.train.pilot_overhead = po;
    }
    spec.validate()?;

    let table = if variants.len() == 1 {
        let t = run_experiment(&spec)?;
        print_summary(&t, variants[0]);
        t
    } else {
        let c = compare_benchmarks(&spec, &variants)?;
        for (t, &v) in c.tables.iter().zip(&variants) {
            print_summary(t, v);
        }
        eprintln!("{:<24} {:>12} {:>14} {:>8}", "variant", "grid", "gap_s", "paired");
        for r in &c.rows {
            eprintln!("{:<24} {:>12} {:>14.6e} {:>8}", r.variant.name(), r.grid_value, r.mean_gap, r.paired);
        }
        let num_iotds = c.tables[0].num_iotds;
        ResultTable {
            rows: c.tables.iter().flat_map(|t| t.rows.iter().cloned()).collect(),
            summary: Vec::new(),
            num_iotds,
        }
    };
    if let Some(out) = &cli.out {
        if variants.len() == 1 {
            emit_csv(&table, out)?;
        } else {
            // Keep each variant's block contiguous and internally ordered.
            let dir = out.parent().map(PathBuf::from).unwrap_or_default();
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
            for v in &variants {
                let rows = table.rows.iter().filter(|r| r.variant == *v).cloned().collect();
                let t = ResultTable { rows, summary: Vec::new(), num_iotds: table.num_iotds };
                emit_csv(&t, &dir.join(format!("{stem}_{}.csv", v.name())))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

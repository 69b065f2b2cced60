use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cubic_core::dynamics::{simulate_observed, step_map, Simulation, StepFn, Summary};
use cubic_core::montecarlo::{run_paths, BatchSpec};
use cubic_core::verify::{corrupted_step_map, verify_bounds, verify_lemmas, verify_sums, SuiteReport};
use cubic_core::{EnsembleStats, LimitClass, PerturbationSpec, Schedule, StoppingRule};

use crate::config::{noise_name, rule_name, ExperimentConfig, DEFAULT_SEED};
use crate::csvio::{fmt_f64, Thinning, TrajectoryWriter};
use crate::figures::figure_runs;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "cubic",
    version,
    about = "Simulate and check the cubic recurrence with decreasing timesteps"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct Common {
    /// Root seed; overrides the experiment file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Index of the last state; overrides the experiment file or figure default.
    #[arg(long, global = true)]
    pub horizon: Option<u64>,
    /// Output directory; overrides the experiment file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Index power-law schedules from n = 1 with h_n = n^-p.
    #[arg(long, global = true)]
    pub paper_exact_indexing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one trajectory CSV per initial value and path.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the trajectory CSVs of a figure bundle.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
        /// summable or nonsummable (1), unstopped or stopped (2), beta1.5, beta3 or beta5 (3).
        #[arg(long)]
        variant: Option<String>,
    },
    /// Run a seeded property suite; exits 1 on the first failing check.
    Verify {
        suite: Suite,
        /// Run the lemma suite against a step map with the cubic term's sign flipped.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Run an ensemble per initial value and write per-path summaries.
    Mc {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Bounds,
    Lemmas,
    Sums,
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate { config } => simulate(&load(config, c)?, stdout),
        Command::Figure { which, variant } => {
            let seed = c.seed.unwrap_or(DEFAULT_SEED);
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            figure(*which, variant.as_deref(), seed, c.horizon, &out, stdout)
        }
        Command::Verify { suite, inject_fault } => {
            verify(*suite, c.seed.unwrap_or(DEFAULT_SEED), *inject_fault, stdout)
        }
        Command::Mc { config } => mc(&load(config, c)?, stdout),
    }
}

fn load(path: &Path, common: &Common) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(h) = common.horizon {
        cfg.horizon = h;
    }
    if let Some(o) = &common.out {
        cfg.output = o.clone();
    }
    cfg.paper_exact_indexing |= common.paper_exact_indexing;
    Ok(cfg)
}

/// One run to be written as a CSV file.
struct Job<'a> {
    path: PathBuf,
    x0: f64,
    schedule: &'a Schedule,
    pert: &'a PerturbationSpec,
    rule: StoppingRule,
    horizon: u64,
    trajectory_index: u64,
    thinning: Thinning,
}

fn write_csv(job: &Job<'_>) -> Result<Summary, CliError> {
    let sim = Simulation::new(job.x0, job.schedule, job.pert, job.rule, job.horizon)
        .trajectory(job.trajectory_index);
    // fail on a bad run before creating the file
    sim.stepper()?;
    let file = BufWriter::new(File::create(&job.path)?);
    let mut writer = TrajectoryWriter::new(file, job.schedule.origin(), job.x0, job.thinning)?;
    let mut io_err = None;
    let summary = simulate_observed(&sim, job.horizon / 2, |step| {
        if io_err.is_none() {
            io_err = writer.push(step).err();
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let mut footer = vec![
        format!("provenance schedule={}", job.schedule),
        format!("provenance envelope={} noise={}", job.pert.envelope(), noise_name(job.pert.noise())),
        format!("provenance rule={}", rule_name(job.rule)),
        format!("provenance seed={} trajectory={}", job.pert.seed(), job.trajectory_index),
        format!("provenance x0={} horizon={}", fmt_f64(job.x0), job.horizon),
    ];
    if job.thinning != Thinning::All {
        footer.push(format!("provenance thinning={}", job.thinning.describe()));
    }
    if let Some(n) = summary.freeze_index {
        footer.push(format!("freeze_index={n}"));
    }
    footer.push(format!("classification={}", summary.classification.label()));
    if let Some(n) = summary.diverged_at {
        footer.push(format!("diverged_at={n}"));
    }
    writer.finish(&footer)?.flush()?;
    Ok(summary)
}

fn report_line(out: &mut dyn Write, path: &Path, s: &Summary) -> Result<(), CliError> {
    let name = path.file_name().unwrap_or_default().to_string_lossy();
    let limit = match s.classification {
        LimitClass::ConvergedNonzero(l) => format!(" limit={}", fmt_f64(l)),
        _ => String::new(),
    };
    writeln!(out, "{name}: {} x_{}={}{limit}", s.classification.label(), s.last_index, fmt_f64(s.terminal))?;
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let schedule = cfg.schedule()?;
    let pert = cfg.perturbation()?;
    fs::create_dir_all(&cfg.output)?;
    for (i, &x0) in cfg.x0.iter().enumerate() {
        for j in 0..cfg.paths {
            let job = Job {
                path: cfg.output.join(format!("traj_x{i}_p{j}.csv")),
                x0,
                schedule: &schedule,
                pert: &pert,
                rule: cfg.rule,
                horizon: cfg.horizon,
                trajectory_index: j,
                thinning: Thinning::All,
            };
            let s = write_csv(&job)?;
            report_line(out, &job.path, &s)?;
        }
    }
    Ok(())
}

pub fn figure(
    which: u8,
    variant: Option<&str>,
    seed: u64,
    horizon: Option<u64>,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let runs = figure_runs(which, variant, seed, horizon)?;
    fs::create_dir_all(dir)?;
    for r in &runs {
        let job = Job {
            path: dir.join(format!("{}.csv", r.file_stem)),
            x0: r.x0,
            schedule: &r.schedule,
            pert: &r.pert,
            rule: r.rule,
            horizon: r.horizon,
            trajectory_index: r.trajectory_index,
            thinning: r.thinning,
        };
        let s = write_csv(&job)?;
        report_line(out, &job.path, &s)?;
    }
    Ok(())
}

pub fn verify(suite: Suite, seed: u64, inject_fault: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let step: StepFn = if inject_fault { corrupted_step_map } else { step_map };
    let report: SuiteReport = match suite {
        Suite::Bounds => verify_bounds(seed),
        Suite::Lemmas => verify_lemmas(seed, step),
        Suite::Sums => verify_sums(),
    };
    writeln!(out, "{report}")?;
    match report.first_failure {
        None => Ok(()),
        Some(first) => Err(CliError::Verify(format!("{}: {first}", report.name))),
    }
}

fn opt(v: Option<u64>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

fn mc(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let schedule = cfg.schedule()?;
    let pert = cfg.perturbation()?;
    fs::create_dir_all(&cfg.output)?;
    for (i, &x0) in cfg.x0.iter().enumerate() {
        let spec =
            BatchSpec::new(x0, schedule.clone(), pert.clone(), cfg.rule, cfg.horizon, cfg.paths, cfg.seed);
        let paths = run_paths(&spec)?;
        let path = cfg.output.join(format!("mc_x{i}.csv"));
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
        w.write_record(["path", "terminal", "classification", "freeze_index", "diverged_at", "tail_sup"])?;
        for (j, p) in paths.iter().enumerate() {
            w.write_record([
                j.to_string(),
                fmt_f64(p.terminal),
                p.classification.label().to_string(),
                opt(p.freeze_index),
                opt(p.diverged_at),
                fmt_f64(p.tail_sup),
            ])?;
        }
        w.flush()?;
        let stats = EnsembleStats::from_paths(&paths);
        let q = stats.terminal_abs_quantiles;
        writeln!(
            out,
            "x0={}: {} paths, converged_zero={} converged_nonzero={} diverged={}; |x_{}| q50={} q90={} q99={} max={}",
            fmt_f64(x0),
            stats.paths,
            stats.fraction_converged_zero,
            stats.fraction_converged_nonzero,
            stats.fraction_diverged,
            cfg.horizon,
            fmt_f64(q.q50),
            fmt_f64(q.q90),
            fmt_f64(q.q99),
            fmt_f64(q.max),
        )?;
    }
    Ok(())
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

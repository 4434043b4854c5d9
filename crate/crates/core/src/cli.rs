//! `angrig` command-line front end.
//!
//! Exit codes: 0 success (rigid, converged), 1 error, 2 negative outcome
//! (flexible, not converged, frame deviation over tolerance), 3 simulation
//! halted by an event, 4 numerical blow-up.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::construction::build;
use crate::dependency::{detect_dependent_structures, DetectOptions};
use crate::error::{Error, Result};
use crate::io::{
    read_json, write_json, write_trajectory_csv, AngularityFile, BuildDto, FindingDto, PlanFile,
    ReportDto, Sidecar, SimulationFile, TrajectoryJson,
};
use crate::rigidity::{classify_with, ClassifyOptions, RankTolerance};
use crate::sim::{local_frame_experiment, simulate, SimConfig, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_EVENT: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;

/// Default bound on the frame-experiment position deviation.
pub const FRAME_DEVIATION_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "angrig",
    version,
    about = "Planar angle rigidity analysis and angle-only formation control"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify an angularity by the rank of its rigidity matrix.
    Check(CommonArgs),
    /// List cycles, fans and overconstrained subsets of an angle set.
    Deps(CommonArgs),
    /// Realize a construction plan and classify the result.
    Construct(CommonArgs),
    /// Simulate a formation and write its trajectory.
    Simulate(CommonArgs),
    /// Compare a global-frame run against one in random local frames.
    Frames(CommonArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Rank threshold (check, deps, construct), convergence bound
    /// (simulate) or deviation bound (frames).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CommonArgs {
    fn json_only(&self) -> Result<()> {
        match self.format {
            Some(Format::Csv) => Err(Error::InvalidConfig(
                "csv output is only available for simulate".into(),
            )),
            _ => Ok(()),
        }
    }

    fn classify_options(&self) -> Result<ClassifyOptions> {
        let mut opts = ClassifyOptions::default();
        if let Some(t) = self.tol {
            if !(t >= 0.0) {
                return Err(Error::InvalidConfig("--tol must be non-negative".into()));
            }
            opts.rank_tolerance = RankTolerance::Absolute(t);
        }
        Ok(opts)
    }

    fn sim_config(&self, file: &SimulationFile) -> Result<SimConfig> {
        let mut cfg = file.config.to_config()?;
        if let Some(h) = self.step {
            cfg.step_size = h;
        }
        if let Some(d) = self.duration {
            cfg.duration = d;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_ERROR;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match run(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::EventHalt(_) => EXIT_EVENT,
                Error::NumericalBlowup { .. } => EXIT_BLOWUP,
                _ => EXIT_ERROR,
            }
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Check(a) => run_check(a, out),
        Command::Deps(a) => run_deps(a, out),
        Command::Construct(a) => run_construct(a, out),
        Command::Simulate(a) => run_simulate(a, out),
        Command::Frames(a) => run_frames(a, out),
    }
}

/// Machine output goes to `--output` when given, otherwise to stdout.
fn emit<T: Serialize>(args: &CommonArgs, out: &mut dyn Write, value: &T) -> Result<()> {
    match &args.output {
        Some(p) => write_json(p, value),
        None => {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

fn summary(args: &CommonArgs, out: &mut dyn Write, line: &str) -> Result<()> {
    if args.output.is_some() {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn run_check(args: &CommonArgs, out: &mut dyn Write) -> Result<i32> {
    args.json_only()?;
    let a = read_json::<AngularityFile>(&args.input)?.to_angularity()?;
    let report = classify_with(&a, &args.classify_options()?)?;
    emit(args, out, &ReportDto::from(&report))?;
    summary(
        args,
        out,
        &format!(
            "rank {} of {}: {}",
            report.rank,
            report.max_rank,
            if report.infinitesimally_rigid {
                "infinitesimally rigid"
            } else {
                "flexible"
            }
        ),
    )?;
    Ok(if report.infinitesimally_rigid {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

#[derive(Serialize)]
struct DepsOutput {
    findings: Vec<FindingDto>,
    subset_search_complete: bool,
}

pub fn run_deps(args: &CommonArgs, out: &mut dyn Write) -> Result<i32> {
    args.json_only()?;
    let a = read_json::<AngularityFile>(&args.input)?.to_angularity()?;
    let values: Vec<f64> = match a
        .angles()
        .iter()
        .map(|t| t.target)
        .collect::<Option<Vec<_>>>()
    {
        Some(v) => v,
        None => a.angle_function()?.into_inner(),
    };
    let (findings, complete) = match detect_dependent_structures(
        a.angles(),
        a.vertex_count(),
        Some(&values),
        &DetectOptions::default(),
    ) {
        Ok(f) => (f, true),
        Err(Error::SubsetSearchBudgetExceeded { partial, .. }) => (partial, false),
        Err(e) => return Err(e),
    };
    let dto = DepsOutput {
        findings: findings.iter().map(FindingDto::from).collect(),
        subset_search_complete: complete,
    };
    emit(args, out, &dto)?;
    summary(
        args,
        out,
        &format!("{} dependency findings", dto.findings.len()),
    )?;
    Ok(EXIT_OK)
}

pub fn run_construct(args: &CommonArgs, out: &mut dyn Write) -> Result<i32> {
    args.json_only()?;
    let plan = read_json::<PlanFile>(&args.input)?.to_plan()?;
    let mut outcome = build(&plan)?;
    if args.tol.is_some() {
        outcome.report = classify_with(&outcome.angularity, &args.classify_options()?)?;
    }
    emit(args, out, &BuildDto::from(&outcome))?;
    summary(
        args,
        out,
        &format!(
            "{} vertices, {} angles, rank {}; certificate {}",
            outcome.angularity.vertex_count(),
            outcome.angularity.angle_count(),
            outcome.report.rank,
            outcome.globally_rigid_certificate
        ),
    )?;
    Ok(EXIT_OK)
}

fn write_trajectory(path: &Path, format: Format, traj: &Trajectory, cfg: &SimConfig) -> Result<()> {
    let sidecar = Sidecar::new(traj, cfg);
    match format {
        Format::Csv => {
            write_trajectory_csv(BufWriter::new(File::create(path)?), traj)?;
            write_json(&path.with_extension("json"), &sidecar)
        }
        Format::Json => write_json(
            path,
            &TrajectoryJson {
                times: &traj.times,
                positions: traj
                    .positions
                    .iter()
                    .map(|x| x.iter().map(|p| [p.x, p.y]).collect())
                    .collect(),
                angle_errors: &traj.angle_errors,
                sidecar,
            },
        ),
    }
}

pub fn run_simulate(args: &CommonArgs, out: &mut dyn Write) -> Result<i32> {
    let path = args
        .output
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("simulate needs --output".into()))?;
    let format = args.format.unwrap_or(Format::Csv);
    if format == Format::Csv && path.extension().is_some_and(|e| e == "json") {
        return Err(Error::InvalidConfig(
            "csv output path would collide with its json sidecar".into(),
        ));
    }
    let file: SimulationFile = read_json(&args.input)?;
    let spec = file.spec.to_spec()?;
    let mut cfg = args.sim_config(&file)?;
    if let Some(t) = args.tol {
        cfg.convergence_tol = t;
        cfg.validate()?;
    }
    match simulate(&spec, &file.initial(), &cfg) {
        Ok(traj) => {
            write_trajectory(path, format, &traj, &cfg)?;
            writeln!(
                out,
                "simulated {} s, max final |e| = {:e}, converged {}",
                traj.horizon(),
                traj.final_errors()
                    .iter()
                    .fold(0.0f64, |m, e| m.max(e.abs())),
                traj.converged
            )?;
            Ok(if traj.converged && traj.events.is_empty() {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            })
        }
        Err(Error::EventHalt(traj)) => {
            write_trajectory(path, format, &traj, &cfg)?;
            for e in &traj.events {
                let agents: Vec<String> = e.agents.iter().map(|a| (a + 1).to_string()).collect();
                writeln!(
                    out,
                    "event at t = {}: {:?} (agents {})",
                    e.t,
                    e.kind,
                    agents.join(",")
                )?;
            }
            Ok(EXIT_EVENT)
        }
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct FramesOutput {
    max_deviation: f64,
    tolerance: f64,
    frame_angles_deg: Vec<f64>,
    global_converged: bool,
    local_converged: bool,
}

pub fn run_frames(args: &CommonArgs, out: &mut dyn Write) -> Result<i32> {
    args.json_only()?;
    let file: SimulationFile = read_json(&args.input)?;
    let spec = file.spec.to_spec()?;
    let cfg = args.sim_config(&file)?;
    let tol = args.tol.unwrap_or(FRAME_DEVIATION_TOL);
    let (global, local, deviation) =
        local_frame_experiment(&spec, &file.initial(), &cfg, cfg.seed)?;
    writeln!(out, "max deviation: {deviation:e}")?;
    if args.output.is_some() {
        emit(
            args,
            out,
            &FramesOutput {
                max_deviation: deviation,
                tolerance: tol,
                frame_angles_deg: local.frame_angles.iter().map(|a| a.to_degrees()).collect(),
                global_converged: global.converged,
                local_converged: local.converged,
            },
        )?;
    }
    Ok(if deviation <= tol {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

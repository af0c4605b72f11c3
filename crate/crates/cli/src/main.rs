//! `incompat`: command-line front end.
//!
//! Exit status: 0 success, 1 a verified check failed, 2 input or schema
//! error, 3 solver or resource failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use incompat::construction::{build_optimal_task, verify_achievability, AchievabilityOptions};
use incompat::discrimination::{
    bound_report_with_certs, default_parent_sizes, psg_best_lo, psg_best_lo_n, psg_best_locc1, psg_compatible_seesaw,
    psg_fixed, BoundOptions, DiscriminationTask, SeesawOptions,
};
use incompat::incompatibility::{compute_roi_with, tensor_roi_with, RoiOptions, DEFAULT_COMPAT_TOL};
use incompat::io;
use incompat::measurements::MeasurementSet;
use incompat::oracle::simulate_game;
use incompat::Error;

const TENSOR_TOL: f64 = 1e-5;
const SIGMA_BOUND: f64 = 4.0;

#[derive(Parser)]
#[command(
    name = "incompat",
    version,
    about = "Measurement incompatibility certificates and discrimination bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Robustness of incompatibility with a primal/dual certificate (roi_cert.v1)
    Roi(Opts),
    /// Decide joint measurability (roi <= 1e-6)
    CompatCheck(Opts),
    /// Compare the ROI of a product set with the product of (1 + ROI)
    TensorRoi(Opts),
    /// Optimal guessing probability with the given sets
    Psg(Opts),
    /// See-saw lower bound on the compatible baseline
    Seesaw(Opts),
    /// Bound report for a task and one set per party (bound_report.v1)
    BoundCheck(Opts),
    /// Build the bound-saturating task; writes task.v1 to -o and bundle_meta.v1 beside it
    Construct(Opts),
    /// Build the bound-saturating task and verify every equality on it
    VerifyAchievability(Opts),
    /// Monte Carlo play of the optimal strategy for --mode
    Simulate(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Lo,
    Locc1,
}

impl ModeArg {
    fn name(self) -> &'static str {
        match self {
            ModeArg::Lo => "lo",
            ModeArg::Locc1 => "locc1",
        }
    }
}

#[derive(Args, Clone)]
struct Opts {
    /// Measurement set (measurement_set.v1); repeat once per party
    #[arg(short, long = "input")]
    input: Vec<PathBuf>,
    /// Discrimination task (task.v1)
    #[arg(long)]
    task: Option<PathBuf>,
    /// Report file; canonical JSON
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Solver tolerance
    #[arg(long, default_value = "1e-8")]
    tol: f64,
    /// Seed for every random draw
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random see-saw starts
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Expected number of parties; checked against the inputs
    #[arg(long)]
    parties: Option<usize>,
    /// Monte Carlo trials
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Strategy class: local operations, or one round of communication from the first party
    #[arg(long, value_enum, default_value_t = ModeArg::Lo)]
    mode: ModeArg,
}

enum Failure {
    Input(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionMismatch { .. }
            | Error::NotHermitian { .. }
            | Error::Invalid(_)
            | Error::Shape(_)
            | Error::Schema { .. }
            | Error::Io(_) => Failure::Input(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

type Run = Result<bool, Failure>;

struct Context<'a> {
    command: &'static str,
    opts: &'a Opts,
}

impl Context<'_> {
    fn generator(&self) -> Value {
        let o = self.opts;
        json!({
            "name": "incompat",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": {
                "inputs": o.input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "task": o.task.as_ref().map(|p| p.display().to_string()),
                "tol": o.tol,
                "seed": o.seed,
                "restarts": o.restarts,
                "parties": o.parties,
                "trials": o.trials,
                "mode": o.mode.name(),
                "parallel": cfg!(feature = "parallel"),
            },
        })
    }

    fn roi_options(&self) -> RoiOptions {
        RoiOptions {
            solver_tol: self.opts.tol,
            ..RoiOptions::default()
        }
    }

    fn sets(&self, expected: Option<usize>) -> Result<Vec<MeasurementSet>, Failure> {
        let n = self.opts.input.len();
        if let Some(e) = expected {
            if n != e {
                return Err(Failure::Input(format!(
                    "{} expects {e} --input file(s), got {n}",
                    self.command
                )));
            }
        } else if n == 0 {
            return Err(Failure::Input(format!(
                "{} needs at least one --input file",
                self.command
            )));
        }
        if let Some(p) = self.opts.parties {
            if p != n {
                return Err(Failure::Input(format!("--parties {p} but {n} input set(s)")));
            }
        }
        self.opts
            .input
            .iter()
            .map(|p| io::load(p).map_err(|e| located(p, e)))
            .collect()
    }

    fn task(&self) -> Result<DiscriminationTask, Failure> {
        let path = self
            .opts
            .task
            .as_ref()
            .ok_or_else(|| Failure::Input(format!("{} needs --task", self.command)))?;
        let task: DiscriminationTask = io::load(path).map_err(|e| located(path, e))?;
        if let Some(p) = self.opts.parties {
            if p != task.num_parties() {
                return Err(Failure::Input(format!(
                    "--parties {p} but the task has {}",
                    task.num_parties()
                )));
            }
        }
        Ok(task)
    }

    fn emit_document<T: io::Document>(&self, doc: &T) -> Result<(), Failure> {
        if let Some(path) = &self.opts.output {
            io::save(path, doc, Some(&self.generator()))?;
        }
        Ok(())
    }

    fn emit_report(&self, schema: &str, body: Value) -> Result<(), Failure> {
        if let Some(path) = &self.opts.output {
            let value = io::envelope(schema, body, Some(&self.generator()))?;
            std::fs::write(path, io::canonical_string(&value)).map_err(Error::from)?;
        }
        Ok(())
    }
}

fn located(path: &Path, e: Error) -> Failure {
    match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn check_tasks_sets(task: &DiscriminationTask, sets: &[MeasurementSet]) -> Result<(), Failure> {
    if task.num_parties() != sets.len() {
        return Err(Failure::Input(format!(
            "task has {} parties but {} set(s) were given",
            task.num_parties(),
            sets.len()
        )));
    }
    Ok(())
}

fn roi(cx: &Context) -> Run {
    let sets = cx.sets(Some(1))?;
    let cert = compute_roi_with(&sets[0], &cx.roi_options())?;
    let ok = cert.check_invariants(&sets[0], &cx.roi_options().tolerances).is_ok();
    println!(
        "roi {:.10}  primal {:.10}  dual {:.10}  gap {:.3e}",
        cert.roi, cert.primal_value, cert.dual_value, cert.gap
    );
    println!("certificate invariants: {}", if ok { "ok" } else { "FAILED" });
    cx.emit_document(&cert)?;
    Ok(ok)
}

fn compat_check(cx: &Context) -> Run {
    let sets = cx.sets(Some(1))?;
    let cert = compute_roi_with(&sets[0], &cx.roi_options())?;
    let compatible = cert.roi <= DEFAULT_COMPAT_TOL;
    println!(
        "roi {:.10}  {}",
        cert.roi,
        if compatible { "compatible" } else { "incompatible" }
    );
    cx.emit_report(
        "compat_report.v1",
        json!({"roi": cert.roi, "gap": cert.gap, "threshold": DEFAULT_COMPAT_TOL, "compatible": compatible}),
    )?;
    Ok(true)
}

fn tensor(cx: &Context) -> Run {
    let sets = cx.sets(Some(2))?;
    let t = tensor_roi_with(&sets[0], &sets[1], &cx.roi_options())?;
    let pass = t.residual <= TENSOR_TOL;
    println!(
        "roi_a {:.10}  roi_b {:.10}  roi_ab {:.10}  residual {:.3e}  {}",
        t.roi_a,
        t.roi_b,
        t.roi_ab,
        t.residual,
        if pass { "ok" } else { "FAILED" }
    );
    let mut body = to_json(&t);
    body["tolerance"] = json!(TENSOR_TOL);
    body["pass"] = json!(pass);
    cx.emit_report("tensor_roi_report.v1", body)?;
    Ok(pass)
}

fn psg(cx: &Context) -> Run {
    let task = cx.task()?;
    let sets = cx.sets(None)?;
    check_tasks_sets(&task, &sets)?;
    let (value, strategy) = match (cx.opts.mode, sets.len()) {
        (ModeArg::Lo, 2) => {
            let (v, s) = psg_best_lo(&task, &sets[0], &sets[1])?;
            (v, to_json(&s))
        }
        (ModeArg::Locc1, 2) => {
            let (v, s) = psg_best_locc1(&task, &sets[0], &sets[1])?;
            (v, to_json(&s))
        }
        (ModeArg::Lo, _) => {
            let (v, s) = psg_best_lo_n(&task, &sets)?;
            (v, to_json(&s))
        }
        (ModeArg::Locc1, n) => return Err(Failure::Input(format!("locc1 needs two parties, got {n}"))),
    };
    println!("psg ({}) {:.12}", cx.opts.mode.name(), value);
    cx.emit_report(
        "psg_report.v1",
        json!({"mode": cx.opts.mode.name(), "value": value, "strategy": strategy}),
    )?;
    Ok(true)
}

fn seesaw_options(cx: &Context, a: &MeasurementSet, b: &MeasurementSet) -> Result<SeesawOptions, Failure> {
    let mut so = SeesawOptions::new(default_parent_sizes(a, b)?);
    so.restarts = cx.opts.restarts;
    so.seed = cx.opts.seed;
    so.solver_tol = cx.opts.tol;
    Ok(so)
}

fn seesaw(cx: &Context) -> Run {
    let task = cx.task()?;
    let sets = cx.sets(Some(2))?;
    check_tasks_sets(&task, &sets)?;
    let r = psg_compatible_seesaw(&task, &seesaw_options(cx, &sets[0], &sets[1])?, &[])?;
    println!(
        "see-saw lower bound {:.10} (best of {} starts)",
        r.value,
        r.starts.len()
    );
    cx.emit_report("seesaw_report.v1", to_json(&r))?;
    Ok(true)
}

fn bound_check(cx: &Context) -> Run {
    let task = cx.task()?;
    let sets = cx.sets(None)?;
    check_tasks_sets(&task, &sets)?;
    let opts = BoundOptions {
        roi: cx.roi_options(),
        seesaw_restarts: if sets.len() == 2 { cx.opts.restarts } else { 0 },
        seed: cx.opts.seed,
    };
    let certs = sets
        .iter()
        .map(|s| compute_roi_with(s, &opts.roi))
        .collect::<Result<Vec<_>, _>>()?;
    let r = bound_report_with_certs(&task, &sets, &certs, &opts)?;
    println!(
        "P_lo {:.10}  bound factor {:.10}  chain value {:.10}  ratio {:.10}  {}",
        r.p_i_lo,
        r.bound_factor,
        r.proof_chain_value,
        r.ratio,
        if r.pass { "ok" } else { "FAILED" }
    );
    cx.emit_document(&r)?;
    Ok(r.pass)
}

fn meta_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}.meta.json"))
}

fn construct(cx: &Context) -> Run {
    let sets = cx.sets(Some(2))?;
    let opts = cx.roi_options();
    let ca = compute_roi_with(&sets[0], &opts)?;
    let cb = compute_roi_with(&sets[1], &opts)?;
    let bundle = build_optimal_task(&ca, &cb)?;
    println!(
        "M* {:.10}  N* {:.10}  ensembles {}  states {}",
        bundle.m_star,
        bundle.n_star,
        bundle.task.num_ensembles(),
        (0..bundle.task.num_ensembles())
            .map(|y| bundle.task.num_states(y))
            .sum::<usize>()
    );
    if let Some(path) = &cx.opts.output {
        let g = cx.generator();
        io::save(path, &bundle.task, Some(&g))?;
        io::save(&meta_path(path), &bundle, Some(&g))?;
    }
    Ok(true)
}

fn achievability(cx: &Context) -> Run {
    let sets = cx.sets(Some(2))?;
    let opts = cx.roi_options();
    let ca = compute_roi_with(&sets[0], &opts)?;
    let cb = compute_roi_with(&sets[1], &opts)?;
    let bundle = build_optimal_task(&ca, &cb)?;
    let r = verify_achievability(
        &bundle,
        &sets[0],
        &sets[1],
        &ca,
        &cb,
        &AchievabilityOptions {
            restarts: cx.opts.restarts,
            seed: cx.opts.seed,
            ..AchievabilityOptions::default()
        },
    )?;
    println!(
        "bound factor {:.10}  best LO {:.10}  see-saw {:.10}  ratio {:.10}  {}",
        r.bound_factor,
        r.best_lo.value,
        r.seesaw.value,
        r.ratio.value,
        if r.pass { "ok" } else { "FAILED" }
    );
    cx.emit_report("achievability_report.v1", to_json(&r))?;
    Ok(r.pass)
}

fn simulate(cx: &Context) -> Run {
    let task = cx.task()?;
    let sets = cx.sets(Some(2))?;
    check_tasks_sets(&task, &sets)?;
    let (a, b) = (&sets[0], &sets[1]);
    let (_, strategy) = match cx.opts.mode {
        ModeArg::Lo => psg_best_lo(&task, a, b)?,
        ModeArg::Locc1 => psg_best_locc1(&task, a, b)?,
    };
    let exact = psg_fixed(&task, a, b, &strategy)?;
    let r = simulate_game(&task, a, b, &strategy, cx.opts.trials, cx.opts.seed)?;
    let pass = (r.empirical_rate - exact).abs() <= SIGMA_BOUND * r.std_error;
    println!(
        "empirical {:.6} ± {:.6}  exact {:.10}  {}",
        r.empirical_rate,
        r.std_error,
        exact,
        if pass { "ok" } else { "FAILED" }
    );
    cx.emit_report(
        "simulation_report.v1",
        json!({"mode": cx.opts.mode.name(), "exact": exact, "result": to_json(&r), "sigma_bound": SIGMA_BOUND, "pass": pass}),
    )?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, opts, run): (&'static str, &Opts, fn(&Context) -> Run) = match &cli.command {
        Command::Roi(o) => ("roi", o, roi),
        Command::CompatCheck(o) => ("compat-check", o, compat_check),
        Command::TensorRoi(o) => ("tensor-roi", o, tensor),
        Command::Psg(o) => ("psg", o, psg),
        Command::Seesaw(o) => ("seesaw", o, seesaw),
        Command::BoundCheck(o) => ("bound-check", o, bound_check),
        Command::Construct(o) => ("construct", o, construct),
        Command::VerifyAchievability(o) => ("verify-achievability", o, achievability),
        Command::Simulate(o) => ("simulate", o, simulate),
    };
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        eprintln!("error: --tol must be positive");
        return ExitCode::from(2);
    }
    match run(&Context { command: name, opts }) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

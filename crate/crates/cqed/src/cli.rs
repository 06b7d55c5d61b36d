//! The `cqed` command line.
//!
//! Every subcommand writes into a run directory (`--run-dir`, else
//! `$CQED_RUN_DIR`, else `./cqed-run`) laid out as
//! `config.json, records.jsonl, pulses/*.csv, maps/*.csv`. Exit codes:
//! 0 success, 1 partial failure or timeout, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use cqed_core::gates::named::by_name;
use cqed_core::model::{build_operators, SystemParams, POINT_X_TILDE};
use cqed_core::optimize::pipeline::{evaluate_pulse, run_pipeline, PipelineConfig, PipelineOutcome};
use cqed_core::propagate::{propagate_state_trajectory, Generator, Mode};
use cqed_core::pulse::{default_smoothing_window, phase_derivative, pulse_spectrum};
use cqed_core::spectrum::diagonalize_and_assign;
use cqed_core::units::{ns, to_mhz, to_ns};
use cqed_core::CMatrix;
use serde_json::json;

use crate::error::CliError;
use crate::exec::{available_workers, Parallel};
use crate::format::{fmt_f64, fmt_opt};
use crate::landscape::{
    check_durations, combined_rows, entanglement_map, export_combined, export_pe_polyhedron, export_qsl, export_records, export_weyl,
    field_free_map, parse_goal, qsl_sweep, slice_fixed_delta2, slice_fixed_deltac, weyl_scatter, write_field_free, FieldFreeTable,
    GridSpec, LandscapeConfig, PointStatus,
};
use crate::params::{apply_point, load_params, ParamsFile};
use crate::pulse_io::{read_pulse, write_atomic, write_iteration_log, write_pulse, write_table, write_trajectory};
use crate::store::RecordStore;

pub const RUN_DIR_ENV: &str = "CQED_RUN_DIR";

#[derive(Debug, Parser)]
#[command(name = "cqed", version, about = "Charting the two-transmon / shared-cavity design landscape with optimal control")]
pub struct Cli {
    /// Parameter file (JSON); the reference device when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Output directory [default: $CQED_RUN_DIR, else ./cqed-run].
    #[arg(long, global = true, value_name = "DIR")]
    pub run_dir: Option<PathBuf>,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Field-free maps (static interaction, entangling time, decay ratio, shifts) and two slices.
    Fieldfree(FieldFreeArgs),
    /// Three-stage optimization at one point followed by master-equation evaluation.
    Optimize(OptimizeArgs),
    /// Evaluate a pulse file: gate report, trajectories and pulse diagnostics.
    Evaluate(EvaluateArgs),
    /// Resumable optimization over a grid of landscape points.
    Landscape(LandscapeArgs),
    /// Gate error versus duration at one point, against the lifetime bound.
    Qsl(QslArgs),
}

#[derive(Debug, Args)]
pub struct FieldFreeArgs {
    /// Grid resolution `NxM` (Δ₂/α by Δc/g) over the reference window.
    #[arg(long, default_value = "121x121")]
    pub grid: String,
    /// Point the two slices pass through: `xtilde` or `D2A,DCG`.
    #[arg(long, default_value = "xtilde")]
    pub slice_point: String,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Pipeline configuration (JSON); missing keys take defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override the stage-3 iteration limit.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Stage-1 sampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// `pe`, `sq`, `gate:NAME` or `lgate:NAME`.
    #[arg(long)]
    pub goal: String,
    /// Optimize a named gate only up to single-qubit operations.
    #[arg(long)]
    pub up_to_local: bool,
    /// Gate duration, e.g. `50ns`.
    #[arg(long = "T", value_name = "DURATION", default_value = "50ns")]
    pub duration: String,
    /// Landscape point: `xtilde` or `D2A,DCG`; the parameter file as is when omitted.
    #[arg(long)]
    pub point: Option<String>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Wall-clock limit, e.g. `90s`, `30m`, `2h`.
    #[arg(long)]
    pub timeout: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Pulse CSV.
    #[arg(long, value_name = "FILE")]
    pub pulse: PathBuf,
    /// Target gate name, or `none`.
    #[arg(long, default_value = "none")]
    pub target: String,
    /// Landscape point: `xtilde` or `D2A,DCG`.
    #[arg(long)]
    pub point: Option<String>,
    /// Pipeline configuration (JSON) for the propagator settings.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Trajectory sampling: keep every n-th time step.
    #[arg(long, default_value_t = 10)]
    pub save_every: usize,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    /// Grid resolution `NxM` over the reference window.
    #[arg(long, default_value = "9x9")]
    pub grid: String,
    /// Comma-separated gate durations, e.g. `50ns,200ns`.
    #[arg(long = "T", value_name = "DURATIONS", default_value = "200ns")]
    pub durations: String,
    /// Comma-separated goals.
    #[arg(long, default_value = "pe,sq")]
    pub goals: String,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Record points with an ambiguous dressed-state assignment as skipped.
    #[arg(long)]
    pub skip_ambiguous: bool,
    /// Run failed jobs again.
    #[arg(long)]
    pub retry_failed: bool,
    /// Write plotting CSVs under maps/ after the run.
    #[arg(long)]
    pub export: bool,
    /// Wall-clock limit; unfinished jobs stay pending for the next run.
    #[arg(long)]
    pub timeout: Option<String>,
}

#[derive(Debug, Args)]
pub struct QslArgs {
    #[arg(long, default_value = "pe")]
    pub goal: String,
    #[arg(long)]
    pub up_to_local: bool,
    /// Comma-separated, strictly monotonic durations, e.g. `5ns,10ns,20ns`.
    #[arg(long = "T", value_name = "DURATIONS")]
    pub durations: String,
    #[arg(long)]
    pub point: Option<String>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

/// `50ns` → 50.0. The unit suffix is required.
pub fn parse_duration_ns(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let v = t.strip_suffix("ns").ok_or_else(|| format!("duration '{s}' needs an 'ns' suffix"))?;
    let x: f64 = v.trim().parse().map_err(|e| format!("duration '{s}': {e}"))?;
    if !(x.is_finite() && x > 0.0) {
        return Err(format!("duration '{s}' must be positive"));
    }
    Ok(x)
}

pub fn parse_durations_ns(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_duration_ns).collect()
}

/// Wall-clock limit: `s`, `m` or `h` suffix.
pub fn parse_timeout(s: &str) -> Result<Duration, String> {
    let t = s.trim();
    let (num, scale) = if let Some(v) = t.strip_suffix('h') {
        (v, 3600.0)
    } else if let Some(v) = t.strip_suffix('m') {
        (v, 60.0)
    } else if let Some(v) = t.strip_suffix('s') {
        (v, 1.0)
    } else {
        return Err(format!("timeout '{s}' needs an s, m or h suffix"));
    };
    let x: f64 = num.trim().parse().map_err(|e| format!("timeout '{s}': {e}"))?;
    if !(x.is_finite() && x > 0.0) {
        return Err(format!("timeout '{s}' must be positive"));
    }
    Ok(Duration::from_secs_f64(x * scale))
}

fn config_err(e: impl ToString) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(anyhow!("{e}"))
}

pub fn resolve_run_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(RUN_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cqed-run"))
}

/// Create `dir` with `config.json`, `pulses/` and `maps/`. A new directory
/// is assembled under a temporary name and renamed into place; an existing
/// one is reused only if its `config.json` is identical.
pub fn prepare_run_dir(dir: &Path, config: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(config).map_err(runtime)? + "\n";
    if dir.exists() {
        let cfg_path = dir.join("config.json");
        match fs::read_to_string(&cfg_path) {
            Ok(existing) if existing == text => {}
            Ok(_) => {
                return Err(config_err(format!(
                    "{} holds a run with a different configuration; choose another --run-dir",
                    dir.display()
                )))
            }
            Err(_) if dir.read_dir().map(|mut d| d.next().is_none()).unwrap_or(false) => {
                write_atomic(&cfg_path, text.as_bytes())?;
            }
            Err(_) => return Err(config_err(format!("{} exists and is not a run directory", dir.display()))),
        }
        for sub in ["pulses", "maps"] {
            fs::create_dir_all(dir.join(sub)).map_err(runtime)?;
        }
        return Ok(());
    }
    let name = dir.file_name().ok_or_else(|| config_err(format!("bad run directory '{}'", dir.display())))?;
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(runtime)?;
    let tmp = parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    fs::create_dir(&tmp).map_err(runtime)?;
    for sub in ["pulses", "maps"] {
        fs::create_dir(tmp.join(sub)).map_err(runtime)?;
    }
    fs::write(tmp.join("config.json"), &text).map_err(runtime)?;
    if let Err(e) = fs::rename(&tmp, dir) {
        let _ = fs::remove_dir_all(&tmp);
        // another process may have won the race with the same config
        if dir.exists() {
            return prepare_run_dir(dir, config);
        }
        return Err(runtime(e));
    }
    Ok(())
}

fn load_pipeline(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}:{}: {e}", p.display(), e.line())))
        }
    }
}

fn pipeline_from_args(a: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = load_pipeline(a.config.as_deref())?;
    if let Some(n) = a.iters {
        cfg.stage3.iter_max = n;
    }
    cfg.stage1.seed = a.seed;
    Ok(cfg)
}

fn with_point(base: SystemParams, point: Option<&str>) -> Result<SystemParams, CliError> {
    match point {
        None => Ok(base),
        Some(spec) => {
            let (p, warn) = apply_point(&base, spec).map_err(config_err)?;
            if warn {
                log::warn!("point {spec} lies outside the reference scan window");
            }
            p.validate().map_err(config_err)?;
            Ok(p)
        }
    }
}

fn executor(workers: Option<usize>) -> Result<Parallel, CliError> {
    match workers {
        Some(0) => Err(config_err("--workers must be at least 1")),
        w => Parallel::new(w.unwrap_or_else(available_workers)).map_err(CliError::Runtime),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let params = load_params(cli.params.as_deref())?;
    let run_dir = resolve_run_dir(cli.run_dir.as_deref());
    match &cli.command {
        Command::Fieldfree(a) => cmd_fieldfree(&params, &run_dir, cli.workers, a),
        Command::Optimize(a) => cmd_optimize(&params, &run_dir, cli.workers, a),
        Command::Evaluate(a) => cmd_evaluate(&params, &run_dir, a),
        Command::Landscape(a) => cmd_landscape(&params, &run_dir, cli.workers, a),
        Command::Qsl(a) => cmd_qsl(&params, &run_dir, cli.workers, a),
    }
}

fn slice_coords(spec: &str) -> Result<(f64, f64), CliError> {
    match spec.trim().to_ascii_lowercase().as_str() {
        "xtilde" | "x~" | "x̃" => Ok(POINT_X_TILDE),
        s => {
            let (a, b) = s.split_once(',').ok_or_else(|| config_err(format!("point '{spec}' must be 'xtilde' or 'D2A,DCG'")))?;
            let a = a.trim().parse::<f64>().map_err(|e| config_err(format!("point '{spec}': {e}")))?;
            let b = b.trim().parse::<f64>().map_err(|e| config_err(format!("point '{spec}': {e}")))?;
            Ok((a, b))
        }
    }
}

pub fn cmd_fieldfree(params: &SystemParams, run_dir: &Path, workers: Option<usize>, a: &FieldFreeArgs) -> Result<(), CliError> {
    let (n, m) = GridSpec::parse_dims(&a.grid).map_err(config_err)?;
    let (sd2, sdc) = slice_coords(&a.slice_point)?;
    let grid = GridSpec::window(params, n, m);
    let config = json!({
        "command": "fieldfree",
        "params": ParamsFile::from_params(params),
        "grid": grid,
        "slice_point": [sd2, sdc],
    });
    prepare_run_dir(run_dir, &config)?;
    let exec = executor(workers)?;
    let map = field_free_map(&grid, params, &exec);
    let vertical = slice_fixed_deltac(&grid, params, sdc, &exec);
    let horizontal = slice_fixed_delta2(&grid, params, sd2, &exec);
    let maps = run_dir.join("maps");
    write_field_free(&maps.join("zeta.csv"), &map, FieldFreeTable::Zeta)?;
    write_field_free(&maps.join("t_pi.csv"), &map, FieldFreeTable::TPi)?;
    write_field_free(&maps.join("decay_ratio.csv"), &map, FieldFreeTable::DecayRatio)?;
    write_field_free(&maps.join("shifts.csv"), &map, FieldFreeTable::Shifts)?;
    write_field_free(&maps.join("slice_fixed_deltac.csv"), &vertical, FieldFreeTable::All)?;
    write_field_free(&maps.join("slice_fixed_delta2.csv"), &horizontal, FieldFreeTable::All)?;
    write_field_free(&run_dir.join("fieldfree.csv"), &map, FieldFreeTable::All)?;
    let all = map.iter().chain(&vertical).chain(&horizontal);
    let failed = all.clone().filter(|p| p.status == PointStatus::Failed).count();
    let ambiguous = all.filter(|p| p.status == PointStatus::Ambiguous).count();
    let max_zeta = map.iter().filter(|p| p.zeta.is_finite()).map(|p| to_mhz(p.zeta).abs()).fold(0.0, f64::max);
    let max_ratio = map.iter().filter(|p| p.decay_ratio.is_finite()).map(|p| p.decay_ratio).fold(0.0, f64::max);
    println!("points: {}  ambiguous: {ambiguous}  failed: {failed}", map.len());
    println!("max |zeta|/2pi: {} MHz", fmt_f64(max_zeta));
    println!("max decay ratio: {}", fmt_f64(max_ratio));
    println!("maps written to {}", maps.display());
    if failed > 0 {
        return Err(CliError::Partial(format!("{failed} points failed; see the status columns")));
    }
    Ok(())
}

/// Run `f` on a worker thread, giving up after `timeout`.
fn with_timeout<T: Send + 'static>(timeout: Option<Duration>, f: impl FnOnce() -> T + Send + 'static) -> Result<T, CliError> {
    match timeout {
        None => Ok(f()),
        Some(limit) => {
            let (tx, rx) = mpsc::channel();
            std::thread::spawn(move || {
                let _ = tx.send(f());
            });
            rx.recv_timeout(limit).map_err(|_| CliError::Partial(format!("timed out after {} s", limit.as_secs_f64())))
        }
    }
}

fn write_outcome(run_dir: &Path, goal: &str, t_ns: f64, o: &PipelineOutcome) -> Result<(), CliError> {
    write_pulse(&run_dir.join("pulses").join("optimized.csv"), &o.stage3.pulse)?;
    write_iteration_log(&run_dir.join("maps").join("iterations.csv"), &o.stage3.log)?;
    let report = json!({
        "goal": goal,
        "T_ns": t_ns,
        "stage2_value": o.stage2.value,
        "stage3_value": o.stage3.value,
        "stage1_failures": o.stage1_failures,
        "eps_avg": o.report.eps_avg,
        "eps_avg_no_dissipation": o.eps_avg_no_dissipation,
        "evaluation_target": o.evaluation_target.as_ref().map(cqed_core::linalg::matrix_serde::to_rows),
        "report": o.report,
    });
    let text = serde_json::to_string_pretty(&report).map_err(runtime)? + "\n";
    write_atomic(&run_dir.join("report.json"), text.as_bytes())?;
    Ok(())
}

pub fn cmd_optimize(params: &SystemParams, run_dir: &Path, workers: Option<usize>, a: &OptimizeArgs) -> Result<(), CliError> {
    let t_ns = parse_duration_ns(&a.duration).map_err(config_err)?;
    let goal = parse_goal(&a.goal, ns(t_ns), a.up_to_local).map_err(config_err)?;
    let timeout = a.timeout.as_deref().map(parse_timeout).transpose().map_err(config_err)?;
    let params = with_point(*params, a.point.as_deref())?;
    let cfg = pipeline_from_args(&a.pipeline)?;
    let config = json!({
        "command": "optimize",
        "params": ParamsFile::from_params(&params),
        "goal": a.goal.trim().to_ascii_lowercase(),
        "up_to_local": a.up_to_local,
        "T_ns": t_ns,
        "point": a.point,
        "pipeline": cfg,
    });
    prepare_run_dir(run_dir, &config)?;
    let exec = executor(workers)?;
    let started = Instant::now();
    let outcome = with_timeout(timeout, move || run_pipeline(&params, &goal, &cfg, &exec))?.map_err(runtime)?;
    log::info!("pipeline finished in {:.1} s", started.elapsed().as_secs_f64());
    write_outcome(run_dir, &a.goal, t_ns, &outcome)?;
    let r = &outcome.report;
    println!("stage 2 functional: {}", fmt_f64(outcome.stage2.value));
    println!("stage 3 functional: {}", fmt_f64(outcome.stage3.value));
    println!("eps_avg (master equation): {}", fmt_opt(r.eps_avg));
    println!("eps_avg (no dissipation): {}", fmt_opt(outcome.eps_avg_no_dissipation));
    println!("concurrence: {}", fmt_opt(r.concurrence));
    println!("pop_loss: {}", fmt_f64(r.pop_loss));
    match r.weyl {
        Some(w) => println!("weyl: ({}, {}, {})", fmt_f64(w.c1), fmt_f64(w.c2), fmt_f64(w.c3)),
        None => println!("weyl: undefined"),
    }
    Ok(())
}

fn target_gate(name: &str) -> Result<Option<CMatrix>, CliError> {
    match name.trim().to_ascii_lowercase().as_str() {
        "none" => Ok(None),
        n => by_name(n).map(Some).ok_or_else(|| config_err(format!("unknown target gate '{name}'"))),
    }
}

pub fn cmd_evaluate(params: &SystemParams, run_dir: &Path, a: &EvaluateArgs) -> Result<(), CliError> {
    let pulse = read_pulse(&a.pulse)?;
    let target = target_gate(&a.target)?;
    let params = with_point(*params, a.point.as_deref())?;
    let cfg = load_pipeline(a.config.as_deref())?;
    let config = json!({
        "command": "evaluate",
        "params": ParamsFile::from_params(&params),
        "pulse": a.pulse,
        "target": a.target.trim().to_ascii_lowercase(),
        "point": a.point,
        "propagator": cfg.propagator,
        "save_every": a.save_every,
    });
    prepare_run_dir(run_dir, &config)?;
    let (report, no_diss) = evaluate_pulse(&params, &pulse, target.as_ref(), &cfg).map_err(runtime)?;
    let doc = json!({ "eps_avg": report.eps_avg, "eps_avg_no_dissipation": no_diss, "report": report });
    write_atomic(&run_dir.join("report.json"), (serde_json::to_string_pretty(&doc).map_err(runtime)? + "\n").as_bytes())?;

    // trajectories from each logical basis state
    let frame_params = params.with_rotating_frame(pulse.omega_r);
    let ops = build_operators(&frame_params).map_err(runtime)?;
    let frame = diagonalize_and_assign(&ops).map_err(runtime)?;
    let gen = Generator::from_ops(&ops, Mode::Effective, cfg.propagator.block_rate).map_err(runtime)?;
    let maps = run_dir.join("maps");
    for (k, label) in ["00", "01", "10", "11"].iter().enumerate() {
        let (_, traj) =
            propagate_state_trajectory(&frame.logical_state(k), &gen, &pulse, &frame, a.save_every, &cfg.propagator).map_err(runtime)?;
        write_trajectory(&maps.join(format!("trajectory_{label}.csv")), &traj)?;
    }
    let window = default_smoothing_window(&pulse.grid);
    let dphi = phase_derivative(&pulse, window).map_err(runtime)?;
    let rows: Vec<Vec<String>> = pulse
        .samples
        .iter()
        .zip(&dphi)
        .enumerate()
        .map(|(k, (z, d))| vec![fmt_f64(to_ns(pulse.grid.midpoint(k))), fmt_f64(to_mhz(z.norm())), fmt_opt(d.map(to_mhz))])
        .collect();
    write_table(&maps.join("pulse_diagnostics.csv"), &["t_ns", "abs_eps_MHz_2pi", "dphi_dt_MHz_2pi"], &rows)?;
    let (freqs, mags) = pulse_spectrum(&pulse).map_err(runtime)?;
    let rows: Vec<Vec<String>> = freqs.iter().zip(&mags).map(|(f, m)| vec![fmt_f64(to_mhz(*f)), fmt_f64(*m)]).collect();
    write_table(&maps.join("spectrum.csv"), &["offset_MHz_2pi", "magnitude"], &rows)?;

    println!("eps_avg (master equation): {}", fmt_opt(report.eps_avg));
    println!("eps_avg (no dissipation): {}", fmt_opt(no_diss));
    println!("concurrence: {}", fmt_opt(report.concurrence));
    println!("pop_loss: {}", fmt_f64(report.pop_loss));
    match report.weyl {
        Some(w) => println!("weyl: ({}, {}, {})", fmt_f64(w.c1), fmt_f64(w.c2), fmt_f64(w.c3)),
        None => println!("weyl: undefined"),
    }
    Ok(())
}

pub fn cmd_landscape(params: &SystemParams, run_dir: &Path, workers: Option<usize>, a: &LandscapeArgs) -> Result<(), CliError> {
    let (n, m) = GridSpec::parse_dims(&a.grid).map_err(config_err)?;
    let durations_ns = parse_durations_ns(&a.durations).map_err(config_err)?;
    let goals: Vec<String> = a.goals.split(',').map(|g| g.trim().to_ascii_lowercase()).collect();
    for g in &goals {
        parse_goal(g, ns(durations_ns[0]), false).map_err(config_err)?;
    }
    let timeout = a.timeout.as_deref().map(parse_timeout).transpose().map_err(config_err)?;
    let cfg = LandscapeConfig {
        grid: GridSpec::window(params, n, m),
        durations_ns,
        goals,
        seed: a.pipeline.seed,
        skip_ambiguous: a.skip_ambiguous,
        pipeline: pipeline_from_args(&a.pipeline)?,
    };
    let config = json!({ "command": "landscape", "params": ParamsFile::from_params(params), "landscape": cfg });
    prepare_run_dir(run_dir, &config)?;
    let exec = executor(workers)?;
    let mut store = RecordStore::open(&run_dir.join("records.jsonl"))?;
    let deadline = timeout.map(|t| Instant::now() + t);
    let summary = entanglement_map(run_dir, params, &cfg, &mut store, &exec, exec.workers(), deadline, a.retry_failed)?;
    println!(
        "jobs: {}  already in store: {}  ran: {}  failed: {}  pending: {}",
        summary.total, summary.already_done, summary.ran, summary.failed, summary.pending
    );
    if a.export {
        let maps = run_dir.join("maps");
        export_records(&maps.join("entanglement.csv"), store.records())?;
        export_combined(&maps.join("combined.csv"), &combined_rows(store.records()))?;
        let points = weyl_scatter(run_dir, params, store.records(), &cfg.pipeline, &exec)?;
        export_weyl(&maps.join("weyl.csv"), &points)?;
        export_pe_polyhedron(&maps.join("pe_polyhedron.csv"))?;
        println!("exports written to {}", maps.display());
    }
    let failed_total = store.records().iter().filter(|r| r.status == crate::store::Status::Failed).count();
    if summary.pending > 0 {
        return Err(CliError::Partial(format!("timeout: {} jobs pending; rerun to resume", summary.pending)));
    }
    if failed_total > 0 {
        return Err(CliError::Partial(format!("{failed_total} jobs failed; see records.jsonl")));
    }
    Ok(())
}

pub fn cmd_qsl(params: &SystemParams, run_dir: &Path, workers: Option<usize>, a: &QslArgs) -> Result<(), CliError> {
    let durations = parse_durations_ns(&a.durations).map_err(config_err)?;
    check_durations(&durations).map_err(config_err)?;
    parse_goal(&a.goal, ns(durations[0]), a.up_to_local).map_err(config_err)?;
    let params = with_point(*params, a.point.as_deref())?;
    let cfg = pipeline_from_args(&a.pipeline)?;
    let config = json!({
        "command": "qsl",
        "params": ParamsFile::from_params(&params),
        "goal": a.goal.trim().to_ascii_lowercase(),
        "up_to_local": a.up_to_local,
        "T_ns": durations,
        "point": a.point,
        "pipeline": cfg,
    });
    prepare_run_dir(run_dir, &config)?;
    let exec = executor(workers)?;
    let out = qsl_sweep(&params, &a.goal, a.up_to_local, &durations, &cfg, a.pipeline.seed, &exec).map_err(config_err)?;
    for (row, pulse) in &out {
        if let Some(p) = pulse {
            write_pulse(&run_dir.join("pulses").join(format!("qsl_T{}ns.csv", row.t_ns)), p)?;
        }
        println!("T = {} ns  eps_avg = {}  bound = {}  ratio = {}", row.t_ns, fmt_opt(row.eps_avg), fmt_f64(row.bound), fmt_opt(row.ratio));
    }
    let rows: Vec<_> = out.into_iter().map(|(r, _)| r).collect();
    export_qsl(&run_dir.join("maps").join("qsl.csv"), &rows)?;
    let failed = rows.iter().filter(|r| r.message.is_some()).count();
    if failed > 0 {
        return Err(CliError::Partial(format!("{failed} durations failed")));
    }
    Ok(())
}

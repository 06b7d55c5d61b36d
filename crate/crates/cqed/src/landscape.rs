//! Grid orchestration: field-free maps, resumable entanglement maps, the
//! combined measure, gate-duration sweeps and Weyl-chamber scatter data.

use std::path::Path;
use std::time::Instant;

use cqed_core::exec::{Executor, Sequential};
use cqed_core::gates::named::by_name;
use cqed_core::gates::weyl::{points, PE_CONSTRAINTS};
use cqed_core::gates::{GateReport, WeylCoords};
use cqed_core::model::{landscape_point, window_ratios, SystemParams};
use cqed_core::optimize::pipeline::{evaluate_pulse, run_pipeline, EvaluationConfig, GoalKind, OptimizationGoal, PipelineConfig};
use cqed_core::pulse::ControlPulse;
use cqed_core::spectrum::{field_free_row, lifetime_error_bound, Shifts};
use cqed_core::units::{ns, to_mhz, to_ns};
use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::format::{fmt_f64, fmt_opt};
use crate::pulse_io::{read_pulse, write_pulse, write_table};
use crate::store::{job_key, job_seed, key_hash, LandscapeRecord, RecordStore, Status};

/// Rectangular grid in `(Δ₂/α, Δc/g)`, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_delta2: usize,
    pub n_deltac: usize,
    pub delta2_range: (f64, f64),
    pub deltac_range: (f64, f64),
}

impl GridSpec {
    /// The reference scan window of `base` at the given resolution.
    pub fn window(base: &SystemParams, n_delta2: usize, n_deltac: usize) -> Self {
        let (d2, dc) = window_ratios(base);
        let sorted = |(a, b): (f64, f64)| if a <= b { (a, b) } else { (b, a) };
        GridSpec { n_delta2, n_deltac, delta2_range: sorted(d2), deltac_range: sorted(dc) }
    }

    /// Parse `NxM` (`N` along Δ₂/α, `M` along Δc/g).
    pub fn parse_dims(s: &str) -> Result<(usize, usize), String> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("grid '{s}' must look like 5x5"))?;
        let n = a.trim().parse::<usize>().map_err(|e| format!("grid '{s}': {e}"))?;
        let m = b.trim().parse::<usize>().map_err(|e| format!("grid '{s}': {e}"))?;
        if n < 2 || m < 2 {
            return Err(format!("grid '{s}' needs at least 2 points per axis"));
        }
        Ok((n, m))
    }

    pub fn axis_delta2(&self) -> Vec<f64> {
        linspace(self.delta2_range, self.n_delta2)
    }

    pub fn axis_deltac(&self) -> Vec<f64> {
        linspace(self.deltac_range, self.n_deltac)
    }

    /// Points ordered by Δ₂/α, then Δc/g.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let dc = self.axis_deltac();
        self.axis_delta2().into_iter().flat_map(|a| dc.iter().map(move |&b| (a, b))).collect()
    }
}

pub fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Parameters of a landscape point with the frame midway between the qubits.
pub fn point_params(base: &SystemParams, delta2_over_alpha: f64, deltac_over_g: f64) -> (SystemParams, bool) {
    let (p, warn) = landscape_point(delta2_over_alpha, deltac_over_g, base);
    (SystemParams { omega_r: 0.5 * (p.omega1 + p.omega2), ..p }, warn)
}

// ---------------------------------------------------------------------------
// field-free maps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Ok,
    Ambiguous,
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Ambiguous => "ambiguous",
            PointStatus::Failed => "failed",
        }
    }
}

/// One field-free map entry; value fields are NaN unless the status is ok.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFreePoint {
    pub delta2_over_alpha: f64,
    pub deltac_over_g: f64,
    pub status: PointStatus,
    pub zeta: f64,
    pub t_pi: f64,
    pub decay_ratio: f64,
    pub shifts: Shifts,
    pub message: Option<String>,
}

pub fn field_free_point(base: &SystemParams, delta2_over_alpha: f64, deltac_over_g: f64) -> FieldFreePoint {
    let nan = f64::NAN;
    let mut out = FieldFreePoint {
        delta2_over_alpha,
        deltac_over_g,
        status: PointStatus::Failed,
        zeta: nan,
        t_pi: nan,
        decay_ratio: nan,
        shifts: Shifts { de01: nan, de10: nan, de11: nan, de_cav: nan },
        message: None,
    };
    let (params, _) = point_params(base, delta2_over_alpha, deltac_over_g);
    match field_free_row(&params) {
        Err(e) => out.message = Some(e.to_string()),
        Ok(row) if row.ambiguous => {
            out.status = PointStatus::Ambiguous;
            out.message = Some("dressed-state assignment ambiguous".into());
        }
        Ok(row) => {
            out.status = PointStatus::Ok;
            out.zeta = row.zeta;
            out.t_pi = row.t_pi;
            out.decay_ratio = row.decay_ratio;
            out.shifts = row.shifts;
        }
    }
    out
}

pub fn field_free_map<E: Executor>(grid: &GridSpec, base: &SystemParams, exec: &E) -> Vec<FieldFreePoint> {
    exec.map(&grid.points(), |&(a, b)| field_free_point(base, a, b))
}

/// Slice at fixed Δc/g, varying Δ₂/α over `grid`'s axis.
pub fn slice_fixed_deltac<E: Executor>(grid: &GridSpec, base: &SystemParams, deltac_over_g: f64, exec: &E) -> Vec<FieldFreePoint> {
    exec.map(&grid.axis_delta2(), |&a| field_free_point(base, a, deltac_over_g))
}

/// Slice at fixed Δ₂/α, varying Δc/g over `grid`'s axis.
pub fn slice_fixed_delta2<E: Executor>(grid: &GridSpec, base: &SystemParams, delta2_over_alpha: f64, exec: &E) -> Vec<FieldFreePoint> {
    exec.map(&grid.axis_deltac(), |&b| field_free_point(base, delta2_over_alpha, b))
}

/// Which quantity a field-free CSV carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFreeTable {
    Zeta,
    TPi,
    DecayRatio,
    Shifts,
    All,
}

pub fn write_field_free(path: &Path, points: &[FieldFreePoint], table: FieldFreeTable) -> Result<(), FormatError> {
    let mut header = vec!["delta2_over_alpha", "deltac_over_g"];
    let cols: &[&str] = match table {
        FieldFreeTable::Zeta => &["zeta_MHz_2pi"],
        FieldFreeTable::TPi => &["t_pi_ns"],
        FieldFreeTable::DecayRatio => &["decay_ratio"],
        FieldFreeTable::Shifts => &["dE01_MHz_2pi", "dE10_MHz_2pi", "dE11_MHz_2pi", "dEcav_MHz_2pi"],
        FieldFreeTable::All => &[
            "zeta_MHz_2pi",
            "t_pi_ns",
            "decay_ratio",
            "dE01_MHz_2pi",
            "dE10_MHz_2pi",
            "dE11_MHz_2pi",
            "dEcav_MHz_2pi",
        ],
    };
    header.extend_from_slice(cols);
    header.push("status");
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let zeta = fmt_f64(to_mhz(p.zeta));
            let tpi = fmt_f64(to_ns(p.t_pi));
            let ratio = fmt_f64(p.decay_ratio);
            let s = &p.shifts;
            let shifts = [s.de01, s.de10, s.de11, s.de_cav].map(|x| fmt_f64(to_mhz(x)));
            let mut row = vec![fmt_f64(p.delta2_over_alpha), fmt_f64(p.deltac_over_g)];
            match table {
                FieldFreeTable::Zeta => row.push(zeta),
                FieldFreeTable::TPi => row.push(tpi),
                FieldFreeTable::DecayRatio => row.push(ratio),
                FieldFreeTable::Shifts => row.extend(shifts),
                FieldFreeTable::All => {
                    row.extend([zeta, tpi, ratio]);
                    row.extend(shifts);
                }
            }
            row.push(p.status.as_str().into());
            row
        })
        .collect();
    write_table(path, &header, &rows)
}

// ---------------------------------------------------------------------------
// goals

/// Parse `pe`, `sq`, `gate:NAME` or `lgate:NAME` (up to local operations).
pub fn parse_goal(spec: &str, duration: f64, up_to_local: bool) -> Result<OptimizationGoal, String> {
    let s = spec.trim().to_ascii_lowercase();
    let kind = match s.as_str() {
        "pe" => GoalKind::MaximizeEntanglement,
        "sq" => GoalKind::MinimizeEntanglement,
        _ => {
            let (local, name) = if let Some(n) = s.strip_prefix("gate:") {
                (up_to_local, n)
            } else if let Some(n) = s.strip_prefix("lgate:") {
                (true, n)
            } else {
                return Err(format!("unknown goal '{spec}' (expected pe, sq, gate:NAME or lgate:NAME)"));
            };
            let target = by_name(name).ok_or_else(|| format!("unknown gate '{name}' in goal '{spec}'"))?;
            GoalKind::SpecificGate { target, up_to_local: local }
        }
    };
    OptimizationGoal::new(kind, duration).map_err(|e| e.to_string())
}

/// Goal label as stored in records.
pub fn normalize_goal(spec: &str) -> String {
    spec.trim().to_ascii_lowercase()
}

// ---------------------------------------------------------------------------
// entanglement maps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    pub grid: GridSpec,
    pub durations_ns: Vec<f64>,
    pub goals: Vec<String>,
    pub seed: u64,
    /// Record points with an ambiguous dressed-state assignment as skipped.
    #[serde(default)]
    pub skip_ambiguous: bool,
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub key: String,
    pub delta2_over_alpha: f64,
    pub deltac_over_g: f64,
    pub t_ns: f64,
    pub goal: String,
    pub seed: u64,
}

/// All jobs in canonical order: point, then duration, then goal.
pub fn jobs(cfg: &LandscapeConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for (a, b) in cfg.grid.points() {
        for &t in &cfg.durations_ns {
            for g in &cfg.goals {
                let goal = normalize_goal(g);
                let key = job_key(a, b, t, &goal);
                let seed = job_seed(cfg.seed, &key);
                out.push(Job { key, delta2_over_alpha: a, deltac_over_g: b, t_ns: t, goal, seed });
            }
        }
    }
    out
}

fn blank_record(job: &Job, status: Status, message: Option<String>) -> LandscapeRecord {
    LandscapeRecord {
        key: job.key.clone(),
        delta2_over_alpha: job.delta2_over_alpha,
        deltac_over_g: job.deltac_over_g,
        t_ns: job.t_ns,
        goal: job.goal.clone(),
        status,
        seed: job.seed,
        value: None,
        concurrence: None,
        pop_loss: None,
        eps_avg: None,
        eps_avg_no_dissipation: None,
        weyl: None,
        pulse_file: None,
        message,
    }
}

/// Run one job to a record, writing its pulse under `run_dir/pulses`.
pub fn run_job(run_dir: &Path, base: &SystemParams, cfg: &LandscapeConfig, job: &Job) -> LandscapeRecord {
    let started = Instant::now();
    let (params, _) = point_params(base, job.delta2_over_alpha, job.deltac_over_g);
    if cfg.skip_ambiguous {
        match field_free_row(&params) {
            Ok(row) if row.ambiguous => return blank_record(job, Status::Skipped, Some("dressed-state assignment ambiguous".into())),
            Err(e) => return blank_record(job, Status::Failed, Some(e.to_string())),
            Ok(_) => {}
        }
    }
    let goal = match parse_goal(&job.goal, ns(job.t_ns), false) {
        Ok(g) => g,
        Err(e) => return blank_record(job, Status::Failed, Some(e)),
    };
    let mut pcfg = cfg.pipeline;
    pcfg.stage1.seed = job.seed;
    let outcome = match run_pipeline(&params, &goal, &pcfg, &Sequential) {
        Ok(o) => o,
        Err(e) => return blank_record(job, Status::Failed, Some(e.to_string())),
    };
    let rel = format!("pulses/{}.csv", key_hash(&job.key));
    if let Err(e) = write_pulse(&run_dir.join(&rel), &outcome.stage3.pulse) {
        return blank_record(job, Status::Failed, Some(e.to_string()));
    }
    let r = &outcome.report;
    log::info!("{}: C = {} in {:.1} s", job.key, fmt_opt(r.concurrence), started.elapsed().as_secs_f64());
    LandscapeRecord {
        value: Some(outcome.stage3.value),
        concurrence: r.concurrence,
        pop_loss: Some(r.pop_loss),
        eps_avg: r.eps_avg,
        eps_avg_no_dissipation: outcome.eps_avg_no_dissipation,
        weyl: r.weyl,
        pulse_file: Some(rel),
        ..blank_record(job, Status::Done, None)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub total: usize,
    pub already_done: usize,
    pub ran: usize,
    pub failed: usize,
    /// Jobs left because the deadline passed.
    pub pending: usize,
}

/// Run every job not yet in `store`, `chunk` jobs at a time. Each chunk is
/// appended in job order, so the store contents do not depend on the
/// worker count. Stops between chunks once `deadline` has passed.
pub fn entanglement_map<E: Executor>(
    run_dir: &Path,
    base: &SystemParams,
    cfg: &LandscapeConfig,
    store: &mut RecordStore,
    exec: &E,
    chunk: usize,
    deadline: Option<Instant>,
    retry_failed: bool,
) -> Result<RunSummary, FormatError> {
    std::fs::create_dir_all(run_dir.join("pulses")).map_err(|e| FormatError::io(run_dir.join("pulses"), e))?;
    let all = jobs(cfg);
    let todo: Vec<Job> = all
        .iter()
        .filter(|j| match store.get(&j.key) {
            None => true,
            Some(r) => retry_failed && r.status == Status::Failed,
        })
        .cloned()
        .collect();
    let mut summary = RunSummary { total: all.len(), already_done: all.len() - todo.len(), ..Default::default() };
    log::info!("{} jobs, {} already in the store", summary.total, summary.already_done);
    for (i, batch) in todo.chunks(chunk.max(1)).enumerate() {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            summary.pending = todo.len() - i * chunk.max(1);
            break;
        }
        let records = exec.map(batch, |j| run_job(run_dir, base, cfg, j));
        summary.ran += records.len();
        summary.failed += records.iter().filter(|r| r.status == Status::Failed).count();
        store.append(records)?;
    }
    Ok(summary)
}

/// `C_PE · (1 − C_SQ)`
pub fn combined_measure(c_pe: f64, c_sq: f64) -> f64 {
    c_pe * (1.0 - c_sq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedRow {
    pub delta2_over_alpha: f64,
    pub deltac_over_g: f64,
    pub t_ns: f64,
    pub c_pe: f64,
    pub c_sq: f64,
    pub combined: f64,
}

/// Combined measure for every (point, duration) with both goals done, in
/// store order of the PE records.
pub fn combined_rows(records: &[LandscapeRecord]) -> Vec<CombinedRow> {
    let done = |r: &&LandscapeRecord| r.status == Status::Done && r.concurrence.is_some();
    records
        .iter()
        .filter(|r| r.goal == "pe")
        .filter(done)
        .filter_map(|pe| {
            let sq = records.iter().filter(done).find(|r| {
                r.goal == "sq" && r.delta2_over_alpha == pe.delta2_over_alpha && r.deltac_over_g == pe.deltac_over_g && r.t_ns == pe.t_ns
            })?;
            let (c_pe, c_sq) = (pe.concurrence?, sq.concurrence?);
            Some(CombinedRow {
                delta2_over_alpha: pe.delta2_over_alpha,
                deltac_over_g: pe.deltac_over_g,
                t_ns: pe.t_ns,
                c_pe,
                c_sq,
                combined: combined_measure(c_pe, c_sq),
            })
        })
        .collect()
}

pub fn export_records(path: &Path, records: &[LandscapeRecord]) -> Result<(), FormatError> {
    let header = [
        "delta2_over_alpha",
        "deltac_over_g",
        "T_ns",
        "goal",
        "status",
        "value",
        "concurrence",
        "pop_loss",
        "eps_avg",
        "eps_avg_no_dissipation",
        "c1",
        "c2",
        "c3",
        "pulse_file",
    ];
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let w = r.weyl.map(|w| w.as_array());
            vec![
                fmt_f64(r.delta2_over_alpha),
                fmt_f64(r.deltac_over_g),
                fmt_f64(r.t_ns),
                r.goal.clone(),
                format!("{:?}", r.status).to_lowercase(),
                fmt_opt(r.value),
                fmt_opt(r.concurrence),
                fmt_opt(r.pop_loss),
                fmt_opt(r.eps_avg),
                fmt_opt(r.eps_avg_no_dissipation),
                fmt_opt(w.map(|w| w[0])),
                fmt_opt(w.map(|w| w[1])),
                fmt_opt(w.map(|w| w[2])),
                r.pulse_file.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_table(path, &header, &rows)
}

pub fn export_combined(path: &Path, rows: &[CombinedRow]) -> Result<(), FormatError> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            [r.delta2_over_alpha, r.deltac_over_g, r.t_ns, r.c_pe, r.c_sq, r.combined].iter().map(|&x| fmt_f64(x)).collect()
        })
        .collect();
    write_table(path, &["delta2_over_alpha", "deltac_over_g", "T_ns", "C_PE", "C_SQ", "combined"], &body)
}

// ---------------------------------------------------------------------------
// re-evaluation and Weyl scatter

fn closed_only(cfg: &PipelineConfig) -> PipelineConfig {
    PipelineConfig { evaluation: EvaluationConfig { lindblad: false, no_dissipation: false }, ..*cfg }
}

/// Effective-mode report of a record's stored pulse.
pub fn reevaluate(run_dir: &Path, base: &SystemParams, record: &LandscapeRecord, cfg: &PipelineConfig) -> Result<GateReport, FormatError> {
    let rel = record
        .pulse_file
        .as_deref()
        .ok_or_else(|| FormatError::invalid(run_dir, format!("record {} has no pulse file", record.key)))?;
    let path = run_dir.join(rel);
    let pulse = read_pulse(&path)?;
    let (params, _) = point_params(base, record.delta2_over_alpha, record.deltac_over_g);
    let (report, _) = evaluate_pulse(&params, &pulse, None, &closed_only(cfg)).map_err(|e| FormatError::invalid(&path, e.to_string()))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylPoint {
    pub key: String,
    pub goal: String,
    pub t_ns: f64,
    pub weyl: WeylCoords,
    pub concurrence: f64,
}

/// Weyl coordinates of every done record, re-evaluated from its pulse.
pub fn weyl_scatter<E: Executor>(
    run_dir: &Path,
    base: &SystemParams,
    records: &[LandscapeRecord],
    cfg: &PipelineConfig,
    exec: &E,
) -> Result<Vec<WeylPoint>, FormatError> {
    let done: Vec<&LandscapeRecord> = records.iter().filter(|r| r.status == Status::Done).collect();
    let out = exec.map(&done, |r| {
        let rep = reevaluate(run_dir, base, r, cfg)?;
        let weyl = rep.weyl.ok_or_else(|| FormatError::invalid(run_dir, format!("record {}: rank-deficient gate", r.key)))?;
        Ok(WeylPoint { key: r.key.clone(), goal: r.goal.clone(), t_ns: r.t_ns, weyl, concurrence: rep.concurrence.unwrap_or(0.0) })
    });
    out.into_iter().collect()
}

pub fn export_weyl(path: &Path, points: &[WeylPoint]) -> Result<(), FormatError> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.goal.clone(),
                fmt_f64(p.t_ns),
                fmt_f64(p.weyl.c1),
                fmt_f64(p.weyl.c2),
                fmt_f64(p.weyl.c3),
                fmt_f64(p.concurrence),
                p.key.clone(),
            ]
        })
        .collect();
    write_table(path, &["goal", "T_ns", "c1", "c2", "c3", "concurrence", "key"], &rows)
}

/// Corners of the perfect-entangler polyhedron and its edges (index
/// pairs). Two corners share an edge when at least two independent faces
/// pass through both.
pub fn pe_polyhedron() -> (Vec<(&'static str, WeylCoords)>, Vec<(usize, usize)>) {
    let corners = vec![
        ("L", points::L),
        ("M", points::M),
        ("A2", points::A2),
        ("Q", points::Q),
        ("P", points::P),
        ("N", points::N),
    ];
    let tight = |w: &WeylCoords| -> Vec<usize> {
        let c = w.as_array();
        PE_CONSTRAINTS
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| (a[0] * c[0] + a[1] * c[1] + a[2] * c[2] - b).abs() < 1e-12)
            .map(|(i, _)| i)
            .collect()
    };
    let faces: Vec<Vec<usize>> = corners.iter().map(|(_, w)| tight(w)).collect();
    let mut edges = Vec::new();
    for i in 0..corners.len() {
        for j in i + 1..corners.len() {
            let shared: Vec<[f64; 3]> = faces[i].iter().filter(|f| faces[j].contains(f)).map(|&f| PE_CONSTRAINTS[f].0).collect();
            let independent = shared.iter().enumerate().any(|(k, a)| {
                shared[k + 1..].iter().any(|b| {
                    let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
                    cross.iter().any(|x| x.abs() > 1e-12)
                })
            });
            if independent {
                edges.push((i, j));
            }
        }
    }
    (corners, edges)
}

pub fn export_pe_polyhedron(path: &Path) -> Result<(), FormatError> {
    let (corners, edges) = pe_polyhedron();
    let rows: Vec<Vec<String>> = edges
        .iter()
        .map(|&(i, j)| {
            let (a, wa) = corners[i];
            let (b, wb) = corners[j];
            vec![
                a.to_string(),
                b.to_string(),
                fmt_f64(wa.c1),
                fmt_f64(wa.c2),
                fmt_f64(wa.c3),
                fmt_f64(wb.c1),
                fmt_f64(wb.c2),
                fmt_f64(wb.c3),
            ]
        })
        .collect();
    write_table(path, &["from", "to", "c1_from", "c2_from", "c3_from", "c1_to", "c2_to", "c3_to"], &rows)
}

// ---------------------------------------------------------------------------
// gate-duration sweep

#[derive(Debug, Clone, PartialEq)]
pub struct QslRow {
    pub t_ns: f64,
    pub eps_avg: Option<f64>,
    pub eps_avg_no_dissipation: Option<f64>,
    /// Lifetime-limited error of the bare qubits.
    pub bound: f64,
    /// `eps_avg / bound`
    pub ratio: Option<f64>,
    pub concurrence: Option<f64>,
    pub message: Option<String>,
}

/// Durations must be strictly monotonic (either direction).
pub fn check_durations(ts: &[f64]) -> Result<(), String> {
    if ts.is_empty() || ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err("durations must be positive and finite".into());
    }
    let up = ts.windows(2).all(|w| w[1] > w[0]);
    let down = ts.windows(2).all(|w| w[1] < w[0]);
    if up || down {
        Ok(())
    } else {
        Err("durations must be strictly ascending or descending".into())
    }
}

/// Optimize `goal_spec` at every duration and compare the master-equation
/// error against the lifetime bound. Failed durations carry a message.
pub fn qsl_sweep<E: Executor>(
    params: &SystemParams,
    goal_spec: &str,
    up_to_local: bool,
    durations_ns: &[f64],
    cfg: &PipelineConfig,
    seed: u64,
    exec: &E,
) -> Result<Vec<(QslRow, Option<ControlPulse>)>, String> {
    check_durations(durations_ns)?;
    let label = normalize_goal(goal_spec);
    let mut out = Vec::with_capacity(durations_ns.len());
    for &t_ns in durations_ns {
        let goal = parse_goal(&label, ns(t_ns), up_to_local)?;
        let mut pcfg = *cfg;
        pcfg.evaluation.lindblad = true;
        pcfg.stage1.seed = job_seed(seed, &format!("T={t_ns}ns;goal={label}"));
        let bound = lifetime_error_bound(params.gamma, ns(t_ns));
        let mut row = QslRow { t_ns, eps_avg: None, eps_avg_no_dissipation: None, bound, ratio: None, concurrence: None, message: None };
        match run_pipeline(params, &goal, &pcfg, exec) {
            Ok(o) => {
                row.eps_avg = o.report.eps_avg;
                row.eps_avg_no_dissipation = o.eps_avg_no_dissipation;
                row.ratio = o.report.eps_avg.map(|e| e / bound);
                row.concurrence = o.report.concurrence;
                out.push((row, Some(o.stage3.pulse)));
            }
            Err(e) => {
                row.message = Some(e.to_string());
                out.push((row, None));
            }
        }
    }
    Ok(out)
}

pub fn export_qsl(path: &Path, rows: &[QslRow]) -> Result<(), FormatError> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.t_ns),
                fmt_opt(r.eps_avg),
                fmt_opt(r.eps_avg_no_dissipation),
                fmt_f64(r.bound),
                fmt_opt(r.ratio),
                fmt_opt(r.concurrence),
                if r.message.is_some() { "failed" } else { "done" }.to_string(),
            ]
        })
        .collect();
    write_table(path, &["T_ns", "eps_avg", "eps_avg_no_dissipation", "bound", "ratio", "concurrence", "status"], &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cqed_core::model::POINT_X_TILDE;

    #[test]
    fn grid_points_are_lexicographic_and_inclusive() {
        let base = SystemParams::reference();
        let g = GridSpec::window(&base, 3, 4);
        let pts = g.points();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[0], (g.delta2_range.0, g.deltac_range.0));
        assert_eq!(pts[11], (g.delta2_range.1, g.deltac_range.1));
        assert!(pts.windows(2).all(|w| w[0].partial_cmp(&w[1]) == Some(std::cmp::Ordering::Less)));
        for (a, b) in pts {
            assert!(!landscape_point(a, b, &base).1);
        }
        assert_eq!(GridSpec::parse_dims("5x7").unwrap(), (5, 7));
        assert!(GridSpec::parse_dims("1x5").is_err());
        assert!(GridSpec::parse_dims("5").is_err());
    }

    #[test]
    fn combined_measure_examples() {
        assert_eq!(combined_measure(1.0, 0.0), 1.0);
        assert_eq!(combined_measure(1.0, 1.0), 0.0);
    }

    #[test]
    fn goals_parse() {
        assert!(matches!(parse_goal("PE", 1e-8, false).unwrap().kind, GoalKind::MaximizeEntanglement));
        assert!(matches!(parse_goal("gate:bgate", 1e-8, false).unwrap().kind, GoalKind::SpecificGate { up_to_local: false, .. }));
        assert!(matches!(parse_goal("lgate:cnot", 1e-8, false).unwrap().kind, GoalKind::SpecificGate { up_to_local: true, .. }));
        assert!(parse_goal("gate:nope", 1e-8, false).is_err());
        assert!(parse_goal("pe", -1.0, false).is_err());
    }

    #[test]
    fn pe_polyhedron_is_a_closed_surface() {
        let (v, e) = pe_polyhedron();
        // Euler: V − E + F = 2 with 7 faces
        assert_eq!(v.len() as i64 - e.len() as i64 + 7, 2);
        for i in 0..v.len() {
            assert!(e.iter().filter(|(a, b)| *a == i || *b == i).count() >= 3);
        }
    }

    #[test]
    fn field_free_point_at_xtilde() {
        let p = field_free_point(&SystemParams::reference(), POINT_X_TILDE.0, POINT_X_TILDE.1);
        assert_eq!(p.status, PointStatus::Ok);
        assert!(p.zeta.is_finite() && p.decay_ratio >= 1.0);
    }

    #[test]
    fn duration_lists() {
        assert!(check_durations(&[5.0, 10.0]).is_ok());
        assert!(check_durations(&[10.0, 5.0]).is_ok());
        assert!(check_durations(&[5.0, 10.0, 7.0]).is_err());
        assert!(check_durations(&[]).is_err());
    }
}

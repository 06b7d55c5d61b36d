//! Pulse files and the other CSV tables written next to them.
//!
//! A pulse file holds one row per time interval (its midpoint) with the
//! field in MHz·2π; comment lines at the top carry the metadata:
//!
//! ```text
//! # omega_r_GHz_2pi = 5.9325000000000000e0
//! # t_start_ns = 0.0000000000000000e0
//! # duration_ns = 5.0000000000000000e1
//! t_ns,re_eps_MHz_2pi,im_eps_MHz_2pi
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use cqed_core::optimize::krotov::IterationRecord;
use cqed_core::propagate::Trajectory;
use cqed_core::pulse::{ControlPulse, TimeGrid};
use cqed_core::units::{ghz, mhz, ns, to_ghz, to_mhz, to_ns};
use cqed_core::C64;

use crate::error::FormatError;
use crate::format::{fmt_f64, parse_f64};

/// Write a header row plus data rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FormatError::invalid(path, e.to_string()))?;
    let err = |e: csv::Error| FormatError::invalid(path, e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| FormatError::io(path, e))
}

pub fn pulse_to_string(pulse: &ControlPulse) -> String {
    let g = &pulse.grid;
    let mut out = String::new();
    out.push_str(&format!("# omega_r_GHz_2pi = {}\n", fmt_f64(to_ghz(pulse.omega_r))));
    out.push_str(&format!("# t_start_ns = {}\n", fmt_f64(to_ns(g.t_start))));
    out.push_str(&format!("# duration_ns = {}\n", fmt_f64(to_ns(g.duration()))));
    out.push_str("t_ns,re_eps_MHz_2pi,im_eps_MHz_2pi\n");
    for (k, z) in pulse.samples.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", fmt_f64(to_ns(g.midpoint(k))), fmt_f64(to_mhz(z.re)), fmt_f64(to_mhz(z.im))));
    }
    out
}

pub fn write_pulse(path: &Path, pulse: &ControlPulse) -> Result<(), FormatError> {
    fs::write(path, pulse_to_string(pulse)).map_err(|e| FormatError::io(path, e))
}

pub fn read_pulse(path: &Path) -> Result<ControlPulse, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_pulse(&text, path)
}

/// Parse a pulse file, reporting the offending line on failure.
pub fn parse_pulse(text: &str, path: &Path) -> Result<ControlPulse, FormatError> {
    let mut omega_r = None;
    let mut t_start = None;
    let mut duration = None;
    let mut header_seen = false;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    let mut last_line = 0u64;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let Some((key, value)) = meta.split_once('=') else { continue };
            let v = parse_f64(value).ok_or_else(|| FormatError::parse(path, line_no, format!("bad number '{}'", value.trim())))?;
            match key.trim() {
                "omega_r_GHz_2pi" => omega_r = Some(ghz(v)),
                "t_start_ns" => t_start = Some(ns(v)),
                "duration_ns" => duration = Some(ns(v)),
                other => return Err(FormatError::parse(path, line_no, format!("unknown metadata key '{other}'"))),
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["t_ns", "re_eps_MHz_2pi", "im_eps_MHz_2pi"] {
                return Err(FormatError::parse(path, line_no, "expected header 't_ns,re_eps_MHz_2pi,im_eps_MHz_2pi'"));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(FormatError::parse(path, line_no, format!("expected 3 columns, found {}", cols.len())));
        }
        let mut vals = [0.0; 3];
        for (v, s) in vals.iter_mut().zip(&cols) {
            *v = parse_f64(s)
                .filter(|x| x.is_finite())
                .ok_or_else(|| FormatError::parse(path, line_no, format!("bad number '{}'", s.trim())))?;
        }
        times.push((line_no, ns(vals[0])));
        samples.push(C64::new(mhz(vals[1]), mhz(vals[2])));
    }
    let missing = |what: &str| FormatError::parse(path, last_line, format!("missing '# {what} = ...' metadata"));
    let omega_r = omega_r.ok_or_else(|| missing("omega_r_GHz_2pi"))?;
    let t_start = t_start.ok_or_else(|| missing("t_start_ns"))?;
    let duration = duration.ok_or_else(|| missing("duration_ns"))?;
    if !header_seen {
        return Err(FormatError::parse(path, last_line, "missing column header"));
    }
    if samples.len() < 2 {
        return Err(FormatError::parse(path, last_line, "need at least 2 samples"));
    }
    let grid = TimeGrid::new(t_start, t_start + duration, samples.len()).map_err(|e| FormatError::invalid(path, e.to_string()))?;
    let tol = 1e-6 * grid.dt();
    for (k, &(line_no, t)) in times.iter().enumerate() {
        if (t - grid.midpoint(k)).abs() > tol {
            return Err(FormatError::parse(
                path,
                line_no,
                format!("time {} ns is not the midpoint {} ns of interval {k}", to_ns(t), to_ns(grid.midpoint(k))),
            ));
        }
    }
    ControlPulse::new(grid, samples, omega_r).map_err(|e| FormatError::invalid(path, e.to_string()))
}

/// Iteration log: `iter, J_total, J_main, loss_term`.
pub fn write_iteration_log(path: &Path, log: &[IterationRecord]) -> Result<(), FormatError> {
    let rows: Vec<Vec<String>> = log
        .iter()
        .map(|r| vec![r.iter.to_string(), fmt_f64(r.total), fmt_f64(r.main), fmt_f64(r.loss_term)])
        .collect();
    write_table(path, &["iter", "J_total", "J_main", "loss_term"], &rows)
}

/// Trajectory: `t_ns`, re/im of each logical entry, `p_outside`.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), FormatError> {
    let width = traj.logical.first().map_or(0, Vec::len);
    let mut header: Vec<String> = vec!["t_ns".into()];
    for k in 0..width {
        header.push(format!("re_{k}"));
        header.push(format!("im_{k}"));
    }
    header.push("p_outside".into());
    let rows: Vec<Vec<String>> = traj
        .times
        .iter()
        .zip(&traj.logical)
        .zip(&traj.p_outside)
        .map(|((t, amps), p)| {
            let mut row = vec![fmt_f64(to_ns(*t))];
            for z in amps {
                row.push(fmt_f64(z.re));
                row.push(fmt_f64(z.im));
            }
            row.push(fmt_f64(*p));
            row
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &h, &rows)
}

/// Write `contents` atomically (temporary file + rename).
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), FormatError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| FormatError::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| FormatError::io(&tmp, e))?;
    f.sync_all().map_err(|e| FormatError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| FormatError::io(path, e))
}

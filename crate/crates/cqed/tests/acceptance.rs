//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line
//! straight to stdout (bypassing output capture) before asserting.
//! Criteria 7 and 8 are slow and `#[ignore]`d; run them with
//! `cargo test --release --test acceptance -- --ignored`.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use cqed::exec::Parallel;
use cqed::landscape::{entanglement_map, field_free_map, reevaluate, slice_fixed_deltac, GridSpec, LandscapeConfig, PointStatus};
use cqed::store::{RecordStore, Status};
use cqed_core::exec::Sequential;
use cqed_core::gates::fidelity::{avg_gate_fidelity, avg_gate_fidelity_map, closest_unitary};
use cqed_core::gates::named::{bgate, cnot, cphase, h_x_1, identity4, iswap, sqrt_iswap, swap};
use cqed_core::gates::random::{haar_state, haar_unitary, random_contraction, random_local};
use cqed_core::gates::weyl::{gate_concurrence, local_invariants, weyl_coordinates};
use cqed_core::linalg::{c, frobenius, hermitian_eigen, CMatrix, C64};
use cqed_core::model::{build_operators, SystemParams, POINT_X_TILDE};
use cqed_core::optimize::krotov::{krotov, KrotovOptions, KrotovProblem, LogicalBasis};
use cqed_core::optimize::pipeline::{
    evaluate_pulse, run_pipeline, stage1_scan, DriveSetup, EvaluationConfig, GoalKind, OptimizationGoal, PipelineConfig,
};
use cqed_core::gates::Objective;
use cqed_core::propagate::{DynamicalMap, Generator, PropagatorConfig};
use cqed_core::pulse::{blackman_pulse, flattop_shape, ControlPulse, TimeGrid};
use cqed_core::spectrum::{diagonalize_and_assign, dressed_decay_ratio, lifetime_error_bound};
use cqed_core::units::{ghz, mhz, ns, to_mhz};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n} ({name}): {verdict}  {detail}");
    let _ = out.flush();
}

// ---------------------------------------------------------------------------
// 1

#[test]
fn criterion_1_lifetime_bound_closed_form_vs_dynamics() {
    let started = Instant::now();
    let mut p = SystemParams::reference();
    p.g = 0.0;
    p.n_transmon = 3;
    p.n_cavity = 2;
    let gamma = p.gamma;
    let cfg = PipelineConfig { evaluation: EvaluationConfig { lindblad: true, no_dissipation: false }, ..Default::default() };
    let eval = |x: f64| {
        let t = x / gamma;
        // about 20 rad of drift phase per step
        let n = ((t * ghz(1.5)) / 20.0).ceil().max(4.0) as usize;
        let pulse = ControlPulse::zeros(TimeGrid::span(t, n).unwrap(), p.omega_r);
        let (r, _) = evaluate_pulse(&p, &pulse, Some(&identity4()), &cfg).unwrap();
        (r.eps_avg.unwrap(), lifetime_error_bound(gamma, t))
    };
    let mut worst: f64 = 0.0;
    for x in [1e-4, 1e-3, 1e-2, 1e-1] {
        let (num, closed) = eval(x);
        worst = worst.max((num - closed).abs());
    }
    // slope at zero: closed form and dynamics
    let h = 1e-8 / gamma;
    let slope_closed = lifetime_error_bound(gamma, h) / h / gamma;
    let (num, _) = eval(1e-7);
    let slope_dyn = num / 1e-7;
    let slope_err = ((slope_closed - 0.8) / 0.8).abs().max(((slope_dyn - 0.8) / 0.8).abs());
    let pass = worst < 1e-8 && slope_err < 1e-6;
    report(
        1,
        "lifetime bound",
        pass,
        &format!(
            "max |eps_lindblad - closed| = {worst:.2e}; slope/gamma closed {slope_closed:.9}, dynamics {slope_dyn:.9}; {:.1} s",
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2

#[test]
fn criterion_2_point_bound_reproduction() {
    let p = SystemParams::reference();
    let bare = lifetime_error_bound(p.gamma, ns(50.0));
    let ops = build_operators(&p).unwrap();
    let frame = diagonalize_and_assign(&ops).unwrap();
    let ratio = dressed_decay_ratio(&frame, &ops).unwrap();
    let dressed = bare * ratio;
    let rel = (dressed - 3.6e-3).abs() / 3.6e-3;
    let pass = (bare - 3.0e-3).abs() < 0.1e-3 && rel < 0.15;
    report(
        2,
        "bound at the reference point",
        pass,
        &format!("bare {bare:.4e}, dressed ratio {ratio:.4}, dressed bound {dressed:.4e} ({:.1}% from 3.6e-3)", 100.0 * rel),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3

/// Number of lines along which the value changes sign between the nearest
/// finite points on either side of `at` (a grid point on the line itself
/// is skipped), and the number of lines with finite points on both sides.
fn sign_flips(lines: &[Vec<(f64, f64)>], at: f64) -> (usize, usize) {
    let mut flips = 0;
    let mut total = 0;
    for line in lines {
        let below = line.iter().filter(|(x, v)| *x < at - 1e-9 && v.is_finite()).next_back();
        let above = line.iter().find(|(x, v)| *x > at + 1e-9 && v.is_finite());
        if let (Some(b), Some(a)) = (below, above) {
            total += 1;
            if b.1.signum() != a.1.signum() {
                flips += 1;
            }
        }
    }
    (flips, total)
}

#[test]
fn criterion_3_field_free_map_properties() {
    let started = Instant::now();
    let base = SystemParams::reference();
    let grid = GridSpec::window(&base, 61, 61);
    let exec = Parallel::new(cqed::exec::available_workers()).unwrap();
    let map = field_free_map(&grid, &base, &exec);
    let d2 = grid.axis_delta2();
    let dc = grid.axis_deltac();
    let value = |i: usize, j: usize, f: fn(&cqed::landscape::FieldFreePoint) -> f64| {
        let q = &map[i * dc.len() + j];
        if q.status == PointStatus::Ok {
            f(q)
        } else {
            f64::NAN
        }
    };
    let columns = |f: fn(&cqed::landscape::FieldFreePoint) -> f64| -> Vec<Vec<(f64, f64)>> {
        (0..d2.len()).map(|i| (0..dc.len()).map(|j| (dc[j], value(i, j, f))).collect()).collect()
    };
    let rows: Vec<Vec<(f64, f64)>> = (0..dc.len()).map(|j| (0..d2.len()).map(|i| (d2[i], value(i, j, |q| q.zeta))).collect()).collect();
    let (zc, zc_n) = sign_flips(&columns(|q| q.zeta), 0.0);
    let (ec, ec_n) = sign_flips(&columns(|q| q.shifts.de10), 0.0);
    let (zm, zm_n) = sign_flips(&rows, -1.0);
    let (zp, zp_n) = sign_flips(&rows, 1.0);
    let max_zeta = map.iter().filter(|q| q.status == PointStatus::Ok).map(|q| to_mhz(q.zeta).abs()).fold(0.0, f64::max);
    let max_ratio = map.iter().filter(|q| q.status == PointStatus::Ok).map(|q| q.decay_ratio).fold(0.0, f64::max);
    let slice = slice_fixed_deltac(&grid, &base, POINT_X_TILDE.1, &exec);
    let inside: Vec<(f64, f64)> = slice
        .iter()
        .filter(|q| q.status == PointStatus::Ok && q.delta2_over_alpha > -1.0 && q.delta2_over_alpha < 0.0)
        .map(|q| (q.delta2_over_alpha, q.zeta))
        .collect();
    let crossing = inside.windows(2).find(|w| w[0].1.signum() != w[1].1.signum()).map(|w| (w[0].0, w[1].0));
    // Δ₂ = ±α: ζ flips on most rows. Δc = 0: the level shifts flip on most
    // columns, ζ itself only on some.
    let a = 2 * zm > zm_n && 2 * zp > zp_n && 2 * ec > ec_n && zc > 0;
    let b = max_zeta > 100.0;
    let cc = (2.0..=2.6).contains(&max_ratio);
    let d = crossing.is_some();
    let pass = a && b && cc && d;
    report(
        3,
        "field-free map",
        pass,
        &format!(
            "(a) zeta flips across d2=-alpha on {zm}/{zm_n} rows, d2=+alpha {zp}/{zp_n}, dc=0 {zc}/{zc_n} columns; dE10 flips across dc=0 on {ec}/{ec_n}; \
             (b) max |zeta|/2pi {max_zeta:.1} MHz; (c) max decay ratio {max_ratio:.3}; (d) crossing {crossing:?}; {:.1} s",
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 4

/// Concurrence of a two-qubit pure state.
fn state_concurrence(v: &[C64; 4]) -> f64 {
    2.0 * (v[0] * v[3] - v[1] * v[2]).norm()
}

fn qubit(theta: f64, phi: f64) -> [C64; 2] {
    [c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]
}

/// Largest concurrence `U` produces from product states, by random
/// sampling followed by a shrinking pattern search.
fn brute_force_concurrence(u: &CMatrix, rng: &mut ChaCha8Rng) -> f64 {
    let f = |x: &[f64; 4]| {
        let a = qubit(x[0], x[1]);
        let b = qubit(x[2], x[3]);
        let prod = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
        let mut out = [C64::new(0.0, 0.0); 4];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, p) in prod.iter().enumerate() {
                *o += u[(i, j)] * p;
            }
        }
        state_concurrence(&out)
    };
    let mut starts: Vec<([f64; 4], f64)> = (0..400)
        .map(|_| {
            let x = [
                rng.gen::<f64>() * std::f64::consts::PI,
                rng.gen::<f64>() * 2.0 * std::f64::consts::PI,
                rng.gen::<f64>() * std::f64::consts::PI,
                rng.gen::<f64>() * 2.0 * std::f64::consts::PI,
            ];
            (x, f(&x))
        })
        .collect();
    starts.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let mut best: f64 = 0.0;
    for (mut x, mut v) in starts.into_iter().take(6) {
        let mut step = 0.3;
        while step > 1e-7 {
            let mut improved = false;
            for k in 0..4 {
                for s in [step, -step] {
                    let mut y = x;
                    y[k] += s;
                    let fy = f(&y);
                    if fy > v {
                        x = y;
                        v = fy;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(v);
    }
    best
}

#[test]
fn criterion_4_gate_geometry_oracles() {
    let started = Instant::now();
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    let table: [(&str, CMatrix, [f64; 3]); 7] = [
        ("identity", identity4(), [0.0, 0.0, 0.0]),
        ("cnot", cnot(), [FRAC_PI_2, 0.0, 0.0]),
        ("cphase", cphase(), [FRAC_PI_2, 0.0, 0.0]),
        ("iswap", iswap(), [FRAC_PI_2, FRAC_PI_2, 0.0]),
        ("sqrt_iswap", sqrt_iswap(), [FRAC_PI_4, FRAC_PI_4, 0.0]),
        ("swap", swap(), [FRAC_PI_2, FRAC_PI_2, FRAC_PI_2]),
        ("bgate", bgate(), [FRAC_PI_2, FRAC_PI_4, 0.0]),
    ];
    let mut coord_err: f64 = 0.0;
    for (_, u, expected) in &table {
        let w = weyl_coordinates(u).unwrap().as_array();
        for k in 0..3 {
            coord_err = coord_err.max((w[k] - expected[k]).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut conc_err: f64 = 0.0;
    for _ in 0..100 {
        let u = haar_unitary(&mut rng, 4);
        let analytic = gate_concurrence(&weyl_coordinates(&u).unwrap());
        let brute = brute_force_concurrence(&u, &mut rng);
        conc_err = conc_err.max((analytic - brute).abs());
    }
    let mut inv_err: f64 = 0.0;
    for _ in 0..200 {
        let u = haar_unitary(&mut rng, 4);
        let v = random_local(&mut rng) * &u * random_local(&mut rng);
        let a = local_invariants(&u).unwrap().as_array();
        let b = local_invariants(&v).unwrap().as_array();
        for k in 0..3 {
            inv_err = inv_err.max((a[k] - b[k]).abs());
        }
    }
    let pass = coord_err < 1e-8 && conc_err < 1e-3 && inv_err < 1e-10;
    report(
        4,
        "gate geometry",
        pass,
        &format!(
            "named-gate coordinate error {coord_err:.1e}; concurrence vs brute force {conc_err:.1e}; invariant drift {inv_err:.1e}; {:.1} s",
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5

/// Unitary `exp(i·δ·H)` with `H` a random Hermitian matrix.
fn near_identity(rng: &mut ChaCha8Rng, delta: f64) -> CMatrix {
    let g = haar_unitary(rng, 4) * c(rng.gen::<f64>(), 0.0);
    let h = (&g + g.adjoint()) * c(0.5, 0.0);
    let (vals, vecs) = hermitian_eigen(&h);
    let phases: Vec<C64> = vals.iter().map(|x| C64::from_polar(1.0, delta * x)).collect();
    &vecs * CMatrix::from_diagonal(&phases.into()) * vecs.adjoint()
}

/// Random CPTP channel close to `target`: `(1 − p) V·V† + p Σ K·K†`, with
/// `V` a perturbed target and `Σ K†K = 1`.
fn noisy_map(rng: &mut ChaCha8Rng, target: &CMatrix) -> DynamicalMap {
    let p = 0.02 + 0.08 * rng.gen::<f64>();
    let v = target * near_identity(rng, 0.3);
    let gs: Vec<CMatrix> = (0..3).map(|_| haar_unitary(rng, 4) * c(rng.gen::<f64>(), 0.0)).collect();
    let s = gs.iter().fold(CMatrix::zeros(4, 4), |acc, g| acc + g.adjoint() * g);
    let (vals, vecs) = hermitian_eigen(&s);
    let inv_sqrt = &vecs * CMatrix::from_diagonal(&vals.iter().map(|x| c(1.0 / x.sqrt(), 0.0)).collect::<Vec<_>>().into()) * vecs.adjoint();
    let kraus: Vec<CMatrix> = gs.iter().map(|g| g * &inv_sqrt).collect();
    let mut ops = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let x = CMatrix::from_fn(4, 4, |a, b| if a == i && b == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
            let mut y = &v * &x * v.adjoint() * c(1.0 - p, 0.0);
            for k in &kraus {
                y += k * &x * k.adjoint() * c(p, 0.0);
            }
            ops.push(y);
        }
    }
    DynamicalMap { ops }
}

/// Leakage `W·diag(s)·W†` with `s ∈ [lo, 1]`.
fn damping(rng: &mut ChaCha8Rng, lo: f64) -> CMatrix {
    let w = haar_unitary(rng, 4);
    let s: Vec<C64> = (0..4).map(|_| c(lo + (1.0 - lo) * rng.gen::<f64>(), 0.0)).collect();
    &w * CMatrix::from_diagonal(&s.into()) * w.adjoint()
}

/// Haar average of `f` over pure states, with its standard error.
fn haar_average(rng: &mut ChaCha8Rng, samples: usize, f: impl Fn(&[C64]) -> f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..samples).map(|_| f(&haar_state(rng, 4))).collect();
    let mean = xs.iter().sum::<f64>() / samples as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    (mean, (var / samples as f64).sqrt())
}

#[test]
fn criterion_5_closest_unitary_and_fidelity_oracles() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut beaten = 0usize;
    for _ in 0..100 {
        let u = random_contraction(&mut rng, 4, 0.2);
        let d = frobenius(&(&u - closest_unitary(&u).unwrap()));
        if (0..1000).all(|_| d < frobenius(&(&u - haar_unitary(&mut rng, 4)))) {
            beaten += 1;
        }
    }
    let mut map_err: f64 = 0.0;
    let mut gate_err: f64 = 0.0;
    let mut std_err: f64 = 0.0;
    for _ in 0..10 {
        let o = haar_unitary(&mut rng, 4);
        let map = noisy_map(&mut rng, &o);
        let formula = avg_gate_fidelity_map(&map, &o).unwrap();
        let od = o.adjoint();
        let (mc, se) = haar_average(&mut rng, 100_000, |psi| {
            let mut rho = CMatrix::zeros(4, 4);
            for i in 0..4 {
                for j in 0..4 {
                    rho += map.get(i, j) * (psi[i] * psi[j].conj());
                }
            }
            let t = &od * rho * &o;
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..4 {
                for b in 0..4 {
                    acc += psi[a].conj() * t[(a, b)] * psi[b];
                }
            }
            acc.re
        });
        map_err = map_err.max((formula - mc).abs());
        std_err = std_err.max(se);

        let u = &o * near_identity(&mut rng, 0.3) * damping(&mut rng, 0.9);
        let closed = avg_gate_fidelity(&u, &o).unwrap();
        let m = &od * &u;
        let (mc, se) = haar_average(&mut rng, 100_000, |psi| {
            let mut amp = C64::new(0.0, 0.0);
            for a in 0..4 {
                for b in 0..4 {
                    amp += psi[a].conj() * m[(a, b)] * psi[b];
                }
            }
            amp.norm_sqr()
        });
        gate_err = gate_err.max((closed - mc).abs());
        std_err = std_err.max(se);
    }
    let pass = beaten == 100 && map_err < 1e-3 && gate_err < 1e-3;
    report(
        5,
        "closest unitary and F_avg",
        pass,
        &format!(
            "closest unitary won {beaten}/100; map formula vs Monte Carlo {map_err:.1e}; gate formula vs Monte Carlo {gate_err:.1e} (largest standard error {std_err:.1e}); {:.1} s",
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6

fn two_level(detuning: f64) -> (Generator, LogicalBasis) {
    let z = c(0.0, 0.0);
    let h0 = CMatrix::from_row_slice(2, 2, &[z, z, z, c(detuning, 0.0)]);
    let hx = CMatrix::from_row_slice(2, 2, &[z, c(0.5, 0.0), c(0.5, 0.0), z]);
    let hy = CMatrix::from_row_slice(2, 2, &[z, c(0.0, -0.5), c(0.0, 0.5), z]);
    let g = Generator::new(&h0, &hx, &hy).unwrap();
    let basis = LogicalBasis { vectors: vec![vec![c(1.0, 0.0), z], vec![z, c(1.0, 0.0)]], energies: vec![0.0, detuning] };
    (g, basis)
}

fn small_params() -> SystemParams {
    SystemParams { n_transmon: 3, n_cavity: 3, ..SystemParams::reference() }
}

#[test]
fn criterion_6_optimizer_correctness() {
    let started = Instant::now();
    let pcfg = PropagatorConfig::default();
    let sigma_x = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);

    // (a) monotonic decrease on a transmon problem, for all three functionals
    let p = small_params();
    let setup = DriveSetup::new(&p, p.omega_r, &pcfg).unwrap();
    let grid = TimeGrid::span(ns(20.0), 200).unwrap();
    let start = blackman_pulse(grid, mhz(150.0), p.omega_r).unwrap();
    let mut worst_increase = f64::NEG_INFINITY;
    let mut accepted = 0usize;
    for objective in [
        Objective::PerfectEntangler,
        Objective::LocalInvariants(local_invariants(&identity4()).unwrap()),
        Objective::Overlap(bgate()),
    ] {
        let problem = KrotovProblem { generator: &setup.generator, basis: &setup.basis, objective: &objective, cfg: pcfg };
        let opts = KrotovOptions { iter_max: 8, t_rise: ns(2.0), min_improvement: 0.0, ..Default::default() };
        let r = krotov(&problem, &start, &opts, &Sequential).unwrap();
        accepted += r.log.len() - 1;
        for w in r.log.windows(2) {
            worst_increase = worst_increase.max(w[1].total - w[0].total);
        }
    }
    let a = worst_increase <= 1e-10;

    // (b) first update against the finite-difference gradient
    let (g, basis) = two_level(0.7);
    let objective = Objective::Overlap(sigma_x.clone());
    let problem = KrotovProblem { generator: &g, basis: &basis, objective: &objective, cfg: pcfg };
    let grid = TimeGrid::span(6.0, 60).unwrap();
    let mut start = blackman_pulse(grid, 0.5, 0.0).unwrap();
    for (k, s) in start.samples.iter_mut().enumerate() {
        *s += c(0.0, 0.1 * (k as f64 * 0.3).sin());
    }
    let lambda = 1e4;
    let t_rise = 1.0;
    let opts = KrotovOptions { lambda_a: lambda, iter_max: 1, t_rise, min_improvement: 0.0, ..Default::default() };
    let r = krotov(&problem, &start, &opts, &Sequential).unwrap();
    let shape = flattop_shape(&grid, t_rise);
    let f = |q: &ControlPulse| problem.evaluate(q, &Sequential).unwrap().1.total;
    let h = 1e-6;
    let dt = grid.dt();
    let mut fd = Vec::new();
    let mut step = Vec::new();
    for k in 0..grid.n_steps {
        if shape[k] < 1e-3 {
            continue;
        }
        for unit in [c(1.0, 0.0), c(0.0, 1.0)] {
            let mut up = start.clone();
            up.samples[k] += unit * h;
            let mut down = start.clone();
            down.samples[k] -= unit * h;
            fd.push((f(&up) - f(&down)) / (2.0 * h));
            let delta = r.pulse.samples[k] - start.samples[k];
            let d = if unit.re == 1.0 { delta.re } else { delta.im };
            // Δε = −S/(2 dt λ) ∂J/∂ε
            step.push(-d * 2.0 * dt * lambda / shape[k]);
        }
    }
    let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let grad_err = fd.iter().zip(&step).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
    let b = grad_err < 1e-3;

    // (c) two-level benchmark
    let (g, basis) = two_level(0.0);
    let problem = KrotovProblem { generator: &g, basis: &basis, objective: &objective, cfg: pcfg };
    let start = blackman_pulse(TimeGrid::span(10.0, 200).unwrap(), 0.2, 0.0).unwrap();
    let opts = KrotovOptions { lambda_a: 2.0, iter_max: 100, t_rise: 1.0, min_improvement: 0.0, ..Default::default() };
    let r = krotov(&problem, &start, &opts, &Sequential).unwrap();
    let iters = r.log.iter().position(|it| it.total < 1e-4);
    let cc = iters.is_some_and(|i| i <= 100);

    // (d) stage-1 SQ functional in the uncoupled system
    let mut q = small_params();
    q.g = 0.0;
    q.gamma = 0.0;
    q.kappa = 0.0;
    let goal = OptimizationGoal::new(GoalKind::MinimizeEntanglement, ns(20.0)).unwrap();
    let mut cfg = PipelineConfig { time_step_ns: 0.5, ..Default::default() };
    cfg.stage1.n_freq_samples = 6;
    cfg.stage1.n_amplitudes = 4;
    let scan = stage1_scan(&q, &goal, &cfg, &Sequential).unwrap();
    let best = scan.candidates.first().map_or(f64::NAN, |s| s.value);
    let d = best.abs() < 1e-12;

    let pass = a && b && cc && d;
    report(
        6,
        "optimizer",
        pass,
        &format!(
            "(a) {accepted} accepted iterations, worst increase {worst_increase:.1e}; (b) first update vs FD gradient {grad_err:.1e}; (c) J < 1e-4 after {iters:?} iterations; (d) best stage-1 SQ value {best:.1e}; {:.1} s",
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7

#[test]
#[ignore = "slow: desk-scale landscape miniature, hours on one core"]
fn criterion_7_landscape_miniature() {
    let started = Instant::now();
    let base = SystemParams::reference();
    let mut pipeline = PipelineConfig { time_step_ns: 0.2, ..Default::default() };
    pipeline.evaluation = EvaluationConfig { lindblad: false, no_dissipation: false };
    pipeline.stage1.n_freq_samples = 18;
    pipeline.stage1.n_amplitudes = 10;
    pipeline.stage2.top_k = 1;
    pipeline.stage2.max_evals = 40;
    pipeline.stage3.iter_max = 30;
    pipeline.stage3.lambda_a_ns = 0.5;
    let cfg = LandscapeConfig {
        grid: GridSpec::window(&base, 5, 5),
        durations_ns: vec![200.0],
        goals: vec!["pe".into(), "sq".into()],
        seed: 7,
        skip_ambiguous: false,
        pipeline,
    };
    let dir = tempfile::tempdir().unwrap();
    let exec = Parallel::new(cqed::exec::available_workers()).unwrap();
    let mut store = RecordStore::open(&dir.path().join("records.jsonl")).unwrap();
    entanglement_map(dir.path(), &base, &cfg, &mut store, &exec, exec.workers(), None, false).unwrap();
    let frac = |goal: &str, ok: &dyn Fn(f64) -> bool| {
        let rs: Vec<_> = store.records().iter().filter(|r| r.goal == goal).collect();
        rs.iter().filter(|r| r.concurrence.is_some_and(ok)).count() as f64 / rs.len() as f64
    };
    let pe = frac("pe", &|c| c > 0.9);
    let sq = frac("sq", &|c| c < 0.05);
    let pass = pe >= 0.6 && sq >= 0.6;
    report(
        7,
        "landscape miniature",
        pass,
        &format!("C_PE > 0.9 at {:.0}% of points, C_SQ < 0.05 at {:.0}%; {:.0} s", 100.0 * pe, 100.0 * sq, started.elapsed().as_secs_f64()),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8

#[test]
#[ignore = "slow: full pipeline and master-equation evaluation at full truncation"]
fn criterion_8_local_gate_at_reference_point() {
    let started = Instant::now();
    let p = SystemParams::reference();
    let goal = OptimizationGoal::new(GoalKind::SpecificGate { target: h_x_1(), up_to_local: false }, ns(50.0)).unwrap();
    let exec = Parallel::new(cqed::exec::available_workers()).unwrap();
    let mut cfg = PipelineConfig { time_step_ns: 0.2, ..Default::default() };
    cfg.stage3.iter_max = 2000;
    cfg.stage3.lambda_a_ns = 0.05;
    let o = run_pipeline(&p, &goal, &cfg, &exec).unwrap();
    let ops = build_operators(&p).unwrap();
    let frame = diagonalize_and_assign(&ops).unwrap();
    let dressed_bound = lifetime_error_bound(p.gamma, ns(50.0)) * dressed_decay_ratio(&frame, &ops).unwrap();
    let no_diss = o.eps_avg_no_dissipation.unwrap_or(f64::NAN);
    let eps = o.report.eps_avg.unwrap_or(f64::NAN);
    let pass = no_diss <= 1e-2 && eps <= 2.0 * dressed_bound;
    report(
        8,
        "H x 1 at the reference point",
        pass,
        &format!(
            "{} Krotov iterations; eps_avg without dissipation {no_diss:.3e}, with dissipation {eps:.3e} ({:.2}x dressed bound {dressed_bound:.3e}); {:.0} s",
            o.stage3.log.len() - 1,
            eps / dressed_bound,
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 9

fn tiny_landscape(base: &SystemParams) -> LandscapeConfig {
    let mut pipeline = PipelineConfig { time_step_ns: 0.5, ..Default::default() };
    pipeline.stage1.n_freq_samples = 3;
    pipeline.stage1.n_amplitudes = 3;
    pipeline.stage2.top_k = 1;
    pipeline.stage2.max_evals = 6;
    pipeline.stage3.iter_max = 2;
    LandscapeConfig {
        grid: GridSpec::window(base, 2, 2),
        durations_ns: vec![10.0],
        goals: vec!["pe".into(), "sq".into()],
        seed: 99,
        skip_ambiguous: false,
        pipeline,
    }
}

fn run_into(dir: &Path, base: &SystemParams, cfg: &LandscapeConfig, workers: usize, chunk: usize) -> String {
    let exec = Parallel::new(workers).unwrap();
    let mut store = RecordStore::open(&dir.join("records.jsonl")).unwrap();
    entanglement_map(dir, base, cfg, &mut store, &exec, chunk, None, false).unwrap();
    std::fs::read_to_string(dir.join("records.jsonl")).unwrap()
}

#[test]
fn criterion_9_determinism_and_resumability() {
    let started = Instant::now();
    let base = small_params();
    let cfg = tiny_landscape(&base);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c_dir = tempfile::tempdir().unwrap();
    let full = run_into(a.path(), &base, &cfg, 1, 1);
    let other = run_into(b.path(), &base, &cfg, 2, 3);
    let same_workers = full == other;
    let pulses_same = std::fs::read_dir(a.path().join("pulses")).unwrap().all(|e| {
        let e = e.unwrap();
        std::fs::read(e.path()).ok() == std::fs::read(b.path().join("pulses").join(e.file_name())).ok()
    });

    // interrupted run: three whole records plus a torn fourth line
    let lines: Vec<&str> = full.lines().collect();
    let torn = format!("{}\n{}", lines[..3].join("\n"), &lines[3][..lines[3].len() / 2]);
    std::fs::create_dir_all(c_dir.path().join("pulses")).unwrap();
    std::fs::write(c_dir.path().join("records.jsonl"), torn).unwrap();
    let resumed = run_into(c_dir.path(), &base, &cfg, 1, 2);
    let resume_same = resumed == full;

    // a rerun on a complete store has nothing to do
    let exec = Parallel::new(1).unwrap();
    let mut store = RecordStore::open(&a.path().join("records.jsonl")).unwrap();
    let summary = entanglement_map(a.path(), &base, &cfg, &mut store, &exec, 1, None, false).unwrap();
    let nothing_new = summary.ran == 0 && summary.already_done == lines.len();

    // stored C reproducible from the pulse file
    let mut worst: f64 = 0.0;
    for r in store.records().iter().filter(|r| r.status == Status::Done) {
        let rep = reevaluate(a.path(), &base, r, &cfg.pipeline).unwrap();
        worst = worst.max((rep.concurrence.unwrap() - r.concurrence.unwrap()).abs());
    }
    let done = store.records().iter().filter(|r| r.status == Status::Done).count();
    let pass = same_workers && pulses_same && resume_same && nothing_new && worst < 1e-9 && done == lines.len();
    report(
        9,
        "determinism and resume",
        pass,
        &format!(
            "{} records; identical across worker counts: {same_workers}; pulses identical: {pulses_same}; resumed identical: {resume_same}; rerun idle: {nothing_new}; C re-evaluation drift {worst:.1e}; {:.1} s",
            lines.len(),
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

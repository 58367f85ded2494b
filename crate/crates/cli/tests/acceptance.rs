//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the twelve lines are always
//! printed; the process exits nonzero when any criterion fails.

use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_4, PI};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use equiflow::{cmd_run, RunOptions};
use equiflow_core::flow::{self, Family, FlowConfig, FlowState, RunResult, Status, StepOutcome};
use equiflow_core::geometry::{self, Clustering, MonitorWeight};
use equiflow_core::monitors::{self, DiagnosticsFrame, MonitorSettings};
use equiflow_core::monotonicity::{self, KernelSpec, Point2};
use equiflow_core::singularity::{self, SingularityReport, TimeEstimate};
use equiflow_core::{CurveSnapshot, Executor, Mode, C64};

// 1
const CIRCLE_T_TOL: f64 = 2.5e-4;
const CIRCLE_R_TOL: f64 = 1e-4;
const CIRCLE_R_HORIZON: f64 = 0.2;
// 2
const STATIONARY_STEPS: usize = 1000;
const STATIONARY_SPEED_TOL: f64 = 1e-4;
const STATIONARY_RATIO: f64 = 3.5;
/// Node placement of the stationary check: log-polar equidistribution with a
/// stronger curvature weight than the run default.
const STATIONARY_GAIN: f64 = 4.0;
// 3
const THETA_SLACK: f64 = 1e-6;
const RADIAL_SPEED_TOL: f64 = 1e-8;
// 4
const BRANCH_ANGLE_TOL: f64 = 0.05;
const BRANCH_STABILITY_TOL: f64 = 0.02;
const SCALES: [f64; 3] = [200.0, 300.0, 500.0];
const TAU: f64 = -1.0;
const BALL_RADIUS: f64 = 4.0;
// 5
const MONOTONE_SLACK: f64 = 1e-8;
const TORUS_DENSITY_TOL: f64 = 1e-3;
// 6
const AREA_LAW_TOL: f64 = 1e-3;
const AREA_T0_TOL: f64 = 1e-6;
const EPSILONS: [f64; 2] = [0.2, 0.3];
/// Horizon of the N = 1024 area-law runs: stop once min|γ| reaches this.
const AREA_HORIZON_RADIUS: f64 = 0.2;
const AREA_HORIZON_T: f64 = 1.0;
// 7
const SYMMETRY_TOL: f64 = 1e-8;
// 8
const MIN_ORDER: f64 = 1.8;
const ORDER_T: f64 = 1.0;
// 9
const COAREA_TOL: f64 = 1e-6;
// 10
const CIRCLE_SHRINKER_TOL: f64 = 1e-10;

const SINGULAR_BETA: f64 = 3.0 * FRAC_PI_4;
const SINGULAR_NODES: usize = 512;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = Result<Outcome, String>;

fn outcome(pass: bool, detail: String) -> Check {
    Ok(Outcome { pass, detail })
}

fn settings() -> MonitorSettings {
    MonitorSettings::default()
}

fn open(beta: f64, nodes: usize) -> FlowConfig {
    FlowConfig { beta, nodes, t_end: 10.0, ..FlowConfig::default() }
}

fn run(cfg: &FlowConfig) -> Result<RunResult, String> {
    flow::run(cfg, &settings()).map_err(|e| e.to_string())
}

fn frames(r: &RunResult) -> impl Iterator<Item = &DiagnosticsFrame> {
    r.ticks.iter().map(|t| &t.frame)
}

fn snapshots(r: &RunResult) -> Vec<CurveSnapshot> {
    r.ticks.iter().map(|t| t.snapshot.clone()).collect()
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

// Shared runs, computed on first use.

struct Singular {
    run: RunResult,
    estimate: TimeEstimate,
    report: Result<SingularityReport, String>,
}

fn singular() -> &'static Result<Singular, String> {
    static CELL: OnceLock<Result<Singular, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let run = run(&open(SINGULAR_BETA, SINGULAR_NODES))?;
        let estimate =
            singularity::estimate_t(&run.state.history, run.state.status == Status::BlowupDetected).map_err(|e| e.to_string())?;
        let report = monotonicity::extract_rescaled_sequence(&snapshots(&run), C64::new(0.0, 0.0), estimate.t_hat, &SCALES, TAU)
            .and_then(|seq| singularity::tangent_flow_report(&seq, BALL_RADIUS))
            .map_err(|e| e.to_string());
        Ok(Singular { run, estimate, report })
    })
}

fn circle() -> &'static Result<RunResult, String> {
    static CELL: OnceLock<Result<RunResult, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut cfg =
            FlowConfig { family: Family::Circle { r0: 1.0 }, mode: Mode::ClosedRadial, nodes: 512, ..FlowConfig::default() };
        cfg.cadence.every_steps = 200;
        run(&cfg)
    })
}

fn expander() -> &'static Result<RunResult, String> {
    static CELL: OnceLock<Result<RunResult, String>> = OnceLock::new();
    CELL.get_or_init(|| run(&FlowConfig { t_end: 1.0, ..open(FRAC_PI_4, 256) }))
}

/// The β ∈ {3π/4, π} runs at N = 1024 over the bounded horizon.
fn area_runs() -> &'static Result<Vec<(f64, RunResult)>, String> {
    static CELL: OnceLock<Result<Vec<(f64, RunResult)>, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        [SINGULAR_BETA, PI]
            .into_iter()
            .map(|beta| {
                let mut cfg = FlowConfig { t_end: AREA_HORIZON_T, ..open(beta, 1024) };
                cfg.stop.min_dist_tol = AREA_HORIZON_RADIUS;
                run(&cfg).map(|r| (beta, r))
            })
            .collect()
    })
}

/// β = 3π/4 to t = 1 at N = 256 and 512; N = 1024 is shared with the
/// area-law runs.
fn order_runs() -> &'static Result<Vec<RunResult>, String> {
    static CELL: OnceLock<Result<Vec<RunResult>, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut out = Vec::new();
        for n in [256, 512] {
            out.push(run(&FlowConfig { t_end: ORDER_T, ..open(SINGULAR_BETA, n) })?);
        }
        Ok(out)
    })
}

fn open_runs() -> Result<Vec<(&'static str, &'static RunResult)>, String> {
    let mut v: Vec<(&str, &RunResult)> = vec![("3π/4 N=512", &singular().as_ref()?.run), ("π/4", expander().as_ref()?)];
    for (beta, r) in area_runs().as_ref()? {
        v.push((if *beta == PI { "π N=1024" } else { "3π/4 N=1024" }, r));
    }
    for r in order_runs().as_ref()? {
        v.push(("3π/4 to t=1", r));
    }
    Ok(v)
}

// Criteria.

fn shrinking_torus() -> Check {
    let r = circle().as_ref()?;
    if r.state.status != Status::BlowupDetected {
        return outcome(false, format!("status {}", r.state.status.as_str()));
    }
    let est = singularity::estimate_t(&r.state.history, true).map_err(|e| e.to_string())?;
    let t_err = (est.t_hat - 0.25).abs();
    let r_err = r
        .ticks
        .iter()
        .filter(|t| t.snapshot.t() <= CIRCLE_R_HORIZON)
        .map(|t| {
            let exact = (1.0 - 4.0 * t.snapshot.t()).sqrt();
            sup(t.snapshot.values().iter().map(|v| v - exact))
        })
        .fold(0.0, f64::max);
    let sampled = r.ticks.iter().filter(|t| t.snapshot.t() <= CIRCLE_R_HORIZON).count();
    outcome(
        t_err <= CIRCLE_T_TOL && r_err <= CIRCLE_R_TOL && sampled >= 10,
        format!("|T̂ − 1/4| = {t_err:.2e} (≤ {CIRCLE_T_TOL:.1e}); max |r − √(1−4t)| = {r_err:.2e} over {sampled} frames (≤ {CIRCLE_R_TOL:.0e})"),
    )
}

/// Largest normal speed over `steps` CFL steps from the stationary profile.
fn stationary_speed(nodes: usize) -> Result<f64, String> {
    let cfg = FlowConfig {
        nodes,
        clustering: Some(Clustering::Equidistributed { weight: MonitorWeight::LogPolar, curvature_gain: STATIONARY_GAIN }),
        // nothing moves, so nothing to track; a regrid toward the default
        // monitor would only inject interpolation error
        regrid: None,
        ..open(FRAC_PI_2, nodes)
    };
    let mut state = FlowState::new(cfg.initial_snapshot().map_err(|e| e.to_string())?);
    let mut worst = 0.0f64;
    for _ in 0..STATIONARY_STEPS {
        worst = worst.max(sup(geometry::normal_speeds(&state.snapshot).map_err(|e| e.to_string())?));
        let dt = flow::adaptive_dt(&state.snapshot, &cfg.dt).map_err(|e| e.to_string())?.dt;
        match flow::step(&mut state, &cfg, dt).map_err(|e| e.to_string())? {
            StepOutcome::Accepted { .. } => {}
            StepOutcome::Exhausted => return Err("step rejected".into()),
        }
    }
    Ok(worst.max(sup(geometry::normal_speeds(&state.snapshot).map_err(|e| e.to_string())?)))
}

fn special_lagrangian() -> Check {
    let (coarse, fine) = (stationary_speed(256)?, stationary_speed(512)?);
    let ratio = coarse / fine;
    outcome(
        fine <= STATIONARY_SPEED_TOL && ratio >= STATIONARY_RATIO,
        format!(
            "sup v_n = {fine:.3e} at N=512 (≤ {STATIONARY_SPEED_TOL:.0e}); N=256→512 ratio {ratio:.2} (≥ {STATIONARY_RATIO})"
        ),
    )
}

fn singular_origin() -> Check {
    let s = singular().as_ref()?;
    let r = &s.run;
    let Some(ev) = r.state.event else {
        return outcome(false, format!("status {}", r.state.status.as_str()));
    };
    let params = r.state.snapshot.params();
    let middle = (0..params.len())
        .min_by(|&a, &b| (params[a] - 0.5 * SINGULAR_BETA).abs().total_cmp(&(params[b] - 0.5 * SINGULAR_BETA).abs()))
        .unwrap();
    let tol = open(SINGULAR_BETA, SINGULAR_NODES).stop.min_dist_tol;
    let at_origin = ev.location.norm() <= tol && ev.node == middle;
    let theta_low = frames(r).map(|f| PI - f.theta_min.unwrap_or(f64::NAN)).fold(f64::NEG_INFINITY, f64::max);
    let theta_high = frames(r).map(|f| f.theta_max.unwrap_or(f64::NAN) - 2.0 * SINGULAR_BETA).fold(f64::NEG_INFINITY, f64::max);
    let speed = frames(r).map(|f| f.max_radial_speed.unwrap_or(f64::NAN)).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        r.state.status == Status::BlowupDetected
            && at_origin
            && theta_low <= THETA_SLACK
            && theta_high <= THETA_SLACK
            && speed <= RADIAL_SPEED_TOL,
        format!(
            "{} at t = {:.5}, |x| = {:.1e} (≤ {tol:.0e}), node {} (middle {middle}); θ below π by ≤ {:.1e}, above 2β by ≤ {:.1e}; max dr/dt = {speed:.1e} over {} frames",
            r.state.status.as_str(),
            ev.t,
            ev.location.norm(),
            ev.node,
            theta_low.max(0.0),
            theta_high.max(0.0),
            r.ticks.len()
        ),
    )
}

fn branch_angles() -> Check {
    let s = singular().as_ref()?;
    let report = s.report.as_ref()?;
    let target = singularity::symmetric_branch_angle(SINGULAR_BETA);
    let measured: Vec<f64> = report.branches.iter().map(|b| b.mean_angle).collect();
    let deviation = measured.iter().map(|a| (a - target).abs()).fold(0.0, f64::max);
    let per_scale: Vec<Vec<f64>> = report
        .scales
        .iter()
        .map(|sc| sc.branches.as_ref().map_or_else(Vec::new, |b| b.iter().map(|b| b.mean_angle).collect()))
        .collect();
    let consistent = per_scale.iter().all(|v| v.len() == 2);
    let spread = if consistent {
        (0..2)
            .map(|k| {
                let v: Vec<f64> = per_scale.iter().map(|s| s[k]).collect();
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    outcome(
        measured.len() == 2 && consistent && deviation <= BRANCH_ANGLE_TOL && spread <= BRANCH_STABILITY_TOL,
        format!(
            "{} branches at σ = {SCALES:?}, θ = {measured:.4?} vs π/2 + β = {target:.4} (dev {deviation:.3} ≤ {BRANCH_ANGLE_TOL}); spread over scales {spread:.3} (≤ {BRANCH_STABILITY_TOL}); β/2 = {:.4} recorded, not checked",
            measured.len(),
            0.5 * SINGULAR_BETA
        ),
    )
}

/// Largest increase beyond the allowance, for density and moment.
fn monotone_excess(traj: &[CurveSnapshot], kernel: &KernelSpec) -> Result<(f64, f64, usize), String> {
    let rows = monotonicity::density_series(traj, kernel, Executor::default()).map_err(|e| e.to_string())?;
    let excess = |get: &dyn Fn(&monotonicity::DensityRow) -> (f64, f64)| {
        rows.windows(2)
            .map(|w| {
                let ((a, ea), (b, eb)) = (get(&w[0]), get(&w[1]));
                b - a - MONOTONE_SLACK - ea - eb
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok((excess(&|r| (r.density.value, r.density.error)), excess(&|r| (r.moment.value, r.moment.error)), rows.len()))
}

fn huisken_monotonicity() -> Check {
    let origin = Point2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let s = singular().as_ref()?;
    let c = circle().as_ref()?;
    let c_est = singularity::estimate_t(&c.state.history, true).map_err(|e| e.to_string())?;
    let ex = expander().as_ref()?;
    let cases = [
        ("3π/4", snapshots(&s.run), s.estimate.t_hat),
        ("circle", snapshots(c), c_est.t_hat),
        ("π/4", snapshots(ex), ex.state.snapshot.t() + 1.0),
    ];
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for (name, traj, t) in &cases {
        let (d, m, n) = monotone_excess(traj, &KernelSpec { center: origin, t: *t })?;
        worst = worst.max(d).max(m);
        parts.push(format!("{name}: {n} frames, excess {:.1e}", d.max(m)));
    }
    let torus = 4.0 * PI / E;
    let rows = monotonicity::density_series(&snapshots(c), &KernelSpec { center: origin, t: c_est.t_hat }, Executor::default())
        .map_err(|e| e.to_string())?;
    let dev = sup(rows.iter().map(|r| r.density.value - torus));
    let (lo, hi) =
        rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r.density.value), h.max(r.density.value)));
    outcome(
        worst <= 0.0 && dev <= TORUS_DENSITY_TOL && hi - lo <= TORUS_DENSITY_TOL,
        format!("increase beyond 1e-8 + error bars ≤ 0 ({}); torus |Θ − 4π/e| ≤ {dev:.1e}, variation {:.1e} (≤ {TORUS_DENSITY_TOL:.0e})", parts.join("; "), hi - lo),
    )
}

fn area_law() -> Check {
    let runs = area_runs().as_ref()?;
    let mut residual: f64 = 0.0;
    let mut bound_ok = true;
    let mut violations = Vec::new();
    let mut derived_margin = f64::NEG_INFINITY;
    for (beta, r) in runs {
        // each frame differences its one-step companion pair
        residual = residual.max(frames(r).filter_map(|f| f.area_law_residual).fold(0.0, f64::max));
        let traj = snapshots(r);
        for eps in EPSILONS {
            let bound = monitors::area_rate_bound(*beta, eps);
            let mut worst = f64::NEG_INFINITY;
            for s in &traj {
                let d = monitors::angle_difference(s, eps).map_err(|e| e.to_string())?;
                // equality is the exact value at t = 0 for β = π
                let ok = if s.t() == 0.0 && *beta == PI { d <= bound + AREA_T0_TOL } else { d < bound };
                bound_ok &= ok;
                worst = worst.max(d - bound);
                // bound obtained from 2φ < θ < 2φ + π at both ends
                derived_margin = derived_margin.max(d - (PI + 4.0 * eps - 2.0 * beta));
            }
            if worst > 0.0 {
                violations.push(format!("β={beta:.4} ε={eps}: exceeds by {worst:.3}"));
            }
        }
    }
    let pi_run = &runs.iter().find(|(b, _)| *b == PI).ok_or("no β = π run")?.1;
    let t0 = &pi_run.ticks[0].snapshot;
    let mut t0_err: f64 = 0.0;
    for eps in EPSILONS {
        let d = monitors::angle_difference(t0, eps).map_err(|e| e.to_string())?;
        t0_err = t0_err.max((d - (2.0 * eps - PI)).abs());
    }
    let frames: usize = runs.iter().map(|(_, r)| r.ticks.len()).sum();
    outcome(
        residual <= AREA_LAW_TOL && bound_ok && t0_err <= AREA_T0_TOL,
        format!(
            "N=1024, {frames} frames to min|γ| = {AREA_HORIZON_RADIUS} or t = {AREA_HORIZON_T}: residual {residual:.2e} (≤ {AREA_LAW_TOL:.0e}); bound π+2ε−2β {}; β=π t=0 |Δθ − (2ε−π)| = {t0_err:.1e} (≤ {AREA_T0_TOL:.0e}); margin to π+4ε−2β {derived_margin:.3}",
            if bound_ok { "holds".to_string() } else { format!("violated ({})", violations.join(", ")) }
        ),
    )
}

fn sturmian_and_shape() -> Check {
    let mut bad = Vec::new();
    let (mut frames_seen, mut symmetry) = (0usize, 0.0f64);
    for (name, r) in open_runs()? {
        for f in frames(r) {
            frames_seen += 1;
            let counts_ok = f.sturm_counts.len() == 3 && f.sturm_counts.iter().all(|c| *c == Some(1));
            let sym = f.symmetry_residual.unwrap_or(f64::INFINITY);
            symmetry = symmetry.max(sym);
            if !counts_ok || f.critical_points != Some(1) || sym > SYMMETRY_TOL {
                bad.push(format!("{name} t={:.4}", f.t));
            }
        }
    }
    outcome(
        bad.is_empty() && frames_seen > 0,
        format!(
            "{frames_seen} frames of {} open runs: counts at β/4, β/2, 3β/4 all 1, one critical point, symmetry ≤ {symmetry:.1e} (≤ {SYMMETRY_TOL:.0e}); failing frames: {}",
            open_runs()?.len(),
            if bad.is_empty() { "none".to_string() } else { format!("{} (first {})", bad.len(), bad[0]) }
        ),
    )
}

fn evolution_orders() -> Check {
    let mut runs: Vec<&RunResult> = order_runs().as_ref()?.iter().collect();
    let fine = &area_runs().as_ref()?.iter().find(|(b, _)| *b == SINGULAR_BETA).ok_or("no N=1024 run")?.1;
    if fine.state.status != Status::ReachedTEnd {
        return outcome(false, format!("N=1024 run ended {} before t = {ORDER_T}", fine.state.status.as_str()));
    }
    runs.push(fine);
    let mut res = Vec::new();
    for r in &runs {
        let last = r.ticks.last().ok_or("no frames")?;
        let prev = last.companion.as_ref().ok_or("final frame without companion")?;
        let e = monitors::evolution_residuals(prev, &last.snapshot, &settings()).map_err(|e| e.to_string())?;
        res.push([e.theta_heat, e.beta_heat, e.radial_law.unwrap_or(f64::NAN), e.cosine.unwrap_or(f64::NAN)]);
    }
    let names = ["θ-heat", "β-heat", "radial", "cosine"];
    let mut min_order = f64::INFINITY;
    let mut parts = Vec::new();
    for k in 0..4 {
        let o1 = (res[0][k] / res[1][k]).log2();
        let o2 = (res[1][k] / res[2][k]).log2();
        min_order = min_order.min(o1).min(o2);
        parts.push(format!("{} {o1:.2}/{o2:.2}", names[k]));
    }
    outcome(min_order >= MIN_ORDER, format!("orders N=256→512/512→1024 at t = {ORDER_T}: {} (≥ {MIN_ORDER})", parts.join(", ")))
}

fn coarea() -> Check {
    let mut all: Vec<&RunResult> = open_runs()?.into_iter().map(|(_, r)| r).collect();
    all.push(circle().as_ref()?);
    let (mut worst, mut n) = (0.0f64, 0usize);
    for r in all {
        for f in frames(r) {
            n += 1;
            worst = worst.max(f.coarea_residual.unwrap_or(f64::INFINITY));
        }
    }
    outcome(worst <= COAREA_TOL, format!("max residual {worst:.1e} over {n} frames of every run (≤ {COAREA_TOL:.0e})"))
}

fn shrinker() -> Check {
    // the self-similar circle of radius 2 at τ = −1
    let exact = geometry::circle(2.0, 512, -1.0).map_err(|e| e.to_string())?;
    let circle_res = monitors::shrinker_identity(&exact, 0.0).map_err(|e| e.to_string())?;
    let s = singular().as_ref()?;
    let report = s.report.as_ref()?;
    let res: Vec<f64> = report.scales.iter().map(|sc| sc.shrinker_residual.unwrap_or(f64::NAN)).collect();
    let decreasing = res.len() >= 3 && res.windows(2).all(|w| w[1] < w[0]);
    outcome(
        circle_res <= CIRCLE_SHRINKER_TOL && decreasing,
        format!("circle {circle_res:.1e} (≤ {CIRCLE_SHRINKER_TOL:.0e}); 3π/4 at σ = {SCALES:?}: [{}] strictly decreasing: {decreasing}", res.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ")),
    )
}

fn expander_regime() -> Check {
    let cfg = FlowConfig { t_end: 1.0, ..open(FRAC_PI_4, 256) };
    let r = expander().as_ref()?;
    // min|γ| after every accepted step, not just at emitted frames
    let mut state = FlowState::new(cfg.initial_snapshot().map_err(|e| e.to_string())?);
    let mut prev = flow::min_radius(&state.snapshot);
    let (mut steps, mut decreases) = (0usize, 0usize);
    while state.snapshot.t() < cfg.t_end {
        let dt = flow::adaptive_dt(&state.snapshot, &cfg.dt).map_err(|e| e.to_string())?.dt.min(cfg.t_end - state.snapshot.t());
        match flow::step(&mut state, &cfg, dt).map_err(|e| e.to_string())? {
            StepOutcome::Accepted { .. } => {}
            StepOutcome::Exhausted => return Err("step rejected".into()),
        }
        let m = flow::min_radius(&state.snapshot);
        steps += 1;
        if m.partial_cmp(&prev) != Some(std::cmp::Ordering::Greater) {
            decreases += 1;
        }
        prev = m;
    }
    outcome(
        decreases == 0 && r.state.status == Status::ReachedTEnd && r.state.event.is_none(),
        format!(
            "min|γ| {:.6} → {prev:.6} over {steps} steps, {decreases} non-increasing steps; run status {}",
            flow::min_radius(&cfg.initial_snapshot().map_err(|e| e.to_string())?),
            r.state.status.as_str()
        ),
    )
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != equiflow::run::TIMINGS) {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Check {
    let cfg = open(SINGULAR_BETA, 128);
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    cmd_run(&cfg, a.path(), &RunOptions::default()).map_err(|e| e.to_string())?;
    cmd_run(&cfg, b.path(), &RunOptions::default()).map_err(|e| e.to_string())?;
    let (x, y) = (tree(a.path()), tree(b.path()));
    let differing: Vec<&String> = x.iter().zip(&y).filter(|(p, q)| p != q).map(|(p, _)| &p.0).collect();
    let same = x.len() == y.len() && differing.is_empty();
    outcome(
        same,
        format!(
            "{} files compared byte for byte (timings.json excluded); differing: {}",
            x.len(),
            if same { "none".into() } else { format!("{differing:?}") }
        ),
    )
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("shrinking torus", shrinking_torus),
        ("special Lagrangian fixed point", special_lagrangian),
        ("singularity at the origin", singular_origin),
        ("tangent-flow branch angles", branch_angles),
        ("Huisken monotonicity", huisken_monotonicity),
        ("area law", area_law),
        ("Sturmian and shape invariants", sturmian_and_shape),
        ("evolution-identity convergence", evolution_orders),
        ("coarea identity", coarea),
        ("shrinker identity", shrinker),
        ("expander regime", expander_regime),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {name} ({:.1}s): {detail}", k + 1, started.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of 12 criteria pass", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

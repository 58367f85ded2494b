//! Post-processing of a blow-up run: singular time, Gaussian densities,
//! density ratios, the rescaled sequence and its tangent-flow report.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;
use std::time::Instant;

use equiflow_core::flow::{FlowConfig, Status};
use equiflow_core::io::{self, Cell};
use equiflow_core::monitors;
use equiflow_core::monotonicity::{self, DensityRow, KernelSpec, Point2};
use equiflow_core::singularity::{self, SingularityReport, TimeEstimate};
use equiflow_core::{CurveSnapshot, Executor, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::run::{read_json, record_timing, write_json, write_text, RunManifest, CONFIG};

pub const REPORT: &str = "report.json";
pub const DENSITY: &str = "density.csv";
pub const DENSITY_RATIO: &str = "density_ratio.csv";
pub const PROFILES: &str = "profiles.csv";
pub const RESCALED: &str = "rescaled.csv";
pub const RESCALED_DIR: &str = "rescaled";
pub const PLOT_DIR: &str = "plots";

/// Absolute slack added to the per-step density increase allowance.
pub const MONOTONE_SLACK: f64 = 1e-8;
/// Profile curves drawn in the profile plot.
const PROFILE_CURVES: usize = 16;

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub scales: Vec<f64>,
    /// Ball radius for branch detection in rescaled coordinates.
    pub radius: f64,
    /// Rescaled time at which members are taken.
    pub tau: f64,
    /// Number of δ values per snapshot in the density-ratio series.
    pub ratio_count: usize,
    pub exec: Executor,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { scales: Vec::new(), radius: 4.0, tau: -1.0, ratio_count: 8, exec: Executor::default() }
    }
}

/// Monotone-quantity summary along the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSummary {
    pub first: f64,
    pub last: f64,
    pub min: f64,
    pub max: f64,
    /// Largest increase between consecutive snapshots.
    pub max_increase: f64,
    /// Largest increase beyond the allowance `1e-8 + error bars`; ≤ 0 when
    /// the quantity is non-increasing within its quadrature error.
    pub max_excess: f64,
}

fn summarize(values: &[(f64, f64)]) -> Option<MonotoneSummary> {
    let (first, last) = (values.first()?.0, values.last()?.0);
    let mut s = MonotoneSummary {
        first,
        last,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        max_increase: f64::NEG_INFINITY,
        max_excess: f64::NEG_INFINITY,
    };
    for &(v, _) in values {
        s.min = s.min.min(v);
        s.max = s.max.max(v);
    }
    for w in values.windows(2) {
        let inc = w[1].0 - w[0].0;
        s.max_increase = s.max_increase.max(inc);
        s.max_excess = s.max_excess.max(inc - MONOTONE_SLACK - w[0].1 - w[1].1);
    }
    Some(s)
}

/// The two candidate branch angles and the measured ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchAngleCheck {
    /// π/2 + β, from integrating the angle along the symmetry axis.
    pub checked: f64,
    /// β/2, as stated for the tangent planes; recorded, not checked.
    pub alternative: f64,
    pub measured: Vec<f64>,
    pub max_deviation: f64,
    /// Largest change of any branch angle across the scales.
    pub scale_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub status: Status,
    pub time_estimate: TimeEstimate,
    pub singular_t: f64,
    /// Where the run stopped.
    pub location: C64,
    /// Center used for densities and rescaling.
    pub center: C64,
    pub torus_control: bool,
    pub maslov_winding: Option<i64>,
    pub density: Option<MonotoneSummary>,
    pub moment: Option<MonotoneSummary>,
    pub branch_angles: Option<BranchAngleCheck>,
    /// Shrinker residual at each scale, in scale order.
    pub shrinker_residuals: Vec<Option<f64>>,
    pub tangent_flow: Option<SingularityReport>,
    pub tangent_flow_error: Option<String>,
}

pub fn cmd_analyze(dir: &Path, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let started = Instant::now();
    let mut manifest = RunManifest::read(dir)?;
    if manifest.status != Status::BlowupDetected {
        return Err(CliError::NotBlowup(manifest.status.as_str().to_string()));
    }
    let config: FlowConfig = read_json(&dir.join(CONFIG))?;
    let event = manifest.event.ok_or_else(|| CliError::NotBlowup("blowup_detected without an event".into()))?;
    let traj = manifest.load_snapshots(dir)?;
    let history = crate::run::read_history_file(dir)?;
    let time_estimate = singularity::estimate_t(&history, true)?;
    let t_sing = time_estimate.t_hat;
    let center = if event.min_radius < config.stop.min_dist_tol { C64::new(0.0, 0.0) } else { event.location };

    let kernel = KernelSpec { center: Point2::new(center, C64::new(0.0, 0.0)), t: t_sing };
    let density = monotonicity::density_series(&traj, &kernel, opts.exec)?;
    let ratios = singularity::density_ratio_series(&traj, center, opts.ratio_count, opts.exec)?;

    let last = traj.last().expect("runs emit at least one snapshot");
    let maslov_winding = if last.mode().is_closed() { Some(monitors::maslov_winding(last)?.winding) } else { None };

    let mut outputs = vec![REPORT.to_string(), DENSITY.to_string(), DENSITY_RATIO.to_string(), PROFILES.to_string()];
    let plots = dir.join(PLOT_DIR);
    fs::create_dir_all(&plots).map_err(|e| CliError::io(&plots, e))?;

    let (mut tangent_flow, mut tangent_flow_error) = (None, None);
    let mut members = Vec::new();
    if !opts.scales.is_empty() {
        match monotonicity::extract_rescaled_sequence(&traj, center, t_sing, &opts.scales, opts.tau)
            .and_then(|seq| singularity::tangent_flow_report_with(&seq, opts.radius, opts.exec).map(|r| (seq, r)))
        {
            Ok((seq, mut report)) => {
                report.time_estimate = Some(time_estimate);
                report.density_ratios = ratios.clone();
                members = seq.members.iter().map(|m| (m.sigma, m.snapshot.clone())).collect();
                tangent_flow = Some(report);
            }
            Err(e) => tangent_flow_error = Some(e.to_string()),
        }
    }

    let branch_angles = tangent_flow.as_ref().and_then(|r| {
        let beta = config.beta;
        if last.mode().is_closed() {
            return None;
        }
        let checked = FRAC_PI_2 + beta;
        let measured: Vec<f64> = r.branches.iter().map(|b| b.mean_angle).collect();
        let max_deviation = measured.iter().map(|a| (a - checked).abs()).fold(0.0, f64::max);
        let per_scale: Vec<Vec<f64>> =
            r.scales.iter().filter_map(|s| s.branches.as_ref().map(|b| b.iter().map(|b| b.mean_angle).collect())).collect();
        let scale_spread =
            (per_scale.len() == r.scales.len() && per_scale.windows(2).all(|w| w[0].len() == w[1].len())).then(|| {
                (0..measured.len())
                    .map(|k| {
                        let v = per_scale.iter().map(|s| s[k]);
                        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |a, x| (a.0.min(x), a.1.max(x)));
                        hi - lo
                    })
                    .fold(0.0, f64::max)
            });
        Some(BranchAngleCheck { checked, alternative: 0.5 * beta, measured, max_deviation, scale_spread })
    });
    let shrinker_residuals =
        tangent_flow.as_ref().map_or_else(Vec::new, |r| r.scales.iter().map(|s| s.shrinker_residual).collect());

    let report = AnalysisReport {
        status: manifest.status,
        time_estimate,
        singular_t: t_sing,
        location: event.location,
        center,
        torus_control: maslov_winding.is_some_and(|w| w != 0),
        maslov_winding,
        density: summarize(&density.iter().map(|r| (r.density.value, r.density.error)).collect::<Vec<_>>()),
        moment: summarize(&density.iter().map(|r| (r.moment.value, r.moment.error)).collect::<Vec<_>>()),
        branch_angles,
        shrinker_residuals,
        tangent_flow,
        tangent_flow_error,
    };

    write_json(&dir.join(REPORT), &report)?;
    write_text(&dir.join(DENSITY), &density_csv(&density))?;
    let ratio_rows: Vec<Vec<Cell>> = ratios.iter().map(|r| vec![r.delta.into(), r.ratio.into(), r.t.into()]).collect();
    write_text(&dir.join(DENSITY_RATIO), &io::csv(&names(&["delta", "ratio", "t"]), &ratio_rows))?;

    let step = traj.len().div_ceil(PROFILE_CURVES).max(1);
    let mut idx: Vec<usize> = (0..traj.len()).step_by(step).collect();
    if idx.last() != Some(&(traj.len() - 1)) {
        idx.push(traj.len() - 1);
    }
    let picked: Vec<(f64, &CurveSnapshot)> = idx.iter().map(|&k| (traj[k].t(), &traj[k])).collect();
    write_text(&dir.join(PROFILES), &curves_csv("t", &picked))?;

    let rescaled_dir = dir.join(RESCALED_DIR);
    if rescaled_dir.exists() {
        fs::remove_dir_all(&rescaled_dir).map_err(|e| CliError::io(&rescaled_dir, e))?;
    }
    if !members.is_empty() {
        fs::create_dir_all(&rescaled_dir).map_err(|e| CliError::io(&rescaled_dir, e))?;
        for (k, (_, snap)) in members.iter().enumerate() {
            let name = format!("{RESCALED_DIR}/member_{k:03}.json");
            io::write_snapshot(&dir.join(&name), snap)?;
            outputs.push(name);
        }
        let rows: Vec<(f64, &CurveSnapshot)> = members.iter().map(|(s, m)| (*s, m)).collect();
        write_text(&dir.join(RESCALED), &curves_csv("sigma", &rows))?;
        outputs.push(RESCALED.to_string());
    }

    for (name, script) in crate::plots::scripts(picked.len(), members.len(), opts.radius) {
        let rel = format!("{PLOT_DIR}/{name}");
        write_text(&dir.join(&rel), &script)?;
        outputs.push(rel);
    }

    manifest.files.retain(|f| !f.starts_with(&format!("{RESCALED_DIR}/")));
    manifest.add_files(outputs);
    manifest.write(dir)?;
    record_timing(dir, "analyze", started.elapsed().as_secs_f64())?;
    Ok(report)
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn density_csv(rows: &[DensityRow]) -> String {
    let header = names(&["t", "density", "density_error", "density_tail", "moment", "moment_error", "defect", "defect_error"]);
    let body: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                r.t.into(),
                r.density.value.into(),
                r.density.error.into(),
                r.density.tail.into(),
                r.moment.value.into(),
                r.moment.error.into(),
                r.defect.value.into(),
                r.defect.error.into(),
            ]
        })
        .collect();
    io::csv(&header, &body)
}

/// Long-format curve table: one row per node, curves numbered in order.
fn curves_csv(label: &str, curves: &[(f64, &CurveSnapshot)]) -> String {
    let header = names(&["curve", label, "x", "y"]);
    let rows: Vec<Vec<Cell>> = curves
        .iter()
        .enumerate()
        .flat_map(|(k, (v, s))| {
            s.positions().into_iter().map(move |z| vec![Cell::from(k), (*v).into(), z.re.into(), z.im.into()])
        })
        .collect();
    io::csv(&header, &rows)
}

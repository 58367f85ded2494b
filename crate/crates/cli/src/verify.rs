//! Pass/fail policy over the monitor suite.
//!
//! Frames are recomputed from the stored snapshot pairs rather than read
//! back, so a damaged snapshot shows up both in the monitors it breaks and
//! as a mismatch against `diagnostics.csv`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use equiflow_core::flow::FlowConfig;
use equiflow_core::io;
use equiflow_core::monitors::{self, DiagnosticsFrame, MonitorSettings};
use equiflow_core::Executor;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::run::{read_json, RunManifest, CONFIG, DIAGNOSTICS};

pub const COAREA_TOL: f64 = 1e-6;
pub const SYMMETRY_TOL: f64 = 1e-8;
pub const RADIAL_SPEED_TOL: f64 = 1e-8;
pub const THETA_RANGE_TOL: f64 = 1e-6;
/// Allowed decrease of θ_max / increase of θ_min between frames.
pub const THETA_EXTREMA_TOL: f64 = 1e-4;
pub const AREA_LAW_TOL: f64 = 1e-3;
/// Evolution residuals after parabolic normalization by powers of min|γ|.
pub const EVOLUTION_TOL: f64 = 0.1;
/// Area ratio may exceed its t = 0 maximum by this factor.
pub const AREA_RATIO_FACTOR: f64 = 1.1;
pub const HOLONOMY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    Consistency,
    Coarea,
    Sturm,
    Shape,
    MonotoneR,
    ThetaRange,
    ThetaExtrema,
    AreaLaw,
    AreaBound,
    Evolution,
    AreaRatio,
    Holonomy,
}

impl Monitor {
    pub const ALL: [Monitor; 12] = [
        Monitor::Consistency,
        Monitor::Coarea,
        Monitor::Sturm,
        Monitor::Shape,
        Monitor::MonotoneR,
        Monitor::ThetaRange,
        Monitor::ThetaExtrema,
        Monitor::AreaLaw,
        Monitor::AreaBound,
        Monitor::Evolution,
        Monitor::AreaRatio,
        Monitor::Holonomy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::Consistency => "consistency",
            Monitor::Coarea => "coarea",
            Monitor::Sturm => "sturm",
            Monitor::Shape => "shape",
            Monitor::MonotoneR => "monotone_r",
            Monitor::ThetaRange => "theta_range",
            Monitor::ThetaExtrema => "theta_extrema",
            Monitor::AreaLaw => "area_law",
            Monitor::AreaBound => "area_bound",
            Monitor::Evolution => "evolution",
            Monitor::AreaRatio => "area_ratio",
            Monitor::Holonomy => "holonomy",
        }
    }
}

impl FromStr for Monitor {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        Monitor::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            CliError::Usage(format!("unknown monitor `{s}` (known: {})", Monitor::ALL.map(Monitor::name).join(", ")))
        })
    }
}

/// Parse a comma-separated monitor list; `all` or an empty list selects
/// every monitor.
pub fn parse_monitors(list: &str) -> Result<Vec<Monitor>> {
    let names: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.is_empty() || names == ["all"] {
        return Ok(Monitor::ALL.to_vec());
    }
    names.into_iter().map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub monitor: String,
    /// Worst value over all frames (`None` when not applicable).
    pub worst: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// Frames the monitor was evaluated on.
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, monitor: &str) -> Option<&VerifyRow> {
        self.rows.iter().find(|r| r.monitor == monitor)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<22} {:>14} {:>12} {:>7} {}\n", "monitor", "worst", "tolerance", "frames", "result");
        for r in &self.rows {
            let worst = r.worst.map_or_else(|| "-".to_string(), |w| format!("{w:.6e}"));
            let result = match (r.worst, r.pass) {
                (None, _) => "n/a",
                (_, true) => "pass",
                (_, false) => "FAIL",
            };
            writeln!(out, "{:<22} {:>14} {:>12.3e} {:>7} {}", r.monitor, worst, r.tolerance, r.frames, result).unwrap();
        }
        out
    }
}

fn row(monitor: impl Into<String>, values: impl IntoIterator<Item = f64>, tolerance: f64) -> VerifyRow {
    let mut frames = 0;
    let mut worst: Option<f64> = None;
    for v in values {
        frames += 1;
        // NaN is worse than anything
        worst = Some(match worst {
            Some(w) if w.is_nan() || (v <= w) => w,
            _ => v,
        });
    }
    let pass = worst.is_none_or(|w| w <= tolerance);
    VerifyRow { monitor: monitor.into(), worst, tolerance, pass, frames }
}

fn not_applicable(monitor: &str, tolerance: f64) -> VerifyRow {
    VerifyRow { monitor: monitor.into(), worst: None, tolerance, pass: true, frames: 0 }
}

/// Recompute every frame of the run from its snapshot files.
pub fn recompute_frames(
    dir: &Path,
    manifest: &RunManifest,
    settings: &MonitorSettings,
    exec: Executor,
) -> Result<Vec<DiagnosticsFrame>> {
    exec.map(&manifest.snapshots, |e| -> Result<DiagnosticsFrame> {
        let cur = io::read_snapshot(&dir.join(&e.file))?;
        let prev = e.companion.as_ref().map(|c| io::read_snapshot(&dir.join(c))).transpose()?;
        Ok(monitors::diagnose(prev.as_ref(), &cur, e.step, settings))
    })
    .into_iter()
    .collect()
}

pub fn cmd_verify(dir: &Path, selected: &[Monitor]) -> Result<VerifyReport> {
    let manifest = RunManifest::read(dir)?;
    let config: FlowConfig = read_json(&dir.join(CONFIG))?;
    let diag_path = dir.join(DIAGNOSTICS);
    if !diag_path.exists() {
        return Err(CliError::MissingDiagnostics(diag_path.display().to_string()));
    }
    let stored = io::read_text(&diag_path)?;
    let settings = MonitorSettings::default();
    let frames = recompute_frames(dir, &manifest, &settings, Executor::default())?;
    let open = !config.mode.is_closed();
    let beta = config.beta;
    let convex_range = open && beta > FRAC_PI_2 && beta <= PI;

    let mut rows = Vec::new();
    for &m in selected {
        match m {
            Monitor::Consistency => {
                let lines: Vec<&str> = stored.lines().skip(1).collect();
                let mut bad = lines.len().abs_diff(frames.len());
                for (line, f) in lines.iter().zip(&frames) {
                    if io::csv_row(&monitors::frame_row(f)).trim_end() != *line {
                        bad += 1;
                    }
                }
                let mut r = row("consistency", [bad as f64], 0.0);
                r.frames = frames.len();
                rows.push(r);
            }
            Monitor::Coarea => rows.push(row("coarea", frames.iter().map(|f| f.coarea_residual.unwrap_or(f64::NAN)), COAREA_TOL)),
            Monitor::Sturm if open => {
                // frames with any count other than exactly one
                let bad = frames.iter().filter(|f| f.sturm_counts.iter().any(|c| *c != Some(1))).count();
                let mut r = row("sturm", [bad as f64], 0.0);
                r.frames = frames.len();
                rows.push(r);
            }
            Monitor::Shape if open => {
                let bad = frames.iter().filter(|f| f.critical_points != Some(1)).count();
                let mut r = row("critical_points", [bad as f64], 0.0);
                r.frames = frames.len();
                rows.push(r);
                rows.push(row("symmetry", frames.iter().map(|f| f.symmetry_residual.unwrap_or(f64::NAN)), SYMMETRY_TOL));
            }
            Monitor::MonotoneR if convex_range => {
                rows.push(row("monotone_r", frames.iter().map(|f| f.max_radial_speed.unwrap_or(f64::NAN)), RADIAL_SPEED_TOL))
            }
            Monitor::ThetaRange if convex_range => rows.push(row(
                "theta_range",
                frames.iter().map(|f| match (f.theta_min, f.theta_max) {
                    (Some(lo), Some(hi)) => (PI - lo).max(hi - 2.0 * beta),
                    _ => f64::NAN,
                }),
                THETA_RANGE_TOL,
            )),
            Monitor::ThetaExtrema if open => rows.push(row(
                "theta_extrema",
                frames.windows(2).map(|w| match (w[0].theta_min, w[1].theta_min, w[0].theta_max, w[1].theta_max) {
                    (Some(a), Some(b), Some(c), Some(d)) => (a - b).max(d - c),
                    _ => f64::NAN,
                }),
                THETA_EXTREMA_TOL,
            )),
            Monitor::AreaLaw if open => {
                rows.push(row("area_law", frames.iter().filter_map(|f| f.area_law_residual), AREA_LAW_TOL))
            }
            Monitor::AreaBound if open => {
                let evaluated: Vec<bool> = frames.iter().filter_map(|f| f.area_bound_holds).collect();
                let bad = evaluated.iter().filter(|&&b| !b).count();
                let mut r = row("area_bound", [bad as f64], 0.0);
                r.frames = evaluated.len();
                rows.push(r);
            }
            Monitor::Evolution => {
                let scaled = |get: fn(&DiagnosticsFrame) -> Option<f64>, k: i32| {
                    frames.iter().filter_map(move |f| get(f).map(|v| v * f.min_radius.powi(k))).collect::<Vec<_>>()
                };
                type Getter = fn(&DiagnosticsFrame) -> Option<f64>;
                let cases: [(&str, Getter, i32); 5] = [
                    ("theta_heat", |f| f.theta_heat_residual, 2),
                    ("beta_heat", |f| f.beta_heat_residual, 0),
                    ("radial_law", |f| f.radial_law_residual, 1),
                    ("cosine", |f| f.cosine_residual, 2),
                    ("theta_sq", |f| f.theta_sq_residual, 2),
                ];
                for (name, get, k) in cases {
                    let v = scaled(get, k);
                    let name = format!("evolution_{name}");
                    rows.push(if v.is_empty() { not_applicable(&name, EVOLUTION_TOL) } else { row(name, v, EVOLUTION_TOL) });
                }
            }
            Monitor::AreaRatio => {
                let Some(first) = frames.first().and_then(|f| f.area_ratio_max) else {
                    rows.push(not_applicable("area_ratio", AREA_RATIO_FACTOR));
                    continue;
                };
                rows.push(row(
                    "area_ratio",
                    frames.iter().map(|f| f.area_ratio_max.unwrap_or(f64::NAN) / first),
                    AREA_RATIO_FACTOR,
                ));
            }
            Monitor::Holonomy if open => {
                rows.push(row("holonomy", frames.iter().map(|f| f.holonomy.map_or(f64::NAN, f64::abs)), HOLONOMY_TOL))
            }
            Monitor::Holonomy => {
                let w0 = frames.first().and_then(|f| f.maslov_winding);
                let mut r = row(
                    "maslov_winding",
                    frames.iter().map(|f| match (f.maslov_winding, w0) {
                        (Some(w), Some(w0)) => (w - w0).abs() as f64,
                        _ => f64::NAN,
                    }),
                    0.0,
                );
                r.frames = frames.len();
                rows.push(r);
            }
            other => rows.push(not_applicable(other.name(), 0.0)),
        }
    }
    Ok(VerifyReport { rows })
}

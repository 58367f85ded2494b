//! `key = value` run configuration files.
//!
//! One assignment per line; `#` starts a comment. Every key is optional and
//! defaults to [`FlowConfig::default`]. Numbers may be written as multiples
//! of π (`3*pi/4`, `pi/2`, `2pi`).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use equiflow_core::flow::{Family, FlowConfig};
use equiflow_core::geometry::{Clustering, MonitorWeight, RegridPolicy};
use equiflow_core::Mode;

use crate::error::{CliError, Result};

/// Recognized keys with a one-line description, in documentation order.
pub const KEYS: &[(&str, &str)] = &[
    ("beta", "opening angle β ∈ (0, π] of the initial profile"),
    ("family", "`standard` or `circle(r0)`; a circle forces closed-radial mode"),
    ("mode", "open-radial | open-graph | closed-radial"),
    ("nodes", "number of grid nodes (≥ 16)"),
    ("r_cut", "truncation radius of open profiles"),
    ("half_width", "graph mode: truncate at |x| = half_width instead"),
    ("clustering", "initial grid: auto | uniform | arclength | log-polar"),
    ("clustering_gain", "curvature gain of an equidistributed initial grid"),
    ("t_end", "final time"),
    ("cfl", "time step as a fraction of the explicit stability limit"),
    ("dt_min", "smallest admissible step; pinning at it counts as blow-up"),
    ("dt_max", "largest step"),
    ("min_dist_tol", "blow-up once min|γ| falls below this"),
    ("max_curvature", "blow-up once the curvature exceeds this"),
    ("regrid", "on | off"),
    ("regrid_weight", "arclength | log-polar"),
    ("regrid_gain", "curvature gain of the regrid monitor"),
    ("regrid_max_ratio", "regrid once monitor cells differ by this ratio"),
    ("regrid_length_tol", "allowed relative change of the polygon length"),
    ("snapshot_every", "emit every this many steps (0 disables)"),
    ("snapshot_radius_ratio", "also emit when min|γ| drops below this fraction of its last emitted value"),
    ("settle_steps", "steps an emission waits after a regrid"),
    ("output_dir", "default output directory"),
];

/// Parsed configuration together with the line each key was set on.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub config: FlowConfig,
    pub lines: BTreeMap<String, usize>,
}

pub fn parse_config(path: &Path) -> Result<FlowConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::io(path, source))?;
    parse_config_str(&text).map(|p| p.config)
}

pub fn parse_config_str(text: &str) -> Result<ParsedConfig> {
    let mut assignments: Vec<(usize, String, String)> = Vec::new();
    let mut lines = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(CliError::config(line, format!("expected `key = value`, found `{body}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::config(line, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(CliError::config(line, format!("missing value for `{key}`")));
        }
        if let Some(prev) = lines.insert(key.to_string(), line) {
            return Err(CliError::config(line, format!("`{key}` already set on line {prev}")));
        }
        assignments.push((line, key.to_string(), value.to_string()));
    }

    let mut cfg = FlowConfig::default();
    let mut regrid_on = true;
    let mut regrid = RegridPolicy::default();
    let mut clustering: Option<String> = None;
    let mut clustering_gain = 1.0;
    for (line, key, value) in &assignments {
        let line = *line;
        let num = || parse_number(value).map_err(|m| CliError::config(line, format!("{key}: {m}")));
        let count = || value.parse::<usize>().map_err(|e| CliError::config(line, format!("{key}: {e}")));
        match key.as_str() {
            "beta" => cfg.beta = num()?,
            "family" => cfg.family = parse_family(value).map_err(|m| CliError::config(line, m))?,
            "mode" => cfg.mode = value.parse().map_err(|e: equiflow_core::Error| CliError::config(line, e.to_string()))?,
            "nodes" => cfg.nodes = count()?,
            "r_cut" => cfg.r_cut = num()?,
            "half_width" => cfg.half_width = Some(num()?),
            "clustering" => clustering = Some(value.clone()),
            "clustering_gain" => clustering_gain = num()?,
            "t_end" => cfg.t_end = num()?,
            "cfl" => cfg.dt.cfl_factor = num()?,
            "dt_min" => cfg.dt.dt_min = num()?,
            "dt_max" => cfg.dt.dt_max = num()?,
            "min_dist_tol" => cfg.stop.min_dist_tol = num()?,
            "max_curvature" => cfg.stop.max_curvature_cap = num()?,
            "regrid" => {
                regrid_on = match value.as_str() {
                    "on" | "true" | "yes" => true,
                    "off" | "false" | "no" => false,
                    v => return Err(CliError::config(line, format!("regrid: expected on/off, found `{v}`"))),
                }
            }
            "regrid_weight" => regrid.weight = parse_weight(value).map_err(|m| CliError::config(line, m))?,
            "regrid_gain" => regrid.curvature_gain = num()?,
            "regrid_max_ratio" => regrid.max_ratio = num()?,
            "regrid_length_tol" => regrid.length_tol = num()?,
            "snapshot_every" => cfg.cadence.every_steps = count()?,
            "snapshot_radius_ratio" => cfg.cadence.radius_ratio = num()?,
            "settle_steps" => cfg.cadence.settle_steps = count()?,
            "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
            _ => unreachable!("keys are checked above"),
        }
    }
    cfg.regrid = regrid_on.then_some(regrid);
    if let Some(c) = &clustering {
        let line = lines["clustering"];
        cfg.clustering = match c.as_str() {
            "auto" => None,
            "uniform" => Some(Clustering::Uniform),
            w => Some(Clustering::Equidistributed {
                weight: parse_weight(w).map_err(|m| CliError::config(line, m))?,
                curvature_gain: clustering_gain,
            }),
        };
    } else if lines.contains_key("clustering_gain") {
        cfg.clustering = Some(Clustering::Equidistributed { weight: MonitorWeight::LogPolar, curvature_gain: clustering_gain });
    }
    if let Family::Circle { .. } = cfg.family {
        if lines.contains_key("mode") && cfg.mode != Mode::ClosedRadial {
            return Err(CliError::config(lines["mode"], "circle initial data requires closed-radial mode".into()));
        }
        cfg.mode = Mode::ClosedRadial;
    }
    if let Err(e) = cfg.validate() {
        return Err(CliError::config(blame(&assignments, &lines), e.to_string()));
    }
    Ok(ParsedConfig { config: cfg, lines })
}

/// Line after which the configuration stayed invalid: the earliest `k` such
/// that applying the first `k` assignments (and any later prefix) fails to
/// validate. Defaults are valid, so some assignment is always to blame.
fn blame(assignments: &[(usize, String, String)], lines: &BTreeMap<String, usize>) -> usize {
    let prefix_ok = |k: usize| {
        let text: String = assignments[..k].iter().map(|(_, key, v)| format!("{key} = {v}\n")).collect();
        parse_config_str(&text).is_ok()
    };
    let last_ok = (0..assignments.len()).rev().find(|&k| prefix_ok(k)).unwrap_or(0);
    assignments.get(last_ok).map_or_else(|| lines.values().copied().max().unwrap_or(1), |a| a.0)
}

fn parse_family(v: &str) -> std::result::Result<Family, String> {
    if v == "standard" {
        return Ok(Family::Standard);
    }
    let inner = v
        .strip_prefix("circle(")
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| format!("family: expected `standard` or `circle(r0)`, found `{v}`"))?;
    let r0 = parse_number(inner.trim()).map_err(|m| format!("family: {m}"))?;
    Ok(Family::Circle { r0 })
}

fn parse_weight(v: &str) -> std::result::Result<MonitorWeight, String> {
    v.parse().map_err(|e: equiflow_core::Error| e.to_string())
}

/// A float, or `a*pi/b` with optional `a` and `b`.
pub fn parse_number(v: &str) -> std::result::Result<f64, String> {
    let bad = || format!("cannot parse `{v}` as a number");
    let s: String = v.chars().filter(|c| !c.is_whitespace()).collect();
    let x = if let Some(pos) = s.find("pi") {
        let (head, tail) = (&s[..pos], &s[pos + 2..]);
        let a = match head.strip_suffix('*').unwrap_or(head) {
            "" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| bad())?,
        };
        let b = match tail {
            "" => 1.0,
            t => t.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
        };
        a * PI / b
    } else {
        s.parse::<f64>().map_err(|_| bad())?
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}

//! Blow-up detection, singular-time extrapolation and discrete tangent-flow
//! analysis of rescaled sequences.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, FlowConfig, FlowState, StopCriteria};
use crate::geometry::{self, CurveSnapshot, NodeFrame};
use crate::monitors;
use crate::monotonicity::RescaledSequence;
use crate::{Executor, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    MinDistance,
    Curvature,
    DtPinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEvent {
    pub t: f64,
    /// Plane position of the node closest to the origin.
    pub location: C64,
    pub node: usize,
    pub min_radius: f64,
    pub trigger: Trigger,
}

/// Check the stop criteria on a snapshot whose frames are already known.
pub fn detect_with(snap: &CurveSnapshot, fr: &[NodeFrame], stop: &StopCriteria, dt_pinned: bool) -> Option<BlowupEvent> {
    let (node, location) = flow::argmin_radius(snap);
    let min_radius = location.norm();
    let trigger = if min_radius < stop.min_dist_tol {
        Trigger::MinDistance
    } else if flow::max_curvature(fr) > stop.max_curvature_cap {
        Trigger::Curvature
    } else if dt_pinned {
        Trigger::DtPinned
    } else {
        return None;
    };
    Some(BlowupEvent { t: snap.t(), location, node, min_radius, trigger })
}

/// The event recorded by a run, or a fresh check of its current snapshot.
pub fn detect(state: &FlowState, config: &FlowConfig) -> Result<Option<BlowupEvent>> {
    if let Some(ev) = state.event {
        return Ok(Some(ev));
    }
    let fr = geometry::frames(&state.snapshot)?;
    let pinned = flow::adaptive_dt(&state.snapshot, &config.dt)?.pinned;
    Ok(detect_with(&state.snapshot, &fr, &config.stop, pinned))
}

/// Singular time estimate with bracket `lo ≤ t_hat ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeEstimate {
    pub t_hat: f64,
    pub lo: f64,
    pub hi: f64,
    /// Samples used by the fit.
    pub samples: usize,
}

impl TimeEstimate {
    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }
    pub fn overlaps(&self, other: &TimeEstimate) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Richardson extrapolation of singular-time estimates from grids with
/// `N` and `2N` nodes, assuming convergence of the given order. The bracket
/// spans the fine estimate's bracket and the extrapolated value, widened by
/// the extrapolation correction.
pub fn richardson(coarse: &TimeEstimate, fine: &TimeEstimate, order: f64) -> TimeEstimate {
    let corr = (fine.t_hat - coarse.t_hat) / (2f64.powf(order) - 1.0);
    let t_hat = fine.t_hat + corr;
    let lo = fine.lo.min(t_hat - corr.abs());
    let hi = fine.hi.max(t_hat + corr.abs());
    TimeEstimate { t_hat, lo, hi, samples: fine.samples }
}

const MIN_FIT_SAMPLES: usize = 5;

/// Least-squares fit of `m² = a + b t` over the trailing samples with
/// `m ≤ 2 m_last`, from a `(t, min|γ|)` history of a run that ended in a
/// blow-up. The upper end of the bracket adds the largest fit residual
/// converted to time.
pub fn estimate_t(history: &[(f64, f64)], blowup: bool) -> Result<TimeEstimate> {
    if !blowup {
        return Err(Error::NoBlowup);
    }
    let Some(&(t_last, m_last)) = history.last() else {
        return Err(Error::InsufficientSamples("empty history".into()));
    };
    let mut start = history.iter().rposition(|&(_, m)| m > 2.0 * m_last).map_or(0, |k| k + 1);
    if history.len() - start < MIN_FIT_SAMPLES {
        if history.len() < MIN_FIT_SAMPLES {
            return Err(Error::InsufficientSamples(format!("{} history samples, need {MIN_FIT_SAMPLES}", history.len())));
        }
        start = history.len() - MIN_FIT_SAMPLES;
    }
    let win = &history[start..];
    let n = win.len() as f64;
    let (st, sy) = win.iter().fold((0.0, 0.0), |a, &(t, m)| (a.0 + t, a.1 + m * m));
    let (mt, my) = (st / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(t, m) in win {
        sxx += (t - mt) * (t - mt);
        sxy += (t - mt) * (m * m - my);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples("trailing samples share one time".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mt;
    if !(b < 0.0) {
        return Err(Error::InsufficientSamples("min|γ|² is not decreasing on the trailing window".into()));
    }
    let bound = win.iter().map(|&(t, m)| (m * m - a - b * t).abs()).fold(0.0, f64::max) / b.abs();
    let t_hat = (-a / b).max(t_last);
    Ok(TimeEstimate { t_hat, lo: t_last, hi: t_hat + bound, samples: win.len() })
}

/// A ray of the discrete tangent cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Length-weighted unit direction.
    pub direction: C64,
    pub polar_angle: f64,
    /// Number of separate curve pieces along the ray.
    pub multiplicity: u32,
    pub mean_angle: f64,
    pub angle_std: f64,
    pub length: f64,
}

/// Summary of one member of the rescaled sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub sigma: f64,
    pub tau: f64,
    pub branches: Option<Vec<Branch>>,
    /// Why the branches could not be determined at this scale.
    pub branch_error: Option<String>,
    pub concentration: f64,
    pub liouville_range: f64,
    pub shrinker_residual: Option<f64>,
}

/// The two candidate values for the tangent-plane angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleReference {
    /// `π/2 + β`, forced by mirror symmetry and the end values π and 2β.
    pub symmetric: f64,
    /// `β/2`, the half opening angle.
    pub half_opening: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub singular_t: f64,
    pub time_estimate: Option<TimeEstimate>,
    pub singular_point: C64,
    pub radius: f64,
    /// Branches of the largest-scale member.
    pub branches: Vec<Branch>,
    /// Length-weighted angle standard deviation in `B_R` (largest scale).
    pub concentration: f64,
    /// Length-weighted histogram of θ mod 2π in `B_R`: (bin center, weight).
    pub histogram: Vec<(f64, f64)>,
    /// Largest range of `β + 2τθ` over a connected piece of the curve in `B_R`.
    pub liouville_range: f64,
    pub scales: Vec<ScaleSummary>,
    pub angle_reference: Option<AngleReference>,
    /// Closed member with nonzero Maslov class (concentration not expected).
    pub nonzero_maslov: bool,
    pub density_ratios: Vec<DensityRatioRow>,
}

const HISTOGRAM_BINS: usize = 36;
/// Gap factor (relative to the median polar spacing) that separates branches.
pub const BRANCH_GAP_FACTOR: f64 = 10.0;

/// Per-node data of a member: orientation-ordered positions, θ, Liouville
/// primitive and half-chord length weights.
struct NodeData {
    pos: Vec<C64>,
    theta: Vec<f64>,
    primitive: Vec<f64>,
    weight: Vec<f64>,
}

fn node_data(snap: &CurveSnapshot) -> Result<NodeData> {
    let fr = geometry::frames(snap)?;
    let theta = geometry::angle_from_frames(snap, &fr)?;
    let primitive = geometry::primitive_from_frames(snap, &fr).values;
    let mut pos: Vec<C64> = fr.iter().map(|f| f.pos).collect();
    let (mut theta, mut primitive) = (theta, primitive);
    if snap.mode() == geometry::Mode::OpenGraph {
        pos.reverse();
        theta.reverse();
        primitive.reverse();
    }
    let n = pos.len();
    let closed = snap.mode().is_closed();
    let mut weight = vec![0.0; n];
    for j in 0..n {
        let next = if j + 1 < n {
            Some(j + 1)
        } else if closed {
            Some(0)
        } else {
            None
        };
        if let Some(k) = next {
            let l = 0.5 * (pos[k] - pos[j]).norm();
            weight[j] += l;
            weight[k] += l;
        }
    }
    Ok(NodeData { pos, theta, primitive, weight })
}

fn weighted_mean_std(idx: &[usize], w: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let total: f64 = idx.iter().map(|&j| w[j]).sum();
    if total == 0.0 {
        return (f64::NAN, 0.0, 0.0);
    }
    let mean = idx.iter().map(|&j| w[j] * v[j]).sum::<f64>() / total;
    let var = idx.iter().map(|&j| w[j] * (v[j] - mean).powi(2)).sum::<f64>() / total;
    (mean, var.max(0.0).sqrt(), total)
}

/// Consecutive runs of indices (along the curve) from a sorted index list.
fn runs(idx: &[usize], n: usize, closed: bool) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &j in idx {
        match out.last_mut() {
            Some(r) if *r.last().expect("nonempty run") + 1 == j => r.push(j),
            _ => out.push(vec![j]),
        }
    }
    if closed && out.len() > 1 && out[0][0] == 0 && *out[out.len() - 1].last().expect("nonempty") == n - 1 {
        let tail = out.pop().expect("len > 1");
        out[0].splice(0..0, tail);
    }
    out
}

/// Split annulus nodes into rays at polar-angle gaps exceeding
/// [`BRANCH_GAP_FACTOR`] × the median gap. Gaps within a factor two of the
/// threshold make the split ambiguous.
fn cluster_branches(d: &NodeData, radius: f64, closed: bool) -> Result<Vec<Branch>> {
    let idx: Vec<usize> = (0..d.pos.len())
        .filter(|&j| {
            let r = d.pos[j].norm();
            r >= 0.5 * radius && r <= radius
        })
        .collect();
    if idx.len() < 2 {
        return Err(Error::EmptyAnnulus { inner: 0.5 * radius, outer: radius });
    }
    let polar = |j: usize| d.pos[j].arg().rem_euclid(TAU);
    let mut sorted: Vec<(f64, usize)> = idx.iter().map(|&j| (polar(j), j)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = sorted.len();
    let gaps: Vec<f64> =
        (0..m).map(|k| if k + 1 < m { sorted[k + 1].0 - sorted[k].0 } else { sorted[0].0 + TAU - sorted[k].0 }).collect();
    let mut g = gaps.clone();
    g.sort_by(f64::total_cmp);
    let median = g[m / 2].max(1e-12);
    let threshold = BRANCH_GAP_FACTOR * median;
    if let Some(gap) = gaps.iter().find(|&&x| x > 0.5 * threshold && x <= 2.0 * threshold) {
        return Err(Error::AmbiguousClustering(format!(
            "polar gap {gap:.3e} is within a factor 2 of the split threshold {threshold:.3e}"
        )));
    }
    // cluster boundaries: after every large gap
    let cuts: Vec<usize> = (0..m).filter(|&k| gaps[k] > threshold).collect();
    let groups: Vec<Vec<usize>> = if cuts.is_empty() {
        vec![sorted.iter().map(|s| s.1).collect()]
    } else {
        let mut out = Vec::new();
        for (c, &cut) in cuts.iter().enumerate() {
            let end = cuts[(c + 1) % cuts.len()];
            let mut k = (cut + 1) % m;
            let mut grp = vec![sorted[k].1];
            while k != end {
                k = (k + 1) % m;
                grp.push(sorted[k].1);
            }
            out.push(grp);
        }
        out
    };
    let n = d.pos.len();
    let mut branches: Vec<Branch> = groups
        .into_iter()
        .map(|mut grp| {
            grp.sort_unstable();
            let multiplicity = runs(&grp, n, closed).len() as u32;
            let dir: C64 = grp.iter().map(|&j| d.pos[j] / d.pos[j].norm() * d.weight[j]).sum();
            let direction = dir / dir.norm();
            let (mean_angle, angle_std, length) = weighted_mean_std(&grp, &d.weight, &d.theta);
            Branch { direction, polar_angle: direction.arg().rem_euclid(TAU), multiplicity, mean_angle, angle_std, length }
        })
        .collect();
    branches.sort_by(|a, b| a.polar_angle.total_cmp(&b.polar_angle));
    Ok(branches)
}

fn ball_nodes(d: &NodeData, radius: f64) -> Vec<usize> {
    (0..d.pos.len()).filter(|&j| d.pos[j].norm() <= radius).collect()
}

fn liouville_range(d: &NodeData, ball: &[usize], tau: f64, closed: bool) -> f64 {
    runs(ball, d.pos.len(), closed)
        .iter()
        .map(|run| {
            let v = run.iter().map(|&j| d.primitive[j] + 2.0 * tau * d.theta[j]);
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |a, x| (a.0.min(x), a.1.max(x)));
            hi - lo
        })
        .fold(0.0, f64::max)
}

fn summarize(snap: &CurveSnapshot, sigma: f64, tau: f64, radius: f64) -> Result<(ScaleSummary, NodeData)> {
    let d = node_data(snap)?;
    let closed = snap.mode().is_closed();
    let ball = ball_nodes(&d, radius);
    let (_, concentration, _) = weighted_mean_std(&ball, &d.weight, &d.theta);
    let (branches, branch_error) = match cluster_branches(&d, radius, closed) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let shrinker_residual = monitors::shrinker_identity_in_ball(snap, 0.0, radius).ok();
    let summary = ScaleSummary {
        sigma,
        tau,
        branches,
        branch_error,
        concentration,
        liouville_range: liouville_range(&d, &ball, tau, closed),
        shrinker_residual,
    };
    Ok((summary, d))
}

/// Branch structure, angle statistics and per-scale summaries of a rescaled
/// sequence inside the ball of radius `radius`. Branches are taken from the
/// largest scale; failure to cluster it is an error.
pub fn tangent_flow_report(seq: &RescaledSequence, radius: f64) -> Result<SingularityReport> {
    tangent_flow_report_with(seq, radius, Executor::default())
}

pub fn tangent_flow_report_with(seq: &RescaledSequence, radius: f64, exec: Executor) -> Result<SingularityReport> {
    if !(radius > 0.0) {
        return Err(Error::param("report radius must be positive"));
    }
    let Some(last) = seq.members.last() else {
        return Err(Error::InsufficientSamples("empty rescaled sequence".into()));
    };
    let scales: Vec<ScaleSummary> = exec
        .map(&seq.members, |m| summarize(&m.snapshot, m.sigma, m.tau, radius).map(|s| s.0))
        .into_iter()
        .collect::<Result<_>>()?;
    let snap = &last.snapshot;
    let closed = snap.mode().is_closed();
    let d = node_data(snap)?;
    let branches = cluster_branches(&d, radius, closed)?;
    let ball = ball_nodes(&d, radius);
    let mut hist = vec![0.0; HISTOGRAM_BINS];
    let total: f64 = ball.iter().map(|&j| d.weight[j]).sum();
    for &j in &ball {
        let k = ((d.theta[j].rem_euclid(TAU) / TAU * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        hist[k] += d.weight[j] / total.max(f64::MIN_POSITIVE);
    }
    let width = TAU / HISTOGRAM_BINS as f64;
    let histogram = hist.into_iter().enumerate().map(|(k, w)| ((k as f64 + 0.5) * width, w)).collect();
    let nonzero_maslov = closed && monitors::maslov_winding(snap)?.winding != 0;
    let angle_reference =
        snap.beta().filter(|_| !closed).map(|b| AngleReference { symmetric: FRAC_PI_2 + b, half_opening: 0.5 * b });
    Ok(SingularityReport {
        singular_t: seq.singular_t,
        time_estimate: None,
        singular_point: seq.x0,
        radius,
        branches,
        concentration: scales.last().expect("nonempty").concentration,
        histogram,
        liouville_range: scales.last().expect("nonempty").liouville_range,
        scales,
        angle_reference,
        nonzero_maslov,
        density_ratios: Vec::new(),
    })
}

/// `H¹(γ ∩ B_δ(x₀)) / (2δ)` with exact segment–disk clipping of the polygon.
pub fn density_ratio(snap: &CurveSnapshot, x0: C64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(format!("delta {delta} must be positive")));
    }
    let len: f64 = geometry::polygon_segments(snap)
        .iter()
        .filter_map(|&(z0, z1)| geometry::segment_in_disk(z0, z1, x0, delta).map(|(s0, s1)| (s1 - s0) * (z1 - z0).norm()))
        .sum();
    Ok(len / (2.0 * delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRatioRow {
    pub t: f64,
    pub delta: f64,
    pub ratio: f64,
}

/// Geometric δ-grid `m·2^k`, `k = −2, …, count − 3`, tied to the current
/// distance `m` of the curve from the origin.
pub fn delta_grid(m: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| m * 2f64.powi(k as i32 - 2)).collect()
}

/// Density ratios at `x₀` for every snapshot, on the δ-grid of each
/// snapshot's `min|γ|`.
pub fn density_ratio_series(traj: &[CurveSnapshot], x0: C64, count: usize, exec: Executor) -> Result<Vec<DensityRatioRow>> {
    let rows: Vec<Result<Vec<DensityRatioRow>>> = exec.map(traj, |s| {
        let m = flow::min_radius(s);
        delta_grid(m, count)
            .into_iter()
            .map(|delta| Ok(DensityRatioRow { t: s.t(), delta, ratio: density_ratio(s, x0, delta)? }))
            .collect()
    });
    Ok(rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// The branch angle expected from the symmetry argument, `π/2 + β`.
pub fn symmetric_branch_angle(beta: f64) -> f64 {
    FRAC_PI_2 + beta
}

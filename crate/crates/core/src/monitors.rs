//! Residuals of the evolution identities and the shape invariants of a run.
//!
//! Every monitor returns a value; pass/fail policy belongs to the caller.
//! Residuals that need two states are computed from a pair of snapshots one
//! accepted step apart on the same grid, differencing in time and averaging
//! the right-hand sides at both ends (second order in time).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow;
use crate::geometry::{self, dot, CurveSnapshot, Mode, NodeFrame};
use crate::interp::Pchip;
use crate::io::Cell;
use crate::monotonicity::Point2;
use crate::quad;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSettings {
    /// Sector half-angles ε for the area law.
    pub epsilons: Vec<f64>,
    /// Sturmian rays at α = f·β.
    pub sturm_fractions: Vec<f64>,
    /// Ball radii for the area-ratio monitor (centered at the origin).
    pub area_radii: Vec<f64>,
    /// Reference time of the cosine identity.
    pub cosine_t0: f64,
    /// Singular time for the per-frame shrinker residual, when known.
    pub shrinker_t: Option<f64>,
    /// Nodes excluded at each open end from the pair residuals.
    pub edge_nodes: usize,
    /// Open curves: pair residuals only use nodes with `|γ|` at most this
    /// fraction of the smaller end radius, away from the frozen-end layer.
    pub interior_fraction: f64,
    /// Pairs whose evolved values change by more than this relative amount
    /// are too far apart to difference.
    pub max_relative_change: f64,
    /// `dr/dt` above this counts as a violation of monotone shrinking.
    pub radial_speed_tol: f64,
}

impl Default for MonitorSettings {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.3],
            sturm_fractions: vec![0.25, 0.5, 0.75],
            area_radii: (0..=40).map(|k| 1e-3 * 10f64.powf(k as f64 / 10.0)).collect(),
            cosine_t0: 0.0,
            shrinker_t: None,
            edge_nodes: 3,
            interior_fraction: 0.5,
            max_relative_change: 0.05,
            radial_speed_tol: 1e-8,
        }
    }
}

/// Number of transversal crossings of the polygon with the ray `{u e^{iα}, u > 0}`.
/// `None` when a node lies on the ray without the curve crossing it.
pub fn sturmian_count(snap: &CurveSnapshot, alpha: f64) -> Result<Option<u32>> {
    if snap.mode().is_closed() {
        return Err(Error::NotApplicable { op: "sturmian_count", mode: snap.mode().to_string() });
    }
    let dir = C64::from_polar(1.0, alpha);
    let segs = geometry::polygon_segments(snap);
    let mut pts: Vec<C64> = segs.iter().map(|s| s.0).collect();
    pts.push(segs[segs.len() - 1].1);
    // signed side and forward projection of each node
    let side: Vec<f64> = pts.iter().map(|z| (dir.conj() * z).im).collect();
    let ahead: Vec<f64> = pts.iter().map(|z| dot(*z, dir)).collect();
    let mut count = 0u32;
    let n = pts.len();
    let mut j = 0;
    while j + 1 < n {
        let (a, b) = (side[j], side[j + 1]);
        if a != 0.0 && b != 0.0 {
            if a.signum() != b.signum() {
                let s = a / (a - b);
                if ahead[j] + s * (ahead[j + 1] - ahead[j]) > 0.0 {
                    count += 1;
                }
            }
            j += 1;
            continue;
        }
        // Run of nodes exactly on the line: crossing iff the sides around
        // it differ.
        let start = j + usize::from(a != 0.0);
        let mut end = start;
        while end + 1 < n && side[end + 1] == 0.0 {
            end += 1;
        }
        if ahead[start..=end].iter().any(|&p| p > 0.0) {
            let before = (start > 0).then(|| side[start - 1]);
            let after = (end + 1 < n).then(|| side[end + 1]);
            match (before, after) {
                (Some(x), Some(y)) if x.signum() != y.signum() => count += 1,
                (Some(_), Some(_)) => return Ok(None),
                _ => {} // endpoint on the ray: not a transversal crossing
            }
        }
        j = end + 1;
    }
    Ok(Some(count))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeChecks {
    /// Sign changes of r' along the profile.
    pub critical_points: u32,
    /// `sup_s |r(β/2 + s) − r(β/2 − s)|`.
    pub symmetry_residual: f64,
    /// `max dr/dt` over the nodes.
    pub max_radial_speed: f64,
    /// Nodes with `dr/dt` above the tolerance.
    pub violations: u32,
}

pub fn shape_checks(snap: &CurveSnapshot, radial_speed_tol: f64) -> Result<ShapeChecks> {
    let radial = match snap.mode() {
        Mode::OpenRadial => snap.clone(),
        Mode::OpenGraph | Mode::Polyline => geometry::to_radial(snap)?,
        Mode::ClosedRadial => return Err(Error::NotApplicable { op: "shape_checks", mode: snap.mode().to_string() }),
    };
    let beta = radial.beta().expect("radial profiles carry beta");
    let phi = radial.params();
    let r = radial.values();
    let n = r.len();
    let rho: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let d = geometry::param_derivative(&radial, &rho, 0.0)?;
    let mut critical_points = 0;
    let mut last = 0.0f64;
    for &v in &d {
        if v != 0.0 {
            if last != 0.0 && v.signum() != last.signum() {
                critical_points += 1;
            }
            last = v;
        }
    }
    let mut symmetry_residual = 0.0f64;
    let mut interp: Option<Pchip> = None;
    for j in 0..n.div_ceil(2) {
        let k = n - 1 - j;
        let mismatch = (beta - phi[k]) - phi[j];
        let mirrored = if mismatch.abs() <= 1e-9 * beta {
            r[j] * (1.0 + d[j] * mismatch)
        } else {
            let p = interp.get_or_insert_with(|| Pchip::new(phi, &rho).expect("params increase"));
            p.eval(beta - phi[k]).exp()
        };
        symmetry_residual = symmetry_residual.max((r[k] - mirrored).abs());
    }
    let rt = flow::rhs(&radial)?;
    let max_radial_speed = rt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violations = rt.iter().filter(|&&v| v > radial_speed_tol).count() as u32;
    Ok(ShapeChecks { critical_points, symmetry_residual, max_radial_speed, violations })
}

/// Lagrangian angle at polar angle `phi` of an open radial profile. With
/// `γ' = r(ρ' + i)e^{iφ}`, `ρ = log r`, the angle is `2φ + arg(ρ' + i)`;
/// `ρ'` comes from the local degree-5 interpolant, and the branch follows the
/// lifted node values.
fn angle_at(radial: &CurveSnapshot, theta: &[f64], phi: f64) -> Result<f64> {
    let p = radial.params();
    let n = p.len();
    if phi < p[0] || phi > p[n - 1] {
        return Err(Error::param(format!("angle {phi} outside the profile")));
    }
    let k = p.partition_point(|&v| v <= phi).clamp(1, n - 1) - 1;
    let w = (phi - p[k]) / (p[k + 1] - p[k]);
    let linear = theta[k] + w * (theta[k + 1] - theta[k]);
    const WIDTH: usize = 6;
    if n < WIDTH {
        return Ok(linear);
    }
    let lo = (k + 1).saturating_sub(WIDTH / 2).min(n - WIDTH);
    let xs = &p[lo..lo + WIDTH];
    let rho: Vec<f64> = radial.values()[lo..lo + WIDTH].iter().map(|r| r.ln()).collect();
    let d1: f64 = (0..WIDTH).map(|i| rho[i] * lagrange_slope(xs, i, phi)).sum();
    let raw = 2.0 * phi + C64::new(d1, 1.0).arg();
    Ok(raw + TAU * ((linear - raw) / TAU).round())
}

/// Derivative at `x` of the `i`-th Lagrange basis polynomial on `xs`.
fn lagrange_slope(xs: &[f64], i: usize, x: f64) -> f64 {
    let mut total = 0.0;
    for m in (0..xs.len()).filter(|&m| m != i) {
        let mut term = 1.0 / (xs[i] - xs[m]);
        for k in (0..xs.len()).filter(|&k| k != i && k != m) {
            term *= (x - xs[k]) / (xs[i] - xs[k]);
        }
        total += term;
    }
    total
}

/// `θ(ε) − θ(β−ε)`, the instantaneous rate of change of the sector area.
pub fn angle_difference(snap: &CurveSnapshot, eps: f64) -> Result<f64> {
    let radial = geometry::to_radial(snap)?;
    let beta = radial.beta().ok_or_else(|| Error::param("profile without beta"))?;
    if !(eps > 0.0 && eps < 0.5 * beta) {
        return Err(Error::param(format!("eps = {eps} outside (0, β/2)")));
    }
    let theta = geometry::lagrangian_angle(&radial)?;
    Ok(angle_at(&radial, &theta, eps)? - angle_at(&radial, &theta, beta - eps)?)
}

/// The bound `π + 2ε − 2β` on the sector-area rate.
pub fn area_rate_bound(beta: f64, eps: f64) -> f64 {
    PI + 2.0 * eps - 2.0 * beta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaLawInterval {
    pub t0: f64,
    pub t1: f64,
    /// `ΔA/Δt`
    pub rate: f64,
    /// Trapezoid average of `θ(ε) − θ(β−ε)` over the interval.
    pub angle_difference: f64,
    pub residual: f64,
    /// `θ(ε) − θ(β−ε) < π + 2ε − 2β` at both ends.
    pub bound_holds: bool,
}

/// Area law `dA/dt = θ(ε) − θ(β−ε)` over consecutive snapshots.
pub fn area_law_residual(traj: &[CurveSnapshot], eps: f64) -> Result<Vec<AreaLawInterval>> {
    let mut out = Vec::with_capacity(traj.len().saturating_sub(1));
    let mut prev: Option<(f64, f64, f64)> = None;
    for s in traj {
        let beta = s.beta().ok_or_else(|| Error::NotApplicable { op: "area_law_residual", mode: s.mode().to_string() })?;
        if !(eps > 0.0 && eps < 0.5 * beta) {
            return Err(Error::param(format!("eps = {eps} outside (0, β/2)")));
        }
        let a = geometry::sector_area(s, eps)?;
        let d = angle_difference(s, eps)?;
        if let Some((t0, a0, d0)) = prev {
            let dt = s.t() - t0;
            let rate = (a - a0) / dt;
            let avg = 0.5 * (d + d0);
            let bound = area_rate_bound(beta, eps);
            out.push(AreaLawInterval {
                t0,
                t1: s.t(),
                rate,
                angle_difference: avg,
                residual: (rate - avg).abs(),
                bound_holds: d < bound && d0 < bound,
            });
        }
        prev = Some((s.t(), a, d));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResiduals {
    /// `dθ/dt = Δθ + ⟨∂tγ, T⟩θ_s`
    pub theta_heat: f64,
    /// `dβ/dt = Δβ − 2θ + ⟨∂tγ, T⟩β_s + c(t)`, residual after the best constant.
    pub beta_heat: f64,
    /// The fitted constant `c(t)` (the primitive's normalization drifts).
    pub beta_offset: f64,
    /// `dr/dt = −θ'/r` (radial modes).
    pub radial_law: Option<f64>,
    /// `(cos w)_t = Δ cos w + cos w (⟨γ,n⟩ + 2(t₀−t)V)² + tangential term`,
    /// `w = β + 2(t − t₀)θ` (open profiles).
    pub cosine: Option<f64>,
    /// `d(θ²)/dt = Δθ² − 2|∇θ|² + tangential term` (open profiles; θ² is
    /// multivalued around a closed curve).
    pub theta_sq: Option<f64>,
}

/// Per-time quantities entering the residuals.
struct Fields {
    t: f64,
    fr: Vec<NodeFrame>,
    theta: Vec<f64>,
    theta_p: Vec<f64>,
    beta: Vec<f64>,
    lap_theta: Vec<f64>,
    lap_beta: Vec<f64>,
}

fn fields(snap: &CurveSnapshot) -> Result<Fields> {
    let fr = geometry::frames(snap)?;
    let theta = geometry::angle_from_frames(snap, &fr)?;
    let theta_jump = geometry::angle_jump(&theta, snap);
    let theta_p = geometry::param_derivative(snap, &theta, theta_jump)?;
    let prim = geometry::primitive_from_frames(snap, &fr);
    let lap_theta = geometry::laplacian_from_frames(snap, &fr, &theta, theta_jump)?.values;
    let lap_beta = geometry::laplacian_from_frames(snap, &fr, &prim.values, prim.holonomy)?.values;
    Ok(Fields { t: snap.t(), fr, theta, theta_p, beta: prim.values, lap_theta, lap_beta })
}

/// Why a pair cannot be differenced.
#[derive(Debug, Clone, PartialEq)]
pub enum PairIssue {
    DifferentGrids,
    NotForward,
    TooFarApart { relative_change: f64 },
}

pub fn check_pair(a: &CurveSnapshot, b: &CurveSnapshot, max_relative_change: f64) -> std::result::Result<(), PairIssue> {
    if a.mode() != b.mode() || a.params() != b.params() {
        return Err(PairIssue::DifferentGrids);
    }
    if !(b.t() > a.t()) {
        return Err(PairIssue::NotForward);
    }
    let rel = a
        .positions()
        .iter()
        .zip(b.positions())
        .map(|(p, q)| (p - q).norm() / p.norm().max(q.norm()).max(1e-300))
        .fold(0.0, f64::max);
    if rel > max_relative_change {
        return Err(PairIssue::TooFarApart { relative_change: rel });
    }
    Ok(())
}

/// Sup-norm residuals of the four evolution identities (and the θ² law)
/// between two snapshots on the same grid.
pub fn evolution_residuals(a: &CurveSnapshot, b: &CurveSnapshot, settings: &MonitorSettings) -> Result<EvolutionResiduals> {
    check_pair(a, b, settings.max_relative_change).map_err(|e| Error::param(format!("pair cannot be differenced: {e:?}")))?;
    let fa = fields(a)?;
    let mut fb = fields(b)?;
    let n = a.len();
    let dt = fb.t - fa.t;
    // keep both lifts on the same branch
    let anchor = a.anchor();
    let shift = TAU * ((fb.theta[anchor] - fa.theta[anchor]) / TAU).round();
    for v in &mut fb.theta {
        *v -= shift;
    }
    let (pa, pb) = (a.positions(), b.positions());
    let vel: Vec<C64> = pa.iter().zip(&pb).map(|(x, y)| (y - x) / dt).collect();
    let (lo, hi) = if a.mode().is_closed() {
        (0, n)
    } else {
        let e = settings.edge_nodes.max(1);
        (e, n.saturating_sub(e))
    };
    let reach =
        if a.mode().is_closed() { f64::INFINITY } else { settings.interior_fraction * pa[0].norm().min(pa[n - 1].norm()) };
    let nodes: Vec<usize> = (lo..hi).filter(|&j| pa[j].norm() <= reach).collect();
    if nodes.is_empty() {
        return Err(Error::InsufficientSamples("no interior nodes left for residuals".into()));
    }
    let tangential = |f: &Fields, j: usize, deriv_p: f64| dot(vel[j], f.fr[j].tangent()) * deriv_p / f.fr[j].speed();

    let mut theta_heat = 0.0f64;
    let mut theta_sq = 0.0f64;
    let mut d_beta = Vec::with_capacity(nodes.len());
    // θ² on both ends
    let sq = |f: &Fields| f.theta.iter().map(|v| v * v).collect::<Vec<f64>>();
    let (qa, qb) = (sq(&fa), sq(&fb));
    let closed = a.mode().is_closed();
    let lap_q = |s: &CurveSnapshot, f: &Fields, q: &[f64]| -> Result<Vec<f64>> {
        if closed {
            Ok(vec![0.0; q.len()])
        } else {
            geometry::laplacian_from_frames(s, &f.fr, q, 0.0).map(|l| l.values)
        }
    };
    let lqa = lap_q(a, &fa, &qa)?;
    let lqb = lap_q(b, &fb, &qb)?;
    for &j in &nodes {
        let fa_j = fa.lap_theta[j] + tangential(&fa, j, fa.theta_p[j]);
        let fb_j = fb.lap_theta[j] + tangential(&fb, j, fb.theta_p[j]);
        theta_heat = theta_heat.max(((fb.theta[j] - fa.theta[j]) / dt - 0.5 * (fa_j + fb_j)).abs());

        let ga = fa.lap_beta[j] - 2.0 * fa.theta[j] + tangential(&fa, j, fa.fr[j].liouville_density());
        let gb = fb.lap_beta[j] - 2.0 * fb.theta[j] + tangential(&fb, j, fb.fr[j].liouville_density());
        d_beta.push((fb.beta[j] - fa.beta[j]) / dt - 0.5 * (ga + gb));

        let vna = fa.fr[j].normal_speed();
        let vnb = fb.fr[j].normal_speed();
        let qa_j = lqa[j] - 2.0 * vna * vna + tangential(&fa, j, 2.0 * fa.theta[j] * fa.theta_p[j]);
        let qb_j = lqb[j] - 2.0 * vnb * vnb + tangential(&fb, j, 2.0 * fb.theta[j] * fb.theta_p[j]);
        theta_sq = theta_sq.max(((qb[j] - qa[j]) / dt - 0.5 * (qa_j + qb_j)).abs());
    }
    let theta_sq = (!closed).then_some(theta_sq);
    let (dmin, dmax) = d_beta.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let beta_offset = 0.5 * (dmin + dmax);
    let beta_heat = 0.5 * (dmax - dmin);

    let radial_law = if a.mode().is_radial() {
        let (ra, rb) = (a.values(), b.values());
        let mut worst = 0.0f64;
        for &j in &nodes {
            let lhs = (rb[j] - ra[j]) / dt;
            let rhs = -0.5 * (fa.theta_p[j] / ra[j] + fb.theta_p[j] / rb[j]);
            worst = worst.max((lhs - rhs).abs());
        }
        Some(worst)
    } else {
        None
    };

    let cosine = if a.mode().is_closed() {
        // cos w is multivalued around a closed curve with holonomy
        None
    } else {
        let t0 = settings.cosine_t0;
        let w = |f: &Fields, offset: f64| -> Vec<f64> {
            f.beta.iter().zip(&f.theta).map(|(b, th)| b - offset + 2.0 * (f.t - t0) * th).collect()
        };
        let ua: Vec<f64> = w(&fa, 0.0).iter().map(|v| v.cos()).collect();
        let ub: Vec<f64> = w(&fb, beta_offset * dt).iter().map(|v| v.cos()).collect();
        let lua = geometry::laplacian_from_frames(a, &fa.fr, &ua, 0.0)?.values;
        let lub = geometry::laplacian_from_frames(b, &fb.fr, &ub, 0.0)?.values;
        let dua = geometry::param_derivative(a, &ua, 0.0)?;
        let dub = geometry::param_derivative(b, &ub, 0.0)?;
        let k = |f: &Fields, u: &[f64], lu: &[f64], du: &[f64], j: usize| {
            let fr = &f.fr[j];
            let g = dot(fr.pos, fr.normal()) + 2.0 * (t0 - f.t) * fr.normal_speed();
            lu[j] + u[j] * g * g + tangential(f, j, du[j])
        };
        let mut worst = 0.0f64;
        for &j in &nodes {
            let lhs = (ub[j] - ua[j]) / dt;
            let rhs = 0.5 * (k(&fa, &ua, &lua, &dua, j) + k(&fb, &ub, &lub, &dub, j));
            worst = worst.max((lhs - rhs).abs());
        }
        Some(worst)
    };
    Ok(EvolutionResiduals { theta_heat, beta_heat, beta_offset, radial_law, cosine, theta_sq })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coarea {
    pub total_variation: f64,
    pub level_count_integral: f64,
    pub residual: f64,
}

/// `∫|θ'| dp` against `∫ #{p : θ(p) = u} du` for the piecewise-linear angle
/// profile through the nodes.
pub fn coarea_check(snap: &CurveSnapshot) -> Result<Coarea> {
    let theta = geometry::lagrangian_angle(snap)?;
    let p = snap.oriented_params();
    let mut seg: Vec<(f64, f64, f64)> = Vec::with_capacity(theta.len()); // (θ0, θ1, Δp)
    for j in 0..theta.len() - 1 {
        seg.push((theta[j], theta[j + 1], p[j + 1] - p[j]));
    }
    if snap.mode().is_closed() {
        let n = theta.len();
        seg.push((theta[n - 1], theta[0] + geometry::angle_jump(&theta, snap), p[0] + TAU - p[n - 1]));
    }
    // left: integral of |slope| over each linear piece
    let total_variation: f64 = seg.iter().map(|&(a, b, dp)| ((b - a) / dp).abs() * dp.abs()).sum();
    // right: sweep over levels, counting pieces whose range covers each level
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * seg.len());
    for &(a, b, _) in &seg {
        if a != b {
            events.push((a.min(b), 1));
            events.push((a.max(b), -1));
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut level_count_integral = 0.0;
    let mut active = 0i32;
    let mut prev = f64::NEG_INFINITY;
    for (u, delta) in events {
        if active > 0 {
            level_count_integral += f64::from(active) * (u - prev);
        }
        active += delta;
        prev = u;
    }
    Ok(Coarea { total_variation, level_count_integral, residual: (total_variation - level_count_integral).abs() })
}

/// `sup_j |2(t−T)θ' + ⟨iγ, γ'⟩| / |γ'|` — the self-shrinker identity
/// `2(t−T) dθ + λ = 0` measured per unit length.
pub fn shrinker_identity(snap: &CurveSnapshot, singular_t: f64) -> Result<f64> {
    shrinker_identity_in_ball(snap, singular_t, f64::INFINITY)
}

/// As [`shrinker_identity`], restricted to nodes with `|γ| ≤ radius`.
pub fn shrinker_identity_in_ball(snap: &CurveSnapshot, singular_t: f64, radius: f64) -> Result<f64> {
    if !(singular_t > snap.t()) {
        return Err(Error::KernelTime { kernel_t: singular_t, t: snap.t() });
    }
    let fr = geometry::frames(snap)?;
    let theta = geometry::angle_from_frames(snap, &fr)?;
    let dtheta = geometry::param_derivative(snap, &theta, geometry::angle_jump(&theta, snap))?;
    let s = snap.t() - singular_t;
    let mut worst = 0.0f64;
    for (f, d) in fr.iter().zip(&dtheta) {
        if f.pos.norm() <= radius {
            worst = worst.max((2.0 * s * d + f.liouville_density()).abs() / f.speed());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRatio {
    pub max_ratio: f64,
    pub at_radius: f64,
    pub ratios: Vec<f64>,
}

/// `max_r H²(L ∩ B_r(x₀)) / r²` over the given radii, with the surface area
/// reduced to the profile polygon.
pub fn area_ratio_monitor(snap: &CurveSnapshot, radii: &[f64], x0: Point2) -> Result<AreaRatio> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::param("area ratio radii must be positive"));
    }
    let segs = geometry::polygon_segments(snap);
    let ratios: Vec<f64> = radii.iter().map(|&r| surface_area_in_ball(&segs, r, x0) / (r * r)).collect();
    let (k, &max_ratio) = ratios.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
    Ok(AreaRatio { max_ratio, at_radius: radii[k], ratios })
}

/// `∫ |z| ds` over the part of the polygon inside `|z − c| ≤ rho`.
pub(crate) fn clipped_moment(segs: &[(C64, C64)], c: C64, rho: f64) -> f64 {
    let mut total = 0.0;
    for &(z0, z1) in segs {
        if let Some((s0, s1)) = geometry::segment_in_disk(z0, z1, c, rho) {
            let d = z1 - z0;
            let len = d.norm();
            let f = |s: f64| (z0 + d * s).norm() * len;
            // |z| has a kink where the segment passes the origin
            let foot = if d.norm_sqr() > 0.0 { -dot(z0, d) / d.norm_sqr() } else { s0 };
            total += if foot > s0 && foot < s1 {
                quad::gauss5(s0, foot, f) + quad::gauss5(foot, s1, f)
            } else {
                quad::gauss5(s0, s1, f)
            };
        }
    }
    total
}

fn surface_area_in_ball(segs: &[(C64, C64)], r: f64, x0: Point2) -> f64 {
    if x0.is_origin() {
        return TAU * clipped_moment(segs, C64::new(0.0, 0.0), r);
    }
    // Per rotation angle α the ball cuts the profile plane in a disk around
    // c_α = a cos α + b sin α.
    let m = 256;
    let h = TAU / m as f64;
    (0..m)
        .map(|k| {
            let alpha = k as f64 * h;
            let c = x0.a * alpha.cos() + x0.b * alpha.sin();
            let off = x0.a.norm_sqr() + x0.b.norm_sqr() - c.norm_sqr();
            let rho2 = r * r - off;
            if rho2 > 0.0 {
                clipped_moment(segs, c, rho2.sqrt()) * h
            } else {
                0.0
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maslov {
    pub winding: i64,
    pub holonomy: f64,
}

/// Winding of the Lagrangian angle around a closed profile, and `∮λ`.
pub fn maslov_winding(snap: &CurveSnapshot) -> Result<Maslov> {
    if !snap.mode().is_closed() {
        return Err(Error::NotApplicable { op: "maslov_winding", mode: snap.mode().to_string() });
    }
    let fr = geometry::frames(snap)?;
    let theta = geometry::angle_from_frames(snap, &fr)?;
    let jump = geometry::angle_jump(&theta, snap);
    let holonomy = geometry::primitive_from_frames(snap, &fr).holonomy;
    Ok(Maslov { winding: (jump / TAU).round() as i64, holonomy })
}

/// Per-tick monitor readings. Missing entries are monitors that do not apply
/// to the snapshot (or pair) at hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsFrame {
    pub t: f64,
    pub step: u64,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub min_radius: f64,
    pub max_curvature: Option<f64>,
    pub sturm_counts: Vec<Option<u32>>,
    pub critical_points: Option<u32>,
    pub symmetry_residual: Option<f64>,
    pub max_radial_speed: Option<f64>,
    pub sector_areas: Vec<Option<f64>>,
    pub angle_differences: Vec<Option<f64>>,
    pub area_rates: Vec<Option<f64>>,
    pub area_law_residual: Option<f64>,
    pub area_bound_holds: Option<bool>,
    pub coarea_residual: Option<f64>,
    pub theta_heat_residual: Option<f64>,
    pub beta_heat_residual: Option<f64>,
    pub radial_law_residual: Option<f64>,
    pub cosine_residual: Option<f64>,
    pub theta_sq_residual: Option<f64>,
    pub shrinker_residual: Option<f64>,
    pub area_ratio_max: Option<f64>,
    pub maslov_winding: Option<i64>,
    pub holonomy: Option<f64>,
}

/// Evaluate the whole suite on `cur`, using `prev` (one step earlier on the
/// same grid) for the time-differenced residuals.
pub fn diagnose(prev: Option<&CurveSnapshot>, cur: &CurveSnapshot, step: u64, settings: &MonitorSettings) -> DiagnosticsFrame {
    let open = !cur.mode().is_closed();
    let theta = geometry::lagrangian_angle(cur).ok();
    let (theta_min, theta_max) = match &theta {
        Some(th) => {
            (Some(th.iter().copied().fold(f64::INFINITY, f64::min)), Some(th.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
        }
        None => (None, None),
    };
    let max_curvature = geometry::frames(cur).ok().map(|fr| flow::max_curvature(&fr));
    let beta = cur.beta();
    let sturm_counts = settings
        .sturm_fractions
        .iter()
        .map(|f| match (open, beta) {
            (true, Some(b)) => sturmian_count(cur, f * b).ok().flatten(),
            _ => None,
        })
        .collect();
    let shape = if open && beta.is_some() { shape_checks(cur, settings.radial_speed_tol).ok() } else { None };
    let eps_ok = |e: f64| beta.is_some_and(|b| e > 0.0 && e < 0.5 * b);
    let sector_areas =
        settings.epsilons.iter().map(|&e| eps_ok(e).then(|| geometry::sector_area(cur, e).ok()).flatten()).collect();
    let angle_differences: Vec<Option<f64>> =
        settings.epsilons.iter().map(|&e| eps_ok(e).then(|| angle_difference(cur, e).ok()).flatten()).collect();
    let pair = prev.filter(|p| check_pair(p, cur, settings.max_relative_change).is_ok());
    let laws: Vec<Option<AreaLawInterval>> = settings
        .epsilons
        .iter()
        .map(|&e| match pair {
            Some(p) if eps_ok(e) => area_law_residual(&[p.clone(), cur.clone()], e).ok().and_then(|v| v.first().copied()),
            _ => None,
        })
        .collect();
    let area_rates = laws.iter().map(|l| l.map(|l| l.rate)).collect();
    let area_law_residual = laws.iter().flatten().map(|l| l.residual).reduce(f64::max);
    let area_bound_holds = {
        let b: Vec<bool> = settings
            .epsilons
            .iter()
            .zip(&angle_differences)
            .filter_map(|(&e, d)| d.map(|d| d < area_rate_bound(beta.unwrap_or(PI), e)))
            .collect();
        (!b.is_empty()).then(|| b.iter().all(|&x| x))
    };
    let evo = pair.and_then(|p| evolution_residuals(p, cur, settings).ok());
    let shrinker_residual = settings.shrinker_t.and_then(|tt| shrinker_identity(cur, tt).ok());
    let area_ratio_max = area_ratio_monitor(cur, &settings.area_radii, Point2::origin()).ok().map(|a| a.max_ratio);
    let (maslov_winding, holonomy) = if open {
        (None, geometry::liouville_primitive(cur).ok().map(|p| p.holonomy))
    } else {
        match maslov_winding(cur) {
            Ok(m) => (Some(m.winding), Some(m.holonomy)),
            Err(_) => (None, None),
        }
    };
    DiagnosticsFrame {
        t: cur.t(),
        step,
        theta_min,
        theta_max,
        min_radius: flow::min_radius(cur),
        max_curvature,
        sturm_counts,
        critical_points: shape.map(|s| s.critical_points),
        symmetry_residual: shape.map(|s| s.symmetry_residual),
        max_radial_speed: shape.map(|s| s.max_radial_speed),
        sector_areas,
        angle_differences,
        area_rates,
        area_law_residual,
        area_bound_holds,
        coarea_residual: coarea_check(cur).ok().map(|c| c.residual),
        theta_heat_residual: evo.map(|e| e.theta_heat),
        beta_heat_residual: evo.map(|e| e.beta_heat),
        radial_law_residual: evo.and_then(|e| e.radial_law),
        cosine_residual: evo.and_then(|e| e.cosine),
        theta_sq_residual: evo.and_then(|e| e.theta_sq),
        shrinker_residual,
        area_ratio_max,
        maslov_winding,
        holonomy,
    }
}

/// Column names of the diagnostics CSV, in order.
pub fn frame_header(settings: &MonitorSettings) -> Vec<String> {
    let mut h: Vec<String> = ["t", "step", "theta_min", "theta_max", "min_radius", "max_curvature"].map(String::from).to_vec();
    h.extend(settings.sturm_fractions.iter().map(|f| format!("sturm_{f}")));
    h.extend(["critical_points", "symmetry_residual", "max_radial_speed"].map(String::from));
    h.extend(settings.epsilons.iter().map(|e| format!("sector_area_{e}")));
    h.extend(settings.epsilons.iter().map(|e| format!("angle_difference_{e}")));
    h.extend(settings.epsilons.iter().map(|e| format!("area_rate_{e}")));
    h.extend(
        [
            "area_law_residual",
            "area_bound_holds",
            "coarea_residual",
            "theta_heat_residual",
            "beta_heat_residual",
            "radial_law_residual",
            "cosine_residual",
            "theta_sq_residual",
            "shrinker_residual",
            "area_ratio_max",
            "maslov_winding",
            "holonomy",
        ]
        .map(String::from),
    );
    h
}

pub fn frame_row(f: &DiagnosticsFrame) -> Vec<Cell> {
    let count = |c: Option<u32>| Cell::from(c.map(i64::from));
    let mut row = vec![
        Cell::Num(f.t),
        Cell::Int(f.step as i64),
        f.theta_min.into(),
        f.theta_max.into(),
        f.min_radius.into(),
        f.max_curvature.into(),
    ];
    row.extend(f.sturm_counts.iter().map(|&c| count(c)));
    row.extend([count(f.critical_points), f.symmetry_residual.into(), f.max_radial_speed.into()]);
    row.extend(f.sector_areas.iter().map(|&v| Cell::from(v)));
    row.extend(f.angle_differences.iter().map(|&v| Cell::from(v)));
    row.extend(f.area_rates.iter().map(|&v| Cell::from(v)));
    row.extend([
        f.area_law_residual.into(),
        f.area_bound_holds.map(i64::from).into(),
        f.coarea_residual.into(),
        f.theta_heat_residual.into(),
        f.beta_heat_residual.into(),
        f.radial_law_residual.into(),
        f.cosine_residual.into(),
        f.theta_sq_residual.into(),
        f.shrinker_residual.into(),
        f.area_ratio_max.into(),
        f.maslov_winding.into(),
        f.holonomy.into(),
    ]);
    row
}

//! Backward heat kernel, Gaussian densities, weighted angle moments and
//! parabolic rescaling.
//!
//! For `x₀ = (a, b) ∈ C²` and a surface point `(γ cos α, γ sin α)`,
//! `|x − x₀|² = |γ − c_α|² + |a|² + |b|² − |c_α|²` with
//! `c_α = a cos α + b sin α`, so every surface integral is a profile-curve
//! integral per rotation angle; for `x₀ = 0` the α-integral is a factor 2π.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, dot, CurveSnapshot, Mode, NodeFrame};
use crate::C64;

/// A point of C² = (z₁, z₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub a: C64,
    pub b: C64,
}

impl Point2 {
    pub fn origin() -> Self {
        Self { a: C64::new(0.0, 0.0), b: C64::new(0.0, 0.0) }
    }
    pub fn new(a: C64, b: C64) -> Self {
        Self { a, b }
    }
    pub fn is_origin(&self) -> bool {
        self.a.norm_sqr() + self.b.norm_sqr() == 0.0
    }
}

/// `Φ(x, t) = (4π(T−t))⁻¹ exp(−|x−x₀|²/(4(T−t)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub center: Point2,
    pub t: f64,
}

impl KernelSpec {
    pub fn at_origin(t: f64) -> Self {
        Self { center: Point2::origin(), t }
    }
}

/// Quadrature result with error bars. The true value lies in
/// `[value − error, value + error + tail]` (the tail accounts for the part
/// of the surface beyond the truncation radius of open profiles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub error: f64,
    pub tail: f64,
}

/// Trapezoid rule over the node grid and over every other node, returned as
/// (fine, coarse).
fn node_quadrature(snap: &CurveSnapshot, g: &[f64]) -> (f64, f64) {
    let p = snap.oriented_params();
    let n = p.len();
    let trap = |idx: &[usize], closed: bool| {
        let mut s = 0.0;
        for w in idx.windows(2) {
            s += 0.5 * (g[w[0]] + g[w[1]]) * (p[w[1]] - p[w[0]]).abs();
        }
        if closed {
            let (l, f) = (idx[idx.len() - 1], idx[0]);
            s += 0.5 * (g[l] + g[f]) * (p[f] + TAU - p[l]);
        }
        s
    };
    let closed = snap.mode().is_closed();
    let all: Vec<usize> = (0..n).collect();
    let mut half: Vec<usize> = (0..n).step_by(2).collect();
    if !closed && half.last() != Some(&(n - 1)) {
        half.push(n - 1);
    }
    (trap(&all, closed), trap(&half, closed))
}

struct Prepared {
    tau: f64,
    fr: Vec<NodeFrame>,
    weight: Vec<f64>,
}

fn prepare(snap: &CurveSnapshot, kernel: &KernelSpec) -> Result<Prepared> {
    let tau = kernel.t - snap.t();
    if !(tau > 0.0) {
        return Err(Error::KernelTime { kernel_t: kernel.t, t: snap.t() });
    }
    let fr = geometry::frames(snap)?;
    let weight = fr.iter().map(|f| f.pos.norm() * f.speed()).collect();
    Ok(Prepared { tau, fr, weight })
}

/// `∫_L m Φ dH²` where `m(j, c_α, d_α)` is a per-node multiplier that may
/// depend on the rotation angle through `c_α = a cos α + b sin α` and
/// `d_α = −a sin α + b cos α`.
fn reduced_integral(
    snap: &CurveSnapshot,
    kernel: &KernelSpec,
    prep: &Prepared,
    mult: impl Fn(usize, C64, C64) -> f64,
    tail_mult: impl Fn(usize) -> f64,
) -> Result<DensityEstimate> {
    let tau = prep.tau;
    let norm = 1.0 / (4.0 * PI * tau);
    let x0 = kernel.center;
    let off = x0.a.norm_sqr() + x0.b.norm_sqr();
    let slice = |alpha: f64| -> (f64, f64) {
        let (c, d) = if x0.is_origin() {
            (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
        } else {
            (x0.a * alpha.cos() + x0.b * alpha.sin(), -x0.a * alpha.sin() + x0.b * alpha.cos())
        };
        let g: Vec<f64> = prep
            .fr
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let d2 = (f.pos - c).norm_sqr() + off - c.norm_sqr();
                norm * (-d2 / (4.0 * tau)).exp() * mult(j, c, d) * prep.weight[j]
            })
            .collect();
        node_quadrature(snap, &g)
    };
    let (value, coarse) = if x0.is_origin() {
        let (f, c) = slice(0.0);
        (TAU * f, TAU * c)
    } else {
        // periodic trapezoid in α, doubled until converged
        let mut m = 32usize;
        let eval = |m: usize| {
            let h = TAU / m as f64;
            (0..m).fold((0.0, 0.0), |acc, k| {
                let (f, c) = slice(k as f64 * h);
                (acc.0 + f * h, acc.1 + c * h)
            })
        };
        let mut prev = eval(m);
        let mut trace = vec![prev.0];
        loop {
            m *= 2;
            let cur = eval(m);
            trace.push(cur.0);
            if (cur.0 - prev.0).abs() <= 1e-10 * cur.0.abs().max(1e-300) {
                break cur;
            }
            if m >= 4096 {
                return Err(Error::Quadrature { trace });
            }
            prev = cur;
        }
    };
    let tail = if snap.mode().is_closed() {
        0.0
    } else {
        let n = prep.fr.len();
        let reach = off.sqrt();
        // an end at the origin closes the surface off; it is not a truncation
        [0, n - 1]
            .iter()
            .filter(|&&j| prep.fr[j].pos.norm() > 0.0)
            .map(|&j| {
                let r = (prep.fr[j].pos.norm() - reach).max(0.0);
                tail_mult(j) * (-r * r / (4.0 * tau)).exp()
            })
            .sum()
    };
    Ok(DensityEstimate { value, error: (value - coarse).abs() / 3.0, tail })
}

/// Gaussian density `∫_L Φ dH²`.
pub fn gaussian_density(snap: &CurveSnapshot, kernel: &KernelSpec) -> Result<DensityEstimate> {
    let prep = prepare(snap, kernel)?;
    reduced_integral(snap, kernel, &prep, |_, _, _| 1.0, |_| 1.0)
}

/// `∫_L (θ − y)^{2q} Φ dH²`.
pub fn weighted_theta_moment(snap: &CurveSnapshot, q: u32, y: f64, kernel: &KernelSpec) -> Result<DensityEstimate> {
    if q == 0 {
        return Err(Error::param("moment order q must be positive"));
    }
    let prep = prepare(snap, kernel)?;
    let theta = geometry::angle_from_frames(snap, &prep.fr)?;
    let w: Vec<f64> = theta.iter().map(|t| (t - y).powi(2 * q as i32)).collect();
    reduced_integral(snap, kernel, &prep, |j, _, _| w[j], |j| w[j])
}

/// `∫_L |H − (x−x₀)⊥ / (2(t−T))|² Φ dH²`, zero exactly on self-shrinkers
/// centered at `(x₀, T)`.
pub fn huisken_defect(snap: &CurveSnapshot, kernel: &KernelSpec) -> Result<DensityEstimate> {
    let prep = prepare(snap, kernel)?;
    let s2 = 2.0 * (snap.t() - kernel.t);
    let vn: Vec<f64> = prep.fr.iter().map(NodeFrame::normal_speed).collect();
    let fr = &prep.fr;
    let mult = |j: usize, c: C64, d: C64| {
        let f = &fr[j];
        let n = f.normal();
        // normal space of L: (n cos α, n sin α) and (iγ/|γ|)(−sin α, cos α)
        let along_n = vn[j] - dot(f.pos - c, n) / s2;
        let along_rot = dot(C64::i() * f.pos, d) / f.pos.norm() / s2;
        along_n * along_n + along_rot * along_rot
    };
    let zero = C64::new(0.0, 0.0);
    let tail = |j: usize| mult(j, zero, zero);
    reduced_integral(snap, kernel, &prep, mult, tail)
}

/// Parabolic rescaling `x ↦ σ(x − x₀)`, `t ↦ σ²(t − T)` of the profile curve
/// about a point `x₀` of its plane. Rescaling about the origin keeps the
/// representation; any other center yields a polyline.
pub fn rescale(snap: &CurveSnapshot, sigma: f64, x0: C64, singular_t: f64) -> Result<CurveSnapshot> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("scale {sigma} must be positive")));
    }
    if !(snap.t() < singular_t) {
        return Err(Error::KernelTime { kernel_t: singular_t, t: snap.t() });
    }
    let tau = sigma * sigma * (snap.t() - singular_t);
    if x0 == C64::new(0.0, 0.0) {
        let v: Vec<f64> = snap.values().iter().map(|v| sigma * v).collect();
        return match snap.mode() {
            Mode::OpenRadial => CurveSnapshot::radial(tau, snap.beta().unwrap_or(PI), snap.params().to_vec(), v),
            Mode::ClosedRadial => CurveSnapshot::closed(tau, snap.params().to_vec(), v),
            Mode::OpenGraph => {
                let x = snap.params().iter().map(|x| sigma * x).collect();
                CurveSnapshot::graph(tau, snap.beta().unwrap_or(PI), x, v)
            }
            Mode::Polyline => CurveSnapshot::polyline(tau, snap.beta(), snap.stored_points().iter().map(|z| sigma * z).collect()),
        };
    }
    if snap.mode().is_closed() {
        return Err(Error::NotApplicable { op: "rescale about a point off the origin", mode: snap.mode().to_string() });
    }
    let mut pos = snap.positions();
    if snap.mode() == Mode::OpenGraph {
        pos.reverse();
    }
    CurveSnapshot::polyline(tau, snap.beta(), pos.iter().map(|z| sigma * (z - x0)).collect())
}

/// Every snapshot before `T` rescaled by `σ`.
pub fn rescale_trajectory(traj: &[CurveSnapshot], sigma: f64, x0: C64, singular_t: f64) -> Result<Vec<CurveSnapshot>> {
    traj.iter().filter(|s| s.t() < singular_t).map(|s| rescale(s, sigma, x0, singular_t)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledMember {
    pub sigma: f64,
    /// Requested rescaled time.
    pub target_tau: f64,
    /// Rescaled time of the snapshot actually used (nearest in time).
    pub tau: f64,
    pub snapshot: CurveSnapshot,
}

impl RescaledMember {
    /// Mismatch between requested and used rescaled time.
    pub fn time_error(&self) -> f64 {
        (self.tau - self.target_tau).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledSequence {
    pub x0: C64,
    pub singular_t: f64,
    /// Sorted by increasing σ.
    pub members: Vec<RescaledMember>,
}

/// For each scale σ take the trajectory snapshot nearest to `T + τ/σ²` and
/// rescale it. A scale is covered when that nearest snapshot lies within a
/// quarter of |τ| (in rescaled time) of the request.
pub fn extract_rescaled_sequence(
    traj: &[CurveSnapshot],
    x0: C64,
    singular_t: f64,
    scales: &[f64],
    tau: f64,
) -> Result<RescaledSequence> {
    if !(tau < 0.0) {
        return Err(Error::param(format!("rescaled time {tau} must be negative")));
    }
    let before: Vec<&CurveSnapshot> = traj.iter().filter(|s| s.t() < singular_t).collect();
    if before.is_empty() {
        return Err(Error::InsufficientSamples("no snapshot before the singular time".into()));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::param("scales must be distinct"));
    }
    let (first, last) = (before[0].t(), before[before.len() - 1].t());
    let mut members = Vec::with_capacity(sorted.len());
    for sigma in sorted {
        if !(sigma > 0.0) {
            return Err(Error::param(format!("scale {sigma} must be positive")));
        }
        let target = singular_t + tau / (sigma * sigma);
        let nearest = before.iter().min_by(|a, b| (a.t() - target).abs().total_cmp(&(b.t() - target).abs())).expect("nonempty");
        let used_tau = sigma * sigma * (nearest.t() - singular_t);
        if (used_tau - tau).abs() > 0.25 * tau.abs() {
            return Err(Error::Coverage { sigma, t: target, first, last });
        }
        members.push(RescaledMember {
            sigma,
            target_tau: tau,
            tau: used_tau,
            snapshot: rescale(nearest, sigma, x0, singular_t)?,
        });
    }
    Ok(RescaledSequence { x0, singular_t, members })
}

/// `∫_{B_R} (|H|² + |x⊥|²) dH²` about the origin (nodes with |γ| ≤ R).
pub fn ball_energy(snap: &CurveSnapshot, radius: f64) -> Result<f64> {
    let fr = geometry::frames(snap)?;
    let g: Vec<f64> = fr
        .iter()
        .map(|f| {
            if f.pos.norm() <= radius && f.pos.norm() > 0.0 {
                let v = f.normal_speed();
                let xn = dot(f.pos, f.normal());
                (v * v + xn * xn) * f.pos.norm() * f.speed()
            } else {
                0.0
            }
        })
        .collect();
    Ok(TAU * node_quadrature(snap, &g).0)
}

/// One row of the density time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub t: f64,
    pub density: DensityEstimate,
    pub moment: DensityEstimate,
    pub defect: DensityEstimate,
}

/// Density, `(θ − π)²` moment and defect for every snapshot before the
/// kernel time.
pub fn density_series(traj: &[CurveSnapshot], kernel: &KernelSpec, exec: crate::Executor) -> Result<Vec<DensityRow>> {
    let usable: Vec<&CurveSnapshot> = traj.iter().filter(|s| s.t() < kernel.t).collect();
    exec.map(&usable, |s| -> Result<DensityRow> {
        Ok(DensityRow {
            t: s.t(),
            density: gaussian_density(s, kernel)?,
            moment: weighted_theta_moment(s, 1, PI, kernel)?,
            defect: huisken_defect(s, kernel)?,
        })
    })
    .into_iter()
    .collect()
}

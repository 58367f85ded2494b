//! Profile curves and pointwise geometry of the induced Lagrangian surface
//! `L = {(γ cos α, γ sin α)}`.
//!
//! The surface metric in coordinates (p, α) is `diag(|γ'|², |γ|²)`, so the area
//! element is `|γ||γ'| dp dα`, and for α-independent functions
//!
//! ```text
//! Δf = (|γ||γ'|)⁻¹ ∂p( (|γ|/|γ'|) ∂p f ).
//! ```
//!
//! Every snapshot is parametrized so that increasing the oriented parameter
//! moves along the curve in the direction of increasing polar angle; the
//! Lagrangian angle `θ = arg(γγ')` and the Liouville density `⟨iγ, γ'⟩` are
//! computed with respect to that orientation.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::quad;
use crate::stencil;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `(x_j, u_j)` in coordinates rotated by `ρ = (π−β)/2`, x increasing.
    OpenGraph,
    /// `r_j e^{iφ_j}`, φ increasing inside `(0, β)`.
    OpenRadial,
    /// `r_j e^{iφ_j}`, φ increasing over one period.
    ClosedRadial,
    /// Generic open point list parametrized by chord length. Produced by
    /// rescaling about a point off the origin.
    Polyline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OpenGraph => "open-graph",
            Mode::OpenRadial => "open-radial",
            Mode::ClosedRadial => "closed-radial",
            Mode::Polyline => "polyline",
        }
    }

    pub fn is_closed(self) -> bool {
        self == Mode::ClosedRadial
    }

    pub fn is_radial(self) -> bool {
        matches!(self, Mode::OpenRadial | Mode::ClosedRadial)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open-graph" | "graph" => Ok(Mode::OpenGraph),
            "open-radial" | "radial" => Ok(Mode::OpenRadial),
            "closed-radial" | "closed" => Ok(Mode::ClosedRadial),
            "polyline" => Ok(Mode::Polyline),
            _ => Err(Error::param(format!("unknown mode `{s}`"))),
        }
    }
}

/// On-disk form of a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub version: u32,
    pub t: f64,
    pub mode: Mode,
    pub beta: Option<f64>,
    pub rotation: f64,
    pub params: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Immutable discretized profile curve at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSnapshot {
    t: f64,
    mode: Mode,
    beta: Option<f64>,
    rotation: f64,
    params: Vec<f64>,
    /// Stored coordinates: rotated frame in graph mode, physical otherwise.
    points: Vec<C64>,
    /// The evolved coordinate: r (radial), u (graph), |z| (polyline).
    values: Vec<f64>,
    /// `e^{iφ}` per node in radial modes (shared while the grid is unchanged).
    units: Arc<Vec<C64>>,
}

fn polar_units(phi: &[f64]) -> Arc<Vec<C64>> {
    Arc::new(phi.iter().map(|&p| C64::from_polar(1.0, p)).collect())
}

fn no_units() -> Arc<Vec<C64>> {
    Arc::new(Vec::new())
}

pub fn graph_rotation(beta: f64) -> f64 {
    0.5 * (PI - beta)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 && beta <= PI {
        Ok(())
    } else {
        Err(Error::param(format!("beta = {beta} outside (0, π]")))
    }
}

impl CurveSnapshot {
    pub fn radial(t: f64, beta: f64, phi: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        check_beta(beta)?;
        Self::radial_with_units(t, Mode::OpenRadial, Some(beta), phi, r, None)
    }

    fn radial_with_units(
        t: f64,
        mode: Mode,
        beta: Option<f64>,
        phi: Vec<f64>,
        r: Vec<f64>,
        units: Option<Arc<Vec<C64>>>,
    ) -> Result<Self> {
        let units = units.unwrap_or_else(|| polar_units(&phi));
        if units.len() != r.len() || phi.len() != r.len() {
            return Err(Error::snapshot("length mismatch"));
        }
        let points = units.iter().zip(&r).map(|(e, &r)| r * e).collect();
        let s = Self { t, mode, beta, rotation: 0.0, params: phi, points, values: r, units };
        s.validate()?;
        Ok(s)
    }

    pub fn closed(t: f64, phi: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        Self::radial_with_units(t, Mode::ClosedRadial, None, phi, r, None)
    }

    pub fn graph(t: f64, beta: f64, x: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        check_beta(beta)?;
        let points = x.iter().zip(&u).map(|(&x, &u)| C64::new(x, u)).collect();
        let s = Self {
            t,
            mode: Mode::OpenGraph,
            beta: Some(beta),
            rotation: graph_rotation(beta),
            params: x,
            points,
            values: u,
            units: no_units(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Open curve through the given points, parametrized by chord length.
    pub fn polyline(t: f64, beta: Option<f64>, points: Vec<C64>) -> Result<Self> {
        let mut params = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (j, z) in points.iter().enumerate() {
            if j > 0 {
                acc += (z - points[j - 1]).norm();
            }
            params.push(acc);
        }
        let values = points.iter().map(|z| z.norm()).collect();
        let s = Self { t, mode: Mode::Polyline, beta, rotation: 0.0, params, points, values, units: no_units() };
        s.validate()?;
        Ok(s)
    }

    pub fn from_record(rec: SnapshotRecord) -> Result<Self> {
        if rec.version != SNAPSHOT_VERSION {
            return Err(Error::snapshot(format!("unsupported version {}", rec.version)));
        }
        if rec.x.len() != rec.params.len() || rec.y.len() != rec.params.len() {
            return Err(Error::snapshot("params, x and y differ in length"));
        }
        let points: Vec<C64> = rec.x.iter().zip(&rec.y).map(|(&x, &y)| C64::new(x, y)).collect();
        let values = match rec.mode {
            Mode::OpenGraph => rec.y.clone(),
            _ => points.iter().map(|z| z.norm()).collect(),
        };
        match rec.mode {
            Mode::OpenGraph | Mode::OpenRadial => match rec.beta {
                Some(b) => check_beta(b)?,
                None => return Err(Error::snapshot("open profile without beta")),
            },
            Mode::ClosedRadial => {}
            Mode::Polyline => {}
        }
        if rec.mode == Mode::OpenGraph {
            let expected = graph_rotation(rec.beta.unwrap_or(PI));
            if (rec.rotation - expected).abs() > 1e-12 {
                return Err(Error::snapshot(format!("rotation {} inconsistent with beta", rec.rotation)));
            }
        } else if rec.rotation != 0.0 {
            return Err(Error::snapshot("rotation is only meaningful in graph mode"));
        }
        let units =
            if rec.mode.is_radial() && rec.params.iter().all(|p| p.is_finite()) { polar_units(&rec.params) } else { no_units() };
        let s =
            Self { t: rec.t, mode: rec.mode, beta: rec.beta, rotation: rec.rotation, params: rec.params, points, values, units };
        s.validate()?;
        if s.mode.is_radial() {
            for (j, (&p, z)) in s.params.iter().zip(&s.points).enumerate() {
                let d = (z.arg() - p).rem_euclid(TAU);
                if d.min(TAU - d) > 1e-9 {
                    return Err(Error::snapshot(format!("node {j}: polar angle disagrees with its parameter")));
                }
            }
        }
        Ok(s)
    }

    pub fn to_record(&self) -> SnapshotRecord {
        SnapshotRecord {
            version: SNAPSHOT_VERSION,
            t: self.t,
            mode: self.mode,
            beta: self.beta,
            rotation: self.rotation,
            params: self.params.clone(),
            x: self.points.iter().map(|z| z.re).collect(),
            y: self.points.iter().map(|z| z.im).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.params.len();
        if n < 3 {
            return Err(Error::snapshot(format!("{n} nodes; at least 3 required")));
        }
        if self.points.len() != n || self.values.len() != n {
            return Err(Error::snapshot("length mismatch"));
        }
        if !self.t.is_finite() {
            return Err(Error::snapshot("non-finite time"));
        }
        for j in 0..n {
            if !self.params[j].is_finite() || !self.points[j].re.is_finite() || !self.points[j].im.is_finite() {
                return Err(Error::snapshot(format!("node {j} is not finite")));
            }
            if j > 0 && !(self.params[j] > self.params[j - 1]) {
                return Err(Error::snapshot(format!("params not strictly increasing at node {j}")));
            }
        }
        if self.mode.is_radial() && self.values.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::snapshot("radial snapshot touches the origin"));
        }
        if self.mode == Mode::ClosedRadial && !(self.params[n - 1] - self.params[0] < TAU) {
            return Err(Error::snapshot("closed parameters span more than one period"));
        }
        Ok(())
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn mode(&self) -> Mode {
        self.mode
    }
    pub fn beta(&self) -> Option<f64> {
        self.beta
    }
    pub fn rotation(&self) -> f64 {
        self.rotation
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.params.len()
    }
    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Coordinates as stored (rotated frame in graph mode).
    pub fn stored_points(&self) -> &[C64] {
        &self.points
    }

    /// Node positions in the physical plane.
    pub fn positions(&self) -> Vec<C64> {
        if self.mode == Mode::OpenGraph {
            let rot = C64::from_polar(1.0, -self.rotation);
            self.points.iter().map(|z| z * rot).collect()
        } else {
            self.points.clone()
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        if self.mode.is_radial() {
            self.values.clone()
        } else {
            self.points.iter().map(|z| z.norm()).collect()
        }
    }

    /// Parameter along the curve orientation (graph mode runs toward -x).
    pub fn oriented_params(&self) -> Vec<f64> {
        if self.mode == Mode::OpenGraph {
            self.params.iter().map(|x| -x).collect()
        } else {
            self.params.clone()
        }
    }

    /// Index of the node that starts the orientation (the φ → 0⁺ end).
    pub fn anchor(&self) -> usize {
        if self.mode == Mode::OpenGraph {
            self.len() - 1
        } else {
            0
        }
    }

    pub fn with_time(&self, t: f64) -> Self {
        Self { t, ..self.clone() }
    }

    /// Same mode and parameters with new evolved values.
    pub(crate) fn with_values(&self, t: f64, values: Vec<f64>) -> Result<Self> {
        match self.mode {
            Mode::OpenRadial | Mode::ClosedRadial => {
                Self::radial_with_units(t, self.mode, self.beta, self.params.clone(), values, Some(self.units.clone()))
            }
            Mode::OpenGraph => Self::graph(t, self.beta.unwrap_or(PI), self.params.clone(), values),
            Mode::Polyline => Err(Error::NotApplicable { op: "with_values", mode: self.mode.to_string() }),
        }
    }

    /// Sum of chord lengths (including the closing chord for closed curves).
    pub fn polygon_length(&self) -> f64 {
        let p = &self.points;
        let mut l: f64 = p.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        if self.mode.is_closed() {
            l += (p[0] - p[p.len() - 1]).norm();
        }
        l
    }
}

/// Position and first two derivatives with respect to the oriented parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFrame {
    pub pos: C64,
    pub d1: C64,
    pub d2: C64,
}

impl NodeFrame {
    pub fn speed(&self) -> f64 {
        self.d1.norm_sqr().sqrt()
    }
    pub fn tangent(&self) -> C64 {
        self.d1 / self.d1.norm()
    }
    /// Unit normal `n = iT`.
    pub fn normal(&self) -> C64 {
        C64::i() * self.tangent()
    }
    /// Signed curvature with respect to `n`.
    pub fn curvature(&self) -> f64 {
        let s2 = self.d1.norm_sqr();
        (self.d1.conj() * self.d2).im / (s2 * s2.sqrt())
    }
    /// `⟨iγ, γ'⟩`, the Liouville form evaluated on the parameter direction.
    pub fn liouville_density(&self) -> f64 {
        (self.pos.conj() * self.d1).im
    }
    /// Normal speed of the flow, `κ − ⟨γ, n⟩/|γ|²`; equals `∂θ/∂s`.
    pub fn normal_speed(&self) -> f64 {
        let n = self.normal();
        let pn = self.pos.re * n.re + self.pos.im * n.im;
        self.curvature() - pn / self.pos.norm_sqr()
    }
}

/// Dot product of plane vectors identified with complex numbers.
#[inline]
pub fn dot(a: C64, b: C64) -> f64 {
    a.re * b.re + a.im * b.im
}

pub fn frames(snap: &CurveSnapshot) -> Result<Vec<NodeFrame>> {
    let n = snap.len();
    let frames: Vec<NodeFrame> = match snap.mode {
        Mode::OpenRadial | Mode::ClosedRadial => {
            let rho: Vec<f64> = snap.values.iter().map(|r| r.ln()).collect();
            let d = if snap.mode.is_closed() {
                stencil::periodic(&snap.params, TAU, &rho, 0.0)
            } else {
                stencil::open(&snap.params, &rho)
            };
            (0..n)
                .map(|j| {
                    let r = snap.values[j];
                    let (l1, l2) = (d.d1[j], d.d2[j]);
                    let rp = r * l1;
                    let rpp = r * (l2 + l1 * l1);
                    let e = snap.units[j];
                    NodeFrame { pos: r * e, d1: C64::new(rp, r) * e, d2: C64::new(rpp - r, 2.0 * rp) * e }
                })
                .collect()
        }
        Mode::OpenGraph => {
            let d = stencil::open(&snap.params, &snap.values);
            let rot = C64::from_polar(1.0, -snap.rotation);
            (0..n)
                .map(|j| NodeFrame {
                    pos: snap.points[j] * rot,
                    d1: -C64::new(1.0, d.d1[j]) * rot,
                    d2: C64::new(0.0, d.d2[j]) * rot,
                })
                .collect()
        }
        Mode::Polyline => {
            let xs: Vec<f64> = snap.points.iter().map(|z| z.re).collect();
            let ys: Vec<f64> = snap.points.iter().map(|z| z.im).collect();
            let dx = stencil::open(&snap.params, &xs);
            let dy = stencil::open(&snap.params, &ys);
            (0..n)
                .map(|j| NodeFrame { pos: snap.points[j], d1: C64::new(dx.d1[j], dy.d1[j]), d2: C64::new(dx.d2[j], dy.d2[j]) })
                .collect()
        }
    };
    for (j, f) in frames.iter().enumerate() {
        let s = f.d1.norm_sqr();
        if !(s.is_finite() && s > 1e-300 && f.d2.re.is_finite() && f.d2.im.is_finite()) {
            return Err(Error::Resolution { node: j, reason: "degenerate tangent".into() });
        }
    }
    Ok(frames)
}

fn require_off_origin(fr: &[NodeFrame]) -> Result<()> {
    match fr.iter().position(|f| !(f.pos.norm_sqr() > 0.0)) {
        Some(j) => Err(Error::Resolution { node: j, reason: "node at the origin".into() }),
        None => Ok(()),
    }
}

/// Continuous lift of a sequence of angles, starting at `raw[0]`.
pub fn unwrap(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    for (j, &a) in raw.iter().enumerate() {
        if j > 0 {
            let d = a - raw[j - 1];
            offset -= TAU * (d / TAU).round();
        }
        out.push(a + offset);
    }
    out
}

pub(crate) fn angle_from_frames(snap: &CurveSnapshot, fr: &[NodeFrame]) -> Result<Vec<f64>> {
    require_off_origin(fr)?;
    let raw: Vec<f64> = fr.iter().map(|f| (f.pos * f.d1).arg()).collect();
    let mut theta = unwrap(&raw);
    let a = snap.anchor();
    let shift = TAU * (theta[a] / TAU).floor();
    for v in &mut theta {
        *v -= shift;
    }
    Ok(theta)
}

/// Lagrangian angle `θ = arg(γγ')`, lifted continuously along the curve with
/// the value at the φ → 0⁺ end in `[0, 2π)`.
pub fn lagrangian_angle(snap: &CurveSnapshot) -> Result<Vec<f64>> {
    let fr = frames(snap)?;
    angle_from_frames(snap, &fr)
}

/// Flow velocity `k − γ⊥/|γ|²` at every node.
pub fn velocity(snap: &CurveSnapshot) -> Result<Vec<C64>> {
    let fr = frames(snap)?;
    require_off_origin(&fr)?;
    Ok(fr.iter().map(|f| f.normal_speed() * f.normal()).collect())
}

/// Scalar normal speeds `⟨v, n⟩`.
pub fn normal_speeds(snap: &CurveSnapshot) -> Result<Vec<f64>> {
    let fr = frames(snap)?;
    require_off_origin(&fr)?;
    Ok(fr.iter().map(NodeFrame::normal_speed).collect())
}

/// `J∇θ = θ_s n` with `θ_s` from finite differences of the lifted angle.
pub fn angle_gradient_velocity(snap: &CurveSnapshot) -> Result<Vec<C64>> {
    let fr = frames(snap)?;
    let theta = angle_from_frames(snap, &fr)?;
    let dtheta = param_derivative(snap, &theta, angle_jump(&theta, snap))?;
    Ok(fr.iter().zip(dtheta).map(|(f, d)| (d / f.speed()) * f.normal()).collect())
}

/// Increment of the lifted angle over one period (closed curves only): the
/// lift along the nodes plus the wrapped increment across the closing chord.
pub(crate) fn angle_jump(theta: &[f64], snap: &CurveSnapshot) -> f64 {
    if snap.mode.is_closed() {
        let n = theta.len();
        let closing = (theta[0] - theta[n - 1] + PI).rem_euclid(TAU) - PI;
        theta[n - 1] + closing - theta[0]
    } else {
        0.0
    }
}

/// First derivative with respect to the oriented parameter.
pub fn param_derivative(snap: &CurveSnapshot, f: &[f64], jump: f64) -> Result<Vec<f64>> {
    if f.len() != snap.len() {
        return Err(Error::param("field length differs from node count"));
    }
    let p = snap.oriented_params();
    Ok(if snap.mode.is_closed() { stencil::periodic(&p, TAU, f, jump).d1 } else { stencil::open(&p, f).d1 })
}

/// Area density of the surface per unit `dp dα`: `|γ||γ'|`.
pub fn surface_weight(snap: &CurveSnapshot) -> Result<Vec<f64>> {
    Ok(frames(snap)?.iter().map(|f| f.pos.norm() * f.speed()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiouvillePrimitive {
    pub values: Vec<f64>,
    /// `∮ λ` for closed curves; zero for open profiles.
    pub holonomy: f64,
}

pub(crate) fn primitive_from_frames(snap: &CurveSnapshot, fr: &[NodeFrame]) -> LiouvillePrimitive {
    let p = snap.oriented_params();
    let l: Vec<f64> = fr.iter().map(NodeFrame::liouville_density).collect();
    let values = quad::cumulative_trapezoid(&p, &l);
    let holonomy = if snap.mode.is_closed() {
        let n = p.len();
        values[n - 1] + 0.5 * (l[n - 1] + l[0]) * (p[0] + TAU - p[n - 1])
    } else {
        0.0
    };
    LiouvillePrimitive { values, holonomy }
}

/// Primitive of the Liouville form along the curve, zero at the first node.
pub fn liouville_primitive(snap: &CurveSnapshot) -> Result<LiouvillePrimitive> {
    let fr = frames(snap)?;
    Ok(primitive_from_frames(snap, &fr))
}

/// Area of the sector `{u e^{iφ}: ε ≤ φ ≤ β−ε, 0 ≤ u ≤ r(φ)}`.
pub fn sector_area(snap: &CurveSnapshot, eps: f64) -> Result<f64> {
    let radial;
    let snap = match snap.mode {
        Mode::OpenRadial => snap,
        Mode::OpenGraph => {
            radial = to_radial(snap)?;
            &radial
        }
        m => return Err(Error::NotApplicable { op: "sector_area", mode: m.to_string() }),
    };
    let beta = snap.beta.expect("open profiles carry beta");
    if !(eps > 0.0 && eps <= 0.5 * beta + 1e-14) {
        return Err(Error::param(format!("eps = {eps} outside (0, β/2]")));
    }
    let (a, b) = (eps, beta - eps);
    if a >= b {
        return Ok(0.0);
    }
    let phi = &snap.params;
    let n = phi.len();
    if a < phi[0] || b > phi[n - 1] {
        return Err(Error::param(format!("eps = {eps} reaches beyond the truncated profile")));
    }
    let r2: Vec<f64> = snap.values.iter().map(|r| r * r).collect();
    let at = |s: f64| {
        let k = phi.partition_point(|&v| v <= s).clamp(1, n - 1) - 1;
        let w = (s - phi[k]) / (phi[k + 1] - phi[k]);
        (k, r2[k] + w * (r2[k + 1] - r2[k]))
    };
    let (ka, fa) = at(a);
    let (kb, fb) = at(b);
    if ka == kb {
        return Ok(0.25 * (b - a) * (fa + fb));
    }
    let mut s = 0.5 * (phi[ka + 1] - a) * (fa + r2[ka + 1]);
    for j in ka + 1..kb {
        s += 0.5 * (phi[j + 1] - phi[j]) * (r2[j] + r2[j + 1]);
    }
    s += 0.5 * (b - phi[kb]) * (r2[kb] + fb);
    Ok(0.5 * s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub values: Vec<f64>,
    /// Nodes evaluated with one-sided (lower order) stencils.
    pub low_order: Vec<usize>,
}

/// Surface Laplacian of an α-independent function given by node values.
pub fn induced_laplacian(snap: &CurveSnapshot, f: &[f64]) -> Result<Laplacian> {
    let fr = frames(snap)?;
    laplacian_from_frames(snap, &fr, f, 0.0)
}

/// Conservative discretization of `(|γ||γ'|)⁻¹ ∂p((|γ|/|γ'|) ∂p f)`.
///
/// `jump` is the period increment of a multivalued `f` on closed curves.
pub(crate) fn laplacian_from_frames(snap: &CurveSnapshot, fr: &[NodeFrame], f: &[f64], jump: f64) -> Result<Laplacian> {
    let n = snap.len();
    if n < 3 {
        return Err(Error::param("laplacian needs at least three nodes"));
    }
    if f.len() != n {
        return Err(Error::param("field length differs from node count"));
    }
    let p = snap.oriented_params();
    let a: Vec<f64> = fr.iter().map(|f| f.pos.norm() / f.speed()).collect();
    let w: Vec<f64> = fr.iter().map(|f| f.pos.norm() * f.speed()).collect();
    let closed = snap.mode.is_closed();
    let mut values = vec![0.0; n];
    let node = |j: isize| -> (f64, f64, f64) {
        // (p, f, a) at a possibly wrapped index
        if j < 0 {
            let k = (j + n as isize) as usize;
            (p[k] - TAU, f[k] - jump, a[k])
        } else if j >= n as isize {
            let k = (j - n as isize) as usize;
            (p[k] + TAU, f[k] + jump, a[k])
        } else {
            let k = j as usize;
            (p[k], f[k], a[k])
        }
    };
    let (lo, hi) = if closed { (0, n) } else { (1, n - 1) };
    for j in lo..hi {
        let (pm, fm, am) = node(j as isize - 1);
        let (p0, f0, a0) = node(j as isize);
        let (pp, fp, ap) = node(j as isize + 1);
        let gp = 0.5 * (a0 + ap) * (fp - f0) / (pp - p0);
        let gm = 0.5 * (am + a0) * (f0 - fm) / (p0 - pm);
        values[j] = (gp - gm) / (0.5 * (pp - pm)) / w[j];
    }
    let mut low_order = Vec::new();
    if !closed {
        for (j, k1, k2) in [(0, 1, 2), (n - 1, n - 2, n - 3)] {
            let xs = [p[j], p[k1], p[k2]];
            let (f1, f2) = stencil::one_sided(xs, [f[j], f[k1], f[k2]]);
            let (a1, _) = stencil::one_sided(xs, [a[j], a[k1], a[k2]]);
            values[j] = (a[j] * f2 + a1 * f1) / w[j];
            low_order.push(j);
        }
    }
    Ok(Laplacian { values, low_order })
}

/// Weight whose integral the regridder equidistributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonitorWeight {
    /// `ds`
    Arclength,
    /// `ds/|γ|`, uniform in `log r` along the asymptotic rays.
    LogPolar,
}

impl FromStr for MonitorWeight {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arclength" => Ok(MonitorWeight::Arclength),
            "log-polar" | "logpolar" => Ok(MonitorWeight::LogPolar),
            _ => Err(Error::param(format!("unknown regrid weight `{s}`"))),
        }
    }
}

impl fmt::Display for MonitorWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MonitorWeight::Arclength => "arclength",
            MonitorWeight::LogPolar => "log-polar",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegridPolicy {
    pub weight: MonitorWeight,
    /// Extra node density proportional to |κ| ds.
    pub curvature_gain: f64,
    /// Regrid once the largest/smallest monitor cell ratio exceeds this.
    pub max_ratio: f64,
    /// Allowed relative change of the polygon length.
    pub length_tol: f64,
}

impl Default for RegridPolicy {
    fn default() -> Self {
        Self { weight: MonitorWeight::LogPolar, curvature_gain: 1.0, max_ratio: 1.5, length_tol: 1e-3 }
    }
}

/// Cumulative monitor integral at the nodes (length n+1 for closed curves,
/// the last entry closing the loop).
fn monitor_cumulative(snap: &CurveSnapshot, fr: &[NodeFrame], policy: &RegridPolicy) -> Result<Vec<f64>> {
    let w: Vec<f64> = fr
        .iter()
        .map(|f| {
            let base = match policy.weight {
                MonitorWeight::Arclength => 1.0,
                MonitorWeight::LogPolar => 1.0 / f.pos.norm_sqr().sqrt(),
            };
            f.speed() * (base + policy.curvature_gain * f.curvature().abs())
        })
        .collect();
    if let Some(j) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Resolution { node: j, reason: "monitor weight not positive".into() });
    }
    let p = &snap.params;
    let n = p.len();
    let mut s = Vec::with_capacity(n + 1);
    s.push(0.0);
    for j in 1..n {
        s.push(s[j - 1] + 0.5 * (w[j] + w[j - 1]) * (p[j] - p[j - 1]).abs());
    }
    if snap.mode.is_closed() {
        s.push(s[n - 1] + 0.5 * (w[0] + w[n - 1]) * (p[0] + TAU - p[n - 1]));
    }
    Ok(s)
}

/// Largest over smallest monitor cell.
pub fn spacing_ratio(snap: &CurveSnapshot, policy: &RegridPolicy) -> Result<f64> {
    spacing_ratio_from_frames(snap, &frames(snap)?, policy)
}

pub(crate) fn spacing_ratio_from_frames(snap: &CurveSnapshot, fr: &[NodeFrame], policy: &RegridPolicy) -> Result<f64> {
    let s = monitor_cumulative(snap, fr, policy)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for w in s.windows(2) {
        let d = w[1] - w[0];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok(hi / lo)
}

/// Resample the nodes so the monitor integral is equidistributed.
///
/// Parameter and evolved coordinate are interpolated as monotone cubics of
/// the cumulative monitor; open endpoints are kept bit-for-bit.
pub fn regrid(snap: &CurveSnapshot, policy: &RegridPolicy) -> Result<CurveSnapshot> {
    let fr = frames(snap)?;
    let s = monitor_cumulative(snap, &fr, policy)?;
    let n = snap.len();
    let out = match snap.mode {
        Mode::OpenRadial | Mode::OpenGraph => {
            let v: Vec<f64> =
                if snap.mode == Mode::OpenRadial { snap.values.iter().map(|r| r.ln()).collect() } else { snap.values.clone() };
            let pp = Pchip::new(&s, &snap.params)?;
            let pv = Pchip::new(&s, &v)?;
            let total = s[n - 1];
            let mut params = Vec::with_capacity(n);
            let mut vals = Vec::with_capacity(n);
            for k in 0..n {
                let target = total * k as f64 / (n - 1) as f64;
                if k == 0 || k == n - 1 {
                    params.push(snap.params[k]);
                    vals.push(snap.values[k]);
                } else {
                    params.push(pp.eval(target));
                    let x = pv.eval(target);
                    vals.push(if snap.mode == Mode::OpenRadial { x.exp() } else { x });
                }
            }
            snap.rebuild(params, vals)?
        }
        Mode::ClosedRadial => {
            const G: usize = 3;
            let total = s[n];
            let mut se = Vec::with_capacity(n + 2 * G);
            let mut pe = Vec::with_capacity(n + 2 * G);
            let mut ve = Vec::with_capacity(n + 2 * G);
            for j in (n - G)..n {
                se.push(s[j] - total);
                pe.push(snap.params[j] - TAU);
                ve.push(snap.values[j].ln());
            }
            for j in 0..n {
                se.push(s[j]);
                pe.push(snap.params[j]);
                ve.push(snap.values[j].ln());
            }
            for j in 0..G {
                se.push(s[j] + total);
                pe.push(snap.params[j] + TAU);
                ve.push(snap.values[j].ln());
            }
            let pp = Pchip::new(&se, &pe)?;
            let pv = Pchip::new(&se, &ve)?;
            let mut params = vec![snap.params[0]];
            let mut vals = vec![snap.values[0]];
            for k in 1..n {
                let target = total * k as f64 / n as f64;
                params.push(pp.eval(target));
                vals.push(pv.eval(target).exp());
            }
            snap.rebuild(params, vals)?
        }
        Mode::Polyline => {
            let xs: Vec<f64> = snap.points.iter().map(|z| z.re).collect();
            let ys: Vec<f64> = snap.points.iter().map(|z| z.im).collect();
            let px = Pchip::new(&s, &xs)?;
            let py = Pchip::new(&s, &ys)?;
            let total = s[n - 1];
            let pts = (0..n)
                .map(|k| {
                    if k == 0 || k == n - 1 {
                        snap.points[k]
                    } else {
                        let target = total * k as f64 / (n - 1) as f64;
                        C64::new(px.eval(target), py.eval(target))
                    }
                })
                .collect();
            CurveSnapshot::polyline(snap.t, snap.beta, pts)?
        }
    };
    let (l0, l1) = (snap.polygon_length(), out.polygon_length());
    if (l1 - l0).abs() > policy.length_tol * l0 {
        return Err(Error::Interpolation(format!("regrid changed the length from {l0} to {l1}")));
    }
    Ok(out)
}

impl CurveSnapshot {
    fn rebuild(&self, params: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        match self.mode {
            Mode::OpenRadial => Self::radial(self.t, self.beta.unwrap_or(PI), params, values),
            Mode::ClosedRadial => Self::closed(self.t, params, values),
            Mode::OpenGraph => Self::graph(self.t, self.beta.unwrap_or(PI), params, values),
            Mode::Polyline => unreachable!("polylines are rebuilt from points"),
        }
        .map_err(|e| Error::Interpolation(format!("resampled curve is invalid: {e}")))
    }
}

/// Re-express an open profile in polar form `r(φ)`.
pub fn to_radial(snap: &CurveSnapshot) -> Result<CurveSnapshot> {
    match snap.mode {
        Mode::OpenRadial | Mode::ClosedRadial => Ok(snap.clone()),
        Mode::OpenGraph | Mode::Polyline => {
            let mut pos = snap.positions();
            if snap.mode == Mode::OpenGraph {
                pos.reverse();
            }
            let phi = unwrap(&pos.iter().map(|z| z.arg()).collect::<Vec<_>>());
            let r: Vec<f64> = pos.iter().map(|z| z.norm()).collect();
            for j in 0..pos.len() {
                if !(r[j] > 0.0) || (j > 0 && !(phi[j] > phi[j - 1])) {
                    let node = if snap.mode == Mode::OpenGraph { pos.len() - 1 - j } else { j };
                    return Err(Error::NotRadialGraph { node });
                }
            }
            let beta = snap.beta.ok_or_else(|| Error::param("polyline without beta cannot become a radial profile"))?;
            CurveSnapshot::radial(snap.t, beta, phi, r)
        }
    }
}

/// Re-express an open radial profile as a graph over the rotated axis.
pub fn to_graph(snap: &CurveSnapshot) -> Result<CurveSnapshot> {
    match snap.mode {
        Mode::OpenGraph => Ok(snap.clone()),
        Mode::OpenRadial => {
            let beta = snap.beta.expect("open profiles carry beta");
            let rot = C64::from_polar(1.0, graph_rotation(beta));
            let mut z: Vec<C64> = snap.points.iter().map(|p| p * rot).collect();
            z.reverse();
            for j in 1..z.len() {
                if !(z[j].re > z[j - 1].re) {
                    return Err(Error::NotApplicable { op: "to_graph (x not monotone)", mode: snap.mode.to_string() });
                }
            }
            CurveSnapshot::graph(snap.t, beta, z.iter().map(|p| p.re).collect(), z.iter().map(|p| p.im).collect())
        }
        m => Err(Error::NotApplicable { op: "to_graph", mode: m.to_string() }),
    }
}

/// `r₀(φ) = sin(πφ/β)^(−β/π)`.
pub fn initial_radius(beta: f64, phi: f64) -> f64 {
    (PI * phi / beta).sin().powf(-beta / PI)
}

/// The parameter where `r₀` reaches `r_cut`.
pub fn truncation_angle(beta: f64, r_cut: f64) -> f64 {
    beta / PI * r_cut.powf(-PI / beta).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Clustering {
    Uniform,
    /// Cosine clustering toward φ = β/2.
    Cosine,
    /// Equidistribution of the regrid monitor on the exact initial curve.
    Equidistributed {
        weight: MonitorWeight,
        curvature_gain: f64,
    },
}

impl Default for Clustering {
    fn default() -> Self {
        Clustering::Equidistributed { weight: MonitorWeight::LogPolar, curvature_gain: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nodes: usize,
    pub clustering: Clustering,
    /// Truncation radius: the profile is cut where `r₀ = r_cut`.
    pub r_cut: f64,
}

impl GridSpec {
    pub fn new(nodes: usize) -> Self {
        Self { nodes, clustering: Clustering::default(), r_cut: 20.0 }
    }
}

/// Symmetric grid on `[phi_lo, β − phi_lo]` following the clustering policy.
fn initial_angles(beta: f64, phi_lo: f64, grid: &GridSpec) -> Vec<f64> {
    let n = grid.nodes;
    let mid = 0.5 * beta;
    let half = n.div_ceil(2);
    // Left half, node positions measured by a coordinate ξ ∈ [0, 1] with the
    // middle of the grid at ξ = 1.
    let denom = if n % 2 == 1 { (n - 1) as f64 / 2.0 } else { n as f64 / 2.0 - 0.5 };
    let xi: Vec<f64> = (0..half).map(|k| k as f64 / denom).collect();
    let mut left: Vec<f64> = match grid.clustering {
        Clustering::Uniform => xi.iter().map(|x| phi_lo + (mid - phi_lo) * x).collect(),
        Clustering::Cosine => xi.iter().map(|x| mid - (mid - phi_lo) * (1.0 - (0.5 * PI * (1.0 - x)).cos())).collect(),
        Clustering::Equidistributed { weight, curvature_gain } => {
            // Monitor per unit φ on the exact initial curve:
            // |γ'| = r√(1+ρ'²), |γ'||κ| = |θ'−1| = |1 − π/β|.
            let m = 64 * n;
            let ratio = mid / phi_lo;
            let fine: Vec<f64> = (0..=m).map(|k| phi_lo * ratio.powf(k as f64 / m as f64)).collect();
            let kappa_term = curvature_gain * (1.0 - PI / beta).abs();
            let w: Vec<f64> = fine
                .iter()
                .map(|&p| {
                    let rp = -1.0 / (PI * p / beta).tan();
                    let stretch = (1.0 + rp * rp).sqrt();
                    match weight {
                        MonitorWeight::LogPolar => stretch + kappa_term,
                        MonitorWeight::Arclength => initial_radius(beta, p) * stretch + kappa_term,
                    }
                })
                .collect();
            let s = quad::cumulative_trapezoid(&fine, &w);
            let total = s[m];
            let inv = Pchip::new(&s, &fine).expect("monitor integral is increasing");
            xi.iter().map(|x| inv.eval(total * x)).collect()
        }
    };
    left[0] = phi_lo;
    if n % 2 == 1 {
        left[half - 1] = mid;
    }
    let mut phi = left.clone();
    for k in (0..n / 2).rev() {
        phi.push(beta - left[k]);
    }
    phi
}

fn check_grid(beta: f64, grid: &GridSpec) -> Result<()> {
    check_beta(beta)?;
    if grid.nodes < 16 {
        return Err(Error::param(format!("{} nodes cannot resolve the profile; at least 16 required", grid.nodes)));
    }
    if !(grid.r_cut > 1.0 && grid.r_cut.is_finite()) {
        return Err(Error::param(format!("r_cut = {} must exceed the minimum radius 1", grid.r_cut)));
    }
    Ok(())
}

fn mirrored_radii(beta: f64, phi: &[f64]) -> Vec<f64> {
    let n = phi.len();
    let mut r = vec![0.0; n];
    for j in 0..n.div_ceil(2) {
        r[j] = initial_radius(beta, phi[j]);
        r[n - 1 - j] = r[j];
    }
    r
}

/// Initial profile `r₀(φ) = sin(πφ/β)^(−β/π)` on `[φ_min, β − φ_min]`.
pub fn initial_profile(beta: f64, grid: &GridSpec) -> Result<CurveSnapshot> {
    check_grid(beta, grid)?;
    let phi_lo = truncation_angle(beta, grid.r_cut);
    let phi = initial_angles(beta, phi_lo, grid);
    let r = mirrored_radii(beta, &phi);
    CurveSnapshot::radial(0.0, beta, phi, r)
}

/// The same initial curve as a graph `u(x)` over the rotated axis, truncated
/// at `|x| = half_width` (or where `r₀ = r_cut` when no width is given).
pub fn initial_graph(beta: f64, grid: &GridSpec, half_width: Option<f64>) -> Result<CurveSnapshot> {
    check_grid(beta, grid)?;
    let rho = graph_rotation(beta);
    let x_of = |p: f64| initial_radius(beta, p) * (p + rho).cos();
    let phi_lo = match half_width {
        None => truncation_angle(beta, grid.r_cut),
        Some(w) => {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::param(format!("half width {w} must be positive")));
            }
            // x(φ) decreases from +∞ at φ = 0 to 0 at φ = β/2.
            let (mut lo, mut hi) = (0.0f64, 0.5 * beta);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if x_of(m) > w {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            0.5 * (lo + hi)
        }
    };
    let phi = initial_angles(beta, phi_lo, grid);
    let r = mirrored_radii(beta, &phi);
    let n = phi.len();
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; n];
    for j in 0..n.div_ceil(2) {
        let z = C64::from_polar(r[j], phi[j] + rho);
        // Reflection φ → β − φ is x → −x in the rotated frame.
        x[n - 1 - j] = z.re;
        u[n - 1 - j] = z.im;
        x[j] = -z.re;
        u[j] = z.im;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    CurveSnapshot::graph(0.0, beta, x, u)
}

/// Round circle of radius `r0` with uniformly spaced nodes.
pub fn circle(r0: f64, nodes: usize, t: f64) -> Result<CurveSnapshot> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::param(format!("circle radius {r0} must be positive")));
    }
    let phi: Vec<f64> = (0..nodes).map(|j| TAU * j as f64 / nodes as f64).collect();
    CurveSnapshot::closed(t, phi, vec![r0; nodes])
}

/// Ray `{u e^{iα} : u ∈ [u0, u1]}` as a polyline.
pub fn ray(alpha: f64, u0: f64, u1: f64, nodes: usize) -> Result<CurveSnapshot> {
    let dir = C64::from_polar(1.0, alpha);
    let pts = (0..nodes).map(|k| dir * (u0 + (u1 - u0) * k as f64 / (nodes - 1) as f64)).collect();
    CurveSnapshot::polyline(0.0, None, pts)
}

/// Full line through the origin in direction `e^{iα}`, sampled symmetrically
/// on `[-half, half]` (the origin itself is not a node when `nodes` is even).
pub fn line_through_origin(alpha: f64, half: f64, nodes: usize) -> Result<CurveSnapshot> {
    let dir = C64::from_polar(1.0, alpha);
    let pts = (0..nodes).map(|k| dir * (-half + 2.0 * half * k as f64 / (nodes - 1) as f64)).collect();
    CurveSnapshot::polyline(0.0, None, pts)
}

/// Parameter interval `[s0, s1] ⊂ [0, 1]` of the segment `z0 + s(z1 − z0)`
/// inside the closed disk `|z − c| ≤ rho`.
pub fn segment_in_disk(z0: C64, z1: C64, c: C64, rho: f64) -> Option<(f64, f64)> {
    let d = z1 - z0;
    let w = z0 - c;
    let a = d.norm_sqr();
    let cc = w.norm_sqr() - rho * rho;
    if a == 0.0 {
        return (cc <= 0.0).then_some((0.0, 1.0));
    }
    let b = dot(w, d);
    let disc = b * b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let s0 = ((-b - sq) / a).max(0.0);
    let s1 = ((-b + sq) / a).min(1.0);
    (s1 > s0).then_some((s0, s1))
}

/// Chords of the polygon in orientation order, including the closing chord
/// of closed curves.
pub fn polygon_segments(snap: &CurveSnapshot) -> Vec<(C64, C64)> {
    let mut p = snap.positions();
    if snap.mode() == Mode::OpenGraph {
        p.reverse();
    }
    let mut segs: Vec<(C64, C64)> = p.windows(2).map(|w| (w[0], w[1])).collect();
    if snap.mode().is_closed() {
        segs.push((p[p.len() - 1], p[0]));
    }
    segs
}

//! Explicit method-of-lines integration of the profile-curve flow.
//!
//! Parameters are frozen between regrids; only the evolved coordinate moves:
//!
//! * graph:  `u_t = u''/(1+u'²) + (x u' − u)/(x² + u²)`, ends held fixed;
//! * radial: `r_t = (r r'' − 2r² − 3r'²)/(r r'² + r³)`, ends held fixed;
//! * closed: the radial equation with periodic wrap.
//!
//! Derivatives of `r` are taken through `log r`, which is smooth on the
//! log-polar grids used along the asymptotic rays.

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Clustering, CurveSnapshot, GridSpec, Mode, NodeFrame, RegridPolicy};
use crate::monitors::{self, DiagnosticsFrame, MonitorSettings};
use crate::singularity::{self, BlowupEvent};
use crate::stencil;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Standard,
    Circle { r0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtPolicy {
    pub cfl_factor: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self { cfl_factor: 0.5, dt_min: 1e-15, dt_max: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub min_dist_tol: f64,
    pub max_curvature_cap: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self { min_dist_tol: 1e-4, max_curvature_cap: 1e5 }
    }
}

/// When trajectory snapshots and diagnostics are emitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cadence {
    /// Emit every this many accepted steps (0 disables).
    pub every_steps: usize,
    /// Also emit whenever `min|γ|` fell below this fraction of its value at
    /// the previous emission, so the approach to a singularity is sampled
    /// geometrically.
    pub radius_ratio: f64,
    /// A due emission waits until this many steps have passed since the last
    /// regrid (interpolation noise is damped within a few steps), but never
    /// longer than this many steps.
    pub settle_steps: usize,
}

impl Default for Cadence {
    fn default() -> Self {
        Self { every_steps: 500, radius_ratio: 0.8, settle_steps: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub beta: f64,
    pub mode: Mode,
    pub nodes: usize,
    /// `None` follows the regrid monitor (or is uniform when regridding is off).
    pub clustering: Option<Clustering>,
    pub r_cut: f64,
    /// Graph mode only: truncate at `|x| = half_width` instead of at `r_cut`.
    pub half_width: Option<f64>,
    pub dt: DtPolicy,
    pub t_end: f64,
    pub stop: StopCriteria,
    pub regrid: Option<RegridPolicy>,
    pub cadence: Cadence,
    pub family: Family,
    pub output_dir: Option<PathBuf>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            beta: 3.0 * PI / 4.0,
            mode: Mode::OpenRadial,
            nodes: 256,
            clustering: None,
            r_cut: 20.0,
            half_width: None,
            dt: DtPolicy::default(),
            t_end: 10.0,
            stop: StopCriteria::default(),
            regrid: Some(RegridPolicy::default()),
            cadence: Cadence::default(),
            family: Family::Standard,
            output_dir: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.beta > 0.0 && self.beta <= PI) {
            return bad(format!("beta = {} outside (0, π]", self.beta));
        }
        if self.nodes < 16 {
            return bad(format!("nodes = {} below the minimum of 16", self.nodes));
        }
        if !(self.dt.cfl_factor > 0.0 && self.dt.cfl_factor <= 1.0) {
            return bad(format!("cfl_factor = {} outside (0, 1]", self.dt.cfl_factor));
        }
        if !(self.dt.dt_min > 0.0 && self.dt.dt_min < self.dt.dt_max) {
            return bad(format!("need 0 < dt_min < dt_max, got {} and {}", self.dt.dt_min, self.dt.dt_max));
        }
        if !(self.stop.min_dist_tol > 0.0) {
            return bad(format!("min_dist_tol = {} must be positive", self.stop.min_dist_tol));
        }
        if !(self.stop.max_curvature_cap > 0.0) {
            return bad("max_curvature_cap must be positive".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if !(self.r_cut > 1.0) {
            return bad(format!("r_cut = {} must exceed 1", self.r_cut));
        }
        if let Some(p) = &self.regrid {
            if !(p.max_ratio > 1.0 && p.curvature_gain >= 0.0 && p.length_tol > 0.0) {
                return bad("regrid needs max_ratio > 1, curvature_gain >= 0, length_tol > 0".into());
            }
        }
        if !(self.cadence.radius_ratio > 0.0 && self.cadence.radius_ratio < 1.0) {
            return bad("snapshot radius ratio must lie in (0, 1)".into());
        }
        match (self.family, self.mode) {
            (Family::Circle { r0 }, Mode::ClosedRadial) if r0 > 0.0 => {}
            (Family::Circle { .. }, Mode::ClosedRadial) => return bad("circle radius must be positive".into()),
            (Family::Circle { .. }, _) => return bad("circle initial data requires closed-radial mode".into()),
            (Family::Standard, Mode::ClosedRadial) => return bad("closed-radial mode requires circle initial data".into()),
            (_, Mode::Polyline) => return bad("polyline snapshots cannot be evolved".into()),
            _ => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        let clustering = self.clustering.unwrap_or(match &self.regrid {
            Some(p) => Clustering::Equidistributed { weight: p.weight, curvature_gain: p.curvature_gain },
            None => Clustering::Uniform,
        });
        GridSpec { nodes: self.nodes, clustering, r_cut: self.r_cut }
    }

    pub fn initial_snapshot(&self) -> Result<CurveSnapshot> {
        self.validate()?;
        match (self.family, self.mode) {
            (Family::Circle { r0 }, _) => geometry::circle(r0, self.nodes, 0.0),
            (Family::Standard, Mode::OpenGraph) => geometry::initial_graph(self.beta, &self.grid(), self.half_width),
            (Family::Standard, _) => geometry::initial_profile(self.beta, &self.grid()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    ReachedTEnd,
    BlowupDetected,
    ResolutionExhausted,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::ReachedTEnd => "reached_t_end",
            Status::BlowupDetected => "blowup_detected",
            Status::ResolutionExhausted => "resolution_exhausted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub dt: f64,
    pub max_speed: f64,
    pub min_radius: f64,
    pub regridded: bool,
}

/// Why a step was not applied.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    /// A stage left the admissible set (node at or through the origin).
    Origin {
        node: usize,
    },
    NonFinite {
        node: usize,
    },
}

/// Right-hand side of the semi-discrete system. Fixed (Dirichlet) ends get 0.
pub struct Rhs {
    mode: Mode,
    params: Vec<f64>,
    // three-point weights for d1 and d2 at each node, with neighbour indices
    w1: Vec<[f64; 3]>,
    w2: Vec<[f64; 3]>,
    nb: Vec<[usize; 3]>,
    // periodic correction: the parameter shift is folded into the weights,
    // and ρ has no jump, so only indices wrap
    scratch: Vec<f64>,
}

impl Rhs {
    pub fn new(snap: &CurveSnapshot) -> Result<Self> {
        let mode = snap.mode();
        if mode == Mode::Polyline {
            return Err(Error::NotApplicable { op: "evolution", mode: mode.to_string() });
        }
        let p = snap.params();
        let n = p.len();
        let mut w1 = vec![[0.0; 3]; n];
        let mut w2 = vec![[0.0; 3]; n];
        let mut nb = vec![[0usize; 3]; n];
        let unit = |k: usize| {
            let mut e = [0.0; 3];
            e[k] = 1.0;
            e
        };
        for j in 0..n {
            let (xs, idx) = if mode.is_closed() {
                let jm = (j + n - 1) % n;
                let jp = (j + 1) % n;
                let xm = if j == 0 { p[jm] - TAU } else { p[jm] };
                let xp = if j == n - 1 { p[jp] + TAU } else { p[jp] };
                ([xm, p[j], xp], [jm, j, jp])
            } else if j == 0 || j == n - 1 {
                // ends are frozen; weights unused
                ([0.0, 1.0, 2.0], [j, j, j])
            } else {
                ([p[j - 1], p[j], p[j + 1]], [j - 1, j, j + 1])
            };
            nb[j] = idx;
            for k in 0..3 {
                let (a, b) = stencil::centered(xs, unit(k));
                w1[j][k] = a;
                w2[j][k] = b;
            }
        }
        Ok(Self { mode, params: p.to_vec(), w1, w2, nb, scratch: vec![0.0; n] })
    }

    /// Evaluate `dv/dt` for evolved values `v` into `out`.
    pub fn eval(&mut self, v: &[f64], out: &mut [f64]) -> std::result::Result<(), Rejection> {
        let n = v.len();
        match self.mode {
            Mode::OpenRadial | Mode::ClosedRadial => {
                for j in 0..n {
                    let r = v[j];
                    if !r.is_finite() {
                        return Err(Rejection::NonFinite { node: j });
                    }
                    if r <= 0.0 {
                        return Err(Rejection::Origin { node: j });
                    }
                    self.scratch[j] = r.ln();
                }
                let (lo, hi) = if self.mode.is_closed() { (0, n) } else { (1, n - 1) };
                for j in lo..hi {
                    let [a, b, c] = self.nb[j];
                    let (x, y, z) = (self.scratch[a], self.scratch[b], self.scratch[c]);
                    let l1 = self.w1[j][0] * x + self.w1[j][1] * y + self.w1[j][2] * z;
                    let l2 = self.w2[j][0] * x + self.w2[j][1] * y + self.w2[j][2] * z;
                    // (r r'' − 2r² − 3r'²)/(r r'² + r³) with r' = r ρ', r'' = r(ρ'' + ρ'²)
                    out[j] = (l2 - 2.0 * l1 * l1 - 2.0) / (v[j] * (1.0 + l1 * l1));
                }
                if !self.mode.is_closed() {
                    out[0] = 0.0;
                    out[n - 1] = 0.0;
                }
            }
            Mode::OpenGraph => {
                for j in 0..n {
                    if !v[j].is_finite() {
                        return Err(Rejection::NonFinite { node: j });
                    }
                }
                for j in 1..n - 1 {
                    let x = self.params[j];
                    let (a, b, c) = (v[j - 1], v[j], v[j + 1]);
                    let u1 = self.w1[j][0] * a + self.w1[j][1] * b + self.w1[j][2] * c;
                    let u2 = self.w2[j][0] * a + self.w2[j][1] * b + self.w2[j][2] * c;
                    let d = x * x + b * b;
                    if d <= 0.0 {
                        return Err(Rejection::Origin { node: j });
                    }
                    out[j] = u2 / (1.0 + u1 * u1) + (x * u1 - b) / d;
                }
                out[0] = 0.0;
                out[n - 1] = 0.0;
            }
            Mode::Polyline => unreachable!(),
        }
        if let Some(j) = out.iter().position(|x| !x.is_finite()) {
            return Err(Rejection::NonFinite { node: j });
        }
        Ok(())
    }
}

/// Velocity of the evolved coordinate, `dv/dt`, at every node.
pub fn rhs(snap: &CurveSnapshot) -> Result<Vec<f64>> {
    let mut f = Rhs::new(snap)?;
    let mut out = vec![0.0; snap.len()];
    f.eval(snap.values(), &mut out).map_err(|r| match r {
        Rejection::Origin { node } | Rejection::NonFinite { node } => {
            Error::Resolution { node, reason: "right-hand side not admissible".into() }
        }
    })?;
    Ok(out)
}

/// One classical Runge–Kutta step of the frozen-parameter system.
pub fn rk4_step(snap: &CurveSnapshot, dt: f64) -> std::result::Result<CurveSnapshot, Rejection> {
    let mut f = Rhs::new(snap).map_err(|_| Rejection::NonFinite { node: 0 })?;
    rk4_with(&mut f, snap, dt)
}

fn rk4_with(f: &mut Rhs, snap: &CurveSnapshot, dt: f64) -> std::result::Result<CurveSnapshot, Rejection> {
    let v = snap.values();
    let n = v.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f.eval(v, &mut k1)?;
    for j in 0..n {
        tmp[j] = v[j] + 0.5 * dt * k1[j];
    }
    f.eval(&tmp, &mut k2)?;
    for j in 0..n {
        tmp[j] = v[j] + 0.5 * dt * k2[j];
    }
    f.eval(&tmp, &mut k3)?;
    for j in 0..n {
        tmp[j] = v[j] + dt * k3[j];
    }
    f.eval(&tmp, &mut k4)?;
    for j in 0..n {
        tmp[j] = v[j] + dt / 6.0 * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]);
    }
    for (j, &x) in tmp.iter().enumerate() {
        if !x.is_finite() {
            return Err(Rejection::NonFinite { node: j });
        }
        if snap.mode().is_radial() && x <= 0.0 {
            return Err(Rejection::Origin { node: j });
        }
    }
    if snap.mode() == Mode::OpenGraph {
        for j in 0..n {
            let x = snap.params()[j];
            if x * x + tmp[j] * tmp[j] <= 0.0 {
                return Err(Rejection::Origin { node: j });
            }
        }
    }
    snap.with_values(snap.t() + dt, tmp).map_err(|_| Rejection::NonFinite { node: 0 })
}

/// Parabolic CFL estimate before clamping: `cfl · min_j h_j² / D_j` with the
/// diffusion coefficient `D = 1/|γ'|²` of the chosen parametrization.
pub fn cfl_dt(snap: &CurveSnapshot, cfl_factor: f64) -> Result<f64> {
    Ok(cfl_from_frames(snap, &geometry::frames(snap)?, cfl_factor))
}

fn cfl_from_frames(snap: &CurveSnapshot, fr: &[NodeFrame], cfl_factor: f64) -> f64 {
    let p = snap.params();
    let n = p.len();
    let mut best = f64::INFINITY;
    for j in 0..n {
        let h = if snap.mode().is_closed() {
            let hm = if j == 0 { p[0] + TAU - p[n - 1] } else { p[j] - p[j - 1] };
            let hp = if j == n - 1 { p[0] + TAU - p[n - 1] } else { p[j + 1] - p[j] };
            hm.min(hp)
        } else if j == 0 || j == n - 1 {
            continue;
        } else {
            (p[j] - p[j - 1]).min(p[j + 1] - p[j])
        };
        let speed2 = fr[j].d1.norm_sqr();
        best = best.min(h * h * speed2);
    }
    cfl_factor * best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtDecision {
    pub dt: f64,
    /// The CFL estimate fell below `dt_min`.
    pub pinned: bool,
}

pub fn adaptive_dt(snap: &CurveSnapshot, policy: &DtPolicy) -> Result<DtDecision> {
    Ok(dt_from_frames(snap, &geometry::frames(snap)?, policy))
}

fn dt_from_frames(snap: &CurveSnapshot, fr: &[NodeFrame], policy: &DtPolicy) -> DtDecision {
    let raw = cfl_from_frames(snap, fr, policy.cfl_factor);
    DtDecision { dt: raw.clamp(policy.dt_min, policy.dt_max), pinned: raw < policy.dt_min }
}

/// One emitted trajectory sample.
#[derive(Debug, Clone)]
pub struct Tick {
    pub step: u64,
    pub snapshot: CurveSnapshot,
    /// State one step earlier on the same grid (absent for the initial tick);
    /// the pair is what the time-differenced residuals are computed from.
    pub companion: Option<CurveSnapshot>,
    pub frame: DiagnosticsFrame,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub snapshot: CurveSnapshot,
    pub step: u64,
    pub frames: Vec<DiagnosticsFrame>,
    pub status: Status,
    pub event: Option<BlowupEvent>,
    /// `(t, min|γ|)` samples for singular-time estimation.
    pub history: Vec<(f64, f64)>,
    pub last_stats: Option<StepStats>,
}

impl FlowState {
    pub fn new(snapshot: CurveSnapshot) -> Self {
        let m = min_radius(&snapshot);
        let t = snapshot.t();
        Self {
            snapshot,
            step: 0,
            frames: Vec::new(),
            status: Status::Running,
            event: None,
            history: vec![(t, m)],
            last_stats: None,
        }
    }

    fn finish(&mut self, status: Status) {
        debug_assert_eq!(self.status, Status::Running);
        self.status = status;
    }
}

pub fn min_radius(snap: &CurveSnapshot) -> f64 {
    snap.radii().into_iter().fold(f64::INFINITY, f64::min)
}

pub fn max_curvature(fr: &[NodeFrame]) -> f64 {
    fr.iter().map(|f| f.curvature().abs()).fold(0.0, f64::max)
}

/// Outcome of attempting one step.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum StepOutcome {
    /// Accepted; `pre` is the state the step started from and `post` the
    /// state it produced before any regrid.
    Accepted {
        pre: CurveSnapshot,
        post: CurveSnapshot,
        stats: StepStats,
    },
    Exhausted,
}

/// Advance `state` by one accepted step of at most `dt`, halving on
/// rejection; regrids afterwards when the monitor spacing degrades.
pub fn step(state: &mut FlowState, config: &FlowConfig, dt: f64) -> Result<StepOutcome> {
    Ok(step_cached(state, config, dt, &mut None)?.0)
}

/// As [`step`], reusing stencil weights while the grid is unchanged and
/// returning the frames of the new current snapshot.
fn step_cached(
    state: &mut FlowState,
    config: &FlowConfig,
    dt: f64,
    cache: &mut Option<Rhs>,
) -> Result<(StepOutcome, Option<Vec<NodeFrame>>)> {
    if state.status != Status::Running {
        return Err(Error::param(format!("cannot step a finished run ({})", state.status.as_str())));
    }
    let rhs = match cache {
        Some(r) if r.params == state.snapshot.params() => r,
        _ => cache.insert(Rhs::new(&state.snapshot)?),
    };
    let mut h = dt.min(config.dt.dt_max);
    let post = loop {
        match rk4_with(rhs, &state.snapshot, h) {
            Ok(s) => break s,
            Err(_) if h * 0.5 >= config.dt.dt_min => h *= 0.5,
            Err(_) => {
                state.finish(Status::ResolutionExhausted);
                return Ok((StepOutcome::Exhausted, None));
            }
        }
    };
    let pre = std::mem::replace(&mut state.snapshot, post.clone());
    let mut regridded = false;
    let mut fr = geometry::frames(&state.snapshot)?;
    if let Some(policy) = &config.regrid {
        if geometry::spacing_ratio_from_frames(&state.snapshot, &fr, policy)? > policy.max_ratio {
            state.snapshot = geometry::regrid(&state.snapshot, policy)?;
            fr = geometry::frames(&state.snapshot)?;
            regridded = true;
        }
    }
    state.step += 1;
    let speeds = rhs_speed(&post, &pre);
    let stats = StepStats { dt: h, max_speed: speeds, min_radius: min_radius(&post), regridded };
    state.last_stats = Some(stats);
    Ok((StepOutcome::Accepted { pre, post, stats }, Some(fr)))
}

fn rhs_speed(post: &CurveSnapshot, pre: &CurveSnapshot) -> f64 {
    let dt = post.t() - pre.t();
    let (a, b) = (post.stored_points(), pre.stored_points());
    a.iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).fold(0.0, f64::max).sqrt() / dt
}

/// Step budget for one call of [`Simulation::run_with`]; reaching it leaves
/// the state running so the run can be resumed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Limits {
    pub max_steps: Option<u64>,
}

/// Owns the single mutable [`FlowState`] of a run and decides when to emit.
pub struct Simulation {
    pub config: FlowConfig,
    pub settings: MonitorSettings,
    pub state: FlowState,
    last_emit_radius: f64,
    steps_since_regrid: usize,
    due_since: Option<usize>,
    steps_since_emit: usize,
    /// (pre, post) of the latest accepted step.
    last_step: Option<(CurveSnapshot, CurveSnapshot)>,
    /// Frames of the current snapshot and stencil weights of its grid.
    frames: Option<Vec<NodeFrame>>,
    rhs: Option<Rhs>,
}

impl Simulation {
    pub fn new(config: FlowConfig, settings: MonitorSettings) -> Result<Self> {
        let snap = config.initial_snapshot()?;
        Self::from_snapshot(config, settings, snap, 0)
    }

    /// Start (or resume) from an arbitrary snapshot.
    pub fn from_snapshot(config: FlowConfig, settings: MonitorSettings, snap: CurveSnapshot, step: u64) -> Result<Self> {
        config.validate()?;
        if snap.mode() != config.mode {
            return Err(Error::param(format!("snapshot mode {} differs from configured {}", snap.mode(), config.mode)));
        }
        let m = min_radius(&snap);
        let mut state = FlowState::new(snap);
        state.step = step;
        Ok(Self {
            config,
            settings,
            state,
            last_emit_radius: m,
            steps_since_regrid: usize::MAX / 2,
            due_since: None,
            steps_since_emit: 0,
            last_step: None,
            frames: None,
            rhs: None,
        })
    }

    pub fn with_history(mut self, history: Vec<(f64, f64)>) -> Self {
        if !history.is_empty() {
            self.state.history = history;
        }
        self
    }

    fn tick(&mut self, snapshot: CurveSnapshot, companion: Option<CurveSnapshot>) -> Tick {
        let frame = monitors::diagnose(companion.as_ref(), &snapshot, self.state.step, &self.settings);
        self.state.frames.push(frame.clone());
        self.last_emit_radius = min_radius(&snapshot);
        self.steps_since_emit = 0;
        self.due_since = None;
        Tick { step: self.state.step, snapshot, companion, frame }
    }

    /// Initial emission (call once before stepping a fresh run).
    pub fn initial_tick(&mut self) -> Tick {
        let s = self.state.snapshot.clone();
        self.tick(s, None)
    }

    /// Attempt one step; returns the emitted tick if any. After the run has
    /// finished `self.state.status` is no longer running.
    pub fn advance(&mut self) -> Result<Option<Tick>> {
        if self.state.status != Status::Running {
            return Err(Error::param(format!("cannot advance a finished run ({})", self.state.status.as_str())));
        }
        let s = &self.state.snapshot;
        if s.t() >= self.config.t_end * (1.0 - 1e-15) {
            self.state.finish(Status::ReachedTEnd);
            return Ok(None);
        }
        let fr = match self.frames.take() {
            Some(fr) => fr,
            None => geometry::frames(s)?,
        };
        let decision = dt_from_frames(s, &fr, &self.config.dt);
        if let Some(ev) = singularity::detect_with(s, &fr, &self.config.stop, decision.pinned) {
            self.state.event = Some(ev);
            self.state.finish(Status::BlowupDetected);
            return Ok(None);
        }
        let dt = decision.dt.min(self.config.t_end - s.t());
        let (outcome, fr) = step_cached(&mut self.state, &self.config, dt, &mut self.rhs)?;
        self.frames = fr;
        match outcome {
            StepOutcome::Exhausted => Ok(None),
            StepOutcome::Accepted { pre, post, stats } => {
                self.steps_since_regrid = if stats.regridded { 0 } else { self.steps_since_regrid + 1 };
                self.last_step = Some((pre.clone(), post.clone()));
                self.steps_since_emit += 1;
                let m = stats.min_radius;
                let last = self.state.history.last().copied().unwrap_or((0.0, f64::INFINITY));
                if m < last.1 * (1.0 - 1e-3) || m > last.1 * (1.0 + 1e-3) {
                    self.state.history.push((post.t(), m));
                }
                let cad = self.config.cadence;
                let due = (cad.every_steps > 0 && self.steps_since_emit >= cad.every_steps)
                    || m <= cad.radius_ratio * self.last_emit_radius;
                if due && self.due_since.is_none() {
                    self.due_since = Some(0);
                } else if let Some(w) = self.due_since.as_mut() {
                    *w += 1;
                }
                let settled = self.steps_since_regrid > cad.settle_steps;
                let waited = self.due_since.is_some_and(|w| w >= cad.settle_steps);
                // Ticks are taken on steps that did not regrid, so `post`
                // is also the state the run continues from.
                let fire = self.due_since.is_some() && !stats.regridded && (settled || waited);
                Ok(fire.then(|| self.tick(post, Some(pre))))
            }
        }
    }

    /// Drive the run to termination (or the step budget), passing every tick
    /// to `observer` in order. The final state is always emitted.
    pub fn run_with(&mut self, limits: Limits, mut observer: impl FnMut(&Tick) -> Result<()>) -> Result<()> {
        let start = self.state.step;
        while self.state.status == Status::Running {
            if limits.max_steps.is_some_and(|m| self.state.step - start >= m) {
                return Ok(());
            }
            if let Some(t) = self.advance()? {
                observer(&t)?;
            }
        }
        // Final emission: the state produced by the last accepted step
        // (before any regrid), paired with its predecessor.
        let emitted = |t: f64, frames: &[DiagnosticsFrame]| frames.last().is_some_and(|f| f.t == t);
        match self.last_step.take() {
            Some((pre, post)) if !emitted(post.t(), &self.state.frames) => {
                let t = self.tick(post, Some(pre));
                observer(&t)?;
            }
            None if !emitted(self.state.snapshot.t(), &self.state.frames) => {
                let t = self.tick(self.state.snapshot.clone(), None);
                observer(&t)?;
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub ticks: Vec<Tick>,
    pub state: FlowState,
}

/// Run a configuration to termination, collecting the trajectory in memory.
pub fn run(config: &FlowConfig, settings: &MonitorSettings) -> Result<RunResult> {
    let mut sim = Simulation::new(config.clone(), settings.clone())?;
    run_simulation(&mut sim)
}

pub fn run_simulation(sim: &mut Simulation) -> Result<RunResult> {
    let mut ticks = Vec::new();
    if sim.state.step == 0 && sim.state.frames.is_empty() {
        ticks.push(sim.initial_tick());
    }
    sim.run_with(Limits::default(), |t| {
        ticks.push(t.clone());
        Ok(())
    })?;
    Ok(RunResult { ticks, state: sim.state.clone() })
}

/// Plane position of the node with the smallest `|γ|`.
pub fn argmin_radius(snap: &CurveSnapshot) -> (usize, C64) {
    let r = snap.radii();
    let j = (0..r.len()).min_by(|&a, &b| r[a].total_cmp(&r[b])).expect("snapshots are nonempty");
    (j, snap.positions()[j])
}

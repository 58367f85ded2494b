mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use approx::assert_relative_eq;
use equiflow_core::flow::{self, Family, FlowConfig};
use equiflow_core::geometry::{self, GridSpec};
use equiflow_core::monitors::{self, MonitorSettings, PairIssue};
use equiflow_core::monotonicity::Point2;
use equiflow_core::{CurveSnapshot, Mode, C64};

const BETA_SING: f64 = 3.0 * FRAC_PI_4;

fn profile(beta: f64, n: usize) -> CurveSnapshot {
    geometry::initial_profile(beta, &GridSpec::new(n)).unwrap()
}

/// (previous, current) snapshot pairs emitted by a run.
fn pairs(cfg: &FlowConfig) -> Vec<(CurveSnapshot, CurveSnapshot)> {
    let res = flow::run(cfg, &MonitorSettings::default()).unwrap();
    res.ticks.into_iter().filter_map(|t| t.companion.map(|c| (c, t.snapshot))).collect()
}

#[test]
fn initial_profile_crosses_every_ray_once() {
    for beta in [FRAC_PI_4, FRAC_PI_2, BETA_SING, PI] {
        let s = profile(beta, 128);
        for f in [0.1, 0.25, 0.5, 0.75, 0.9] {
            assert_eq!(monitors::sturmian_count(&s, f * beta).unwrap(), Some(1), "beta {beta}, alpha {}", f * beta);
        }
        for alpha in [-0.2, beta + 0.2, beta + PI / 2.0] {
            if alpha.rem_euclid(TAU) < beta + 1e-3 && alpha > 0.0 {
                continue;
            }
            assert_eq!(monitors::sturmian_count(&s, alpha).unwrap(), Some(0), "beta {beta}, alpha {alpha}");
        }
    }
}

#[test]
fn sturmian_count_flags_tangential_touch() {
    let pts = vec![C64::new(1.0, 0.5), C64::new(2.0, 0.0), C64::new(3.0, 0.5)];
    let touch = CurveSnapshot::polyline(0.0, None, pts).unwrap();
    assert_eq!(monitors::sturmian_count(&touch, 0.0).unwrap(), None);
    let pts = vec![C64::new(1.0, 0.5), C64::new(2.0, 0.0), C64::new(3.0, -0.5)];
    let cross = CurveSnapshot::polyline(0.0, None, pts).unwrap();
    assert_eq!(monitors::sturmian_count(&cross, 0.0).unwrap(), Some(1));
    // the opposite ray is not crossed
    assert_eq!(monitors::sturmian_count(&cross, PI).unwrap(), Some(0));
    assert!(monitors::sturmian_count(&geometry::circle(1.0, 16, 0.0).unwrap(), 0.3).is_err());
}

#[test]
fn initial_profile_shape() {
    for beta in [FRAC_PI_2, BETA_SING, PI] {
        for n in [64, 65] {
            let s = profile(beta, n);
            let c = monitors::shape_checks(&s, 1e-8).unwrap();
            assert_eq!(c.critical_points, 1, "beta {beta}, n {n}");
            assert!(c.symmetry_residual <= 1e-12, "beta {beta}: {}", c.symmetry_residual);
        }
    }
    let c = monitors::shape_checks(&profile(BETA_SING, 256), 1e-8).unwrap();
    assert_eq!(c.violations, 0);
    assert!(c.max_radial_speed <= 1e-8);
    // the graph representation gives the same answer
    let g = geometry::initial_graph(BETA_SING, &GridSpec::new(64), None).unwrap();
    assert_eq!(monitors::shape_checks(&g, 1e-8).unwrap().critical_points, 1);
    assert!(monitors::shape_checks(&geometry::circle(1.0, 16, 0.0).unwrap(), 1e-8).is_err());
}

#[test]
fn initial_angle_difference_at_pi() {
    // θ₀(s) = s + π for β = π
    let s = profile(PI, 512);
    for eps in [0.2, 0.3] {
        let d = monitors::angle_difference(&s, eps).unwrap();
        assert!((d - (2.0 * eps - PI)).abs() <= 1e-6, "eps {eps}: {d}");
        assert_relative_eq!(monitors::area_rate_bound(PI, eps), 2.0 * eps - PI, epsilon = 1e-15);
    }
    for eps in [0.0, -0.1, PI / 2.0, 2.0] {
        assert!(monitors::angle_difference(&s, eps).is_err());
        assert!(monitors::area_law_residual(std::slice::from_ref(&s), eps).is_err());
    }
}

#[test]
fn special_lagrangian_is_stationary_for_every_monitor() {
    let mut cfg = FlowConfig { beta: FRAC_PI_2, nodes: 256, t_end: 0.02, ..FlowConfig::default() };
    cfg.cadence.every_steps = 40;
    let settings = MonitorSettings::default();
    let traj: Vec<CurveSnapshot> = flow::run(&cfg, &settings).unwrap().ticks.into_iter().map(|t| t.snapshot).collect();
    assert!(traj.len() >= 3);
    for eps in [0.2, 0.3] {
        for iv in monitors::area_law_residual(&traj, eps).unwrap() {
            assert!(iv.angle_difference.abs() <= 1e-3, "{iv:?}");
            assert!(iv.rate.abs() <= 1e-3, "{iv:?}");
            assert!(iv.residual <= 1e-3, "{iv:?}");
        }
    }
    for (a, b) in pairs(&cfg) {
        let r = monitors::evolution_residuals(&a, &b, &settings).unwrap();
        for v in [r.theta_heat, r.beta_heat, r.radial_law.unwrap(), r.cosine.unwrap(), r.theta_sq.unwrap()] {
            assert!(v <= 1e-2, "{r:?}");
        }
    }
}

#[test]
fn circle_obeys_the_radial_law() {
    let cfg = FlowConfig {
        mode: Mode::ClosedRadial,
        family: Family::Circle { r0: 1.0 },
        nodes: 64,
        t_end: 0.2,
        ..FlowConfig::default()
    };
    let settings = MonitorSettings::default();
    let ps = pairs(&cfg);
    assert!(!ps.is_empty());
    for (a, b) in &ps {
        let r = monitors::evolution_residuals(a, b, &settings).unwrap();
        // only the time differencing errs: the trapezoid rule applied to
        // r = sqrt(1 − 4t), |r'''| = 24 (1 − 4t)^(−5/2)
        let dt = b.t() - a.t();
        let bound = dt * dt / 12.0 * 24.0 * (1.0 - 4.0 * b.t()).powf(-2.5);
        assert!(r.radial_law.unwrap() <= bound, "{r:?} vs {bound}");
        assert!(r.cosine.is_none() && r.theta_sq.is_none());
        // θ' = 2, so dr/dt = −2/r
        let theta = geometry::lagrangian_angle(b).unwrap();
        let dtheta = geometry::param_derivative(b, &theta, TAU * 2.0).unwrap();
        assert!(dtheta.iter().all(|d| (d - 2.0).abs() < 1e-12));
    }
}

#[test]
fn pairs_too_far_apart_are_refused() {
    let a = profile(BETA_SING, 64);
    let b = CurveSnapshot::radial(0.1, BETA_SING, a.params().to_vec(), a.values().iter().map(|r| 0.8 * r).collect()).unwrap();
    assert!(matches!(monitors::check_pair(&a, &b, 0.05), Err(PairIssue::TooFarApart { .. })));
    assert_eq!(monitors::check_pair(&b, &a, 0.5), Err(PairIssue::NotForward));
    let c = profile(BETA_SING, 65).with_time(0.1);
    assert_eq!(monitors::check_pair(&a, &c, 0.5), Err(PairIssue::DifferentGrids));
    assert!(monitors::evolution_residuals(&a, &b, &MonitorSettings::default()).is_err());
}

#[test]
fn coarea_on_monotone_and_circle() {
    for beta in [FRAC_PI_4, BETA_SING, PI] {
        let s = profile(beta, 200);
        let theta = geometry::lagrangian_angle(&s).unwrap();
        let c = monitors::coarea_check(&s).unwrap();
        let span = theta[theta.len() - 1] - theta[0];
        assert_relative_eq!(c.total_variation, span.abs(), max_relative = 1e-12);
        assert!(c.residual <= 1e-12);
    }
    let c = monitors::coarea_check(&geometry::circle(1.3, 100, 0.0).unwrap()).unwrap();
    assert_relative_eq!(c.total_variation, 2.0 * TAU, max_relative = 1e-12);
    assert_relative_eq!(c.level_count_integral, 2.0 * TAU, max_relative = 1e-12);
}

#[test]
fn coarea_counts_levels_of_a_wiggle() {
    // θ is not monotone on a zig-zag polyline; both sides still agree
    let pts: Vec<C64> = (0..40).map(|k| C64::new(1.0 + 0.1 * k as f64, 0.3 * (k as f64 * 0.7).sin())).collect();
    let s = CurveSnapshot::polyline(0.0, Some(FRAC_PI_2), pts).unwrap();
    let c = monitors::coarea_check(&s).unwrap();
    assert!(c.total_variation > 1.0);
    assert!(c.residual <= 1e-12 * c.total_variation);
}

#[test]
fn shrinker_identity_on_circle_and_plane() {
    for r0 in [0.5f64, 1.0, 2.0] {
        let t = 0.03;
        let s = geometry::circle((r0 * r0 - 4.0 * t).sqrt(), 128, t).unwrap();
        assert!(monitors::shrinker_identity(&s, r0 * r0 / 4.0).unwrap() <= 1e-10);
        // the wrong singular time does not satisfy it
        assert!(monitors::shrinker_identity(&s, r0 * r0 / 4.0 + 0.1).unwrap() > 0.1);
        assert!(monitors::shrinker_identity(&s, t).is_err());
    }
    let plane = geometry::ray(0.4, 0.1, 3.0, 50).unwrap();
    assert!(monitors::shrinker_identity(&plane, 1.0).unwrap() <= 1e-12);
}

#[test]
fn area_ratio_of_plane_and_profile() {
    // a ray sweeps out the plane once (the full line covers it twice)
    let plane = geometry::ray(0.7, 0.0, 10.0, 101).unwrap();
    let radii = [0.5, 1.0, 3.0, 9.0];
    let a = monitors::area_ratio_monitor(&plane, &radii, Point2::origin()).unwrap();
    for r in &a.ratios {
        assert_relative_eq!(*r, PI, max_relative = 1e-12);
    }
    // the plane through a point of itself off the origin; the rotation
    // quadrature resolves the edge of the ball's shadow to about 1e-3
    let x0 = Point2::new(C64::from_polar(2.0, 0.7), C64::new(0.0, 0.0));
    let off = monitors::area_ratio_monitor(&plane, &[1.0, 2.0], x0).unwrap();
    for r in &off.ratios {
        assert_relative_eq!(*r, PI, max_relative = 5e-3);
    }
    // β = π is the line Im γ = 1: inside |γ| ≤ R the surface has area
    // 2π(aR + asinh a) with a = sqrt(R² − 1), which tends to 2π R² from above
    let s = profile(PI, 512);
    let radii: Vec<f64> = (0..20).map(|k| 0.5 * 1.2f64.powi(k)).collect();
    let a = monitors::area_ratio_monitor(&s, &radii, Point2::origin()).unwrap();
    for (&r, &got) in radii.iter().zip(&a.ratios) {
        let exact = if r <= 1.0 {
            0.0
        } else {
            let h = (r * r - 1.0).sqrt();
            TAU * (h * r + h.asinh()) / (r * r)
        };
        assert!((got - exact).abs() <= 1e-3 * exact.max(1.0), "R = {r}: {got} vs {exact}");
    }
    let tail = &a.ratios[17..];
    assert!(tail.windows(2).all(|w| w[1] < w[0]));
    assert!(tail.iter().all(|&v| v > TAU && v < 1.03 * TAU), "{tail:?}");
    assert!(monitors::area_ratio_monitor(&s, &[], Point2::origin()).is_err());
    assert!(monitors::area_ratio_monitor(&s, &[1.0, -1.0], Point2::origin()).is_err());
}

#[test]
fn maslov_class_of_circles() {
    for r0 in [0.5, 1.0, 3.0] {
        let m = monitors::maslov_winding(&geometry::circle(r0, 64, 0.0).unwrap()).unwrap();
        assert_eq!(m.winding, 2);
        assert_relative_eq!(m.holonomy, TAU * r0 * r0, max_relative = 1e-12);
    }
    assert!(monitors::maslov_winding(&profile(BETA_SING, 64)).is_err());
}

#[test]
fn winding_is_constant_under_the_flow() {
    let cfg = FlowConfig {
        mode: Mode::ClosedRadial,
        family: Family::Circle { r0: 1.0 },
        nodes: 32,
        t_end: 0.3,
        ..FlowConfig::default()
    };
    let res = flow::run(&cfg, &MonitorSettings::default()).unwrap();
    assert!(res.ticks.len() > 3);
    for t in &res.ticks {
        assert_eq!(t.frame.maslov_winding, Some(2));
        let r = t.snapshot.values()[0];
        assert_relative_eq!(t.frame.holonomy.unwrap(), TAU * r * r, max_relative = 1e-10);
    }
}

#[test]
fn diagnostics_rows_match_the_header() {
    let settings = MonitorSettings::default();
    let cfg = FlowConfig { nodes: 64, t_end: 0.01, ..FlowConfig::default() };
    let res = flow::run(&cfg, &settings).unwrap();
    let header = monitors::frame_header(&settings);
    for t in &res.ticks {
        assert_eq!(t.frame.t, t.snapshot.t());
        assert_eq!(monitors::frame_row(&t.frame).len(), header.len());
        assert_eq!(t.frame.sturm_counts, vec![Some(1); 3]);
        assert_eq!(t.frame.critical_points, Some(1));
        assert!(t.frame.coarea_residual.unwrap() <= 1e-6);
        assert_eq!(t.frame.maslov_winding, None);
    }
    let first = &res.ticks[0].frame;
    assert!(first.theta_heat_residual.is_none(), "the initial tick has no predecessor");
    let last = &res.ticks[res.ticks.len() - 1].frame;
    assert!(last.theta_heat_residual.is_some());
}

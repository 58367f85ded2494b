#![allow(dead_code)]

use equiflow_core::C64;

/// Observed convergence order between errors at h and h/2.
pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

pub fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Exact geometry of the initial family r₀ = sin(πφ/β)^(−β/π):
/// (γ, γ', γ'') with respect to φ.
pub fn exact_initial_frame(beta: f64, phi: f64) -> (C64, C64, C64) {
    use std::f64::consts::PI;
    let q = PI * phi / beta;
    let r = q.sin().powf(-beta / PI);
    let l1 = -1.0 / q.tan();
    let l2 = (PI / beta) / (q.sin() * q.sin());
    let rp = r * l1;
    let rpp = r * (l2 + l1 * l1);
    let e = C64::from_polar(1.0, phi);
    (r * e, C64::new(rp, r) * e, C64::new(rpp - r, 2.0 * rp) * e)
}

/// Mean-curvature-flow velocity vector from an exact frame.
pub fn exact_velocity(f: (C64, C64, C64)) -> C64 {
    let (g, d1, d2) = f;
    let s = d1.norm();
    let kappa = (d1.conj() * d2).im / (s * s * s);
    let n = C64::i() * d1 / s;
    let gn = g.re * n.re + g.im * n.im;
    (kappa - gn / g.norm_sqr()) * n
}

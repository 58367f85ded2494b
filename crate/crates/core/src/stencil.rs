//! Three-point finite differences on nonuniform grids.
//!
//! The grid only has to be strictly monotone (increasing or decreasing): the
//! Lagrange weights below are valid for any three distinct abscissae.

/// First and second derivative at the middle of three points.
#[inline]
pub fn centered(x: [f64; 3], f: [f64; 3]) -> (f64, f64) {
    let hm = x[1] - x[0];
    let hp = x[2] - x[1];
    let s = hm + hp;
    let d1 = (-hp / (hm * s)) * f[0] + ((hp - hm) / (hm * hp)) * f[1] + (hm / (hp * s)) * f[2];
    let d2 = 2.0 * (f[0] / (hm * s) - f[1] / (hm * hp) + f[2] / (hp * s));
    (d1, d2)
}

/// First and second derivative at `x[0]` from `x[0..3]` (one-sided).
#[inline]
pub fn one_sided(x: [f64; 3], f: [f64; 3]) -> (f64, f64) {
    let h1 = x[1] - x[0];
    let h2 = x[2] - x[0];
    let d1 = -(h1 + h2) / (h1 * h2) * f[0] + h2 / (h1 * (h2 - h1)) * f[1] - h1 / (h2 * (h2 - h1)) * f[2];
    let d2 = 2.0 * (f[0] / (h1 * h2) - f[1] / (h1 * (h2 - h1)) + f[2] / (h2 * (h2 - h1)));
    (d1, d2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

/// Derivatives on an open grid; the two end nodes use one-sided stencils
/// (first order for `d2`, second order for `d1`).
pub fn open(x: &[f64], f: &[f64]) -> Derivatives {
    let n = x.len();
    assert!(n >= 3 && f.len() == n, "need at least three nodes");
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for j in 1..n - 1 {
        (d1[j], d2[j]) = centered([x[j - 1], x[j], x[j + 1]], [f[j - 1], f[j], f[j + 1]]);
    }
    (d1[0], d2[0]) = one_sided([x[0], x[1], x[2]], [f[0], f[1], f[2]]);
    (d1[n - 1], d2[n - 1]) = one_sided([x[n - 1], x[n - 2], x[n - 3]], [f[n - 1], f[n - 2], f[n - 3]]);
    Derivatives { d1, d2 }
}

/// Derivatives on a periodic grid `x[0] < ... < x[n-1] < x[0] + period`.
///
/// `jump` is the increment of `f` over one period, so multivalued functions
/// with a constant period increment (a lifted angle, a primitive with
/// holonomy) are differentiated without seams.
pub fn periodic(x: &[f64], period: f64, f: &[f64], jump: f64) -> Derivatives {
    let n = x.len();
    assert!(n >= 3 && f.len() == n, "need at least three nodes");
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for j in 0..n {
        let (xm, fm) = if j == 0 { (x[n - 1] - period, f[n - 1] - jump) } else { (x[j - 1], f[j - 1]) };
        let (xp, fp) = if j == n - 1 { (x[0] + period, f[0] + jump) } else { (x[j + 1], f[j + 1]) };
        (d1[j], d2[j]) = centered([xm, x[j], xp], [fm, f[j], fp]);
    }
    Derivatives { d1, d2 }
}

//! Small quadrature helpers shared by the geometry and density code.

/// Five-point Gauss–Legendre rule on [-1, 1] (exact for degree 9).
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

pub fn gauss5(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    GL5.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Trapezoid rule over node values `f` at abscissae `x` (any monotone order;
/// the result carries the orientation of `x`).
pub fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2).zip(f.windows(2)).map(|(xs, fs)| 0.5 * (xs[1] - xs[0]) * (fs[0] + fs[1])).sum()
}

/// Running trapezoid integral starting at zero on the first node.
pub fn cumulative_trapezoid(x: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..x.len() {
        acc += 0.5 * (x[j] - x[j - 1]) * (f[j] + f[j - 1]);
        out.push(acc);
    }
    out
}

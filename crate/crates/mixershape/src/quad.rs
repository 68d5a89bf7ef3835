//! Quadrature rules: Gauss-Legendre on intervals and symmetric rules on the
//! reference triangle.

use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// ordered by increasing node.
///
/// Exact for polynomials of degree 2n - 1. Nodes are computed by Newton
/// iteration on the Legendre recurrence, which is deterministic and accurate
/// to machine precision for the moderate orders used here.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// The n-point Gauss-Legendre rule mapped to the interval [a, b].
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// A quadrature point on the reference triangle
/// {xi >= 0, eta >= 0, xi + eta <= 1}.
///
/// Weights include the reference-triangle area of 1/2, so an integral over
/// the reference triangle is the plain weighted sum of integrand values.
#[derive(Clone, Copy, Debug)]
pub struct TrianglePoint {
    pub xi: f64,
    pub eta: f64,
    pub weight: f64,
}

const fn tp(xi: f64, eta: f64, weight: f64) -> TrianglePoint {
    TrianglePoint { xi, eta, weight }
}

/// Six-point symmetric rule, exact for total degree <= 4.
pub const TRIANGLE_DEGREE_4: [TrianglePoint; 6] = [
    tp(0.445948490915965, 0.445948490915965, 0.111_690_794_839_005_5),
    tp(0.108103018168070, 0.445948490915965, 0.111_690_794_839_005_5),
    tp(0.445948490915965, 0.108103018168070, 0.111_690_794_839_005_5),
    tp(0.091576213509771, 0.091576213509771, 0.054_975_871_827_661_0),
    tp(0.816847572980459, 0.091576213509771, 0.054_975_871_827_661_0),
    tp(0.091576213509771, 0.816847572980459, 0.054_975_871_827_661_0),
];

/// Twelve-point symmetric rule, exact for total degree <= 6.
pub const TRIANGLE_DEGREE_6: [TrianglePoint; 12] = [
    tp(0.249286745170910, 0.249286745170910, 0.058_393_137_863_189_5),
    tp(0.501426509658179, 0.249286745170910, 0.058_393_137_863_189_5),
    tp(0.249286745170910, 0.501426509658179, 0.058_393_137_863_189_5),
    tp(0.063089014491502, 0.063089014491502, 0.025_422_453_185_103_5),
    tp(0.873821971016996, 0.063089014491502, 0.025_422_453_185_103_5),
    tp(0.063089014491502, 0.873821971016996, 0.025_422_453_185_103_5),
    tp(0.310352451033785, 0.636502499121399, 0.041_425_537_809_187_0),
    tp(0.636502499121399, 0.310352451033785, 0.041_425_537_809_187_0),
    tp(0.053145049844816, 0.636502499121399, 0.041_425_537_809_187_0),
    tp(0.636502499121399, 0.053145049844816, 0.041_425_537_809_187_0),
    tp(0.053145049844816, 0.310352451033785, 0.041_425_537_809_187_0),
    tp(0.310352451033785, 0.053145049844816, 0.041_425_537_809_187_0),
];

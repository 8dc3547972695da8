//! Gaussian quadrature rules used by the corrector diagnostics.
//!
//! Nodes are found by Newton iteration on the recurrence-evaluated
//! orthogonal polynomials; both rules are accurate to machine precision
//! for the orders used here (Legendre up to ~64, Hermite up to ~64).

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th root (descending order).
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}.
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to the interval `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| half * wi).collect(),
    )
}

/// Gauss-Hermite nodes and weights for the weight function `exp(-x^2)`.
///
/// The expectation of `f` under `N(mean, var)` is
/// `pi^{-1/2} * sum_i w_i f(mean + sqrt(2 var) x_i)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let pi_quarter = std::f64::consts::PI.powf(-0.25);
    let mut z = 0.0;
    for i in 0..m {
        // Stroud-Secrest style initial guesses, largest root first.
        z = match i {
            0 => {
                let c = (2 * n + 1) as f64;
                c.sqrt() - 1.85575 * c.powf(-1.0 / 6.0)
            }
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut p1 = 0.0;
        for _ in 0..200 {
            // Orthonormal Hermite recurrence.
            let mut p0 = pi_quarter;
            p1 = 0.0;
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = z * (2.0 / (k + 1) as f64).sqrt() * p1
                    - (k as f64 / (k + 1) as f64).sqrt() * p2;
            }
            let pp = (2.0 * n as f64).sqrt() * p1;
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-14 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        let w = 2.0 / (2.0 * n as f64 * p1 * p1);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // Middle node sits exactly at the origin.
        nodes[m - 1] = 0.0;
    }
    (nodes, weights)
}

/// Expectation of `f` under the scalar Gaussian `N(mean, var)` using a
/// precomputed Hermite rule.
pub fn gaussian_expectation(
    nodes: &[f64],
    weights: &[f64],
    mean: f64,
    var: f64,
    f: impl Fn(f64) -> f64,
) -> f64 {
    let scale = (2.0 * var).sqrt();
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        acc += w * f(mean + scale * x);
    }
    acc / std::f64::consts::PI.sqrt()
}

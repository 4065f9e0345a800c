//! Quadrature rules for the two backend families.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Closed-form volume of the unit round sphere `S^m`.
pub fn sphere_volume(m: usize) -> f64 {
    // V(S^0) = 2, V(S^1) = 2π, V(S^m) = 2π V(S^{m-2}) / (m - 1)
    let mut v = if m % 2 == 0 { 2.0 } else { 2.0 * PI };
    let mut k = if m % 2 == 0 { 0 } else { 1 };
    while k < m {
        k += 2;
        v *= 2.0 * PI / (k as f64 - 1.0);
    }
    v
}

/// Uniform azimuth grid on [0, 2π) with `n` points.
fn azimuths(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| 2.0 * PI * (j as f64 + 0.5) / n as f64)
}

/// Product rule on `S^1`, `S^2` or `S^3`.
pub fn sphere_product_rule(m: usize, resolution: usize) -> (Vec<DVector<f64>>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match m {
        1 => {
            let n = resolution;
            for j in 0..n {
                let t = 2.0 * PI * j as f64 / n as f64;
                nodes.push(DVector::from_vec(vec![t.cos(), t.sin()]));
                weights.push(2.0 * PI / n as f64);
            }
        }
        2 => {
            let (z, wz) = gauss_legendre(resolution);
            let nphi = 2 * resolution;
            for (zi, wi) in z.iter().zip(&wz) {
                let r = (1.0 - zi * zi).max(0.0).sqrt();
                for phi in azimuths(nphi) {
                    nodes.push(DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), *zi]));
                    weights.push(wi * 2.0 * PI / nphi as f64);
                }
            }
        }
        3 => {
            // (√(1-s) e^{iξ₁}, √s e^{iξ₂}) with dV = ½ ds dξ₁ dξ₂, s ∈ [0, 1]
            let (t, wt) = gauss_legendre(resolution);
            let nxi = 2 * resolution;
            let dxi = 2.0 * PI / nxi as f64;
            for (ti, wi) in t.iter().zip(&wt) {
                let s = 0.5 * (ti + 1.0);
                let (a, b) = ((1.0 - s).sqrt(), s.sqrt());
                for x1 in azimuths(nxi) {
                    for x2 in azimuths(nxi) {
                        nodes.push(DVector::from_vec(vec![
                            a * x1.cos(),
                            a * x1.sin(),
                            b * x2.cos(),
                            b * x2.sin(),
                        ]));
                        weights.push(0.5 * wi * 0.5 * dxi * dxi);
                    }
                }
            }
        }
        _ => unreachable!("product rules exist for m = 1, 2, 3 only"),
    }
    (nodes, weights)
}

/// Seeded Monte Carlo nodes on `S^m` with equal weights `Vol(S^m)/samples`.
pub fn sphere_monte_carlo(m: usize, samples: usize, seed: u64) -> (Vec<DVector<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = sphere_volume(m) / samples as f64;
    let mut nodes = Vec::with_capacity(samples);
    while nodes.len() < samples {
        let v = DVector::from_fn(m + 1, |_, _| standard_normal(&mut rng));
        let n = v.norm();
        if n > 1e-12 {
            nodes.push(v / n);
        }
    }
    (nodes, vec![w; samples])
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box–Muller
    loop {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        if u > 0.0 {
            return (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos();
        }
    }
}

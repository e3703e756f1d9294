//! Reference computations for the integration tests, written independently
//! of the library's quadrature: composite Simpson on uniform or graded panels.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Simpson on [a, b] split at the points a + (b − a)·4^{−k}, k = 1..levels,
/// for integrands concentrated near `a`.
pub fn simpson_graded<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, levels: u32, n: usize) -> f64 {
    let mut edges: Vec<f64> = (1..=levels)
        .rev()
        .map(|k| a + (b - a) * 0.25f64.powi(k as i32))
        .collect();
    edges.insert(0, a);
    edges.push(b);
    edges.windows(2).map(|w| simpson(&f, w[0], w[1], n)).sum()
}

/// erfc(x) = 2/√π ∫ₓ^∞ e^{−u²} du, truncated 12 units past x.
pub fn erfc_ref(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_ref(-x);
    }
    // factor out e^{−x²} so the integrand stays O(1): u = x + v
    let body = simpson_graded(|v: f64| (-(2.0 * x * v + v * v)).exp(), 0.0, 12.0, 10, 4_000);
    2.0 / PI.sqrt() * (-x * x).exp() * body
}

/// Ei(x) for x < 0 as −E₁(−x) = −∫_{ln z}^{∞} exp(−e^v) dv with z = −x.
pub fn ei_ref(x: f64) -> f64 {
    assert!(x < 0.0);
    let z = -x;
    let lo = z.ln();
    let hi = (z + 60.0).ln();
    -simpson(|v: f64| (-v.exp()).exp(), lo, hi, 200_000)
}

/// κ(θ)·erfc(r₀*(θ)/√(4Dt)) written from scratch.
pub fn joint_integrand(r0: f64, rr: f64, d: f64, theta: f64, t: f64) -> f64 {
    let g = rr / r0;
    let q = 1.0 - 2.0 * g * theta.cos() + g * g;
    let s = r0 * q.sqrt();
    theta.sin() / q.powf(1.5) * pcrx::specfun::erfc(s / (4.0 * d * t).sqrt()).unwrap()
}

/// F(α, t) by Simpson quadrature of the joint density.
pub fn f_alpha_t_ref(r0: f64, rr: f64, d: f64, alpha: f64, t: f64) -> f64 {
    let f = |th: f64| joint_integrand(r0, rr, d, th, t);
    let num = simpson_graded(f, 0.0, alpha, 8, 4_000);
    let den = simpson_graded(f, 0.0, PI, 8, 4_000);
    let fhit = rr / r0 * pcrx::specfun::erfc((r0 - rr) / (4.0 * d * t).sqrt()).unwrap();
    fhit * num / den
}

/// Eventual angular density 2π r_r² sin θ · (1 − γ²)/(4π r_r r₀ q^{3/2}).
pub fn p_theta_inf_ref(r0: f64, rr: f64, theta: f64) -> f64 {
    let g = rr / r0;
    let q = 1.0 - 2.0 * g * theta.cos() + g * g;
    2.0 * PI * rr * rr * theta.sin() * (1.0 - g * g) / (4.0 * PI * rr * r0 * q.powf(1.5))
}

//! Small numerical helpers shared by the exact-probability and oracle
//! code paths: Gauss-Legendre rules and the standard normal CDF.

use once_cell::sync::Lazy;

/// Standard normal CDF, accurate to ~1 ulp via erfc.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density. Test-oracle helper.
#[allow(dead_code)]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre polynomial and derivative at x.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((-x, w));
    }
    // Mirror to the full symmetric rule.
    let mut full = rule.clone();
    for &(x, w) in rule.iter().rev() {
        if x < 0.0 || (x == 0.0 && n % 2 == 0) {
            full.push((-x, w));
        }
    }
    full.truncate(n);
    full.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    full
}

/// 16-point rule used by the per-cell integrations; cached because it is
/// requested once per histogram row.
pub static GL16: Lazy<Vec<(f64, f64)>> = Lazy::new(|| gauss_legendre(16));

/// Integrate `f` over [a, b] with composite Gauss-Legendre panels no wider
/// than `max_panel`. Panels keep the rule's fast convergence even when the
/// interval spans many length scales of the integrand. Outside the
/// measurement path this serves as the quadrature oracle in tests.
#[allow(dead_code)]
pub fn integrate_composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, max_panel: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
    let step = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * step;
        let half = 0.5 * step;
        let mid = lo + half;
        let mut acc = 0.0;
        for &(x, w) in GL16.iter() {
            acc += w * f(mid + half * x);
        }
        total += acc * half;
    }
    total
}

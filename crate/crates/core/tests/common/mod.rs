//! Independent reference computations shared by the integration tests and
//! the acceptance runner. Nothing here reuses the library's reductions.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Brute-force Monte Carlo of `L_p(g) = ∫ |g(Σu)|² Π|u_i|^{−2d} du` for
/// `p ∈ {1, 2}` and `K = 0`, returning `[(mean, standard error); 2]`.
///
/// Importance sampling in the coordinates `(s = u_1 + u_2, u_1)`: `s` has a
/// mixture density (`∝ |s|^{−0.9}` on `[−1, 1]`, `∝ s^{−2}` outside) and
/// `u_1 | s` is drawn from `½ q(u_1) + ½ q(u_1 − s)` where `q ∝ |u|^{−2d}`
/// on `[−1, 1]` and `∝ |u|^{−4d}` outside, so every singularity of the
/// integrand is matched by the proposal. Requires `1/4 < d < 1/2`.
pub fn lp_monte_carlo<G>(g2: G, d: f64, points: usize, seed: u64) -> [(f64, f64); 2]
where
    G: Fn(f64) -> f64 + Sync,
{
    assert!(d > 0.25 && d < 0.5);
    let e = 0.9;
    let p_s = |s: f64| {
        let a = s.abs();
        if a <= 1.0 {
            0.5 * 0.5 * (1.0 - e) * a.powf(-e)
        } else {
            0.5 * 0.5 * a.powi(-2)
        }
    };
    let a_in = 1.0 - 2.0 * d;
    let a_out = 4.0 * d - 1.0;
    let z = 2.0 / a_in + 2.0 / a_out;
    let w_in = (2.0 / a_in) / z;
    let q = |u: f64| {
        let a = u.abs();
        if a <= 1.0 {
            a.powf(-2.0 * d) / z
        } else {
            a.powf(-4.0 * d) / z
        }
    };
    let chunks = 64;
    let per = points / chunks;
    let sums: Vec<[f64; 4]> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
            let mut acc = [0.0; 4];
            for _ in 0..per {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let u: f64 = 1.0 - rng.gen::<f64>();
                let s = sign
                    * if rng.gen::<bool>() {
                        u.powf(1.0 / (1.0 - e))
                    } else {
                        1.0 / u
                    };
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let v: f64 = 1.0 - rng.gen::<f64>();
                let r = if rng.gen::<f64>() < w_in {
                    v.powf(1.0 / a_in)
                } else {
                    v.powf(-1.0 / a_out)
                };
                // (u_1, s − u_1), keeping the drawn offset exact near either pole
                let (a, b) = if rng.gen::<bool>() {
                    (sign * r, s - sign * r)
                } else {
                    (s - sign * r, sign * r)
                };
                let g = g2(s);
                let ps = p_s(s);
                let x1 = g * s.abs().powf(-2.0 * d) / ps;
                let pu = 0.5 * q(a) + 0.5 * q(b);
                let x2 = g * a.abs().powf(-2.0 * d) * b.abs().powf(-2.0 * d) / (ps * pu);
                acc[0] += x1;
                acc[1] += x1 * x1;
                acc[2] += x2;
                acc[3] += x2 * x2;
            }
            acc
        })
        .collect();
    let n = (per * chunks) as f64;
    let mut tot = [0.0; 4];
    for a in &sums {
        for i in 0..4 {
            tot[i] += a[i];
        }
    }
    let stat = |s: f64, ss: f64| {
        let m = s / n;
        (m, ((ss / n - m * m) / n).sqrt())
    };
    [stat(tot[0], tot[1]), stat(tot[2], tot[3])]
}

/// `|m0(ω)|²` for the Haar and db2 lowpass filters, `m0 = L̂/√2`.
pub fn lowpass_power(family: &str, w: f64) -> f64 {
    let c2 = (w / 2.0).cos().powi(2);
    match family {
        "haar" => c2,
        "db2" => c2 * c2 * (1.0 + 2.0 * (1.0 - c2)),
        _ => panic!("no closed form for {family}"),
    }
}

/// `|ĝ∞(λ)|² = |m0(λ/2 + π)|² Π_{m≥2} |m0(λ/2^m)|²` from the closed-form
/// filter powers; the highpass power is the lowpass power shifted by `π`.
pub fn limit_power(family: &str, lambda: f64) -> f64 {
    let mut acc = lowpass_power(family, lambda / 2.0 + std::f64::consts::PI);
    let mut x = lambda / 4.0;
    while x.abs() > 1e-9 {
        acc *= lowpass_power(family, x);
        x /= 2.0;
    }
    acc
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Autocovariances `γ(0..=max_lag)` of the unit-variance FARIMA(0, d, 0)
/// spectrum `∝ |2 sin(λ/2)|^{−2d}` by quadrature of `2∫_0^π cos(kλ) f(λ) dλ`.
///
/// The substitution `λ = π t^{1/(1−2d)}` removes the pole at the origin;
/// the smooth remainder is integrated by composite Gauss–Legendre.
pub fn farima_autocovariance_quadrature(d: f64, max_lag: usize) -> Vec<f64> {
    let a = 1.0 / (1.0 - 2.0 * d);
    let nodes = gauss_legendre(32);
    let panels = 400 + 8 * max_lag;
    let raw = |k: usize| {
        let mut acc = 0.0;
        for p in 0..panels {
            let (t0, t1) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            for &(x, w) in &nodes {
                let t = t0 + (t1 - t0) * (x + 1.0) / 2.0;
                let lam = std::f64::consts::PI * t.powf(a);
                // dλ = π a t^{a−1} dt and λ^{−2d} t^{a−1} is bounded
                let jac = std::f64::consts::PI * a * t.powf(a - 1.0);
                let f = (2.0 * (lam / 2.0).sin()).powf(-2.0 * d);
                acc += w * (t1 - t0) / 2.0 * jac * f * (k as f64 * lam).cos();
            }
        }
        2.0 * acc
    };
    let g0 = raw(0);
    (0..=max_lag).map(|k| raw(k) / g0).collect()
}

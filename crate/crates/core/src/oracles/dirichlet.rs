//! The normalized Dirichlet kernel `D_n(u) = n^{−1} Σ_{k<n} e^{iku}`.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// `{x}`: the representative of `x` modulo `2π` in `(−π, π]`.
pub fn wrap_to_pi(x: f64) -> f64 {
    let r = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if r <= -PI {
        r + 2.0 * PI
    } else if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Closed form `e^{i(n−1)u/2} sin(nu/2) / (n sin(u/2))`, and 1 on `2πZ`.
/// `D_n` is `2π`-periodic, so `u` is reduced first.
pub fn dirichlet_kernel(n: u64, u: f64) -> Complex64 {
    let r = wrap_to_pi(u);
    if r == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let nf = n as f64;
    let amp = (nf * r / 2.0).sin() / (nf * (r / 2.0).sin());
    Complex64::from_polar(amp, (nf - 1.0) * r / 2.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct DirichletReport {
    /// `(n, sup_θ (1 + |n{θ/n}|) |D_n(θ/n)|)`.
    pub suprema: Vec<(u64, f64)>,
    pub bound: f64,
    pub violations: Vec<u64>,
}

/// Evaluates `(1 + |n{θ/n}|)|D_n(θ/n)|` on `points` equispaced values of
/// `θ ∈ [−10πn, 10πn]` (plus the points `θ = ±πn`) for each `n`.
pub fn dirichlet_bound_check(ns: &[u64], points: usize, bound: f64) -> DirichletReport {
    let mut suprema = Vec::new();
    let mut violations = Vec::new();
    for &n in ns {
        let nf = n as f64;
        let span = 10.0 * PI * nf;
        let extra = [PI * nf, -PI * nf];
        let sup = (0..points)
            .map(|i| -span + 2.0 * span * i as f64 / (points - 1) as f64)
            .chain(extra)
            .map(|theta| {
                let u = theta / nf;
                (1.0 + (nf * wrap_to_pi(u)).abs()) * dirichlet_kernel(n, u).norm()
            })
            .fold(0.0, f64::max);
        if sup > bound {
            violations.push(n);
        }
        suprema.push((n, sup));
    }
    DirichletReport {
        suprema,
        bound,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(n: u64, u: f64) -> Complex64 {
        (0..n).map(|k| Complex64::from_polar(1.0, k as f64 * u)).sum::<Complex64>() / n as f64
    }

    #[test]
    fn examples() {
        assert_eq!(dirichlet_kernel(7, 0.0), Complex64::new(1.0, 0.0));
        assert!(dirichlet_kernel(2, PI).norm() < 1e-15);
        assert!(dirichlet_kernel(4, PI / 2.0).norm() < 1e-15);
        assert_eq!(dirichlet_kernel(5, 4.0 * PI), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn closed_form_matches_sum() {
        for n in [1u64, 2, 3, 8, 13] {
            for i in 0..200 {
                let u = -20.0 + 40.0 * i as f64 / 199.0;
                let (a, b) = (dirichlet_kernel(n, u), direct(n, u));
                assert!((a - b).norm() < 1e-12, "n={n} u={u}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_to_pi(PI), PI);
        assert!((wrap_to_pi(-PI) - PI).abs() < 1e-15);
        assert!((wrap_to_pi(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn bound_holds_from_two_on() {
        let ns: Vec<u64> = (1..=10).map(|k| 1u64 << k).collect();
        let r = dirichlet_bound_check(&ns, 20_001, PI + 0.01);
        assert!(r.violations.is_empty(), "{:?}", r.suprema);
    }

    #[test]
    fn n_one_reaches_one_plus_pi() {
        let r = dirichlet_bound_check(&[1], 1001, PI + 0.01);
        assert!((r.suprema[0].1 - (1.0 + PI)).abs() < 1e-12);
        assert_eq!(r.violations, vec![1]);
    }
}

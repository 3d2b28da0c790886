//! Factorials, binomials and the orthogonal polynomials used throughout the
//! crate. Everything that can overflow is available in log form.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;

const EXACT_FACTORIAL_LIMIT: usize = 170;

fn factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = Vec::with_capacity(EXACT_FACTORIAL_LIMIT + 1);
        let mut acc = 1.0_f64;
        out.push(0.0);
        for k in 1..=EXACT_FACTORIAL_LIMIT {
            acc *= k as f64;
            out.push(acc.ln());
        }
        out
    })
}

/// `ln(k!)`.
pub fn log_factorial(k: usize) -> f64 {
    if k <= EXACT_FACTORIAL_LIMIT {
        return factorial_table()[k];
    }
    // Stirling series; truncation error < 1e-20 for k > 170.
    let x = k as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x
        + 0.5 * (2.0 * PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// `ln C(n, k)` for `0 <= k <= n`.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    log_factorial(n) - log_factorial(k) - log_factorial(n - k)
}

/// Binomial coefficient `C(n, k)`; zero outside `0 <= k <= n`.
pub fn binomial(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 60 {
        // exact in u128 for n <= 60
        let mut acc: u128 = 1;
        for i in 0..k as u128 {
            acc = acc * (n as u128 - i) / (i + 1);
        }
        return acc as f64;
    }
    log_binomial(n as usize, k as usize).exp()
}

/// Generalized binomial `a (a-1) ... (a-s+1) / s!` for real `a`.
pub fn generalized_binomial(a: f64, s: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..s {
        acc *= (a - i as f64) / (i as f64 + 1.0);
    }
    acc
}

/// Physicists' Hermite polynomial `H_k(z)`.
pub fn hermite(k: usize, z: C64) -> C64 {
    let mut prev = C64::new(1.0, 0.0);
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * z;
    for j in 1..k {
        let next = 2.0 * z * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_k(x)` for real argument.
pub fn hermite_real(k: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for j in 1..k {
        let next = 2.0 * x * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Legendre polynomial `P_k(z)`, complex argument allowed.
pub fn legendre(k: usize, z: C64) -> C64 {
    let mut prev = C64::new(1.0, 0.0);
    if k == 0 {
        return prev;
    }
    let mut cur = z;
    for j in 1..k {
        let j = j as f64;
        let next = ((2.0 * j + 1.0) * z * cur - j * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Jacobi polynomial `P_l^{(alpha, beta)}(z)`.
///
/// Uses the three-term recurrence. Negative integer parameters can make the
/// recurrence denominators vanish (the operator form evaluates `beta = p - m`
/// on low Fock states), in which case the finite hypergeometric sum is used.
pub fn jacobi_poly(l: usize, alpha: f64, beta: f64, z: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let ab = alpha + beta;
    let degenerate = (2..=l).any(|j| {
        let j = j as f64;
        (2.0 * j * (j + ab) * (2.0 * j + ab - 2.0)).abs() < 1e-12
    });
    if degenerate {
        return jacobi_sum(l, alpha, beta, z);
    }
    let mut prev = 1.0;
    let mut cur = 0.5 * (alpha - beta + (ab + 2.0) * z);
    for j in 2..=l {
        let j = j as f64;
        let c = 2.0 * j + ab;
        let a1 = 2.0 * j * (j + ab) * (c - 2.0);
        let a2 = (c - 1.0) * (alpha * alpha - beta * beta);
        let a3 = (c - 2.0) * (c - 1.0) * c;
        let a4 = 2.0 * (j + alpha - 1.0) * (j + beta - 1.0) * c;
        let next = ((a2 + a3 * z) * cur - a4 * prev) / a1;
        prev = cur;
        cur = next;
    }
    cur
}

/// `P_l^{(alpha,beta)}(z) = sum_s C(l+alpha, l-s) C(l+beta, s) ((z-1)/2)^s ((z+1)/2)^(l-s)`.
fn jacobi_sum(l: usize, alpha: f64, beta: f64, z: f64) -> f64 {
    let lf = l as f64;
    let (zm, zp) = ((z - 1.0) / 2.0, (z + 1.0) / 2.0);
    (0..=l)
        .map(|s| {
            generalized_binomial(lf + alpha, l - s)
                * generalized_binomial(lf + beta, s)
                * zm.powi(s as i32)
                * zp.powi((l - s) as i32)
        })
        .sum()
}

/// Normalized Hermite functions `psi_p(x) = H_p(x) e^{-x^2/2} / (pi^{1/4} 2^{p/2} sqrt(p!))`
/// for `p = 0..dim`, by the stable orthonormal recurrence.
///
/// These are the position-space Fock wavefunctions for the quadrature
/// `x = (a + a^dagger)/sqrt(2)`, whose vacuum variance is 1/2.
pub fn hermite_functions(dim: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    if dim == 0 {
        return out;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if dim > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for p in 2..dim {
        let pf = p as f64;
        out[p] = (2.0 / pf).sqrt() * x * out[p - 1] - ((pf - 1.0) / pf).sqrt() * out[p - 2];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn naive_hermite(k: usize, x: f64) -> f64 {
        // H_k(x) = k! sum_{m} (-1)^m (2x)^{k-2m} / (m! (k-2m)!)
        (0..=k / 2)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign * (2.0 * x).powi((k - 2 * m) as i32)
                    * (log_factorial(k) - log_factorial(m) - log_factorial(k - 2 * m)).exp()
            })
            .sum()
    }

    fn naive_legendre(k: usize, x: f64) -> f64 {
        // P_k(x) = 2^{-k} sum_m (-1)^m C(k,m) C(2k-2m, k) x^{k-2m}
        (0..=k / 2)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(k as i64, m as i64)
                    * binomial((2 * k - 2 * m) as i64, k as i64)
                    * x.powi((k - 2 * m) as i32)
            })
            .sum::<f64>()
            / 2f64.powi(k as i32)
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_real(2, 0.0), -2.0);
        assert_eq!(hermite_real(3, 0.0), 0.0);
        assert_eq!(hermite(2, C64::new(0.0, 0.0)), C64::new(-2.0, 0.0));
    }

    #[test]
    fn legendre_imaginary_argument() {
        let p2 = legendre(2, C64::i());
        assert_relative_eq!(p2.re, -2.0, epsilon = 1e-15);
        assert_relative_eq!(p2.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn jacobi_degree_zero_is_one() {
        for &(a, b, z) in &[(0.0, 0.0, 0.3), (2.0, -3.0, -0.9), (1.5, 7.0, 4.0)] {
            assert_eq!(jacobi_poly(0, a, b, z), 1.0);
        }
    }

    #[test]
    fn polynomials_match_naive_sums() {
        for k in 0..=10 {
            for i in 0..=40 {
                let x = -2.0 + 0.1 * i as f64;
                let h = hermite_real(k, x);
                let hn = naive_hermite(k, x);
                assert!((h - hn).abs() <= 1e-10 * hn.abs().max(1.0), "H_{k}({x})");
                let p = legendre(k, C64::new(x, 0.0)).re;
                let pn = naive_legendre(k, x);
                assert!((p - pn).abs() <= 1e-10 * pn.abs().max(1.0), "P_{k}({x})");
                for &(a, b) in &[(0.0, 0.0), (1.0, 2.0), (3.0, 0.5), (2.0, 4.0)] {
                    let j = jacobi_poly(k, a, b, x);
                    let jn = jacobi_sum(k, a, b, x);
                    assert!((j - jn).abs() <= 1e-10 * jn.abs().max(1.0), "P_{k}^({a},{b})({x})");
                }
            }
        }
    }

    #[test]
    fn jacobi_reduces_to_legendre() {
        for k in 0..8 {
            let x = 0.37;
            assert_relative_eq!(
                jacobi_poly(k, 0.0, 0.0, x),
                legendre(k, C64::new(x, 0.0)).re,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn jacobi_negative_beta_falls_back() {
        // alpha + beta = -2 makes the first recurrence step degenerate
        let v = jacobi_poly(2, 1.0, -3.0, 0.0);
        assert_relative_eq!(v, jacobi_sum(2, 1.0, -3.0, 0.0), epsilon = 1e-14);
        let w = jacobi_poly(3, 2.0, -4.0, 0.4);
        assert_relative_eq!(w, jacobi_sum(3, 2.0, -4.0, 0.4), epsilon = 1e-12);
    }

    #[test]
    fn log_factorial_matches_direct() {
        let mut f = 1.0f64;
        for k in 1..=170 {
            f *= k as f64;
            assert_relative_eq!(log_factorial(k), f.ln(), max_relative = 1e-14);
        }
        // continuity across the Stirling switch
        let d = log_factorial(171) - log_factorial(170);
        assert_relative_eq!(d, 171f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn binomial_edges() {
        assert_eq!(binomial(5, -1), 0.0);
        assert_eq!(binomial(5, 6), 0.0);
        assert_eq!(binomial(5, 2), 10.0);
        assert_relative_eq!(binomial(100, 50), 1.0089134454556417e29, max_relative = 1e-12);
    }

    #[test]
    fn hermite_functions_orthonormal() {
        let dim = 12;
        let n = 4001;
        let h = 16.0 / (n - 1) as f64;
        let mut gram = vec![0.0; dim * dim];
        for i in 0..n {
            let x = -8.0 + h * i as f64;
            let psi = hermite_functions(dim, x);
            for a in 0..dim {
                for b in 0..dim {
                    gram[a * dim + b] += psi[a] * psi[b] * h;
                }
            }
        }
        for a in 0..dim {
            for b in 0..dim {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * dim + b] - want).abs() < 1e-10);
            }
        }
    }
}

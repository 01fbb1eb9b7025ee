//! Thin wrappers over `statrs` special functions plus the inversions the
//! samplers need.

use crate::{Error, Result};
use statrs::function::{beta, erf, gamma};
use std::f64::consts::{PI, SQRT_2};

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / SQRT_2)
}

pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return norm_cdf(x).ln();
    }
    // asymptotic Mills-ratio expansion
    let x2 = x * x;
    -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
}

/// Regularized lower incomplete gamma P(a, x), extended to x = 0 and x = inf.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma::gamma_lr(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma::gamma_ur(a, x)
    }
}

pub fn ln_gamma_density(a: f64, x: f64) -> f64 {
    (a - 1.0) * x.ln() - x - gamma::ln_gamma(a)
}

/// Which tail a probability refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tail {
    Lower,
    Upper,
}

/// Solve P(a, x) = target (Lower) or Q(a, x) = target (Upper) for x inside
/// the bracket [lo, hi], which must contain the root.
pub fn gamma_inv_bracketed(a: f64, target: f64, tail: Tail, mut lo: f64, mut hi: f64) -> f64 {
    let f = |x: f64| match tail {
        Tail::Lower => gamma_p(a, x) - target,
        Tail::Upper => target - gamma_q(a, x),
    };
    if hi.is_infinite() {
        // expand until the bracket closes
        hi = (lo.max(a)).max(1.0) * 2.0;
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return hi;
            }
        }
    }
    let mut x = 0.5 * (lo + hi);
    if lo > 0.0 && hi / lo > 4.0 {
        x = (lo * hi).sqrt();
    }
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = ln_gamma_density(a, x).exp();
        let mut next = if dens > 0.0 && dens.is_finite() {
            x - fx / dens
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = if lo > 0.0 && hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
        }
        if (next - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Quantile of the F(d1, d2) distribution at probability q.
pub fn f_quantile(d1: f64, d2: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("F quantile requested at {q}")));
    }
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(Error::Domain(format!("F degrees of freedom ({d1}, {d2})")));
    }
    let (a, b) = (0.5 * d1, 0.5 * d2);
    let mut w = beta::inv_beta_reg(a, b, q).clamp(1e-300, 1.0 - 1e-16);
    // polish with safeguarded Newton on the regularized incomplete beta
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let ln_b = beta::ln_beta(a, b);
    for _ in 0..100 {
        let fw = beta::beta_reg(a, b, w) - q;
        if fw < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let dens = ((a - 1.0) * w.ln() + (b - 1.0) * (1.0 - w).ln() - ln_b).exp();
        let mut next = w - fw / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-16 * w.max(1e-300) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(d2 * w / (d1 * (1.0 - w)))
}

//! Exact PG(1, c) draws by Devroye's alternating-series method applied to the
//! tilted Jacobi distribution J*(1, c/2); PG(1, c) = J*(1, c/2) / 4.

use crate::special::ln_norm_cdf;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use std::f64::consts::PI;

const TRUNC: f64 = 0.64;

pub fn sample_polya_gamma_1<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    let z = 0.5 * c.abs();
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let p_left = mass_texpon(z, fz);
    loop {
        let x = if rng.random::<f64>() < p_left {
            let e: f64 = Exp1.sample(rng);
            TRUNC + e / fz
        } else {
            rtigauss(z, rng)
        };
        let mut s = a_n(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= a_n(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += a_n(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// n-th term of the alternating series for the J*(1) density.
pub fn a_n(n: u32, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let h = n as f64 + 0.5;
        (-1.5 * ((0.5 * PI).ln() + x.ln()) + k.ln() - 2.0 * h * h / x).exp()
    } else {
        0.0
    }
}

/// Probability of the exponential (right) piece of the proposal.
fn mass_texpon(z: f64, fz: f64) -> f64 {
    let t = TRUNC;
    let b = (1.0 / t).sqrt() * (t * z - 1.0);
    let a = -(1.0 / t).sqrt() * (t * z + 1.0);
    let x0 = fz.ln() + fz * t;
    let xb = x0 - z + ln_norm_cdf(b);
    let xa = x0 + z + ln_norm_cdf(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Inverse Gaussian IG(1/z, 1) truncated to (0, TRUNC).
fn rtigauss<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = TRUNC;
    if z < 1.0 / t {
        loop {
            let (mut e1, mut e2): (f64, f64);
            loop {
                e1 = Exp1.sample(rng);
                e2 = Exp1.sample(rng);
                if e1 * e1 <= 2.0 * e2 / t {
                    break;
                }
            }
            let d = 1.0 + e1 * t;
            let x = t / (d * d);
            let alpha = (-0.5 * z * z * x).exp();
            if rng.random::<f64>() <= alpha {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let y: f64 = rng.sample::<f64, _>(StandardNormal).powi(2);
            let mu_y = mu * y;
            let mut x = mu + 0.5 * mu * mu_y - 0.5 * mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= t {
                return x;
            }
        }
    }
}

/// Density of PG(1, c) at w, by summing the alternating series (test oracle
/// and diagnostics).
pub fn polya_gamma_1_density(w: f64, c: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let x = 4.0 * w;
    let mut f = 0.0;
    for n in 0..400u32 {
        let term = a_n(n, x);
        f += if n % 2 == 0 { term } else { -term };
        if term < 1e-300 && n > 2 {
            break;
        }
    }
    (0.5 * c).cosh() * (-0.5 * c * c * w).exp() * 4.0 * f.max(0.0)
}

pub fn polya_gamma_1_mean(c: f64) -> f64 {
    if c.abs() < 1e-6 {
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}

//! Inverse-gamma draws restricted to an interval.
//!
//! With t = scale / x the target becomes a standard Gamma(shape) restricted to
//! (scale/hi, scale/lo), which is inverted through the regularized incomplete
//! gamma functions. Regions holding less than [`MASS_FLOOR`] probability, and
//! non-positive shapes on bounded intervals, go through the rejection sampler
//! in s = ln t, where the log-density `shape·s − e^s` is concave.

use crate::special::{gamma_inv_bracketed, gamma_p, gamma_q, Tail};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub const MASS_FLOOR: f64 = 1e-12;

pub fn sample_trunc_inverse_gamma<R: Rng + ?Sized>(
    shape: f64,
    scale: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    let underflow = |detail: &str| Error::Underflow {
        shape,
        scale,
        lo,
        hi,
        detail: detail.to_string(),
    };
    if !(scale > 0.0 && scale.is_finite()) || !shape.is_finite() {
        return Err(Error::Domain(format!(
            "inverse gamma with shape={shape}, scale={scale}"
        )));
    }
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Domain(format!("empty interval ({lo}, {hi})")));
    }
    if shape <= 0.0 && hi.is_infinite() {
        return Err(Error::Domain(format!(
            "improper inverse gamma, shape={shape}"
        )));
    }
    let t_lo = if hi.is_infinite() { 0.0 } else { scale / hi };
    let t_hi = if lo == 0.0 { f64::INFINITY } else { scale / lo };

    if shape > 0.0 {
        let p_a = gamma_p(shape, t_lo);
        let t = if p_a > 0.5 {
            let (q_a, q_b) = (gamma_q(shape, t_lo), gamma_q(shape, t_hi));
            let mass = q_a - q_b;
            if mass >= MASS_FLOOR {
                let target = q_b + rng.random::<f64>() * mass;
                Some(gamma_inv_bracketed(shape, target, Tail::Upper, t_lo, t_hi))
            } else {
                None
            }
        } else {
            let p_b = gamma_p(shape, t_hi);
            let mass = p_b - p_a;
            if mass >= MASS_FLOOR {
                let target = p_a + rng.random::<f64>() * mass;
                Some(gamma_inv_bracketed(shape, target, Tail::Lower, t_lo, t_hi))
            } else {
                None
            }
        };
        if let Some(t) = t {
            let x = scale / t;
            if x > lo && x < hi {
                return Ok(x);
            }
            if x.is_finite() {
                // inversion landed on an endpoint by rounding
                return Ok(x.clamp(next_up(lo), next_down(hi)));
            }
            return Err(underflow("inverse CDF returned a non-finite point"));
        }
    }

    let s_lo = if t_lo == 0.0 {
        f64::NEG_INFINITY
    } else {
        t_lo.ln()
    };
    let s_hi = if t_hi.is_infinite() {
        f64::INFINITY
    } else {
        t_hi.ln()
    };
    let env = Envelope::new(shape, s_lo, s_hi)
        .ok_or_else(|| underflow("rejection envelope could not be built"))?;
    for _ in 0..100_000 {
        let s = env.propose(rng);
        if rng.random::<f64>().ln() <= env.h(s) - env.bound(s) {
            let x = scale * (-s).exp();
            if x > lo && x < hi {
                return Ok(x);
            }
        }
    }
    Err(underflow("rejection sampler exhausted its budget"))
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

fn next_down(x: f64) -> f64 {
    if x.is_infinite() {
        f64::MAX
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

/// Three-piece envelope for h(s) = a·s − e^s on (lo, hi): flat around the
/// mode, tangent exponentials beyond the points where h drops by one.
struct Envelope {
    a: f64,
    lo: f64,
    hi: f64,
    hmax: f64,
    l: f64,
    r: f64,
    // log masses of the left, middle and right pieces, relative to hmax
    w: [f64; 3],
}

impl Envelope {
    fn h(&self, s: f64) -> f64 {
        self.a * s - s.exp()
    }

    fn dh(&self, s: f64) -> f64 {
        self.a - s.exp()
    }

    fn new(a: f64, lo: f64, hi: f64) -> Option<Self> {
        let mode = if a > 0.0 { a.ln() } else { f64::NEG_INFINITY };
        let m = mode.clamp(lo, hi);
        if !m.is_finite() {
            return None;
        }
        let mut e = Envelope {
            a,
            lo,
            hi,
            hmax: 0.0,
            l: m,
            r: m,
            w: [f64::NEG_INFINITY; 3],
        };
        e.hmax = e.h(m);
        let level = e.hmax - 1.0;
        e.r = if hi > m && !(hi.is_finite() && e.h(hi) >= level) {
            e.solve(m, hi, level, 1.0)?
        } else {
            hi.min(m.max(hi))
        };
        if e.r > hi {
            e.r = hi;
        }
        e.l = if lo < m && !(lo.is_finite() && e.h(lo) >= level) {
            e.solve(m, lo, level, -1.0)?
        } else {
            lo.max(m.min(lo))
        };
        if e.l < lo {
            e.l = lo;
        }
        if e.l.is_infinite() || e.r.is_infinite() {
            return None;
        }
        let width = e.r - e.l;
        e.w[1] = if width > 0.0 {
            width.ln()
        } else {
            f64::NEG_INFINITY
        };
        if e.l > lo {
            let g = e.dh(e.l);
            let span = e.l - lo;
            e.w[0] = e.h(e.l) - e.hmax - g.ln() + (-(-g * span).exp_m1()).ln();
        }
        if e.r < hi {
            let g = -e.dh(e.r);
            let span = hi - e.r;
            e.w[2] = e.h(e.r) - e.hmax - g.ln() + (-(-g * span).exp_m1()).ln();
        }
        if e.w.iter().all(|w| !w.is_finite()) {
            return None;
        }
        Some(e)
    }

    // point on the ray from m toward `far` (direction dir) where h = level
    fn solve(&self, m: f64, far: f64, level: f64, dir: f64) -> Option<f64> {
        let mut near = m;
        let mut out = if far.is_finite() {
            far
        } else {
            let mut step = 1.0;
            let mut x = m + dir * step;
            while self.h(x) >= level {
                near = x;
                step *= 2.0;
                x = m + dir * step;
                if step > 1e6 {
                    return None;
                }
            }
            x
        };
        for _ in 0..200 {
            let mid = 0.5 * (near + out);
            if self.h(mid) >= level {
                near = mid;
            } else {
                out = mid;
            }
            if (out - near).abs() <= 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        Some(out)
    }

    fn bound(&self, s: f64) -> f64 {
        if s < self.l {
            self.h(self.l) + self.dh(self.l) * (s - self.l)
        } else if s > self.r {
            self.h(self.r) + self.dh(self.r) * (s - self.r)
        } else {
            self.hmax
        }
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let top = self.w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = self.w.iter().map(|w| (w - top).exp()).collect();
        let u = rng.random::<f64>() * (p[0] + p[1] + p[2]);
        if u < p[0] {
            // exponential with rate g, truncated to (lo, l), measured leftward from l
            let g = self.dh(self.l);
            let span = self.l - self.lo;
            self.l - trunc_exp(g, span, rng)
        } else if u < p[0] + p[1] {
            self.l + rng.random::<f64>() * (self.r - self.l)
        } else {
            let g = -self.dh(self.r);
            let span = self.hi - self.r;
            self.r + trunc_exp(g, span, rng)
        }
    }
}

fn trunc_exp<R: Rng + ?Sized>(rate: f64, span: f64, rng: &mut R) -> f64 {
    if span.is_infinite() {
        let e: f64 = Exp1.sample(rng);
        return e / rate;
    }
    let u: f64 = rng.random();
    // inverse CDF of Exp(rate) restricted to (0, span)
    -(u * (-rate * span).exp_m1()).ln_1p() / rate
}

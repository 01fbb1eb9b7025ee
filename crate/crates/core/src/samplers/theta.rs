//! Metropolis–Hastings updates of cosine-sine angles and the CS-decomposition
//! kernel for the matrix Bingham posterior over subspaces.

use super::bingham::{bmf_sweep, BinghamParam};
use crate::manifold::{cs_decompose, StiefelPoint};
use crate::{Error, Mat, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::beta::ln_beta;
use std::f64::consts::FRAC_PI_2;

/// Extra factor x^{exponent}·Πⱼ|x − xⱼ| that turns the uniform-angle base
/// measure into the one induced by Haar measure on the Stiefel manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarTerm {
    pub exponent: f64,
    pub others: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaConditionalCoeffs {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub theta_max: f64,
    pub a: f64,
    pub b: f64,
    pub haar: Option<HaarTerm>,
}

impl ThetaConditionalCoeffs {
    pub fn new(alpha: f64, gamma: f64, delta: f64) -> Self {
        ThetaConditionalCoeffs {
            alpha,
            gamma,
            delta,
            theta_max: FRAC_PI_2,
            a: 1.0,
            b: 1.0,
            haar: None,
        }
    }

    pub fn x_max(&self) -> f64 {
        if self.theta_max >= FRAC_PI_2 {
            1.0
        } else {
            self.theta_max.sin().powi(2)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta_max > 0.0 && self.theta_max <= FRAC_PI_2) {
            return Err(Error::Domain(format!("theta_max = {}", self.theta_max)));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::Domain(format!(
                "proposal shape ({}, {})",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// log of the unnormalized target density of x = sin²θ on [0, x_max].
    pub fn log_target(&self, x: f64) -> f64 {
        let xm = self.x_max();
        if !(0.0..=xm).contains(&x) {
            return f64::NEG_INFINITY;
        }
        let mut lx = -0.5;
        let mut out = -(self.alpha - self.gamma) * x + 2.0 * self.delta * (x * (1.0 - x)).sqrt();
        if let Some(h) = &self.haar {
            lx += h.exponent;
            for &o in &h.others {
                out += (x - o).abs().ln();
            }
        }
        if lx != 0.0 {
            out += lx * x.ln();
        }
        out - 0.5 * (1.0 - x).ln()
    }

    fn log_proposal(&self, x: f64) -> f64 {
        let xm = self.x_max();
        let t = x / xm;
        let mut out = -ln_beta(self.a, self.b) - xm.ln();
        if self.a != 1.0 {
            out += (self.a - 1.0) * t.ln();
        }
        if self.b != 1.0 {
            out += (self.b - 1.0) * (1.0 - t).ln();
        }
        out
    }
}

/// log of the Metropolis–Hastings ratio for moving x → x_new.
pub fn mh_log_ratio(c: &ThetaConditionalCoeffs, x: f64, x_new: f64) -> f64 {
    c.log_target(x_new) - c.log_target(x) + c.log_proposal(x) - c.log_proposal(x_new)
}

/// One independence MH step with proposal x_max·Beta(a, b).
///
/// States where the target density is infinite (the endpoint singularities
/// of the arcsine base measure) carry no target mass, so the proposal is
/// accepted from them outright.
pub fn mh_theta_update<R: Rng + ?Sized>(
    c: &ThetaConditionalCoeffs,
    x_old: f64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    c.validate()?;
    let xm = c.x_max();
    if !(0.0..=xm).contains(&x_old) {
        return Err(Error::Domain(format!("x_old = {x_old} outside [0, {xm}]")));
    }
    let beta = Beta::new(c.a, c.b).map_err(|e| Error::Domain(e.to_string()))?;
    let x_new = xm * beta.sample(rng);
    let here = c.log_target(x_old);
    if here == f64::INFINITY {
        return Ok((x_new, true));
    }
    let r = mh_log_ratio(c, x_old, x_new);
    if r.is_nan() {
        return Ok((x_old, false));
    }
    let u: f64 = rng.random();
    if u.ln() < r {
        Ok((x_new, true))
    } else {
        Ok((x_old, false))
    }
}

pub fn theta_from_x(x: f64) -> f64 {
    x.clamp(0.0, 1.0).sqrt().asin()
}

/// Base measure used for the CS angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaPrior {
    /// Uniform in each angle, giving the x^{-1/2}(1−x)^{-1/2} factor alone.
    Uniform,
    /// The angle density induced by Haar measure, so the kernel targets the
    /// same matrix Bingham posterior as the column-wise kernel.
    Haar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsSettings {
    pub a: f64,
    pub b: f64,
    pub theta_max: f64,
    pub theta_steps: usize,
    pub prior: ThetaPrior,
}

impl Default for CsSettings {
    fn default() -> Self {
        CsSettings {
            a: 1.0,
            b: 1.0,
            theta_max: FRAC_PI_2,
            theta_steps: 10,
            prior: ThetaPrior::Haar,
        }
    }
}

/// Acceptance counts of the angle updates in one call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CsStats {
    pub proposed: usize,
    pub accepted: usize,
}

/// One CS sweep: decompose, update U1 and U2 with the Bingham–vMF kernel,
/// update each angle by MH, and rebuild the basis with V dropped.
pub fn cs_kernel_step<R: Rng + ?Sized>(
    param: &BinghamParam,
    z: &StiefelPoint,
    s: &CsSettings,
    rng: &mut R,
) -> Result<(StiefelPoint, CsStats)> {
    let (p, k) = (param.p(), param.k());
    if z.p() != p || z.k() != k {
        return Err(Error::Dimension("basis and parameter disagree".into()));
    }
    let mut f = cs_decompose(z, rng)?;
    f.theta_max = s.theta_max;
    let m = param.matrix();
    let m11 = m.view((0, 0), (k, k)).clone_owned();
    let m12 = m.view((0, k), (k, p - k)).clone_owned();
    let m22 = m.view((k, k), (p - k, p - k)).clone_owned();
    let cs = |th: &[f64]| -> (Vec<f64>, Vec<f64>) { th.iter().map(|t| (t.cos(), t.sin())).unzip() };

    let (c, sn) = cs(&f.theta);
    let prod: Vec<f64> = c.iter().zip(&sn).map(|(a, b)| 2.0 * a * b).collect();
    let f1 = scale_cols(&m12 * &f.u2, &prod);
    let d1: Vec<f64> = c.iter().map(|v| v * v).collect();
    bmf_sweep(&mut f.u1, Some(&m11), &d1, Some(&f1), rng);

    let f2 = scale_cols(m12.transpose() * &f.u1, &prod);
    let d2: Vec<f64> = sn.iter().map(|v| v * v).collect();
    bmf_sweep(&mut f.u2, Some(&m22), &d2, Some(&f2), rng);

    let q11 = f.u1.transpose() * &m11 * &f.u1;
    let q22 = f.u2.transpose() * &m22 * &f.u2;
    let q12 = f.u1.transpose() * &m12 * &f.u2;
    let mut xs: Vec<f64> = f.theta.iter().map(|t| t.sin().powi(2)).collect();
    let mut stats = CsStats::default();
    for j in 0..k {
        let mut coeffs = ThetaConditionalCoeffs {
            alpha: q11[(j, j)],
            gamma: q22[(j, j)],
            delta: q12[(j, j)],
            theta_max: s.theta_max,
            a: s.a,
            b: s.b,
            haar: None,
        };
        if s.prior == ThetaPrior::Haar {
            coeffs.haar = Some(HaarTerm {
                exponent: 0.5 * (p as f64 - 2.0 * k as f64),
                others: (0..k).filter(|&i| i != j).map(|i| xs[i]).collect(),
            });
        }
        let mut x = xs[j].min(coeffs.x_max());
        for _ in 0..s.theta_steps.max(1) {
            let (nx, acc) = mh_theta_update(&coeffs, x, rng)?;
            stats.proposed += 1;
            stats.accepted += acc as usize;
            x = nx;
        }
        xs[j] = x;
        f.theta[j] = theta_from_x(x);
    }
    let mut out = StiefelPoint::from_trusted(f.basis_without_v());
    out.reorthonormalize();
    Ok((out, stats))
}

fn scale_cols(mut m: Mat, s: &[f64]) -> Mat {
    for (j, v) in s.iter().enumerate() {
        m.column_mut(j).scale_mut(*v);
    }
    m
}

//! Diagnostics: subspace recovery, predictive accuracy, coverage and the
//! predictive KL bound.

use crate::manifold::{principal_angles, ProjectionMatrix, StiefelPoint};
use crate::model::linear::prior_cov;
use crate::model::PosteriorDraws;
use crate::{Error, Mat, Result, Vector};
use nalgebra::{Cholesky, SymmetricEigen};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sin2_theta1: Vec<f64>,
    pub r_squared: f64,
    pub coverage_radius: f64,
    pub coverage_probability: f64,
    pub trace_sigma_y: f64,
    pub variance_proportion: f64,
}

pub fn r_squared(y_true: &Vector, y_hat: &Vector) -> Result<f64> {
    let m = y_true.len();
    if m < 2 || y_hat.len() != m {
        return Err(Error::Dimension(format!(
            "R² needs two or more paired values (got {m}, {})",
            y_hat.len()
        )));
    }
    let mean = y_true.mean();
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Undefined("R² of a constant response".into()));
    }
    let ss_res = (y_true - y_hat).norm_squared();
    Ok(1.0 - ss_res / ss_tot)
}

pub const MIN_COVERAGE_DRAWS: usize = 100;

/// Smallest r such that at least `level` of the draws lie within r of ŷ.
pub fn coverage_radius(pred_draws: &[Vector], y_hat: &Vector, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("coverage level {level}")));
    }
    if pred_draws.len() < MIN_COVERAGE_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_COVERAGE_DRAWS,
            got: pred_draws.len(),
        });
    }
    let mut d: Vec<f64> = pred_draws.iter().map(|y| (y - y_hat).norm()).collect();
    d.sort_by(|a, b| a.total_cmp(b));
    let n = d.len();
    let idx = ((level * n as f64) - 1e-9 * n as f64).ceil() as usize;
    Ok(d[idx.clamp(1, n) - 1])
}

pub fn empirical_coverage(r: f64, truth_samples: &[Vector], y_hat: &Vector) -> Result<f64> {
    if truth_samples.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let hits = truth_samples
        .iter()
        .filter(|y| (*y - y_hat).norm() <= r)
        .count();
    Ok(hits as f64 / truth_samples.len() as f64)
}

/// Largest singular value, from the top eigenvalue of XᵀX.
pub fn spectral_norm(x: &Mat) -> f64 {
    let g = x.transpose() * x;
    if g.nrows() == 0 || g.amax() == 0.0 {
        return 0.0;
    }
    let g = (&g + g.transpose()) * 0.5;
    SymmetricEigen::new(g).eigenvalues.max().max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlCheck {
    pub kl: f64,
    /// ¼σ⁻⁴‖X‖₂⁴((1−φ₀)‖P−P₀‖_F + √(p−k)|φ−φ₀|)².
    pub bound: f64,
    /// The same bound written as the three-term expansion of the square.
    pub bound_expanded: f64,
    pub holds: bool,
}

/// Predictive covariance X(P + φ(I−P))Xᵀ + σ²I.
pub fn predictive_cov(x: &Mat, p: &Mat, phi: f64, sigma2: f64) -> Mat {
    let m = x.nrows();
    let c = x * prior_cov(p, phi) * x.transpose() + Mat::identity(m, m) * sigma2;
    (&c + c.transpose()) * 0.5
}

/// KL(N(0, Σ₀) ‖ N(0, Σ)) computed from the eigenvalues μ of L⁻¹Σ₀L⁻ᵀ,
/// Σ = LLᵀ, as ½Σ(μ − 1 − ln μ).
pub fn kl_zero_mean(sigma0: &Mat, sigma: &Mat) -> Result<f64> {
    let l = Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite("model covariance"))?;
    Cholesky::new(sigma0.clone()).ok_or(Error::NotPositiveDefinite("true covariance"))?;
    let lm = l.l();
    let a = lm
        .solve_lower_triangular(sigma0)
        .ok_or(Error::NotPositiveDefinite("model covariance"))?;
    let m = lm
        .solve_lower_triangular(&a.transpose())
        .ok_or(Error::NotPositiveDefinite("model covariance"))?;
    let m = (&m + m.transpose()) * 0.5;
    let mu = SymmetricEigen::new(m).eigenvalues;
    let mut kl = 0.0;
    for &v in mu.iter() {
        if !(v > 0.0) {
            return Err(Error::NotPositiveDefinite("whitened covariance"));
        }
        let d = v - 1.0;
        kl += if d.abs() < 1e-4 {
            // series of d − ln(1 + d)
            d * d * (0.5 - d / 3.0 + d * d / 4.0)
        } else {
            d - v.ln()
        };
    }
    Ok((0.5 * kl).max(0.0))
}

pub fn kl_gaussian_and_bound(
    p: &ProjectionMatrix,
    phi: f64,
    p0: &ProjectionMatrix,
    phi0: f64,
    x_val: &Mat,
    sigma_star2: f64,
) -> Result<KlCheck> {
    if !(sigma_star2 > 0.0) {
        return Err(Error::Domain("sigma_star^2 must be positive".into()));
    }
    if p.dim() != p0.dim() || p.rank() != p0.rank() || x_val.ncols() != p.dim() {
        return Err(Error::Dimension("KL check inputs disagree in shape".into()));
    }
    let s0 = predictive_cov(x_val, p0.matrix(), phi0, sigma_star2);
    let s = predictive_cov(x_val, p.matrix(), phi, sigma_star2);
    let kl = kl_zero_mean(&s0, &s)?;
    let xn = spectral_norm(x_val);
    let lead = 0.25 * xn.powi(4) / (sigma_star2 * sigma_star2);
    let dp = (p.matrix() - p0.matrix()).norm();
    let rk = ((p.dim() - p.rank()) as f64).sqrt();
    let a = (1.0 - phi0) * dp;
    let b = rk * (phi - phi0).abs();
    let bound = lead * (a + b).powi(2);
    let bound_expanded = lead
        * ((1.0 - phi0).powi(2) * dp * dp
            + 2.0 * (1.0 - phi0).abs() * rk * (phi - phi0).abs() * dp
            + b * b);
    Ok(KlCheck {
        kl,
        bound,
        bound_expanded,
        holds: kl <= bound * (1.0 + 1e-12) + 1e-300,
    })
}

/// sin²θ₁ between each retained P draw and P₀.
pub fn sin2_theta_series(draws: &PosteriorDraws, p0: &ProjectionMatrix) -> Result<Vec<f64>> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    draws
        .draws
        .iter()
        .map(|d| Ok(principal_angles(&StiefelPoint::new(d.z.clone())?, p0)?.sin2_theta1()))
        .collect()
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n1, n2) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = x[i].min(y[j]);
        while i < n1 && x[i] <= v {
            i += 1;
        }
        while j < n2 && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    (d, kolmogorov_q(lambda))
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = 2.0 * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

//! Meta-testing: the β★ posterior under the learned prior, the posterior
//! predictive, and the tail-bound calibration of b₁.

use super::gibbs::PosteriorDraws;
use super::linear::{check_phi, sample_beta, TaskCache, TaskData};
use crate::manifold::{frechet_mean, projection_from_basis, ProjectionMatrix, StiefelPoint};
use crate::rng::RngStream;
use crate::samplers::mvn::std_normal_vec;
use crate::special::f_quantile;
use crate::{Error, Mat, Result, Vector};
use rayon::prelude::*;

/// Source of (P, φ) for meta-testing.
#[derive(Clone, Debug)]
pub enum MetaPrior<'a> {
    /// Every retained global draw, giving the mixture posterior.
    Draws(&'a PosteriorDraws),
    /// A single point estimate.
    Point { p: ProjectionMatrix, phi: f64 },
}

impl MetaPrior<'_> {
    /// Frechet mean of the P draws with the posterior mean of φ.
    pub fn point_estimate(draws: &PosteriorDraws) -> Result<MetaPrior<'static>> {
        if draws.is_empty() {
            return Err(Error::EmptyDraws);
        }
        let ps: Vec<ProjectionMatrix> = draws
            .draws
            .iter()
            .map(|d| projection_from_basis(&StiefelPoint::new(d.z.clone())?))
            .collect::<Result<_>>()?;
        let p = frechet_mean(&ps)?;
        let phi = draws.phis().iter().sum::<f64>() / draws.len() as f64;
        Ok(MetaPrior::Point { p, phi })
    }
}

/// β★ draws from the meta-test posterior. In mixture mode one draw is taken
/// per global draw; in point mode `n_point` draws are taken from the single
/// resulting Gaussian.
pub fn meta_test_posterior(
    test: &TaskData,
    prior: &MetaPrior<'_>,
    n_point: usize,
    stream: &RngStream,
) -> Result<Vec<Vector>> {
    let sigma2 = match test.sigma2 {
        super::linear::NoiseVariance::Known(v) => v,
        super::linear::NoiseVariance::Infer => {
            return Err(Error::Mode(
                "meta-test task needs a known noise variance".into(),
            ))
        }
    };
    let cache = TaskCache::new(test);
    let globals: Vec<(Mat, f64)> = match prior {
        MetaPrior::Draws(d) => {
            if d.is_empty() {
                return Err(Error::EmptyDraws);
            }
            if d.p != test.p() {
                return Err(Error::Dimension(format!(
                    "draws have p={}, test task p={}",
                    d.p,
                    test.p()
                )));
            }
            d.draws
                .iter()
                .map(|g| (&g.z * g.z.transpose(), g.phi))
                .collect()
        }
        MetaPrior::Point { p, phi } => {
            if p.dim() != test.p() {
                return Err(Error::Dimension("point estimate has wrong p".into()));
            }
            if n_point == 0 {
                return Err(Error::EmptyDraws);
            }
            vec![(p.matrix().clone(), *phi); n_point]
        }
    };
    globals
        .par_iter()
        .enumerate()
        .map(|(i, (pm, phi))| {
            check_phi(*phi)?;
            let mut rng = stream.child(&[i as u64]).rng();
            sample_beta(test, Some(&cache), sigma2, pm, *phi, &mut rng)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Predictive {
    pub y_pred: Vec<Vector>,
    pub y_hat: Vector,
    pub sigma_y: Mat,
}

impl Predictive {
    pub fn trace(&self) -> f64 {
        self.sigma_y.trace()
    }
}

/// Predictive draws y = X_val β★ + ε with ε ~ N(0, σ★²I), the predictive
/// mean, and the covariance from the law of total variance.
pub fn posterior_predictive<R: rand::Rng + ?Sized>(
    x_val: &Mat,
    beta_draws: &[Vector],
    sigma2_star: f64,
    rng: &mut R,
) -> Result<Predictive> {
    if beta_draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let m = x_val.nrows();
    if m == 0 {
        return Err(Error::Dimension("empty validation design".into()));
    }
    let means: Vec<Vector> = beta_draws.iter().map(|b| x_val * b).collect();
    let n = means.len() as f64;
    let mut y_hat = Vector::zeros(m);
    for mu in &means {
        y_hat += mu;
    }
    y_hat /= n;
    let mut cov = Mat::zeros(m, m);
    for mu in &means {
        let d = mu - &y_hat;
        cov.ger(1.0 / n, &d, &d, 1.0);
    }
    for i in 0..m {
        cov[(i, i)] += sigma2_star;
    }
    let sd = sigma2_star.sqrt();
    let y_pred = means
        .iter()
        .map(|mu| mu + std_normal_vec(m, rng) * sd)
        .collect();
    Ok(Predictive {
        y_pred,
        y_hat,
        sigma_y: cov,
    })
}

/// b₁ ≤ a₁·μλ / (k · F⁻¹_{k, 2a₁}(1 − δ/t)).
pub fn calibrate_b1(a1: f64, mu_lambda: f64, k: usize, t: f64, delta: f64) -> Result<f64> {
    if !(a1 > 0.0 && mu_lambda > 0.0 && k > 0 && t > 0.0 && delta > 0.0) {
        return Err(Error::Domain("calibrate_b1 needs positive inputs".into()));
    }
    if delta >= 1.0 {
        return Err(Error::Domain(format!("delta = {delta} must be < 1")));
    }
    let q = 1.0 - delta / t;
    if q >= 1.0 || q <= 0.0 {
        return Err(Error::Domain(format!("quantile level {q} outside (0, 1)")));
    }
    let f = f_quantile(k as f64, 2.0 * a1, q)?;
    Ok(a1 * mu_lambda / (k as f64 * f))
}

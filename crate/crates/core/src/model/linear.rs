//! The hierarchical linear model: y = Xβ + ε with β ~ N(0, P + φ(I − P)).

use crate::manifold::{
    projection_from_basis, sample_uniform_stiefel, ProjectionMatrix, StiefelPoint,
};
use crate::samplers::mvn::{std_normal_vec, Gaussian};
use crate::samplers::{sample_trunc_inverse_gamma, BinghamParam};
use crate::{Error, Mat, Result, Vector};
use nalgebra::Cholesky;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseVariance {
    Known(f64),
    Infer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskData {
    pub id: usize,
    pub y: Vector,
    pub x: Mat,
    pub sigma2: NoiseVariance,
}

impl TaskData {
    pub fn new(id: usize, y: Vector, x: Mat, sigma2: NoiseVariance) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "task {id}: X has {} rows, y has {}",
                x.nrows(),
                y.len()
            )));
        }
        if y.is_empty() {
            return Err(Error::Dimension(format!("task {id} has no observations")));
        }
        if let NoiseVariance::Known(v) = sigma2 {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("task {id}: noise variance {v}")));
            }
        }
        Ok(TaskData { id, y, x, sigma2 })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    pub beta: Vector,
    pub sigma2: f64,
}

impl TaskState {
    /// Coordinates Zᵀβ of the coefficient inside the shared subspace.
    pub fn a_coords(&self, z: &StiefelPoint) -> Vector {
        z.matrix().transpose() * &self.beta
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalState {
    pub z: StiefelPoint,
    pub phi: f64,
}

impl GlobalState {
    pub fn new(z: StiefelPoint, phi: f64) -> Result<Self> {
        check_phi(phi)?;
        Ok(GlobalState { z, phi })
    }

    pub fn projection(&self) -> ProjectionMatrix {
        projection_from_basis(&self.z).expect("state basis is orthonormal")
    }
}

pub(crate) fn check_phi(phi: f64) -> Result<()> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Domain(format!("phi = {phi} outside (0, 1)")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
    pub z0_prior: Option<Mat>,
    pub bingham_sweeps: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            a: 1.0,
            b: 1.0,
            kappa: 0.0,
            z0_prior: None,
            bingham_sweeps: 1,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::Config(format!(
                "IG hyperparameters a={}, b={}",
                self.a, self.b
            )));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::Config(format!("kappa = {}", self.kappa)));
        }
        if self.kappa > 0.0 && self.z0_prior.is_none() {
            return Err(Error::Config("kappa > 0 needs a reference basis".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub s: usize,
    pub n_s: usize,
    pub p: usize,
    pub k: usize,
    pub phi0: f64,
    pub sigma2_0: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.p {
            return Err(Error::Config(format!(
                "need 1 <= k < p (p={}, k={})",
                self.p, self.k
            )));
        }
        // phi0 = 0 is the degenerate limit, clamped when drawing
        if !(self.phi0 >= 0.0 && self.phi0 < 1.0) {
            return Err(Error::Config(format!(
                "phi0 = {} outside [0, 1)",
                self.phi0
            )));
        }
        if self.s == 0 || self.n_s == 0 {
            return Err(Error::Config("need S >= 1 and n_s >= 1".into()));
        }
        if !(self.sigma2_0 > 0.0) {
            return Err(Error::Config(format!("sigma2 = {}", self.sigma2_0)));
        }
        Ok(())
    }

    /// trace of the true coefficient covariance, k + φ₀(p − k).
    pub fn coefficient_trace(&self) -> f64 {
        self.k as f64 + self.phi0 * (self.p - self.k) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub z0: StiefelPoint,
    pub p0: ProjectionMatrix,
    pub beta0: Vec<Vector>,
    pub phi0: f64,
    pub sigma2: f64,
}

/// Σ = P + φ(I − P).
pub fn prior_cov(p: &Mat, phi: f64) -> Mat {
    let n = p.nrows();
    p * (1.0 - phi) + Mat::identity(n, n) * phi
}

/// Σ⁻¹ = P + (1/φ)(I − P).
pub fn prior_prec(p: &Mat, phi: f64) -> Mat {
    let n = p.nrows();
    p * (1.0 - 1.0 / phi) + Mat::identity(n, n) / phi
}

/// Σ^{1/2} = P + √φ(I − P).
pub fn prior_sqrt(p: &Mat, phi: f64) -> Mat {
    let n = p.nrows();
    p * (1.0 - phi.sqrt()) + Mat::identity(n, n) * phi.sqrt()
}

pub fn variance_proportion(k: usize, p: usize, phi: f64) -> f64 {
    k as f64 / (k as f64 + phi * (p - k) as f64)
}

/// β = Za + e with a ~ N(0, I_k) and e ~ N(0, φ(I − P)), so that
/// Cov(β) = (1 − φ)P + φI.
fn draw_coefficient<R: Rng + ?Sized>(z: &Mat, phi: f64, rng: &mut R) -> Vector {
    let (p, k) = (z.nrows(), z.ncols());
    let a = std_normal_vec(k, rng);
    let e = std_normal_vec(p, rng);
    let pe = z * (z.transpose() * &e);
    z * a + (e - pe) * phi.sqrt()
}

pub fn generate_tasks<R: Rng + ?Sized>(
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<(Vec<TaskData>, Truth)> {
    cfg.validate()?;
    let z0 = sample_uniform_stiefel(cfg.p, cfg.k, rng)?;
    let p0 = projection_from_basis(&z0)?;
    let phi = cfg.phi0.max(1e-12);
    let mut tasks = Vec::with_capacity(cfg.s);
    let mut betas = Vec::with_capacity(cfg.s);
    let sd = cfg.sigma2_0.sqrt();
    for s in 0..cfg.s {
        let beta = draw_true_coefficient(&z0, phi, rng);
        let x = Mat::from_fn(cfg.n_s, cfg.p, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let y = &x * &beta + std_normal_vec(cfg.n_s, rng) * sd;
        tasks.push(TaskData::new(s, y, x, NoiseVariance::Known(cfg.sigma2_0))?);
        betas.push(beta);
    }
    Ok((
        tasks,
        Truth {
            z0,
            p0,
            beta0: betas,
            phi0: cfg.phi0,
            sigma2: cfg.sigma2_0,
        },
    ))
}

/// β₀ ~ N(0, (1 − φ₀)P₀ + φ₀I).
pub fn draw_true_coefficient<R: Rng + ?Sized>(z0: &StiefelPoint, phi0: f64, rng: &mut R) -> Vector {
    draw_coefficient(z0.matrix(), phi0, rng)
}

fn check_task(task: &TaskData, p: usize) -> Result<()> {
    if task.p() != p {
        return Err(Error::Dimension(format!(
            "task {} has p={}, state has p={p}",
            task.id,
            task.p()
        )));
    }
    Ok(())
}

/// Gaussian conditional of β given (P, φ, σ²), picking the Woodbury route
/// when p > n.
pub fn beta_full_conditional(task: &TaskData, sigma2: f64, g: &GlobalState) -> Result<Gaussian> {
    if task.p() > task.n() {
        beta_conditional_woodbury(task, sigma2, g)
    } else {
        beta_conditional_direct(task, sigma2, g)
    }
}

pub fn beta_conditional_direct(task: &TaskData, sigma2: f64, g: &GlobalState) -> Result<Gaussian> {
    check_phi(g.phi)?;
    check_task(task, g.z.p())?;
    let p = g.projection();
    let prec = task.x.transpose() * &task.x / sigma2 + prior_prec(p.matrix(), g.phi);
    let chol = Cholesky::new(prec).ok_or(Error::NotPositiveDefinite("beta precision"))?;
    let cov = chol.inverse();
    let mean = &cov * (task.x.transpose() * &task.y) / sigma2;
    Ok(Gaussian { mean, cov })
}

pub fn beta_conditional_woodbury(
    task: &TaskData,
    sigma2: f64,
    g: &GlobalState,
) -> Result<Gaussian> {
    check_phi(g.phi)?;
    check_task(task, g.z.p())?;
    let p = g.projection();
    let v = prior_cov(p.matrix(), g.phi);
    let xv = &task.x * &v;
    let n = task.n();
    let m = &xv * task.x.transpose() + Mat::identity(n, n) * sigma2;
    let chol = Cholesky::new(m).ok_or(Error::NotPositiveDefinite("XVXᵀ + σ²I"))?;
    let mean = xv.transpose() * chol.solve(&task.y);
    let cov = &v - xv.transpose() * chol.solve(&xv);
    Ok(Gaussian {
        mean,
        cov: (&cov + cov.transpose()) * 0.5,
    })
}

/// Cached sufficient statistics for repeated β draws on one task.
#[derive(Clone, Debug)]
pub struct TaskCache {
    pub xtx: Mat,
    pub xty: Vector,
}

impl TaskCache {
    pub fn new(task: &TaskData) -> Self {
        TaskCache {
            xtx: task.x.transpose() * &task.x,
            xty: task.x.transpose() * &task.y,
        }
    }
}

/// Draw β from N(mean, Λ⁻¹) with Λ = XᵀWX + Σ⁻¹ for a linear model whose
/// noise is N(0, diag(noise)) and whose weighted statistics XᵀWX, XᵀWy are
/// supplied. With p > n the exact sampler of Bhattacharya, Chakraborty and
/// Mallick is used, which solves an n×n system instead of a p×p one.
pub(crate) fn sample_regression_coefficients<R: Rng + ?Sized>(
    x: &Mat,
    y: &Vector,
    noise: &[f64],
    weighted: Option<(&Mat, &Vector)>,
    p_mat: &Mat,
    phi: f64,
    rng: &mut R,
) -> Result<Vector> {
    let (n, p) = (x.nrows(), x.ncols());
    if p > n {
        let vhalf = prior_sqrt(p_mat, phi);
        let u = &vhalf * std_normal_vec(p, rng);
        let v = prior_cov(p_mat, phi);
        let xv = x * &v;
        let mut m = &xv * x.transpose();
        for i in 0..n {
            m[(i, i)] += noise[i];
        }
        let chol = Cholesky::new(m).ok_or(Error::NotPositiveDefinite("XVXᵀ + noise"))?;
        let mut resid = y - x * &u;
        for i in 0..n {
            resid[i] -= noise[i].sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let w = chol.solve(&resid);
        Ok(u + xv.transpose() * w)
    } else {
        let (xtwx, xtwy) = match weighted {
            Some((a, b)) => (a.clone(), b.clone()),
            None => {
                let mut xw = x.clone();
                for i in 0..n {
                    xw.row_mut(i).unscale_mut(noise[i]);
                }
                (xw.transpose() * x, xw.transpose() * y)
            }
        };
        let prec = xtwx + prior_prec(p_mat, phi);
        let chol = Cholesky::new(prec).ok_or(Error::NotPositiveDefinite("beta precision"))?;
        let mean = chol.solve(&xtwy);
        let z = std_normal_vec(p, rng);
        let dev = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or(Error::NotPositiveDefinite("beta precision"))?;
        Ok(mean + dev)
    }
}

/// One β draw for a linear task given the global state.
pub fn sample_beta<R: Rng + ?Sized>(
    task: &TaskData,
    cache: Option<&TaskCache>,
    sigma2: f64,
    p_mat: &Mat,
    phi: f64,
    rng: &mut R,
) -> Result<Vector> {
    check_phi(phi)?;
    let noise = vec![sigma2; task.n()];
    let scaled;
    let weighted = match cache {
        Some(c) => {
            scaled = (&c.xtx / sigma2, &c.xty / sigma2);
            Some((&scaled.0, &scaled.1))
        }
        None => None,
    };
    sample_regression_coefficients(&task.x, &task.y, &noise, weighted, p_mat, phi, rng)
}

/// IG(a + n/2, b + ‖y − Xβ‖²/2) as (shape, scale).
pub fn sigma2_full_conditional(
    task: &TaskData,
    beta: &Vector,
    hyper: &HyperParams,
) -> Result<(f64, f64)> {
    if let NoiseVariance::Known(_) = task.sigma2 {
        return Err(Error::Mode(format!(
            "task {} has a known noise variance",
            task.id
        )));
    }
    let r = &task.y - &task.x * beta;
    Ok((
        hyper.a + 0.5 * task.n() as f64,
        hyper.b + 0.5 * r.norm_squared(),
    ))
}

/// Exponent convention for the φ conditional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiConvention {
    /// Density ∝ φ^{−(p−k)S/2} e^{−R/(2φ)}: inverse-gamma shape (p−k)S/2 − 1.
    Likelihood,
    /// Inverse-gamma shape (p−k)S/2, one extra power of φ⁻¹.
    Printed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhiConditional {
    pub shape: f64,
    pub scale: f64,
    pub lo: f64,
    pub hi: f64,
}

impl PhiConditional {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        sample_trunc_inverse_gamma(self.shape, self.scale, self.lo, self.hi, rng)
    }

    /// log of the unnormalized density at φ.
    pub fn log_density(&self, phi: f64) -> f64 {
        if !(phi > self.lo && phi < self.hi) {
            return f64::NEG_INFINITY;
        }
        -(self.shape + 1.0) * phi.ln() - self.scale / phi
    }
}

/// R = Σₛ βₛᵀ(I − P)βₛ.
pub fn off_subspace_energy(z: &Mat, betas: &[Vector]) -> f64 {
    betas
        .iter()
        .map(|b| {
            let c = z.transpose() * b;
            (b.norm_squared() - c.norm_squared()).max(0.0)
        })
        .sum()
}

pub fn phi_full_conditional(
    p: &ProjectionMatrix,
    betas: &[Vector],
    convention: PhiConvention,
) -> Result<PhiConditional> {
    if betas.is_empty() {
        return Err(Error::Dimension(
            "phi conditional needs at least one task".into(),
        ));
    }
    let (dim, k) = (p.dim(), p.rank());
    for b in betas {
        if b.len() != dim {
            return Err(Error::Dimension(
                "coefficient length differs from projection".into(),
            ));
        }
    }
    let r = off_subspace_energy(p.basis(), betas);
    let scale_ref: f64 = betas
        .iter()
        .map(|b| b.norm_squared())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    if !(r > 1e-14 * scale_ref) {
        return Err(Error::Degenerate(format!(
            "off-subspace energy R = {r:.3e}; coefficients lie in span(P)"
        )));
    }
    let half = 0.5 * ((dim - k) * betas.len()) as f64;
    let shape = match convention {
        PhiConvention::Likelihood => half - 1.0,
        PhiConvention::Printed => half,
    };
    Ok(PhiConditional {
        shape,
        scale: 0.5 * r,
        lo: 0.0,
        hi: 1.0,
    })
}

/// Bingham parameter A₀ + δBBᵀ with δ = (1/φ − 1)/2 and A₀ = κZ₀Z₀ᵀ.
pub fn z_full_conditional_param(
    betas: &[Vector],
    phi: f64,
    k: usize,
    hyper: &HyperParams,
) -> Result<BinghamParam> {
    check_phi(phi)?;
    let p = betas
        .first()
        .map(|b| b.len())
        .or_else(|| hyper.z0_prior.as_ref().map(|z| z.nrows()))
        .ok_or_else(|| Error::Dimension("no coefficients".into()))?;
    let delta = 0.5 * (1.0 / phi - 1.0);
    let mut a = Mat::zeros(p, p);
    for b in betas {
        if b.len() != p {
            return Err(Error::Dimension("coefficients differ in length".into()));
        }
        a.ger(delta, b, b, 1.0);
    }
    if hyper.kappa > 0.0 {
        let z0 = hyper
            .z0_prior
            .as_ref()
            .ok_or_else(|| Error::Config("kappa > 0 needs a reference basis".into()))?;
        if z0.nrows() != p {
            return Err(Error::Dimension("reference basis has wrong p".into()));
        }
        a += z0 * z0.transpose() * hyper.kappa;
    }
    BinghamParam::new((&a + a.transpose()) * 0.5, k)
}

//! The meta-training Gibbs sampler shared by the linear and logistic models.

use super::linear::{
    check_phi, phi_full_conditional, sample_beta, sigma2_full_conditional,
    z_full_conditional_param, GlobalState, HyperParams, NoiseVariance, PhiConvention, TaskCache,
    TaskData, TaskState,
};
use crate::manifold::{projection_from_basis, sample_uniform_stiefel, StiefelPoint};
use crate::rng::{tag, RngStream};
use crate::samplers::{
    cs_kernel_step, sample_matrix_bingham, sample_trunc_inverse_gamma, CsSettings,
};
use crate::{Error, Mat, Result, Vector};
use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Bingham,
    Cs,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Bingham => "bingham",
            Kernel::Cs => "cs",
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bingham" => Ok(Kernel::Bingham),
            "cs" | "cs-decomposition" => Ok(Kernel::Cs),
            other => Err(Error::Config(format!("unknown kernel '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub kernel: Kernel,
    pub cs: CsSettings,
    pub phi_convention: PhiConvention,
    pub phi_floor: f64,
    pub store_betas: bool,
}

impl ChainConfig {
    /// Defaults: half the run as burn-in, keep every fifth sweep.
    pub fn new(iters: usize) -> Self {
        ChainConfig {
            iters,
            burnin: iters / 2,
            thin: 5,
            kernel: Kernel::Bingham,
            cs: CsSettings::default(),
            phi_convention: PhiConvention::Likelihood,
            phi_floor: 1e-8,
            store_betas: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        Ok(())
    }

    pub fn expected_draws(&self) -> usize {
        (self.iters - self.burnin) / self.thin
    }

    fn keep(&self, t: usize) -> bool {
        t >= self.burnin && (t - self.burnin + 1) % self.thin == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    pub z: Mat,
    pub phi: f64,
    pub betas: Vec<Vector>,
    pub sigma2: Vec<f64>,
}

impl Draw {
    pub fn global(&self) -> GlobalState {
        GlobalState {
            z: StiefelPoint::from_trusted(self.z.clone()),
            phi: self.phi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub draws: Vec<Draw>,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub stream: Vec<u64>,
    pub p: usize,
    pub k: usize,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn phis(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.phi).collect()
    }
}

/// Everything needed to continue a chain exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub next_iteration: usize,
    pub z: Mat,
    pub phi: f64,
    pub tasks: Vec<TaskState>,
}

/// Per-task part of a Gibbs sweep.
pub(crate) trait TaskModel: Sync {
    fn tasks(&self) -> usize;
    fn p(&self) -> usize;
    /// Initial coefficients and noise variances.
    fn init_task(&self, s: usize) -> Result<TaskState>;
    fn update_task(
        &self,
        s: usize,
        st: &mut TaskState,
        p_mat: &Mat,
        phi: f64,
        rng: &mut dyn rand::RngCore,
    ) -> Result<()>;
}

pub(crate) struct LinearModel<'a> {
    pub tasks: &'a [TaskData],
    pub caches: Vec<TaskCache>,
    pub hyper: &'a HyperParams,
}

impl<'a> LinearModel<'a> {
    pub fn new(tasks: &'a [TaskData], hyper: &'a HyperParams) -> Self {
        LinearModel {
            tasks,
            caches: tasks.iter().map(TaskCache::new).collect(),
            hyper,
        }
    }
}

/// Ridge estimate (XᵀX + I)⁻¹Xᵀy.
pub(crate) fn ridge(xtx: &Mat, xty: &Vector) -> Result<Vector> {
    let n = xtx.nrows();
    let chol = Cholesky::new(xtx + Mat::identity(n, n))
        .ok_or(Error::NotPositiveDefinite("ridge system"))?;
    Ok(chol.solve(xty))
}

impl TaskModel for LinearModel<'_> {
    fn tasks(&self) -> usize {
        self.tasks.len()
    }

    fn p(&self) -> usize {
        self.tasks[0].p()
    }

    fn init_task(&self, s: usize) -> Result<TaskState> {
        let t = &self.tasks[s];
        let c = &self.caches[s];
        let beta = ridge(&c.xtx, &c.xty)?;
        let sigma2 = match t.sigma2 {
            NoiseVariance::Known(v) => v,
            NoiseVariance::Infer => ((&t.y - &t.x * &beta).norm_squared() / t.n() as f64).max(1e-6),
        };
        Ok(TaskState { beta, sigma2 })
    }

    fn update_task(
        &self,
        s: usize,
        st: &mut TaskState,
        p_mat: &Mat,
        phi: f64,
        rng: &mut dyn rand::RngCore,
    ) -> Result<()> {
        let t = &self.tasks[s];
        st.beta = sample_beta(t, Some(&self.caches[s]), st.sigma2, p_mat, phi, rng)?;
        if t.sigma2 == NoiseVariance::Infer {
            let (shape, scale) = sigma2_full_conditional(t, &st.beta, self.hyper)?;
            st.sigma2 = sample_trunc_inverse_gamma(shape, scale, 0.0, f64::INFINITY, rng)?;
        }
        Ok(())
    }
}

fn initial_basis(betas: &[Vector], k: usize, stream: &RngStream) -> Result<StiefelPoint> {
    let p = betas[0].len();
    let b = Mat::from_columns(betas);
    let svd = b.svd(true, false);
    let u = svd.u.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut rng = stream.child(&[tag::INIT, 1]).rng();
    let mut cols: Vec<Vector> = order
        .iter()
        .filter(|&&i| svd.singular_values[i] > 1e-12)
        .take(k)
        .map(|&i| u.column(i).clone_owned())
        .collect();
    if cols.len() < k {
        let extra = sample_uniform_stiefel(p, k, &mut rng)?;
        for j in 0..k {
            if cols.len() >= k {
                break;
            }
            cols.push(extra.matrix().column(j).clone_owned());
        }
    }
    let mut m = Mat::from_columns(&cols);
    // jitter guards against a random completion that repeats a direction
    loop {
        if let Ok(z) = StiefelPoint::orthonormalize(&m) {
            return Ok(z);
        }
        m += Mat::from_fn(p, k, |_, _| 1e-6 * rng.sample::<f64, _>(StandardNormal));
    }
}

pub(crate) fn initial_state<M: TaskModel>(
    model: &M,
    k: usize,
    stream: &RngStream,
) -> Result<ChainState> {
    let tasks: Vec<TaskState> = (0..model.tasks())
        .map(|s| model.init_task(s))
        .collect::<Result<_>>()?;
    let betas: Vec<Vector> = tasks.iter().map(|t| t.beta.clone()).collect();
    let z = initial_basis(&betas, k, stream)?;
    Ok(ChainState {
        next_iteration: 0,
        z: z.into_matrix(),
        phi: 0.5,
        tasks,
    })
}

fn non_finite(iteration: usize, what: &str) -> Error {
    Error::NonFinite {
        iteration,
        what: what.to_string(),
    }
}

/// Z and φ updates given the current coefficients.
fn update_global(
    z: &StiefelPoint,
    phi: f64,
    betas: &[Vector],
    hyper: &HyperParams,
    cfg: &ChainConfig,
    stream: &RngStream,
    t: usize,
) -> Result<(StiefelPoint, f64)> {
    let k = z.k();
    let param = z_full_conditional_param(betas, phi, k, hyper)?;
    let mut zrng = stream.child(&[tag::SUBSPACE, t as u64]).rng();
    let z_new = match cfg.kernel {
        Kernel::Bingham => sample_matrix_bingham(&param, z, hyper.bingham_sweeps, &mut zrng)?,
        Kernel::Cs => {
            let mut cur = z.clone();
            for _ in 0..hyper.bingham_sweeps.max(1) {
                cur = cs_kernel_step(&param, &cur, &cfg.cs, &mut zrng)?.0;
            }
            cur
        }
    };
    let proj = projection_from_basis(&z_new)?;
    let mut prng = stream.child(&[tag::PHI, t as u64]).rng();
    let phi_new = match phi_full_conditional(&proj, betas, cfg.phi_convention) {
        Ok(cond) => cond.sample(&mut prng)?,
        Err(Error::Degenerate(msg)) => {
            log::warn!("iteration {t}: {msg}; phi clamped to {}", cfg.phi_floor);
            cfg.phi_floor
        }
        Err(e) => return Err(e),
    };
    Ok((z_new, phi_new.clamp(cfg.phi_floor, 1.0 - 1e-12)))
}

pub(crate) fn run_chain<M: TaskModel>(
    model: &M,
    hyper: &HyperParams,
    cfg: &ChainConfig,
    k: usize,
    stream: &RngStream,
    resume: Option<ChainState>,
    mut sink: Option<&mut dyn FnMut(&Draw) -> Result<()>>,
) -> Result<(PosteriorDraws, ChainState)> {
    cfg.validate()?;
    hyper.validate()?;
    if model.tasks() == 0 {
        return Err(Error::Dimension("no tasks".into()));
    }
    let p = model.p();
    if k == 0 || k >= p {
        return Err(Error::Dimension(format!("need 1 <= k < p (p={p}, k={k})")));
    }
    let mut state = match resume {
        Some(s) => s,
        None => initial_state(model, k, stream)?,
    };
    if state.z.shape() != (p, k) || state.tasks.len() != model.tasks() {
        return Err(Error::Dimension(
            "resume state does not match the data".into(),
        ));
    }
    check_phi(state.phi)?;
    let mut z = StiefelPoint::new(state.z.clone())?;
    let mut phi = state.phi;
    let mut tasks = std::mem::take(&mut state.tasks);
    let mut draws = Vec::new();
    for t in state.next_iteration..cfg.iters {
        let proj = projection_from_basis(&z)?;
        let pm = proj.matrix();
        tasks
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(s, st)| {
                let mut rng = stream.child(&[tag::TASK, t as u64, s as u64]).rng();
                model.update_task(s, st, pm, phi, &mut rng)
            })
            .map_err(|e| match e {
                Error::NotPositiveDefinite(w) => non_finite(t, w),
                other => other,
            })?;
        if tasks
            .iter()
            .any(|st| !st.sigma2.is_finite() || st.beta.iter().any(|v| !v.is_finite()))
        {
            return Err(non_finite(t, "task coefficients"));
        }
        let betas: Vec<Vector> = tasks.iter().map(|s| s.beta.clone()).collect();
        let (zn, pn) = update_global(&z, phi, &betas, hyper, cfg, stream, t)?;
        if zn.matrix().iter().any(|v| !v.is_finite()) || !pn.is_finite() {
            return Err(non_finite(t, "subspace or phi"));
        }
        z = zn;
        phi = pn;
        if cfg.keep(t) {
            let d = Draw {
                iteration: t,
                z: z.matrix().clone(),
                phi,
                betas: if cfg.store_betas { betas } else { Vec::new() },
                sigma2: if cfg.store_betas {
                    tasks.iter().map(|s| s.sigma2).collect()
                } else {
                    Vec::new()
                },
            };
            if let Some(f) = sink.as_mut() {
                f(&d)?;
            }
            draws.push(d);
        }
    }
    let end = ChainState {
        next_iteration: cfg.iters,
        z: z.into_matrix(),
        phi,
        tasks,
    };
    Ok((
        PosteriorDraws {
            draws,
            iters: cfg.iters,
            burnin: cfg.burnin,
            thin: cfg.thin,
            seed: stream.seed(),
            stream: stream.path().to_vec(),
            p,
            k,
        },
        end,
    ))
}

/// Algorithm 1: per-task β (and σ² when inferred), then Z, then φ.
pub fn gibbs_meta_train(
    tasks: &[TaskData],
    hyper: &HyperParams,
    k: usize,
    cfg: &ChainConfig,
    stream: &RngStream,
) -> Result<PosteriorDraws> {
    check_shared_p(tasks)?;
    let model = LinearModel::new(tasks, hyper);
    Ok(run_chain(&model, hyper, cfg, k, stream, None, None)?.0)
}

/// As [`gibbs_meta_train`], optionally continuing from a saved state and
/// streaming each kept draw to `sink`. Returns the final chain state too.
pub fn gibbs_meta_train_resumable(
    tasks: &[TaskData],
    hyper: &HyperParams,
    k: usize,
    cfg: &ChainConfig,
    stream: &RngStream,
    resume: Option<ChainState>,
    sink: Option<&mut dyn FnMut(&Draw) -> Result<()>>,
) -> Result<(PosteriorDraws, ChainState)> {
    check_shared_p(tasks)?;
    let model = LinearModel::new(tasks, hyper);
    run_chain(&model, hyper, cfg, k, stream, resume, sink)
}

pub(crate) fn check_shared_p(tasks: &[TaskData]) -> Result<()> {
    let p = tasks
        .first()
        .ok_or_else(|| Error::Dimension("no tasks".into()))?
        .p();
    if tasks.iter().any(|t| t.p() != p) {
        return Err(Error::Dimension("tasks differ in p".into()));
    }
    Ok(())
}

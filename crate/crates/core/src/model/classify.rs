//! Pólya–Gamma augmented logistic meta-learning and its stick-breaking
//! multiclass extension.

use super::gibbs::{ridge, run_chain, ChainConfig, PosteriorDraws, TaskModel};
use super::linear::{
    check_phi, prior_prec, sample_regression_coefficients, GlobalState, HyperParams, TaskState,
};
use crate::rng::{tag, RngStream};
use crate::samplers::mvn::Gaussian;
use crate::samplers::sample_polya_gamma_1;
use crate::{Error, Mat, Result, Vector};
use nalgebra::Cholesky;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryTaskData {
    pub id: usize,
    pub y: Vector,
    pub x: Mat,
}

impl BinaryTaskData {
    pub fn new(id: usize, y: Vector, x: Mat) -> Result<Self> {
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::Dimension(format!(
                "task {id}: {} rows vs {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::Domain(format!(
                "task {id}: label {bad} not in {{0, 1}}"
            )));
        }
        Ok(BinaryTaskData { id, y, x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgAugmentation {
    pub omega: Vector,
}

pub fn pg_update<R: Rng + ?Sized>(
    task: &BinaryTaskData,
    beta: &Vector,
    rng: &mut R,
) -> Result<PgAugmentation> {
    if beta.len() != task.p() {
        return Err(Error::Dimension("beta length differs from design".into()));
    }
    let psi = &task.x * beta;
    Ok(PgAugmentation {
        omega: psi.map(|c| sample_polya_gamma_1(c, rng)),
    })
}

/// N(m, V) with V⁻¹ = XᵀΩX + P + (1/φ)(I − P) and m = V Xᵀ(y − ½).
pub fn beta_pg_full_conditional(
    task: &BinaryTaskData,
    aug: &PgAugmentation,
    g: &GlobalState,
) -> Result<Gaussian> {
    check_phi(g.phi)?;
    if aug.omega.len() != task.n() {
        return Err(Error::Dimension(
            "augmentation length differs from n".into(),
        ));
    }
    if aug.omega.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Domain("Pólya–Gamma weights must be positive".into()));
    }
    let p = g.projection();
    let (xtwx, kappa) = weighted_stats(task, &aug.omega);
    let prec = xtwx + prior_prec(p.matrix(), g.phi);
    let chol = Cholesky::new(prec).ok_or(Error::NotPositiveDefinite("beta precision"))?;
    let cov = chol.inverse();
    let mean = &cov * kappa;
    Ok(Gaussian { mean, cov })
}

fn weighted_stats(task: &BinaryTaskData, omega: &Vector) -> (Mat, Vector) {
    let mut xw = task.x.clone();
    for i in 0..task.n() {
        xw.row_mut(i).scale_mut(omega[i]);
    }
    let kappa = task.y.map(|v| v - 0.5);
    (xw.transpose() * &task.x, task.x.transpose() * kappa)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) struct LogisticModel<'a> {
    pub tasks: &'a [BinaryTaskData],
}

impl TaskModel for LogisticModel<'_> {
    fn tasks(&self) -> usize {
        self.tasks.len()
    }

    fn p(&self) -> usize {
        self.tasks[0].p()
    }

    fn init_task(&self, s: usize) -> Result<TaskState> {
        let t = &self.tasks[s];
        let pseudo = t.y.map(|v| 4.0 * (v - 0.5));
        let beta = ridge(&(t.x.transpose() * &t.x), &(t.x.transpose() * pseudo))?;
        Ok(TaskState { beta, sigma2: 1.0 })
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
        let aug = pg_update(t, &st.beta, rng)?;
        // Gaussian pseudo-model: z = κ/ω with noise variance 1/ω
        let noise: Vec<f64> = aug.omega.iter().map(|w| 1.0 / w).collect();
        let z = Vector::from_fn(t.n(), |i, _| (t.y[i] - 0.5) / aug.omega[i]);
        let (xtwx, xtk) = weighted_stats(t, &aug.omega);
        st.beta =
            sample_regression_coefficients(&t.x, &z, &noise, Some((&xtwx, &xtk)), p_mat, phi, rng)?;
        Ok(())
    }
}

fn check_binary(tasks: &[BinaryTaskData]) -> Result<()> {
    let p = tasks
        .first()
        .ok_or_else(|| Error::Dimension("no tasks".into()))?
        .p();
    if tasks.iter().any(|t| t.p() != p) {
        return Err(Error::Dimension("tasks differ in p".into()));
    }
    Ok(())
}

/// Sweep per task (ω then β), then Z, then φ.
pub fn logistic_gibbs_meta_train(
    tasks: &[BinaryTaskData],
    hyper: &HyperParams,
    k: usize,
    cfg: &ChainConfig,
    stream: &RngStream,
) -> Result<PosteriorDraws> {
    check_binary(tasks)?;
    let model = LogisticModel { tasks };
    Ok(run_chain(&model, hyper, cfg, k, stream, None, None)?.0)
}

/// π₁ = π̃₁, πⱼ = π̃ⱼ Π_{l<j}(1 − π̃ₗ), π_K = Π_{l<K}(1 − π̃ₗ) with π̃ = logistic(ψ).
pub fn stick_breaking_probs(psi: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(psi.len() + 1);
    let mut rest = 1.0;
    for &v in psi {
        out.push(rest * logistic(v));
        rest *= logistic(-v);
    }
    out.push(rest);
    out
}

/// A task with labels in 1..=K.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiClassTask {
    pub id: usize,
    pub labels: Vec<usize>,
    pub x: Mat,
}

impl MultiClassTask {
    pub fn new(id: usize, labels: Vec<usize>, x: Mat, classes: usize) -> Result<Self> {
        if labels.len() != x.nrows() || labels.is_empty() {
            return Err(Error::Dimension(format!(
                "task {id}: labels and design disagree"
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l == 0 || l > classes) {
            return Err(Error::Domain(format!(
                "task {id}: label {l} outside 1..={classes}"
            )));
        }
        Ok(MultiClassTask { id, labels, x })
    }
}

/// Rows still in play for class j: those not assigned to a class below j.
pub fn eligible_rows(labels: &[usize], j: usize) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] >= j).collect()
}

/// Binary subproblem for class j: eligible rows, response [label == j].
pub fn binary_subproblem(task: &MultiClassTask, j: usize) -> Option<BinaryTaskData> {
    let rows = eligible_rows(&task.labels, j);
    if rows.is_empty() {
        return None;
    }
    let x = task.x.select_rows(rows.iter());
    let y = Vector::from_iterator(
        rows.len(),
        rows.iter().map(|&i| (task.labels[i] == j) as u8 as f64),
    );
    Some(BinaryTaskData { id: task.id, y, x })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiClassDraws {
    pub classes: usize,
    /// Chain for class j+1, or None when no observation was eligible.
    pub per_class: Vec<Option<PosteriorDraws>>,
    /// Task ids that entered each class chain, in chain order.
    pub members: Vec<Vec<usize>>,
}

/// Independent binary chains for classes 1..K−1. Class 1 uses `stream`
/// itself, so with K = 2 the result equals the binary sampler's.
pub fn multiclass_gibbs_meta_train(
    tasks: &[MultiClassTask],
    classes: usize,
    hyper: &HyperParams,
    k: usize,
    cfg: &ChainConfig,
    stream: &RngStream,
) -> Result<MultiClassDraws> {
    if classes < 2 {
        return Err(Error::Domain("need at least two classes".into()));
    }
    let runs: Vec<Result<(Option<PosteriorDraws>, Vec<usize>)>> = {
        use rayon::prelude::*;
        (1..classes)
            .into_par_iter()
            .map(|j| {
                let sub: Vec<BinaryTaskData> = tasks
                    .iter()
                    .filter_map(|t| binary_subproblem(t, j))
                    .collect();
                let ids = sub.iter().map(|t| t.id).collect();
                if sub.is_empty() {
                    log::warn!("class {j}: no eligible observations, update skipped");
                    return Ok((None, ids));
                }
                let cs = if j == 1 {
                    stream.clone()
                } else {
                    stream.child(&[tag::CLASS, j as u64])
                };
                Ok((
                    Some(logistic_gibbs_meta_train(&sub, hyper, k, cfg, &cs)?),
                    ids,
                ))
            })
            .collect()
    };
    let mut per_class = Vec::new();
    let mut members = Vec::new();
    for r in runs {
        let (d, ids) = r?;
        per_class.push(d);
        members.push(ids);
    }
    Ok(MultiClassDraws {
        classes,
        per_class,
        members,
    })
}

/// Class probabilities for one design row given per-class coefficients.
pub fn class_probabilities(x_row: &Vector, betas: &[Vector]) -> Vec<f64> {
    let psi: Vec<f64> = betas.iter().map(|b| x_row.dot(b)).collect();
    stick_breaking_probs(&psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stick_breaking_halves() {
        let p = stick_breaking_probs(&[0.0, 0.0, 0.0]);
        assert_eq!(p, vec![0.5, 0.25, 0.125, 0.125]);
        let p = stick_breaking_probs(&[1.3]);
        assert!(
            (p[0] - logistic(1.3)).abs() < 1e-15 && (p[1] - (1.0 - logistic(1.3))).abs() < 1e-15
        );
    }

    #[test]
    fn eligibility_telescopes() {
        let labels = vec![1, 3, 2, 2, 4, 1, 3, 4, 4];
        for j in 1..=4 {
            let below = labels.iter().filter(|&&l| l < j).count();
            assert_eq!(eligible_rows(&labels, j).len(), labels.len() - below);
        }
    }

    #[test]
    fn scalar_pg_conditional() {
        use crate::manifold::StiefelPoint;
        // p = 2 so a k = 1 subspace exists; the second coordinate carries no data
        let x = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let t = BinaryTaskData::new(0, Vector::from_vec(vec![1.0]), x).unwrap();
        let aug = PgAugmentation {
            omega: Vector::from_vec(vec![1.0]),
        };
        let g = GlobalState::new(StiefelPoint::new(Mat::identity(2, 1)).unwrap(), 0.5).unwrap();
        let c = beta_pg_full_conditional(&t, &aug, &g).unwrap();
        assert!((c.mean[0] - 0.25).abs() < 1e-14);
        assert!(c.mean[1].abs() < 1e-14);
    }
}

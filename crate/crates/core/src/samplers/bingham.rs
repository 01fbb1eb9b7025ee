//! Bingham and Bingham–von Mises–Fisher kernels on spheres and Stiefel
//! manifolds.

use crate::manifold::{complement_basis, StiefelPoint};
use crate::{Error, Mat, Result, Vector};
use nalgebra::SymmetricEigen;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use std::f64::consts::TAU;

/// Parameter A of the matrix Bingham density ∝ exp(tr(ZᵀAZ)) over p×k bases.
#[derive(Clone, Debug, PartialEq)]
pub struct BinghamParam {
    a: Mat,
    k: usize,
}

impl BinghamParam {
    pub fn new(a: Mat, k: usize) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension("Bingham parameter must be square".into()));
        }
        if k == 0 || k >= a.nrows() {
            return Err(Error::Dimension(format!("need 1 <= k < p, got k={k}")));
        }
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::InvariantViolation(format!(
                "A not symmetric ({asym:.2e})"
            )));
        }
        Ok(BinghamParam { a, k })
    }

    pub fn matrix(&self) -> &Mat {
        &self.a
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    /// log of the unnormalized density tr(ZᵀAZ).
    pub fn log_density(&self, z: &Mat) -> f64 {
        (z.transpose() * &self.a * z).trace()
    }
}

/// Exact draw of (θ, 1−θ) where θ = x₁² for x on the unit sphere in m
/// dimensions with density ∝ exp(c·x₁²); equivalently θ has density
/// ∝ θ^{-1/2} (1−θ)^{(m−3)/2} e^{cθ} on (0, 1).
///
/// Uses the angular-central-Gaussian envelope of Kent, Ganeiber and Mardia.
pub fn sample_squared_coordinate<R: Rng + ?Sized>(c: f64, m: usize, rng: &mut R) -> (f64, f64) {
    if m <= 1 {
        return (1.0, 0.0);
    }
    let q = m as f64;
    let l = c.abs();
    let chi = Gamma::new(0.5 * (q - 1.0), 2.0).unwrap();
    if l < 1e-300 {
        let y1: f64 = rng.sample::<f64, _>(StandardNormal).powi(2);
        let r: f64 = chi.sample(rng);
        return (y1 / (y1 + r), r / (y1 + r));
    }
    // A = diag(l, 0, ..., 0) when c <= 0, diag(0, l, ..., l) when c > 0
    let big_first = c <= 0.0;
    let bq = 2.0 * l - q;
    let cq = if big_first {
        2.0 * l * (q - 1.0)
    } else {
        2.0 * l
    };
    let disc = (bq * bq + 4.0 * cq).sqrt();
    let b = if bq > 0.0 {
        2.0 * cq / (bq + disc)
    } else {
        0.5 * (disc - bq)
    };
    let (w1, wr) = if big_first {
        (1.0 + 2.0 * l / b, 1.0)
    } else {
        (1.0, 1.0 + 2.0 * l / b)
    };
    let log_const = 0.5 * (q - b) + 0.5 * q * (b / q).ln();
    loop {
        let y1 = rng.sample::<f64, _>(StandardNormal).powi(2) / w1;
        let r = chi.sample(rng) / wr;
        let tot = y1 + r;
        if tot <= 0.0 {
            continue;
        }
        let (th, om) = (y1 / tot, r / tot);
        let xax = if big_first { l * th } else { l * om };
        let xox = w1 * th + wr * om;
        let log_acc = -xax + 0.5 * q * xox.ln() + log_const;
        let u: f64 = rng.random();
        if u.ln() < log_acc {
            return (th, om);
        }
    }
}

/// One random-scan pass of the squared-coordinate Gibbs sampler for the
/// vector Bingham density ∝ exp(Σ λᵢ yᵢ²) on the unit sphere. `y` is updated
/// in place and stays on the sphere.
pub fn vector_bingham_pass<R: Rng + ?Sized>(lambda: &[f64], y: &mut [f64], rng: &mut R) {
    let m = y.len();
    if m == 1 {
        y[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    for &i in &order {
        let mut r2 = 0.0;
        let mut mix = 0.0;
        for j in 0..m {
            if j != i {
                r2 += y[j] * y[j];
                mix += lambda[j] * y[j] * y[j];
            }
        }
        let degenerate = r2 < 1e-200;
        let c = if degenerate {
            let mean: f64 =
                (0..m).filter(|&j| j != i).map(|j| lambda[j]).sum::<f64>() / (m - 1) as f64;
            lambda[i] - mean
        } else {
            lambda[i] - mix / r2
        };
        let (th, om) = sample_squared_coordinate(c, m, rng);
        if degenerate {
            let mut dir: Vec<f64> = (0..m)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            dir[i] = 0.0;
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..m {
                if j != i {
                    y[j] = dir[j] / n * om.sqrt();
                }
            }
        } else {
            let s = (om / r2).sqrt();
            for j in 0..m {
                if j != i {
                    y[j] *= s;
                }
            }
        }
        y[i] = if rng.random::<bool>() {
            th.sqrt()
        } else {
            -th.sqrt()
        };
    }
}

fn others(z: &Mat, j: usize) -> Mat {
    let cols: Vec<usize> = (0..z.ncols()).filter(|&c| c != j).collect();
    z.select_columns(cols.iter())
}

fn renormalize(z: &mut Mat) {
    for j in 0..z.ncols() {
        for i in 0..j {
            let d = z.column(i).dot(&z.column(j));
            let ci = z.column(i).clone_owned();
            z.column_mut(j).axpy(-d, &ci, 1.0);
        }
        let n = z.column(j).norm();
        z.column_mut(j).unscale_mut(n);
    }
}

/// Column-wise Gibbs sweeps for the matrix Bingham density ∝ exp(tr(ZᵀAZ)).
/// Each column is redrawn from its vector Bingham conditional on the sphere
/// of the complement of the remaining columns.
pub fn sample_matrix_bingham<R: Rng + ?Sized>(
    param: &BinghamParam,
    current: &StiefelPoint,
    sweeps: usize,
    rng: &mut R,
) -> Result<StiefelPoint> {
    if current.p() != param.p() || current.k() != param.k() {
        return Err(Error::Dimension(format!(
            "basis {}x{} vs parameter p={}, k={}",
            current.p(),
            current.k(),
            param.p(),
            param.k()
        )));
    }
    let a = param.matrix();
    let mut z = current.matrix().clone();
    let k = z.ncols();
    let mut order: Vec<usize> = (0..k).collect();
    for _ in 0..sweeps.max(1) {
        order.shuffle(rng);
        for &j in &order {
            let n = complement_basis(&others(&z, j));
            let mut at = n.transpose() * a * &n;
            at = (&at + at.transpose()) * 0.5;
            let eig = SymmetricEigen::new(at);
            let basis = &n * &eig.eigenvectors;
            let coords = basis.transpose() * z.column(j);
            let mut y: Vec<f64> = coords.iter().cloned().collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            y.iter_mut().for_each(|v| *v /= norm);
            let lambda: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
            vector_bingham_pass(&lambda, &mut y, rng);
            z.set_column(j, &(&basis * Vector::from_vec(y)));
        }
        renormalize(&mut z);
    }
    Ok(StiefelPoint::from_trusted(z))
}

/// Slice sampling of an angle on the circle, starting from `x0`, with an
/// initial bracket covering one full turn placed at a random offset.
pub fn slice_circle<R: Rng + ?Sized, F: Fn(f64) -> f64>(logf: F, x0: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let level = logf(x0) + (1.0 - u).ln();
    let mut lo = x0 - TAU * rng.random::<f64>();
    let mut hi = lo + TAU;
    loop {
        let x = lo + (hi - lo) * rng.random::<f64>();
        if logf(x) > level {
            return x;
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo < 1e-13 {
            return x0;
        }
    }
}

/// log of the unnormalized Bingham–vMF density Σⱼ dⱼ uⱼᵀAuⱼ + tr(FᵀU).
pub fn bmf_log_density(u: &Mat, a: Option<&Mat>, d: &[f64], f: Option<&Mat>) -> f64 {
    let mut out = 0.0;
    if let Some(a) = a {
        let q = u.transpose() * a * u;
        out += (0..u.ncols()).map(|j| d[j] * q[(j, j)]).sum::<f64>();
    }
    if let Some(f) = f {
        out += f.dot(u);
    }
    out
}

/// One sweep of a kernel leaving exp(Σⱼ dⱼ uⱼᵀAuⱼ + tr(FᵀU)) invariant on
/// n×k matrices with orthonormal columns (n ≥ k, square allowed).
///
/// The sweep combines three moves: slice updates of each column on the
/// sphere of the complement of the others (n > k), slice updates of planar
/// rotations of random column pairs, and exact sign flips of single columns.
pub fn bmf_sweep<R: Rng + ?Sized>(
    u: &mut Mat,
    a: Option<&Mat>,
    d: &[f64],
    f: Option<&Mat>,
    rng: &mut R,
) {
    let (n, k) = (u.nrows(), u.ncols());
    let mut order: Vec<usize> = (0..k).collect();
    if n > k {
        order.shuffle(rng);
        for &j in &order {
            column_sphere_update(u, j, a, d[j], f.map(|f| f.column(j).clone_owned()), rng);
        }
    }
    if k >= 2 {
        let aq = a.map(|a| a * &*u);
        let mut aq = aq;
        for _ in 0..k {
            let i = rng.random_range(0..k);
            let mut j = rng.random_range(0..k - 1);
            if j >= i {
                j += 1;
            }
            let (ui, uj) = (u.column(i).clone_owned(), u.column(j).clone_owned());
            let (qii, qjj, qij) = match &aq {
                Some(au) => (
                    ui.dot(&au.column(i)),
                    uj.dot(&au.column(j)),
                    ui.dot(&au.column(j)),
                ),
                None => (0.0, 0.0, 0.0),
            };
            let (li, lj) = match f {
                Some(f) => (
                    f.column(i).dot(&ui) + f.column(j).dot(&uj),
                    f.column(i).dot(&uj) - f.column(j).dot(&ui),
                ),
                None => (0.0, 0.0),
            };
            let (di, dj) = (d[i], d[j]);
            let logf = |w: f64| {
                let (s, c) = w.sin_cos();
                di * (c * c * qii + 2.0 * c * s * qij + s * s * qjj)
                    + dj * (s * s * qii - 2.0 * c * s * qij + c * c * qjj)
                    + c * li
                    + s * lj
            };
            let w = slice_circle(logf, 0.0, rng);
            let (s, c) = w.sin_cos();
            let new_i = &ui * c + &uj * s;
            let new_j = &uj * c - &ui * s;
            u.set_column(i, &new_i);
            u.set_column(j, &new_j);
            if let (Some(au), Some(a)) = (&mut aq, a) {
                au.set_column(i, &(a * &new_i));
                au.set_column(j, &(a * &new_j));
            }
        }
    }
    if let Some(f) = f {
        for j in 0..k {
            let t = f.column(j).dot(&u.column(j));
            // keep with probability e^{t} / (e^{t} + e^{-t})
            let keep = 1.0 / (1.0 + (-2.0 * t).exp());
            if rng.random::<f64>() >= keep {
                u.column_mut(j).neg_mut();
            }
        }
    } else {
        for j in 0..k {
            if rng.random::<bool>() {
                u.column_mut(j).neg_mut();
            }
        }
    }
    renormalize(u);
}

fn column_sphere_update<R: Rng + ?Sized>(
    u: &mut Mat,
    j: usize,
    a: Option<&Mat>,
    dj: f64,
    fj: Option<Vector>,
    rng: &mut R,
) {
    let nb = complement_basis(&others(u, j));
    let m = nb.ncols();
    let (basis, lambda) = match a {
        Some(a) if dj != 0.0 => {
            let mut at = nb.transpose() * a * &nb * dj;
            at = (&at + at.transpose()) * 0.5;
            let eig = SymmetricEigen::new(at);
            (
                &nb * &eig.eigenvectors,
                eig.eigenvalues.iter().cloned().collect::<Vec<_>>(),
            )
        }
        _ => (nb, vec![0.0; m]),
    };
    let mut y: Vec<f64> = (basis.transpose() * u.column(j)).iter().cloned().collect();
    let g: Vec<f64> = match &fj {
        Some(f) => (basis.transpose() * f).iter().cloned().collect(),
        None => vec![0.0; m],
    };
    if m == 1 {
        // only the sign is free; handled by the sign-flip move
        return;
    }
    for _ in 0..m {
        let ia = rng.random_range(0..m);
        let mut ib = rng.random_range(0..m - 1);
        if ib >= ia {
            ib += 1;
        }
        let r = y[ia].hypot(y[ib]);
        if r < 1e-150 {
            continue;
        }
        let (la, lb, ga, gb) = (lambda[ia], lambda[ib], g[ia], g[ib]);
        let logf = |w: f64| {
            let (s, c) = w.sin_cos();
            r * r * (la * c * c + lb * s * s) + r * (ga * c + gb * s)
        };
        let w = slice_circle(logf, y[ib].atan2(y[ia]), rng);
        let (s, c) = w.sin_cos();
        y[ia] = r * c;
        y[ib] = r * s;
    }
    u.set_column(j, &(&basis * Vector::from_vec(y)));
}

/// MCMC update for the matrix von Mises–Fisher density ∝ exp(tr(FᵀU)).
pub fn sample_matrix_vmf<R: Rng + ?Sized>(
    f: &Mat,
    current: &StiefelPoint,
    rng: &mut R,
) -> Result<StiefelPoint> {
    if f.shape() != current.matrix().shape() {
        return Err(Error::Dimension(format!(
            "F is {}x{}, basis is {}x{}",
            f.nrows(),
            f.ncols(),
            current.p(),
            current.k()
        )));
    }
    let mut u = current.matrix().clone();
    let d = vec![0.0; u.ncols()];
    bmf_sweep(&mut u, None, &d, Some(f), rng);
    Ok(StiefelPoint::from_trusted(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn squared_coordinate_has_right_mean() {
        // numeric integration oracle for E[θ] with density θ^{-1/2}(1-θ)^{(m-3)/2}e^{cθ}
        let mut rng = RngStream::new(11).rng();
        for &(c, m) in &[
            (0.0, 3usize),
            (-20.0, 4),
            (15.0, 5),
            (300.0, 36),
            (-300.0, 36),
        ] {
            let n = 40_000;
            let draws: Vec<f64> = (0..n)
                .map(|_| sample_squared_coordinate(c, m, &mut rng).0)
                .collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            let want = quad_mean(c, m);
            assert!(
                (mean - want).abs() < 4.0 * sd / (n as f64).sqrt() + 1e-12,
                "c={c} m={m} {mean} {want}"
            );
        }
    }

    fn quad_mean(c: f64, m: usize) -> f64 {
        // substitute θ = sin²(t) to remove the endpoint singularity
        let e = (m as f64 - 3.0) / 2.0;
        let n = 200_000;
        let h = std::f64::consts::FRAC_PI_2 / n as f64;
        let (mut z, mut z1) = (0.0, 0.0);
        let shift = c.max(0.0);
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            let (s, co) = t.sin_cos();
            let th = s * s;
            let w = 2.0 * co.powf(2.0 * e + 1.0) * (c * th - shift).exp();
            z += w;
            z1 += w * th;
        }
        z1 / z
    }

    #[test]
    fn pass_keeps_unit_norm() {
        let mut rng = RngStream::new(2).rng();
        let lambda = vec![3.0, -1.0, 0.5, 10.0];
        let mut y = vec![0.5; 4];
        for _ in 0..1000 {
            vector_bingham_pass(&lambda, &mut y, &mut rng);
        }
        let n: f64 = y.iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_bingham_stays_orthonormal() {
        let mut rng = RngStream::new(5).rng();
        let g = Mat::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let param = BinghamParam::new(&g + g.transpose(), 2).unwrap();
        let mut z = StiefelPoint::new(Mat::identity(6, 2)).unwrap();
        for _ in 0..1000 {
            z = sample_matrix_bingham(&param, &z, 1, &mut rng).unwrap();
        }
        assert!(z.orthonormality_error() < 1e-8);
    }

    #[test]
    fn bmf_sweep_square_stays_orthogonal() {
        let mut rng = RngStream::new(8).rng();
        let mut u = Mat::identity(3, 3);
        let a = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 2.0, -1.0]));
        let f = Mat::from_fn(3, 3, |i, j| (i + j) as f64 * 0.3);
        for _ in 0..500 {
            bmf_sweep(&mut u, Some(&a), &[0.5, 0.2, 0.9], Some(&f), &mut rng);
        }
        assert!(crate::manifold::orthonormality_error(&u) < 1e-10);
    }
}

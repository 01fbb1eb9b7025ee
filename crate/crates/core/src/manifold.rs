//! Stiefel and Grassmann geometry: orthonormal bases, projections, principal
//! angles, Frechet means and the cosine-sine block parameterization.

use crate::{Error, Mat, Result};
use nalgebra::SymmetricEigen;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_PI_2;

const ORTHO_TOL: f64 = 1e-10;

/// A p×k matrix with orthonormal columns, p > k ≥ 1.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelPoint {
    z: Mat,
}

impl StiefelPoint {
    pub fn new(z: Mat) -> Result<Self> {
        check_dims(z.nrows(), z.ncols())?;
        let err = orthonormality_error(&z);
        if err > ORTHO_TOL {
            return Err(Error::InvariantViolation(format!(
                "columns not orthonormal (max |ZᵀZ - I| = {err:.3e})"
            )));
        }
        Ok(StiefelPoint { z })
    }

    /// Orthonormalize an arbitrary full-rank p×k matrix (QR, positive diagonal).
    pub fn orthonormalize(m: &Mat) -> Result<Self> {
        check_dims(m.nrows(), m.ncols())?;
        let qr = m.clone().qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..m.ncols() {
            let d = r[(j, j)];
            if d.abs() < 1e-13 {
                return Err(Error::Degenerate("rank-deficient matrix".into()));
            }
            if d < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Ok(StiefelPoint { z: q })
    }

    pub(crate) fn from_trusted(z: Mat) -> Self {
        debug_assert!(orthonormality_error(&z) < 1e-6);
        StiefelPoint { z }
    }

    pub fn matrix(&self) -> &Mat {
        &self.z
    }

    pub fn into_matrix(self) -> Mat {
        self.z
    }

    pub fn p(&self) -> usize {
        self.z.nrows()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.z)
    }

    /// Remove accumulated round-off with one modified Gram-Schmidt pass.
    pub fn reorthonormalize(&mut self) {
        gram_schmidt_in_place(&mut self.z);
    }
}

fn check_dims(p: usize, k: usize) -> Result<()> {
    if k == 0 || k >= p {
        return Err(Error::Dimension(format!(
            "need 1 <= k < p, got p={p}, k={k}"
        )));
    }
    Ok(())
}

pub fn orthonormality_error(z: &Mat) -> f64 {
    let g = z.transpose() * z;
    let mut m: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let t = if i == j { 1.0 } else { 0.0 };
            m = m.max((g[(i, j)] - t).abs());
        }
    }
    m
}

fn gram_schmidt_in_place(z: &mut Mat) {
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

/// Rank-k orthogonal projection P together with a basis of its range.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    p: Mat,
    basis: Mat,
}

impl ProjectionMatrix {
    /// Validate a raw projection matrix and recover a basis from its top-k
    /// eigenvectors.
    pub fn from_matrix(p: Mat, k: usize) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n {
            return Err(Error::Dimension("projection must be square".into()));
        }
        check_dims(n, k)?;
        let asym = (&p - p.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::InvariantViolation(format!(
                "P not symmetric ({asym:.2e})"
            )));
        }
        let idem = (&p * &p - &p).amax();
        if idem > 1e-8 {
            return Err(Error::InvariantViolation(format!(
                "P not idempotent ({idem:.2e})"
            )));
        }
        let tr = p.trace();
        if (tr - k as f64).abs() > 1e-8 {
            return Err(Error::InvariantViolation(format!(
                "trace(P) = {tr}, expected {k}"
            )));
        }
        let (vecs, _) = top_eigenvectors(&p, k);
        Ok(ProjectionMatrix { p, basis: vecs })
    }

    pub fn matrix(&self) -> &Mat {
        &self.p
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// I − P.
    pub fn complement(&self) -> Mat {
        Mat::identity(self.dim(), self.dim()) - &self.p
    }
}

/// Anything that carries an orthonormal basis of a k-dimensional subspace.
pub trait Subspace {
    fn basis(&self) -> &Mat;
}

impl Subspace for StiefelPoint {
    fn basis(&self) -> &Mat {
        &self.z
    }
}

impl Subspace for ProjectionMatrix {
    fn basis(&self) -> &Mat {
        &self.basis
    }
}

/// Top-k eigenvectors of a symmetric matrix and the full descending spectrum.
pub(crate) fn top_eigenvectors(m: &Mat, k: usize) -> (Mat, Vec<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = Mat::zeros(m.nrows(), k);
    for (c, &i) in idx.iter().take(k).enumerate() {
        v.set_column(c, &eig.eigenvectors.column(i));
    }
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    (v, vals)
}

pub fn sample_uniform_stiefel<R: Rng + ?Sized>(
    p: usize,
    k: usize,
    rng: &mut R,
) -> Result<StiefelPoint> {
    check_dims(p, k)?;
    loop {
        let g = Mat::from_fn(p, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(z) = StiefelPoint::orthonormalize(&g) {
            return Ok(z);
        }
    }
}

pub fn projection_from_basis(z: &StiefelPoint) -> Result<ProjectionMatrix> {
    let err = z.orthonormality_error();
    if err > ORTHO_TOL {
        return Err(Error::InvariantViolation(format!(
            "basis not orthonormal ({err:.3e})"
        )));
    }
    let m = z.matrix();
    let mut p = m * m.transpose();
    p = (&p + p.transpose()) * 0.5;
    Ok(ProjectionMatrix {
        p,
        basis: m.clone(),
    })
}

/// Principal angles θ₁ ≥ … ≥ θ_k between two k-dimensional subspaces.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalAngleSet {
    angles: Vec<f64>,
}

impl PrincipalAngleSet {
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn theta1(&self) -> f64 {
        self.angles[0]
    }

    pub fn sin2_theta1(&self) -> f64 {
        self.angles[0].sin().powi(2)
    }

    pub fn sum_sin2(&self) -> f64 {
        self.angles.iter().map(|t| t.sin().powi(2)).sum()
    }
}

pub fn principal_angles<A: Subspace + ?Sized, B: Subspace + ?Sized>(
    a: &A,
    b: &B,
) -> Result<PrincipalAngleSet> {
    let (za, zb) = (a.basis(), b.basis());
    if za.nrows() != zb.nrows() || za.ncols() != zb.ncols() {
        return Err(Error::Dimension(format!(
            "subspaces {}x{} vs {}x{}",
            za.nrows(),
            za.ncols(),
            zb.nrows(),
            zb.ncols()
        )));
    }
    let cross = za.transpose() * zb;
    let mut cos: Vec<f64> = cross
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    let resid = zb - za * &cross;
    let mut sin: Vec<f64> = resid
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    cos.sort_by(|x, y| y.total_cmp(x));
    sin.sort_by(|x, y| x.total_cmp(y));
    let mut angles: Vec<f64> = cos
        .iter()
        .zip(&sin)
        .map(|(c, s)| s.atan2(*c).clamp(0.0, FRAC_PI_2))
        .collect();
    angles.reverse();
    Ok(PrincipalAngleSet { angles })
}

/// Rank-k spectral rounding of the entrywise mean: the extrinsic (Frobenius)
/// Frechet mean.
pub fn frechet_mean(samples: &[ProjectionMatrix]) -> Result<ProjectionMatrix> {
    let first = samples.first().ok_or(Error::EmptyDraws)?;
    let (n, k) = (first.dim(), first.rank());
    let mut avg = Mat::zeros(n, n);
    for s in samples {
        if s.dim() != n || s.rank() != k {
            return Err(Error::Dimension("samples differ in p or k".into()));
        }
        avg += s.matrix();
    }
    avg /= samples.len() as f64;
    let (basis, vals) = top_eigenvectors(&avg, k);
    if (vals[k - 1] - vals[k]).abs() <= 1e-12 {
        return Err(Error::DegenerateMean(vals[k - 1], vals[k]));
    }
    projection_from_basis(&StiefelPoint::from_trusted(basis))
}

/// Blocks of Z = [U1·cos θ; U2·sin θ]·Vᵀ.
#[derive(Clone, Debug, PartialEq)]
pub struct CsFactors {
    pub u1: Mat,
    pub u2: Mat,
    pub theta: Vec<f64>,
    pub v: Mat,
    pub theta_max: f64,
}

impl CsFactors {
    pub fn validate(&self) -> Result<()> {
        let k = self.theta.len();
        if self.u1.shape() != (k, k) || self.v.shape() != (k, k) || self.u2.ncols() != k {
            return Err(Error::Dimension("CS factor shapes disagree".into()));
        }
        for (name, m) in [("U1", &self.u1), ("U2", &self.u2), ("V", &self.v)] {
            let e = orthonormality_error(m);
            if e > ORTHO_TOL {
                return Err(Error::InvariantViolation(format!(
                    "{name} not orthonormal ({e:.2e})"
                )));
            }
        }
        if !(self.theta_max > 0.0 && self.theta_max <= FRAC_PI_2 + 1e-15) {
            return Err(Error::InvariantViolation(
                "theta_max outside (0, pi/2]".into(),
            ));
        }
        if self
            .theta
            .iter()
            .any(|&t| !(0.0..=self.theta_max).contains(&t))
        {
            return Err(Error::InvariantViolation(
                "angle outside [0, theta_max]".into(),
            ));
        }
        Ok(())
    }

    /// The basis with V dropped, [U1 cos θ; U2 sin θ].
    pub fn basis_without_v(&self) -> Mat {
        let k = self.theta.len();
        let pk = self.u2.nrows();
        let mut z = Mat::zeros(k + pk, k);
        for j in 0..k {
            let (s, c) = self.theta[j].sin_cos();
            for i in 0..k {
                z[(i, j)] = self.u1[(i, j)] * c;
            }
            for i in 0..pk {
                z[(k + i, j)] = self.u2[(i, j)] * s;
            }
        }
        z
    }
}

pub fn cs_recover_projection(f: &CsFactors) -> Result<ProjectionMatrix> {
    f.validate()?;
    let z = f.basis_without_v();
    check_dims(z.nrows(), z.ncols())?;
    projection_from_basis(&StiefelPoint::from_trusted(z))
}

/// CS factors of a basis with p ≥ 2k, with the sign/permutation gauge drawn
/// uniformly at random.
pub fn cs_decompose<R: Rng + ?Sized>(z: &StiefelPoint, rng: &mut R) -> Result<CsFactors> {
    let (p, k) = (z.p(), z.k());
    if p < 2 * k {
        return Err(Error::Dimension(format!(
            "CS decomposition needs p >= 2k (p={p}, k={k})"
        )));
    }
    let m = z.matrix();
    let z1 = m.rows(0, k).clone_owned();
    let z2 = m.rows(k, p - k).clone_owned();
    let svd = z1.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut u1 = Mat::zeros(k, k);
    let mut v = Mat::zeros(k, k);
    let mut cos = vec![0.0; k];
    for (c, &i) in order.iter().enumerate() {
        u1.set_column(c, &u.column(i));
        v.set_column(c, &vt.row(i).transpose());
        cos[c] = svd.singular_values[i].clamp(0.0, 1.0);
    }
    let w = &z2 * &v;
    let sin: Vec<f64> = (0..k).map(|j| w.column(j).norm().min(1.0)).collect();
    let theta: Vec<f64> = (0..k).map(|j| sin[j].atan2(cos[j])).collect();

    // orthonormalize the columns of W, largest first, completing null columns
    let mut u2 = Mat::zeros(p - k, k);
    let mut by_sin: Vec<usize> = (0..k).collect();
    by_sin.sort_by(|&a, &b| sin[b].total_cmp(&sin[a]));
    let mut done: Vec<usize> = Vec::with_capacity(k);
    for &j in &by_sin {
        let mut col = if sin[j] > 1e-9 {
            w.column(j).clone_owned()
        } else {
            nalgebra::DVector::from_fn(p - k, |_, _| rng.sample::<f64, _>(StandardNormal))
        };
        for _ in 0..2 {
            for &i in &done {
                let d = u2.column(i).dot(&col);
                col.axpy(-d, &u2.column(i).clone_owned(), 1.0);
            }
        }
        let n = col.norm();
        u2.set_column(j, &(col / n));
        done.push(j);
    }

    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let signs: Vec<f64> = (0..k)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut f = CsFactors {
        u1: Mat::zeros(k, k),
        u2: Mat::zeros(p - k, k),
        theta: vec![0.0; k],
        v: Mat::zeros(k, k),
        theta_max: FRAC_PI_2,
    };
    for (c, &j) in perm.iter().enumerate() {
        f.u1.set_column(c, &(u1.column(j) * signs[c]));
        f.u2.set_column(c, &(u2.column(j) * signs[c]));
        f.v.set_column(c, &(v.column(j) * signs[c]));
        f.theta[c] = theta[j];
    }
    Ok(f)
}

/// Orthonormal basis (p×(p−r)) of the orthogonal complement of the columns of
/// `others` (p×r, orthonormal).
pub fn complement_basis(others: &Mat) -> Mat {
    let (p, r) = (others.nrows(), others.ncols());
    if r == 0 {
        return Mat::identity(p, p);
    }
    let mut aug = Mat::zeros(p, r + p);
    aug.view_mut((0, 0), (p, r)).copy_from(others);
    aug.view_mut((0, r), (p, p)).fill_with_identity();
    let q = aug.qr().q();
    let mut n = q.columns(r, p - r).clone_owned();
    // a second projection removes residual overlap with `others`
    let overlap = others.transpose() * &n;
    n -= others * overlap;
    gram_schmidt_in_place(&mut n);
    n
}

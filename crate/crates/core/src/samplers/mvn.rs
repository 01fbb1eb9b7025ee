use crate::{Error, Mat, Result, Vector};
use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug)]
pub enum CovOrPrec<'a> {
    Cov(&'a Mat),
    Prec(&'a Mat),
}

pub fn std_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn sample_mvn<R: Rng + ?Sized>(mean: &Vector, m: CovOrPrec<'_>, rng: &mut R) -> Result<Vector> {
    let n = mean.len();
    match m {
        CovOrPrec::Cov(c) => {
            check_square(c, n)?;
            let l = Cholesky::new(c.clone()).ok_or(Error::NotPositiveDefinite("covariance"))?;
            Ok(mean + l.l() * std_normal_vec(n, rng))
        }
        CovOrPrec::Prec(q) => {
            check_square(q, n)?;
            let l = Cholesky::new(q.clone()).ok_or(Error::NotPositiveDefinite("precision"))?;
            let z = std_normal_vec(n, rng);
            let x = l
                .l()
                .transpose()
                .solve_upper_triangular(&z)
                .ok_or(Error::NotPositiveDefinite("precision"))?;
            Ok(mean + x)
        }
    }
}

fn check_square(m: &Mat, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!(
            "matrix {}x{} for mean of length {n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Moments of a Gaussian conditional.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: Vector,
    pub cov: Mat,
}

impl Gaussian {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        sample_mvn(&self.mean, CovOrPrec::Cov(&self.cov), rng)
    }
}

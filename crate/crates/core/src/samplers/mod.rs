//! Random variate generators and MCMC kernels.

pub mod bingham;
pub mod invgamma;
pub mod mvn;
pub mod polya_gamma;
pub mod theta;

pub use bingham::{
    bmf_log_density, bmf_sweep, sample_matrix_bingham, sample_matrix_vmf,
    sample_squared_coordinate, vector_bingham_pass, BinghamParam,
};
pub use invgamma::sample_trunc_inverse_gamma;
pub use mvn::{sample_mvn, std_normal_vec, CovOrPrec, Gaussian};
pub use polya_gamma::{polya_gamma_1_density, polya_gamma_1_mean, sample_polya_gamma_1};
pub use theta::{
    cs_kernel_step, mh_log_ratio, mh_theta_update, theta_from_x, CsSettings, CsStats, HaarTerm,
    ThetaConditionalCoeffs, ThetaPrior,
};

pub mod classify;
pub mod gibbs;
pub mod linear;
pub mod metatest;

pub use classify::{
    beta_pg_full_conditional, class_probabilities, logistic, logistic_gibbs_meta_train,
    multiclass_gibbs_meta_train, pg_update, stick_breaking_probs, BinaryTaskData, MultiClassDraws,
    MultiClassTask, PgAugmentation,
};
pub use gibbs::{
    gibbs_meta_train, gibbs_meta_train_resumable, ChainConfig, ChainState, Draw, Kernel,
    PosteriorDraws,
};
pub use linear::{
    beta_conditional_direct, beta_conditional_woodbury, beta_full_conditional, generate_tasks,
    phi_full_conditional, sample_beta, sigma2_full_conditional, variance_proportion,
    z_full_conditional_param, GlobalState, HyperParams, NoiseVariance, PhiConditional,
    PhiConvention, SimConfig, TaskData, TaskState, Truth,
};
pub use metatest::{
    calibrate_b1, meta_test_posterior, posterior_predictive, MetaPrior, Predictive,
};

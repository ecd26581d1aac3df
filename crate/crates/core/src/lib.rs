//! Composite e-variables built from per-parameter e-variables over a net,
//! with numerical certification of `sup_θ E_θ[e] <= 1`.

pub mod checker;
pub mod combinator;
pub mod error;
pub mod estimator;
pub mod evar;
pub mod expfam;
pub mod factor;
pub mod families;
pub mod family;
pub mod net;
pub mod numeric;
pub mod numstr;
pub mod verifier;

pub use checker::{check_all, ConditionReport, GridSpec};
pub use combinator::{
    bump_weight, combine_discrete, combine_interpolated, even_odd_split, product_evar, CompositeEVariable,
    EvenOddSplit, Mode, ProductEVariable,
};
pub use error::{Error, Result};
pub use estimator::{Cell, CustomEstimator, Estimator, TieRule};
pub use evar::{spike_evar, BumpSpikes, ComponentMap, ComponentSource, ComponentSpec, Constant, EVariable, Spike, Suite};
pub use expfam::{mle_likelihood_eq, ExponentialFamily};
pub use factor::{calibrate_p_to_e, factor_lemma4, factor_lemma5, FactorInputs};
pub use families::{make_bundle, FamilyBundle, FamilyConfig, LemmaRoute};
pub use family::{log_likelihood_ratio, Family, FamilyId, ParamSpace, Side, Support};
pub use net::{Neighbors, Net, NetPoint};
pub use verifier::{
    adversarial_bound, default_theta_grid, expectation, expectation_of, mle_counterexample_poisson, sweep, Expectation,
    ExpectationPlan, Method, Verdict, VerificationReport,
};

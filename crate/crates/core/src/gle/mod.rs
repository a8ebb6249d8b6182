//! Moment series, Wynn acceleration, the generating function `F(s, t)`,
//! generalized exponents and the replica trick.

pub mod generating;
pub mod regroup;
pub mod replica;
pub mod report;
pub mod series;
pub mod wynn;

pub use generating::{f_eval, l_of_t, slab_sums, FValue, LtSolution, SlabSums};
pub use regroup::{is_nonnegative as regroup_is_nonnegative, quadrinomial_regroup_l, regroup, RegroupedMatrices};
pub use replica::{replica_exponent, replica_matrix};
pub use report::{dispersion_params, exponents, Accelerated, ExponentReport, LSample, ReplicaValue};
pub use series::{accumulate_moments, sigma2_from_moments, sigma2_prefactor, series_prefactor, MomentSeries, MomentSlab};
pub use wynn::{wynn_epsilon, EpsilonTable, WynnEstimate};

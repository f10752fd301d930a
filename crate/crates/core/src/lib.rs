//! Cut-set outer bounds, strong-converse exponent certificates and Monte
//! Carlo code simulation for discrete memoryless and Gaussian multimessage
//! networks.
//!
//! All logarithms are natural; rates and information quantities are in nats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod info;
pub mod linalg;
pub mod model;
pub mod par;
pub mod region;
pub mod sim;
pub mod types_discrete;
pub mod types_gaussian;

pub use model::{
    load_covariance, load_distribution, load_network, load_rates, marginalize_channel, ConditionalPmf, Cut,
    DiscreteNetwork, GaussianNetwork, ModelError, Network, RateMatrix,
};
pub use region::{outer_region_margin, region_margin, MembershipVerdict, OptimizerConfig, Witness};

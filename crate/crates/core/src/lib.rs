//! Claims-based randomized allocation of scarce resources.
//!
//! * [`lottery`]: top-k, unweighted, Broome-fair (BF) and partial BF lotteries.
//! * [`compliance`]: per-round audit of BF weights.
//! * [`metrics`]: utility, expected utility, systemic exclusion rate, frontiers.
//! * [`claimsim`]: Monte Carlo experiments over synthetic claim distributions.
//! * [`predict`]: tabular ingestion, classifiers, bootstrap ensembles and
//!   conformal outlier p-values.
//! * [`uncertain`]: randomization driven by prediction uncertainty.

pub mod claims;
pub mod claimsim;
pub mod compliance;
pub mod error;
pub mod lottery;
pub mod metrics;
pub mod par;
pub mod predict;
pub mod rng;
pub mod uncertain;

pub use claims::{
    canonical_sort, AllocationResult, ClaimProfile, LotteryConfig, Mechanism, SelectionWeights,
    UtilityGroundTruth,
};
pub use compliance::{check_bf_compliance, ComplianceReport, Violation};
pub use error::{Error, Result};
pub use rng::{RandomSource, GENERATOR_VERSION};

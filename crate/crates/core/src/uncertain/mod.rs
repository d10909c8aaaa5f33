//! Randomization driven by prediction uncertainty: near the decision
//! boundary, over ensemble disagreement, and over conformal outliers.

mod mechanisms;
pub mod study;

pub use mechanisms::{
    boundary_randomize, matched_boundary_config, outlier_randomize, variance_randomize, Evaluation, PoolMode,
    PoolWeights, UncertainAllocationReport, VarianceOptions, VoteMode,
};
pub use study::{
    prepare_fold, run_study, ser_tradeoff_study, Method, PreparedFold, SelectionFrequency, StudyConfig, StudyReport,
    TableRow, TradeoffPoint, TradeoffReport,
};

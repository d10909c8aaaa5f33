//! Predicted claims: CSV ingestion, train/test protocol, classifiers,
//! bootstrap ensembles and conformal outlier p-values.

pub mod bootstrap;
pub mod conformal;
pub mod dataset;
pub mod models;
pub mod synthetic;

pub use bootstrap::{bootstrap_ensemble, BootstrapConfig, BootstrapEnsemble, SubsetSampling};
pub use conformal::{conformal_pvalues, conformal_quantile, ConformalScorer, NoveltyScore, DEFAULT_REFERENCE_CAP};
pub use dataset::{ingest_csv, ingest_reader, split, Matrix, Schema, Split, Standardizer, TabularDataset};
pub use models::{
    logistic_gradient, logistic_loss, predict, train, DecisionTree, LogisticRegression, Model, ModelSpec,
    PredictedClaims, RandomForest,
};

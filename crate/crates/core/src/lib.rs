//! Match software-design attack patterns to mitigating security-pattern
//! groups.
//!
//! The pipeline: a catalog of regularly expressed attack patterns is encoded
//! into four-feature numeric rows (attack ID, attacked resource ID, attack
//! vector ID, attack type), a three-layer feed-forward network is trained on
//! them with resilient backpropagation, and the decoded network output picks
//! one of six STRIDE-aligned security-pattern groups as the recommended
//! mitigation.
//!
//! The crate is organised along the pipeline stages:
//!
//! - [`catalog`]: attack-pattern notation, component registry, STRIDE
//!   categories and the six security-pattern groups.
//! - [`encoder`]: numeric encoding, CSV exchange, normalization and the
//!   train/test split.
//! - [`neuralnet`]: the network itself — forward pass, full-batch
//!   backpropagation, RPROP updates, the training loop and the model file.
//! - [`experiment`]: evaluation tables, the hidden-neuron sweep and the
//!   recommendation query.

pub mod catalog;
pub mod encoder;
pub mod experiment;
pub mod neuralnet;

pub use catalog::{
    load_catalog, load_registry, parse_pattern, AttackPatternExpr, AttackPatternRecord,
    AttackPath, AttackType, Catalog, CatalogError, ComponentRegistry, GroupMember, PatternSource,
    SecurityPatternGroup, StrideCategory,
};
pub use encoder::{
    decode_output, encode_sample, encode_target, enumerate_samples, normalize, read_csv, split,
    write_csv, Dataset, EncodeError, FeatureRow, NormalizationParams, RawSample, TargetMode,
};
pub use experiment::{
    evaluate, recommend, run_sweep, EvalTable, ExperimentError, Recommendation, RecommendInput,
    SweepReport,
};
pub use neuralnet::{
    backprop_full_batch, init_mlp, mse, rprop_step, train, Gradients, Mlp, Model, NetError,
    OutputActivation, RpropParams, RpropState, StopReason, TrainConfig, TrainLog,
};

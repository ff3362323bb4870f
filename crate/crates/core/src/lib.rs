//! Extended factor graphs: a single representation covering Bayesian
//! networks, Markov networks and hybrids, with a graphical independence test,
//! lossless conversions, and exact and approximate inference.

pub mod cli;
pub mod convert;
pub mod format;
pub mod independence;
pub mod inference;
pub mod model;
pub mod tables;

pub use convert::{bn_to_fg, fg_to_bn, fg_to_mrf, mrf_to_fg, BayesNet, ConvertError, MarkovNet};
pub use format::{parse_model, serialize_model, ModelFile, ParseError};
pub use independence::{separated, IndependenceError, IndependenceQuery, Verdict};
pub use inference::{
    joint_enumerate, marginal, numeric_ci, sum_product, InferenceError, Method, Schedule,
    SumProductOptions,
};
pub use model::{EdgeKind, Evidence, FactorGraph, FunctionDecl, ModelError, NodeId, Variable};
pub use tables::{Axis, FactorTable, TableError};

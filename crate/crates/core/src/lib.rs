//! Stochastic graph traversals over compact adjacency, with the estimators and
//! learning objectives built on them.

pub mod estimators;
pub mod evaluation;
pub mod graph_store;
pub mod learning;
pub mod rng;
pub mod specializations;
pub mod traversal;
pub mod cli;

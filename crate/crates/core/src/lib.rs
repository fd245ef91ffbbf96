//! Query-likelihood retrieval over Pólya and Dirichlet document models, with
//! pseudo-relevance-feedback expansion, axiomatic constraint probes, and
//! TREC-style evaluation.
//!
//! Modules follow the pipeline: [`corpus`] ingests TREC data and builds the
//! inverted index; [`lm`] estimates document and background models; [`retrieval`]
//! ranks; [`feedback`] selects expansion terms (RM3, SMM, PDCM, and the two
//! query-topic-model variants) and interpolates them with the query;
//! [`constraints`] probes each selection method against the six axiomatic
//! feedback constraints; [`eval`] computes MAP/NDCG@10, paired t-tests, and
//! two-fold cross-validated parameter sweeps; [`pipeline`] wires a full
//! first-pass → expand → re-rank experiment.

pub mod constraints;
pub mod corpus;
pub mod eval;
pub mod feedback;
pub mod lm;
pub mod pipeline;
pub mod retrieval;

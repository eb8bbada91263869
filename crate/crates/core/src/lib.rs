//! Homophily-guided polynomial spectral graph filters.

pub mod basis;
pub mod bench;
pub mod dataset;
pub mod filters;
pub mod graph;
pub mod homophily;
pub mod neural;

//! Causal attribution of events from data-assimilation model evidence.
//!
//! The factual and counterfactual worlds are two state-space models that
//! differ only in an external forcing. Assimilating the same observations in
//! both worlds yields two evidences `f1(y)` and `f0(y)`, and the probability
//! of necessary causation of the observed trajectory is `1 − f0(y)/f1(y)`.
//! The conventional threshold-exceedance baseline and the forced Lorenz-63
//! comparison experiment live in [`conventional`] and [`experiments`].

pub mod conventional;
pub mod error;
pub mod evidence;
pub mod experiments;
pub mod filters;
pub mod linalg;
pub mod models;
pub mod seeds;

pub use error::{DadaError, Result};

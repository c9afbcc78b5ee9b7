//! Contraction matrices, steady-state bounds, admissible step sizes, and
//! runtime audits of the one-step error inequalities.

mod audit;
mod bounds;
mod contraction;

use thiserror::Error;

use crate::algorithms::AlgorithmId;

pub use audit::{audit_lemmas, AuditConstants, AuditReport, AuditStatus, Lemma, LemmaAudit, AUDIT_SLACK};
pub use bounds::{diffusion_bound, dgt_bound, dgt_resolvent_majorant, max_stepsize, theory_bound, DGT_STEP_CONSTANT};
pub use contraction::{dgt_contraction, diffusion_contraction, spectral_radius, ContractionModel, DriftInputs};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no inequalities are audited for {0}")]
    Unsupported(AlgorithmId),
    #[error("record lacks the {0} series")]
    MissingSeries(&'static str),
    #[error("audit failed: {lemma} violated at iteration {iteration} (residual {residual:e})")]
    AuditFailed { lemma: &'static str, iteration: usize, residual: f64 },
}

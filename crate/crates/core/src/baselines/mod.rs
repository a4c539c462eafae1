//! Reference summarizers used as competitors in the evaluation harness.

mod glimpse;
mod ppr;

pub use glimpse::{glimpse_summarize, GlimpseConfig, GlimpsePreferences};
pub use ppr::{ppr_scores, ppr_summarize, PprConfig};

//! Detection of forum users who self-report a professional bipolar disorder
//! diagnosis, plus demographic profiling of the resulting cohort.
//!
//! The pipeline stages map onto the modules below:
//!
//! * [`corpus`]: streaming ingestion of Reddit-style JSONL dumps, text
//!   normalization, per-user activity stats, pseudonymized export.
//! * [`pattern`]: the pattern language (placeholders, trailing wildcards),
//!   expansion into literal alternatives, and the compiled matcher.
//! * [`detector`]: per-post classification, cohort construction, bot and
//!   manual-review exclusions, comorbidity extraction.
//! * [`profiler`]: age, gender and country estimation by fusing bracketed
//!   self-reports, username-based scores and text-model predictions.
//! * [`evaluation`]: gold-annotation handling and accuracy/coverage scoring
//!   for every extraction method.

pub mod corpus;
pub mod detector;
pub mod evaluation;
pub mod pattern;
pub mod profiler;
#[cfg(feature = "testkit")]
pub mod testkit;

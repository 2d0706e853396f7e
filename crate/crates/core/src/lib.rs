//! Personalised extractive multi-document summarisation.

pub mod adaptive;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod exdos;
pub mod prefs;
pub mod pipeline;
pub mod summarizer;
pub mod sumrecom;
mod search;

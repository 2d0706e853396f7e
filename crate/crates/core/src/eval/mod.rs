//! ROUGE, the ground-truth reward, simulated users and synthetic corpora.

pub mod reward;
pub mod rouge;
pub mod simuser;
pub mod stats;
pub mod synth;

pub use reward::{ground_truth_reward, redundancy, RewardCoeffs};
pub use rouge::{lcs_len, rouge_l, rouge_n, RougeMetric, RougeMode, RougeScore};
pub use simuser::{Answer, Query, SimUser, UserKind};
pub use synth::{synth_corpus, SynthConfig, SynthCorpus};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("at least one non-empty reference is required")]
    EmptyReference,
    #[error("ROUGE-{0} is not supported; use 1, 2 or L")]
    UnsupportedOrder(usize),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("noise must lie in [0, 0.5), got {0}")]
    InvalidNoise(f64),
}

//! Contradiction-rate aggregation, rankings, sub-sampling stability and
//! agreement statistics.

pub mod agreement;
pub mod rates;
pub mod stability;
pub mod tables;

use thiserror::Error;

use crate::model::{BotId, Dimension};

pub use agreement::{auto_human_agreement, f1_score, inter_annotator, pearson, tau_sweep, AgreementReport, InterAnnotatorReport};
pub use rates::{
    overall_rates, pair_rate, rank_bots, Aggregation, CellStats, ContradictionMatrix, DialogueTally, GridCell,
    OverallRates, PairPools, RankingReport, RateGrid,
};
pub use stability::{leave_one_out_stability, sample_sizes, stability_curve, StabilityCurve};
pub use tables::{appropriateness_summary, inquiry_statistics, AppropriatenessSummary, InquiryStatistics, PairTable, Report};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("contradiction rate of `{evaluated}` with partner `{partner}` is undefined: no judged inquiry pairs")]
    UndefinedCell { partner: BotId, evaluated: BotId },
    #[error("judgment refers to unknown dialogue `{0}`")]
    UnknownDialogue(String),
    #[error("unknown bot `{0}`")]
    UnknownBot(BotId),
    #[error("pool of pair ({partner}, {evaluated}) has {size} dialogues, need {needed}")]
    PoolTooSmall {
        partner: BotId,
        evaluated: BotId,
        size: usize,
        needed: usize,
    },
    #[error("automatic and human judgments share no inquiry pair")]
    DisjointKeys,
    #[error("automatic judgment for {dialogue_id} turn {turn_k} has no stored score")]
    MissingScore { dialogue_id: String, turn_k: u32 },
    #[error("vote by `{annotator}` on {dialogue_id} turn {turn_k} lacks `{dimension}`")]
    MissingDimension {
        dimension: Dimension,
        dialogue_id: String,
        turn_k: u32,
        annotator: String,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
}

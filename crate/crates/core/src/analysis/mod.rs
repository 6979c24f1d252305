//! Scores for labeled matched pairs: hit ratio, inter-annotator agreement,
//! reviewer roles and review-to-release time intervals.

mod labels;
mod metrics;
mod temporal;

pub use labels::{consensus, validate_labels, Consensus, ConsensusLabel, PairLabel, Relevance, Role, ADJUDICATOR};
pub use metrics::{
    agreement, hit_ratio, role_distribution, role_distribution_from_counts, Agreement, HitCount, RoleDistribution,
    RoleShare,
};
pub use temporal::{
    interval_averages, interval_histogram, time_interval, Bin, IntervalStats, SentenceDates, DEFAULT_BIN_WIDTH,
};

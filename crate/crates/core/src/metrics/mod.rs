//! Rating and ranking measures, the evaluation protocols that feed them and
//! the report they produce.

mod measures;
mod protocol;
mod report;

pub use measures::{
    hit_ratio_at_k, ndcg_at_k, precision_at_pct, rank_descending, retrieved_count, rmse, user_precision,
    RankedList, RelevanceTies, UserCandidates,
};
pub use protocol::{leave_one_out_lists, rank_with_sampled_negatives, rating_candidates, rating_pairs};
pub use report::{evaluate, EvalReport, EvalSettings, Metric, UserScore};

//! Sparse interaction storage, rating file ingestion, split protocols and
//! negative sampling.

mod ingest;
mod inputs;
mod matrix;
mod sampling;
mod split;
mod synthetic;

pub use ingest::{
    id_fingerprint, ingest, read_entries, write_entries, Dataset, Format, IdMap, IngestOptions, SplitFiles,
};
pub(crate) use ingest::hex;
pub use inputs::{init_inputs, InputMode, InputPattern, LearnableInputSet};
pub use matrix::{row_distance, Interaction, InteractionMatrix};
pub use sampling::{sample_excluding, sample_negatives, sample_negatives_with};
pub use split::{split_leave_one_out, split_random, SplitBundle, SplitProtocol};
pub use synthetic::synthetic_low_rank;

#[cfg(test)]
pub(crate) use matrix::toy_matrix;

//! Command implementations behind the `inpncf` binary.

mod commands;
mod config;

pub use commands::{
    cmd_evaluate, cmd_inputs_dump, cmd_split, cmd_summary, cmd_train, load_split, prepare_data, ModelSummary,
    PreparedData, SplitManifest, SplitRequest, TrainOptions, TrainSummary, BEST_MODEL_FILE, CHECKPOINT_FILE, HISTORY_FILE,
    ITEM_INPUTS_FILE, USER_INPUTS_FILE,
};
pub use config::{DatasetConfig, RunConfig, SplitConfig, CONFIG_VERSION, OUTPUT_DIR_ENV};

use crate::error::Error;

/// Process exit status for an error: 2 configuration, 3 numerical failure,
/// 4 file or format problems, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Numerical(_) => 3,
        Error::Io { .. } | Error::Parse { .. } | Error::Csv(_) | Error::Checkpoint(_) => 4,
        Error::Shape(_) | Error::Data(_) | Error::Tape(_) => 1,
    }
}

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::mlcore::linear::LinearModel;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid day window {first}:{last} (days must satisfy -30 <= first <= last <= 0)")]
    InvalidWindow { first: i32, last: i32 },

    #[error("unknown user {0}")]
    UnknownUser(u32),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("{count} dangling foreign key(s), first offenders: {}", .offenders.join(", "))]
    DanglingKeys { count: usize, offenders: Vec<String> },

    #[error("corpus has no users")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("profile kinds differ ({0} vs {1})")]
    KindMismatch(&'static str, &'static str),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("coordinate descent did not converge after {iterations} iterations")]
    NotConverged { iterations: usize, last: Box<LinearModel> },

    #[error("feature layout mismatch: model expects {expected} columns, got {found}")]
    LayoutMismatch { expected: usize, found: usize },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("zero variance input")]
    ZeroVariance,

    #[error("constant-mean baseline has zero error; reduced MAE ratio is undefined")]
    DegenerateBaseline,

    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

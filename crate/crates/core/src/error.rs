use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A subset that must be nonempty was empty.
    EmptySubset,
    /// A subset index points outside `[0, n)`.
    SubsetIndexOutOfRange { index: usize, n: usize },
    /// Fewer than two classes.
    TooFewClasses { classes: usize },
    /// A log needs at least one example.
    NoExamples,
    NoCheckpoints,
    TooFewCheckpoints { needed: usize, available: usize },
    EpochsNotIncreasing,
    LabelOutOfRange { index: usize, label: u32, classes: usize },
    LengthMismatch { what: &'static str, expected: usize, actual: usize },
    RowSum { checkpoint: usize, row: usize, sum: f64 },
    EntryOutOfRange { checkpoint: usize, row: usize, class: usize, value: f32 },
    CheckpointOutOfRange { index: usize, len: usize },
    UnknownEpoch(u64),
    ShapeMismatch { expected: (usize, usize), actual: (usize, usize) },
    EpsilonOutOfRange(f64),
    InvalidGrid(String),
    CountOutOfRange { k: usize, len: usize },
    InstanceTooLarge { checkpoints: usize, examples: usize },
    MissingCleanLabels,
    EmptyPredictions,
    InvalidPlan(String),
    InvalidSpec(String),
    /// The backing store failed to produce a checkpoint.
    Storage { checkpoint: usize, message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptySubset => write!(f, "subset is empty"),
            Error::SubsetIndexOutOfRange { index, n } => {
                write!(f, "subset index {index} out of range for {n} examples")
            }
            Error::TooFewClasses { classes } => write!(f, "need at least 2 classes, got {classes}"),
            Error::NoExamples => write!(f, "log has no examples"),
            Error::NoCheckpoints => write!(f, "log has no checkpoints"),
            Error::TooFewCheckpoints { needed, available } => {
                write!(f, "need at least {needed} checkpoints, log has {available}")
            }
            Error::EpochsNotIncreasing => write!(f, "epochs not strictly increasing"),
            Error::LabelOutOfRange { index, label, classes } => {
                write!(f, "label {label} at example {index} out of range for {classes} classes")
            }
            Error::LengthMismatch { what, expected, actual } => {
                write!(f, "{what}: expected length {expected}, got {actual}")
            }
            Error::RowSum { checkpoint, row, sum } => write!(
                f,
                "checkpoint {checkpoint} row {row}: probabilities sum to {sum}, outside tolerance"
            ),
            Error::EntryOutOfRange { checkpoint, row, class, value } => write!(
                f,
                "checkpoint {checkpoint} row {row} class {class}: probability {value} outside [0, 1]"
            ),
            Error::CheckpointOutOfRange { index, len } => {
                write!(f, "checkpoint index {index} out of range ({len} checkpoints)")
            }
            Error::UnknownEpoch(epoch) => write!(f, "epoch {epoch} is not stored in this log"),
            Error::ShapeMismatch { expected, actual } => write!(
                f,
                "shape mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, actual.0, actual.1
            ),
            Error::EpsilonOutOfRange(eps) => write!(f, "epsilon {eps} outside [0, 1]"),
            Error::InvalidGrid(msg) => write!(f, "invalid epsilon grid: {msg}"),
            Error::CountOutOfRange { k, len } => {
                write!(f, "checkpoint count {k} outside [1, {len}]")
            }
            Error::InstanceTooLarge { checkpoints, examples } => write!(
                f,
                "instance too large for exhaustive search ({checkpoints} checkpoints, {examples} examples)"
            ),
            Error::MissingCleanLabels => write!(f, "log has no clean labels"),
            Error::EmptyPredictions => write!(f, "prediction arrays are empty"),
            Error::InvalidPlan(msg) => write!(f, "invalid fusion plan: {msg}"),
            Error::InvalidSpec(msg) => write!(f, "invalid trajectory spec: {msg}"),
            Error::Storage { checkpoint, message } => {
                write!(f, "failed to read checkpoint {checkpoint}: {message}")
            }
        }
    }
}

impl core::error::Error for Error {}

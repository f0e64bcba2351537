use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate batch: batch normalization needs at least 2 rows, got {0}")]
    DegenerateBatch(usize),
    #[error("empty time axis")]
    EmptyTimeAxis,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-scalar root: backward needs a single-element node, got shape {0:?}")]
    NonScalarRoot(alloc::vec::Vec<usize>),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("non-identifiable fit: {0}")]
    NonIdentifiable(String),
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("state corruption: notch index {index} not in [1, {states}]")]
    StateCorruption { index: usize, states: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("noise sweep needs sigma = 0 in the grid as the normalization anchor")]
    MissingAnchor,
}

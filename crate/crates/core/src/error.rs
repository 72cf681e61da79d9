use core::fmt;

/// Errors raised by the detection pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An echogram failed validation on construction.
    InvalidEchogram(&'static str),
    /// A bounding box has zero extent or does not fit its image.
    InvalidBox,
    /// A configuration or call parameter is out of its valid range.
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    /// Two grids, masks or batches that must agree in shape do not.
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// An operation that needs at least one element was given none.
    Empty(&'static str),
    /// Training data contains only one class.
    SingleClass,
    /// A non-finite value was found where finite values are required.
    NonFinite(&'static str),
    /// Requested channel index does not exist.
    UnknownChannel(usize),
    /// The synthetic generator could not place a target without overlap.
    Placement { attempts: u32 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidEchogram(why) => write!(f, "invalid echogram: {why}"),
            Error::InvalidBox => f.write_str("invalid bounding box"),
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what} shape mismatch: expected {expected}, found {found}"),
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::SingleClass => f.write_str("training data must contain both classes"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::UnknownChannel(c) => write!(f, "unknown channel {c}"),
            Error::Placement { attempts } => {
                write!(f, "could not place target after {attempts} attempts")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}

//! Error type shared by every module of the crate.

use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A quaternion whose norm deviates from one by more than the tolerance.
    NonUnitQuaternion {
        norm: f64,
    },
    /// A matrix/translation pair that is not a proper rigid motion.
    NotRigid(String),
    EmptyCloud,
    NonPositiveRadius(f64),
    EmptyPatch,
    PatchTooSmall {
        len: usize,
    },
    /// The two smallest covariance eigenvalues coincide, so the normal is ambiguous.
    DegenerateEigen,
    /// The weighted tangent sum vanished, so the in-plane axis is undefined.
    DegenerateLrf,
    ShapeMismatch(String),
    EmptyAxis,
    DuplicateParameter(String),
    UnknownParameter(String),
    NoGradient,
    NonDeterministicGraph {
        max_abs_diff: f64,
    },
    TooFewPoints {
        requested: usize,
        available: usize,
    },
    NoOverlap,
    NonFiniteLoss {
        iteration: usize,
    },
    InvalidConfig(String),
    DimensionMismatch {
        left: usize,
        right: usize,
    },
    DegenerateConfiguration,
    TooFewMatches {
        len: usize,
    },
    AllSamplesDegenerate,
    EmptyDataset,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonUnitQuaternion { norm } => write!(f, "quaternion norm {norm} is not 1"),
            Error::NotRigid(why) => write!(f, "not a rigid transform: {why}"),
            Error::EmptyCloud => f.write_str("point cloud is empty"),
            Error::NonPositiveRadius(r) => write!(f, "radius {r} must be non-negative and finite"),
            Error::EmptyPatch => f.write_str("no points within the patch radius"),
            Error::PatchTooSmall { len } => {
                write!(f, "patch has {len} points, at least 3 are needed for a reference frame")
            }
            Error::DegenerateEigen => f.write_str("smallest covariance eigenvalue is not unique"),
            Error::DegenerateLrf => f.write_str("tangent axis is undefined for this patch"),
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            Error::EmptyAxis => f.write_str("cannot pool over an empty axis"),
            Error::DuplicateParameter(name) => write!(f, "parameter `{name}` already exists"),
            Error::UnknownParameter(name) => write!(f, "no parameter named `{name}`"),
            Error::NoGradient => f.write_str("optimiser step without any accumulated gradient"),
            Error::NonDeterministicGraph { max_abs_diff } => {
                write!(f, "two forward passes differ by up to {max_abs_diff}")
            }
            Error::TooFewPoints { requested, available } => {
                write!(f, "requested {requested} points but only {available} are available")
            }
            Error::NoOverlap => f.write_str("the two clouds have no corresponding points"),
            Error::NonFiniteLoss { iteration } => write!(f, "loss is not finite at iteration {iteration}"),
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            Error::DimensionMismatch { left, right } => {
                write!(f, "descriptor dimensions differ: {left} vs {right}")
            }
            Error::DegenerateConfiguration => f.write_str("paired points are collinear"),
            Error::TooFewMatches { len } => write!(f, "{len} matches, at least 3 are required"),
            Error::AllSamplesDegenerate => f.write_str("every RANSAC sample was degenerate"),
            Error::EmptyDataset => f.write_str("dataset contains no pairs"),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonUnitQuaternion { .. } => "NonUnitQuaternion",
            Error::NotRigid(_) => "NotRigid",
            Error::EmptyCloud => "EmptyCloud",
            Error::NonPositiveRadius(_) => "NonPositiveRadius",
            Error::EmptyPatch => "EmptyPatch",
            Error::PatchTooSmall { .. } => "PatchTooSmall",
            Error::DegenerateEigen => "DegenerateEigen",
            Error::DegenerateLrf => "DegenerateLrf",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::EmptyAxis => "EmptyAxis",
            Error::DuplicateParameter(_) => "DuplicateParameter",
            Error::UnknownParameter(_) => "UnknownParameter",
            Error::NoGradient => "NoGradient",
            Error::NonDeterministicGraph { .. } => "NonDeterministicGraph",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::NoOverlap => "NoOverlap",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DegenerateConfiguration => "DegenerateConfiguration",
            Error::TooFewMatches { .. } => "TooFewMatches",
            Error::AllSamplesDegenerate => "AllSamplesDegenerate",
            Error::EmptyDataset => "EmptyDataset",
        }
    }
}

//! Learned local descriptors for rigid point-cloud registration.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`lrf`]: extract a spherical patch around a keypoint, estimate its local
//!    reference frame and express the patch in that frame at unit radius.
//! 2. [`encoder`]: a quaternion refinement network followed by a hierarchy of
//!    set-abstraction layers maps the canonical patch to a unit-norm descriptor.
//!    It runs on the small reverse-mode engine in [`tensor`].
//! 3. [`training`]: Siamese training with a hardest-contrastive objective and
//!    spherical exclusion of negatives.
//! 4. [`registration`] and [`evaluation`]: mutual nearest-neighbour matching,
//!    RANSAC over Kabsch fits, and the feature-matching recall / RTE / RRE
//!    metrics.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration,
//! synthetic scenes and the command line live in the `gedi` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod linalg;
pub mod lrf;
pub mod registration;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use geometry::{Mat3, Point3, PointCloud, RigidTransform, UnitQuaternion, Vec3};

//! Spatial perception from retroreflective markers seen as corneal glints.
//!
//! An outward-pointing IR illuminator lights up constellations of
//! retroreflective patches ("markers") placed in the environment. An inward
//! eye camera sees their reflections as compact bright glints on the cornea.
//! This crate turns those glints back into marker identity, orientation and
//! distance:
//!
//! 1. [`detect`] finds the pupil and the glints in a raw frame, refines glint
//!    centers to sub-pixel accuracy and groups them into clusters.
//! 2. [`matching`] picks the cluster the user is looking at, puts its glints
//!    in a canonical order and searches the marker library for the pattern
//!    that reprojects onto them.
//! 3. [`geometry`] solves the planar pose (rotation + translation) of the
//!    matched marker from the 2D-2D correspondences.
//! 4. [`track`] carries an identified marker across frames with pyramidal
//!    optical flow so the full search only runs when tracking breaks.
//! 5. [`calib`] fits the small per-user corrections (gaze offset, distance
//!    scale, pitch offsets) that the corneal geometry introduces.
//! 6. [`sim`] is a synthetic image-formation model (pinhole or spherical
//!    corneal mirror) used as the ground-truth oracle for all of the above.
//!
//! [`pipeline`] wires stages 1-4 into a per-frame state machine and
//! [`report`] aggregates per-frame results into run-level metrics.

pub mod calib;
pub mod dataset;
pub mod detect;
pub mod geometry;
pub mod markers;
pub mod matching;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod track;

// pub use geometry::{CameraModel, EulerAngles, PlanarCorrespondence, PlanarPose};
// pub use markers::{MarkerLibrary, MarkerPattern, Patch};

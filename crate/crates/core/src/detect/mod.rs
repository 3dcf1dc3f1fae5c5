//! Frame-level detection: pupil, glints, clusters.
//!
//! The per-frame pipeline is: [`localize_pupil`] -> blink gating
//! ([`BlinkGate`]) -> [`detect_blobs`] inside the pupil ROI ->
//! [`refine_centers`] -> [`cluster_glints`] -> [`select_gazed_cluster`].

mod blink;
mod blob;
mod cluster;
mod frame;
mod pupil;
mod refine;

pub use blink::BlinkGate;
pub use blob::{detect_blobs, BlobConfig};
pub use cluster::{
    cluster_glints, score_triangle_detectability, select_gazed_cluster, ClusterConfig,
    GlintCluster,
};
pub use frame::{GrayFrame, Roi};
pub use pupil::{localize_pupil, pupil_roi, PupilConfig, PupilObservation};
pub use refine::refine_centers;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectError {
    /// No dark component above the minimum area.
    #[error("no pupil candidate found")]
    NoPupilFound,
    /// Cluster selection ran with an empty cluster list.
    #[error("no glint clusters to select from")]
    NoClusters,
    #[error("frame io failed: {0}")]
    FrameIo(String),
}

/// A detected glint candidate.
///
/// `center` is in full-frame pixel coordinates: integer-valued straight out
/// of [`detect_blobs`], sub-pixel after [`refine_centers`] (which also sets
/// `refined`). `mean_intensity_r4` is the mean intensity inside a 4 px
/// radius and is what anchor identification compares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Glint {
    pub center: (f64, f64),
    pub peak_intensity: f64,
    pub mean_intensity_r4: f64,
    /// Gaussian scale (sigma, px) of the strongest DoG response.
    pub scale: f64,
    #[serde(default)]
    pub refined: bool,
    /// DoG contrast at detection; detection output is sorted by this,
    /// descending. Zero for glints built from simulator streams.
    #[serde(default)]
    pub response: f64,
}

impl Glint {
    /// A bare glint at a known position, as emitted by simulator streams.
    pub fn synthetic(center: (f64, f64), intensity: f64) -> Self {
        Glint {
            center,
            peak_intensity: intensity,
            mean_intensity_r4: intensity,
            scale: 1.2,
            refined: true,
            response: 0.0,
        }
    }
}

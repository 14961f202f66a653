//! Online multi-object tracking by detection with a continuous CRF over
//! object displacements.
//!
//! Each frame, every live tracklet gets a displacement estimate from a
//! [`estimators::DisplacementProvider`]. Those estimates are refined jointly
//! by mean-field inference in [`crf`], where objects exchange directional
//! messages that keep speed differences stable, with small and confident
//! objects pulling harder than large or uncertain ones. The refined
//! predictions are matched to detections ([`association`]) and the
//! [`tracker`] handles initialisation, occlusion and termination. [`mot`]
//! reads and writes MOT-challenge files and generates synthetic sequences;
//! [`metrics`] scores output with the CLEAR MOT metrics.

pub mod association;
pub mod config;
pub mod crf;
pub mod estimators;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod mot;
pub mod track;
pub mod tracker;

pub use geometry::{iou, BoundingBox, Displacement, GeometryError};
pub use track::{Detection, HistoryEntry, LabeledBox, LabeledFrames, Provenance, TrackStatus, Tracklet};

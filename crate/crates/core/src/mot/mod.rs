//! MOT-challenge CSV files and synthetic sequences.
//!
//! Every line is `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`.
//! Detections carry id −1; ground truth and tracks carry positive ids.
//! Fields past the seventh are optional and ignored.

mod io;
mod synthetic;

pub use io::{
    read_detections, read_ground_truth, read_labeled, sequence_name, write_detections, write_labeled,
    write_tracks, MotError, SequenceBundle,
};
pub use synthetic::{generate_scenario, ObjectTrajectory, SyntheticScenario, Turn};

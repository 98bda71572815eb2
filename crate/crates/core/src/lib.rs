//! Matching-based crisp edge supervision.
//!
//! The crate builds one-to-one supervision labels for edge detectors by
//! matching predicted edge pixels to ground-truth edge pixels, computes the
//! matching BCE loss, and ships the classic NMS + thinning baseline together
//! with an ODS / OIS / AP / AC evaluation stack.

pub mod bench;
pub mod error;
pub mod io;
pub mod loss;
pub mod matching;
pub mod metrics;
pub mod postprocess;
pub mod raster;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use loss::{bce_matched, total_loss, LossConfig, LossValue};
pub use matching::{
    build_candidates, build_matched_label, generate_supervision, solve_assignment, CandidateEdge,
    MatchConfig, MatchResult, MatchedLabel,
};
pub use metrics::{
    average_crispness, correspond, evaluate, pr_curve, summarize, CorrespondenceCounts,
    DistanceMode, EvalConfig, EvalReport, PrCurve, Protocol,
};
pub use postprocess::{nms, standard_postprocess, thin, NmsConfig};
pub use raster::{
    box_blur5, manhattan, threshold, tile, BinaryMap, ConfidenceMap, PixelCoord, TileLayout,
};

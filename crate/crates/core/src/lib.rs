//! Correspondence filtering for 2D feature-point matching.
//!
//! The crate builds an affine-invariant descriptor over matched vertex
//! sets — for every directed vertex pair, the side each remaining vertex
//! falls on — and filters outliers by iteratively removing the vertices
//! whose descriptors disagree the most between the two images (`vtm`).
//! A recovery variant (`rfvtm`) re-admits removed candidates that keep
//! the descriptors identical and respect the residual error bound, which
//! restores inliers lost to outlier-dominated iterations. A seeded
//! RANSAC baseline, a synthetic scene generator with ground truth, and a
//! Monte-Carlo evaluation harness round out the toolkit.
//!
//! # Quick start
//! ```
//! use vtm_core::{generate_scene, rfvtm, classify, metrics, RfvtmConfig, SceneConfig};
//!
//! let cfg = SceneConfig {
//!     n_inliers: 40,
//!     outlier_ratio: 0.4,
//!     rotation_deg: 60.0,
//!     scale: 1.5,
//!     noise_sigma: 0.5,
//!     seed: 7,
//!     ..SceneConfig::default()
//! };
//! let (corr, truth) = generate_scene(&cfg).unwrap();
//! let result = rfvtm(&corr, &RfvtmConfig::default()).unwrap();
//! let counts = classify(&result, &truth).unwrap();
//! let m = metrics(&counts);
//! assert!(m.pre.unwrap() > 0.9);
//! ```

pub mod descriptor;
pub mod eval;
pub mod geometry;
pub mod oracle;
pub mod ransac;
pub mod rfvtm;
pub mod synth;
pub mod vtm;

mod seeding;

#[cfg(test)]
pub(crate) mod fixtures;

pub use descriptor::{build_state, DescriptorConfig, DescriptorError, TrichotomyState};
pub use eval::{
    classify, metrics, sweep, write_report_csv, Algorithm, ConfusionCounts, EvalError, Metrics,
    SweepRow, SweepSpec, GROUND_TRUTH_RADIUS_PX,
};
pub use geometry::{
    auto_eps, estimate_affine_lsm, individual_error, orient, orient_det, rms_error,
    AffineTransform, CorrespondenceSet, GeometryError, Orientation, Point2, VertexId,
};
pub use ransac::{ransac_affine, RansacConfig};
pub use rfvtm::{recover_candidates, rfvtm, RfvtmConfig};
pub use seeding::derive as derive_seed;
pub use synth::{
    generate_scene, outlier_count, transform_from_factors, GroundTruth, SceneConfig,
    SceneDocument, SynthError,
};
pub use vtm::{
    vtm, vtm_subdivided, DescriptorOptions, FilterError, FilterResult, RecoveredCandidate,
    Termination, TraceEvent, TraceRecord, VtmConfig,
};

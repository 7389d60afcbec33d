//! Seeded RANSAC baseline fitting an affine model to correspondences.
//!
//! Minimal three-pair samples are drawn from per-iteration RNG streams,
//! so the run is deterministic for a fixed seed no matter how iterations
//! are scheduled. The consensus set of the best sample model is refit by
//! least squares and the final residual set is re-scored under the refit
//! model.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    affine_from_three, estimate_affine_lsm, AffineTransform, CorrespondenceSet, VertexId,
};
use crate::seeding;
use crate::vtm::{subset_by_ids, FilterError, FilterResult, Termination, TraceEvent, TraceRecord};

/// RANSAC controls. Defaults: 2px inlier radius (matching the
/// ground-truth correctness rule), 0.99 confidence for the adaptive
/// iteration bound, at most 10000 iterations.
#[derive(Debug, Clone)]
pub struct RansacConfig {
    pub max_iterations: u32,
    /// Residual distance (pixels, not squared) for consensus membership.
    pub inlier_threshold: f64,
    /// Confidence target for the adaptive early exit, in `(0, 1)`.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            inlier_threshold: 2.0,
            confidence: 0.99,
            seed: 0,
        }
    }
}

impl RansacConfig {
    fn validate(&self) -> Result<(), FilterError> {
        if self.max_iterations < 1 {
            return Err(FilterError::InvalidConfig(
                "max_iterations must be at least 1",
            ));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(FilterError::InvalidConfig(
                "inlier_threshold must be positive",
            ));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(FilterError::InvalidConfig(
                "confidence must lie in (0, 1)",
            ));
        }
        Ok(())
    }
}

fn consensus(corr: &CorrespondenceSet, model: &AffineTransform, threshold: f64) -> Vec<usize> {
    let t2 = threshold * threshold;
    (0..corr.len())
        .filter(|&i| {
            let (r, s) = corr.pair(i);
            model.apply(r).squared_distance(&s) <= t2
        })
        .collect()
}

/// Number of iterations needed to draw one all-inlier triple with the
/// requested confidence, given the observed inlier ratio.
fn adaptive_iteration_bound(confidence: f64, inlier_ratio: f64, cap: u32) -> u32 {
    if inlier_ratio >= 1.0 {
        return 1;
    }
    let p_good = inlier_ratio.powi(3);
    if p_good <= 0.0 {
        return cap;
    }
    let denom = (1.0 - p_good).ln();
    if denom == 0.0 {
        return 1;
    }
    let needed = ((1.0 - confidence).ln() / denom).ceil();
    if needed.is_finite() && needed < cap as f64 {
        (needed as u32).max(1)
    } else {
        cap
    }
}

/// Robust affine fit: samples non-collinear triples, scores by consensus
/// size, refits the best consensus by least squares, and returns the
/// partition into consensus (`residual`) and rejected (`deleted`) pairs
/// with the final model attached.
pub fn ransac_affine(
    corr: &CorrespondenceSet,
    cfg: &RansacConfig,
) -> Result<FilterResult, FilterError> {
    cfg.validate()?;
    let n = corr.len();
    if n < 3 {
        return Err(FilterError::Geometry(
            crate::geometry::GeometryError::DegenerateInput("need at least 3 correspondences"),
        ));
    }

    let mut best_model: Option<AffineTransform> = None;
    let mut best_inliers: Vec<usize> = Vec::new();
    let mut best_iteration = 0u32;
    let mut bound = cfg.max_iterations;
    let mut iterations_run = 0u32;

    for iteration in 0..cfg.max_iterations {
        if iteration >= bound {
            break;
        }
        iterations_run = iteration + 1;
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeding::derive(cfg.seed, &[iteration as u64]));
        let sample = sample_distinct_triple(&mut rng, n);
        let pairs = [
            corr.pair(sample[0]),
            corr.pair(sample[1]),
            corr.pair(sample[2]),
        ];
        let Some(model) = affine_from_three(pairs) else {
            continue; // collinear sample
        };
        let inliers = consensus(corr, &model, cfg.inlier_threshold);
        if inliers.len() > best_inliers.len() {
            best_inliers = inliers;
            best_model = Some(model);
            best_iteration = iteration;
            let ratio = best_inliers.len() as f64 / n as f64;
            bound = adaptive_iteration_bound(cfg.confidence, ratio, cfg.max_iterations);
        }
    }

    let Some(sample_model) = best_model else {
        return Err(FilterError::Geometry(
            crate::geometry::GeometryError::DegenerateInput(
                "no non-collinear sample found within the iteration budget",
            ),
        ));
    };

    // Refit on the best consensus, then re-score so the reported
    // residual set is consistent with the returned model.
    let consensus_set = corr.subset(&best_inliers);
    let model = estimate_affine_lsm(&consensus_set).unwrap_or(sample_model);
    let final_inliers = consensus(corr, &model, cfg.inlier_threshold);
    let residual = corr.subset(&final_inliers);
    let residual_ids: std::collections::HashSet<VertexId> =
        residual.ids().iter().copied().collect();
    let deleted_ids: Vec<VertexId> = corr
        .ids()
        .iter()
        .copied()
        .filter(|id| !residual_ids.contains(id))
        .collect();
    let rms = crate::geometry::rms_error(&residual, &model).ok();

    let trace = vec![TraceRecord {
        outer: 1,
        event: TraceEvent::Note {
            message: format!(
                "ransac: {} iterations, best sample at iteration {}, consensus {} of {}",
                iterations_run,
                best_iteration,
                residual.len(),
                n
            ),
        },
    }];

    Ok(FilterResult {
        residual,
        deleted: subset_by_ids(corr, &deleted_ids),
        recovered: CorrespondenceSet::from_pairs(std::iter::empty()),
        trace,
        termination: Termination::Converged,
        orientation_evals: 0,
        model: Some(model),
        rms,
    })
}

fn sample_distinct_triple(rng: &mut ChaCha8Rng, n: usize) -> [usize; 3] {
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n);
    while b == a {
        b = rng.gen_range(0..n);
    }
    let mut c = rng.gen_range(0..n);
    while c == a || c == b {
        c = rng.gen_range(0..n);
    }
    [a, b, c]
}

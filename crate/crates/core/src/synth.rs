//! Synthetic correspondence scenes with known ground truth.
//!
//! Reference inliers are drawn uniformly over a pixel field, mapped by a
//! configurable affine transform, and perturbed by isotropic Gaussian
//! noise; outliers are unrelated uniform point pairs mixed in at a
//! target ratio. Everything is seeded, so a config reproduces its scene
//! bit for bit.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AffineTransform, CorrespondenceSet, Point2};

/// Scene recipe. The linear part composes as shear ∘ rotation ∘ scale
/// (scale applied first); `reflect` additionally mirrors the reference
/// x-axis before scaling, which is the only way to obtain a
/// negative-determinant scene.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub n_inliers: u32,
    /// Fraction of the final scene that is outliers, in `[0, 1)`.
    pub outlier_ratio: f64,
    pub field_width: f64,
    pub field_height: f64,
    pub rotation_deg: f64,
    pub scale: f64,
    pub shear_h: f64,
    pub shear_v: f64,
    pub translation: (f64, f64),
    /// Isotropic Gaussian noise (pixels) added per coordinate to sensed
    /// inliers.
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub reflect: bool,
    /// Minimum pairwise separation of generated reference points in
    /// pixels; 0 disables the check.
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
}

fn default_min_separation() -> f64 {
    1.0
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_inliers: 100,
            outlier_ratio: 0.0,
            field_width: 512.0,
            field_height: 512.0,
            rotation_deg: 0.0,
            scale: 1.0,
            shear_h: 0.0,
            shear_v: 0.0,
            translation: (0.0, 0.0),
            noise_sigma: 0.0,
            seed: 0,
            reflect: false,
            min_separation: default_min_separation(),
        }
    }
}

/// Per-scene truth: the generating transform and the provenance label of
/// every correspondence (`true` = generated as an inlier).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub transform: AffineTransform,
    pub labels: Vec<bool>,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid scene document: {0}")]
    Document(String),
}

/// Composes an affine transform from deformation factors: uniform scale,
/// then rotation, then the shear matrix `[[1, h], [v, 1]]`, plus a
/// translation.
pub fn transform_from_factors(
    rotation_deg: f64,
    scale: f64,
    shear_h: f64,
    shear_v: f64,
    translation: (f64, f64),
) -> Result<AffineTransform, SynthError> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(SynthError::InvalidConfig("scale must be positive"));
    }
    if ![rotation_deg, shear_h, shear_v, translation.0, translation.1]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(SynthError::InvalidConfig(
            "transform factors must be finite",
        ));
    }
    let r = rotation_deg.to_radians();
    let (sin, cos) = r.sin_cos();
    // H * R * S with H = [[1, h], [v, 1]], R the rotation, S = scale*I.
    let (r11, r12, r21, r22) = (cos, -sin, sin, cos);
    let a11 = scale * (r11 + shear_h * r21);
    let a12 = scale * (r12 + shear_h * r22);
    let a21 = scale * (shear_v * r11 + r21);
    let a22 = scale * (shear_v * r12 + r22);
    Ok(AffineTransform::new(
        a11,
        a12,
        a21,
        a22,
        translation.0,
        translation.1,
    ))
}

/// Outlier count implied by the config: the ratio is measured against
/// the final scene size, so `round(ratio / (1 - ratio) * n_inliers)`.
pub fn outlier_count(cfg: &SceneConfig) -> u32 {
    (cfg.outlier_ratio / (1.0 - cfg.outlier_ratio) * cfg.n_inliers as f64).round() as u32
}

fn validate(cfg: &SceneConfig) -> Result<(), SynthError> {
    if !(cfg.outlier_ratio >= 0.0 && cfg.outlier_ratio < 1.0) {
        return Err(SynthError::InvalidConfig(
            "outlier_ratio must lie in [0, 1)",
        ));
    }
    if !(cfg.field_width > 0.0) || !(cfg.field_height > 0.0) {
        return Err(SynthError::InvalidConfig(
            "field dimensions must be positive",
        ));
    }
    if !(cfg.noise_sigma >= 0.0) {
        return Err(SynthError::InvalidConfig("noise_sigma must be >= 0"));
    }
    if !(cfg.min_separation >= 0.0) {
        return Err(SynthError::InvalidConfig("min_separation must be >= 0"));
    }
    Ok(())
}

/// Generates a scene: reference inliers uniform over the field, sensed
/// inliers as their transformed and noise-perturbed images, plus
/// unrelated uniform outlier pairs (reference side in the field, sensed
/// side in the bounding box of the transformed field). The combined list
/// is shuffled; ids are positional after the shuffle.
///
/// Outliers are not rejected for accidental consistency with the
/// transform; the measurement-based correctness rule downstream is the
/// authoritative classifier.
pub fn generate_scene(cfg: &SceneConfig) -> Result<(CorrespondenceSet, GroundTruth), SynthError> {
    validate(cfg)?;
    let base = transform_from_factors(
        cfg.rotation_deg,
        cfg.scale,
        cfg.shear_h,
        cfg.shear_v,
        cfg.translation,
    )?;
    let transform = if cfg.reflect {
        // Mirror the reference x-axis ahead of the factor chain.
        AffineTransform::new(
            -base.a11, base.a12, -base.a21, base.a22, base.tx, base.ty,
        )
    } else {
        base
    };
    if !cfg.reflect && transform.determinant() <= 0.0 {
        return Err(SynthError::InvalidConfig(
            "factors yield a non-positive determinant; use `reflect` for mirrored scenes",
        ));
    }

    let n_in = cfg.n_inliers as usize;
    let n_out = outlier_count(cfg) as usize;
    let total = n_in + n_out;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // All reference points honor the pairwise separation floor.
    let refs = sample_separated(&mut rng, total, cfg)?;

    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).expect("sigma validated"))
    } else {
        None
    };
    let mut entries: Vec<(Point2, Point2, bool)> = Vec::with_capacity(total);
    for &r in refs.iter().take(n_in) {
        let mut s = transform.apply(r);
        if let Some(n) = &noise {
            s.x += n.sample(&mut rng);
            s.y += n.sample(&mut rng);
        }
        entries.push((r, s, true));
    }

    let sensed_box = transformed_field_bbox(cfg, &transform);
    for &r in refs.iter().skip(n_in) {
        let s = Point2::new(
            rng.gen_range(sensed_box.0..sensed_box.1),
            rng.gen_range(sensed_box.2..sensed_box.3),
        );
        entries.push((r, s, false));
    }

    entries.shuffle(&mut rng);
    let labels = entries.iter().map(|&(_, _, l)| l).collect();
    let corr = CorrespondenceSet::from_pairs(entries.into_iter().map(|(r, s, _)| (r, s)));
    Ok((corr, GroundTruth { transform, labels }))
}

fn sample_separated(
    rng: &mut ChaCha8Rng,
    total: usize,
    cfg: &SceneConfig,
) -> Result<Vec<Point2>, SynthError> {
    let min_sq = cfg.min_separation * cfg.min_separation;
    let mut points: Vec<Point2> = Vec::with_capacity(total);
    let max_attempts = 1000usize.saturating_mul(total.max(1));
    let mut attempts = 0usize;
    while points.len() < total {
        if attempts >= max_attempts {
            return Err(SynthError::InvalidConfig(
                "field too dense for the configured minimum separation",
            ));
        }
        attempts += 1;
        let candidate = Point2::new(
            rng.gen_range(0.0..cfg.field_width),
            rng.gen_range(0.0..cfg.field_height),
        );
        if min_sq > 0.0
            && points
                .iter()
                .any(|p| p.squared_distance(&candidate) < min_sq)
        {
            continue;
        }
        points.push(candidate);
    }
    Ok(points)
}

/// Axis-aligned bounds `(min_x, max_x, min_y, max_y)` of the transformed
/// field corners; sensed outliers are drawn from here so they mix with
/// the transformed inliers.
fn transformed_field_bbox(cfg: &SceneConfig, t: &AffineTransform) -> (f64, f64, f64, f64) {
    let corners = [
        Point2::new(0.0, 0.0),
        Point2::new(cfg.field_width, 0.0),
        Point2::new(0.0, cfg.field_height),
        Point2::new(cfg.field_width, cfg.field_height),
    ];
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for c in corners {
        let p = t.apply(c);
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    (min_x, max_x, min_y, max_y)
}

/// On-disk scene document; canonical field order `config`, `points`
/// (rows `[x, y, x', y']`), `transform`, `labels`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneDocument {
    pub config: SceneConfig,
    pub points: Vec<[f64; 4]>,
    pub transform: AffineTransform,
    pub labels: Vec<bool>,
}

impl SceneDocument {
    pub fn new(config: SceneConfig, corr: &CorrespondenceSet, truth: &GroundTruth) -> Self {
        let points = corr
            .iter()
            .map(|(_, r, s)| [r.x, r.y, s.x, s.y])
            .collect();
        Self {
            config,
            points,
            transform: truth.transform,
            labels: truth.labels.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let doc: SceneDocument =
            serde_json::from_str(text).map_err(|e| SynthError::Document(e.to_string()))?;
        if doc.labels.len() != doc.points.len() {
            return Err(SynthError::Document(format!(
                "{} labels for {} points",
                doc.labels.len(),
                doc.points.len()
            )));
        }
        if doc
            .points
            .iter()
            .any(|row| row.iter().any(|v| !v.is_finite()))
        {
            return Err(SynthError::Document("non-finite coordinate".into()));
        }
        Ok(doc)
    }

    /// Correspondences with positional ids, matching the label order.
    pub fn correspondences(&self) -> CorrespondenceSet {
        CorrespondenceSet::from_pairs(
            self.points
                .iter()
                .map(|&[x, y, xs, ys]| (Point2::new(x, y), Point2::new(xs, ys))),
        )
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            transform: self.transform,
            labels: self.labels.clone(),
        }
    }
}

//! Planar geometry primitives: points, affine transforms, the orientation
//! predicate, least-squares affine estimation, and transformation-error
//! measures over matched point pairs.
//!
//! Everything here is a pure function over immutable inputs and safe to
//! call from any number of threads.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Stable identifier of a correspondence (a matched point pair).
pub type VertexId = u64;

/// Errors from geometric estimation and error measures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    /// Too few correspondences or a rank-deficient design matrix.
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    /// An operation that needs at least one correspondence got none.
    #[error("empty correspondence set")]
    EmptySet,
    /// Parallel arrays passed to a constructor have different lengths.
    #[error("reference, sensed and id lists must have equal lengths")]
    LengthMismatch,
    /// A vertex id occurs more than once.
    #[error("duplicate vertex id {0}")]
    DuplicateId(VertexId),
    /// A coordinate or transform parameter is NaN or infinite.
    #[error("non-finite coordinate or parameter")]
    NonFinite,
}

/// A 2D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Squared Euclidean distance to `other`, in pixels².
    pub fn squared_distance(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// A planar affine transform: 2×2 linear part plus translation.
///
/// Serializes as the flat array `[a11, a12, a21, a22, tx, ty]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub tx: f64,
    pub ty: f64,
}

impl AffineTransform {
    pub const IDENTITY: Self = Self {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64, tx: f64, ty: f64) -> Self {
        Self {
            a11,
            a12,
            a21,
            a22,
            tx,
            ty,
        }
    }

    /// Determinant of the linear part.
    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// Transforms degenerate when `|det| <= 1e-12`.
    pub fn is_degenerate(&self) -> bool {
        self.determinant().abs() <= 1e-12
    }

    pub fn is_finite(&self) -> bool {
        [self.a11, self.a12, self.a21, self.a22, self.tx, self.ty]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Applies the transform to a point.
    pub fn apply(&self, p: Point2) -> Point2 {
        Point2::new(
            self.a11 * p.x + self.a12 * p.y + self.tx,
            self.a21 * p.x + self.a22 * p.y + self.ty,
        )
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.a11, self.a12, self.a21, self.a22, self.tx, self.ty]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }
}

impl Serialize for AffineTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.as_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AffineTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = <[f64; 6]>::deserialize(deserializer)?;
        let t = Self::from_array(v);
        if !t.is_finite() {
            return Err(D::Error::custom("non-finite affine parameters"));
        }
        Ok(t)
    }
}

/// One-to-one matched point lists: `reference[i]` corresponds to
/// `sensed[i]`, tagged with a stable id.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    reference: Vec<Point2>,
    sensed: Vec<Point2>,
    ids: Vec<VertexId>,
}

impl CorrespondenceSet {
    /// Builds a set from parallel lists, validating the one-to-one
    /// invariants: equal lengths, finite coordinates, unique ids.
    pub fn new(
        reference: Vec<Point2>,
        sensed: Vec<Point2>,
        ids: Vec<VertexId>,
    ) -> Result<Self, GeometryError> {
        if reference.len() != sensed.len() || reference.len() != ids.len() {
            return Err(GeometryError::LengthMismatch);
        }
        if reference.iter().chain(sensed.iter()).any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        for &id in &ids {
            if !seen.insert(id) {
                return Err(GeometryError::DuplicateId(id));
            }
        }
        Ok(Self {
            reference,
            sensed,
            ids,
        })
    }

    /// Builds a set from `(reference, sensed)` pairs with positional ids.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Point2, Point2)>) -> Self {
        let (reference, sensed): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let ids = (0..reference.len() as u64).collect();
        Self {
            reference,
            sensed,
            ids,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn reference(&self) -> &[Point2] {
        &self.reference
    }

    pub fn sensed(&self) -> &[Point2] {
        &self.sensed
    }

    pub fn ids(&self) -> &[VertexId] {
        &self.ids
    }

    /// The `(reference, sensed)` pair at position `idx`.
    pub fn pair(&self, idx: usize) -> (Point2, Point2) {
        (self.reference[idx], self.sensed[idx])
    }

    /// Position of `id`, if present.
    pub fn index_of(&self, id: VertexId) -> Option<usize> {
        self.ids.iter().position(|&v| v == id)
    }

    /// Subset at the given positions, kept in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            reference: indices.iter().map(|&i| self.reference[i]).collect(),
            sensed: indices.iter().map(|&i| self.sensed[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, Point2, Point2)> + '_ {
        self.ids
            .iter()
            .zip(self.reference.iter().zip(self.sensed.iter()))
            .map(|(&id, (&r, &s))| (id, r, s))
    }
}

/// Side of the directed line `vi -> vj` a probe point falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Negative,
    Zero,
    Positive,
}

impl Orientation {
    pub fn sign(&self) -> i8 {
        match self {
            Orientation::Negative => -1,
            Orientation::Zero => 0,
            Orientation::Positive => 1,
        }
    }

    pub fn flipped(&self) -> Self {
        match self {
            Orientation::Negative => Orientation::Positive,
            Orientation::Zero => Orientation::Zero,
            Orientation::Positive => Orientation::Negative,
        }
    }
}

/// Signed area form of the triple `(vi, vj, vk)`: positive when `vk` lies
/// left of the directed line `vi -> vj` (counterclockwise, y-up frame).
#[inline]
pub fn orient_det(vi: Point2, vj: Point2, vk: Point2) -> f64 {
    (vj.x - vi.x) * (vk.y - vi.y) - (vj.y - vi.y) * (vk.x - vi.x)
}

/// Classifies the triple against a tolerance band: `Positive` when the
/// determinant exceeds `eps`, `Zero` when `|det| <= eps`, else `Negative`.
#[inline]
pub fn orient(vi: Point2, vj: Point2, vk: Point2, eps: f64) -> Orientation {
    debug_assert!(eps >= 0.0);
    let det = orient_det(vi, vj, vk);
    if det > eps {
        Orientation::Positive
    } else if det < -eps {
        Orientation::Negative
    } else {
        Orientation::Zero
    }
}

/// Scale-aware default orientation tolerance: `1e-9` times the squared
/// diagonal of the bounding box of all points in both images.
pub fn auto_eps(corr: &CorrespondenceSet) -> f64 {
    if corr.is_empty() {
        return 0.0;
    }
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for p in corr.reference().iter().chain(corr.sensed().iter()) {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let w = max_x - min_x;
    let h = max_y - min_y;
    1e-9 * (w * w + h * h)
}

/// Squared residual of one pair under a transform: `‖T(vk) − vk'‖²`,
/// in pixels².
#[inline]
pub fn individual_error(vk: Point2, vk_s: Point2, t: &AffineTransform) -> f64 {
    t.apply(vk).squared_distance(&vk_s)
}

/// Root-mean-square residual over a set, in pixels.
pub fn rms_error(set: &CorrespondenceSet, t: &AffineTransform) -> Result<f64, GeometryError> {
    if set.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    let sum: f64 = set
        .iter()
        .map(|(_, r, s)| individual_error(r, s, t))
        .sum();
    Ok((sum / set.len() as f64).sqrt())
}

/// Least-squares affine fit minimizing `Σ ‖T(v_k) − v_k'‖²`.
///
/// Solves the two 3-unknown normal-equation systems (one per output row)
/// independently, with partial pivoting. Needs at least 3 correspondences
/// with non-collinear reference points.
pub fn estimate_affine_lsm(set: &CorrespondenceSet) -> Result<AffineTransform, GeometryError> {
    if set.len() < 3 {
        return Err(GeometryError::DegenerateInput(
            "need at least 3 correspondences",
        ));
    }
    let (mut sxx, mut sxy, mut syy, mut sx, mut sy) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
    let (mut bx, mut by) = ([0.0f64; 3], [0.0f64; 3]);
    for (_, r, s) in set.iter() {
        sxx += r.x * r.x;
        sxy += r.x * r.y;
        syy += r.y * r.y;
        sx += r.x;
        sy += r.y;
        bx[0] += r.x * s.x;
        bx[1] += r.y * s.x;
        bx[2] += s.x;
        by[0] += r.x * s.y;
        by[1] += r.y * s.y;
        by[2] += s.y;
    }
    let n = set.len() as f64;
    let m = [[sxx, sxy, sx], [sxy, syy, sy], [sx, sy, n]];
    let row_x = solve3(m, bx).ok_or(GeometryError::DegenerateInput(
        "collinear reference points (rank-deficient normal equations)",
    ))?;
    let row_y = solve3(m, by).ok_or(GeometryError::DegenerateInput(
        "collinear reference points (rank-deficient normal equations)",
    ))?;
    Ok(AffineTransform::new(
        row_x[0], row_x[1], row_y[0], row_y[1], row_x[2], row_y[2],
    ))
}

/// Fits the exact affine interpolating three correspondences. `None` when
/// the reference triple is (near-)collinear.
pub fn affine_from_three(pairs: [(Point2, Point2); 3]) -> Option<AffineTransform> {
    let m = [
        [pairs[0].0.x, pairs[0].0.y, 1.0],
        [pairs[1].0.x, pairs[1].0.y, 1.0],
        [pairs[2].0.x, pairs[2].0.y, 1.0],
    ];
    let bx = [pairs[0].1.x, pairs[1].1.x, pairs[2].1.x];
    let by = [pairs[0].1.y, pairs[1].1.y, pairs[2].1.y];
    let row_x = solve3(m, bx)?;
    let row_y = solve3(m, by)?;
    Some(AffineTransform::new(
        row_x[0], row_x[1], row_y[0], row_y[1], row_x[2], row_y[2],
    ))
}

/// 3×3 Gaussian elimination with partial pivoting. `None` when the matrix
/// is singular relative to its own scale.
fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    let mut scale = 0.0f64;
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = a[r][c];
            scale = scale.max(a[r][c].abs());
        }
        m[r][3] = b[r];
    }
    if scale == 0.0 {
        return None;
    }
    let tiny = 1e-12 * scale;
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&r1, &r2| m[r1][col].abs().total_cmp(&m[r2][col].abs()))
            .unwrap();
        if m[pivot_row][col].abs() <= tiny {
            return None;
        }
        m.swap(col, pivot_row);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            for c in col..4 {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for r in (0..3).rev() {
        let mut acc = m[r][3];
        for c in r + 1..3 {
            acc -= m[r][c] * x[c];
        }
        x[r] = acc / m[r][r];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn orient_counterclockwise_triple_is_positive() {
        assert_eq!(orient(p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0), 0.0), Orientation::Positive);
    }

    #[test]
    fn orient_collinear_triple_is_zero() {
        assert_eq!(orient(p(0.0, 0.0), p(1.0, 1.0), p(2.0, 2.0), 0.0), Orientation::Zero);
    }

    #[test]
    fn orient_mirrored_triple_is_negative() {
        assert_eq!(orient(p(0.0, 0.0), p(1.0, 0.0), p(0.0, -1.0), 0.0), Orientation::Negative);
    }

    #[test]
    fn orient_tolerance_band_maps_small_determinants_to_zero() {
        // det = +1 here, so eps = 2 swallows the sign.
        assert_eq!(orient(p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0), 2.0), Orientation::Zero);
    }

    #[test]
    fn apply_identity_keeps_point() {
        assert_eq!(AffineTransform::IDENTITY.apply(p(3.0, 4.0)), p(3.0, 4.0));
    }

    #[test]
    fn apply_quarter_rotation() {
        let rot = AffineTransform::new(0.0, -1.0, 1.0, 0.0, 0.0, 0.0);
        assert_eq!(rot.apply(p(1.0, 0.0)), p(0.0, 1.0));
    }

    #[test]
    fn apply_horizontal_shear() {
        let shear = AffineTransform::new(1.0, 0.1, 0.0, 1.0, 0.0, 0.0);
        let out = shear.apply(p(10.0, 10.0));
        assert_abs_diff_eq!(out.x, 11.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.y, 10.0, epsilon = 1e-15);
    }

    #[test]
    fn lsm_recovers_identity_from_exact_fit() {
        let pts = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (7.0, 3.0)];
        let corr = CorrespondenceSet::from_pairs(pts.iter().map(|&(x, y)| (p(x, y), p(x, y))));
        let t = estimate_affine_lsm(&corr).unwrap();
        for (got, want) in t.as_array().iter().zip(AffineTransform::IDENTITY.as_array()) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn lsm_interpolates_three_points_under_rotation() {
        let rot = AffineTransform::new(0.0, -1.0, 1.0, 0.0, 0.0, 0.0);
        let refs = [p(0.0, 0.0), p(5.0, 1.0), p(2.0, 8.0)];
        let corr = CorrespondenceSet::from_pairs(refs.iter().map(|&r| (r, rot.apply(r))));
        let t = estimate_affine_lsm(&corr).unwrap();
        for (got, want) in t.as_array().iter().zip(rot.as_array()) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn lsm_rejects_collinear_reference_points() {
        let refs = [p(0.0, 0.0), p(1.0, 1.0), p(2.0, 2.0), p(3.0, 3.0)];
        let corr = CorrespondenceSet::from_pairs(refs.iter().map(|&r| (r, r)));
        assert!(matches!(
            estimate_affine_lsm(&corr),
            Err(GeometryError::DegenerateInput(_))
        ));
    }

    #[test]
    fn lsm_needs_three_pairs() {
        let corr = CorrespondenceSet::from_pairs([(p(0.0, 0.0), p(0.0, 0.0)), (p(1.0, 0.0), p(1.0, 0.0))]);
        assert!(matches!(
            estimate_affine_lsm(&corr),
            Err(GeometryError::DegenerateInput(_))
        ));
    }

    #[test]
    fn individual_error_exact_match_is_zero() {
        assert_eq!(individual_error(p(1.0, 1.0), p(1.0, 1.0), &AffineTransform::IDENTITY), 0.0);
    }

    #[test]
    fn individual_error_three_four_five() {
        assert_eq!(individual_error(p(0.0, 0.0), p(3.0, 4.0), &AffineTransform::IDENTITY), 25.0);
    }

    #[test]
    fn rms_error_of_two_known_residuals() {
        // Residuals 9 and 16 px² -> sqrt(12.5).
        let corr = CorrespondenceSet::from_pairs([
            (p(0.0, 0.0), p(3.0, 0.0)),
            (p(10.0, 0.0), p(10.0, 4.0)),
        ]);
        let rms = rms_error(&corr, &AffineTransform::IDENTITY).unwrap();
        assert_abs_diff_eq!(rms, 12.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rms_error_empty_set_errors() {
        let corr = CorrespondenceSet::from_pairs(std::iter::empty());
        assert_eq!(rms_error(&corr, &AffineTransform::IDENTITY), Err(GeometryError::EmptySet));
    }

    #[test]
    fn constructor_rejects_duplicate_ids() {
        let e = CorrespondenceSet::new(
            vec![p(0.0, 0.0), p(1.0, 0.0)],
            vec![p(0.0, 0.0), p(1.0, 0.0)],
            vec![7, 7],
        );
        assert_eq!(e, Err(GeometryError::DuplicateId(7)));
    }

    #[test]
    fn transform_serializes_as_flat_array() {
        let t = AffineTransform::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, "[1.0,2.0,3.0,4.0,5.0,6.0]");
        let back: AffineTransform = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}

//! Shared scene fixtures for the unit tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{CorrespondenceSet, Point2};

/// Identity-paired scene from raw coordinates.
pub(crate) fn identity_scene(points: &[(f64, f64)]) -> CorrespondenceSet {
    CorrespondenceSet::from_pairs(
        points
            .iter()
            .map(|&(x, y)| (Point2::new(x, y), Point2::new(x, y))),
    )
}

/// Uniform random points over a 512px field.
pub(crate) fn general_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.gen_range(0.0..512.0), rng.gen_range(0.0..512.0)))
        .collect()
}

/// Seven vertices in general position; the sensed copy of vertex 6 is
/// displaced across the line through vertices 2 and 4, making the pair
/// `(v6, v6')` the unique outlier.
pub(crate) fn seven_vertex_scene() -> CorrespondenceSet {
    let reference = [
        (1.0, 3.0), // id 1
        (0.0, 0.0), // id 2
        (3.0, 1.0), // id 3
        (4.0, 4.0), // id 4
        (2.0, 0.0), // id 5
        (3.0, 0.2), // id 6
        (0.0, 2.0), // id 7
    ];
    let mut sensed = reference;
    sensed[5] = (1.0, 2.5); // v6' crosses to the other side of 2 -> 4
    CorrespondenceSet::new(
        reference.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
        sensed.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
        (1..=7).collect(),
    )
    .unwrap()
}

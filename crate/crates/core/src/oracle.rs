//! Brute-force reference routines for the test suites.
//!
//! These recompute descriptor and estimation results along deliberately
//! different code paths (full 3×3 determinants, Cramer's rule, exhaustive
//! subset search) so the optimized implementations can be checked against
//! them. They are not meant for production use: costs are cubic to
//! exponential.

use crate::geometry::{AffineTransform, CorrespondenceSet, Point2};

/// Sign of the full 3×3 determinant with a ones row, by cofactor
/// expansion (a different expression than the production predicate).
fn det3_sign(a: Point2, b: Point2, c: Point2, eps: f64) -> i8 {
    let det = a.x * (b.y - c.y) - b.x * (a.y - c.y) + c.x * (a.y - b.y);
    if det > eps {
        1
    } else if det < -eps {
        -1
    } else {
        0
    }
}

/// Disparity matrix over the vertices selected by `alive`, recomputed
/// from scratch with a plain triple loop. Indices follow the positions
/// in `corr`; dead rows and columns are zero.
pub fn brute_disparity(
    corr: &CorrespondenceSet,
    alive: &[bool],
    eps: f64,
    negate_sensed: bool,
) -> Vec<Vec<u64>> {
    let n = corr.len();
    assert_eq!(alive.len(), n);
    let flip = if negate_sensed { -1 } else { 1 };
    let mut dm = vec![vec![0u64; n]; n];
    for i in 0..n {
        if !alive[i] {
            continue;
        }
        for j in 0..n {
            if i == j || !alive[j] {
                continue;
            }
            let mut mismatches = 0u64;
            for k in 0..n {
                if k == i || k == j || !alive[k] {
                    continue;
                }
                let (ri, si) = corr.pair(i);
                let (rj, sj) = corr.pair(j);
                let (rk, sk) = corr.pair(k);
                let sr = det3_sign(ri, rj, rk, eps);
                let ss = flip * det3_sign(si, sj, sk, eps);
                mismatches += (sr != ss) as u64;
            }
            dm[i][j] = mismatches;
        }
    }
    dm
}

/// Total disparity of the alive subset (sum of all directed entries).
pub fn brute_total_disparity(
    corr: &CorrespondenceSet,
    alive: &[bool],
    eps: f64,
    negate_sensed: bool,
) -> u64 {
    brute_disparity(corr, alive, eps, negate_sensed)
        .iter()
        .flatten()
        .sum()
}

/// Least-squares affine fit through the normal equations solved with
/// Cramer's rule (independent of the elimination-based production path).
pub fn lsm_cramer(set: &CorrespondenceSet) -> Option<AffineTransform> {
    if set.len() < 3 {
        return None;
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
    let d = det3x3(&m);
    let scale = m.iter().flatten().fold(0.0f64, |a, &v| a.max(v.abs()));
    if d.abs() <= 1e-12 * scale.powi(3).max(1.0) {
        return None;
    }
    let solve = |b: &[f64; 3]| -> [f64; 3] {
        let mut out = [0.0f64; 3];
        for (col, slot) in out.iter_mut().enumerate() {
            let mut mc = m;
            for r in 0..3 {
                mc[r][col] = b[r];
            }
            *slot = det3x3(&mc) / d;
        }
        out
    };
    let rx = solve(&bx);
    let ry = solve(&by);
    Some(AffineTransform::new(rx[0], rx[1], ry[0], ry[1], rx[2], ry[2]))
}

fn det3x3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Squared residual recomputed through `hypot` (a different rounding
/// route than the production measure).
pub fn individual_error_alt(vk: Point2, vk_s: Point2, t: &AffineTransform) -> f64 {
    let p = t.apply(vk);
    let h = (p.x - vk_s.x).hypot(p.y - vk_s.y);
    h * h
}

/// Size of the largest subset with identical descriptors, by exhaustive
/// search over all subsets. Only sensible for small inputs (`N <= 12`);
/// subsets of size below 3 are vacuously consistent.
pub fn max_consistent_subset_size(corr: &CorrespondenceSet, eps: f64) -> usize {
    let n = corr.len();
    assert!(n <= 12, "exhaustive search is exponential");
    for size in (3..=n).rev() {
        if any_consistent_subset_of_size(corr, eps, size) {
            return size;
        }
    }
    n.min(2)
}

fn any_consistent_subset_of_size(corr: &CorrespondenceSet, eps: f64, size: usize) -> bool {
    let n = corr.len();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let alive: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        if brute_total_disparity(corr, &alive, eps, false) == 0 {
            return true;
        }
    }
    false
}

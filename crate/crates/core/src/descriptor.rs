//! The vertex trichotomy descriptor and its disparity bookkeeping.
//!
//! For every directed pair of matched vertices `(i, j)` the descriptor
//! records, for each probe vertex `k`, which side of the line `i -> j`
//! the probe falls on (`+1`, `0`, `-1`), in both images. The disparity
//! matrix counts, per pair, how many probes disagree between the two
//! images; it is maintained incrementally as vertices are removed so the
//! orientation signs are never recomputed after the initial build.
//!
//! Signs are stored 2-bit-packed over the unordered pairs `i < j`; the
//! directed entry `(j, i, k)` is the negation of `(i, j, k)`, which
//! leaves the agree/disagree comparison unchanged. At the default cap of
//! 600 vertices the two tensors take roughly 55 MB.

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{auto_eps, orient, CorrespondenceSet, Point2, VertexId};

/// Tuning knobs for descriptor construction.
#[derive(Debug, Clone)]
pub struct DescriptorConfig {
    /// Orientation tolerance; `None` selects the scale-aware default
    /// `1e-9 ×` (bounding-box diagonal)².
    pub eps: Option<f64>,
    /// Hard cap on vertices per descriptor instance; larger inputs must
    /// be subdivided by the caller.
    pub max_vertices: usize,
    /// Detect globally mirrored sensed geometry (negative-determinant
    /// transforms flip every sign) and compare against negated sensed
    /// signs when that lowers total disparity.
    pub detect_reflection: bool,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            eps: None,
            max_vertices: 600,
            detect_reflection: true,
        }
    }
}

/// Errors from descriptor construction and maintenance.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DescriptorError {
    /// Below 4 vertices the descriptor carries no discriminating triples.
    #[error("need at least 4 vertices, got {0}")]
    TooFewVertices(usize),
    /// Input exceeds the configured per-instance cap; subdivide instead.
    #[error("{got} vertices exceed the per-instance cap of {cap}; subdivide the input")]
    BudgetExceeded { got: usize, cap: usize },
    /// The id is not registered in this state.
    #[error("unknown vertex id {0}")]
    UnknownVertex(VertexId),
    /// The vertex was already removed.
    #[error("vertex {0} already removed")]
    AlreadyRemoved(VertexId),
    /// The vertex is still alive where a removed one is required.
    #[error("vertex {0} is still alive")]
    VertexAlive(VertexId),
}

// 2-bit sign encoding inside the packed tensors: 00 zero,
// 01 positive, 10 negative.
const CODE_POS: u8 = 0b01;
const CODE_NEG: u8 = 0b10;

/// Packs one code byte per lane into 2-bit lanes, 4 per output byte.
#[inline]
fn pack_row(codes: &[u8], out: &mut [u8]) {
    for (byte, chunk) in out.iter_mut().zip(codes.chunks_exact(4)) {
        *byte = chunk[0] | (chunk[1] << 2) | (chunk[2] << 4) | (chunk[3] << 6);
    }
}

#[inline]
fn sign_of_code(c: u8) -> i8 {
    match c {
        CODE_POS => 1,
        CODE_NEG => -1,
        _ => 0,
    }
}

#[inline]
fn negate_code(c: u8) -> u8 {
    ((c & 0b01) << 1) | ((c & 0b10) >> 1)
}

/// Maps a packed-code byte (4 lanes) to a nibble with bit `l` set when
/// lane `l` is nonzero. Applied to the XOR of the two sign rows this
/// yields the mismatch bits of 4 probes at once.
const NONZERO_LANE_NIBBLE: [u8; 256] = {
    let mut table = [0u8; 256];
    let mut byte = 0usize;
    while byte < 256 {
        let mut nibble = 0u8;
        let mut lane = 0;
        while lane < 4 {
            if (byte >> (2 * lane)) & 0b11 != 0 {
                nibble |= 1 << lane;
            }
            lane += 1;
        }
        table[byte] = nibble;
        byte += 1;
    }
    table
};

/// 8×8 bit-matrix transpose (row `t` = byte `t`, column `u` = bit `u`).
#[inline]
fn transpose8x8(mut x: u64) -> u64 {
    let mut t = (x ^ (x >> 7)) & 0x00AA_00AA_00AA_00AA;
    x ^= t ^ (t << 7);
    t = (x ^ (x >> 14)) & 0x0000_CCCC_0000_CCCC;
    x ^= t ^ (t << 14);
    t = (x ^ (x >> 28)) & 0x0000_0000_F0F0_F0F0;
    x ^= t ^ (t << 28);
    x
}

/// Packed sign storage for the unordered pairs `i < j`, one 2-bit lane
/// per probe index `k`.
#[derive(Clone)]
struct SignTensor {
    n: usize,
    /// Bytes per pair row: `ceil(n / 4)`.
    stride: usize,
    bytes: Vec<u8>,
}

impl SignTensor {
    fn new(n: usize) -> Self {
        let stride = n.div_ceil(4);
        let rows = n * (n - 1) / 2;
        Self {
            n,
            stride,
            bytes: vec![0u8; rows * stride],
        }
    }

    /// Row index of the unordered pair `(i, j)` with `i < j`.
    #[inline]
    fn pair_row(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    #[inline]
    fn get_code(&self, row: usize, k: usize) -> u8 {
        let b = self.bytes[row * self.stride + (k >> 2)];
        (b >> ((k & 3) << 1)) & 0b11
    }

    /// Directed sign `(i, j, k)` for any `i != j`: stored for `i < j`,
    /// negated for `i > j`.
    fn sign(&self, i: usize, j: usize, k: usize) -> i8 {
        if i < j {
            sign_of_code(self.get_code(self.pair_row(i, j), k))
        } else {
            -sign_of_code(self.get_code(self.pair_row(j, i), k))
        }
    }

    /// Negates every stored sign in place (zero lanes stay zero).
    fn negate_all(&mut self) {
        for b in &mut self.bytes {
            *b = ((*b & 0x55) << 1) | ((*b & 0xAA) >> 1);
        }
    }
}

/// Probe-major mismatch index: one bit per (probe, pair) marking
/// `signs_ref(i,j,k) != signs_sen(i,j,k)`. A vertex removal consumes one
/// contiguous slab instead of striding across both sign tensors.
#[derive(Clone)]
struct ProbeBits {
    /// Bytes per probe slab: `ceil(C(n,2) / 8)`.
    slab: usize,
    bytes: Vec<u8>,
}

impl ProbeBits {
    fn new(n: usize) -> Self {
        let rows = n * (n - 1) / 2;
        let slab = rows.div_ceil(8);
        Self {
            slab,
            bytes: vec![0u8; n * slab],
        }
    }

    #[inline]
    fn set(&mut self, k: usize, pair: usize, mismatch: bool) {
        self.bytes[k * self.slab + (pair >> 3)] |= u8::from(mismatch) << (pair & 7);
    }

    #[inline]
    fn slab_of(&self, k: usize) -> &[u8] {
        &self.bytes[k * self.slab..(k + 1) * self.slab]
    }

    fn clear(&mut self) {
        self.bytes.fill(0);
    }
}

/// Built descriptor state for one pair of corresponding vertex sets.
///
/// Holds both packed sign tensors, the disparity matrix, and the
/// alive/removed bookkeeping. Reads are safe from multiple threads;
/// removal needs exclusive access.
#[derive(Clone)]
pub struct TrichotomyState {
    ids: Vec<VertexId>,
    id_to_slot: HashMap<VertexId, usize>,
    ref_pts: Vec<Point2>,
    sen_pts: Vec<Point2>,
    alive: Vec<bool>,
    alive_count: usize,
    signs_ref: SignTensor,
    signs_sen: SignTensor,
    probe_bits: ProbeBits,
    /// Pair index -> endpoint slots, the inverse of `pair_row`.
    pair_endpoints: Vec<(u16, u16)>,
    /// `n × n` row-major, symmetric, zero diagonal; rows/columns of
    /// removed vertices are zeroed.
    disparity: Vec<u32>,
    /// Per-slot accumulated disparity (column sums of `disparity`),
    /// maintained incrementally.
    column_totals: Vec<u64>,
    /// Sum of all disparity entries, kept in step with `disparity`.
    total_disparity: u64,
    removal_log: Vec<VertexId>,
    eps: f64,
    sensed_negated: bool,
    orientation_evals: u64,
}

/// Builds the descriptor for both vertex sets and populates the
/// disparity matrix. Performs exactly `2·C(N,2)·(N−2)` orientation
/// evaluations, counted on the returned state.
pub fn build_state(
    corr: &CorrespondenceSet,
    cfg: &DescriptorConfig,
) -> Result<TrichotomyState, DescriptorError> {
    let n = corr.len();
    if n < 4 {
        return Err(DescriptorError::TooFewVertices(n));
    }
    if n > cfg.max_vertices {
        return Err(DescriptorError::BudgetExceeded {
            got: n,
            cap: cfg.max_vertices,
        });
    }
    let eps = cfg.eps.unwrap_or_else(|| auto_eps(corr));

    let ids = corr.ids().to_vec();
    let id_to_slot: HashMap<VertexId, usize> =
        ids.iter().enumerate().map(|(s, &id)| (id, s)).collect();
    let ref_pts = corr.reference().to_vec();
    let sen_pts = corr.sensed().to_vec();

    let mut signs_ref = SignTensor::new(n);
    let mut signs_sen = SignTensor::new(n);
    let mut probe_bits = ProbeBits::new(n);
    let mut pair_endpoints = Vec::with_capacity(n * (n - 1) / 2);
    let mut disparity = vec![0u32; n * n];
    let mut column_totals = vec![0u64; n];
    let mut total_disparity = 0u64;
    let mut evals = 0u64;

    // Coordinate arrays for the hot loop; scratch rows take one code
    // byte per probe and are packed to 2-bit lanes per pair.
    let xr: Vec<f64> = ref_pts.iter().map(|p| p.x).collect();
    let yr: Vec<f64> = ref_pts.iter().map(|p| p.y).collect();
    let xs: Vec<f64> = sen_pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = sen_pts.iter().map(|p| p.y).collect();
    let stride = signs_ref.stride;
    let mut scratch_ref = vec![0u8; stride * 4];
    let mut scratch_sen = vec![0u8; stride * 4];
    // Pair-major mismatch bits (one bit per probe), transposed into the
    // probe-major index after the build loop.
    let mrow_stride = stride.div_ceil(2);
    let mut mismatch_rows = vec![0u8; (n * (n - 1) / 2) * mrow_stride];

    for i in 0..n - 1 {
        let (xri, yri) = (xr[i], yr[i]);
        let (xsi, ysi) = (xs[i], ys[i]);
        for j in i + 1..n {
            let (dxr, dyr) = (xr[j] - xri, yr[j] - yri);
            let (dxs, dys) = (xs[j] - xsi, ys[j] - ysi);
            let pair = pair_endpoints.len();
            pair_endpoints.push((i as u16, j as u16));
            let mut mismatches = 0u32;
            // Three probe ranges skip k == i and k == j without a
            // per-iteration branch. Zipped slices keep the loop free of
            // bounds checks; the mismatch index is scattered in a second
            // pass so this one stays vectorizable.
            let ranges = [(0, i), (i + 1, j), (j + 1, n)];
            for (lo, hi) in ranges {
                evals += 2 * (hi - lo) as u64;
                let probes = xr[lo..hi]
                    .iter()
                    .zip(&yr[lo..hi])
                    .zip(xs[lo..hi].iter().zip(&ys[lo..hi]));
                let outs = scratch_ref[lo..hi]
                    .iter_mut()
                    .zip(&mut scratch_sen[lo..hi]);
                for (((&xk, &yk), (&xsk, &ysk)), (out_r, out_s)) in probes.zip(outs) {
                    let dr = dxr * (yk - yri) - dyr * (xk - xri);
                    let ds = dxs * (ysk - ysi) - dys * (xsk - xsi);
                    let cr = u8::from(dr > eps) | (u8::from(dr < -eps) << 1);
                    let cs = u8::from(ds > eps) | (u8::from(ds < -eps) << 1);
                    *out_r = cr;
                    *out_s = cs;
                    mismatches += u32::from(cr != cs);
                }
            }
            // Lanes i and j may hold stale codes from the previous pair.
            scratch_ref[i] = 0;
            scratch_ref[j] = 0;
            scratch_sen[i] = 0;
            scratch_sen[j] = 0;

            pack_row(&scratch_ref, &mut signs_ref.bytes[pair * stride..(pair + 1) * stride]);
            pack_row(&scratch_sen, &mut signs_sen.bytes[pair * stride..(pair + 1) * stride]);

            if mismatches > 0 {
                let row_ref = &signs_ref.bytes[pair * stride..(pair + 1) * stride];
                let row_sen = &signs_sen.bytes[pair * stride..(pair + 1) * stride];
                let mrow = &mut mismatch_rows[pair * mrow_stride..(pair + 1) * mrow_stride];
                for (b, out) in mrow.iter_mut().enumerate() {
                    let lo = NONZERO_LANE_NIBBLE[(row_ref[2 * b] ^ row_sen[2 * b]) as usize];
                    let hi = if 2 * b + 1 < stride {
                        NONZERO_LANE_NIBBLE[(row_ref[2 * b + 1] ^ row_sen[2 * b + 1]) as usize]
                    } else {
                        0
                    };
                    *out = lo | (hi << 4);
                }
            }

            disparity[i * n + j] = mismatches;
            disparity[j * n + i] = mismatches;
            column_totals[i] += mismatches as u64;
            column_totals[j] += mismatches as u64;
            total_disparity += 2 * mismatches as u64;
        }
    }

    // Transpose the pair-major mismatch bits into probe-major slabs,
    // 8×8 bit blocks at a time; all-zero blocks are skipped.
    let pairs = pair_endpoints.len();
    for pair_block in (0..pairs).step_by(8) {
        let byte_idx = pair_block >> 3;
        for kb in 0..mrow_stride {
            let mut block = 0u64;
            for t in 0..8.min(pairs - pair_block) {
                block |= (mismatch_rows[(pair_block + t) * mrow_stride + kb] as u64) << (8 * t);
            }
            if block == 0 {
                continue;
            }
            let transposed = transpose8x8(block);
            for u in 0..8 {
                let k = kb * 8 + u;
                if k >= n {
                    break;
                }
                let byte = ((transposed >> (8 * u)) & 0xFF) as u8;
                if byte != 0 {
                    probe_bits.bytes[k * probe_bits.slab + byte_idx] |= byte;
                }
            }
        }
    }
    drop(mismatch_rows);

    let mut state = TrichotomyState {
        ids,
        id_to_slot,
        ref_pts,
        sen_pts,
        alive: vec![true; n],
        alive_count: n,
        signs_ref,
        signs_sen,
        probe_bits,
        pair_endpoints,
        disparity,
        column_totals,
        total_disparity,
        removal_log: Vec::new(),
        eps,
        sensed_negated: false,
        orientation_evals: evals,
    };

    if cfg.detect_reflection && state.total_disparity > 0 {
        state.try_negated_sensed();
    }
    Ok(state)
}

impl TrichotomyState {
    /// Number of vertices registered at build time.
    pub fn n_total(&self) -> usize {
        self.ids.len()
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    /// Orientation tolerance in effect for both graphs.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// True when the sensed signs were negated to undo a global mirror.
    pub fn sensed_negated(&self) -> bool {
        self.sensed_negated
    }

    /// Orientation evaluations performed by the initial build.
    pub fn orientation_evals(&self) -> u64 {
        self.orientation_evals
    }

    pub fn is_alive(&self, id: VertexId) -> bool {
        self.id_to_slot
            .get(&id)
            .map(|&s| self.alive[s])
            .unwrap_or(false)
    }

    /// Alive ids in registration (input) order.
    pub fn alive_ids(&self) -> Vec<VertexId> {
        self.ids
            .iter()
            .zip(self.alive.iter())
            .filter_map(|(&id, &a)| a.then_some(id))
            .collect()
    }

    /// Ids removed so far, in removal order.
    pub fn removal_log(&self) -> &[VertexId] {
        &self.removal_log
    }

    /// True when both descriptors agree on every alive pair.
    pub fn is_identical(&self) -> bool {
        self.total_disparity == 0
    }

    /// Disparity entry for an ordered id pair.
    pub fn disparity_between(&self, i: VertexId, j: VertexId) -> Result<u32, DescriptorError> {
        let si = self.slot_of(i)?;
        let sj = self.slot_of(j)?;
        Ok(self.disparity[si * self.n_total() + sj])
    }

    /// Accumulated disparity of vertex `j`: the sum of disparity entries
    /// over all pairs ending at `j`.
    pub fn disparity_total(&self, j: VertexId) -> Result<u64, DescriptorError> {
        let sj = self.slot_of(j)?;
        if !self.alive[sj] {
            return Err(DescriptorError::AlreadyRemoved(j));
        }
        Ok(self.column_totals[sj])
    }

    /// All alive vertices attaining the positive maximum of accumulated
    /// disparity; empty when the disparity matrix is entirely zero.
    /// Ties are returned together, in registration order.
    pub fn select_outliers(&self) -> Vec<VertexId> {
        let max = self.max_disparity_total();
        if max == 0 {
            return Vec::new();
        }
        self.ids
            .iter()
            .enumerate()
            .filter_map(|(s, &id)| {
                (self.alive[s] && self.column_totals[s] == max).then_some(id)
            })
            .collect()
    }

    /// Current maximum accumulated disparity over alive vertices.
    pub fn max_disparity_total(&self) -> u64 {
        self.alive
            .iter()
            .zip(self.column_totals.iter())
            .filter_map(|(&a, &t)| a.then_some(t))
            .max()
            .unwrap_or(0)
    }

    /// Removes a vertex: subtracts its probe contributions from the
    /// disparity matrix, zeroes its row and column, and logs the removal.
    pub fn remove_vertex(&mut self, d: VertexId) -> Result<(), DescriptorError> {
        let sd = self.slot_of(d)?;
        if !self.alive[sd] {
            return Err(DescriptorError::AlreadyRemoved(d));
        }
        self.alive[sd] = false;
        self.alive_count -= 1;
        self.removal_log.push(d);

        let n = self.n_total();
        // Probe contributions: d appeared as k in every alive pair. The
        // probe-major mismatch slab lists exactly the pairs whose count
        // included d; each bit is consumed at most once since a vertex
        // is removed at most once.
        let slab = self.probe_bits.slab_of(sd);
        for (byte_idx, &byte) in slab.iter().enumerate() {
            let mut bits = byte;
            while bits != 0 {
                let pair = byte_idx * 8 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let (i, j) = self.pair_endpoints[pair];
                let (i, j) = (i as usize, j as usize);
                if self.alive[i] && self.alive[j] {
                    self.disparity[i * n + j] -= 1;
                    self.disparity[j * n + i] -= 1;
                    self.column_totals[i] -= 1;
                    self.column_totals[j] -= 1;
                    self.total_disparity -= 2;
                }
            }
        }
        // Pair contributions: zero the row and column of d.
        let mut freed = 0u64;
        for j in 0..n {
            let row_entry = self.disparity[sd * n + j] as u64;
            freed += row_entry + self.disparity[j * n + sd] as u64;
            self.column_totals[j] -= row_entry;
            self.disparity[sd * n + j] = 0;
            self.disparity[j * n + sd] = 0;
        }
        self.column_totals[sd] = 0;
        self.total_disparity -= freed;
        Ok(())
    }

    /// Checks whether re-adding removed vertex `d` keeps the descriptors
    /// of the alive set identical: the sign of every triple containing
    /// `d` and two alive vertices must agree between the two images.
    ///
    /// Evaluates orientations on demand without mutating state. `d` may
    /// be a vertex never registered in this state (it must then be
    /// present in `corr`).
    pub fn check_candidate_consistency(
        &self,
        corr: &CorrespondenceSet,
        d: VertexId,
        eps: f64,
    ) -> Result<bool, DescriptorError> {
        if let Some(&sd) = self.id_to_slot.get(&d) {
            if self.alive[sd] {
                return Err(DescriptorError::VertexAlive(d));
            }
        }
        let idx = corr
            .index_of(d)
            .ok_or(DescriptorError::UnknownVertex(d))?;
        let (cand_ref, cand_sen) = corr.pair(idx);
        debug_assert!(self.is_identical());

        let alive: Vec<usize> = (0..self.n_total()).filter(|&s| self.alive[s]).collect();
        let ref_pts: Vec<Point2> = alive.iter().map(|&s| self.ref_pts[s]).collect();
        let sen_pts: Vec<Point2> = alive.iter().map(|&s| self.sen_pts[s]).collect();
        Ok(candidate_consistent(
            &ref_pts,
            &sen_pts,
            cand_ref,
            cand_sen,
            eps,
            self.sensed_negated,
        ))
    }

    /// Trichotomy sets of the directed pair `(i, j)` over all alive
    /// vertices, endpoints included (endpoints sit on their own line).
    /// Returns `(positive, zero, negative)` id lists for the given image
    /// side.
    pub fn trichotomy_sets(
        &self,
        i: VertexId,
        j: VertexId,
        sensed: bool,
    ) -> Result<(Vec<VertexId>, Vec<VertexId>, Vec<VertexId>), DescriptorError> {
        let si = self.slot_of(i)?;
        let sj = self.slot_of(j)?;
        let mut pos = Vec::new();
        let mut zero = Vec::new();
        let mut neg = Vec::new();
        for (k, &id) in self.ids.iter().enumerate() {
            if !self.alive[k] {
                continue;
            }
            let sign = if k == si || k == sj {
                0
            } else if sensed {
                let s = self.signs_sen.sign(si, sj, k);
                if self.sensed_negated {
                    -s
                } else {
                    s
                }
            } else {
                self.signs_ref.sign(si, sj, k)
            };
            match sign {
                1 => pos.push(id),
                -1 => neg.push(id),
                _ => zero.push(id),
            }
        }
        Ok((pos, zero, neg))
    }

    fn slot_of(&self, id: VertexId) -> Result<usize, DescriptorError> {
        self.id_to_slot
            .get(&id)
            .copied()
            .ok_or(DescriptorError::UnknownVertex(id))
    }

    /// Mirror handling: a negative-determinant transform flips every
    /// sensed sign, making inliers look maximally mismatched. A sampled
    /// preview compares the mismatch mass under the stored sensed signs
    /// against their negation; when negation wins decisively the whole
    /// state is rebuilt on negated signs. Costs no orientation
    /// evaluations.
    fn try_negated_sensed(&mut self) {
        let pairs = self.pair_endpoints.len();
        let step = pairs.div_ceil(512).max(1);
        let n = self.n_total();
        let mut as_stored = 0u64;
        let mut negated = 0u64;
        let mut pair = 0usize;
        while pair < pairs {
            let (i, j) = self.pair_endpoints[pair];
            let (i, j) = (i as usize, j as usize);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let cr = self.signs_ref.get_code(pair, k);
                let cs = self.signs_sen.get_code(pair, k);
                as_stored += u64::from(cr != cs);
                negated += u64::from(cr != negate_code(cs));
            }
            pair += step;
        }
        if negated < as_stored {
            self.signs_sen.negate_all();
            self.sensed_negated = true;
            self.recompute_mismatches_from_signs();
        }
    }

    /// Rebuilds the disparity matrix and the probe-major mismatch index
    /// from the stored sign tensors (all vertices alive).
    fn recompute_mismatches_from_signs(&mut self) {
        let n = self.n_total();
        debug_assert_eq!(self.alive_count, n);
        self.disparity = vec![0u32; n * n];
        self.column_totals = vec![0u64; n];
        self.total_disparity = 0;
        self.probe_bits.clear();
        for pair in 0..self.pair_endpoints.len() {
            let (i, j) = self.pair_endpoints[pair];
            let (i, j) = (i as usize, j as usize);
            let mut mismatches = 0u32;
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let mismatch =
                    self.signs_ref.get_code(pair, k) != self.signs_sen.get_code(pair, k);
                self.probe_bits.set(k, pair, mismatch);
                mismatches += u32::from(mismatch);
            }
            self.disparity[i * n + j] = mismatches;
            self.disparity[j * n + i] = mismatches;
            self.column_totals[i] += mismatches as u64;
            self.column_totals[j] += mismatches as u64;
            self.total_disparity += 2 * mismatches as u64;
        }
    }
}

/// True when the two descriptors stay identical after extending the
/// given (already identical) vertex sets by one candidate pair: the sign
/// of every triple `{candidate, i, j}` must agree between the images.
///
/// The three directed-index families of the identity criterion are
/// column permutations of the same triple determinant, so one
/// evaluation per unordered pair decides all of them.
pub(crate) fn candidate_consistent(
    ref_pts: &[Point2],
    sen_pts: &[Point2],
    cand_ref: Point2,
    cand_sen: Point2,
    eps: f64,
    sensed_negated: bool,
) -> bool {
    let n = ref_pts.len();
    debug_assert_eq!(n, sen_pts.len());
    for i in 0..n {
        for j in i + 1..n {
            let sr = orient(ref_pts[i], ref_pts[j], cand_ref, eps);
            let mut ss = orient(sen_pts[i], sen_pts[j], cand_sen, eps);
            if sensed_negated {
                ss = ss.flipped();
            }
            if sr != ss {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{identity_scene, seven_vertex_scene};
    use crate::geometry::AffineTransform;

    #[test]
    fn identical_sets_have_zero_disparity() {
        let corr = identity_scene(&[
            (0.0, 0.0),
            (5.0, 1.0),
            (2.0, 7.0),
            (9.0, 3.0),
            (4.0, 4.0),
            (8.0, 8.0),
            (1.0, 6.0),
        ]);
        let state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        assert!(state.is_identical());
        for &i in corr.ids() {
            assert_eq!(state.disparity_total(i).unwrap(), 0);
        }
        assert!(state.select_outliers().is_empty());
    }

    #[test]
    fn too_few_vertices_is_an_error() {
        let corr = identity_scene(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(
            build_state(&corr, &DescriptorConfig::default()).err(),
            Some(DescriptorError::TooFewVertices(3))
        );
    }

    #[test]
    fn budget_cap_is_enforced() {
        let pts: Vec<(f64, f64)> = (0..12).map(|i| (i as f64, (i * i % 7) as f64)).collect();
        let corr = identity_scene(&pts);
        let cfg = DescriptorConfig {
            max_vertices: 10,
            ..DescriptorConfig::default()
        };
        assert_eq!(
            build_state(&corr, &cfg).err(),
            Some(DescriptorError::BudgetExceeded { got: 12, cap: 10 })
        );
    }

    #[test]
    fn seven_vertex_scene_matches_expected_trichotomy_sets() {
        let corr = seven_vertex_scene();
        let state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        let (pos, zero, neg) = state.trichotomy_sets(2, 4, false).unwrap();
        assert_eq!(pos, vec![1, 7]);
        assert_eq!(zero, vec![2, 4]);
        assert_eq!(neg, vec![3, 5, 6]);
        let (pos_s, zero_s, neg_s) = state.trichotomy_sets(2, 4, true).unwrap();
        assert_eq!(pos_s, vec![1, 6, 7]);
        assert_eq!(zero_s, vec![2, 4]);
        assert_eq!(neg_s, vec![3, 5]);
    }

    #[test]
    fn seven_vertex_scene_singles_out_the_displaced_vertex() {
        let corr = seven_vertex_scene();
        let state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        assert_eq!(state.select_outliers(), vec![6]);
    }

    #[test]
    fn removing_the_outlier_clears_the_disparity() {
        let corr = seven_vertex_scene();
        let mut state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        state.remove_vertex(6).unwrap();
        assert!(state.is_identical());
        assert_eq!(state.removal_log(), &[6]);
        assert_eq!(state.alive_count(), 6);
    }

    #[test]
    fn removing_an_inlier_from_a_consistent_scene_stays_consistent() {
        let corr = identity_scene(&[(0.0, 0.0), (5.0, 1.0), (2.0, 7.0), (9.0, 3.0), (4.0, 4.0)]);
        let mut state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        state.remove_vertex(2).unwrap();
        assert!(state.is_identical());
    }

    #[test]
    fn double_removal_is_rejected() {
        let corr = seven_vertex_scene();
        let mut state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        state.remove_vertex(6).unwrap();
        assert_eq!(
            state.remove_vertex(6),
            Err(DescriptorError::AlreadyRemoved(6))
        );
    }

    #[test]
    fn disparity_total_of_unknown_vertex_errors() {
        let corr = seven_vertex_scene();
        let state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        assert_eq!(
            state.disparity_total(99),
            Err(DescriptorError::UnknownVertex(99))
        );
    }

    #[test]
    fn disparity_total_sums_the_requested_column() {
        // Hand-crafted disparity: column sums {0, 5, 2} for slots 0..2.
        let corr = identity_scene(&[(0.0, 0.0), (4.0, 1.0), (1.0, 5.0), (6.0, 6.0)]);
        let mut state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        let n = state.n_total();
        state.disparity[1] = 2;
        state.disparity[2 * n + 1] = 3;
        state.disparity[2] = 2;
        state.column_totals = vec![0, 5, 2, 0];
        state.total_disparity = 7;
        assert_eq!(state.disparity_total(0).unwrap(), 0);
        assert_eq!(state.disparity_total(1).unwrap(), 5);
        assert_eq!(state.disparity_total(2).unwrap(), 2);
    }

    #[test]
    fn tied_maxima_are_selected_together() {
        let corr = identity_scene(&[(0.0, 0.0), (4.0, 1.0), (1.0, 5.0), (6.0, 6.0)]);
        let mut state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        let n = state.n_total();
        state.disparity[1] = 1;
        state.disparity[n] = 1;
        state.column_totals = vec![1, 1, 0, 0];
        state.total_disparity = 2;
        assert_eq!(state.select_outliers(), vec![0, 1]);
    }

    #[test]
    fn build_counts_orientation_evaluations_exactly() {
        let pts: Vec<(f64, f64)> = (0..9).map(|i| (i as f64, ((i * 37) % 11) as f64)).collect();
        let corr = identity_scene(&pts);
        let state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        let n = 9u64;
        assert_eq!(state.orientation_evals(), 2 * (n * (n - 1) / 2) * (n - 2));
    }

    #[test]
    fn mirrored_sensed_points_are_recognized() {
        let pts = [(0.0, 0.0), (5.0, 1.0), (2.0, 7.0), (9.0, 3.0), (4.0, 4.0), (8.0, 8.0)];
        let mirror = AffineTransform::new(-1.0, 0.0, 0.0, 1.0, 20.0, 0.0);
        let corr = CorrespondenceSet::from_pairs(
            pts.iter()
                .map(|&(x, y)| (Point2::new(x, y), mirror.apply(Point2::new(x, y)))),
        );
        let state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        assert!(state.sensed_negated());
        assert!(state.is_identical());

        let cfg = DescriptorConfig {
            detect_reflection: false,
            ..DescriptorConfig::default()
        };
        let state = build_state(&corr, &cfg).unwrap();
        assert!(!state.sensed_negated());
        assert!(!state.is_identical());
    }

    #[test]
    fn candidate_consistency_accepts_a_true_inlier_and_rejects_a_displaced_one() {
        let corr = identity_scene(&[
            (0.0, 0.0),
            (5.0, 1.0),
            (2.0, 7.0),
            (9.0, 3.0),
            (4.0, 4.0),
            (8.0, 8.0),
        ]);
        let mut state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        state.remove_vertex(3).unwrap();
        let eps = state.eps();
        assert!(state.check_candidate_consistency(&corr, 3, eps).unwrap());

        // Displace the sensed copy of vertex 3 across the line 0 -> 1.
        let mut sensed: Vec<Point2> = corr.sensed().to_vec();
        sensed[3] = Point2::new(2.0, -3.0);
        let moved =
            CorrespondenceSet::new(corr.reference().to_vec(), sensed, corr.ids().to_vec()).unwrap();
        assert!(!state.check_candidate_consistency(&moved, 3, eps).unwrap());
    }

    #[test]
    fn candidate_consistency_requires_a_removed_vertex() {
        let corr = seven_vertex_scene();
        let state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        assert_eq!(
            state.check_candidate_consistency(&corr, 6, state.eps()),
            Err(DescriptorError::VertexAlive(6))
        );
    }

    #[test]
    fn candidate_consistency_is_vacuous_with_two_alive_vertices() {
        let corr = identity_scene(&[(0.0, 0.0), (5.0, 1.0), (2.0, 7.0), (9.0, 3.0)]);
        let mut state = build_state(&corr, &DescriptorConfig::default()).unwrap();
        state.remove_vertex(0).unwrap();
        state.remove_vertex(1).unwrap();
        assert!(state.check_candidate_consistency(&corr, 0, state.eps()).unwrap());
    }
}

//! Greedy outlier removal by vertex trichotomy matching.
//!
//! Starting from the full descriptor, the filter repeatedly removes every
//! vertex attaining the maximal accumulated disparity until the two
//! descriptors are identical. A subdivided variant partitions the input
//! into random groups and filters each group independently, trading
//! discriminative power for the cubic descriptor cost.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::{build_state, DescriptorConfig, DescriptorError};
use crate::geometry::{AffineTransform, CorrespondenceSet, GeometryError, VertexId};
use crate::seeding;

/// Configuration shared by the plain and subdivided filters.
#[derive(Debug, Clone, Default)]
pub struct VtmConfig {
    /// Orientation tolerance; `None` selects the scale-aware default.
    pub eps: Option<f64>,
    /// Descriptor storage policy (vertex cap, reflection handling).
    pub descriptor: DescriptorOptions,
}

/// Descriptor knobs exposed on filter configurations.
#[derive(Debug, Clone)]
pub struct DescriptorOptions {
    pub max_vertices: usize,
    pub detect_reflection: bool,
}

impl Default for DescriptorOptions {
    fn default() -> Self {
        let d = DescriptorConfig::default();
        Self {
            max_vertices: d.max_vertices,
            detect_reflection: d.detect_reflection,
        }
    }
}

impl VtmConfig {
    pub(crate) fn descriptor_config(&self) -> DescriptorConfig {
        DescriptorConfig {
            eps: self.eps,
            max_vertices: self.descriptor.max_vertices,
            detect_reflection: self.descriptor.detect_reflection,
        }
    }
}

/// Errors from the filtering algorithms.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// Group count outside `1..=N`.
    #[error("invalid group count {m} for {n} vertices")]
    InvalidGroupCount { m: usize, n: usize },
    /// The residual set cannot support a transform estimate.
    #[error("residual set degenerate: affine model not estimable")]
    DegenerateResidual,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Why a filter run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Descriptors identical (plain filter) or RMS error below threshold.
    Converged,
    /// An outer iteration changed nothing and recovered nothing.
    Stall,
    /// The outer-iteration cap was reached.
    IterationCap,
    /// Input too small to filter; passed through unchanged.
    PassThrough,
}

/// One timeline entry of a filter run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Outer iteration the event belongs to (always 1 for plain runs).
    pub outer: u32,
    #[serde(flatten)]
    pub event: TraceEvent,
}

/// Recovery gate values recorded for one re-admitted candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveredCandidate {
    pub id: VertexId,
    /// Squared residual under the transform in force at recovery time.
    pub individual_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// One removal batch: every vertex attaining the maximal disparity.
    Removed {
        ids: Vec<VertexId>,
        max_disparity: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        group: Option<u32>,
    },
    /// Transform estimate over the current residual set.
    Estimated {
        n_residual: usize,
        rms_error: f64,
        max_individual_error: f64,
    },
    /// Candidates re-admitted into the residual set.
    Recovered { candidates: Vec<RecoveredCandidate> },
    /// Free-form diagnostics (pass-through inputs, group layout, ...).
    Note { message: String },
}

/// Outcome of a filter run: a partition of the input correspondences
/// plus the iteration timeline.
///
/// `residual` keeps the input ordering; `deleted` is ordered by removal
/// time; `recovered` lists residual members that were removed at some
/// point and later re-admitted (in input order).
#[derive(Debug, Clone)]
pub struct FilterResult {
    pub residual: CorrespondenceSet,
    pub deleted: CorrespondenceSet,
    pub recovered: CorrespondenceSet,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    /// Orientation evaluations spent building descriptors.
    pub orientation_evals: u64,
    /// Final transform estimate, when the algorithm produced one.
    pub model: Option<AffineTransform>,
    /// RMS residual of `residual` under `model`, in pixels.
    pub rms: Option<f64>,
}

impl FilterResult {
    pub(crate) fn pass_through(corr: &CorrespondenceSet, message: String) -> Self {
        Self {
            residual: corr.clone(),
            deleted: CorrespondenceSet::from_pairs(std::iter::empty()),
            recovered: CorrespondenceSet::from_pairs(std::iter::empty()),
            trace: vec![TraceRecord {
                outer: 1,
                event: TraceEvent::Note { message },
            }],
            termination: Termination::PassThrough,
            orientation_evals: 0,
            model: None,
            rms: None,
        }
    }
}

pub(crate) fn subset_by_ids(corr: &CorrespondenceSet, ids: &[VertexId]) -> CorrespondenceSet {
    let indices: Vec<usize> = ids
        .iter()
        .map(|&id| corr.index_of(id).expect("id drawn from this set"))
        .collect();
    corr.subset(&indices)
}

/// Removes vertices with maximal descriptor disparity until both
/// descriptors are identical.
///
/// Inputs with fewer than 4 vertices pass through unchanged (the
/// descriptor has no discriminating triples there). Each iteration
/// removes the whole arg-max set, so the run is deterministic and takes
/// at most `N` iterations.
pub fn vtm(corr: &CorrespondenceSet, cfg: &VtmConfig) -> Result<FilterResult, FilterError> {
    Ok(vtm_inner(corr, cfg, None)?.0)
}

/// As [`vtm`], also reporting whether the sensed signs were negated to
/// undo a global mirror (the recovery stage must follow that choice).
pub(crate) fn vtm_inner(
    corr: &CorrespondenceSet,
    cfg: &VtmConfig,
    group: Option<u32>,
) -> Result<(FilterResult, bool), FilterError> {
    if corr.len() < 4 {
        let message = format!(
            "{} vertices: below the 4-vertex descriptor minimum, passed through unfiltered",
            corr.len()
        );
        return Ok((FilterResult::pass_through(corr, message), false));
    }

    let mut state = build_state(corr, &cfg.descriptor_config())?;
    let mut trace = Vec::new();
    while !state.is_identical() {
        let max_disparity = state.max_disparity_total();
        let batch = state.select_outliers();
        debug_assert!(!batch.is_empty());
        for &d in &batch {
            state.remove_vertex(d).expect("selected from alive set");
        }
        trace.push(TraceRecord {
            outer: 1,
            event: TraceEvent::Removed {
                ids: batch,
                max_disparity,
                group,
            },
        });
    }

    let residual = subset_by_ids(corr, &state.alive_ids());
    let deleted = subset_by_ids(corr, state.removal_log());
    let sensed_negated = state.sensed_negated();
    Ok((
        FilterResult {
            residual,
            deleted,
            recovered: CorrespondenceSet::from_pairs(std::iter::empty()),
            trace,
            termination: Termination::Converged,
            orientation_evals: state.orientation_evals(),
            model: None,
            rms: None,
        },
        sensed_negated,
    ))
}

/// Splits position indices `0..n` into `m` random groups of near-equal
/// size, seeded. Groups keep input order internally.
pub(crate) fn partition_indices(n: usize, m: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, &[n as u64, m as u64]));
    order.shuffle(&mut rng);
    let base = n / m;
    let extra = n % m;
    let mut groups = Vec::with_capacity(m);
    let mut cursor = 0usize;
    for g in 0..m {
        let size = base + usize::from(g < extra);
        let mut members: Vec<usize> = order[cursor..cursor + size].to_vec();
        members.sort_unstable();
        groups.push(members);
        cursor += size;
    }
    groups
}

/// Runs [`vtm`] independently on `m` random groups and merges the
/// results. `m = 1` is identical to the plain filter.
pub fn vtm_subdivided(
    corr: &CorrespondenceSet,
    m: usize,
    seed: u64,
    cfg: &VtmConfig,
) -> Result<FilterResult, FilterError> {
    let n = corr.len();
    if m < 1 || m > n {
        return Err(FilterError::InvalidGroupCount { m, n });
    }
    if m == 1 {
        return vtm(corr, cfg);
    }
    Ok(vtm_subdivided_inner(corr, m, seed, cfg)?.0)
}

pub(crate) fn vtm_subdivided_inner(
    corr: &CorrespondenceSet,
    m: usize,
    seed: u64,
    cfg: &VtmConfig,
) -> Result<(FilterResult, bool), FilterError> {
    let groups = partition_indices(corr.len(), m, seed);
    let group_sets: Vec<CorrespondenceSet> = groups.iter().map(|g| corr.subset(g)).collect();

    let outcomes: Vec<Result<(FilterResult, bool), FilterError>> = group_sets
        .par_iter()
        .enumerate()
        .map(|(g, set)| vtm_inner(set, cfg, Some(g as u32 + 1)))
        .collect();

    let mut residual_ids: Vec<VertexId> = Vec::new();
    let mut deleted_ids: Vec<VertexId> = Vec::new();
    let mut trace = Vec::new();
    let mut orientation_evals = 0u64;
    let mut negated_votes = 0usize;
    for (g, outcome) in outcomes.into_iter().enumerate() {
        let (result, negated) = outcome?;
        trace.push(TraceRecord {
            outer: 1,
            event: TraceEvent::Note {
                message: format!(
                    "group {}/{}: {} vertices, {} removed",
                    g + 1,
                    m,
                    group_sets[g].len(),
                    result.deleted.len()
                ),
            },
        });
        trace.extend(result.trace);
        residual_ids.extend(result.residual.ids());
        deleted_ids.extend(result.deleted.ids());
        orientation_evals += result.orientation_evals;
        negated_votes += usize::from(negated);
    }

    // Residual keeps the input ordering across groups.
    let residual_set: std::collections::HashSet<VertexId> = residual_ids.iter().copied().collect();
    let residual_in_order: Vec<VertexId> = corr
        .ids()
        .iter()
        .copied()
        .filter(|id| residual_set.contains(id))
        .collect();

    let sensed_negated = negated_votes * 2 > m;
    Ok((
        FilterResult {
            residual: subset_by_ids(corr, &residual_in_order),
            deleted: subset_by_ids(corr, &deleted_ids),
            recovered: CorrespondenceSet::from_pairs(std::iter::empty()),
            trace,
            termination: Termination::Converged,
            orientation_evals,
            model: None,
            rms: None,
        },
        sensed_negated,
    ))
}

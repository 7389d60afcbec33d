//! Recovery-and-filtering vertex trichotomy matching.
//!
//! Alternates the greedy trichotomy filter with a restricted recovery
//! stage: a removed candidate is re-admitted when (a) the residual
//! descriptors stay identical with the candidate added, and (b) its
//! squared residual under the current least-squares transform does not
//! exceed the worst residual of the residual set. Re-running the filter
//! on the expanded set can then dislodge outliers that earlier passes
//! could not separate.

use std::collections::HashSet;

use crate::descriptor::candidate_consistent;
use crate::geometry::{
    estimate_affine_lsm, individual_error, AffineTransform, CorrespondenceSet, GeometryError,
    VertexId,
};
use crate::seeding;
use crate::vtm::{
    subset_by_ids, vtm_inner, vtm_subdivided_inner, DescriptorOptions, FilterError, FilterResult,
    RecoveredCandidate, Termination, TraceEvent, TraceRecord, VtmConfig,
};

/// Configuration of the recovery-and-filtering loop.
#[derive(Debug, Clone)]
pub struct RfvtmConfig {
    /// RMS-error convergence threshold, in pixels.
    pub th_err: f64,
    /// Orientation tolerance; `None` selects the scale-aware default,
    /// resolved once on the full input and held fixed across iterations.
    pub eps: Option<f64>,
    /// Hard cap on outer iterations.
    pub max_outer_iterations: u32,
    /// Group count for the inner filter passes; recovery always runs
    /// against the merged residual set.
    pub m: usize,
    /// Seed for the subdivision partitions.
    pub seed: u64,
    pub descriptor: DescriptorOptions,
}

impl Default for RfvtmConfig {
    fn default() -> Self {
        Self {
            th_err: 0.5,
            eps: None,
            max_outer_iterations: 50,
            m: 1,
            seed: 0,
            descriptor: DescriptorOptions::default(),
        }
    }
}

/// Deleted candidates that qualify for re-admission against `residual`:
/// descriptor consistency plus a squared residual no larger than the
/// worst residual pair under `theta`. Candidates are judged one at a
/// time, each against the residual set alone, so the returned subset
/// does not depend on their order.
pub fn recover_candidates(
    residual: &CorrespondenceSet,
    deleted: &CorrespondenceSet,
    theta: &AffineTransform,
    eps: f64,
) -> Result<Vec<VertexId>, FilterError> {
    if residual.len() < 3 {
        return Err(FilterError::DegenerateResidual);
    }
    let e_max = max_individual_error(residual, theta);
    let mut recovered = Vec::new();
    for (id, r, s) in deleted.iter() {
        let err = individual_error(r, s, theta);
        if err <= e_max
            && candidate_consistent(residual.reference(), residual.sensed(), r, s, eps, false)
        {
            recovered.push(id);
        }
    }
    Ok(recovered)
}

fn max_individual_error(set: &CorrespondenceSet, theta: &AffineTransform) -> f64 {
    set.iter()
        .map(|(_, r, s)| individual_error(r, s, theta))
        .fold(0.0, f64::max)
}

/// Runs the recovery-and-filtering loop on an initial correspondence set.
///
/// Every outer iteration (i) filters the current residual set until the
/// descriptors are identical, (ii) fits the transform and measures the
/// residual errors, (iii) re-admits qualifying deleted candidates. The
/// loop stops when the RMS error drops below `th_err`, when an iteration
/// recovers nothing and leaves the residual set unchanged, or at the
/// iteration cap. Every exit point leaves the residual set with
/// identical descriptors.
pub fn rfvtm(corr: &CorrespondenceSet, cfg: &RfvtmConfig) -> Result<FilterResult, FilterError> {
    if cfg.th_err <= 0.0 {
        return Err(FilterError::InvalidConfig("th_err must be positive"));
    }
    if cfg.max_outer_iterations < 1 {
        return Err(FilterError::InvalidConfig(
            "max_outer_iterations must be at least 1",
        ));
    }
    if cfg.m < 1 {
        return Err(FilterError::InvalidGroupCount {
            m: cfg.m,
            n: corr.len(),
        });
    }
    if corr.len() < 4 {
        let message = format!(
            "{} vertices: below the 4-vertex descriptor minimum, passed through unfiltered",
            corr.len()
        );
        return Ok(FilterResult::pass_through(corr, message));
    }

    // One tolerance for the whole run, both graphs, every iteration.
    let eps = cfg.eps.unwrap_or_else(|| crate::geometry::auto_eps(corr));
    let inner_cfg = VtmConfig {
        eps: Some(eps),
        descriptor: cfg.descriptor.clone(),
    };

    let mut alive: Vec<bool> = vec![true; corr.len()];
    let mut deleted_order: Vec<VertexId> = Vec::new();
    let mut deleted_ever: HashSet<VertexId> = HashSet::new();
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut orientation_evals = 0u64;
    // Stall detection: the loop is deterministic, so an outer iteration
    // that reproduces an earlier (residual, recovery) state can only
    // repeat forever.
    let mut seen_states: HashSet<(Vec<VertexId>, Vec<VertexId>)> = HashSet::new();
    let mut termination = Termination::IterationCap;
    let mut model = None;
    let mut rms = None;

    for outer in 1..=cfg.max_outer_iterations {
        let alive_positions: Vec<usize> = (0..corr.len()).filter(|&i| alive[i]).collect();
        let residual_in = corr.subset(&alive_positions);

        // Inner filter pass to identical descriptors.
        let (inner, sensed_negated) = if cfg.m > 1 && residual_in.len() >= 4 {
            let m = cfg.m.min(residual_in.len());
            vtm_subdivided_inner(
                &residual_in,
                m,
                seeding::derive(cfg.seed, &[outer as u64]),
                &inner_cfg,
            )?
        } else {
            vtm_inner(&residual_in, &inner_cfg, None)?
        };
        for record in inner.trace {
            trace.push(TraceRecord {
                outer,
                event: record.event,
            });
        }
        orientation_evals += inner.orientation_evals;
        for &id in inner.deleted.ids() {
            let pos = corr.index_of(id).expect("id drawn from this set");
            alive[pos] = false;
            deleted_order.push(id);
            deleted_ever.insert(id);
        }
        let residual = inner.residual;

        // Transform estimate over the residual set.
        let theta = estimate_affine_lsm(&residual).map_err(|e| match e {
            GeometryError::DegenerateInput(_) | GeometryError::EmptySet => {
                FilterError::DegenerateResidual
            }
            other => FilterError::Geometry(other),
        })?;
        let e_max = max_individual_error(&residual, &theta);
        let e_bar = crate::geometry::rms_error(&residual, &theta)
            .expect("residual set non-empty after estimate");
        trace.push(TraceRecord {
            outer,
            event: TraceEvent::Estimated {
                n_residual: residual.len(),
                rms_error: e_bar,
                max_individual_error: e_max,
            },
        });
        model = Some(theta);
        rms = Some(e_bar);

        if e_bar < cfg.th_err {
            termination = Termination::Converged;
            break;
        }
        if outer == cfg.max_outer_iterations {
            termination = Termination::IterationCap;
            break;
        }

        // Restricted recovery: every deleted candidate, in deletion
        // order, judged against the residual set alone.
        let mut recovered_now: Vec<RecoveredCandidate> = Vec::new();
        for &id in &deleted_order {
            let pos = corr.index_of(id).expect("id drawn from this set");
            let (r, s) = corr.pair(pos);
            let err = individual_error(r, s, &theta);
            if err <= e_max
                && candidate_consistent(
                    residual.reference(),
                    residual.sensed(),
                    r,
                    s,
                    eps,
                    sensed_negated,
                )
            {
                recovered_now.push(RecoveredCandidate {
                    id,
                    individual_error: err,
                });
            }
        }

        let residual_ids = residual.ids().to_vec();
        let recovered_ids_now: Vec<VertexId> = recovered_now.iter().map(|c| c.id).collect();
        if !seen_states.insert((residual_ids, recovered_ids_now)) {
            termination = Termination::Stall;
            break;
        }

        if !recovered_now.is_empty() {
            let recovered_ids: HashSet<VertexId> =
                recovered_now.iter().map(|c| c.id).collect();
            for id in &recovered_ids {
                let pos = corr.index_of(*id).expect("id drawn from this set");
                alive[pos] = true;
            }
            deleted_order.retain(|id| !recovered_ids.contains(id));
            trace.push(TraceRecord {
                outer,
                event: TraceEvent::Recovered {
                    candidates: recovered_now,
                },
            });
        }
    }

    let residual_positions: Vec<usize> = (0..corr.len()).filter(|&i| alive[i]).collect();
    let residual = corr.subset(&residual_positions);
    let recovered_ids: Vec<VertexId> = residual
        .ids()
        .iter()
        .copied()
        .filter(|id| deleted_ever.contains(id))
        .collect();

    Ok(FilterResult {
        recovered: subset_by_ids(corr, &recovered_ids),
        deleted: subset_by_ids(corr, &deleted_order),
        residual,
        trace,
        termination,
        orientation_evals,
        model,
        rms,
    })
}

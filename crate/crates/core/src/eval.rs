//! Ground-truth classification, the four matching-quality metrics, and
//! the Monte-Carlo sweep harness.
//!
//! A pair counts as correct when its sensed point lies within 2 pixels
//! of its reference point mapped by the ground-truth transform. Residual
//! and deleted sets are tallied into the four confusion counts, from
//! which accuracy, specificity, precision and recall derive.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CorrespondenceSet;
use crate::ransac::{ransac_affine, RansacConfig};
use crate::rfvtm::{rfvtm, RfvtmConfig};
use crate::seeding;
use crate::synth::{generate_scene, GroundTruth, SceneConfig, SynthError};
use crate::vtm::{vtm_subdivided, DescriptorOptions, FilterResult, VtmConfig};

/// Correctness radius of the ground-truth rule, in pixels.
pub const GROUND_TRUTH_RADIUS_PX: f64 = 2.0;

#[derive(Debug, Error)]
pub enum EvalError {
    /// A filter result references ids outside the ground-truth domain,
    /// or does not partition the scene.
    #[error("id mismatch: {0}")]
    IdMismatch(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Confusion tallies: residual-correct, residual-false, deleted-correct,
/// deleted-false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub rc: u64,
    pub rf: u64,
    pub dc: u64,
    pub df: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.rc + self.rf + self.dc + self.df
    }
}

/// The four derived ratios; `None` marks an undefined value (zero
/// denominator), which is excluded from cross-trial averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: Option<f64>,
    pub spe: Option<f64>,
    pub pre: Option<f64>,
    pub rec: Option<f64>,
}

/// Splits the residual and deleted sets of a filter run into the four
/// confusion counts under the 2-pixel ground-truth rule.
pub fn classify(result: &FilterResult, truth: &GroundTruth) -> Result<ConfusionCounts, EvalError> {
    let domain = truth.labels.len() as u64;
    let mut counts = ConfusionCounts {
        rc: 0,
        rf: 0,
        dc: 0,
        df: 0,
    };
    let radius_sq = GROUND_TRUTH_RADIUS_PX * GROUND_TRUTH_RADIUS_PX;
    let mut tally = |set: &CorrespondenceSet, residual: bool| -> Result<(), EvalError> {
        for (id, r, s) in set.iter() {
            if id >= domain {
                return Err(EvalError::IdMismatch(format!(
                    "id {id} outside ground-truth domain of {domain}"
                )));
            }
            let correct = truth.transform.apply(r).squared_distance(&s) <= radius_sq;
            match (residual, correct) {
                (true, true) => counts.rc += 1,
                (true, false) => counts.rf += 1,
                (false, true) => counts.dc += 1,
                (false, false) => counts.df += 1,
            }
        }
        Ok(())
    };
    tally(&result.residual, true)?;
    tally(&result.deleted, false)?;
    if counts.total() != domain {
        return Err(EvalError::IdMismatch(format!(
            "result partitions {} pairs, scene has {domain}",
            counts.total()
        )));
    }
    Ok(counts)
}

/// Derives the four ratios from confusion counts. Ratios with a zero
/// denominator come back as `None`.
pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Metrics {
        acc: ratio(c.rc + c.df, c.total()),
        spe: ratio(c.df, c.df + c.rf),
        pre: ratio(c.rc, c.rc + c.rf),
        rec: ratio(c.rc, c.rc + c.dc),
    }
}

/// Filtering algorithms the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Vtm,
    Rfvtm,
    Ransac,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algorithm::Vtm => "vtm",
            Algorithm::Rfvtm => "rfvtm",
            Algorithm::Ransac => "ransac",
        };
        f.write_str(s)
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vtm" => Ok(Algorithm::Vtm),
            "rfvtm" => Ok(Algorithm::Rfvtm),
            "ransac" => Ok(Algorithm::Ransac),
            other => Err(format!(
                "unknown algorithm `{other}` (expected vtm, rfvtm or ransac)"
            )),
        }
    }
}

/// Sweep recipe: a base scene crossed with outlier ratios and
/// algorithms, `repeats` seeded trials per cell.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: SceneConfig,
    pub ratios: Vec<f64>,
    pub repeats: u32,
    pub algorithms: Vec<Algorithm>,
    /// Orientation tolerance override for the trichotomy filters.
    pub eps: Option<f64>,
    /// Fixed subdivision group count (1 = none).
    pub m: usize,
    /// RMS convergence threshold for the recovery filter.
    pub th_err: f64,
    pub ransac: RansacConfig,
    /// When a scene outgrows this many vertices the trichotomy filters
    /// subdivide into `ceil(N / target)` groups automatically (the
    /// descriptor cap would otherwise reject the scene outright).
    pub auto_group_target: usize,
}

impl SweepSpec {
    pub fn new(base: SceneConfig, ratios: Vec<f64>, repeats: u32, algorithms: Vec<Algorithm>) -> Self {
        Self {
            base,
            ratios,
            repeats,
            algorithms,
            eps: None,
            m: 1,
            th_err: 0.5,
            ransac: RansacConfig::default(),
            auto_group_target: 450,
        }
    }

    fn effective_groups(&self, scene_size: usize) -> usize {
        let auto = scene_size.div_ceil(self.auto_group_target.max(1));
        self.m.max(auto).min(scene_size.max(1))
    }
}

/// One aggregated sweep cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub outlier_ratio: f64,
    pub n_inliers: u32,
    pub repeats: u32,
    pub acc_mean: Option<f64>,
    pub acc_std: Option<f64>,
    pub spe_mean: Option<f64>,
    pub spe_std: Option<f64>,
    pub pre_mean: Option<f64>,
    pub pre_std: Option<f64>,
    pub rec_mean: Option<f64>,
    pub rec_std: Option<f64>,
    pub time_ms_mean: f64,
    /// Trials whose algorithm run returned an error.
    pub failures: u32,
}

struct TrialOutcome {
    metrics: Option<Metrics>,
    time_ms: f64,
}

/// Runs one algorithm on one scene, timing just the filter call.
pub fn run_algorithm(
    algorithm: Algorithm,
    corr: &CorrespondenceSet,
    spec: &SweepSpec,
    trial_seed: u64,
) -> (Result<FilterResult, crate::vtm::FilterError>, f64) {
    let start = Instant::now();
    let result = match algorithm {
        Algorithm::Vtm => {
            let cfg = VtmConfig {
                eps: spec.eps,
                descriptor: DescriptorOptions::default(),
            };
            let m = spec.effective_groups(corr.len());
            vtm_subdivided(corr, m, seeding::derive(trial_seed, &[1]), &cfg)
        }
        Algorithm::Rfvtm => {
            let cfg = RfvtmConfig {
                th_err: spec.th_err,
                eps: spec.eps,
                m: spec.effective_groups(corr.len()),
                seed: seeding::derive(trial_seed, &[2]),
                ..RfvtmConfig::default()
            };
            rfvtm(corr, &cfg)
        }
        Algorithm::Ransac => {
            let cfg = RansacConfig {
                seed: seeding::derive(trial_seed, &[3]),
                ..spec.ransac.clone()
            };
            ransac_affine(corr, &cfg)
        }
    };
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    (result, time_ms)
}

/// Runs the full sweep. Trials execute in parallel; every seed derives
/// from `(base seed, ratio index, repeat index)`, so the report is
/// independent of scheduling. Rows come back ordered by ratio index,
/// then algorithm order. Per-trial algorithm failures are counted per
/// cell without aborting the sweep.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, EvalError> {
    if spec.repeats < 1 {
        return Err(EvalError::Synth(SynthError::InvalidConfig(
            "repeats must be at least 1",
        )));
    }
    let cells: Vec<(usize, f64)> = spec.ratios.iter().copied().enumerate().collect();
    let mut rows = Vec::with_capacity(cells.len() * spec.algorithms.len());
    for (ratio_idx, ratio) in cells {
        // Scenes are shared across algorithms within a trial, so the
        // comparison is paired.
        let trials: Vec<Vec<TrialOutcome>> = (0..spec.repeats)
            .into_par_iter()
            .map(|rep| {
                let trial_seed = seeding::derive(spec.base.seed, &[ratio_idx as u64, rep as u64]);
                let cfg = SceneConfig {
                    outlier_ratio: ratio,
                    seed: trial_seed,
                    ..spec.base.clone()
                };
                let (corr, truth) = generate_scene(&cfg).expect("validated scene config");
                spec.algorithms
                    .iter()
                    .map(|&algorithm| {
                        let (result, time_ms) =
                            run_algorithm(algorithm, &corr, spec, trial_seed);
                        let metrics = result.ok().and_then(|r| {
                            classify(&r, &truth).ok().map(|c| metrics(&c))
                        });
                        TrialOutcome { metrics, time_ms }
                    })
                    .collect()
            })
            .collect();

        for (ai, &algorithm) in spec.algorithms.iter().enumerate() {
            let outcomes: Vec<&TrialOutcome> = trials.iter().map(|t| &t[ai]).collect();
            rows.push(aggregate_cell(algorithm, ratio, spec, &outcomes));
        }
    }
    Ok(rows)
}

fn aggregate_cell(
    algorithm: Algorithm,
    ratio: f64,
    spec: &SweepSpec,
    outcomes: &[&TrialOutcome],
) -> SweepRow {
    let failures = outcomes.iter().filter(|o| o.metrics.is_none()).count() as u32;
    let pick = |f: fn(&Metrics) -> Option<f64>| -> Vec<f64> {
        outcomes
            .iter()
            .filter_map(|o| o.metrics.as_ref().and_then(f))
            .collect()
    };
    let acc = mean_std(&pick(|m| m.acc));
    let spe = mean_std(&pick(|m| m.spe));
    let pre = mean_std(&pick(|m| m.pre));
    let rec = mean_std(&pick(|m| m.rec));
    let times: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.metrics.is_some())
        .map(|o| o.time_ms)
        .collect();
    let time_ms_mean = if times.is_empty() {
        0.0
    } else {
        times.iter().sum::<f64>() / times.len() as f64
    };
    SweepRow {
        algorithm,
        outlier_ratio: ratio,
        n_inliers: spec.base.n_inliers,
        repeats: spec.repeats,
        acc_mean: acc.0,
        acc_std: acc.1,
        spe_mean: spe.0,
        spe_std: spe.1,
        pre_mean: pre.0,
        pre_std: pre.1,
        rec_mean: rec.0,
        rec_std: rec.1,
        time_ms_mean,
        failures,
    }
}

/// Sample mean and standard deviation (n−1 denominator; 0 for a single
/// value), `None` when no defined values exist.
fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

/// Writes the report CSV: fixed header, `.` decimal separator, empty
/// cells for undefined metrics.
pub fn write_report_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "algorithm,outlier_ratio,n_inliers,repeats,acc_mean,acc_std,spe_mean,spe_std,\
         pre_mean,pre_std,rec_mean,rec_std,time_ms_mean,failures"
    )?;
    for row in rows {
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{}",
            row.algorithm,
            row.outlier_ratio,
            row.n_inliers,
            row.repeats,
            cell(row.acc_mean),
            cell(row.acc_std),
            cell(row.spe_mean),
            cell(row.spe_std),
            cell(row.pre_mean),
            cell(row.pre_std),
            cell(row.rec_mean),
            cell(row.rec_std),
            row.time_ms_mean,
            row.failures,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::general_points;
    use crate::geometry::{AffineTransform, Point2};
    use crate::vtm::{vtm, VtmConfig};
    use approx::assert_abs_diff_eq;

    fn perfect_result(corr: &CorrespondenceSet, residual_of: usize) -> FilterResult {
        let residual: Vec<usize> = (0..residual_of).collect();
        let deleted: Vec<usize> = (residual_of..corr.len()).collect();
        FilterResult {
            residual: corr.subset(&residual),
            deleted: corr.subset(&deleted),
            recovered: CorrespondenceSet::from_pairs(std::iter::empty()),
            trace: Vec::new(),
            termination: crate::vtm::Termination::Converged,
            orientation_evals: 0,
            model: None,
            rms: None,
        }
    }

    fn scene_with_tail_outliers(n_in: usize, n_out: usize) -> (CorrespondenceSet, GroundTruth) {
        let pts = general_points(n_in + n_out, 41);
        let pairs: Vec<(Point2, Point2)> = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let p = Point2::new(x, y);
                if i < n_in {
                    (p, p)
                } else {
                    (p, Point2::new(x + 40.0, y - 25.0))
                }
            })
            .collect();
        let labels = (0..n_in + n_out).map(|i| i < n_in).collect();
        (
            CorrespondenceSet::from_pairs(pairs),
            GroundTruth {
                transform: AffineTransform::IDENTITY,
                labels,
            },
        )
    }

    #[test]
    fn perfect_filter_classification() {
        let (corr, truth) = scene_with_tail_outliers(10, 5);
        let result = perfect_result(&corr, 10);
        let counts = classify(&result, &truth).unwrap();
        assert_eq!(
            counts,
            ConfusionCounts {
                rc: 10,
                rf: 0,
                dc: 0,
                df: 5
            }
        );
    }

    #[test]
    fn delete_everything_classification() {
        let (corr, truth) = scene_with_tail_outliers(10, 5);
        let result = perfect_result(&corr, 0);
        let counts = classify(&result, &truth).unwrap();
        assert_eq!(
            counts,
            ConfusionCounts {
                rc: 0,
                rf: 0,
                dc: 10,
                df: 5
            }
        );
    }

    #[test]
    fn classification_rejects_foreign_ids() {
        let (corr, truth) = scene_with_tail_outliers(6, 0);
        let result = perfect_result(&corr, 6);
        let short_truth = GroundTruth {
            transform: truth.transform,
            labels: truth.labels[..4].to_vec(),
        };
        assert!(classify(&result, &short_truth).is_err());
    }

    #[test]
    fn metrics_worked_example() {
        let m = metrics(&ConfusionCounts {
            rc: 5,
            rf: 1,
            dc: 1,
            df: 3,
        });
        assert_abs_diff_eq!(m.acc.unwrap(), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(m.spe.unwrap(), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(m.pre.unwrap(), 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.rec.unwrap(), 5.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn metrics_zero_denominators_are_undefined() {
        let m = metrics(&ConfusionCounts {
            rc: 10,
            rf: 0,
            dc: 0,
            df: 0,
        });
        assert_eq!(m.pre, Some(1.0));
        assert_eq!(m.rec, Some(1.0));
        assert_eq!(m.spe, None);
        let empty = metrics(&ConfusionCounts {
            rc: 0,
            rf: 0,
            dc: 0,
            df: 0,
        });
        assert_eq!(empty.acc, None);
    }

    #[test]
    fn accuracy_is_one_exactly_when_no_misclassifications_remain() {
        let (corr, truth) = scene_with_tail_outliers(12, 4);
        let out = vtm(&corr, &VtmConfig::default()).unwrap();
        let counts = classify(&out, &truth).unwrap();
        let m = metrics(&counts);
        assert_eq!(m.acc == Some(1.0), counts.rf == 0 && counts.dc == 0);
    }

    #[test]
    fn sweep_single_clean_ratio_is_perfect() {
        let base = SceneConfig {
            n_inliers: 12,
            seed: 2,
            ..SceneConfig::default()
        };
        let spec = SweepSpec::new(
            base,
            vec![0.0],
            1,
            vec![Algorithm::Vtm, Algorithm::Rfvtm, Algorithm::Ransac],
        );
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert_eq!(row.failures, 0);
            assert_eq!(row.acc_mean, Some(1.0));
            assert_eq!(row.pre_mean, Some(1.0));
            assert_eq!(row.rec_mean, Some(1.0));
            assert_eq!(row.spe_mean, None);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let base = SceneConfig {
            n_inliers: 15,
            noise_sigma: 0.5,
            seed: 31,
            ..SceneConfig::default()
        };
        let spec = SweepSpec::new(base, vec![0.2, 0.4], 4, vec![Algorithm::Vtm, Algorithm::Ransac]);
        let a = sweep(&spec).unwrap();
        let b = sweep(&spec).unwrap();
        let strip = |rows: &[SweepRow]| -> Vec<String> {
            rows.iter()
                .map(|r| {
                    format!(
                        "{} {} {:?} {:?} {:?} {:?} {}",
                        r.algorithm, r.outlier_ratio, r.acc_mean, r.spe_mean, r.pre_mean,
                        r.rec_mean, r.failures
                    )
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn csv_has_the_fixed_header_and_one_row_per_cell() {
        let base = SceneConfig {
            n_inliers: 10,
            seed: 6,
            ..SceneConfig::default()
        };
        let spec = SweepSpec::new(base, vec![0.0, 0.3], 2, vec![Algorithm::Vtm]);
        let rows = sweep(&spec).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("algorithm,outlier_ratio,n_inliers,repeats,acc_mean"));
        assert!(lines[0].ends_with("time_ms_mean,failures"));
        assert!(lines[1].starts_with("vtm,0,10,2,"));
    }
}

//! Scale-dependent analysis: how the estimated dimension changes with the
//! neighborhood size the estimator looks at.
//!
//! Two protocols:
//!
//! * [`gride_sweep`] keeps the order ratio `n2/n1` fixed and grows `n1`
//!   geometrically, fitting the generic-ratio likelihood on the *full*
//!   dataset at every row; the mean neighbor distance of each row is the
//!   length scale the estimate refers to.
//! * [`twonn_decimation_sweep`] estimates with the (1, 2) ratio on random
//!   subsets of shrinking size, the classic way of enlarging the typical
//!   neighbor distance at the cost of discarding data.
//!
//! Rows are pure functions of `(input, parameters, seed)`: per-row seeds are
//! derived from the row identity, never the schedule, so re-running any
//! single row reproduces the batch value bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::{gride_mle, twonn_mle, IdEstimate, Uncertainty};
use crate::exec;
use crate::geometry::{decimate, generic_ratios, knn_table, Metric, NeighborTable, PointCloud};
use crate::rng::derive_seed;
use crate::stats;

/// One row of a scale sweep: the orders used, the mean neighbor distance
/// they reach, and the estimate at that scale.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n1: usize,
    pub n2: usize,
    pub mean_scale: f64,
    pub estimate: IdEstimate,
}

/// A scale sweep, ordered by increasing `n1` (respectively decimation step).
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub ratio: usize,
    pub dataset: String,
}

impl SweepTable {
    /// CSV export with the documented column order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n1,n2,mean_scale,d_hat,ci_low,ci_high,level,n_eff,method\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.n1,
                row.n2,
                row.mean_scale,
                row.estimate.d_hat,
                row.estimate.interval_low,
                row.estimate.interval_high,
                row.estimate.level,
                row.estimate.n_eff,
                row.estimate.method,
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// The geometric order grid `1, 2, 4, ..., <= max_n1`.
pub fn geometric_orders(max_n1: usize) -> Vec<usize> {
    let mut orders = Vec::new();
    let mut n1 = 1;
    while n1 <= max_n1 {
        orders.push(n1);
        n1 *= 2;
    }
    orders
}

/// Generic-ratio sweep at fixed order ratio: one likelihood fit per
/// `(n1, ratio * n1)` pair, every fit using the full dataset behind `table`.
/// Per-row seeds derive from `n1`, so any single row can be reproduced in
/// isolation.
pub fn gride_sweep(
    table: &NeighborTable,
    ratio: usize,
    n1_values: &[usize],
    level: f64,
    uncertainty: Uncertainty,
    seed: u64,
    dataset: &str,
) -> Result<SweepTable> {
    if ratio < 2 {
        return Err(Error::InvalidArgument(format!(
            "order ratio must be at least 2, got {ratio}"
        )));
    }
    if n1_values.is_empty() {
        return Err(Error::InvalidArgument("empty n1 grid".into()));
    }
    let mut orders: Vec<usize> = n1_values.to_vec();
    orders.sort_unstable();
    orders.dedup();
    if orders[0] < 1 {
        return Err(Error::InvalidArgument(
            "n1 values must be at least 1".into(),
        ));
    }
    let needed = orders.last().unwrap() * ratio;
    if needed > table.k() {
        return Err(Error::InvalidArgument(format!(
            "sweep needs a neighbor table of order K >= {needed}, got K = {}",
            table.k()
        )));
    }
    let rows = exec::try_map_indexed(orders.len(), |i| {
        let n1 = orders[i];
        let n2 = ratio * n1;
        let ratios = generic_ratios(table, n1, n2)?;
        let estimate = gride_mle(&ratios, level, uncertainty, derive_seed(seed, n1 as u64))?;
        Ok(SweepRow {
            n1,
            n2,
            mean_scale: ratios.mean_scale(),
            estimate,
        })
    })?;
    Ok(SweepTable {
        rows,
        ratio,
        dataset: dataset.to_string(),
    })
}

/// TWO-NN estimation on random subsets whose size halves at every step.
/// Each step runs `replicates` independent subsets; the row reports the mean
/// estimate with a normal-theory interval of the mean (or, for a single
/// replicate, that replicate's own exact interval) and the mean neighbor
/// scale of the subsets. Per-task seeds derive from `(step, replicate)`.
pub fn twonn_decimation_sweep(
    cloud: &PointCloud,
    halvings: usize,
    replicates: usize,
    level: f64,
    seed: u64,
    dataset: &str,
) -> Result<SweepTable> {
    if replicates < 1 {
        return Err(Error::InvalidArgument(
            "need at least 1 replicate per step".into(),
        ));
    }
    let n = cloud.len();
    let final_size = (n as f64 * 0.5f64.powi(halvings as i32)).round() as usize;
    if final_size < 10 {
        return Err(Error::InvalidArgument(format!(
            "deepest decimation step would keep {final_size} points; need at least 10"
        )));
    }

    let steps = halvings + 1;
    let outcomes: Vec<(f64, f64, usize, IdEstimate)> =
        exec::try_map_indexed(steps * replicates, |task| {
            let step = task / replicates;
            let replicate = task % replicates;
            let task_seed = derive_seed(seed, ((step as u64) << 32) | replicate as u64);
            let subset = decimate(cloud, 0.5f64.powi(step as i32), task_seed)?;
            let table = knn_table(&subset, 2, Metric::Euclidean)?;
            let ratios = generic_ratios(&table, 1, 2)?;
            let estimate = twonn_mle(&ratios, level)?;
            Ok((estimate.d_hat, ratios.mean_scale(), subset.len(), estimate))
        })?;

    let z = crate::distributions::normal_quantile(1.0 - (1.0 - level) / 2.0)?;
    let mut rows = Vec::with_capacity(steps);
    for step in 0..steps {
        let chunk = &outcomes[step * replicates..(step + 1) * replicates];
        let estimates: Vec<f64> = chunk.iter().map(|c| c.0).collect();
        let scales: Vec<f64> = chunk.iter().map(|c| c.1).collect();
        let subset_size = chunk[0].2;
        let mean_scale = stats::mean(&scales);
        let estimate = if replicates == 1 {
            chunk[0].3.clone()
        } else {
            let mean = stats::mean(&estimates);
            let half_width = z * stats::std_dev(&estimates) / (replicates as f64).sqrt();
            IdEstimate {
                d_hat: mean,
                interval_low: (mean - half_width).max(0.0),
                interval_high: mean + half_width,
                level,
                method: "twonn-decimation".to_string(),
                n_eff: subset_size,
                scale: mean_scale,
            }
        };
        rows.push(SweepRow {
            n1: 1,
            n2: 2,
            mean_scale,
            estimate,
        });
    }
    Ok(SweepTable {
        rows,
        ratio: 2,
        dataset: dataset.to_string(),
    })
}

/// Mean and normal-theory interval of an estimator replayed over freshly
/// generated data: `run` receives a derived seed per repetition and returns
/// one estimate.
#[derive(Debug, Clone, Copy)]
pub struct RepeatSummary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub repetitions: usize,
}

pub fn repeated_estimate_summary<F>(
    repetitions: usize,
    level: f64,
    seed: u64,
    run: F,
) -> Result<RepeatSummary>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    if repetitions < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 repetitions, got {repetitions}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "interval level must lie in (0, 1), got {level}"
        )));
    }
    let estimates = exec::try_map_indexed(repetitions, |rep| run(derive_seed(seed, rep as u64)))?;
    let mean = stats::mean(&estimates);
    let z = crate::distributions::normal_quantile(1.0 - (1.0 - level) / 2.0)?;
    let half_width = z * stats::std_dev(&estimates) / (repetitions as f64).sqrt();
    Ok(RepeatSummary {
        mean,
        ci_low: mean - half_width,
        ci_high: mean + half_width,
        level,
        repetitions,
    })
}

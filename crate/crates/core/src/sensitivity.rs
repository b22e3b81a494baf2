//! Partition distance and average-sensitivity estimation.
//!
//! The distance between two partitions is the minimum, over matchings of
//! their blocks, of the summed symmetric differences of matched blocks; the
//! side with fewer blocks is padded with empty ones. Sensitivity compares the
//! `k`-block output on the full data with the output after deleting points.
//! Randomized algorithms run both sides on one shared stream per trial.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::Algorithm;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::stream::{derive_seed, stream, Stream, TAG_ALGORITHM, TAG_DELETION};

/// Largest block count accepted by [`partition_distance_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 8;

/// `cost[i][j] = |A_i △ B_j|` over a square matrix padded with empty blocks.
fn mismatch_matrix(a: &Partition, b: &Partition) -> Vec<Vec<i64>> {
    let m = a.num_blocks().max(b.num_blocks());
    let b_index = b.block_index();
    let size = |blocks: &[Vec<usize>], i: usize| blocks.get(i).map_or(0, |x| x.len()) as i64;
    let mut cost = vec![vec![0i64; m]; m];
    for (i, row) in cost.iter_mut().enumerate() {
        let mut common = vec![0i64; m];
        if let Some(block) = a.blocks().get(i) {
            for id in block {
                if let Some(&j) = b_index.get(id) {
                    common[j] += 1;
                }
            }
        }
        for (j, c) in row.iter_mut().enumerate() {
            *c = size(a.blocks(), i) + size(b.blocks(), j) - 2 * common[j];
        }
    }
    cost
}

/// Minimum-cost perfect matching on a square matrix.
fn hungarian(cost: &[Vec<i64>]) -> i64 {
    let m = cost.len();
    if m == 0 {
        return 0;
    }
    // potentials and matching, 1-based with a sentinel column 0
    let mut u = vec![0i64; m + 1];
    let mut v = vec![0i64; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).map(|j| cost[row_of[j] - 1][j - 1]).sum()
}

/// Minimum total symmetric difference over block matchings.
pub fn partition_distance(a: &Partition, b: &Partition) -> usize {
    hungarian(&mismatch_matrix(a, b)) as usize
}

/// [`partition_distance`] by enumerating every matching.
pub fn partition_distance_bruteforce(a: &Partition, b: &Partition) -> Result<usize> {
    let m = a.num_blocks().max(b.num_blocks());
    if m > BRUTEFORCE_LIMIT {
        return Err(Error::SizeGuard {
            size: m,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let cost = mismatch_matrix(a, b);
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = i64::MAX;
    permute(&mut perm, 0, &mut |p| {
        best = best.min(p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum());
    });
    Ok(best.max(0) as usize)
}

fn permute(perm: &mut [usize], start: usize, f: &mut impl FnMut(&[usize])) {
    if start + 1 >= perm.len() {
        f(perm);
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        permute(perm, start + 1, f);
        perm.swap(start, i);
    }
}

/// Which points each trial deletes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DeletionSchedule {
    /// One trial per point, deleting that point.
    SinglePointAll,
    /// `trials` trials, each deleting `count` uniformly random points.
    RandomCount { count: usize, trials: usize },
    /// `trials` trials, each deleting `round(fraction * n)` random points (at least one).
    RandomFraction { fraction: f64, trials: usize },
}

impl DeletionSchedule {
    /// Parses `point`, `count:N`, or `frac:F`.
    pub fn parse(spec: &str, trials: usize) -> Result<Self> {
        let schedule = match spec.split_once(':') {
            None if spec == "point" => DeletionSchedule::SinglePointAll,
            Some(("count", n)) => DeletionSchedule::RandomCount {
                count: n
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad deletion count `{n}`")))?,
                trials,
            },
            Some(("frac", f)) => DeletionSchedule::RandomFraction {
                fraction: f
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad deletion fraction `{f}`")))?,
                trials,
            },
            _ => return Err(Error::invalid(format!("unknown deletion schedule `{spec}`"))),
        };
        Ok(schedule)
    }

    /// Number of trials and points deleted per trial on `n` points.
    pub fn resolve(&self, n: usize) -> Result<(usize, usize)> {
        let (trials, count) = match *self {
            DeletionSchedule::SinglePointAll => (n, 1),
            DeletionSchedule::RandomCount { count, trials } => (trials, count),
            DeletionSchedule::RandomFraction { fraction, trials } => {
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(Error::invalid(format!("deletion fraction {fraction} outside (0, 1)")));
                }
                (trials, ((fraction * n as f64).round() as usize).max(1))
            }
        };
        if trials == 0 {
            return Err(Error::invalid("at least one trial is required"));
        }
        if count == 0 || count >= n {
            return Err(Error::invalid(format!(
                "deleting {count} of {n} points leaves nothing to compare"
            )));
        }
        Ok((trials, count))
    }
}

impl fmt::Display for DeletionSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeletionSchedule::SinglePointAll => f.write_str("point"),
            DeletionSchedule::RandomCount { count, .. } => write!(f, "count:{count}"),
            DeletionSchedule::RandomFraction { fraction, .. } => write!(f, "frac:{fraction}"),
        }
    }
}

impl FromStr for DeletionSchedule {
    type Err = Error;

    /// Parses with a single trial; see [`DeletionSchedule::parse`].
    fn from_str(s: &str) -> Result<Self> {
        DeletionSchedule::parse(s, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionRecord {
    pub trial: usize,
    pub deleted: Vec<usize>,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub algorithm: Algorithm,
    pub k: usize,
    pub n: usize,
    /// `None` for exact runs, which use no randomness.
    pub master_seed: Option<u64>,
    pub schedule: DeletionSchedule,
    pub records: Vec<DeletionRecord>,
    pub mean: f64,
    pub stddev: f64,
}

impl SensitivityReport {
    fn new(
        algorithm: Algorithm,
        k: usize,
        n: usize,
        master_seed: Option<u64>,
        schedule: DeletionSchedule,
        records: Vec<DeletionRecord>,
    ) -> Self {
        let m = records.len() as f64;
        let mean = records.iter().map(|r| r.distance as f64).sum::<f64>() / m;
        let var = if records.len() > 1 {
            records.iter().map(|r| (r.distance as f64 - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        SensitivityReport {
            algorithm,
            k,
            n,
            master_seed,
            schedule,
            records,
            mean,
            stddev: var.sqrt(),
        }
    }

    /// Writes `trial,deleted_ids,distance` rows; deleted ids are `;`-separated.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "trial,deleted_ids,distance")?;
        for r in &self.records {
            let ids: Vec<String> = r.deleted.iter().map(usize::to_string).collect();
            writeln!(out, "{},{},{}", r.trial, ids.join(";"), r.distance)?;
        }
        Ok(())
    }

    /// Everything except the per-trial records.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "algorithm": self.algorithm,
            "k": self.k,
            "n": self.n,
            "master_seed": self.master_seed,
            "schedule": self.schedule,
            "trials": self.records.len(),
            "mean": self.mean,
            "stddev": self.stddev,
        })
    }
}

fn check_k(ds: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k > ds.len() {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", ds.len())));
    }
    if ds.len() < 2 {
        return Err(Error::invalid("sensitivity needs at least two points"));
    }
    Ok(())
}

/// Compares the `k`-block outputs on `ds` and on `ds` minus `deleted`, both
/// run on fresh clones of `alg_stream`. The reduced run is cut at
/// `min(k, remaining points)` blocks.
fn deletion_distance(
    alg: &Algorithm,
    ds: &Dataset,
    k: usize,
    deleted: &[usize],
    alg_seed: u64,
    baseline: Option<&Partition>,
) -> Result<usize> {
    let rng = || Stream::seed_from_u64(alg_seed);
    let full = match baseline {
        Some(p) => p.clone(),
        None => alg.partition_at(ds, k, &mut rng())?,
    };
    let reduced = ds.without(deleted)?;
    let kr = k.min(reduced.len());
    let part = alg.partition_at(&reduced, kr, &mut rng())?;
    Ok(partition_distance(&full, &part))
}

/// Average over every single-point deletion of a deterministic algorithm.
pub fn avg_sensitivity_exact(alg: &Algorithm, ds: &Dataset, k: usize) -> Result<SensitivityReport> {
    if !alg.is_deterministic() {
        return Err(Error::invalid(format!(
            "{alg} is randomized; use the empirical estimator"
        )));
    }
    check_k(ds, k)?;
    let baseline = alg.partition_at(ds, k, &mut stream(0, &[]))?;
    let records = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let id = ds.id(i);
            Ok(DeletionRecord {
                trial: i,
                deleted: vec![id],
                distance: deletion_distance(alg, ds, k, &[id], 0, Some(&baseline))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityReport::new(
        *alg,
        k,
        ds.len(),
        None,
        DeletionSchedule::SinglePointAll,
        records,
    ))
}

/// Shared-seed estimate: trial `t` derives one algorithm stream from
/// `(master_seed, t)` and runs both the full and the reduced input on it.
/// Deleted points come from a separate stream.
pub fn avg_sensitivity_empirical(
    alg: &Algorithm,
    ds: &Dataset,
    k: usize,
    schedule: &DeletionSchedule,
    master_seed: u64,
) -> Result<SensitivityReport> {
    check_k(ds, k)?;
    let (trials, count) = schedule.resolve(ds.len())?;
    let baseline = if alg.is_deterministic() {
        Some(alg.partition_at(ds, k, &mut stream(0, &[]))?)
    } else {
        None
    };
    let records = (0..trials)
        .into_par_iter()
        .map(|t| {
            let deleted: Vec<usize> = match schedule {
                DeletionSchedule::SinglePointAll => vec![ds.id(t)],
                _ => {
                    let mut del_rng = stream(master_seed, &[t as u64, TAG_DELETION]);
                    let mut ids: Vec<usize> = sample(&mut del_rng, ds.len(), count)
                        .into_iter()
                        .map(|p| ds.id(p))
                        .collect();
                    ids.sort_unstable();
                    ids
                }
            };
            let seed = derive_seed(master_seed, &[t as u64, TAG_ALGORITHM]);
            let distance = deletion_distance(alg, ds, k, &deleted, seed, baseline.as_ref())?;
            Ok(DeletionRecord {
                trial: t,
                deleted,
                distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityReport::new(
        *alg,
        k,
        ds.len(),
        Some(master_seed),
        *schedule,
        records,
    ))
}

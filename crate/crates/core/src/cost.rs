//! Euclidean k-median cost and exhaustive oracles.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Absolute tolerance used when comparing costs.
pub const COST_TOL: f64 = 1e-9;

/// Default size limit for [`opt_kmedian_discrete`].
pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 15;

/// Sum over all points of the distance to the nearest center.
pub fn kmedian_cost(ds: &Dataset, centers: &[usize]) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::invalid("center set must be nonempty"));
    }
    let pos = centers
        .iter()
        .map(|&id| ds.position_of(id).ok_or(Error::UnknownId(id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(cost_of_positions(ds, &pos))
}

pub(crate) fn cost_of_positions(ds: &Dataset, centers: &[usize]) -> f64 {
    (0..ds.len())
        .map(|p| centers.iter().map(|&c| ds.dist_pos(p, c)).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Exhaustive k-median over centers drawn from the input points.
///
/// Returns the lexicographically smallest optimal id set. Refuses inputs
/// with more than `limit` points.
pub fn opt_kmedian_discrete(ds: &Dataset, k: usize, limit: usize) -> Result<(Vec<usize>, f64)> {
    let n = ds.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
    }
    if n > limit {
        return Err(Error::SizeGuard { size: n, limit });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_combination(n, k, |combo| {
        let c = cost_of_positions(ds, combo);
        if best.as_ref().is_none_or(|(_, b)| c < b - COST_TOL) {
            best = Some((combo.to_vec(), c));
        }
    });
    let (pos, c) = best.expect("at least one combination");
    Ok((pos.into_iter().map(|p| ds.id(p)).collect(), c))
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        f(&combo);
        let Some(i) = (0..k).rev().find(|&i| combo[i] != i + n - k) else {
            return;
        };
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// The point of `block` minimizing the summed distance to the block, with
/// that sum. Ties go to the smallest id.
pub fn medoid(ds: &Dataset, block: &[usize]) -> Result<(usize, f64)> {
    let pos = block
        .iter()
        .map(|&id| ds.position_of(id).ok_or(Error::UnknownId(id)))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, f64)> = None;
    for &c in &pos {
        let total: f64 = pos.iter().map(|&p| ds.dist_pos(p, c)).sum();
        let better = match best {
            None => true,
            Some((b, bc)) => total < bc - COST_TOL || (total <= bc + COST_TOL && ds.id(c) < b),
        };
        if better {
            best = Some((ds.id(c), total));
        }
    }
    best.ok_or_else(|| Error::invalid("empty block"))
}

/// k-median cost of a center-free partition, scoring each block by its medoid.
pub fn medoid_cost(ds: &Dataset, partition: &Partition) -> Result<(Vec<usize>, f64)> {
    let mut centers = Vec::with_capacity(partition.num_blocks());
    let mut total = 0.0;
    for block in partition.blocks() {
        let (c, cost) = medoid(ds, block)?;
        centers.push(c);
        total += cost;
    }
    Ok((centers, total))
}

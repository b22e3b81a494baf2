//! Agglomerative clustering with single, complete, average and Ward linkage.
//!
//! [`agglomerate`] keeps a full distance matrix updated by the Lance–Williams
//! recurrences and caches each row's nearest partner. [`agglomerate_naive`]
//! rescans every pair of blocks each round with [`linkage_cost`] and serves
//! as the reference.
//!
//! Merges are chosen by the smallest `(cost, min id of A, min id of B)` with
//! `A` the block holding the smaller id.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{dist, sq_dist, Dataset};
use crate::error::{Error, Result};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageKind {
    Single,
    Complete,
    Average,
    Ward,
}

impl LinkageKind {
    pub const ALL: [LinkageKind; 4] = [
        LinkageKind::Single,
        LinkageKind::Complete,
        LinkageKind::Average,
        LinkageKind::Ward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LinkageKind::Single => "single",
            LinkageKind::Complete => "complete",
            LinkageKind::Average => "average",
            LinkageKind::Ward => "ward",
        }
    }
}

impl fmt::Display for LinkageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LinkageKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown linkage `{s}`")))
    }
}

fn centroid(points: &[&[f64]]) -> Vec<f64> {
    let mut c = vec![0.0; points[0].len()];
    for p in points {
        for (ci, x) in c.iter_mut().zip(*p) {
            *ci += x;
        }
    }
    let n = points.len() as f64;
    c.iter_mut().for_each(|x| *x /= n);
    c
}

fn scatter(points: &[&[f64]]) -> f64 {
    let mu = centroid(points);
    points.iter().map(|p| sq_dist(p, &mu)).sum()
}

/// Linkage between two disjoint nonempty blocks of ids.
///
/// Ward is the increase in within-block sum of squared deviations caused by
/// merging `a` and `b`.
pub fn linkage_cost(ds: &Dataset, a: &[usize], b: &[usize], kind: LinkageKind) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("linkage needs two nonempty blocks"));
    }
    if let Some(id) = a.iter().find(|id| b.contains(id)) {
        return Err(Error::invalid(format!("id {id} is in both blocks")));
    }
    let pa = a.iter().map(|&id| ds.point_by_id(id)).collect::<Result<Vec<_>>>()?;
    let pb = b.iter().map(|&id| ds.point_by_id(id)).collect::<Result<Vec<_>>>()?;
    Ok(linkage_points(&pa, &pb, kind))
}

fn linkage_points(pa: &[&[f64]], pb: &[&[f64]], kind: LinkageKind) -> f64 {
    let pairs = || pa.iter().flat_map(|p| pb.iter().map(move |q| dist(p, q)));
    match kind {
        LinkageKind::Single => pairs().fold(f64::INFINITY, f64::min),
        LinkageKind::Complete => pairs().fold(0.0, f64::max),
        LinkageKind::Average => pairs().sum::<f64>() / (pa.len() * pb.len()) as f64,
        LinkageKind::Ward => {
            let both: Vec<&[f64]> = pa.iter().chain(pb).copied().collect();
            (scatter(&both) - scatter(pa) - scatter(pb)).max(0.0)
        }
    }
}

/// One agglomeration step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smallest id of the first block.
    pub a: usize,
    /// Smallest id of the second block; always greater than `a`.
    pub b: usize,
    pub size_a: usize,
    pub size_b: usize,
    pub cost: f64,
    /// Number of blocks after the merge.
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    ids: Vec<usize>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// The partition into `k` blocks, after `n - k` merges.
    pub fn cut(&self, k: usize) -> Result<Partition> {
        let n = self.ids.len();
        if k == 0 || k > n {
            return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let pos = |id: usize| self.ids.binary_search(&id).expect("merge ids come from the dataset");
        for m in &self.merges[..n - k] {
            let (ra, rb) = (find(&mut parent, pos(m.a)), find(&mut parent, pos(m.b)));
            parent[ra.max(rb)] = ra.min(rb);
        }
        Ok(Partition::from_labels(
            (0..n).map(|p| (self.ids[p], find(&mut parent, p))),
        ))
    }

    /// Cuts at every `k` from 1 to `n`.
    pub fn levels(&self) -> Vec<Partition> {
        (1..=self.ids.len()).map(|k| self.cut(k).expect("k in range")).collect()
    }
}

fn key_less(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

/// Lance–Williams agglomeration in `O(n^2)` memory.
pub fn agglomerate(ds: &Dataset, kind: LinkageKind) -> Dendrogram {
    let n = ds.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = match kind {
                LinkageKind::Ward => 0.5 * sq_dist(ds.point(i), ds.point(j)),
                _ => ds.dist_pos(i, j),
            };
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    // nn[i]: best partner j > i of row i
    let mut nn: Vec<Option<usize>> = vec![None; n];
    let row_best = |d: &[f64], active: &[bool], i: usize| -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in i + 1..n {
            if active[j] && best.is_none_or(|b| d[i * n + j] < d[i * n + b]) {
                best = Some(j);
            }
        }
        best
    };
    for (i, slot) in nn.iter_mut().enumerate() {
        *slot = row_best(&d, &active, i);
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if let (true, Some(j)) = (active[i], nn[i]) {
                let cand = (d[i * n + j], i, j);
                if best.is_none_or(|b| key_less(cand, b)) {
                    best = Some(cand);
                }
            }
        }
        let (cost, i, j) = best.expect("at least two active blocks");
        merges.push(Merge {
            a: ds.id(i),
            b: ds.id(j),
            size_a: size[i],
            size_b: size[j],
            cost,
            level: n - step - 1,
        });
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (d[i * n + k], d[j * n + k]);
            let v = match kind {
                LinkageKind::Single => dik.min(djk),
                LinkageKind::Complete => dik.max(djk),
                LinkageKind::Average => (ni * dik + nj * djk) / (ni + nj),
                LinkageKind::Ward => {
                    let nk = size[k] as f64;
                    ((ni + nk) * dik + (nj + nk) * djk - nk * cost) / (ni + nj + nk)
                }
            };
            d[i * n + k] = v;
            d[k * n + i] = v;
        }
        active[j] = false;
        size[i] += size[j];
        nn[j] = None;
        for r in 0..n {
            if !active[r] {
                continue;
            }
            if r == i || nn[r] == Some(i) || nn[r] == Some(j) {
                nn[r] = row_best(&d, &active, r);
            } else if r < i {
                if let Some(b) = nn[r] {
                    if key_less((d[r * n + i], r, i), (d[r * n + b], r, b)) {
                        nn[r] = Some(i);
                    }
                }
            }
        }
    }
    Dendrogram {
        ids: ds.ids().to_vec(),
        merges,
    }
}

/// Reference agglomeration: every round evaluates [`linkage_cost`] on all
/// pairs of current blocks.
pub fn agglomerate_naive(ds: &Dataset, kind: LinkageKind) -> Dendrogram {
    let n = ds.len();
    let mut blocks: Vec<Vec<usize>> = (0..n).map(|p| vec![p]).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while blocks.len() > 1 {
        let pts: Vec<Vec<&[f64]>> = blocks
            .iter()
            .map(|b| b.iter().map(|&p| ds.point(p)).collect())
            .collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for x in 0..blocks.len() {
            for y in x + 1..blocks.len() {
                let cost = linkage_points(&pts[x], &pts[y], kind);
                if best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, x, y));
                }
            }
        }
        let (cost, x, y) = best.expect("two blocks");
        merges.push(Merge {
            a: ds.id(blocks[x][0]),
            b: ds.id(blocks[y][0]),
            size_a: blocks[x].len(),
            size_b: blocks[y].len(),
            cost,
            level: blocks.len() - 1,
        });
        let moved = blocks.remove(y);
        blocks[x].extend(moved);
        blocks[x].sort_unstable();
    }
    Dendrogram {
        ids: ds.ids().to_vec(),
        merges,
    }
}

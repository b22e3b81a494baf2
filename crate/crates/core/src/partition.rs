//! Partitions of point ids and nested hierarchies of them.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of disjoint, nonempty blocks of point ids.
///
/// Stored canonically: ids inside a block ascend and blocks are ordered by
/// their smallest id, so structural equality is set equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = HashMap::new();
        let mut canon = Vec::with_capacity(blocks.len());
        for (b, mut block) in blocks.into_iter().enumerate() {
            if block.is_empty() {
                return Err(Error::invalid(format!("block {b} is empty")));
            }
            for &id in &block {
                if let Some(prev) = seen.insert(id, b) {
                    return Err(Error::invalid(format!("id {id} appears in blocks {prev} and {b}")));
                }
            }
            block.sort_unstable();
            canon.push(block);
        }
        canon.sort_unstable_by_key(|b| b[0]);
        Ok(Partition { blocks: canon })
    }

    /// Groups ids by an arbitrary block key.
    pub fn from_labels<K: Ord>(pairs: impl IntoIterator<Item = (usize, K)>) -> Self {
        let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
        for (id, key) in pairs {
            groups.entry(key).or_default().push(id);
        }
        let mut blocks: Vec<Vec<usize>> = groups.into_values().collect();
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Partition { blocks }
    }

    pub fn singletons(ids: &[usize]) -> Self {
        Partition::from_labels(ids.iter().map(|&i| (i, i)))
    }

    pub fn whole(ids: &[usize]) -> Self {
        Partition::from_labels(ids.iter().map(|&i| (i, 0u8)))
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of ids covered.
    pub fn ground_len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// All ids covered, ascending.
    pub fn ground(&self) -> Vec<usize> {
        let mut g: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        g.sort_unstable();
        g
    }

    /// Map from id to block index.
    pub fn block_index(&self) -> HashMap<usize, usize> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, block)| block.iter().map(move |&id| (id, b)))
            .collect()
    }
}

/// Which metric a per-level cost was measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Tree,
    Euclidean,
}

/// One refinement step: the ids in `moved` leave the block centered at
/// `parent` and form the new block centered at `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub parent: usize,
    pub center: usize,
    pub moved: Vec<usize>,
}

/// Ordered centers with the nested partitions they induce.
///
/// Level `t` (1-based) has the first `t` centers; each block is keyed by its
/// center. Levels are stored as the split sequence, which keeps memory
/// proportional to the number of reassignments rather than `n` squared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalClustering {
    ground: Vec<usize>,
    centers: Vec<usize>,
    splits: Vec<Split>,
    per_level_cost: Vec<f64>,
    cost_kind: CostKind,
}

impl HierarchicalClustering {
    /// `splits[t]` produces level `t + 2` from level `t + 1`.
    pub fn new(
        ground: Vec<usize>,
        centers: Vec<usize>,
        splits: Vec<Split>,
        per_level_cost: Vec<f64>,
        cost_kind: CostKind,
    ) -> Result<Self> {
        if centers.is_empty() || splits.len() + 1 != centers.len() {
            return Err(Error::invalid(format!(
                "{} centers need {} splits, got {}",
                centers.len(),
                centers.len().saturating_sub(1),
                splits.len()
            )));
        }
        if per_level_cost.len() != centers.len() {
            return Err(Error::invalid("one cost per level required"));
        }
        Ok(HierarchicalClustering {
            ground,
            centers,
            splits,
            per_level_cost,
            cost_kind,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn ground(&self) -> &[usize] {
        &self.ground
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn per_level_cost(&self) -> &[f64] {
        &self.per_level_cost
    }

    pub fn cost_kind(&self) -> CostKind {
        self.cost_kind
    }

    /// Center id of every ground id at level `k`, in ground order.
    pub fn assignment(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.num_levels() {
            return Err(Error::invalid(format!("level {k} outside 1..={}", self.num_levels())));
        }
        let pos: HashMap<usize, usize> = self.ground.iter().enumerate().map(|(p, &id)| (id, p)).collect();
        let mut assign = vec![self.centers[0]; self.ground.len()];
        for split in &self.splits[..k - 1] {
            for id in &split.moved {
                assign[pos[id]] = split.center;
            }
        }
        Ok(assign)
    }

    /// The partition at level `k` (1-based).
    pub fn level(&self, k: usize) -> Result<Partition> {
        let assign = self.assignment(k)?;
        Ok(Partition::from_labels(self.ground.iter().copied().zip(assign)))
    }

    pub fn levels(&self) -> Vec<Partition> {
        (1..=self.num_levels())
            .map(|k| self.level(k).expect("level in range"))
            .collect()
    }

    /// Replays the split sequence and checks the nesting invariants.
    pub fn check_nested(&self) -> Result<(), NestingViolation> {
        check_nested(&self.levels())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestingViolation {
    /// 1-based level at which the violation was found.
    pub level: usize,
    pub reason: String,
}

impl std::fmt::Display for NestingViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "level {}: {}", self.level, self.reason)
    }
}

/// Checks that `levels[0]` is a single block and that every later level
/// splits exactly one block of its predecessor into two.
pub fn check_nested(levels: &[Partition]) -> Result<(), NestingViolation> {
    let violation = |level: usize, reason: String| Err(NestingViolation { level, reason });
    let Some(first) = levels.first() else {
        return Ok(());
    };
    if first.num_blocks() != 1 {
        return violation(1, format!("expected 1 block, found {}", first.num_blocks()));
    }
    let ground = first.ground();
    for (t, pair) in levels.windows(2).enumerate() {
        let level = t + 2;
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.num_blocks() != level {
            return violation(level, format!("expected {level} blocks, found {}", cur.num_blocks()));
        }
        if cur.ground() != ground {
            return violation(level, "ground set differs from level 1".into());
        }
        let parent_of = prev.block_index();
        for block in cur.blocks() {
            let parent = parent_of[&block[0]];
            if block.iter().any(|id| parent_of[id] != parent) {
                return violation(
                    level,
                    format!("block starting at id {} straddles two parent blocks", block[0]),
                );
            }
        }
    }
    Ok(())
}

//! Hierarchical k-median on a 2-RHST.
//!
//! Each round picks a new center `c_t` and labels the unlabeled part of the
//! root-to-leaf path of `c_t`. A point belongs to the label of its lowest
//! labeled ancestor, so every round moves the points below the highest newly
//! labeled node into a new block. The greedy variant picks the point that
//! minimizes the tree cost; the stable variant samples it with the
//! exponential mechanism.
//!
//! Candidate costs are evaluated in `O(L)` per point from subtree counts.

use rand::Rng;
use serde::Serialize;

use crate::cost::COST_TOL;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::partition::{CostKind, HierarchicalClustering, Split};
use crate::rhst::{build_rhst, Rhst, ShiftMode};
use crate::stream::derive_seed;

/// Labels and running cost of one hierarchical run over a tree.
#[derive(Debug, Clone)]
pub struct GreedyState<'a> {
    tree: &'a Rhst,
    /// Dataset position of the center labeling each node.
    labels: Vec<Option<usize>>,
    centers: Vec<usize>,
    splits: Vec<Split>,
    costs: Vec<f64>,
    total: f64,
}

impl<'a> GreedyState<'a> {
    pub fn new(tree: &'a Rhst) -> Self {
        GreedyState {
            tree,
            labels: vec![None; tree.nodes().len()],
            centers: Vec::new(),
            splits: Vec::new(),
            costs: Vec::new(),
            total: f64::INFINITY,
        }
    }

    pub fn round(&self) -> usize {
        self.centers.len()
    }

    /// Current tree cost, infinite before the first center.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    fn is_chosen(&self, pos: usize) -> bool {
        self.labels[self.tree.leaf(pos)].is_some()
    }

    /// Tree cost after adding the point at `pos` as the next center.
    pub fn candidate_cost(&self, pos: usize) -> f64 {
        let nodes = self.tree.nodes();
        let mut cur = self.tree.leaf(pos);
        if self.labels[cur].is_some() {
            return self.total;
        }
        let mut below = 0.0;
        loop {
            let Some(parent) = nodes[cur].parent else {
                return below;
            };
            let w = self.tree.dist_at_lca(nodes[parent].level);
            if self.labels[parent].is_some() {
                let gain = nodes[cur].contained_leaves() as f64 * w - below;
                return (self.total - gain).max(0.0);
            }
            below += (nodes[parent].contained_leaves() - nodes[cur].contained_leaves()) as f64 * w;
            cur = parent;
        }
    }

    /// Unchosen positions in ascending id order with their candidate costs.
    pub fn candidates(&self) -> (Vec<usize>, Vec<f64>) {
        let pos: Vec<usize> = (0..self.tree.num_points()).filter(|&p| !self.is_chosen(p)).collect();
        let costs = pos.iter().map(|&p| self.candidate_cost(p)).collect();
        (pos, costs)
    }

    /// Labels the path of `pos` and records the split it causes.
    pub fn choose(&mut self, pos: usize) {
        assert!(!self.is_chosen(pos), "point {pos} is already a center");
        let new_total = self.candidate_cost(pos);
        let nodes = self.tree.nodes();
        let mut top = self.tree.leaf(pos);
        self.labels[top] = Some(pos);
        while let Some(parent) = nodes[top].parent {
            if self.labels[parent].is_some() {
                break;
            }
            self.labels[parent] = Some(pos);
            top = parent;
        }
        if let Some(parent) = nodes[top].parent {
            let owner = self.labels[parent].expect("stopped at a labeled node");
            let ids = self.tree.ids();
            let mut moved: Vec<usize> = self.tree.points_under(top).iter().map(|&p| ids[p]).collect();
            moved.sort_unstable();
            self.splits.push(Split {
                parent: ids[owner],
                center: ids[pos],
                moved,
            });
        }
        self.centers.push(pos);
        self.total = new_total;
        self.costs.push(new_total);
        if cfg!(debug_assertions) && self.tree.num_points() <= 128 {
            let fresh = self.tree.tree_cost_positions(&self.centers);
            debug_assert!(
                (fresh - new_total).abs() <= 1e-7 * fresh.max(1.0),
                "cached cost {new_total} disagrees with recomputation {fresh}"
            );
        }
    }

    pub fn finish(self) -> HierarchicalClustering {
        let ids = self.tree.ids();
        HierarchicalClustering::new(
            ids.to_vec(),
            self.centers.iter().map(|&p| ids[p]).collect(),
            self.splits,
            self.costs,
            CostKind::Tree,
        )
        .expect("one split and one cost per round")
    }
}

/// Index of the smallest cost; ties within [`COST_TOL`] go to the first.
fn argmin(costs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] - COST_TOL {
            best = i;
        }
    }
    best
}

fn check_levels(tree: &Rhst, levels: usize) -> Result<()> {
    let n = tree.num_points();
    if levels == 0 || levels > n {
        return Err(Error::invalid(format!("level count {levels} outside 1..={n}")));
    }
    Ok(())
}

/// The full greedy hierarchy: every round takes the cost-minimizing point.
pub fn greedy_hierarchical(tree: &Rhst) -> HierarchicalClustering {
    greedy_prefix(tree, tree.num_points()).expect("n levels always valid")
}

/// The first `levels` rounds of [`greedy_hierarchical`].
pub fn greedy_prefix(tree: &Rhst, levels: usize) -> Result<HierarchicalClustering> {
    check_levels(tree, levels)?;
    let mut state = GreedyState::new(tree);
    for _ in 0..levels {
        let (pos, costs) = state.candidates();
        state.choose(pos[argmin(&costs)]);
    }
    Ok(state.finish())
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

fn softmax_weights(costs: &[f64], lambda: f64) -> Result<Vec<f64>> {
    validate_lambda(lambda)?;
    if costs.is_empty() {
        return Err(Error::invalid("cost list must be nonempty"));
    }
    if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::invalid(format!("cost {i} is not finite")));
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(costs.iter().map(|&c| (-(c - min) / lambda).exp()).collect())
}

/// Inverse-CDF pick from unnormalized weights with a uniform `u` in `[0, 1)`.
fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Selection probabilities `exp(-cost/lambda)`, normalized.
pub fn exp_mechanism_probabilities(costs: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let w = softmax_weights(costs, lambda)?;
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Samples an index with probability proportional to `exp(-cost/lambda)`.
/// Consumes one uniform draw.
pub fn exp_mechanism_sample<R: Rng + ?Sized>(costs: &[f64], lambda: f64, rng: &mut R) -> Result<usize> {
    let w = softmax_weights(costs, lambda)?;
    Ok(pick(&w, rng.random()))
}

/// Standard Gumbel noise for `key` under `round_key`.
fn gumbel(round_key: u64, key: u64) -> f64 {
    let bits = derive_seed(round_key, &[key]) >> 11;
    let u = (bits as f64 + 0.5) / (1u64 << 53) as f64;
    -(-u.ln()).ln()
}

fn keyed_argmax(keys: &[u64], round_key: u64, score: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &k) in keys.iter().enumerate() {
        let v = score(i) + gumbel(round_key, k);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Samples an index with probability proportional to `exp(-cost/lambda)`
/// by the Gumbel-max rule, drawing each index's noise from its `key`.
///
/// Two calls with the same `round_key` give every shared key the same
/// noise, so removing one candidate only changes the outcome when the
/// removed candidate or a cost change decides it.
pub fn exp_mechanism_sample_keyed(costs: &[f64], keys: &[u64], lambda: f64, round_key: u64) -> Result<usize> {
    if keys.len() != costs.len() {
        return Err(Error::DimensionMismatch {
            expected: costs.len(),
            actual: keys.len(),
        });
    }
    softmax_weights(costs, lambda)?;
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(keyed_argmax(keys, round_key, |i| -(costs[i] - min) / lambda))
}

/// What happened in one round of [`stable_traced`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundInfo {
    /// Id of the greedy-best candidate.
    pub best: usize,
    pub best_cost: f64,
    pub chosen: usize,
    pub chosen_cost: f64,
    /// `None` when the round fell back to uniform selection.
    pub lambda: Option<f64>,
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    Ok(())
}

/// The full low-sensitivity hierarchy.
pub fn stable_hierarchical<R: Rng + ?Sized>(tree: &Rhst, epsilon: f64, rng: &mut R) -> Result<HierarchicalClustering> {
    stable_prefix(tree, epsilon, tree.num_points(), rng)
}

/// The first `levels` rounds of [`stable_hierarchical`]. The draws of these
/// rounds are the same as in the full run.
pub fn stable_prefix<R: Rng + ?Sized>(
    tree: &Rhst,
    epsilon: f64,
    levels: usize,
    rng: &mut R,
) -> Result<HierarchicalClustering> {
    stable_traced(tree, epsilon, levels, rng).map(|(h, _)| h)
}

/// Like [`stable_prefix`], also returning per-round diagnostics.
///
/// Each round takes two draws from `rng` in order: a uniform that places
/// `lambda` in `[eps*C/(6 ln n), eps*C/(3 ln n)]`, where `C` is the
/// greedy-best cost, and a 64-bit key for [`exp_mechanism_sample_keyed`]
/// over the unchosen points, keyed by id.
pub fn stable_traced<R: Rng + ?Sized>(
    tree: &Rhst,
    epsilon: f64,
    levels: usize,
    rng: &mut R,
) -> Result<(HierarchicalClustering, Vec<RoundInfo>)> {
    validate_epsilon(epsilon)?;
    check_levels(tree, levels)?;
    let n = tree.num_points();
    let ids = tree.ids();
    let mut state = GreedyState::new(tree);
    let mut trace = Vec::with_capacity(levels);
    if n == 1 {
        state.choose(0);
        trace.push(RoundInfo {
            best: ids[0],
            best_cost: 0.0,
            chosen: ids[0],
            chosen_cost: 0.0,
            lambda: None,
        });
        return Ok((state.finish(), trace));
    }
    let ln_n = (n as f64).ln();
    for _ in 0..levels {
        let (pos, costs) = state.candidates();
        let best = argmin(&costs);
        let best_cost = costs[best];
        let u_lambda: f64 = rng.random();
        let round_key: u64 = rng.random();
        let keys: Vec<u64> = pos.iter().map(|&p| ids[p] as u64).collect();
        let (idx, lambda) = if best_cost <= COST_TOL {
            (keyed_argmax(&keys, round_key, |_| 0.0), None)
        } else {
            let lambda = epsilon * best_cost / (6.0 * ln_n) * (1.0 + u_lambda);
            (
                exp_mechanism_sample_keyed(&costs, &keys, lambda, round_key)?,
                Some(lambda),
            )
        };
        trace.push(RoundInfo {
            best: ids[pos[best]],
            best_cost,
            chosen: ids[pos[idx]],
            chosen_cost: costs[idx],
            lambda,
        });
        state.choose(pos[idx]);
    }
    Ok((state.finish(), trace))
}

/// Node labels induced by the first `levels` centers of a hierarchy built on `tree`.
pub fn node_labels(tree: &Rhst, h: &HierarchicalClustering, levels: usize) -> Result<Vec<Option<usize>>> {
    let mut state = GreedyState::new(tree);
    for &c in h.centers().iter().take(levels) {
        let pos = tree.ids().binary_search(&c).map_err(|_| Error::UnknownId(c))?;
        state.choose(pos);
    }
    Ok(state.labels)
}

/// Center selection rule of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Mode {
    Greedy,
    Stable { epsilon: f64 },
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub hierarchy: HierarchicalClustering,
    pub tree: Rhst,
    /// Euclidean k-median cost of each level's centers on the input data.
    pub euclidean_cost: Vec<f64>,
}

/// Normalize, shift, build the tree, and run the chosen rule for `levels` rounds
/// (all `n` when `None`).
pub fn clnss_pipeline<R: Rng + ?Sized>(
    ds: &Dataset,
    rng: &mut R,
    mode: Mode,
    shift: &ShiftMode,
    levels: Option<usize>,
) -> Result<PipelineOutput> {
    if let Mode::Stable { epsilon } = mode {
        validate_epsilon(epsilon)?;
    }
    let tree = build_rhst(ds, shift, rng)?;
    let levels = levels.unwrap_or(ds.len());
    let hierarchy = match mode {
        Mode::Greedy => greedy_prefix(&tree, levels)?,
        Mode::Stable { epsilon } => stable_prefix(&tree, epsilon, levels, rng)?,
    };
    let euclidean_cost = prefix_costs(ds, hierarchy.centers())?;
    Ok(PipelineOutput {
        hierarchy,
        tree,
        euclidean_cost,
    })
}

/// Euclidean k-median cost of every prefix of `centers`.
pub fn prefix_costs(ds: &Dataset, centers: &[usize]) -> Result<Vec<f64>> {
    let mut nearest = vec![f64::INFINITY; ds.len()];
    let mut out = Vec::with_capacity(centers.len());
    for &id in centers {
        let c = ds.position_of(id).ok_or(Error::UnknownId(id))?;
        for (p, best) in nearest.iter_mut().enumerate() {
            *best = best.min(ds.dist_pos(p, c));
        }
        out.push(nearest.iter().sum());
    }
    Ok(out)
}

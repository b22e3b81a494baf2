//! Restricted 2-hierarchically-well-separated trees built from a quadtree.
//!
//! Points are first normalized (minimum pairwise distance 1, bounding box
//! at the origin), optionally shifted by a random vector, and then the
//! enclosing power-of-two cube is halved along every axis until each cell
//! holds one point. Empty cells are dropped. Every leaf sits at the same
//! depth `L`; the edge into a level-`i` node weighs `R * sqrt(d) / 2^i`
//! where `R` is the root side.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::Rng;
use serde::Serialize;

use crate::dataset::{distance_extremes, Dataset};
use crate::error::{Error, Result};

/// Coordinates rescaled so the closest pair is at distance 1 and the
/// bounding box starts at the origin.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub dataset: Dataset,
    /// `Dmax / Dmin` of the input.
    pub lambda: f64,
    pub offset: Vec<f64>,
    pub scale: f64,
}

pub fn normalize(ds: &Dataset) -> Result<Normalized> {
    if ds.len() == 1 {
        return Ok(Normalized {
            dataset: ds.map_coords(|_, _| 0.0),
            lambda: 1.0,
            offset: ds.point(0).to_vec(),
            scale: 1.0,
        });
    }
    let ext = distance_extremes(ds)?;
    let mut offset = vec![f64::INFINITY; ds.dim()];
    for p in ds.points() {
        for (o, &x) in offset.iter_mut().zip(p) {
            *o = o.min(x);
        }
    }
    let dataset = ds.map_coords(|k, x| (x - offset[k]) / ext.dmin);
    Ok(Normalized {
        dataset,
        lambda: ext.aspect,
        offset,
        scale: 1.0 / ext.dmin,
    })
}

/// A shift vector drawn uniformly from `[0, lambda]^dim`, one draw per axis.
pub fn draw_shift<R: Rng + ?Sized>(dim: usize, lambda: f64, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>() * lambda).collect()
}

pub fn apply_shift(ds: &Dataset, shift: &[f64]) -> Dataset {
    ds.map_coords(|k, x| x + shift[k])
}

/// Translates every point by one vector drawn uniformly from `[0, lambda]^d`.
pub fn random_shift<R: Rng + ?Sized>(ds: &Dataset, lambda: f64, rng: &mut R) -> Dataset {
    let shift = draw_shift(ds.dim(), lambda, rng);
    apply_shift(ds, &shift)
}

/// How the grid is offset before the tree is built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ShiftMode {
    /// Uniform from `[0, lambda]^d`, drawn from the run's stream.
    Random,
    /// No shift: the deterministic embedding.
    Zero,
    /// A caller-supplied vector in normalized units.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Serialize)]
pub struct RhstNode {
    pub level: usize,
    /// Integer cell index per axis; the cell is `[cell * side, (cell + 1) * side)`.
    pub cell: Vec<i64>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Range into [`Rhst::leaf_order`] covering this node's leaves.
    #[serde(skip)]
    pub leaves: Range<usize>,
    /// Dataset position of the point, for leaves.
    pub point: Option<usize>,
}

impl RhstNode {
    pub fn contained_leaves(&self) -> usize {
        self.leaves.len()
    }
}

#[derive(Debug, Clone)]
pub struct Rhst {
    dim: usize,
    lambda: f64,
    root_side: f64,
    depth: usize,
    shift: Vec<f64>,
    nodes: Vec<RhstNode>,
    leaf_of: Vec<usize>,
    leaf_order: Vec<usize>,
    ids: Vec<usize>,
    /// `down[j]`: weight of the path from a level-`j` node to the leaf level.
    down: Vec<f64>,
}

/// Builds the tree over points that already live in nonnegative grid units.
///
/// The root cube is `[0, R)^d` with `R` the smallest power of two above every
/// coordinate. Subdivision stops at side 1 once all cells are singletons;
/// if two points share a unit cell it continues below side 1.
pub fn construct_2rhst(ds: &Dataset) -> Result<Rhst> {
    ds.ensure_distinct()?;
    if ds.coords().iter().any(|&c| c < 0.0) {
        return Err(Error::invalid(
            "tree construction needs nonnegative coordinates; normalize first",
        ));
    }
    let lambda = if ds.len() >= 2 {
        distance_extremes(ds)?.aspect
    } else {
        1.0
    };
    let max_coord = ds.coords().iter().copied().fold(0.0, f64::max);
    let mut root_side = 1.0;
    while root_side <= max_coord {
        root_side *= 2.0;
    }
    let top_depth = root_side.log2().round() as usize;
    let dim = ds.dim();

    let mut nodes = vec![RhstNode {
        level: 0,
        cell: vec![0; dim],
        parent: None,
        children: Vec::new(),
        leaves: 0..0,
        point: None,
    }];
    let mut frontier: Vec<(usize, Vec<usize>)> = vec![(0, (0..ds.len()).collect())];
    let mut level = 0;
    while level < top_depth || frontier.iter().any(|(_, pts)| pts.len() > 1) {
        level += 1;
        if level > top_depth + 64 {
            return Err(Error::invalid("points could not be separated by subdivision"));
        }
        let side = root_side / 2f64.powi(level as i32);
        let mut next = Vec::with_capacity(frontier.len());
        for (parent, pts) in frontier {
            let mut groups: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
            for p in pts {
                let key = ds.point(p).iter().map(|&x| (x / side).floor() as i64).collect();
                groups.entry(key).or_default().push(p);
            }
            for (cell, members) in groups {
                let id = nodes.len();
                nodes.push(RhstNode {
                    level,
                    cell,
                    parent: Some(parent),
                    children: Vec::new(),
                    leaves: 0..0,
                    point: None,
                });
                nodes[parent].children.push(id);
                next.push((id, members));
            }
        }
        frontier = next;
    }
    let depth = level;
    let mut leaf_of = vec![0; ds.len()];
    for (node, pts) in &frontier {
        debug_assert_eq!(pts.len(), 1);
        nodes[*node].point = Some(pts[0]);
        leaf_of[pts[0]] = *node;
    }

    // depth-first leaf order; every node's leaves form a contiguous range
    let mut leaf_order = Vec::with_capacity(ds.len());
    let mut stack = vec![(0usize, false)];
    let mut start = vec![0usize; nodes.len()];
    while let Some((v, done)) = stack.pop() {
        if done {
            nodes[v].leaves = start[v]..leaf_order.len();
            continue;
        }
        start[v] = leaf_order.len();
        if let Some(p) = nodes[v].point {
            leaf_order.push(p);
        }
        stack.push((v, true));
        for &c in nodes[v].children.iter().rev() {
            stack.push((c, false));
        }
    }

    let unit = root_side * (dim as f64).sqrt();
    let down = (0..=depth)
        .map(|j| 2.0 * unit * (2f64.powi(-(j as i32)) - 2f64.powi(-(depth as i32))) / 2.0)
        .collect();

    Ok(Rhst {
        dim,
        lambda,
        root_side,
        depth,
        shift: vec![0.0; dim],
        nodes,
        leaf_of,
        leaf_order,
        ids: ds.ids().to_vec(),
        down,
    })
}

/// Normalizes, shifts, and builds the tree for `ds`.
///
/// With [`ShiftMode::Random`] exactly `d` uniforms are drawn from `rng`.
pub fn build_rhst<R: Rng + ?Sized>(ds: &Dataset, mode: &ShiftMode, rng: &mut R) -> Result<Rhst> {
    let norm = normalize(ds)?;
    let shift = match mode {
        ShiftMode::Random => draw_shift(ds.dim(), norm.lambda, rng),
        ShiftMode::Zero => vec![0.0; ds.dim()],
        ShiftMode::Fixed(v) => {
            if v.len() != ds.dim() {
                return Err(Error::DimensionMismatch {
                    expected: ds.dim(),
                    actual: v.len(),
                });
            }
            if v.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
                return Err(Error::invalid("shift components must be finite and nonnegative"));
            }
            v.clone()
        }
    };
    let mut tree = construct_2rhst(&apply_shift(&norm.dataset, &shift))?;
    tree.lambda = norm.lambda;
    tree.shift = shift;
    Ok(tree)
}

impl Rhst {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Aspect ratio `Dmax / Dmin` of the embedded points.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Side of the root cube, a power of two.
    pub fn root_side(&self) -> f64 {
        self.root_side
    }

    /// Level of the leaves.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn nodes(&self) -> &[RhstNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn num_points(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Leaf node of the point at dataset position `pos`.
    pub fn leaf(&self, pos: usize) -> usize {
        self.leaf_of[pos]
    }

    /// Dataset positions in depth-first order.
    pub fn leaf_order(&self) -> &[usize] {
        &self.leaf_order
    }

    /// Positions of the points below `node`.
    pub fn points_under(&self, node: usize) -> &[usize] {
        &self.leaf_order[self.nodes[node].leaves.clone()]
    }

    pub fn side_at(&self, level: usize) -> f64 {
        self.root_side / 2f64.powi(level as i32)
    }

    /// Weight of the edge between a level-`level` node and its parent.
    pub fn edge_weight(&self, level: usize) -> f64 {
        assert!(level >= 1, "the root has no parent edge");
        self.side_at(level) * (self.dim as f64).sqrt()
    }

    /// Tree distance between two leaves whose lowest common ancestor is at `level`.
    #[inline]
    pub fn dist_at_lca(&self, level: usize) -> f64 {
        2.0 * self.down[level]
    }

    pub(crate) fn position_of(&self, id: usize) -> Result<usize> {
        self.ids.binary_search(&id).map_err(|_| Error::UnknownId(id))
    }

    pub(crate) fn lca_level(&self, a: usize, b: usize) -> usize {
        let (mut u, mut v) = (self.leaf_of[a], self.leaf_of[b]);
        while u != v {
            u = self.nodes[u].parent.expect("leaves share the root");
            v = self.nodes[v].parent.expect("leaves share the root");
        }
        self.nodes[u].level
    }

    pub(crate) fn dist_pos(&self, a: usize, b: usize) -> f64 {
        if a == b {
            0.0
        } else {
            self.dist_at_lca(self.lca_level(a, b))
        }
    }

    /// Shortest-path distance between the leaves of two point ids.
    pub fn tree_dist(&self, p: usize, q: usize) -> Result<f64> {
        Ok(self.dist_pos(self.position_of(p)?, self.position_of(q)?))
    }

    /// Sum over all points of the tree distance to the nearest center id.
    pub fn tree_cost(&self, centers: &[usize]) -> Result<f64> {
        if centers.is_empty() {
            return Err(Error::invalid("center set must be nonempty"));
        }
        let pos = centers
            .iter()
            .map(|&id| self.position_of(id))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.tree_cost_positions(&pos))
    }

    pub(crate) fn tree_cost_positions(&self, centers: &[usize]) -> f64 {
        self.per_point_cost(centers).iter().sum()
    }

    /// Distance from each point to its nearest center, by marking the
    /// centers' ancestors and scanning up from each leaf.
    pub(crate) fn per_point_cost(&self, centers: &[usize]) -> Vec<f64> {
        let mut marked = vec![false; self.nodes.len()];
        for &c in centers {
            let mut v = Some(self.leaf_of[c]);
            while let Some(u) = v {
                if marked[u] {
                    break;
                }
                marked[u] = true;
                v = self.nodes[u].parent;
            }
        }
        (0..self.num_points())
            .map(|p| {
                let mut u = self.leaf_of[p];
                while !marked[u] {
                    u = self.nodes[u].parent.expect("root is marked");
                }
                self.dist_at_lca(self.nodes[u].level)
            })
            .collect()
    }

    /// JSON dump of the tree; `labels`, when given, is indexed by node.
    pub fn to_json(&self, labels: Option<&[Option<usize>]>) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let side = self.side_at(n.level);
                serde_json::json!({
                    "node": i,
                    "level": n.level,
                    "origin": n.cell.iter().map(|&c| c as f64 * side).collect::<Vec<_>>(),
                    "side": side,
                    "children": n.children,
                    "point": n.point.map(|p| self.ids[p]),
                    "label": labels.and_then(|l| l[i]).map(|p| self.ids[p]),
                })
            })
            .collect();
        serde_json::json!({
            "dim": self.dim,
            "lambda": self.lambda,
            "root_side": self.root_side,
            "depth": self.depth,
            "shift": self.shift,
            "nodes": nodes,
        })
    }

    /// Indented text dump, one node per line.
    pub fn to_text(&self, labels: Option<&[Option<usize>]>) -> String {
        let mut out = String::new();
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            let n = &self.nodes[v];
            let side = self.side_at(n.level);
            let origin: Vec<String> = n.cell.iter().map(|&c| format!("{}", c as f64 * side)).collect();
            out.push_str(&"  ".repeat(n.level));
            out.push_str(&format!("L{} [{}] side={}", n.level, origin.join(","), side));
            if let Some(p) = n.point {
                out.push_str(&format!(" point={}", self.ids[p]));
            }
            if let Some(Some(l)) = labels.map(|l| l[v]) {
                out.push_str(&format!(" label={}", self.ids[l]));
            }
            out.push('\n');
            stack.extend(n.children.iter().rev());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::stream::Stream;

    fn line(xs: &[f64]) -> Dataset {
        Dataset::from_line(xs).unwrap()
    }

    #[test]
    fn two_point_line_example() {
        let t = construct_2rhst(&line(&[0.0, 3.0])).unwrap();
        assert_eq!(t.root_side(), 4.0);
        assert_eq!(t.depth(), 2);
        assert_eq!(t.edge_weight(1), 2.0);
        assert_eq!(t.edge_weight(2), 1.0);
        // root -> [0,2),[2,4) -> [0,1),[3,4)
        let level1: Vec<_> = t.nodes().iter().filter(|n| n.level == 1).map(|n| n.cell[0]).collect();
        assert_eq!(level1, vec![0, 1]);
        let leaves: Vec<_> = t.nodes().iter().filter(|n| n.level == 2).map(|n| n.cell[0]).collect();
        assert_eq!(leaves, vec![0, 3]);
        assert_eq!(t.tree_dist(0, 1).unwrap(), 6.0);
        assert_eq!(t.tree_dist(1, 1).unwrap(), 0.0);
        assert_eq!(t.tree_cost(&[0]).unwrap(), 6.0);
        assert_eq!(t.tree_cost(&[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn lca_one_above_leaves() {
        let t = construct_2rhst(&line(&[0.0, 1.0, 3.0])).unwrap();
        assert_eq!(t.depth(), 2);
        // 0 and 1 split only at the last level
        let expected = 2.0 * t.root_side() / 2f64.powi(t.depth() as i32);
        assert_eq!(t.tree_dist(0, 1).unwrap(), expected);
    }

    #[test]
    fn two_points_any_dimension() {
        for d in 1..=4 {
            let mut a = vec![0.0; d];
            a[0] = 5.0;
            let ds = Dataset::from_rows(&[vec![0.0; d], a]).unwrap();
            let t = construct_2rhst(&ds).unwrap();
            let leaves: Vec<_> = t.nodes().iter().filter(|n| n.point.is_some()).collect();
            assert_eq!(leaves.len(), 2);
            assert!(leaves.iter().all(|n| n.level == t.depth()));
        }
    }

    #[test]
    fn shared_unit_cell_extends_depth() {
        // distance 1.2 but both in the unit cell [0,1)^2 after offsetting
        let ds = Dataset::from_rows(&[vec![0.05, 0.05], vec![0.9, 0.9], vec![3.0, 3.0]]).unwrap();
        let t = construct_2rhst(&ds).unwrap();
        assert!(t.side_at(t.depth()) < 1.0);
        assert!(t
            .nodes()
            .iter()
            .filter(|n| n.point.is_some())
            .all(|n| n.level == t.depth()));
    }

    #[test]
    fn rejects_duplicates_and_negative() {
        assert!(matches!(
            construct_2rhst(&line(&[1.0, 2.0, 1.0])),
            Err(Error::DuplicatePoints { .. })
        ));
        assert!(construct_2rhst(&line(&[-1.0, 2.0])).is_err());
    }

    #[test]
    fn zero_shift_is_identity() {
        let ds = line(&[0.0, 2.0, 5.0]);
        assert_eq!(apply_shift(&ds, &[0.0]), ds);
    }

    #[test]
    fn seeded_shift_repeats() {
        let ds = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 2.0], vec![4.0, 1.0]]).unwrap();
        let a = random_shift(&ds, 3.0, &mut Stream::seed_from_u64(5));
        let b = random_shift(&ds, 3.0, &mut Stream::seed_from_u64(5));
        assert_eq!(a, b);
        let ea = distance_extremes(&a).unwrap();
        let e = distance_extremes(&ds).unwrap();
        assert!((ea.dmin - e.dmin).abs() < 1e-12 && (ea.dmax - e.dmax).abs() < 1e-12);
    }

    #[test]
    fn normalization_sets_unit_min_distance() {
        let ds = line(&[10.0, 13.0, 19.0]);
        let n = normalize(&ds).unwrap();
        assert_eq!(n.dataset.coords(), &[0.0, 1.0, 3.0]);
        assert_eq!(n.lambda, 3.0);
    }

    #[test]
    fn dumps_mention_every_point() {
        let t = construct_2rhst(&line(&[0.0, 3.0])).unwrap();
        let text = t.to_text(None);
        assert!(text.contains("point=0") && text.contains("point=1"));
        let json = t.to_json(None);
        assert_eq!(json["depth"], 2);
        assert_eq!(json["nodes"].as_array().unwrap().len(), t.nodes().len());
    }
}

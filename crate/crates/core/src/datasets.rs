//! Instance generators, CSV ingestion, DBSCAN, and the well-clusterability test.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Points on a line whose gaps grow slowly from left to right.
///
/// The first gap is `d1`; gap `j >= 2` is `1 + (j - 1) * d1 / n`.
pub fn gen_line_instance(n: usize, d1: f64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid("line instance needs at least two points"));
    }
    if !(d1 > 0.0 && d1.is_finite()) {
        return Err(Error::invalid(format!("d1 must be positive, got {d1}")));
    }
    let mut xs = Vec::with_capacity(n);
    xs.push(0.0);
    xs.push(d1);
    for j in 2..n {
        let gap = 1.0 + (j - 1) as f64 * d1 / n as f64;
        xs.push(xs[j - 1] + gap);
    }
    Dataset::from_line(&xs)
}

/// Adversarial input for greedy centers on the unshifted tree, with the ids
/// of each of its 16 grid cells.
#[derive(Debug, Clone)]
pub struct AdversarialInstance {
    pub dataset: Dataset,
    /// `cells[c - 1]` holds the ids of cell `c`, numbered row-major from 1.
    pub cells: Vec<Vec<usize>>,
}

impl AdversarialInstance {
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c - 1]
    }
}

/// A 2-d instance in `[0, 256)^2` whose unshifted tree has 16 populated
/// second-level cells of side 64, each holding `n / 16` points.
///
/// Cell `4r + c + 1` covers `[64c, 64c + 64) x [64r, 64r + 64)`. Points sit
/// in the corner of each cell nearest the middle of the square:
/// - cell 5 is a tight row, so its points are the cheapest single centers;
/// - cell 11 is a row with one point moved to another subcell;
/// - cell 15 is a row with two points moved;
/// - every other cell spreads its points over four subcells.
///
/// Two far points in cells 9 and 3 pin the bounding box to the origin, so
/// normalization leaves the coordinates unchanged. The greedy tree solution
/// picks its first center in cell 5 and its second in cell 11. After any
/// cell-5 point is deleted, cell 11 becomes the cheapest first center and
/// the second center moves to another quadrant.
pub fn gen_rhst_adversarial(n: usize) -> Result<AdversarialInstance> {
    if n < 64 || !n.is_multiple_of(16) {
        return Err(Error::invalid(format!(
            "adversarial instance needs n >= 64 and a multiple of 16, got {n}"
        )));
    }
    let m = n / 16;
    if m > 64 {
        return Err(Error::invalid(format!("at most 1024 points fit the grid, got {n}")));
    }
    let mut rows = Vec::with_capacity(n);
    let mut cells = Vec::with_capacity(16);
    for r in 0..4usize {
        for c in 0..4usize {
            let number = 4 * r + c + 1;
            let inner = |v: usize| (64 * v + if v < 2 { 48 } else { 0 }) as f64;
            let (x, y) = (inner(c), inner(r));
            let row = |len: usize| (0..len).map(move |i| vec![x + (i % 16) as f64, y + (i / 16) as f64]);
            let mut pts: Vec<Vec<f64>> = match number {
                5 => row(m).collect(),
                11 => row(m - 1).chain([vec![x + 32.0, y]]).collect(),
                15 => row(m - 2).chain([vec![x + 32.0, y], vec![x, y + 32.0]]).collect(),
                _ => {
                    let sub = |v: usize| (64 * v + if v < 2 { 32 } else { 0 }) as f64;
                    let (sx, sy) = (sub(c), sub(r));
                    (0..m)
                        .map(|j| {
                            let q = j % 4;
                            let k = j / 4;
                            vec![
                                sx + 16.0 * (q % 2) as f64 + (k % 16) as f64,
                                sy + 16.0 * (q / 2) as f64 + (k / 16) as f64,
                            ]
                        })
                        .collect()
                }
            };
            match number {
                9 => pts[0] = vec![0.0, 128.0],
                3 => pts[0] = vec![128.0, 0.0],
                _ => {}
            }
            let first = rows.len();
            rows.extend(pts);
            cells.push((first..rows.len()).collect());
        }
    }
    let dataset = Dataset::from_rows(&rows)?;
    dataset.ensure_distinct()?;
    Ok(AdversarialInstance { dataset, cells })
}

/// Sampling law for [`gen_random_points`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PointDistribution {
    /// Uniform in `[0, side)^d`.
    UniformBox { side: f64 },
    /// Independent standard normal coordinates scaled by `std`.
    Gaussian { std: f64 },
    /// `clusters` centers uniform in `[0, side)^d`, each point normal around
    /// a uniformly chosen center with deviation `spread`.
    Mixture { clusters: usize, spread: f64, side: f64 },
}

/// `n` distinct points drawn i.i.d. from `law`; repeats are redrawn.
pub fn gen_random_points<R: Rng + ?Sized>(n: usize, d: usize, law: PointDistribution, rng: &mut R) -> Result<Dataset> {
    if n < 2 || d == 0 {
        return Err(Error::invalid("random points need n >= 2 and d >= 1"));
    }
    let positive = |v: f64, what: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what} must be positive, got {v}")))
        }
    };
    let centers: Vec<Vec<f64>> = match law {
        PointDistribution::UniformBox { side } => {
            positive(side, "side")?;
            Vec::new()
        }
        PointDistribution::Gaussian { std } => {
            positive(std, "std")?;
            Vec::new()
        }
        PointDistribution::Mixture { clusters, spread, side } => {
            positive(spread, "spread")?;
            positive(side, "side")?;
            if clusters == 0 {
                return Err(Error::invalid("mixture needs at least one cluster"));
            }
            (0..clusters)
                .map(|_| (0..d).map(|_| rng.random::<f64>() * side).collect())
                .collect()
        }
    };
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut seen = HashSet::with_capacity(n);
    let mut coords = Vec::with_capacity(n * d);
    while seen.len() < n {
        let p: Vec<f64> = match law {
            PointDistribution::UniformBox { side } => (0..d).map(|_| rng.random::<f64>() * side).collect(),
            PointDistribution::Gaussian { std } => (0..d).map(|_| normal.sample(rng) * std).collect(),
            PointDistribution::Mixture { spread, .. } => {
                let c = &centers[rng.random_range(0..centers.len())];
                c.iter().map(|&x| x + normal.sample(rng) * spread).collect()
            }
        };
        let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
        if seen.insert(key) {
            coords.extend(p);
        }
    }
    Dataset::new(d, coords)
}

/// `m` clusters of `size` points each in the plane, with their partition.
///
/// Each cluster lies in a disc of radius 1. Cluster centers sit on a line
/// with gaps of at least `2 + 2 * separation`, and any two gaps differ by
/// at least twice a cluster diameter. Deleting one point
/// therefore never changes the order in which single linkage joins clusters.
/// The layout is redrawn until the well-clusterability check passes.
pub fn gen_well_clusterable<R: Rng + ?Sized>(
    m: usize,
    size: usize,
    separation: f64,
    rng: &mut R,
) -> Result<(Dataset, Partition)> {
    if m < 2 {
        return Err(Error::invalid("need at least two clusters"));
    }
    if size == 0 {
        return Err(Error::invalid("clusters need at least one point"));
    }
    if !(separation >= 2.5 && separation.is_finite()) {
        return Err(Error::invalid(format!(
            "separation must be at least 2.5, got {separation}"
        )));
    }
    for _ in 0..100 {
        let base = 2.0 + 2.0 * separation;
        let mut gaps: Vec<f64> = (0..m - 1)
            .map(|i| base + 5.0 * i as f64 + rng.random::<f64>())
            .collect();
        // random order of gap sizes along the line
        for i in (1..gaps.len()).rev() {
            gaps.swap(i, rng.random_range(0..=i));
        }
        let mut cx = 0.0;
        let mut rows = Vec::with_capacity(m * size);
        let mut blocks = Vec::with_capacity(m);
        for c in 0..m {
            if c > 0 {
                cx += gaps[c - 1];
            }
            let first = rows.len();
            for _ in 0..size {
                let (r, t) = (rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU);
                rows.push(vec![cx + r * t.cos(), r * t.sin()]);
            }
            blocks.push((first..rows.len()).collect::<Vec<_>>());
        }
        let ds = Dataset::from_rows(&rows)?;
        if ds.ensure_distinct().is_err() {
            continue;
        }
        let part = Partition::new(blocks)?;
        if check_well_clusterable(&ds, &part)?.verdict {
            return Ok((ds, part));
        }
    }
    Err(Error::invalid("could not draw a well-clusterable layout"))
}

fn positions(ds: &Dataset, ids: &[usize]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|&id| ds.position_of(id).ok_or(Error::UnknownId(id)))
        .collect()
}

/// Largest edge of a Euclidean minimum spanning tree over `ids`; 0 for one point.
pub fn mst_max_edge(ds: &Dataset, ids: &[usize]) -> Result<f64> {
    let pos = positions(ds, ids)?;
    if pos.is_empty() {
        return Err(Error::invalid("MST needs at least one point"));
    }
    Ok(prim(ds, &pos).into_iter().fold(0.0, f64::max))
}

/// Edge weights of a minimum spanning tree over `pos`, by Prim's algorithm.
pub(crate) fn prim(ds: &Dataset, pos: &[usize]) -> Vec<f64> {
    let s = pos.len();
    let mut in_tree = vec![false; s];
    let mut best = vec![f64::INFINITY; s];
    let mut edges = Vec::with_capacity(s.saturating_sub(1));
    let mut cur = 0;
    in_tree[0] = true;
    for _ in 1..s {
        let mut next = usize::MAX;
        for v in 0..s {
            if in_tree[v] {
                continue;
            }
            best[v] = best[v].min(ds.dist_pos(pos[cur], pos[v]));
            if next == usize::MAX || best[v] < best[next] {
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push(best[next]);
        cur = next;
    }
    edges
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    /// Smallest id of the cluster.
    pub cluster: usize,
    pub size: usize,
    /// Largest MST edge inside the cluster.
    pub max_intra: f64,
    /// Smallest distance to any other cluster.
    pub min_inter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellClusterabilityReport {
    pub clusters: Vec<ClusterStats>,
    /// `inter[i][j]`: smallest distance between clusters `i` and `j`.
    pub inter: Vec<Vec<f64>>,
    pub verdict: bool,
    /// Cluster index pairs `(i, j)`, `i < j`, that break the condition.
    pub witnesses: Vec<(usize, usize)>,
}

/// Checks that every inter-cluster distance exceeds twice the larger of the
/// two clusters' largest MST edges.
pub fn check_well_clusterable(ds: &Dataset, partition: &Partition) -> Result<WellClusterabilityReport> {
    if partition.ground() != ds.ids() {
        return Err(Error::invalid("partition does not cover the dataset"));
    }
    let blocks: Vec<Vec<usize>> = partition
        .blocks()
        .iter()
        .map(|b| positions(ds, b))
        .collect::<Result<_>>()?;
    let m = blocks.len();
    let intra: Vec<f64> = blocks
        .iter()
        .map(|b| prim(ds, b).into_iter().fold(0.0, f64::max))
        .collect();
    let mut inter = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let mut d = f64::INFINITY;
            for &p in &blocks[i] {
                for &q in &blocks[j] {
                    d = d.min(ds.dist_pos(p, q));
                }
            }
            inter[i][j] = d;
            inter[j][i] = d;
        }
    }
    let mut witnesses = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if inter[i][j] <= 2.0 * intra[i].max(intra[j]) {
                witnesses.push((i, j));
            }
        }
    }
    let clusters = (0..m)
        .map(|i| ClusterStats {
            cluster: partition.blocks()[i][0],
            size: blocks[i].len(),
            max_intra: intra[i],
            min_inter: (0..m)
                .filter(|&j| j != i)
                .map(|j| inter[i][j])
                .fold(f64::INFINITY, f64::min),
        })
        .collect();
    Ok(WellClusterabilityReport {
        clusters,
        inter,
        verdict: witnesses.is_empty(),
        witnesses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_samples: usize,
}

impl DbscanParams {
    pub fn new(eps: f64, min_samples: usize) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if min_samples == 0 {
            return Err(Error::invalid("min_samples must be at least 1"));
        }
        Ok(DbscanParams { eps, min_samples })
    }
}

/// DBSCAN settings for the bundled real datasets: name, eps, min_samples.
pub const DBSCAN_PRESETS: &[(&str, f64, usize)] = &[
    ("wholesale", 0.1, 3),
    ("diabetes", 0.6, 3),
    ("digits", 0.5, 3),
    ("yeast", 0.5, 3),
    ("iris", 0.25, 3),
    ("wine", 1.5, 3),
    ("wdbc", 0.1, 3),
];

pub fn dbscan_preset(name: &str) -> Option<DbscanParams> {
    DBSCAN_PRESETS
        .iter()
        .find(|(n, _, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, eps, min_samples)| DbscanParams { eps, min_samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanResult {
    /// Clusters over core and border points.
    pub clusters: Partition,
    pub noise: Vec<usize>,
}

/// Density clustering. A point is core when at least `min_samples` points,
/// itself included, lie within `eps`. Core points within `eps` of each other
/// share a cluster. A non-core point joins the cluster of its nearest core
/// neighbor (smallest id on ties) or else is noise.
pub fn dbscan(ds: &Dataset, params: DbscanParams) -> DbscanResult {
    let n = ds.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|p| (0..n).filter(|&q| ds.dist_pos(p, q) <= params.eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_samples).collect();
    let mut label = vec![usize::MAX; n];
    for start in 0..n {
        if !core[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = start;
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if core[q] && label[q] == usize::MAX {
                    label[q] = start;
                    stack.push(q);
                }
            }
        }
    }
    let mut noise = Vec::new();
    let mut pairs = Vec::new();
    for p in 0..n {
        let l = if core[p] {
            Some(label[p])
        } else {
            neighbors[p]
                .iter()
                .filter(|&&q| core[q])
                .min_by(|&&a, &&b| ds.dist_pos(p, a).total_cmp(&ds.dist_pos(p, b)).then(a.cmp(&b)))
                .map(|&q| label[q])
        };
        match l {
            Some(l) => pairs.push((ds.id(p), l)),
            None => noise.push(ds.id(p)),
        }
    }
    DbscanResult {
        clusters: Partition::from_labels(pairs),
        noise,
    }
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
    /// Rescale every column to `[0, 1]`; constant columns become 0.
    pub min_max_scale: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            delimiter: b',',
            min_max_scale: false,
        }
    }
}

/// Reads one point per row; ids follow row order.
pub fn load_csv(path: &Path, opts: CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .flexible(true)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let parse_err = |row: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let mut dim = None;
    let mut coords = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let d = *dim.get_or_insert(record.len());
        if record.len() != d {
            return Err(parse_err(
                row,
                record.len().min(d) + 1,
                format!("expected {d} fields, found {}", record.len()),
            ));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(row, c + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(row, c + 1, format!("`{field}` is not finite")));
            }
            coords.push(v);
        }
    }
    let dim = dim.ok_or_else(|| Error::invalid(format!("{} contains no data rows", path.display())))?;
    let mut ds = Dataset::new(dim, coords)?;
    if opts.min_max_scale {
        ds = min_max_scale(&ds);
    }
    ds.ensure_distinct()?;
    Ok(ds)
}

pub fn min_max_scale(ds: &Dataset) -> Dataset {
    let d = ds.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in ds.points() {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    ds.map_coords(|k, x| {
        if hi[k] > lo[k] {
            (x - lo[k]) / (hi[k] - lo[k])
        } else {
            0.0
        }
    })
}

/// Writes a header `x0,x1,...` and one row per point in shortest
/// round-trip notation.
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::new();
    let header: Vec<String> = (0..ds.dim()).map(|k| format!("x{k}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for p in ds.points() {
        let row: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err)
}

/// `data.csv` -> `data.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// [`save_csv`] plus a pretty-printed JSON sidecar describing the data.
pub fn save_csv_with_sidecar(ds: &Dataset, path: &Path, meta: &serde_json::Value) -> Result<()> {
    save_csv(ds, path)?;
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(meta)?;
    fs::write(&side, text + "\n").map_err(|source| Error::Io { path: side, source })
}

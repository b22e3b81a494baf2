//! Point sets with stable ids.
//!
//! A [`Dataset`] keeps its coordinates in one row-major buffer. Every point
//! carries an integer id that survives deletions, so partitions computed on
//! `P` and on `P` minus a few points can be compared id by id.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euclidean distance between two points of equal dimension.
pub fn euclidean_dist(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    Ok(dist(p, q))
}

#[inline]
pub(crate) fn dist(p: &[f64], q: &[f64]) -> f64 {
    sq_dist(p, q).sqrt()
}

#[inline]
pub(crate) fn sq_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
    ids: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from a row-major coordinate buffer; ids are `0..n`.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "coordinate buffer of length {} is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        Self::with_ids(dim, coords, (0..n).collect())
    }

    /// Builds a dataset with explicit ids, which must be strictly increasing.
    pub fn with_ids(dim: usize, coords: Vec<f64>, ids: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if ids.is_empty() {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        if coords.len() != ids.len() * dim {
            return Err(Error::invalid(format!(
                "{} ids but {} coordinates at dimension {dim}",
                ids.len(),
                coords.len()
            )));
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("ids must be strictly increasing"));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate at point id {}",
                ids[pos / dim]
            )));
        }
        Ok(Dataset { dim, coords, ids })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("dataset must contain at least one point"))?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::new(dim, coords)
    }

    /// One-dimensional dataset from scalar positions.
    pub fn from_line(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.to_vec())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinates of the point stored at `pos`.
    #[inline]
    pub fn point(&self, pos: usize) -> &[f64] {
        &self.coords[pos * self.dim..(pos + 1) * self.dim]
    }

    #[inline]
    pub fn id(&self, pos: usize) -> usize {
        self.ids[pos]
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn position_of(&self, id: usize) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Coordinates of the point with the given id.
    pub fn point_by_id(&self, id: usize) -> Result<&[f64]> {
        self.position_of(id)
            .map(|pos| self.point(pos))
            .ok_or(Error::UnknownId(id))
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    #[inline]
    pub(crate) fn dist_pos(&self, a: usize, b: usize) -> f64 {
        dist(self.point(a), self.point(b))
    }

    /// The dataset with the given ids removed; surviving points keep their ids.
    pub fn without(&self, removed: &[usize]) -> Result<Dataset> {
        let mut drop = vec![false; self.len()];
        for &id in removed {
            let pos = self.position_of(id).ok_or(Error::UnknownId(id))?;
            drop[pos] = true;
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&p| !drop[p]).collect();
        if keep.is_empty() {
            return Err(Error::invalid("deletion would remove every point"));
        }
        Ok(self.select(&keep))
    }

    /// Sub-dataset of the given positions, in the given order.
    pub(crate) fn select(&self, positions: &[usize]) -> Dataset {
        let mut coords = Vec::with_capacity(positions.len() * self.dim);
        let mut ids = Vec::with_capacity(positions.len());
        for &p in positions {
            coords.extend_from_slice(self.point(p));
            ids.push(self.ids[p]);
        }
        Dataset {
            dim: self.dim,
            coords,
            ids,
        }
    }

    /// Applies `f` to every coordinate, keeping ids.
    pub fn map_coords(&self, mut f: impl FnMut(usize, f64) -> f64) -> Dataset {
        let dim = self.dim;
        let coords = self.coords.iter().enumerate().map(|(i, &c)| f(i % dim, c)).collect();
        Dataset {
            dim,
            coords,
            ids: self.ids.clone(),
        }
    }

    /// Fails with the first pair of coinciding points, if any.
    pub fn ensure_distinct(&self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                let (a, b) = (self.id(w[0]).min(self.id(w[1])), self.id(w[0]).max(self.id(w[1])));
                return Err(Error::DuplicatePoints { first: a, second: b });
            }
        }
        Ok(())
    }
}

/// Minimum and maximum pairwise distance and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceExtremes {
    pub dmin: f64,
    pub dmax: f64,
    /// `dmax / dmin`, the aspect ratio.
    pub aspect: f64,
}

pub fn distance_extremes(ds: &Dataset) -> Result<DistanceExtremes> {
    if ds.len() < 2 {
        return Err(Error::invalid("distance extremes need at least two points"));
    }
    let mut dmin = f64::INFINITY;
    let mut dmax: f64 = 0.0;
    for a in 0..ds.len() {
        for b in a + 1..ds.len() {
            let d = ds.dist_pos(a, b);
            if d == 0.0 {
                return Err(Error::DuplicatePoints {
                    first: ds.id(a),
                    second: ds.id(b),
                });
            }
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
    }
    Ok(DistanceExtremes {
        dmin,
        dmax,
        aspect: dmax / dmin,
    })
}

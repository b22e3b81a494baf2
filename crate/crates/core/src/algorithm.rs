//! A uniform handle on every clustering algorithm in the crate.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hierarchy::{clnss_pipeline, Mode};
use crate::linkage::{agglomerate, LinkageKind};
use crate::partition::Partition;
use crate::rhst::ShiftMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Algorithm {
    /// Exponential-mechanism centers on a randomly shifted tree.
    Stable {
        epsilon: f64,
    },
    /// Greedy centers on a randomly shifted tree.
    ClnssGreedy,
    /// Greedy centers on the unshifted tree.
    ClnssDeterministic,
    Linkage {
        kind: LinkageKind,
    },
}

impl Algorithm {
    /// Parses a command-line name; `stable` needs `epsilon`, the others reject it.
    pub fn from_name(name: &str, epsilon: Option<f64>) -> Result<Algorithm> {
        let alg = match name {
            "stable" => {
                let epsilon = epsilon.ok_or_else(|| Error::invalid("algorithm `stable` needs an epsilon"))?;
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
                }
                return Ok(Algorithm::Stable { epsilon });
            }
            "clnss-greedy" => Algorithm::ClnssGreedy,
            "clnss-deterministic" => Algorithm::ClnssDeterministic,
            other => Algorithm::Linkage {
                kind: other
                    .parse()
                    .map_err(|_| Error::invalid(format!("unknown algorithm `{other}`")))?,
            },
        };
        if epsilon.is_some() {
            return Err(Error::invalid(format!(
                "epsilon only applies to `stable`, not `{name}`"
            )));
        }
        Ok(alg)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Stable { .. } => "stable",
            Algorithm::ClnssGreedy => "clnss-greedy",
            Algorithm::ClnssDeterministic => "clnss-deterministic",
            Algorithm::Linkage { kind } => kind.name(),
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            Algorithm::Stable { epsilon } => Some(*epsilon),
            _ => None,
        }
    }

    /// True when the output ignores the random stream.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Algorithm::ClnssDeterministic | Algorithm::Linkage { .. })
    }

    /// Center rule and shift of the tree algorithms; `None` for linkage.
    pub fn tree_mode(&self) -> Option<(Mode, ShiftMode)> {
        match *self {
            Algorithm::Stable { epsilon } => Some((Mode::Stable { epsilon }, ShiftMode::Random)),
            Algorithm::ClnssGreedy => Some((Mode::Greedy, ShiftMode::Random)),
            Algorithm::ClnssDeterministic => Some((Mode::Greedy, ShiftMode::Zero)),
            Algorithm::Linkage { .. } => None,
        }
    }

    /// The `k`-block level of the algorithm's hierarchy on `ds`.
    pub fn partition_at<R: Rng + ?Sized>(&self, ds: &Dataset, k: usize, rng: &mut R) -> Result<Partition> {
        if k == 0 || k > ds.len() {
            return Err(Error::invalid(format!("k = {k} outside 1..={}", ds.len())));
        }
        match (self.tree_mode(), self) {
            (Some((mode, shift)), _) => {
                let out = clnss_pipeline(ds, rng, mode, &shift, Some(k))?;
                out.hierarchy.level(k)
            }
            (None, Algorithm::Linkage { kind }) => agglomerate(ds, *kind).cut(k),
            (None, _) => unreachable!("tree algorithms have a mode"),
        }
    }

    /// All levels `1..=levels` of the algorithm's hierarchy on `ds`.
    pub fn levels<R: Rng + ?Sized>(&self, ds: &Dataset, levels: usize, rng: &mut R) -> Result<Vec<Partition>> {
        if levels == 0 || levels > ds.len() {
            return Err(Error::invalid(format!("level count {levels} outside 1..={}", ds.len())));
        }
        match (self.tree_mode(), self) {
            (Some((mode, shift)), _) => {
                let h = clnss_pipeline(ds, rng, mode, &shift, Some(levels))?.hierarchy;
                (1..=levels).map(|k| h.level(k)).collect()
            }
            (None, Algorithm::Linkage { kind }) => {
                let d = agglomerate(ds, *kind);
                (1..=levels).map(|k| d.cut(k)).collect()
            }
            (None, _) => unreachable!("tree algorithms have a mode"),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Stable { epsilon } => write!(f, "stable(eps={epsilon})"),
            other => f.write_str(other.name()),
        }
    }
}

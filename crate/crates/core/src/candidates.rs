//! Candidate-site extraction from a score surface, priority tiers, and
//! merging with existing branches.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{DistanceMode, Point};
use crate::overlay::ScoreRaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Proposed,
    Existing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    First,
    Second,
    Third,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSite {
    pub id: String,
    pub location: Point,
    pub score: f64,
    pub origin: Origin,
    #[serde(default)]
    pub tier: Option<Tier>,
    /// Forced into every MCLP solution when set.
    #[serde(default)]
    pub fixed_open: bool,
}

impl CandidateSite {
    pub fn existing(id: impl Into<String>, location: Point, score: f64) -> Self {
        CandidateSite {
            id: id.into(),
            location,
            score,
            origin: Origin::Existing,
            tier: None,
            fixed_open: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionConfig {
    #[serde(default)]
    pub min_score: f64,
    /// Meters between any two proposed sites.
    pub min_separation: f64,
    pub max_proposed: usize,
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_separation.is_finite() && self.min_separation >= 0.0) {
            return Err(Error::config("extraction.min_separation", "must be >= 0"));
        }
        if self.max_proposed == 0 {
            return Err(Error::config("extraction.max_proposed", "must be >= 1"));
        }
        if !self.min_score.is_finite() {
            return Err(Error::config("extraction.min_score", "must be finite"));
        }
        Ok(())
    }
}

/// Greedy non-maximum suppression over the score surface.
///
/// Repeatedly takes the best remaining cell (ties by row, then column),
/// emits its center, and suppresses every cell closer than `min_separation`.
/// Only unmasked cells with a positive score of at least `min_score` are
/// eligible. An empty result means no cell qualified.
pub fn extract(raster: &ScoreRaster, cfg: &ExtractionConfig, mode: DistanceMode) -> Result<Vec<CandidateSite>> {
    cfg.validate()?;
    let grid = &raster.grid;
    let mut eligible: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            let v = raster.values[k];
            raster.mask[k] && v > 0.0 && v >= cfg.min_score
        })
        .collect();
    // Row-major index order already encodes the (row, col) tie-break.
    eligible.sort_by(|&a, &b| raster.values[b].total_cmp(&raster.values[a]).then(a.cmp(&b)));

    let width = cfg.max_proposed.to_string().len().max(2);
    let mut picked: Vec<(usize, Point)> = Vec::new();
    for k in eligible {
        if picked.len() == cfg.max_proposed {
            break;
        }
        let c = grid.center_of(k);
        if picked.iter().all(|&(_, p)| mode.distance(c, p) >= cfg.min_separation) {
            picked.push((k, c));
        }
    }
    Ok(picked
        .into_iter()
        .enumerate()
        .map(|(n, (k, location))| CandidateSite {
            id: format!("P{:0width$}", n + 1),
            location,
            score: raster.values[k],
            origin: Origin::Proposed,
            tier: None,
            fixed_open: false,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TieringRule {
    /// Positional thirds of the score ranking; leftovers go to the upper tiers.
    #[default]
    Terciles,
    /// Score cutoffs: `score >= first` is First, `score >= second` is Second.
    Thresholds { first: f64, second: f64 },
}

/// Assigns tiers, returning the sites in their original order.
///
/// Under terciles, sites are ranked by score with ties kept in input order;
/// 14 sites split 5/5/4.
pub fn tier(sites: &[CandidateSite], rule: TieringRule) -> Vec<CandidateSite> {
    let mut out = sites.to_vec();
    match rule {
        TieringRule::Terciles => {
            let n = out.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| out[b].score.total_cmp(&out[a].score).then(a.cmp(&b)));
            let (base, rem) = (n / 3, n % 3);
            let first = base + usize::from(rem >= 1);
            let second = base + usize::from(rem >= 2);
            for (rank, &i) in order.iter().enumerate() {
                out[i].tier = Some(if rank < first {
                    Tier::First
                } else if rank < first + second {
                    Tier::Second
                } else {
                    Tier::Third
                });
            }
        }
        TieringRule::Thresholds { first, second } => {
            for s in &mut out {
                s.tier = Some(if s.score >= first {
                    Tier::First
                } else if s.score >= second {
                    Tier::Second
                } else {
                    Tier::Third
                });
            }
        }
    }
    out
}

/// Union of proposed and existing sites; ids must stay unique.
pub fn merge(proposed: &[CandidateSite], existing: &[CandidateSite]) -> Result<Vec<CandidateSite>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(proposed.len() + existing.len());
    for site in proposed.iter().chain(existing) {
        if !seen.insert(site.id.as_str()) {
            return Err(Error::Input(format!("duplicate candidate id `{}`", site.id)));
        }
        out.push(site.clone());
    }
    for site in &mut out[proposed.len()..] {
        site.origin = Origin::Existing;
    }
    Ok(out)
}

//! Maximal covering location: choose `p` sites so that the population of
//! demand areas within the coverage standard of at least one chosen site is
//! as large as possible.
//!
//! Candidates are kept sorted by id inside an instance, so "smallest index"
//! and "smallest id" tie-breaks coincide.

mod curve;
mod exact;
mod greedy;
mod io;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSite;
use crate::error::{Error, Result};
use crate::geo::{DistanceMode, Point, Polygon};

pub use curve::{coverage_curve, CoverageCurve, CurveMethod, CurvePoint};
pub use exact::{solve_exact, ExactOptions, DEFAULT_EXACT_CAP};
pub use greedy::{improve_swap, solve_greedy};
pub use io::InstanceFile;

#[derive(Debug, Clone, PartialEq)]
pub struct DemandArea {
    pub id: String,
    pub geometry: Option<Polygon>,
    pub centroid: Point,
    pub population: u64,
}

impl DemandArea {
    /// Area from a polygon; the centroid defaults to the mean of its vertices
    /// and must lie inside the polygon.
    pub fn from_polygon(id: impl Into<String>, polygon: Polygon, population: u64, centroid: Option<Point>) -> Result<Self> {
        let id = id.into();
        let centroid = centroid.unwrap_or_else(|| polygon.vertex_centroid());
        if !polygon.contains(centroid) {
            return Err(Error::Input(format!(
                "demand area `{id}`: centroid ({}, {}) lies outside its polygon",
                centroid.x, centroid.y
            )));
        }
        Ok(DemandArea { id, geometry: Some(polygon), centroid, population })
    }

    pub fn at_point(id: impl Into<String>, centroid: Point, population: u64) -> Self {
        DemandArea { id: id.into(), geometry: None, centroid, population }
    }
}

/// A location that may host a facility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub location: Point,
    #[serde(default)]
    pub fixed_open: bool,
}

impl From<&CandidateSite> for Site {
    fn from(c: &CandidateSite) -> Self {
        Site { id: c.id.clone(), location: c.location, fixed_open: c.fixed_open }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverageStandard {
    /// Straight-line radius in meters.
    Radius { radius: f64 },
    /// Travel time at a constant speed; the effective radius is speed × time.
    TravelTime { minutes: f64, speed_kmh: f64 },
}

impl CoverageStandard {
    pub fn effective_radius(&self) -> Result<f64> {
        let r = match *self {
            CoverageStandard::Radius { radius } => radius,
            CoverageStandard::TravelTime { minutes, speed_kmh } => {
                if !(minutes > 0.0 && speed_kmh > 0.0) {
                    return Err(Error::config("standard", "travel time and speed must be positive"));
                }
                speed_kmh * 1000.0 / 60.0 * minutes
            }
        };
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::config("standard", format!("coverage radius must be positive, got {r}")));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MclpInstance {
    areas: Vec<DemandArea>,
    sites: Vec<Site>,
    standard: Option<CoverageStandard>,
    mode: DistanceMode,
    /// Areas covered by each site.
    covers: Vec<Vec<usize>>,
    /// Sites covering each area (N_i).
    covered_by: Vec<Vec<usize>>,
}

impl MclpInstance {
    /// Instance from an explicit |areas| × |sites| 0/1 matrix.
    pub fn from_matrix(areas: Vec<DemandArea>, sites: Vec<Site>, matrix: &[Vec<u8>]) -> Result<Self> {
        if matrix.len() != areas.len() {
            return Err(Error::Input(format!(
                "coverage matrix has {} rows for {} areas",
                matrix.len(),
                areas.len()
            )));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != sites.len() {
                return Err(Error::Input(format!(
                    "coverage matrix row {i} has {} columns for {} candidates",
                    row.len(),
                    sites.len()
                )));
            }
            if let Some(v) = row.iter().find(|&&v| v > 1) {
                return Err(Error::Input(format!("coverage matrix row {i} holds non-binary value {v}")));
            }
        }
        Self::assemble(areas, sites, None, DistanceMode::Planar, |i, j| matrix[i][j] == 1)
    }

    fn assemble(
        areas: Vec<DemandArea>,
        sites: Vec<Site>,
        standard: Option<CoverageStandard>,
        mode: DistanceMode,
        covered: impl Fn(usize, usize) -> bool,
    ) -> Result<Self> {
        if areas.is_empty() {
            return Err(Error::Input("no demand areas".into()));
        }
        if sites.is_empty() {
            return Err(Error::Input("no candidate sites".into()));
        }
        let mut seen = HashSet::new();
        if let Some(a) = areas.iter().find(|a| !seen.insert(a.id.as_str())) {
            return Err(Error::Input(format!("duplicate demand area id `{}`", a.id)));
        }
        let mut seen = HashSet::new();
        if let Some(s) = sites.iter().find(|s| !seen.insert(s.id.as_str())) {
            return Err(Error::Input(format!("duplicate candidate id `{}`", s.id)));
        }

        let mut order: Vec<usize> = (0..sites.len()).collect();
        order.sort_by(|&a, &b| sites[a].id.cmp(&sites[b].id));
        let mut covers = vec![Vec::new(); sites.len()];
        let mut covered_by = vec![Vec::new(); areas.len()];
        for (i, n_i) in covered_by.iter_mut().enumerate() {
            for (j, &orig) in order.iter().enumerate() {
                if covered(i, orig) {
                    n_i.push(j);
                    covers[j].push(i);
                }
            }
        }
        let sites = order.into_iter().map(|k| sites[k].clone()).collect();
        Ok(MclpInstance { areas, sites, standard, mode, covers, covered_by })
    }

    pub fn areas(&self) -> &[DemandArea] {
        &self.areas
    }

    /// Candidate sites, sorted by id.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn standard(&self) -> Option<CoverageStandard> {
        self.standard
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    /// Areas covered by site `j`.
    pub fn covers(&self, j: usize) -> &[usize] {
        &self.covers[j]
    }

    /// N_i: sites covering area `i`.
    pub fn covered_by(&self, i: usize) -> &[usize] {
        &self.covered_by[i]
    }

    pub fn a(&self, i: usize, j: usize) -> u8 {
        u8::from(self.covered_by[i].binary_search(&j).is_ok())
    }

    pub fn matrix(&self) -> Vec<Vec<u8>> {
        (0..self.areas.len())
            .map(|i| (0..self.sites.len()).map(|j| self.a(i, j)).collect())
            .collect()
    }

    pub fn total_population(&self) -> u64 {
        self.areas.iter().map(|a| a.population).sum()
    }

    /// Population of areas that at least one site can cover.
    pub fn coverable_population(&self) -> u64 {
        self.areas
            .iter()
            .zip(&self.covered_by)
            .filter(|(_, n)| !n.is_empty())
            .map(|(a, _)| a.population)
            .sum()
    }

    pub fn fixed_sites(&self) -> Vec<usize> {
        (0..self.sites.len()).filter(|&j| self.sites[j].fixed_open).collect()
    }

    /// Copy with every population multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let mut out = self.clone();
        for a in &mut out.areas {
            a.population *= factor;
        }
        out
    }

    /// Objective of an arbitrary selection, recomputed from the coverage rows.
    pub fn evaluate(&self, selected: &[usize]) -> u64 {
        self.covered_by
            .iter()
            .zip(&self.areas)
            .filter(|(n_i, _)| n_i.iter().any(|j| selected.contains(j)))
            .map(|(_, a)| a.population)
            .sum()
    }

    pub fn coverage_pct(&self, z: u64) -> f64 {
        match self.total_population() {
            0 => 0.0,
            total => (z as f64 * 100.0) / total as f64,
        }
    }

    pub(crate) fn check_p(&self, p: usize) -> Result<()> {
        if p == 0 || p > self.sites.len() {
            return Err(Error::Input(format!(
                "facility budget p = {p} must lie in 1..={}",
                self.sites.len()
            )));
        }
        let fixed = self.fixed_sites().len();
        if fixed > p {
            return Err(Error::Input(format!("{fixed} fixed-open sites exceed p = {p}")));
        }
        Ok(())
    }

    /// Builds a solution record for `selected` (site indices).
    pub fn solution(&self, mut selected: Vec<usize>, certificate: Certificate, marginal_gains: Vec<u64>) -> MclpSolution {
        selected.sort_unstable();
        selected.dedup();
        let covered: Vec<String> = self
            .covered_by
            .iter()
            .zip(&self.areas)
            .filter(|(n_i, _)| n_i.iter().any(|j| selected.contains(j)))
            .map(|(_, a)| a.id.clone())
            .collect();
        let z = self.evaluate(&selected);
        MclpSolution {
            p: selected.len(),
            selected: selected.iter().map(|&j| self.sites[j].id.clone()).collect(),
            selected_idx: selected,
            covered,
            z,
            total: self.total_population(),
            coverage_pct: self.coverage_pct(z),
            certificate,
            marginal_gains,
        }
    }
}

/// a_ij = 1 iff the area centroid lies within the effective radius of the site (inclusive).
pub fn build_coverage(
    areas: Vec<DemandArea>,
    sites: Vec<Site>,
    standard: &CoverageStandard,
    mode: DistanceMode,
) -> Result<MclpInstance> {
    let radius = standard.effective_radius()?;
    for a in &areas {
        mode.validate(a.centroid)?;
    }
    for s in &sites {
        mode.validate(s.location)?;
    }
    let (ca, cs): (Vec<Point>, Vec<Point>) = (
        areas.iter().map(|a| a.centroid).collect(),
        sites.iter().map(|s| s.location).collect(),
    );
    MclpInstance::assemble(areas, sites, Some(*standard), mode, |i, j| {
        mode.distance(ca[i], cs[j]) <= radius
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Optimal,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MclpSolution {
    pub p: usize,
    /// Selected site ids, ascending.
    pub selected: Vec<String>,
    #[serde(skip)]
    pub selected_idx: Vec<usize>,
    pub covered: Vec<String>,
    pub z: u64,
    pub total: u64,
    pub coverage_pct: f64,
    pub certificate: Certificate,
    /// Per-round gains of the greedy construction that produced (or seeded) this solution.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marginal_gains: Vec<u64>,
}

/// Coverage bitset over demand areas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct AreaSet(Vec<u64>);

impl AreaSet {
    pub(crate) fn new(n: usize) -> Self {
        AreaSet(vec![0; n.div_ceil(64)])
    }

    #[inline]
    pub(crate) fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub(crate) fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
}

impl MclpInstance {
    /// Population newly covered by site `j` given the already covered set.
    #[inline]
    pub(crate) fn gain(&self, j: usize, covered: &AreaSet) -> u64 {
        self.covers[j]
            .iter()
            .filter(|&&i| !covered.contains(i))
            .map(|&i| self.areas[i].population)
            .sum()
    }

    pub(crate) fn cover_with(&self, j: usize, covered: &mut AreaSet) {
        for &i in &self.covers[j] {
            covered.insert(i);
        }
    }
}

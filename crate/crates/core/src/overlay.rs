//! Criterion rasterization and weighted overlay.
//!
//! Rows are numbered from the north edge of the grid, so row-major order
//! matches Esri ASCII output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{classify, score, CriterionKind, CriterionSpec, Level, RawValue, ScoreScheme};
use crate::error::{Error, Result};
use crate::geo::{DistanceMode, Point, Polygon, SpatialIndex};
use crate::weights::WeightVector;

pub const DEFAULT_MAX_CELLS: usize = 4_000_000;

fn default_max_cells() -> usize {
    DEFAULT_MAX_CELLS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Lower-left corner of the grid.
    pub origin: Point,
    pub cell_size: f64,
    pub ncols: usize,
    pub nrows: usize,
    #[serde(default = "default_max_cells", skip_serializing)]
    pub max_cells: usize,
}

impl GridSpec {
    pub fn new(origin: Point, cell_size: f64, ncols: usize, nrows: usize) -> Result<Self> {
        let g = GridSpec { origin, cell_size, ncols, nrows, max_cells: DEFAULT_MAX_CELLS };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::config("grid.cell_size", "must be positive"));
        }
        if !self.origin.is_finite() {
            return Err(Error::config("grid.origin", "must be finite"));
        }
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::config("grid", "ncols and nrows must be positive"));
        }
        match self.ncols.checked_mul(self.nrows) {
            Some(n) if n <= self.max_cells => Ok(()),
            _ => Err(Error::config(
                "grid",
                format!("{} x {} cells exceeds the cap of {}", self.ncols, self.nrows, self.max_cells),
            )),
        }
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center of the cell at (row, col), row 0 being the northernmost.
    pub fn cell_center(&self, row: usize, col: usize) -> Point {
        Point::new(
            self.origin.x + (col as f64 + 0.5) * self.cell_size,
            self.origin.y + ((self.nrows - row) as f64 - 0.5) * self.cell_size,
        )
    }

    pub fn center_of(&self, index: usize) -> Point {
        self.cell_center(index / self.ncols, index % self.ncols)
    }

    /// Cell containing `p`; points on the far north/east edge belong to the last cell.
    pub fn locate(&self, p: Point) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.cell_size;
        let fy = (p.y - self.origin.y) / self.cell_size;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= self.ncols as f64 && fy <= self.nrows as f64) {
            return None;
        }
        let col = (fx.floor() as usize).min(self.ncols - 1);
        let from_south = (fy.floor() as usize).min(self.nrows - 1);
        Some((self.nrows - 1 - from_south, col))
    }
}

/// Zoning polygon with its attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub polygon: Polygon,
    pub value: ZoneValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZoneValue {
    Level(Level),
    Number(f64),
}

/// Features backing one criterion.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Points(Vec<Point>),
    Zones(Vec<Zone>),
}

/// Study-area mask: true where the cell center lies in any polygon.
pub fn study_mask(grid: &GridSpec, areas: &[Polygon]) -> Vec<bool> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let c = grid.center_of(k);
            areas.iter().any(|a| a.contains(c))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuitabilityRaster {
    pub grid: GridSpec,
    pub criterion_id: String,
    /// Scores per cell; masked cells hold 0 and must be read through `mask`.
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    /// Σ w_k s_k
    WeightedSum,
    /// Π (w_k s_k)
    LiteralProduct,
    /// Π s_k^w_k, with 0^w = 0
    #[default]
    WeightedGeometric,
}

impl CombineMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CombineMode::WeightedSum => "weighted_sum",
            CombineMode::LiteralProduct => "literal_product",
            CombineMode::WeightedGeometric => "weighted_geometric",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRaster {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub mode: CombineMode,
}

impl ScoreRaster {
    pub fn value_at(&self, row: usize, col: usize) -> Option<f64> {
        let k = row * self.grid.ncols + col;
        self.mask[k].then(|| self.values[k])
    }
}

/// Scores every unmasked cell of `grid` for one criterion.
///
/// Distance criteria measure from the cell center to the nearest point
/// feature. Zoning criteria read the attribute of the zone containing the
/// cell center; where several zones contain it (shared edges) the best
/// resulting score wins, which keeps the result independent of feature order.
pub fn rasterize(
    spec: &CriterionSpec,
    layer: &Layer,
    grid: &GridSpec,
    mask: &[bool],
    scheme: &ScoreScheme,
    mode: DistanceMode,
) -> Result<SuitabilityRaster> {
    if mask.len() != grid.len() {
        return Err(Error::Input(format!(
            "mask has {} cells, grid has {}",
            mask.len(),
            grid.len()
        )));
    }
    let cells: Vec<Result<f64>> = match (spec.kind, layer) {
        (CriterionKind::Distance, Layer::Points(points)) => {
            if points.is_empty() {
                return Err(Error::Input(format!(
                    "criterion `{}`: empty feature layer",
                    spec.id
                )));
            }
            let index = SpatialIndex::with_default_cell(points, mode)?;
            (0..grid.len())
                .into_par_iter()
                .map(|k| {
                    if !mask[k] {
                        return Ok(0.0);
                    }
                    let d = index.nearest_distance(grid.center_of(k))?;
                    Ok(score(classify(spec, RawValue::Number(d))?, scheme))
                })
                .collect()
        }
        (CriterionKind::Distance, Layer::Zones(_)) => {
            return Err(Error::Input(format!(
                "criterion `{}` needs a point layer, got polygons",
                spec.id
            )))
        }
        (_, Layer::Points(_)) => {
            return Err(Error::Input(format!(
                "criterion `{}` needs a polygon layer, got points",
                spec.id
            )))
        }
        (kind, Layer::Zones(zones)) => {
            for z in zones {
                let ok = matches!(
                    (kind, z.value),
                    (CriterionKind::Density, ZoneValue::Number(_))
                        | (CriterionKind::Categorical | CriterionKind::CostLevel, ZoneValue::Level(_))
                );
                if !ok {
                    return Err(Error::Input(format!(
                        "criterion `{}`: zone attribute {:?} does not fit kind {kind:?}",
                        spec.id, z.value
                    )));
                }
            }
            (0..grid.len())
                .into_par_iter()
                .map(|k| {
                    if !mask[k] {
                        return Ok(0.0);
                    }
                    let c = grid.center_of(k);
                    let mut best: Option<f64> = None;
                    for z in zones.iter().filter(|z| z.polygon.contains(c)) {
                        let raw = match z.value {
                            ZoneValue::Level(l) => RawValue::Category(l),
                            ZoneValue::Number(v) => RawValue::Number(v),
                        };
                        let s = score(classify(spec, raw)?, scheme);
                        best = Some(best.map_or(s, |b: f64| b.max(s)));
                    }
                    best.ok_or_else(|| {
                        Error::Input(format!(
                            "criterion `{}`: cell (row {}, col {}) at ({}, {}) lies in no zone",
                            spec.id,
                            k / grid.ncols,
                            k % grid.ncols,
                            c.x,
                            c.y
                        ))
                    })
                })
                .collect()
        }
    };
    let values = cells.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(SuitabilityRaster {
        grid: *grid,
        criterion_id: spec.id.clone(),
        values,
        mask: mask.to_vec(),
    })
}

/// Combines criterion rasters cell by cell.
///
/// Per-cell terms are sorted before accumulation, so the result does not
/// depend on the order of the (raster, weight) pairs.
pub fn combine(rasters: &[SuitabilityRaster], weights: &WeightVector, mode: CombineMode) -> Result<ScoreRaster> {
    let first = rasters
        .first()
        .ok_or_else(|| Error::Input("no rasters to combine".into()))?;
    if rasters.len() != weights.len() {
        return Err(Error::Input(format!(
            "{} rasters but {} weights",
            rasters.len(),
            weights.len()
        )));
    }
    if let Some(r) = rasters.iter().find(|r| r.grid != first.grid || r.mask != first.mask) {
        return Err(Error::Input(format!(
            "raster `{}` does not share the grid/mask of `{}`",
            r.criterion_id, first.criterion_id
        )));
    }
    let w = weights.as_slice();
    let values = (0..first.grid.len())
        .into_par_iter()
        .map(|k| {
            if !first.mask[k] {
                return 0.0;
            }
            let mut terms: Vec<f64> = rasters
                .iter()
                .zip(w)
                .map(|(r, &wk)| {
                    let s = r.values[k];
                    match mode {
                        CombineMode::WeightedSum | CombineMode::LiteralProduct => wk * s,
                        CombineMode::WeightedGeometric => {
                            if s == 0.0 {
                                0.0
                            } else {
                                s.powf(wk)
                            }
                        }
                    }
                })
                .collect();
            terms.sort_by(f64::total_cmp);
            match mode {
                CombineMode::WeightedSum => terms.iter().sum(),
                CombineMode::LiteralProduct | CombineMode::WeightedGeometric => terms.iter().product(),
            }
        })
        .collect();
    Ok(ScoreRaster {
        grid: first.grid,
        values,
        mask: first.mask.clone(),
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{standard_bank_criteria, validate_spec};

    fn spec(id: &str) -> CriterionSpec {
        let s = standard_bank_criteria().into_iter().find(|s| s.id == id).unwrap();
        validate_spec(&s).unwrap().spec
    }

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(Point::new(0.0, 0.0), 100.0, n, n).unwrap()
    }

    fn raster(id: &str, grid: &GridSpec, values: Vec<f64>) -> SuitabilityRaster {
        SuitabilityRaster { grid: *grid, criterion_id: id.into(), mask: vec![true; values.len()], values }
    }

    #[test]
    fn grid_geometry() {
        let g = GridSpec::new(Point::new(1000.0, 2000.0), 100.0, 4, 3).unwrap();
        assert_eq!(g.cell_center(0, 0), Point::new(1050.0, 2250.0));
        assert_eq!(g.cell_center(2, 3), Point::new(1350.0, 2050.0));
        assert_eq!(g.locate(Point::new(1050.0, 2250.0)), Some((0, 0)));
        assert_eq!(g.locate(Point::new(1400.0, 2300.0)), Some((0, 3)));
        assert_eq!(g.locate(Point::new(999.0, 2000.0)), None);
        assert!(GridSpec::new(Point::new(0.0, 0.0), 0.0, 4, 3).is_err());
        assert!(GridSpec::new(Point::new(0.0, 0.0), 1.0, 3000, 3000).is_err());
    }

    #[test]
    fn hospital_on_cell_center_scores_high() {
        let g = grid(3);
        let mask = vec![true; g.len()];
        let hospital = g.cell_center(1, 1);
        let r = rasterize(
            &spec("medicine_center"),
            &Layer::Points(vec![hospital]),
            &g,
            &mask,
            &ScoreScheme::default(),
            DistanceMode::Planar,
        )
        .unwrap();
        assert_eq!(r.values[4], 0.6);
        // Neighbours are 100 m away, still within the closed high band.
        assert_eq!(r.values[1], 0.6);
        // Diagonals are 141 m away.
        assert_eq!(r.values[0], 0.4);
    }

    #[test]
    fn far_business_center_is_non_suitable() {
        let g = grid(1);
        let center = g.cell_center(0, 0);
        let r = rasterize(
            &spec("business_center"),
            &Layer::Points(vec![Point::new(center.x + 400.0, center.y)]),
            &g,
            &[true],
            &ScoreScheme::default(),
            DistanceMode::Planar,
        )
        .unwrap();
        assert_eq!(r.values, vec![0.0]);
    }

    #[test]
    fn rasterize_input_errors() {
        let g = grid(2);
        let mask = vec![true; 4];
        let s = ScoreScheme::default();
        let err = rasterize(&spec("parking"), &Layer::Points(vec![]), &g, &mask, &s, DistanceMode::Planar).unwrap_err();
        assert!(err.to_string().contains("empty feature layer"));

        let half = Polygon::new(
            vec![Point::new(0.0, 0.0), Point::new(100.0, 0.0), Point::new(100.0, 200.0), Point::new(0.0, 200.0)],
            vec![],
        )
        .unwrap();
        let zones = Layer::Zones(vec![Zone { polygon: half, value: ZoneValue::Level(Level::High) }]);
        let err = rasterize(&spec("income_level"), &zones, &g, &mask, &s, DistanceMode::Planar).unwrap_err();
        assert!(err.to_string().contains("row 0, col 1"), "{err}");
        // Masking the uncovered column makes it valid.
        let ok = rasterize(&spec("income_level"), &zones, &g, &[true, false, true, false], &s, DistanceMode::Planar).unwrap();
        assert_eq!(ok.values, vec![0.6, 0.0, 0.6, 0.0]);

        assert!(rasterize(&spec("parking"), &zones, &g, &mask, &s, DistanceMode::Planar).is_err());
        let density_with_levels = rasterize(&spec("population_density"), &zones, &g, &[true, false, true, false], &s, DistanceMode::Planar);
        assert!(density_with_levels.is_err());
    }

    #[test]
    fn shared_zone_edge_takes_best_score() {
        let g = GridSpec::new(Point::new(0.0, 0.0), 100.0, 1, 1).unwrap();
        let square = |x0: f64| {
            Polygon::new(
                vec![Point::new(x0, 0.0), Point::new(x0 + 50.0, 0.0), Point::new(x0 + 50.0, 100.0), Point::new(x0, 100.0)],
                vec![],
            )
            .unwrap()
        };
        let a = Zone { polygon: square(0.0), value: ZoneValue::Level(Level::Low) };
        let b = Zone { polygon: square(50.0), value: ZoneValue::Level(Level::High) };
        let s = ScoreScheme::default();
        for layer in [Layer::Zones(vec![a.clone(), b.clone()]), Layer::Zones(vec![b, a])] {
            let r = rasterize(&spec("income_level"), &layer, &g, &[true], &s, DistanceMode::Planar).unwrap();
            assert_eq!(r.values, vec![0.6]);
        }
    }

    #[test]
    fn combine_examples() {
        let g = grid(1);
        let single = raster("a", &g, vec![0.4]);
        for mode in [CombineMode::WeightedSum, CombineMode::LiteralProduct, CombineMode::WeightedGeometric] {
            let out = combine(std::slice::from_ref(&single), &WeightVector::new(vec![1.0]).unwrap(), mode).unwrap();
            assert_eq!(out.values, vec![0.4]);
        }
        let a = raster("a", &g, vec![0.6]);
        let b = raster("b", &g, vec![0.4]);
        let w = WeightVector::new(vec![0.7, 0.3]).unwrap();
        let sum = combine(&[a.clone(), b.clone()], &w, CombineMode::WeightedSum).unwrap();
        assert!((sum.values[0] - 0.54).abs() < 1e-15);

        let zero = raster("z", &g, vec![0.0]);
        for mode in [CombineMode::LiteralProduct, CombineMode::WeightedGeometric] {
            let out = combine(&[a.clone(), zero.clone()], &w, mode).unwrap();
            assert_eq!(out.values, vec![0.0]);
        }
    }

    #[test]
    fn combine_input_errors() {
        let a = raster("a", &grid(1), vec![0.6]);
        let b = raster("b", &grid(2), vec![0.6; 4]);
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert!(combine(&[a.clone(), b], &w, CombineMode::WeightedSum).is_err());
        assert!(combine(std::slice::from_ref(&a), &w, CombineMode::WeightedSum).is_err());
        assert!(combine(&[], &w, CombineMode::WeightedSum).is_err());
    }
}

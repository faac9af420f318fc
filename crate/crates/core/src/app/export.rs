//! Output formats: Esri ASCII grids, GeoJSON point collections and the
//! coverage table.

use std::fmt::Write as _;

use geojson::{Feature, FeatureCollection, Geometry, JsonObject};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::candidates::CandidateSite;
use crate::error::{Error, Result};
use crate::geo::{DistanceMode, Point};
use crate::mclp::CoverageCurve;
use crate::overlay::GridSpec;

pub const NODATA: f64 = -9999.0;

/// Esri ASCII grid: six header lines, then rows from north to south.
/// Cells with `mask[k] == false` are written as NODATA.
pub fn ascii_grid(grid: &GridSpec, values: &[f64], mask: &[bool]) -> String {
    let mut out = String::with_capacity(grid.len() * 8 + 128);
    let _ = writeln!(out, "NCOLS {}", grid.ncols);
    let _ = writeln!(out, "NROWS {}", grid.nrows);
    let _ = writeln!(out, "XLLCORNER {}", grid.origin.x);
    let _ = writeln!(out, "YLLCORNER {}", grid.origin.y);
    let _ = writeln!(out, "CELLSIZE {}", grid.cell_size);
    let _ = writeln!(out, "NODATA_VALUE {NODATA}");
    for row in 0..grid.nrows {
        let line: Vec<String> = (0..grid.ncols)
            .map(|col| {
                let k = row * grid.ncols + col;
                if mask[k] {
                    values[k].to_string()
                } else {
                    NODATA.to_string()
                }
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsciiGrid {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Parses an Esri ASCII grid (header keys are case-insensitive;
/// XLLCENTER/YLLCENTER are converted to corners).
pub fn read_ascii_grid(text: &str) -> Result<AsciiGrid> {
    let bad = |m: String| Error::Input(format!("ASCII grid: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut ncols = None;
    let mut nrows = None;
    let mut x = None;
    let mut y = None;
    let mut centered = false;
    let mut cell = None;
    let mut nodata = NODATA;
    let mut body: Vec<&str> = Vec::new();
    for line in lines.by_ref() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default().to_ascii_uppercase();
        if key.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '.') {
            body.push(line);
            break;
        }
        let val = parts.next().ok_or_else(|| bad(format!("header `{key}` has no value")))?;
        let num = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("header `{key}`: {e}")));
        match key.as_str() {
            "NCOLS" => ncols = Some(val.parse::<usize>().map_err(|e| bad(format!("NCOLS: {e}")))?),
            "NROWS" => nrows = Some(val.parse::<usize>().map_err(|e| bad(format!("NROWS: {e}")))?),
            "XLLCORNER" => x = Some(num(val)?),
            "YLLCORNER" => y = Some(num(val)?),
            "XLLCENTER" => {
                x = Some(num(val)?);
                centered = true;
            }
            "YLLCENTER" => {
                y = Some(num(val)?);
                centered = true;
            }
            "CELLSIZE" => cell = Some(num(val)?),
            "NODATA_VALUE" => nodata = num(val)?,
            _ => return Err(bad(format!("unknown header `{key}`"))),
        }
    }
    body.extend(lines);
    let (Some(ncols), Some(nrows), Some(mut x), Some(mut y), Some(cell)) = (ncols, nrows, x, y, cell) else {
        return Err(bad("incomplete header".into()));
    };
    if centered {
        x -= cell / 2.0;
        y -= cell / 2.0;
    }
    let grid = GridSpec::new(Point::new(x, y), cell, ncols, nrows)?;
    let mut values = Vec::with_capacity(grid.len());
    for tok in body.iter().flat_map(|l| l.split_whitespace()) {
        values.push(tok.parse::<f64>().map_err(|e| bad(format!("value `{tok}`: {e}")))?);
    }
    if values.len() != grid.len() {
        return Err(bad(format!("expected {} values, found {}", grid.len(), values.len())));
    }
    let mask: Vec<bool> = values.iter().map(|&v| v != nodata).collect();
    for (v, &m) in values.iter_mut().zip(&mask) {
        if !m {
            *v = 0.0;
        }
    }
    Ok(AsciiGrid { grid, values, mask })
}

fn collection(features: Vec<Feature>, config_digest: &str, mode: DistanceMode) -> String {
    let mut fc = FeatureCollection::new(features);
    let mut members = JsonObject::new();
    members.insert("config_digest".into(), json!(config_digest));
    members.insert("mode".into(), json!(mode.as_str()));
    fc.foreign_members = Some(members);
    let mut s = serde_json::to_string_pretty(&fc).expect("feature collection serializes");
    s.push('\n');
    s
}

pub fn point_feature(p: Point, properties: JsonObject) -> Feature {
    let mut f = Feature::from(Geometry::new_point([p.x, p.y]));
    f.properties = Some(properties);
    f
}

/// Cell centers of unmasked cells with their `score`, row-major.
pub fn score_points(grid: &GridSpec, values: &[f64], mask: &[bool], config_digest: &str, mode: DistanceMode) -> String {
    let features = (0..grid.len())
        .filter(|&k| mask[k])
        .map(|k| {
            let mut props = JsonObject::new();
            props.insert("row".into(), json!(k / grid.ncols));
            props.insert("col".into(), json!(k % grid.ncols));
            props.insert("score".into(), json!(values[k]));
            point_feature(grid.center_of(k), props)
        })
        .collect();
    collection(features, config_digest, mode)
}

pub fn candidates_geojson(sites: &[CandidateSite], config_digest: &str, mode: DistanceMode) -> String {
    let features = sites
        .iter()
        .map(|s| {
            let mut props = JsonObject::new();
            props.insert("id".into(), json!(s.id));
            props.insert("score".into(), json!(s.score));
            props.insert("origin".into(), serde_json::to_value(s.origin).expect("origin serializes"));
            props.insert(
                "tier".into(),
                s.tier.map_or(Value::Null, |t| serde_json::to_value(t).expect("tier serializes")),
            );
            point_feature(s.location, props)
        })
        .collect();
    collection(features, config_digest, mode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub p: usize,
    /// Ids joined with `;`.
    pub selected_ids: String,
    pub covering_percentage: f64,
}

/// Table of p, selected ids and covering percentage, preceded by a
/// `#` comment line carrying the config digest and mode.
pub fn coverage_csv(curve: &CoverageCurve, config_digest: &str, mode: DistanceMode) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for pt in &curve.points {
        w.serialize(CoverageRow {
            p: pt.p,
            selected_ids: pt.selected.join(";"),
            covering_percentage: pt.coverage_pct,
        })
        .expect("in-memory CSV write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8");
    format!("# config_digest={config_digest} mode={} method={}\n{body}", mode.as_str(), curve.method.as_str())
}

pub fn read_coverage_csv(text: &str) -> Result<Vec<CoverageRow>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<CoverageRow>, _>>()
        .map_err(|e| Error::Input(format!("coverage CSV: {e}")))
}

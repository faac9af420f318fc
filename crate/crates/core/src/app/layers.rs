//! GeoJSON ingestion: point layers, zoning polygons, demand areas and
//! existing branches.

use std::path::Path;

use geojson::{Feature, FeatureCollection, GeoJson, GeometryValue, Position};
use serde_json::Value;

use crate::criteria::{CriterionKind, Level};
use crate::error::{Error, Result};
use crate::geo::{DistanceMode, Point, Polygon};
use crate::mclp::DemandArea;
use crate::overlay::{Zone, ZoneValue};

pub fn read_collection(path: &Path) -> Result<FeatureCollection> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_collection(&text).map_err(|m| Error::Input(format!("{}: {m}", path.display())))
}

fn parse_collection(text: &str) -> std::result::Result<FeatureCollection, String> {
    match text.parse::<GeoJson>().map_err(|e| e.to_string())? {
        GeoJson::FeatureCollection(fc) => Ok(fc),
        GeoJson::Feature(_) => Err("expected a FeatureCollection, found a Feature".into()),
        GeoJson::Geometry(_) => Err("expected a FeatureCollection, found a bare Geometry".into()),
    }
}

fn position(p: &Position, mode: DistanceMode) -> std::result::Result<Point, String> {
    let s = p.as_slice();
    if s.len() < 2 {
        return Err(format!("position with {} coordinates", s.len()));
    }
    let pt = Point::new(s[0], s[1]);
    mode.validate(pt).map_err(|e| e.to_string())?;
    Ok(pt)
}

fn polygon(rings: &[Vec<Position>], mode: DistanceMode) -> std::result::Result<Polygon, String> {
    let mut rings = rings.iter().map(|r| r.iter().map(|p| position(p, mode)).collect::<std::result::Result<Vec<_>, _>>());
    let exterior = rings.next().ok_or("polygon without rings")??;
    let holes = rings.collect::<std::result::Result<Vec<_>, _>>()?;
    Polygon::new(exterior, holes).map_err(|e| e.to_string())
}

fn polygons(f: &Feature, mode: DistanceMode) -> std::result::Result<Vec<Polygon>, String> {
    match f.geometry.as_ref().map(|g| &g.value) {
        Some(GeometryValue::Polygon { coordinates }) => Ok(vec![polygon(coordinates, mode)?]),
        Some(GeometryValue::MultiPolygon { coordinates }) => coordinates.iter().map(|c| polygon(c, mode)).collect(),
        Some(other) => Err(format!("expected Polygon or MultiPolygon, found {}", other.type_name())),
        None => Err("feature without geometry".into()),
    }
}

fn feature_err(path: &Path, i: usize, msg: impl std::fmt::Display) -> Error {
    Error::Input(format!("{}: feature {i}: {msg}", path.display()))
}

/// Id from the `id` property, then the feature id.
fn feature_id(f: &Feature) -> Option<String> {
    let from_value = |v: &Value| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    };
    f.property("id").and_then(from_value).or_else(|| {
        f.id.as_ref().map(|id| match id {
            geojson::feature::Id::String(s) => s.clone(),
            geojson::feature::Id::Number(n) => n.to_string(),
        })
    })
}

/// Point and MultiPoint features, in file order.
pub fn load_points(path: &Path, mode: DistanceMode) -> Result<Vec<Point>> {
    let fc = read_collection(path)?;
    let mut out = Vec::new();
    for (i, f) in fc.features.iter().enumerate() {
        match f.geometry.as_ref().map(|g| &g.value) {
            Some(GeometryValue::Point { coordinates }) => {
                out.push(position(coordinates, mode).map_err(|m| feature_err(path, i, m))?)
            }
            Some(GeometryValue::MultiPoint { coordinates }) => {
                for c in coordinates {
                    out.push(position(c, mode).map_err(|m| feature_err(path, i, m))?);
                }
            }
            Some(other) => {
                return Err(feature_err(
                    path,
                    i,
                    format!("distance layers need Point geometries, found {}", other.type_name()),
                ))
            }
            None => return Err(feature_err(path, i, "feature without geometry")),
        }
    }
    Ok(out)
}

/// Attribute value of a zoning feature. `keys` are tried in order.
fn zone_value(f: &Feature, kind: CriterionKind, keys: &[&str]) -> std::result::Result<ZoneValue, String> {
    let (key, v) = keys
        .iter()
        .find_map(|k| f.property(k).map(|v| (*k, v)))
        .ok_or_else(|| format!("missing property (tried {})", keys.join(", ")))?;
    match kind {
        CriterionKind::Density => match v.as_f64() {
            Some(x) if x.is_finite() && x >= 0.0 => Ok(ZoneValue::Number(x)),
            _ => Err(format!("property `{key}` must be a non-negative number, got {v}")),
        },
        _ => v
            .as_str()
            .and_then(Level::parse)
            .map(ZoneValue::Level)
            .ok_or_else(|| format!("property `{key}` must be one of high/middle/low, got {v}")),
    }
}

/// Zoning polygons for a density, categorical or cost-level criterion.
///
/// The attribute is read from the property named after the criterion, then
/// from `density` (density kind) or `level` (the others).
pub fn load_zones(path: &Path, criterion: &str, kind: CriterionKind, mode: DistanceMode) -> Result<Vec<Zone>> {
    let fc = read_collection(path)?;
    let fallback = if kind == CriterionKind::Density { "density" } else { "level" };
    let keys = [criterion, fallback];
    let mut out = Vec::new();
    for (i, f) in fc.features.iter().enumerate() {
        let value = zone_value(f, kind, &keys).map_err(|m| feature_err(path, i, m))?;
        for polygon in polygons(f, mode).map_err(|m| feature_err(path, i, m))? {
            out.push(Zone { polygon, value });
        }
    }
    Ok(out)
}

/// Demand polygons carrying a `population` property. Ids come from `id`
/// (property or feature id) or default to `A01`, `A02`, ... An optional
/// `centroid` property `[x, y]` overrides the vertex mean.
pub fn load_demand(path: &Path, mode: DistanceMode) -> Result<Vec<DemandArea>> {
    let fc = read_collection(path)?;
    let width = fc.features.len().to_string().len().max(2);
    let mut out = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.iter().enumerate() {
        let population = f
            .property("population")
            .ok_or_else(|| feature_err(path, i, "missing property `population`"))?
            .as_u64()
            .ok_or_else(|| feature_err(path, i, "`population` must be a non-negative integer"))?;
        let mut polys = polygons(f, mode).map_err(|m| feature_err(path, i, m))?;
        if polys.len() != 1 {
            return Err(feature_err(path, i, "demand areas must be single polygons"));
        }
        let centroid = match f.property("centroid") {
            None => None,
            Some(v) => {
                let xy: [f64; 2] = serde_json::from_value(v.clone())
                    .map_err(|e| feature_err(path, i, format!("bad `centroid`: {e}")))?;
                Some(Point::new(xy[0], xy[1]))
            }
        };
        let id = feature_id(f).unwrap_or_else(|| format!("A{:0width$}", i + 1));
        out.push(DemandArea::from_polygon(id, polys.remove(0), population, centroid)?);
    }
    if out.is_empty() {
        return Err(Error::Input(format!("{}: no demand areas", path.display())));
    }
    Ok(out)
}

/// Existing branches: Point features with an `id`; defaults to `E01`, ...
pub fn load_sites(path: &Path, mode: DistanceMode) -> Result<Vec<(String, Point)>> {
    let fc = read_collection(path)?;
    let width = fc.features.len().to_string().len().max(2);
    fc.features
        .iter()
        .enumerate()
        .map(|(i, f)| match f.geometry.as_ref().map(|g| &g.value) {
            Some(GeometryValue::Point { coordinates }) => {
                let p = position(coordinates, mode).map_err(|m| feature_err(path, i, m))?;
                Ok((feature_id(f).unwrap_or_else(|| format!("E{:0width$}", i + 1)), p))
            }
            _ => Err(feature_err(path, i, "existing branches must be Point features")),
        })
        .collect()
}

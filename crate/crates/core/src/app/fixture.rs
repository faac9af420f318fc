//! Generator for the bundled `isfahan20` fixture: a synthetic 6 km x 4 km
//! planar city of 20 sections with all twelve criterion layers.
//!
//! Layers are drawn around activity hubs, the real pipeline is run up to
//! candidate extraction, and integer section populations are then searched
//! so that the optimal covering percentages for p = 1, 2, 3 are exactly
//! 90, 96 and 100. Everything derives from the seed.

use std::fs;
use std::path::Path;

use geojson::{Feature, FeatureCollection, Geometry, JsonObject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{load_project, HierarchyConfig, ProjectConfig};
use super::pipeline::{compute, Until};
use crate::candidates::{ExtractionConfig, Origin, TieringRule};
use crate::criteria::{standard_bank_criteria, ScoreScheme};
use crate::error::{Error, Result};
use crate::geo::{planar_distance, DistanceMode, Point};
use crate::mclp::{Certificate, CoverageStandard, CurveMethod, DEFAULT_EXACT_CAP};
use crate::overlay::{CombineMode, GridSpec};
use crate::weights::ComparisonMatrix;

pub const NAME: &str = "isfahan20";
pub const DEFAULT_SEED: u64 = 20;
/// Certified optimal covering percentages for p = 1, 2, 3.
pub const TARGET: [u64; 3] = [90, 96, 100];

const WIDTH: f64 = 6000.0;
const HEIGHT: f64 = 4000.0;
const COLS: usize = 5;
const ROWS: usize = 4;
const HUBS: usize = 15;
const EXISTING: usize = 9;
const PROPOSED: usize = 14;
/// Population is allotted in 100 units of this many persons.
const UNIT: u64 = 20_000;
const UNITS: u64 = 100;
const RADII: [f64; 7] = [1500.0, 1750.0, 2000.0, 2250.0, 2500.0, 2750.0, 3000.0];
const MAX_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSummary {
    pub attempts: usize,
    pub radius: f64,
    pub candidates: usize,
    pub populations: Vec<u64>,
}

struct Layout {
    sections: Vec<Vec<Point>>,
    income: Vec<&'static str>,
    cost: Vec<&'static str>,
    density: Vec<u64>,
    hubs: Vec<Point>,
    offices: Vec<Point>,
    medicine: Vec<Point>,
    parking: Vec<Point>,
    transit: Vec<Point>,
    streets: Vec<Vec<Point>>,
    hotels: Vec<Point>,
    competitors: Vec<Point>,
    existing: Vec<Point>,
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn pt(x: f64, y: f64) -> Point {
    Point::new(round1(x), round1(y))
}

fn near(rng: &mut ChaCha8Rng, c: Point, r: f64) -> Point {
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    let d = rng.random_range(0.0..r);
    pt(c.x + d * a.cos(), c.y + d * a.sin())
}

/// Rejection-samples `n` points at least `spacing` apart and `clear` from `avoid`.
fn scatter(rng: &mut ChaCha8Rng, n: usize, margin: f64, spacing: f64, avoid: &[Point], clear: f64) -> Option<Vec<Point>> {
    let mut out: Vec<Point> = Vec::with_capacity(n);
    for _ in 0..20_000 {
        if out.len() == n {
            break;
        }
        let p = pt(rng.random_range(margin..WIDTH - margin), rng.random_range(margin..HEIGHT - margin));
        if out.iter().all(|&q| planar_distance(p, q) >= spacing) && avoid.iter().all(|&q| planar_distance(p, q) >= clear) {
            out.push(p);
        }
    }
    (out.len() == n).then_some(out)
}

fn layout(rng: &mut ChaCha8Rng) -> Option<Layout> {
    // Lattice with jittered interior vertices; the outer boundary stays straight.
    let (dx, dy) = (WIDTH / COLS as f64, HEIGHT / ROWS as f64);
    let mut lattice = vec![vec![Point::new(0.0, 0.0); ROWS + 1]; COLS + 1];
    for (i, col) in lattice.iter_mut().enumerate() {
        for (j, v) in col.iter_mut().enumerate() {
            let interior = i > 0 && i < COLS && j > 0 && j < ROWS;
            let (jx, jy) = if interior {
                (rng.random_range(-150.0..150.0), rng.random_range(-150.0..150.0))
            } else {
                (0.0, 0.0)
            };
            *v = pt(i as f64 * dx + jx, j as f64 * dy + jy);
        }
    }
    let mut sections = Vec::with_capacity(COLS * ROWS);
    for r in (0..ROWS).rev() {
        for c in 0..COLS {
            sections.push(vec![lattice[c][r], lattice[c + 1][r], lattice[c + 1][r + 1], lattice[c][r + 1]]);
        }
    }
    let n = sections.len();
    let income = (0..n).map(|_| if rng.random_bool(0.5) { "high" } else { "middle" }).collect();
    let cost = (0..n).map(|_| if rng.random_bool(0.6) { "middle" } else { "high" }).collect();
    let density = (0..n).map(|_| rng.random_range(25..120) * 10).collect();

    let hubs = scatter(rng, HUBS, 300.0, 800.0, &[], 0.0)?;
    let offices = hubs.iter().map(|&h| near(rng, h, 120.0)).collect();
    let medicine = hubs.iter().map(|&h| near(rng, h, 150.0)).collect();
    let parking = hubs.iter().map(|&h| near(rng, h, 400.0)).collect();
    let transit = hubs.iter().map(|&h| near(rng, h, 300.0)).collect();
    let streets = hubs
        .iter()
        .map(|h| (0..=(WIDTH / 50.0) as usize).map(|k| pt(k as f64 * 50.0, h.y)).collect())
        .collect();
    let hotels = scatter(rng, 5, 200.0, 1500.0, &[], 0.0)?;
    let competitors = scatter(rng, 8, 100.0, 400.0, &hubs, 300.0)?;
    let existing = scatter(rng, EXISTING, 100.0, 900.0, &hubs, 750.0)?;
    Some(Layout {
        sections,
        income,
        cost,
        density,
        hubs,
        offices,
        medicine,
        parking,
        transit,
        streets,
        hotels,
        competitors,
        existing,
    })
}

fn to_json(fc: FeatureCollection) -> String {
    let mut s = serde_json::to_string_pretty(&fc).expect("feature collection serializes");
    s.push('\n');
    s
}

fn points_file(points: &[Point]) -> String {
    to_json(
        points
            .iter()
            .map(|p| {
                let mut f = Feature::from(Geometry::new_point([p.x, p.y]));
                f.properties = Some(JsonObject::new());
                f
            })
            .collect(),
    )
}

fn streets_file(streets: &[Vec<Point>]) -> String {
    to_json(
        streets
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut f = Feature::from(Geometry::new_multi_point(s.iter().map(|p| [p.x, p.y])));
                let mut props = JsonObject::new();
                props.insert("name".into(), json!(format!("street {}", i + 1)));
                f.properties = Some(props);
                f
            })
            .collect(),
    )
}

fn existing_file(points: &[Point]) -> String {
    to_json(
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut f = Feature::from(Geometry::new_point([p.x, p.y]));
                let mut props = JsonObject::new();
                props.insert("id".into(), json!(format!("E{:02}", i + 1)));
                f.properties = Some(props);
                f
            })
            .collect(),
    )
}

fn demand_file(l: &Layout, populations: &[u64]) -> String {
    to_json(
        l.sections
            .iter()
            .enumerate()
            .map(|(i, ring)| {
                let mut closed: Vec<[f64; 2]> = ring.iter().map(|p| [p.x, p.y]).collect();
                closed.push(closed[0]);
                let mut f = Feature::from(Geometry::new_polygon([closed]));
                let mut props = JsonObject::new();
                props.insert("id".into(), json!(format!("S{:02}", i + 1)));
                props.insert("population".into(), json!(populations[i]));
                props.insert("income_level".into(), json!(l.income[i]));
                props.insert("building_cost".into(), json!(l.cost[i]));
                props.insert("population_density".into(), json!(l.density[i]));
                f.properties = Some(props);
                f
            })
            .collect(),
    )
}

/// Nearest 1-9 scale judgment (or reciprocal) to w_i / w_j.
fn saaty(ratio: f64) -> f64 {
    if ratio >= 1.0 {
        ratio.round().clamp(1.0, 9.0)
    } else {
        1.0 / (1.0 / ratio).round().clamp(1.0, 9.0)
    }
}

fn matrix_csv(labels: &[&str], w: &[f64]) -> Result<String> {
    let rows: Vec<Vec<f64>> = (0..w.len())
        .map(|i| (0..w.len()).map(|j| if i == j { 1.0 } else if i < j { saaty(w[i] / w[j]) } else { 1.0 / saaty(w[j] / w[i]) }).collect())
        .collect();
    let m = ComparisonMatrix::with_labels(labels.iter().map(|s| s.to_string()).collect(), rows)?;
    let body = m.to_csv_string();
    // Prepend a label column: blank header cell, then each row's id.
    let mut lines = body.lines();
    let mut out = format!(",{}\n", lines.next().unwrap_or_default());
    for (label, line) in labels.iter().zip(lines) {
        out.push_str(&format!("{label},{line}\n"));
    }
    Ok(out)
}

struct Cluster {
    id: &'static str,
    weight: f64,
    leaves: &'static [(&'static str, f64)],
}

const CLUSTERS: [Cluster; 6] = [
    Cluster { id: "population", weight: 0.22, leaves: &[("population_density", 0.65), ("income_level", 0.35)] },
    Cluster { id: "cost", weight: 0.10, leaves: &[("building_cost", 1.0)] },
    Cluster {
        id: "facilities",
        weight: 0.28,
        leaves: &[
            ("medicine_center", 0.2),
            ("business_center", 0.3),
            ("hotel_tourism", 0.1),
            ("office", 0.25),
            ("parking", 0.15),
        ],
    },
    Cluster { id: "transport", weight: 0.18, leaves: &[("transit", 0.65), ("main_street", 0.35)] },
    Cluster { id: "competition", weight: 0.10, leaves: &[("competitor_branch", 1.0)] },
    Cluster { id: "own_network", weight: 0.12, leaves: &[("familiar_branch", 1.0)] },
];

fn layer_file(criterion: &str) -> Option<&'static str> {
    Some(match criterion {
        "main_street" => "layers/main_streets.geojson",
        "business_center" => "layers/business_centers.geojson",
        "hotel_tourism" => "layers/hotels.geojson",
        "office" => "layers/offices.geojson",
        "competitor_branch" => "layers/competitors.geojson",
        "familiar_branch" => "layers/existing_branches.geojson",
        "medicine_center" => "layers/medical_centers.geojson",
        "parking" => "layers/parking.geojson",
        "transit" => "layers/transit.geojson",
        _ => return None,
    })
}

fn config(radius: f64) -> ProjectConfig {
    let criteria = standard_bank_criteria()
        .into_iter()
        .map(|mut c| {
            c.layer = layer_file(&c.id).map(str::to_string);
            c
        })
        .collect();
    let hierarchy = HierarchyConfig {
        id: "goal".into(),
        matrix: Some("matrices/goal.csv".into()),
        children: CLUSTERS
            .iter()
            .map(|c| HierarchyConfig {
                id: c.id.into(),
                matrix: (c.leaves.len() > 1).then(|| format!("matrices/{}.csv", c.id)),
                children: c
                    .leaves
                    .iter()
                    .map(|(id, _)| HierarchyConfig { id: (*id).into(), matrix: None, children: Vec::new() })
                    .collect(),
            })
            .collect(),
    };
    ProjectConfig {
        name: NAME.into(),
        mode: DistanceMode::Planar,
        grid: GridSpec::new(Point::new(0.0, 0.0), 100.0, 60, 40).expect("fixture grid is valid"),
        scheme: ScoreScheme::default(),
        combine_mode: CombineMode::WeightedGeometric,
        criteria,
        hierarchy,
        gate_threshold: 0.1,
        random_index: None,
        demand: "layers/sections.geojson".into(),
        existing: Some("layers/existing_branches.geojson".into()),
        extraction: ExtractionConfig { min_score: 0.0, min_separation: 400.0, max_proposed: PROPOSED },
        tiering: TieringRule::Terciles,
        standard: CoverageStandard::Radius { radius },
        p_max: 3,
        solver: CurveMethod::Exact,
        exact_cap: DEFAULT_EXACT_CAP,
    }
}

fn write(dir: &Path, rel: &str, body: &str) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

fn write_all(dir: &Path, l: &Layout, populations: &[u64], radius: f64) -> Result<()> {
    let mut cfg = serde_json::to_string_pretty(&config(radius)).expect("config serializes");
    cfg.push('\n');
    write(dir, "config.json", &cfg)?;
    write(dir, "layers/sections.geojson", &demand_file(l, populations))?;
    write(dir, "layers/business_centers.geojson", &points_file(&l.hubs))?;
    write(dir, "layers/offices.geojson", &points_file(&l.offices))?;
    write(dir, "layers/medical_centers.geojson", &points_file(&l.medicine))?;
    write(dir, "layers/parking.geojson", &points_file(&l.parking))?;
    write(dir, "layers/transit.geojson", &points_file(&l.transit))?;
    write(dir, "layers/main_streets.geojson", &streets_file(&l.streets))?;
    write(dir, "layers/hotels.geojson", &points_file(&l.hotels))?;
    write(dir, "layers/competitors.geojson", &points_file(&l.competitors))?;
    write(dir, "layers/existing_branches.geojson", &existing_file(&l.existing))?;
    let weights: Vec<f64> = CLUSTERS.iter().map(|c| c.weight).collect();
    let ids: Vec<&str> = CLUSTERS.iter().map(|c| c.id).collect();
    write(dir, "matrices/goal.csv", &matrix_csv(&ids, &weights)?)?;
    for c in CLUSTERS.iter().filter(|c| c.leaves.len() > 1) {
        let ids: Vec<&str> = c.leaves.iter().map(|l| l.0).collect();
        let w: Vec<f64> = c.leaves.iter().map(|l| l.1).collect();
        write(dir, &format!("matrices/{}.csv", c.id), &matrix_csv(&ids, &w)?)?;
    }
    Ok(())
}

/// Best covered units with one and with two sites.
fn best_one_two(masks: &[u32], units: &[u64]) -> (u64, u64) {
    let sum = |m: u32| (0..units.len()).filter(|i| m >> i & 1 == 1).map(|i| units[i]).sum::<u64>();
    let one = masks.iter().map(|&m| sum(m)).max().unwrap_or(0);
    let mut two = 0;
    for (a, &ma) in masks.iter().enumerate() {
        for &mb in &masks[a + 1..] {
            two = two.max(sum(ma | mb));
        }
    }
    (one, two)
}

/// Searches unit allocations (each area at least one unit) with best single
/// = 90 and best pair = 96 by randomized descent with restarts.
fn allocate(rng: &mut ChaCha8Rng, masks: &[u32], areas: usize) -> Option<Vec<u64>> {
    let cost = |u: &[u64]| {
        let (one, two) = best_one_two(masks, u);
        one.abs_diff(TARGET[0]) + two.abs_diff(TARGET[1])
    };
    for _restart in 0..20 {
        let mut u = vec![1u64; areas];
        for _ in 0..(UNITS - areas as u64) {
            u[rng.random_range(0..areas)] += 1;
        }
        let mut c = cost(&u);
        for _ in 0..4000 {
            if c == 0 {
                return Some(u);
            }
            let from = rng.random_range(0..areas);
            let to = rng.random_range(0..areas);
            if from == to || u[from] == 1 {
                continue;
            }
            let k = rng.random_range(1..=u[from] - 1).min(3);
            u[from] -= k;
            u[to] += k;
            let nc = cost(&u);
            if nc <= c {
                c = nc;
            } else {
                u[from] += k;
                u[to] -= k;
            }
        }
    }
    None
}

/// Whether some triple covers every area while no pair does.
fn triple_not_pair(masks: &[u32], full: u32) -> bool {
    let n = masks.len();
    let pair = (0..n).any(|a| (a + 1..n).any(|b| masks[a] | masks[b] == full));
    let triple = (0..n).any(|a| (a + 1..n).any(|b| (b + 1..n).any(|c| masks[a] | masks[b] | masks[c] == full)));
    triple && !pair
}

/// Writes the fixture into `out` (created if needed) and returns what was
/// certified. Fails if no layout within the attempt budget works.
pub fn generate(seed: u64, out: &Path) -> Result<FixtureSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let staging = tempdir_in(out)?;
    let result = search(&mut rng, &staging, out);
    let _ = fs::remove_dir_all(&staging);
    result
}

fn tempdir_in(out: &Path) -> Result<std::path::PathBuf> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let staging = out.join(".fixture-staging");
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    Ok(staging)
}

fn search(rng: &mut ChaCha8Rng, staging: &Path, out: &Path) -> Result<FixtureSummary> {
    for attempt in 1..=MAX_ATTEMPTS {
        let Some(l) = layout(rng) else { continue };
        let ones = vec![1u64; l.sections.len()];
        write_all(staging, &l, &ones, RADII[0])?;
        let project = match load_project(&staging.join("config.json")) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let run = match compute(&project, Until::Candidates) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let sites = &run.report.candidates;
        if sites.iter().filter(|s| s.origin == Origin::Proposed).count() != PROPOSED {
            continue;
        }
        let areas = &project.demand;
        let full = (1u32 << areas.len()) - 1;
        for &radius in &RADII {
            let masks: Vec<u32> = sites
                .iter()
                .map(|s| {
                    areas
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| planar_distance(a.centroid, s.location) <= radius)
                        .fold(0u32, |m, (i, _)| m | 1 << i)
                })
                .collect();
            if !triple_not_pair(&masks, full) {
                continue;
            }
            let Some(units) = allocate(rng, &masks, areas.len()) else { continue };
            let populations: Vec<u64> = units.iter().map(|u| u * UNIT).collect();
            write_all(staging, &l, &populations, radius)?;
            let project = load_project(&staging.join("config.json"))?;
            let run = compute(&project, Until::Solve)?;
            let curve = run.report.curve.as_ref().expect("full run has a curve");
            let pct: Vec<f64> = curve.points.iter().map(|p| p.coverage_pct).collect();
            let certified = curve.points.iter().all(|p| p.certificate == Certificate::Optimal);
            if !certified || pct != TARGET.map(|t| t as f64) {
                continue;
            }
            write_all(out, &l, &populations, radius)?;
            return Ok(FixtureSummary { attempts: attempt, radius, candidates: sites.len(), populations });
        }
    }
    Err(Error::Input(format!("no fixture layout found within {MAX_ATTEMPTS} attempts")))
}

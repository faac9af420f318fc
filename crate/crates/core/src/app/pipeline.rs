//! Stage runner and artifact writer.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{InputDigest, Project};
use super::export;
use crate::candidates::{extract, merge, tier, CandidateSite, Origin};
use crate::criteria::{Repair, ScoreScheme};
use crate::error::{Error, Result};
use crate::geo::DistanceMode;
use crate::mclp::{build_coverage, coverage_curve, CoverageCurve, CoverageStandard, CurveMethod, InstanceFile, MclpInstance, Site};
use crate::overlay::{combine, rasterize, study_mask, CombineMode, ScoreRaster, SuitabilityRaster};
use crate::weights::{GateOutcome, LeafWeight, WeightVector};

/// How far to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Until {
    Weights,
    Score,
    Candidates,
    Solve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRepairs {
    pub criterion: String,
    pub repairs: Vec<Repair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub cells: usize,
    pub study_cells: usize,
    pub positive_cells: usize,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub areas: usize,
    pub candidates: usize,
    pub total_population: u64,
    pub coverable_population: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub method: CurveMethod,
    pub exact_cap: usize,
}

/// Everything needed to reproduce and audit a run. Contains no timestamps,
/// so identical inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub config_digest: String,
    pub mode: DistanceMode,
    pub inputs: Vec<InputDigest>,
    pub weights: Vec<LeafWeight>,
    pub gates: Vec<GateOutcome>,
    pub repairs: Vec<CriterionRepairs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combine_mode: Option<CombineMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<ScoreScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreSummary>,
    /// True when no cell qualified as a proposed site.
    #[serde(default)]
    pub extraction_empty: bool,
    #[serde(default)]
    pub candidates: Vec<CandidateSite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard: Option<CoverageStandard>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_radius_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CoverageCurve>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".to_string() } else { path }, e.inner().to_string())
        })
    }
}

/// In-memory results of a run.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: RunReport,
    pub rasters: Vec<SuitabilityRaster>,
    pub score: Option<ScoreRaster>,
    pub instance: Option<MclpInstance>,
}

fn summarize(s: &ScoreRaster) -> ScoreSummary {
    let study: Vec<f64> = s.values.iter().zip(&s.mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    let max = study.iter().copied().fold(0.0, f64::max);
    let mean = if study.is_empty() { 0.0 } else { study.iter().sum::<f64>() / study.len() as f64 };
    ScoreSummary {
        cells: s.values.len(),
        study_cells: study.len(),
        positive_cells: study.iter().filter(|&&v| v > 0.0).count(),
        max,
        mean,
    }
}

/// Existing branches take the score of the cell they fall in (0 outside the study area).
fn sample(score: &ScoreRaster, site: &CandidateSite) -> f64 {
    score
        .grid
        .locate(site.location)
        .and_then(|(r, c)| score.value_at(r, c))
        .unwrap_or(0.0)
}

/// Runs the stages up to `until`. Each failure names its stage.
pub fn compute(project: &Project, until: Until) -> Result<Run> {
    let cfg = &project.config;
    let mut report = RunReport {
        name: cfg.name.clone(),
        config_digest: project.config_digest.clone(),
        mode: cfg.mode,
        inputs: project.inputs.clone(),
        weights: project.synthesis.leaves.clone(),
        gates: project.synthesis.gates.clone(),
        repairs: project
            .criteria
            .iter()
            .filter(|c| !c.repairs.is_empty())
            .map(|c| CriterionRepairs { criterion: c.spec.id.clone(), repairs: c.repairs.clone() })
            .collect(),
        combine_mode: None,
        scheme: None,
        score: None,
        extraction_empty: false,
        candidates: Vec::new(),
        standard: None,
        coverage_radius_m: None,
        instance: None,
        solver: None,
        curve: None,
    };
    let mut run = Run { report: report.clone(), rasters: Vec::new(), score: None, instance: None };
    if until == Until::Weights {
        return Ok(run);
    }

    let weights = WeightVector::new(project.criterion_weights()).map_err(|e| e.in_stage("weights"))?;
    let polygons: Vec<_> = project.demand.iter().filter_map(|a| a.geometry.clone()).collect();
    let mask = study_mask(&cfg.grid, &polygons);
    let rasters = project
        .criteria
        .iter()
        .zip(&project.layers)
        .map(|(c, layer)| rasterize(&c.spec, layer, &cfg.grid, &mask, &cfg.scheme, cfg.mode))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("rasterize"))?;
    let score = combine(&rasters, &weights, cfg.combine_mode).map_err(|e| e.in_stage("combine"))?;
    report.combine_mode = Some(cfg.combine_mode);
    report.scheme = Some(cfg.scheme);
    report.score = Some(summarize(&score));
    run.rasters = rasters;
    if until == Until::Score {
        run.report = report;
        run.score = Some(score);
        return Ok(run);
    }

    let proposed = extract(&score, &cfg.extraction, cfg.mode).map_err(|e| e.in_stage("extract"))?;
    report.extraction_empty = proposed.is_empty();
    let proposed = tier(&proposed, cfg.tiering);
    let existing: Vec<CandidateSite> = project
        .existing
        .iter()
        .map(|s| CandidateSite { score: sample(&score, s), ..s.clone() })
        .collect();
    let candidates = merge(&proposed, &existing).map_err(|e| e.in_stage("merge"))?;
    report.candidates = candidates.clone();
    run.score = Some(score);
    if until == Until::Candidates || report.extraction_empty {
        run.report = report;
        return Ok(run);
    }

    let sites: Vec<Site> = candidates.iter().map(Site::from).collect();
    let inst = build_coverage(project.demand.clone(), sites, &cfg.standard, cfg.mode).map_err(|e| e.in_stage("coverage"))?;
    report.standard = Some(cfg.standard);
    report.coverage_radius_m = Some(cfg.standard.effective_radius()?);
    report.instance = Some(InstanceStats {
        areas: inst.areas().len(),
        candidates: inst.sites().len(),
        total_population: inst.total_population(),
        coverable_population: inst.coverable_population(),
    });
    report.solver = Some(SolverInfo { method: cfg.solver, exact_cap: cfg.exact_cap });
    let curve = coverage_curve(&inst, cfg.p_max, cfg.solver, project.exact_options()).map_err(|e| e.in_stage("solve"))?;
    report.curve = Some(curve);
    run.report = report;
    run.instance = Some(inst);
    Ok(run)
}

/// Serialized artifacts keyed by path relative to the output directory.
pub fn artifacts(run: &Run) -> BTreeMap<PathBuf, String> {
    let r = &run.report;
    let digest = r.config_digest.as_str();
    let mut out = BTreeMap::new();
    out.insert(PathBuf::from("report.json"), r.to_json());
    for raster in &run.rasters {
        out.insert(
            Path::new("rasters").join(format!("{}.asc", raster.criterion_id)),
            export::ascii_grid(&raster.grid, &raster.values, &raster.mask),
        );
    }
    if let Some(s) = &run.score {
        out.insert(PathBuf::from("score.asc"), export::ascii_grid(&s.grid, &s.values, &s.mask));
        out.insert(PathBuf::from("score.geojson"), export::score_points(&s.grid, &s.values, &s.mask, digest, r.mode));
    }
    if !r.candidates.is_empty() {
        out.insert(PathBuf::from("candidates.geojson"), export::candidates_geojson(&r.candidates, digest, r.mode));
    }
    if let Some(inst) = &run.instance {
        let mut file = InstanceFile::from_instance(inst);
        file.config_digest = Some(digest.to_string());
        out.insert(PathBuf::from("instance.json"), file.to_json());
    }
    if let Some(curve) = &r.curve {
        out.insert(PathBuf::from("coverage.csv"), export::coverage_csv(curve, digest, r.mode));
        let solution = json!({
            "config_digest": digest,
            "mode": r.mode,
            "method": curve.method,
            "points": curve.points,
        });
        let mut s = serde_json::to_string_pretty(&solution).expect("solution serializes");
        s.push('\n');
        out.insert(PathBuf::from("solution.json"), s);
    }
    out
}

/// Artifacts a report alone can regenerate (no rasters).
pub fn render_report(report: &RunReport) -> BTreeMap<PathBuf, String> {
    let run = Run { report: report.clone(), rasters: Vec::new(), score: None, instance: None };
    artifacts(&run)
}

/// Holds `<out>/.lock` for the lifetime of the guard.
struct Lock(PathBuf);

impl Lock {
    fn acquire(out: &Path) -> Result<Self> {
        let path = out.join(".lock");
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    Error::io(&path, std::io::Error::new(e.kind(), "output directory is locked by another run"))
                } else {
                    Error::io(&path, e)
                }
            })?;
        Ok(Lock(path))
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Artifact names owned by this tool; stale copies are removed on every write.
const KNOWN: [&str; 8] = [
    "report.json",
    "coverage.csv",
    "candidates.geojson",
    "score.asc",
    "score.geojson",
    "instance.json",
    "solution.json",
    "rasters",
];

/// Writes all files to a staging directory inside `out`, then moves them into
/// place. With `clear_stale`, artifacts of earlier runs are removed first.
/// If staging fails, `out` is left untouched and the staging directory is
/// removed.
pub fn write_artifacts(out: &Path, files: &BTreeMap<PathBuf, String>, clear_stale: bool) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let _lock = Lock::acquire(out)?;
    let staging = out.join(".staging");
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let result = (|| {
        for (rel, body) in files {
            let path = staging.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        for name in KNOWN.iter().filter(|_| clear_stale) {
            let stale = out.join(name);
            if stale.is_dir() {
                fs::remove_dir_all(&stale).map_err(|e| Error::io(&stale, e))?;
            } else if stale.exists() {
                fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
            }
        }
        for rel in files.keys() {
            let dest = out.join(rel);
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::rename(staging.join(rel), &dest).map_err(|e| Error::io(&dest, e))?;
        }
        Ok(())
    })();
    let _ = fs::remove_dir_all(&staging);
    result
}

/// Full pipeline: compute everything and write every artifact.
pub fn run_pipeline(project: &Project, out: &Path) -> Result<RunReport> {
    let run = compute(project, Until::Solve)?;
    write_artifacts(out, &artifacts(&run), true)?;
    Ok(run.report)
}

/// Proposed and existing counts, for quick summaries.
pub fn origin_counts(sites: &[CandidateSite]) -> (usize, usize) {
    let proposed = sites.iter().filter(|s| s.origin == Origin::Proposed).count();
    (proposed, sites.len() - proposed)
}

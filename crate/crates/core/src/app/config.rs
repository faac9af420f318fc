//! Project configuration: one JSON file naming the grid, criteria, layer
//! files, comparison matrices, extraction and coverage settings. Relative
//! paths resolve against the config file's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layers;
use crate::candidates::{CandidateSite, ExtractionConfig, TieringRule};
use crate::criteria::{validate_spec, CriterionKind, CriterionSpec, NormalizedSpec, ScoreScheme};
use crate::error::{Error, Result};
use crate::geo::DistanceMode;
use crate::mclp::{CoverageStandard, CurveMethod, DemandArea, ExactOptions, DEFAULT_EXACT_CAP};
use crate::overlay::{CombineMode, GridSpec, Layer};
use crate::weights::{synthesize, ComparisonMatrix, HierarchyNode, RandomIndex, Synthesis};

fn default_threshold() -> f64 {
    0.1
}

fn default_exact_cap() -> usize {
    DEFAULT_EXACT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub name: String,
    #[serde(default)]
    pub mode: DistanceMode,
    pub grid: GridSpec,
    #[serde(default)]
    pub scheme: ScoreScheme,
    #[serde(default)]
    pub combine_mode: CombineMode,
    /// `layer` is a GeoJSON path. Zoning criteria without one read their
    /// attribute from the demand layer.
    pub criteria: Vec<CriterionSpec>,
    pub hierarchy: HierarchyConfig,
    #[serde(default = "default_threshold")]
    pub gate_threshold: f64,
    /// Random-index table for n = 1, 2, ...; Saaty's values when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_index: Option<Vec<f64>>,
    /// Demand polygons with `population`; their union is the study area.
    pub demand: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing: Option<String>,
    pub extraction: ExtractionConfig,
    #[serde(default)]
    pub tiering: TieringRule,
    pub standard: CoverageStandard,
    pub p_max: usize,
    #[serde(default)]
    pub solver: CurveMethod,
    #[serde(default = "default_exact_cap")]
    pub exact_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub id: String,
    /// CSV comparison matrix over `children`, required with two or more children.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<HierarchyConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// A loaded, validated project: every file read, every spec normalized and
/// every consistency gate passed.
#[derive(Debug, Clone)]
pub struct Project {
    pub config: ProjectConfig,
    pub dir: PathBuf,
    pub config_digest: String,
    /// Every input file other than the config, sorted by path.
    pub inputs: Vec<InputDigest>,
    /// Normalized criteria in config order.
    pub criteria: Vec<NormalizedSpec>,
    pub layers: Vec<Layer>,
    pub hierarchy: HierarchyNode,
    pub synthesis: Synthesis,
    pub demand: Vec<DemandArea>,
    /// Existing branches with score 0; scores are sampled during the run.
    pub existing: Vec<CandidateSite>,
}

impl Project {
    pub fn random_index(&self) -> Result<RandomIndex> {
        random_index(&self.config)
    }

    pub fn exact_options(&self) -> ExactOptions {
        ExactOptions { cap: self.config.exact_cap, allow_large: false }
    }

    /// Leaf weights in config criterion order.
    pub fn criterion_weights(&self) -> Vec<f64> {
        let by_id: BTreeMap<&str, f64> = self.synthesis.leaves.iter().map(|l| (l.criterion.as_str(), l.weight)).collect();
        self.criteria.iter().map(|c| by_id[c.spec.id.as_str()]).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn random_index(cfg: &ProjectConfig) -> Result<RandomIndex> {
    match &cfg.random_index {
        Some(t) => RandomIndex::new(t.clone()),
        None => Ok(RandomIndex::default()),
    }
}

pub fn parse_config(text: &str) -> Result<ProjectConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".to_string() } else { path }, e.inner().to_string())
    })
}

/// Tracks files read during loading so each is digested once.
struct Inputs<'a> {
    dir: &'a Path,
    digests: BTreeMap<String, String>,
}

impl Inputs<'_> {
    /// Resolves `rel`, failing with the config field path when the file is absent.
    fn resolve(&mut self, rel: &str, field: &str) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        if !path.is_file() {
            return Err(Error::config(field, format!("file not found: {}", path.display())));
        }
        if !self.digests.contains_key(rel) {
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            self.digests.insert(rel.to_string(), sha256_hex(&bytes));
        }
        Ok(path)
    }
}

fn validate_scalars(cfg: &ProjectConfig) -> Result<()> {
    if cfg.name.trim().is_empty() {
        return Err(Error::config("name", "must not be empty"));
    }
    cfg.grid.validate()?;
    if cfg.mode == DistanceMode::Geodesic {
        cfg.mode.validate(cfg.grid.origin).map_err(|e| Error::config("grid.origin", e.to_string()))?;
    }
    cfg.scheme.validate()?;
    if !(cfg.gate_threshold > 0.0 && cfg.gate_threshold.is_finite()) {
        return Err(Error::config("gate_threshold", "must be positive"));
    }
    random_index(cfg).map_err(|e| Error::config("random_index", e.to_string()))?;
    cfg.extraction.validate()?;
    if let TieringRule::Thresholds { first, second } = cfg.tiering {
        if !(first >= second) {
            return Err(Error::config("tiering", "`first` must be at least `second`"));
        }
    }
    cfg.standard.effective_radius()?;
    if cfg.p_max == 0 {
        return Err(Error::config("p_max", "must be >= 1"));
    }
    if cfg.criteria.is_empty() {
        return Err(Error::config("criteria", "at least one criterion is required"));
    }
    Ok(())
}

fn build_hierarchy(node: &HierarchyConfig, field: String, inputs: &mut Inputs) -> Result<HierarchyNode> {
    let matrix = match &node.matrix {
        Some(rel) => {
            let mfield = format!("{field}.matrix");
            let path = inputs.resolve(rel, &mfield)?;
            let m = ComparisonMatrix::from_csv_path(&path).map_err(|e| Error::config(&mfield, e.to_string()))?;
            Some(m)
        }
        None => None,
    };
    let children = node
        .children
        .iter()
        .enumerate()
        .map(|(i, c)| build_hierarchy(c, format!("{field}.children[{i}]"), inputs))
        .collect::<Result<Vec<_>>>()?;
    Ok(HierarchyNode::parent(node.id.clone(), matrix, children))
}

/// Reads and validates a project file. Nothing is computed beyond the
/// weight synthesis needed to evaluate the consistency gates.
pub fn load_project(path: &Path) -> Result<Project> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::config("<root>", "config is not UTF-8"))?;
    let config = parse_config(&text)?;
    let dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    validate_scalars(&config)?;

    let mut inputs = Inputs { dir: &dir, digests: BTreeMap::new() };
    let mut criteria = Vec::with_capacity(config.criteria.len());
    let mut ids = BTreeSet::new();
    for (i, spec) in config.criteria.iter().enumerate() {
        if !ids.insert(spec.id.as_str()) {
            return Err(Error::config(format!("criteria[{i}].id"), format!("duplicate criterion `{}`", spec.id)));
        }
        criteria.push(validate_spec(spec)?);
    }

    let hierarchy = build_hierarchy(&config.hierarchy, "hierarchy".into(), &mut inputs)?;
    hierarchy.validate().map_err(|e| Error::config("hierarchy", e.to_string()))?;
    let leaves: BTreeSet<&str> = hierarchy.leaves().into_iter().collect();
    if let Some(missing) = leaves.difference(&ids).next() {
        return Err(Error::config("hierarchy", format!("leaf `{missing}` is not a declared criterion")));
    }
    if let Some(unused) = ids.difference(&leaves).next() {
        return Err(Error::config("criteria", format!("criterion `{unused}` does not appear in the hierarchy")));
    }
    let synthesis = synthesize(&hierarchy, config.gate_threshold, &random_index(&config)?)?;

    let mode = config.mode;
    let demand_path = inputs.resolve(&config.demand, "demand")?;
    let demand = layers::load_demand(&demand_path, mode)?;
    let mut seen = BTreeSet::new();
    if let Some(dup) = demand.iter().find(|a| !seen.insert(a.id.as_str())) {
        return Err(Error::config("demand", format!("duplicate demand area id `{}`", dup.id)));
    }

    let mut layer_list = Vec::with_capacity(criteria.len());
    for (i, c) in criteria.iter().enumerate() {
        let field = format!("criteria[{i}].layer");
        let spec = &c.spec;
        let layer = match (spec.kind, &spec.layer) {
            (CriterionKind::Distance, None) => {
                return Err(Error::config(field, format!("distance criterion `{}` needs a point layer", spec.id)))
            }
            (CriterionKind::Distance, Some(rel)) => {
                Layer::Points(layers::load_points(&inputs.resolve(rel, &field)?, mode)?)
            }
            (kind, Some(rel)) => Layer::Zones(layers::load_zones(&inputs.resolve(rel, &field)?, &spec.id, kind, mode)?),
            (kind, None) => Layer::Zones(layers::load_zones(&demand_path, &spec.id, kind, mode)?),
        };
        layer_list.push(layer);
    }

    let existing = match &config.existing {
        Some(rel) => layers::load_sites(&inputs.resolve(rel, "existing")?, mode)?
            .into_iter()
            .map(|(id, p)| CandidateSite::existing(id, p, 0.0))
            .collect(),
        None => Vec::new(),
    };

    let inputs = inputs
        .digests
        .into_iter()
        .map(|(path, sha256)| InputDigest { path, sha256 })
        .collect();
    Ok(Project {
        config,
        dir,
        config_digest: sha256_hex(&bytes),
        inputs,
        criteria,
        layers: layer_list,
        hierarchy,
        synthesis,
        demand,
        existing,
    })
}

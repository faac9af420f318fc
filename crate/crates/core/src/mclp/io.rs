//! JSON form of an instance:
//! `{areas: [{id, population, centroid}], candidates: [{id, location, fixed_open}], standard, matrix?}`.

use serde::{Deserialize, Serialize};

use super::{build_coverage, CoverageStandard, DemandArea, MclpInstance, Site};
use crate::error::{Error, Result};
use crate::geo::{DistanceMode, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaRecord {
    pub id: String,
    pub population: u64,
    pub centroid: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default)]
    pub mode: DistanceMode,
    pub areas: Vec<AreaRecord>,
    pub candidates: Vec<Site>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard: Option<CoverageStandard>,
    /// Rows follow `areas`, columns follow `candidates`. Rebuilt from `standard` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<u8>>>,
}

impl InstanceFile {
    pub fn from_instance(inst: &MclpInstance) -> Self {
        InstanceFile {
            config_digest: None,
            mode: inst.mode(),
            areas: inst
                .areas()
                .iter()
                .map(|a| AreaRecord { id: a.id.clone(), population: a.population, centroid: a.centroid })
                .collect(),
            candidates: inst.sites().to_vec(),
            standard: inst.standard(),
            matrix: Some(inst.matrix()),
        }
    }

    pub fn into_instance(self) -> Result<MclpInstance> {
        let areas: Vec<DemandArea> = self
            .areas
            .into_iter()
            .map(|a| DemandArea::at_point(a.id, a.centroid, a.population))
            .collect();
        match (self.matrix, self.standard) {
            (Some(matrix), standard) => {
                let mut inst = MclpInstance::from_matrix(areas, self.candidates, &matrix)?;
                inst.standard = standard;
                inst.mode = self.mode;
                Ok(inst)
            }
            (None, Some(standard)) => build_coverage(areas, self.candidates, &standard, self.mode),
            (None, None) => Err(Error::Input(
                "instance needs either a coverage matrix or a coverage standard".into(),
            )),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| {
                let path = e.path().to_string();
                Error::config(if path == "." { "<root>".to_string() } else { path }, e.inner().to_string())
            })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }
}

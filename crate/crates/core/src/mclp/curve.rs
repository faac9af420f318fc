use serde::{Deserialize, Serialize};

use super::{greedy, solve_exact, Certificate, ExactOptions, MclpInstance, MclpSolution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMethod {
    #[default]
    Exact,
    #[serde(alias = "greedy+swap")]
    GreedySwap,
}

impl CurveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveMethod::Exact => "exact",
            CurveMethod::GreedySwap => "greedy_swap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: usize,
    pub selected: Vec<String>,
    pub z: u64,
    pub coverage_pct: f64,
    pub certificate: Certificate,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marginal_gains: Vec<u64>,
}

impl From<&MclpSolution> for CurvePoint {
    fn from(s: &MclpSolution) -> Self {
        CurvePoint {
            p: s.p,
            selected: s.selected.clone(),
            z: s.z,
            coverage_pct: s.coverage_pct,
            certificate: s.certificate,
            marginal_gains: s.marginal_gains.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub method: CurveMethod,
    pub points: Vec<CurvePoint>,
}

/// Best-known coverage for p = 1..=p_max (starting at the number of
/// fixed-open sites when that is larger).
///
/// The exact method solves every p independently. The heuristic method runs
/// greedy + swap per p and also tries extending the previous point by its best
/// single addition, keeping the better of the two; this keeps the curve
/// non-decreasing even when swap search stalls.
pub fn coverage_curve(inst: &MclpInstance, p_max: usize, method: CurveMethod, opts: ExactOptions) -> Result<CoverageCurve> {
    if p_max == 0 || p_max > inst.sites().len() {
        return Err(Error::Input(format!(
            "p_max = {p_max} must lie in 1..={}",
            inst.sites().len()
        )));
    }
    let p_min = inst.fixed_sites().len().max(1);
    let mut points: Vec<CurvePoint> = Vec::new();
    let mut prev: Option<MclpSolution> = None;
    for p in p_min..=p_max {
        let sol = match method {
            CurveMethod::Exact => solve_exact(inst, p, opts)?,
            CurveMethod::GreedySwap => {
                let fresh = greedy::improve_swap(inst, &greedy::solve_greedy(inst, p)?);
                match prev.as_ref().map(|s| extend(inst, s)) {
                    Some(grown) if grown.z > fresh.z => grown,
                    _ => fresh,
                }
            }
        };
        points.push(CurvePoint::from(&sol));
        prev = Some(sol);
    }
    Ok(CoverageCurve { method, points })
}

/// Previous selection plus its best single addition, then swap-improved.
fn extend(inst: &MclpInstance, prev: &MclpSolution) -> MclpSolution {
    let mut covered = super::AreaSet::new(inst.areas().len());
    for &j in &prev.selected_idx {
        inst.cover_with(j, &mut covered);
    }
    let add = (0..inst.sites().len())
        .filter(|j| !prev.selected_idx.contains(j))
        .map(|j| (j, inst.gain(j, &covered)))
        .fold(None, |best: Option<(usize, u64)>, (j, g)| match best {
            Some((_, bg)) if bg >= g => best,
            _ => Some((j, g)),
        })
        .map(|(j, _)| j)
        .expect("p_max <= number of sites");
    let mut selected = prev.selected_idx.clone();
    selected.push(add);
    let seeded = inst.solution(selected, Certificate::Heuristic, Vec::new());
    greedy::improve_swap(inst, &seeded)
}

//! Criterion specifications and the three-class suitability classifier.
//!
//! Numeric criteria (distances, densities) carry interval bands; zoning
//! criteria carry a category → class table. [`validate_spec`] rewrites
//! overlapping, gapped or touching interval bands into a disjoint cover of
//! `[0, ∞)` and reports every repair it made.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SuitabilityClass {
    #[serde(rename = "non_suitable", alias = "non")]
    NonSuitable,
    #[serde(rename = "suitable", alias = "mid")]
    Suitable,
    #[serde(rename = "high_suitable", alias = "high")]
    HighSuitable,
}

impl SuitabilityClass {
    pub const ALL: [SuitabilityClass; 3] = [
        SuitabilityClass::HighSuitable,
        SuitabilityClass::Suitable,
        SuitabilityClass::NonSuitable,
    ];

    /// 2 for high, 1 for suitable, 0 for non-suitable.
    pub fn rank(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for SuitabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuitabilityClass::HighSuitable => "high_suitable",
            SuitabilityClass::Suitable => "suitable",
            SuitabilityClass::NonSuitable => "non_suitable",
        })
    }
}

/// Numeric score attached to each class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreScheme {
    pub high: f64,
    pub mid: f64,
    pub non: f64,
}

impl Default for ScoreScheme {
    fn default() -> Self {
        ScoreScheme {
            high: 0.6,
            mid: 0.4,
            non: 0.0,
        }
    }
}

impl ScoreScheme {
    pub fn new(high: f64, mid: f64, non: f64) -> Result<Self> {
        let s = ScoreScheme { high, mid, non };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(self.high) && in_unit(self.mid) && in_unit(self.non)) {
            return Err(Error::config("scheme", "scores must lie in [0, 1]"));
        }
        if !(self.high > self.mid && self.mid > self.non) {
            return Err(Error::config("scheme", "scores must satisfy high > mid > non"));
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        v == self.high || v == self.mid || v == self.non
    }
}

pub fn score(class: SuitabilityClass, scheme: &ScoreScheme) -> f64 {
    match class {
        SuitabilityClass::HighSuitable => scheme.high,
        SuitabilityClass::Suitable => scheme.mid,
        SuitabilityClass::NonSuitable => scheme.non,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    /// Distance from a cell to the nearest feature of a point layer.
    Distance,
    /// Persons per grid cell, read from zoning polygons.
    Density,
    /// `level` attribute of zoning polygons.
    Categorical,
    /// Categorical purchase/rent cost zoning.
    CostLevel,
}

impl CriterionKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, CriterionKind::Distance | CriterionKind::Density)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Suitability never increases with the raw value.
    NearBetter,
    /// Suitability never decreases with the raw value.
    FarBetter,
    BandShaped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Low,
    Middle,
    High,
}

impl Level {
    pub fn parse(s: &str) -> Option<Level> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Some(Level::High),
            "middle" | "mid" | "medium" => Some(Level::Middle),
            "low" => Some(Level::Low),
            _ => None,
        }
    }
}

fn default_true() -> bool {
    true
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_true(v: &bool) -> bool {
    *v
}

/// A numeric band `lo..hi`; `hi = None` means unbounded. Endpoints are closed
/// unless flagged otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalBand {
    pub class: SuitabilityClass,
    #[serde(default, rename = "min", skip_serializing_if = "is_zero")]
    pub lo: f64,
    #[serde(default, rename = "max", skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default = "default_true", rename = "min_inclusive", skip_serializing_if = "is_true")]
    pub lo_closed: bool,
    #[serde(default = "default_true", rename = "max_inclusive", skip_serializing_if = "is_true")]
    pub hi_closed: bool,
}

impl IntervalBand {
    /// Closed band `[lo, hi]`, or `[lo, ∞)` when `hi` is `None`.
    pub fn closed(class: SuitabilityClass, lo: f64, hi: Option<f64>) -> Self {
        IntervalBand {
            class,
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = v > self.lo || (v == self.lo && self.lo_closed);
        let below = match self.hi {
            None => true,
            Some(hi) => v < hi || (v == hi && self.hi_closed),
        };
        above && below
    }

    fn contains_open(&self, a: f64, b: Option<f64>) -> bool {
        self.lo <= a
            && match (self.hi, b) {
                (None, _) => true,
                (Some(_), None) => false,
                (Some(hi), Some(b)) => hi >= b,
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryBand {
    pub class: SuitabilityClass,
    pub category: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Band {
    Category(CategoryBand),
    Interval(IntervalBand),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionSpec {
    pub id: String,
    pub kind: CriterionKind,
    /// Path or identifier of the source feature layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    pub bands: Vec<Band>,
}

/// Raw attribute value sampled for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawValue {
    Number(f64),
    Category(Level),
}

/// One normalization step applied by [`validate_spec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "repair", rename_all = "snake_case")]
pub enum Repair {
    /// Several classes claimed `[lo, hi]`; the highest class kept it.
    Overlap {
        lo: f64,
        hi: f64,
        winner: SuitabilityClass,
        losers: Vec<SuitabilityClass>,
    },
    /// A single boundary point claimed by several classes or by none.
    Boundary { at: f64, owner: SuitabilityClass },
    /// Unclaimed `(lo, hi)` split at its midpoint between the neighbouring bands.
    GapFill {
        lo: f64,
        hi: f64,
        midpoint: f64,
        lower: SuitabilityClass,
        upper: SuitabilityClass,
    },
    ExtendToZero { from: f64, class: SuitabilityClass },
    ExtendToInfinity { from: f64, class: SuitabilityClass },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSpec {
    pub spec: CriterionSpec,
    pub repairs: Vec<Repair>,
}

/// Classify a raw value; the spec is expected to be normalized.
pub fn classify(spec: &CriterionSpec, raw: RawValue) -> Result<SuitabilityClass> {
    match raw {
        RawValue::Number(v) => {
            if !spec.kind.is_numeric() {
                return Err(Error::spec(&spec.id, "numeric value given to a categorical criterion"));
            }
            if !(v >= 0.0) {
                return Err(Error::spec(&spec.id, format!("raw value {v} is negative or NaN")));
            }
            spec.bands
                .iter()
                .find_map(|b| match b {
                    Band::Interval(iv) if iv.contains(v) => Some(iv.class),
                    _ => None,
                })
                .ok_or_else(|| Error::spec(&spec.id, format!("raw value {v} falls in no band")))
        }
        RawValue::Category(level) => {
            if spec.kind.is_numeric() {
                return Err(Error::spec(&spec.id, "category given to a numeric criterion"));
            }
            spec.bands
                .iter()
                .find_map(|b| match b {
                    Band::Category(c) if c.category == level => Some(c.class),
                    _ => None,
                })
                .ok_or_else(|| Error::spec(&spec.id, format!("category {level:?} has no class")))
        }
    }
}

/// Normalize a spec so that every admissible raw value has exactly one class.
///
/// Overlaps go to the higher class, touching boundaries to the higher side,
/// interior gaps are split at their midpoint, and the cover is extended down
/// to zero and up to infinity.
pub fn validate_spec(spec: &CriterionSpec) -> Result<NormalizedSpec> {
    if spec.id.trim().is_empty() {
        return Err(Error::spec("<unnamed>", "criterion id is empty"));
    }
    if spec.bands.is_empty() {
        return Err(Error::spec(&spec.id, "no bands"));
    }
    let (bands, repairs) = if spec.kind.is_numeric() {
        let intervals = spec
            .bands
            .iter()
            .map(|b| match b {
                Band::Interval(iv) => Ok(*iv),
                Band::Category(_) => Err(Error::spec(&spec.id, "category band on a numeric criterion")),
            })
            .collect::<Result<Vec<_>>>()?;
        let (norm, repairs) = normalize_intervals(&spec.id, &intervals)?;
        check_direction(spec, &norm)?;
        (norm.into_iter().map(Band::Interval).collect(), repairs)
    } else {
        (normalize_categories(spec)?, Vec::new())
    };
    Ok(NormalizedSpec {
        spec: CriterionSpec {
            bands,
            ..spec.clone()
        },
        repairs,
    })
}

fn normalize_categories(spec: &CriterionSpec) -> Result<Vec<Band>> {
    let mut table: [Option<SuitabilityClass>; 3] = [None; 3];
    for b in &spec.bands {
        let Band::Category(c) = b else {
            return Err(Error::spec(&spec.id, "interval band on a categorical criterion"));
        };
        let slot = &mut table[c.category as usize];
        match slot {
            Some(prev) if *prev != c.class => {
                return Err(Error::spec(
                    &spec.id,
                    format!("category {:?} claimed by both {prev} and {}", c.category, c.class),
                ))
            }
            _ => *slot = Some(c.class),
        }
    }
    [Level::High, Level::Middle, Level::Low]
        .into_iter()
        .map(|level| {
            table[level as usize]
                .map(|class| Band::Category(CategoryBand { class, category: level }))
                .ok_or_else(|| Error::spec(&spec.id, format!("category {level:?} is not mapped")))
        })
        .collect()
}

fn check_direction(spec: &CriterionSpec, bands: &[IntervalBand]) -> Result<()> {
    let ranks: Vec<u8> = bands.iter().map(|b| b.class.rank()).collect();
    let ok = match spec.direction {
        Some(Direction::NearBetter) => ranks.windows(2).all(|w| w[0] >= w[1]),
        Some(Direction::FarBetter) => ranks.windows(2).all(|w| w[0] <= w[1]),
        Some(Direction::BandShaped) | None => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::spec(
            &spec.id,
            format!("bands are not monotone in the declared {:?} direction", spec.direction.unwrap()),
        ))
    }
}

/// Elementary piece of the real half-line: a single point or an open span.
#[derive(Debug, Clone, Copy)]
enum Element {
    Point(f64),
    Open(f64, Option<f64>),
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    band: IntervalBand,
}

fn normalize_intervals(id: &str, raw: &[IntervalBand]) -> Result<(Vec<IntervalBand>, Vec<Repair>)> {
    for b in raw {
        let bad_hi = b.hi.is_some_and(|hi| !hi.is_finite() || hi < b.lo);
        if !(b.lo.is_finite() && b.lo >= 0.0) || bad_hi {
            return Err(Error::spec(id, format!("invalid band bounds {:?}..{:?}", b.lo, b.hi)));
        }
        if b.hi == Some(b.lo) && !(b.lo_closed && b.hi_closed) {
            return Err(Error::spec(id, format!("empty band at {}", b.lo)));
        }
    }

    let mut cuts: Vec<f64> = std::iter::once(0.0)
        .chain(raw.iter().map(|b| b.lo))
        .chain(raw.iter().filter_map(|b| b.hi))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut elements = Vec::with_capacity(cuts.len() * 2);
    for (k, &c) in cuts.iter().enumerate() {
        elements.push(Element::Point(c));
        elements.push(Element::Open(c, cuts.get(k + 1).copied()));
    }

    let mut repairs = Vec::new();
    // Owner per element, plus the losing classes where several classes claimed it.
    let mut owners: Vec<Option<SuitabilityClass>> = Vec::with_capacity(elements.len());
    let mut contested: Vec<Vec<SuitabilityClass>> = Vec::with_capacity(elements.len());
    for e in &elements {
        let mut claim: Vec<SuitabilityClass> = raw
            .iter()
            .filter(|b| match *e {
                Element::Point(v) => b.contains(v),
                Element::Open(a, z) => b.contains_open(a, z),
            })
            .map(|b| b.class)
            .collect();
        claim.sort();
        claim.dedup();
        let owner = claim.last().copied();
        claim.pop();
        owners.push(owner);
        contested.push(claim);
    }

    // Report contested runs: a run with positive length is an overlap, a lone point a boundary.
    let mut k = 0;
    while k < elements.len() {
        if contested[k].is_empty() {
            k += 1;
            continue;
        }
        let start = k;
        let winner = owners[k].unwrap();
        let mut losers = Vec::new();
        while k < elements.len() && !contested[k].is_empty() && owners[k] == Some(winner) {
            losers.extend(contested[k].iter().copied());
            k += 1;
        }
        losers.sort();
        losers.dedup();
        let lo = element_lo(elements[start]);
        let hi = element_hi(elements[k - 1]).unwrap_or(f64::INFINITY);
        if hi > lo {
            repairs.push(Repair::Overlap { lo, hi, winner, losers });
        } else {
            repairs.push(Repair::Boundary { at: lo, owner: winner });
        }
    }

    // Merge claimed elements into maximal same-class pieces.
    let mut pieces: Vec<Piece> = Vec::new();
    let mut prev_claimed = false;
    for (e, owner) in elements.iter().zip(&owners) {
        let Some(class) = *owner else {
            prev_claimed = false;
            continue;
        };
        let (lo, hi, lo_closed, hi_closed) = match *e {
            Element::Point(v) => (v, Some(v), true, true),
            Element::Open(a, z) => (a, z, false, false),
        };
        match pieces.last_mut() {
            Some(last) if prev_claimed && last.band.class == class => {
                last.band.hi = hi;
                last.band.hi_closed = hi_closed;
            }
            _ => pieces.push(Piece {
                band: IntervalBand { class, lo, hi, lo_closed, hi_closed },
            }),
        }
        prev_claimed = true;
    }

    // Fill the holes between consecutive pieces.
    let mut filled: Vec<Piece> = Vec::with_capacity(pieces.len());
    for piece in pieces {
        let Some(last) = filled.last_mut() else {
            filled.push(piece);
            continue;
        };
        let left_hi = last.band.hi.expect("only the final piece can be unbounded");
        let right_lo = piece.band.lo;
        let (lower, upper) = (last.band.class, piece.band.class);
        let mut next = piece;
        if left_hi == right_lo && (last.band.hi_closed || next.band.lo_closed) {
            // Contiguous pieces of different classes.
            filled.push(next);
            continue;
        }
        if left_hi == right_lo {
            // Only the shared point is unclaimed.
            let owner = lower.max(upper);
            if owner == lower {
                last.band.hi_closed = true;
            } else {
                next.band.lo_closed = true;
            }
            repairs.push(Repair::Boundary { at: left_hi, owner });
        } else {
            let midpoint = left_hi + (right_lo - left_hi) / 2.0;
            repairs.push(Repair::GapFill { lo: left_hi, hi: right_lo, midpoint, lower, upper });
            last.band.hi = Some(midpoint);
            next.band.lo = midpoint;
            last.band.hi_closed = lower >= upper;
            next.band.lo_closed = upper > lower;
        }
        if last.band.class == next.band.class {
            last.band.hi = next.band.hi;
            last.band.hi_closed = next.band.hi_closed;
        } else {
            filled.push(next);
        }
    }

    let first = &mut filled[0].band;
    if first.lo > 0.0 || !first.lo_closed {
        repairs.push(Repair::ExtendToZero { from: first.lo, class: first.class });
        first.lo = 0.0;
        first.lo_closed = true;
    }
    let last = &mut filled.last_mut().unwrap().band;
    if let Some(hi) = last.hi {
        repairs.push(Repair::ExtendToInfinity { from: hi, class: last.class });
        last.hi = None;
        last.hi_closed = true;
    }
    // Unbounded bands are written with a closed (meaningless) upper flag.
    if last.hi.is_none() {
        last.hi_closed = true;
    }

    Ok((filled.into_iter().map(|p| p.band).collect(), repairs))
}

fn element_lo(e: Element) -> f64 {
    match e {
        Element::Point(v) => v,
        Element::Open(a, _) => a,
    }
}

fn element_hi(e: Element) -> Option<f64> {
    match e {
        Element::Point(v) => Some(v),
        Element::Open(_, z) => z,
    }
}

/// The twelve standard bank-branch criteria with their published bands,
/// before normalization. Layer references are left empty.
pub fn standard_bank_criteria() -> Vec<CriterionSpec> {
    use CriterionKind::*;
    use Direction::*;
    use SuitabilityClass::*;

    let iv = |class, lo: f64, hi: Option<f64>| Band::Interval(IntervalBand::closed(class, lo, hi));
    let cat = |class, category| Band::Category(CategoryBand { class, category });
    let three = |high: (f64, Option<f64>), mid: (f64, Option<f64>), non: (f64, Option<f64>)| {
        vec![
            iv(HighSuitable, high.0, high.1),
            iv(Suitable, mid.0, mid.1),
            iv(NonSuitable, non.0, non.1),
        ]
    };
    let spec = |id: &str, kind, direction, bands| CriterionSpec {
        id: id.to_string(),
        kind,
        layer: None,
        direction: Some(direction),
        bands,
    };

    vec![
        spec("main_street", Distance, NearBetter, three((0.0, Some(100.0)), (100.0, Some(500.0)), (500.0, None))),
        spec("business_center", Distance, NearBetter, three((0.0, Some(100.0)), (100.0, Some(250.0)), (250.0, None))),
        spec("hotel_tourism", Distance, NearBetter, three((0.0, Some(1000.0)), (1000.0, Some(3000.0)), (3000.0, None))),
        spec("office", Distance, NearBetter, three((0.0, Some(250.0)), (200.0, Some(500.0)), (500.0, None))),
        spec("competitor_branch", Distance, BandShaped, three((100.0, Some(200.0)), (200.0, None), (0.0, Some(100.0)))),
        spec("familiar_branch", Distance, FarBetter, three((1000.0, None), (500.0, Some(1000.0)), (0.0, Some(500.0)))),
        spec(
            "income_level",
            Categorical,
            FarBetter,
            vec![cat(HighSuitable, Level::High), cat(Suitable, Level::Middle), cat(NonSuitable, Level::Low)],
        ),
        spec(
            "building_cost",
            CostLevel,
            BandShaped,
            vec![cat(HighSuitable, Level::Middle), cat(Suitable, Level::High), cat(NonSuitable, Level::Low)],
        ),
        spec("medicine_center", Distance, NearBetter, three((0.0, Some(100.0)), (100.0, Some(500.0)), (500.0, None))),
        spec("population_density", Density, FarBetter, three((500.0, None), (200.0, Some(500.0)), (0.0, Some(200.0)))),
        spec("parking", Distance, NearBetter, three((0.0, Some(500.0)), (500.0, Some(1500.0)), (1500.0, None))),
        spec("transit", Distance, NearBetter, three((0.0, Some(500.0)), (500.0, Some(1500.0)), (1500.0, None))),
    ]
}

//! Pairwise-comparison weighting.
//!
//! Weights are the normalized principal right eigenvector of a reciprocal
//! judgment matrix, found by power iteration from the uniform vector. The
//! consistency ratio compares `(λ_max - n) / (n - 1)` with a random index,
//! and a hierarchy multiplies local weights along every root-to-leaf path.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 15;
pub const SAATY_MIN: f64 = 1.0 / 9.0;
pub const SAATY_MAX: f64 = 9.0;
pub const DEFAULT_CR_THRESHOLD: f64 = 0.1;

const RECIPROCITY_TOL: f64 = 1e-9;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;

/// Square reciprocal matrix of pairwise judgments on the 1/9..9 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    labels: Vec<String>,
    n: usize,
    entries: Vec<f64>,
}

impl ComparisonMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..rows.len()).map(|i| format!("c{}", i + 1)).collect();
        Self::with_labels(labels, rows)
    }

    pub fn with_labels(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if !(MIN_DIM..=MAX_DIM).contains(&n) {
            return Err(Error::Domain(format!(
                "comparison matrix dimension {n} outside {MIN_DIM}..={MAX_DIM}"
            )));
        }
        if labels.len() != n {
            return Err(Error::Domain(format!("{} labels for a {n}x{n} matrix", labels.len())));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Domain(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        let m = ComparisonMatrix { labels, n, entries };
        for i in 0..n {
            for j in 0..n {
                let v = m.get(i, j);
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Domain(format!("entry ({i},{j}) = {v} is not positive")));
                }
                if !(SAATY_MIN * (1.0 - RECIPROCITY_TOL)..=SAATY_MAX * (1.0 + RECIPROCITY_TOL)).contains(&v) {
                    return Err(Error::Domain(format!(
                        "entry ({i},{j}) = {v} outside the 1/9..9 scale"
                    )));
                }
                if (v * m.get(j, i) - 1.0).abs() > RECIPROCITY_TOL {
                    return Err(Error::Domain(format!(
                        "entries ({i},{j}) and ({j},{i}) are not reciprocal"
                    )));
                }
            }
            if (m.get(i, i) - 1.0).abs() > RECIPROCITY_TOL {
                return Err(Error::Domain(format!("diagonal entry ({i},{i}) is not 1")));
            }
        }
        Ok(m)
    }

    /// Perfectly consistent matrix `a[i][j] = w[i] / w[j]`.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let rows = w
            .iter()
            .map(|wi| w.iter().map(|wj| wi / wj).collect())
            .collect();
        Self::new(rows)
    }

    /// Reads a CSV table whose header row holds the criterion ids. A leading
    /// label column is accepted when the header's first cell is blank.
    /// Cells are decimals or fractions such as `1/3`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Input(format!("comparison CSV header: {e}")))?
            .clone();
        let label_col = header.get(0).is_some_and(str::is_empty);
        let labels: Vec<String> = header
            .iter()
            .skip(label_col as usize)
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Input(format!("comparison CSV row {r}: {e}")))?;
            let row = record
                .iter()
                .skip(label_col as usize)
                .map(|cell| {
                    parse_judgment(cell)
                        .ok_or_else(|| Error::Input(format!("row {r}: cannot parse judgment `{cell}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::with_labels(labels, rows)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.labels.join(",");
        out.push('\n');
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format_judgment(self.get(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    fn mul(&self, w: &[f64]) -> Vec<f64> {
        self.entries
            .chunks(self.n)
            .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn parse_judgment(cell: &str) -> Option<f64> {
    match cell.split_once('/') {
        Some((num, den)) => {
            let (num, den): (f64, f64) = (num.trim().parse().ok()?, den.trim().parse().ok()?);
            (den != 0.0).then(|| num / den)
        }
        None => cell.parse().ok(),
    }
}

/// Writes integers and unit fractions (`1/3`) in Saaty form, otherwise a decimal.
fn format_judgment(v: f64) -> String {
    if v >= 1.0 && v.fract() == 0.0 {
        format!("{v}")
    } else if (1.0 / v).fract() == 0.0 {
        format!("1/{}", 1.0 / v)
    } else {
        format!("{v}")
    }
}

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("empty weight vector".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain("weights must be finite and non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector(weights))
    }

    /// Scales non-negative values so they sum to one.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::Domain("cannot normalize a zero or non-finite vector".into()));
        }
        Self::new(values.into_iter().map(|v| v / sum).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub weights: WeightVector,
    pub lambda_max: f64,
    pub iterations: usize,
}

/// Power iteration from the uniform vector until successive iterates differ by
/// at most 1e-12 in max-norm.
pub fn principal_eigen(m: &ComparisonMatrix) -> Result<Eigen> {
    let n = m.dim();
    let mut w = vec![1.0 / n as f64; n];
    for iteration in 1..=POWER_MAX_ITER {
        let v = m.mul(&w);
        let sum: f64 = v.iter().sum();
        let next: Vec<f64> = v.iter().map(|x| x / sum).collect();
        let diff = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        if diff <= POWER_TOL {
            // With sum(w) = 1, sum(A w) is the Rayleigh-type estimate of λ_max.
            let lambda_max = m.mul(&w).iter().sum();
            let sum: f64 = w.iter().sum();
            let weights = WeightVector::new(w.iter().map(|x| x / sum).collect())?;
            return Ok(Eigen { weights, lambda_max, iterations: iteration });
        }
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge in {POWER_MAX_ITER} iterations"
    )))
}

pub fn principal_weights(m: &ComparisonMatrix) -> Result<WeightVector> {
    principal_eigen(m).map(|e| e.weights)
}

/// Random consistency index by matrix dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomIndex(Vec<f64>);

impl Default for RandomIndex {
    /// Saaty's table for n = 1..=15.
    fn default() -> Self {
        RandomIndex(vec![
            0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49, 1.51, 1.48, 1.56, 1.57, 1.59,
        ])
    }
}

impl RandomIndex {
    /// `table[k]` is the index for dimension `k + 1`; entries from n = 3 on must be positive.
    pub fn new(table: Vec<f64>) -> Result<Self> {
        if table.iter().skip(2).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("random_index", "entries for n >= 3 must be positive"));
        }
        Ok(RandomIndex(table))
    }

    pub fn get(&self, n: usize) -> Result<f64> {
        self.0.get(n.wrapping_sub(1)).copied().ok_or_else(|| {
            Error::config("random_index", format!("no random index for dimension {n}"))
        })
    }
}

/// Consistency ratio; 0 for n <= 2, which are always consistent.
pub fn consistency_ratio(m: &ComparisonMatrix, ri: &RandomIndex) -> Result<f64> {
    let eigen = principal_eigen(m)?;
    cr_from_lambda(m.dim(), eigen.lambda_max, ri)
}

fn cr_from_lambda(n: usize, lambda_max: f64, ri: &RandomIndex) -> Result<f64> {
    if n <= 2 {
        return Ok(0.0);
    }
    let ci = (lambda_max - n as f64) / (n as f64 - 1.0);
    // λ_max >= n holds exactly; negative values are rounding noise.
    Ok((ci / ri.get(n)?).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub node: String,
    pub n: usize,
    pub lambda_max: f64,
    pub cr: f64,
    pub threshold: f64,
    pub passed: bool,
    pub weights: Vec<f64>,
}

/// Consistency gate: fails iff CR >= threshold.
pub fn gate(node: &str, m: &ComparisonMatrix, threshold: f64, ri: &RandomIndex) -> Result<GateOutcome> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::config("gate_threshold", "threshold must be positive"));
    }
    let eigen = principal_eigen(m)?;
    let cr = cr_from_lambda(m.dim(), eigen.lambda_max, ri)?;
    Ok(GateOutcome {
        node: node.to_string(),
        n: m.dim(),
        lambda_max: eigen.lambda_max,
        cr,
        threshold,
        passed: cr < threshold,
        weights: eigen.weights.as_slice().to_vec(),
    })
}

/// A node of the goal → cluster → criterion tree. Nodes with two or more
/// children carry the matrix comparing them; a single child inherits the
/// parent's whole weight.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyNode {
    pub id: String,
    pub matrix: Option<ComparisonMatrix>,
    pub children: Vec<HierarchyNode>,
}

impl HierarchyNode {
    pub fn leaf(id: impl Into<String>) -> Self {
        HierarchyNode { id: id.into(), matrix: None, children: Vec::new() }
    }

    pub fn parent(id: impl Into<String>, matrix: Option<ComparisonMatrix>, children: Vec<HierarchyNode>) -> Self {
        HierarchyNode { id: id.into(), matrix, children }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Leaf ids in depth-first order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_leaf() {
            out.push(&self.id);
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    /// Checks unique ids, matrix dimensions and label agreement.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        self.validate_inner(&mut seen)
    }

    fn validate_inner<'a>(&'a self, seen: &mut HashSet<&'a str>) -> Result<()> {
        if !seen.insert(&self.id) {
            return Err(Error::Domain(format!("hierarchy node `{}` appears more than once", self.id)));
        }
        match (self.children.len(), &self.matrix) {
            (0, Some(_)) => {
                return Err(Error::Domain(format!("leaf `{}` carries a matrix", self.id)));
            }
            (0 | 1, None) => {}
            (1, Some(_)) => {
                return Err(Error::Domain(format!(
                    "node `{}` has a single child and needs no matrix",
                    self.id
                )));
            }
            (k, None) => {
                return Err(Error::Domain(format!(
                    "node `{}` has {k} children but no comparison matrix",
                    self.id
                )));
            }
            (k, Some(m)) => {
                if m.dim() != k {
                    return Err(Error::Domain(format!(
                        "node `{}` has {k} children but a {}x{} matrix",
                        self.id,
                        m.dim(),
                        m.dim()
                    )));
                }
                let ids: Vec<&str> = self.children.iter().map(|c| c.id.as_str()).collect();
                let generated = m.labels().iter().enumerate().all(|(i, l)| *l == format!("c{}", i + 1));
                if !generated && m.labels().iter().map(String::as_str).ne(ids.iter().copied()) {
                    return Err(Error::Domain(format!(
                        "matrix of `{}` is labelled {:?} but children are {:?}",
                        self.id,
                        m.labels(),
                        ids
                    )));
                }
            }
        }
        self.children.iter().try_for_each(|c| c.validate_inner(seen))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafWeight {
    pub criterion: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub leaves: Vec<LeafWeight>,
    pub gates: Vec<GateOutcome>,
}

impl Synthesis {
    pub fn weight_vector(&self) -> Result<WeightVector> {
        WeightVector::new(self.leaves.iter().map(|l| l.weight).collect())
    }
}

/// Evaluates every node's gate, then multiplies local weights along each
/// root-to-leaf path. Any failing gate rejects the whole hierarchy.
pub fn synthesize(root: &HierarchyNode, threshold: f64, ri: &RandomIndex) -> Result<Synthesis> {
    root.validate()?;
    let mut gates = Vec::new();
    collect_gates(root, threshold, ri, &mut gates)?;
    let failing: Vec<&GateOutcome> = gates.iter().filter(|g| !g.passed).collect();
    if let Some(worst) = failing.iter().max_by(|a, b| a.cr.total_cmp(&b.cr)) {
        return Err(Error::Gate {
            node: failing.iter().map(|g| g.node.as_str()).collect::<Vec<_>>().join(", "),
            cr: worst.cr,
            threshold,
        });
    }
    let mut leaves = Vec::new();
    let mut gate_iter = gates.iter();
    accumulate(root, 1.0, &mut gate_iter, &mut leaves);
    Ok(Synthesis { leaves, gates })
}

fn collect_gates(node: &HierarchyNode, threshold: f64, ri: &RandomIndex, out: &mut Vec<GateOutcome>) -> Result<()> {
    if let Some(m) = &node.matrix {
        out.push(gate(&node.id, m, threshold, ri)?);
    }
    node.children
        .iter()
        .try_for_each(|c| collect_gates(c, threshold, ri, out))
}

fn accumulate<'g>(
    node: &HierarchyNode,
    weight: f64,
    gates: &mut impl Iterator<Item = &'g GateOutcome>,
    out: &mut Vec<LeafWeight>,
) {
    if node.is_leaf() {
        out.push(LeafWeight { criterion: node.id.clone(), weight });
        return;
    }
    let local: Vec<f64> = match &node.matrix {
        Some(_) => gates.next().expect("one gate per matrix, in pre-order").weights.clone(),
        None => vec![1.0],
    };
    for (child, w) in node.children.iter().zip(local) {
        accumulate(child, weight * w, gates, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_two_by_two() {
        let ones = ComparisonMatrix::new(vec![vec![1.0; 3]; 3]).unwrap();
        let w = principal_weights(&ones).unwrap();
        for v in w.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let two = ComparisonMatrix::new(vec![vec![1.0, 2.0], vec![0.5, 1.0]]).unwrap();
        let w = principal_weights(&two).unwrap();
        assert!((w.as_slice()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((w.as_slice()[1] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(consistency_ratio(&two, &RandomIndex::default()).unwrap(), 0.0);
    }

    #[test]
    fn matrix_validation() {
        assert!(ComparisonMatrix::new(vec![vec![1.0]]).is_err());
        assert!(ComparisonMatrix::new(vec![vec![1.0; 16]; 16]).is_err());
        assert!(ComparisonMatrix::new(vec![vec![1.0, 2.0], vec![0.4, 1.0]]).is_err());
        assert!(ComparisonMatrix::new(vec![vec![1.0, 10.0], vec![0.1, 1.0]]).is_err());
        assert!(ComparisonMatrix::new(vec![vec![2.0, 2.0], vec![0.5, 0.5]]).is_err());
        assert!(ComparisonMatrix::new(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).is_err());
        assert!(ComparisonMatrix::new(vec![vec![1.0, 2.0], vec![0.5]]).is_err());
    }

    #[test]
    fn csv_with_fractions_and_label_column() {
        let text = "a,b,c\n1,3,5\n1/3,1,2\n1/5,1/2,1\n";
        let m = ComparisonMatrix::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(m.labels(), ["a", "b", "c"]);
        assert_eq!(m.get(1, 0), 1.0 / 3.0);
        let labelled = ",a,b,c\na,1,3,5\nb,1/3,1,2\nc,1/5,1/2,1\n";
        assert_eq!(ComparisonMatrix::from_csv_reader(labelled.as_bytes()).unwrap(), m);
        let back = ComparisonMatrix::from_csv_reader(m.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, m);
        assert!(ComparisonMatrix::from_csv_reader("a,b\n1,x\n1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn gate_threshold_semantics() {
        let consistent = ComparisonMatrix::from_weights(&[4.0, 2.0, 1.0]).unwrap();
        let ri = RandomIndex::default();
        let pass = gate("c", &consistent, 0.1, &ri).unwrap();
        assert!(pass.passed);
        assert!(pass.cr < 1e-9);
        assert!(gate("c", &consistent, 0.0, &ri).is_err());
        // CR exactly at the threshold fails.
        let skewed = ComparisonMatrix::new(vec![
            vec![1.0, 3.0, 1.0],
            vec![1.0 / 3.0, 1.0, 3.0],
            vec![1.0, 1.0 / 3.0, 1.0],
        ])
        .unwrap();
        let cr = consistency_ratio(&skewed, &ri).unwrap();
        assert!(cr > 0.0);
        assert!(!gate("s", &skewed, cr, &ri).unwrap().passed);
        assert!(gate("s", &skewed, cr * 1.000001, &ri).unwrap().passed);
    }

    #[test]
    fn hierarchy_examples() {
        let half = || ComparisonMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let h = HierarchyNode::parent(
            "goal",
            Some(half()),
            vec![
                HierarchyNode::parent("a", Some(half()), vec![HierarchyNode::leaf("a1"), HierarchyNode::leaf("a2")]),
                HierarchyNode::parent("b", Some(half()), vec![HierarchyNode::leaf("b1"), HierarchyNode::leaf("b2")]),
            ],
        );
        let s = synthesize(&h, 0.1, &RandomIndex::default()).unwrap();
        assert_eq!(s.leaves.iter().map(|l| l.weight).collect::<Vec<_>>(), vec![0.25; 4]);
        assert_eq!(h.leaves(), ["a1", "a2", "b1", "b2"]);

        let m = ComparisonMatrix::from_weights(&[3.0, 2.0, 1.0]).unwrap();
        let local = principal_weights(&m).unwrap();
        let single = HierarchyNode::parent(
            "goal",
            None,
            vec![HierarchyNode::parent(
                "only",
                Some(m),
                vec![HierarchyNode::leaf("x"), HierarchyNode::leaf("y"), HierarchyNode::leaf("z")],
            )],
        );
        let s = synthesize(&single, 0.1, &RandomIndex::default()).unwrap();
        assert_eq!(s.leaves.iter().map(|l| l.weight).collect::<Vec<_>>(), local.as_slice());
    }

    #[test]
    fn hierarchy_structure_errors() {
        let m2 = ComparisonMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let dup = HierarchyNode::parent("g", Some(m2.clone()), vec![HierarchyNode::leaf("x"), HierarchyNode::leaf("x")]);
        assert!(dup.validate().is_err());
        let missing = HierarchyNode::parent("g", None, vec![HierarchyNode::leaf("x"), HierarchyNode::leaf("y")]);
        assert!(missing.validate().is_err());
        let wrong_dim = HierarchyNode::parent(
            "g",
            Some(m2.clone()),
            vec![HierarchyNode::leaf("x"), HierarchyNode::leaf("y"), HierarchyNode::leaf("z")],
        );
        assert!(wrong_dim.validate().is_err());
        let labelled = ComparisonMatrix::with_labels(vec!["y".into(), "x".into()], m2.rows()).unwrap();
        let mislabelled = HierarchyNode::parent("g", Some(labelled), vec![HierarchyNode::leaf("x"), HierarchyNode::leaf("y")]);
        assert!(mislabelled.validate().is_err());
    }

    #[test]
    fn failing_gate_names_node() {
        // Strongly intransitive 3x3: a > b, b > c, c > a.
        let bad = ComparisonMatrix::new(vec![
            vec![1.0, 9.0, 1.0 / 9.0],
            vec![1.0 / 9.0, 1.0, 9.0],
            vec![9.0, 1.0 / 9.0, 1.0],
        ])
        .unwrap();
        let h = HierarchyNode::parent(
            "goal",
            Some(bad),
            vec![HierarchyNode::leaf("a"), HierarchyNode::leaf("b"), HierarchyNode::leaf("c")],
        );
        match synthesize(&h, 0.1, &RandomIndex::default()) {
            Err(Error::Gate { node, cr, .. }) => {
                assert_eq!(node, "goal");
                assert!(cr > 0.1);
            }
            other => panic!("expected gate failure, got {other:?}"),
        }
    }
}

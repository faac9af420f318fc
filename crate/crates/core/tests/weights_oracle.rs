use branchsite::weights::{
    consistency_ratio, gate, principal_eigen, principal_weights, synthesize, ComparisonMatrix, HierarchyNode,
    RandomIndex, DEFAULT_CR_THRESHOLD,
};
use branchsite::Error;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RI: [f64; 15] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49, 1.51, 1.48, 1.56, 1.57, 1.59];

/// Perron root from a dense Schur decomposition.
fn oracle_lambda(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.complex_eigenvalues()
        .iter()
        .filter(|c| c.im.abs() < 1e-8)
        .map(|c| c.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn oracle_cr(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    ((oracle_lambda(rows) - n as f64) / (n as f64 - 1.0) / RI[n - 1]).max(0.0)
}

fn consistent(w: &[f64]) -> Vec<Vec<f64>> {
    w.iter().map(|a| w.iter().map(|b| a / b).collect()).collect()
}

/// Consistent matrix from `w` with the (i, j) pair scaled by `k` and `1/k`.
fn perturbed(w: &[f64], i: usize, j: usize, k: f64) -> Vec<Vec<f64>> {
    let mut rows = consistent(w);
    rows[i][j] *= k;
    rows[j][i] /= k;
    rows
}

#[test]
fn consistent_matrices_recover_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ri = RandomIndex::default();
    let mut count = 0;
    for n in 3..=9 {
        for _ in 0..20 {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
            let total: f64 = raw.iter().sum();
            let m = ComparisonMatrix::new(consistent(&raw)).unwrap();
            let w = principal_weights(&m).unwrap();
            for (got, r) in w.as_slice().iter().zip(&raw) {
                assert!((got - r / total).abs() <= 1e-9);
            }
            assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(consistency_ratio(&m, &ri).unwrap() <= 1e-9);
            count += 1;
        }
    }
    assert!(count >= 100);
}

#[test]
fn perturbed_4x4_matches_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ri = RandomIndex::default();
    for _ in 0..60 {
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(1.0..2.0)).collect();
        let (i, j) = loop {
            let (i, j) = (rng.random_range(0..4), rng.random_range(0..4));
            if i != j {
                break (i, j);
            }
        };
        for k in [3.0, 1.0 / 3.0, rng.random_range(1.0..4.0)] {
            let rows = perturbed(&w, i, j, k);
            let m = ComparisonMatrix::new(rows.clone()).unwrap();
            let eigen = principal_eigen(&m).unwrap();
            assert!((eigen.lambda_max - oracle_lambda(&rows)).abs() <= 1e-6);
            let cr = consistency_ratio(&m, &ri).unwrap();
            assert!((cr - oracle_cr(&rows)).abs() <= 1e-6, "cr {cr} vs {}", oracle_cr(&rows));
        }
    }
}

/// Finds `k` with oracle CR equal to `target` for the uniform 4x4 family.
fn bisect(target: f64) -> Vec<Vec<f64>> {
    let w = [1.0; 4];
    let (mut lo, mut hi) = (1.0, 9.0);
    assert!(oracle_cr(&perturbed(&w, 0, 1, hi)) > target);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if oracle_cr(&perturbed(&w, 0, 1, mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    perturbed(&w, 0, 1, 0.5 * (lo + hi))
}

#[test]
fn gate_around_threshold() {
    let ri = RandomIndex::default();
    let high = bisect(0.15);
    assert!((oracle_cr(&high) - 0.15).abs() < 1e-9);
    let out = gate("m", &ComparisonMatrix::new(high.clone()).unwrap(), DEFAULT_CR_THRESHOLD, &ri).unwrap();
    assert!(!out.passed);
    assert!((out.cr - 0.15).abs() < 1e-6);

    let low = bisect(0.09);
    let out = gate("m", &ComparisonMatrix::new(low).unwrap(), DEFAULT_CR_THRESHOLD, &ri).unwrap();
    assert!(out.passed);
    assert!((out.cr - 0.09).abs() < 1e-6);

    let ok = gate("c", &ComparisonMatrix::new(consistent(&[1.0, 2.0, 4.0])).unwrap(), 0.1, &ri).unwrap();
    assert!(ok.passed && ok.cr <= 1e-9);

    // Synthesis rejects the hierarchy and names the failing node.
    let root = HierarchyNode::parent(
        "goal",
        Some(ComparisonMatrix::new(high).unwrap()),
        ["a", "b", "c", "d"].into_iter().map(HierarchyNode::leaf).collect(),
    );
    match synthesize(&root, DEFAULT_CR_THRESHOLD, &ri) {
        Err(Error::Gate { node, cr, .. }) => {
            assert_eq!(node, "goal");
            assert!(cr >= 0.1);
        }
        other => panic!("expected gate failure, got {other:?}"),
    }
}

#[test]
fn cr_is_zero_exactly_for_consistent_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ri = RandomIndex::default();
    for _ in 0..200 {
        let n = rng.random_range(3..=8);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
        let consistent_case = rng.random_bool(0.5);
        let rows = if consistent_case {
            consistent(&w)
        } else {
            perturbed(&w, 0, n - 1, rng.random_range(1.5..3.0))
        };
        let transitive = (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| (rows[i][j] * rows[j][k] - rows[i][k]).abs() <= 1e-6)));
        assert_eq!(transitive, consistent_case);
        let cr = consistency_ratio(&ComparisonMatrix::new(rows).unwrap(), &ri).unwrap();
        assert_eq!(cr <= 1e-9, transitive, "cr {cr}");
    }
}

/// Random tree of depth 3 with consistent matrices; returns leaves with their path products.
fn random_tree(rng: &mut ChaCha8Rng, id: String, depth: usize, weight: f64, leaves: &mut Vec<(String, f64)>) -> HierarchyNode {
    if depth == 0 {
        leaves.push((id.clone(), weight));
        return HierarchyNode::leaf(id);
    }
    let k = rng.random_range(1..=4);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..4.0)).collect();
    let matrix = (k > 1).then(|| ComparisonMatrix::new(consistent(&raw)).unwrap());
    let local: Vec<f64> = match &matrix {
        Some(m) => principal_weights(m).unwrap().as_slice().to_vec(),
        None => vec![1.0],
    };
    let children = (0..k)
        .map(|c| random_tree(rng, format!("{id}.{c}"), depth - 1, weight * local[c], leaves))
        .collect();
    HierarchyNode::parent(id, matrix, children)
}

#[test]
fn synthesis_matches_path_products() {
    let ri = RandomIndex::default();
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut expected = Vec::new();
        let root = random_tree(&mut rng, "g".into(), 3, 1.0, &mut expected);
        let s = synthesize(&root, DEFAULT_CR_THRESHOLD, &ri).unwrap();
        assert_eq!(s.leaves.len(), expected.len());
        for (leaf, (id, w)) in s.leaves.iter().zip(&expected) {
            assert_eq!(&leaf.criterion, id);
            assert!((leaf.weight - w).abs() <= 1e-12);
        }
        assert!((s.leaves.iter().map(|l| l.weight).sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn synthesis_is_permutation_equivariant() {
    let ri = RandomIndex::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let n = rng.random_range(3..=7);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let tree = |order: &[usize]| {
            let ws: Vec<f64> = order.iter().map(|&i| w[i]).collect();
            let leaves = order.iter().map(|i| HierarchyNode::leaf(format!("c{i}"))).collect();
            HierarchyNode::parent("g", Some(ComparisonMatrix::new(consistent(&ws)).unwrap()), leaves)
        };
        let base = synthesize(&tree(&(0..n).collect::<Vec<_>>()), 0.1, &ri).unwrap();
        let shuffled = synthesize(&tree(&perm), 0.1, &ri).unwrap();
        for leaf in &shuffled.leaves {
            let orig = base.leaves.iter().find(|l| l.criterion == leaf.criterion).unwrap();
            assert!((orig.weight - leaf.weight).abs() <= 1e-12);
        }
    }
}

#[test]
fn matrix_validation() {
    assert!(ComparisonMatrix::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    assert!(ComparisonMatrix::new(vec![vec![1.0, 10.0], vec![0.1, 1.0]]).is_err());
    assert!(ComparisonMatrix::new(vec![vec![1.0]]).is_err());
    assert!(ComparisonMatrix::new(vec![vec![2.0, 1.0], vec![1.0, 1.0]]).is_err());
    let m = ComparisonMatrix::new(vec![vec![1.0, 2.0], vec![0.5, 1.0]]).unwrap();
    let w = principal_weights(&m).unwrap();
    assert!((w.as_slice()[0] - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(consistency_ratio(&m, &RandomIndex::default()).unwrap(), 0.0);
}

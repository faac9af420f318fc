use branchsite::candidates::{extract, merge, tier, CandidateSite, ExtractionConfig, Origin, Tier, TieringRule};
use branchsite::geo::{planar_distance, DistanceMode, Point};
use branchsite::overlay::{CombineMode, GridSpec, ScoreRaster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 50;

fn raster(seed: u64) -> ScoreRaster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = GridSpec::new(Point::new(1_000.0, 2_000.0), 100.0, N, N).unwrap();
    // Coarse levels make score ties common.
    let values = (0..grid.len()).map(|_| rng.random_range(0..12) as f64 / 20.0).collect();
    let mask = (0..grid.len()).map(|_| rng.random_bool(0.9)).collect();
    ScoreRaster { grid, values, mask, mode: CombineMode::WeightedGeometric }
}

/// Scan-everything greedy: best remaining cell, first in (row, col) on ties.
fn oracle(r: &ScoreRaster, cfg: &ExtractionConfig) -> Vec<(usize, usize, f64)> {
    let mut alive: Vec<(usize, usize)> = (0..N)
        .flat_map(|row| (0..N).map(move |col| (row, col)))
        .filter(|&(row, col)| r.value_at(row, col).is_some_and(|v| v > 0.0 && v >= cfg.min_score))
        .collect();
    let mut out = Vec::new();
    while out.len() < cfg.max_proposed {
        let mut best: Option<(usize, usize)> = None;
        for &(row, col) in &alive {
            let v = r.value_at(row, col).unwrap();
            if best.is_none_or(|(br, bc)| v > r.value_at(br, bc).unwrap()) {
                best = Some((row, col));
            }
        }
        let Some((row, col)) = best else { break };
        let c = r.grid.cell_center(row, col);
        out.push((row, col, r.value_at(row, col).unwrap()));
        alive.retain(|&(rr, cc)| (rr, cc) != (row, col) && planar_distance(r.grid.cell_center(rr, cc), c) >= cfg.min_separation);
    }
    out
}

#[test]
fn extraction_matches_brute_force_greedy() {
    for seed in 0..40 {
        let r = raster(seed);
        for (sep, min_score) in [(400.0, 0.0), (250.0, 0.3), (1_000.0, 0.0), (0.0, 0.5), (100.0, 0.0)] {
            let cfg = ExtractionConfig { min_score, min_separation: sep, max_proposed: 14 };
            let got = extract(&r, &cfg, DistanceMode::Planar).unwrap();
            let want = oracle(&r, &cfg);
            assert_eq!(got.len(), want.len());
            for (n, (site, &(row, col, v))) in got.iter().zip(&want).enumerate() {
                assert_eq!(site.id, format!("P{:02}", n + 1));
                assert_eq!(site.location, r.grid.cell_center(row, col));
                assert_eq!(site.score, v);
                assert_eq!(site.origin, Origin::Proposed);
            }
            for (i, a) in got.iter().enumerate() {
                for b in &got[i + 1..] {
                    assert!(planar_distance(a.location, b.location) >= sep);
                }
            }
        }
    }
}

#[test]
fn empty_and_single_cell_rasters() {
    let grid = GridSpec::new(Point::new(0.0, 0.0), 10.0, 5, 5).unwrap();
    let mut r = ScoreRaster { grid, values: vec![0.0; 25], mask: vec![true; 25], mode: CombineMode::WeightedSum };
    let cfg = ExtractionConfig { min_score: 0.0, min_separation: 500.0, max_proposed: 14 };
    assert!(extract(&r, &cfg, DistanceMode::Planar).unwrap().is_empty());
    r.values[7] = 0.3;
    let got = extract(&r, &cfg, DistanceMode::Planar).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].location, grid.cell_center(1, 2));
    // Tie between neighbours: the lower (row, col) wins and suppresses the other.
    r.values[8] = 0.3;
    let got = extract(&r, &cfg, DistanceMode::Planar).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].location, grid.cell_center(1, 2));
    // Masked cells never qualify.
    r.mask[7] = false;
    assert_eq!(extract(&r, &cfg, DistanceMode::Planar).unwrap()[0].location, grid.cell_center(1, 3));
}

fn site(id: &str, score: f64) -> CandidateSite {
    CandidateSite {
        id: id.into(),
        location: Point::new(0.0, 0.0),
        score,
        origin: Origin::Proposed,
        tier: None,
        fixed_open: false,
    }
}

#[test]
fn terciles_are_sized_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 0..40 {
        let sites: Vec<CandidateSite> = (0..n).map(|i| site(&format!("P{i}"), rng.random_range(0..5) as f64)).collect();
        let tiered = tier(&sites, TieringRule::Terciles);
        assert_eq!(tiered.len(), n);
        let count = |t| tiered.iter().filter(|s| s.tier == Some(t)).count();
        let base = n / 3;
        let extra = n % 3;
        assert_eq!(count(Tier::First), base + (extra >= 1) as usize);
        assert_eq!(count(Tier::Second), base + (extra >= 2) as usize);
        assert_eq!(count(Tier::Third), base);
        for a in &tiered {
            for b in &tiered {
                if a.tier < b.tier {
                    assert!(a.score >= b.score);
                }
            }
        }
        for (a, b) in tiered.iter().zip(&sites) {
            assert_eq!(a.id, b.id);
        }
    }
}

#[test]
fn merge_keeps_both_origins() {
    let proposed: Vec<CandidateSite> = (1..=14).map(|i| site(&format!("P{i:02}"), 0.5)).collect();
    let existing: Vec<CandidateSite> = (1..=9).map(|i| CandidateSite::existing(format!("E{i:02}"), Point::new(0.0, 0.0), 0.0)).collect();
    let all = merge(&proposed, &existing).unwrap();
    assert_eq!(all.len(), 23);
    assert_eq!(all.iter().filter(|s| s.origin == Origin::Existing).count(), 9);
    assert_eq!(merge(&proposed, &[]).unwrap(), proposed);
    assert!(merge(&proposed, &[CandidateSite::existing("P01", Point::new(1.0, 1.0), 0.0)]).is_err());
}

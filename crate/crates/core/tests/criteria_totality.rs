use branchsite::criteria::{
    classify, score, standard_bank_criteria, validate_spec, Band, CriterionSpec, Level, RawValue, ScoreScheme,
    SuitabilityClass,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Class from the published (unrepaired) bands: the best class whose closed
/// band contains `v`.
fn published_class(spec: &CriterionSpec, v: f64) -> Option<SuitabilityClass> {
    spec.bands
        .iter()
        .filter_map(|b| match b {
            Band::Interval(iv) if iv.lo <= v && iv.hi.is_none_or(|hi| v <= hi) => Some(iv.class),
            _ => None,
        })
        .max()
}

fn boundaries(spec: &CriterionSpec) -> Vec<f64> {
    spec.bands
        .iter()
        .flat_map(|b| match b {
            Band::Interval(iv) => vec![Some(iv.lo), iv.hi],
            Band::Category(_) => vec![],
        })
        .flatten()
        .collect()
}

fn sample(rng: &mut ChaCha8Rng, edges: &[f64]) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(0.0..4_000.0),
        1 => 10f64.powf(rng.random_range(-6.0..9.0)),
        2 => {
            let e = edges[rng.random_range(0..edges.len())];
            let v = e + rng.random_range(-1e-3..1e-3);
            v.max(0.0)
        }
        _ => {
            let e = edges[rng.random_range(0..edges.len())];
            match rng.random_range(0..3) {
                0 => e,
                1 => e.next_up(),
                _ => e.next_down().max(0.0),
            }
        }
    }
}

#[test]
fn every_value_gets_exactly_one_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let specs = standard_bank_criteria();
    assert_eq!(specs.len(), 12);
    for raw in &specs {
        let norm = validate_spec(raw).unwrap().spec;
        if !norm.kind.is_numeric() {
            for level in [Level::Low, Level::Middle, Level::High] {
                let hits = norm
                    .bands
                    .iter()
                    .filter(|b| matches!(b, Band::Category(c) if c.category == level))
                    .count();
                assert_eq!(hits, 1, "{} {level:?}", raw.id);
                assert!(classify(&norm, RawValue::Category(level)).is_ok());
            }
            continue;
        }
        let edges = boundaries(raw);
        for _ in 0..100_000 {
            let v = sample(&mut rng, &edges);
            let hits = norm
                .bands
                .iter()
                .filter(|b| matches!(b, Band::Interval(iv) if iv.contains(v)))
                .count();
            assert_eq!(hits, 1, "{} at {v}", raw.id);
            let class = classify(&norm, RawValue::Number(v)).unwrap();
            // None of the published tables has an interior gap, so every value has a published claimant.
            assert_eq!(Some(class), published_class(raw, v), "{} at {v}", raw.id);
        }
        assert!(classify(&norm, RawValue::Number(-1.0)).is_err());
        assert!(classify(&norm, RawValue::Number(f64::NAN)).is_err());
    }
}

#[test]
fn default_scores_are_the_published_values() {
    let s = ScoreScheme::default();
    let got: Vec<f64> = SuitabilityClass::ALL.iter().map(|&c| score(c, &s)).collect();
    assert_eq!(got, vec![0.6, 0.4, 0.0]);
}

#[test]
fn direction_is_respected() {
    use SuitabilityClass::*;
    for raw in standard_bank_criteria().iter().filter(|s| s.kind.is_numeric()) {
        let norm = validate_spec(raw).unwrap().spec;
        let classes: Vec<SuitabilityClass> = (0..=5_000)
            .map(|d| classify(&norm, RawValue::Number(d as f64)).unwrap())
            .collect();
        match raw.id.as_str() {
            "competitor_branch" => {
                assert_eq!(classes[50], NonSuitable);
                assert_eq!(classes[150], HighSuitable);
                assert_eq!(classes[1_000], Suitable);
            }
            "familiar_branch" | "population_density" => assert!(classes.windows(2).all(|w| w[0] <= w[1])),
            _ => assert!(classes.windows(2).all(|w| w[0] >= w[1])),
        }
    }
}

mod common;

use common::checks::sampler_joint as joint;
use latent_bias::rng::{rng_from, tag};
use latent_bias::world::{
    binarize_attribute, build_dataset, render_scene, sample_skewed_pair, sprite_attributes, AttributeSpec, DatasetConfig,
    LabeledDataset, SceneParams, Shape, FACTOR_NAMES,
};
use proptest::prelude::*;

#[test]
fn sampler_matches_conditional_table_at_high_skew() {
    let s = 0.9;
    let f = joint(s, 100_000, 1);
    assert!((f[1][0] - 0.45).abs() <= 0.005, "{f:?}");
    assert!((f[1][1] - 0.05).abs() <= 0.005, "{f:?}");
    assert!((f[0][1] - 0.45).abs() <= 0.005, "{f:?}");
    assert!((f[0][0] - 0.05).abs() <= 0.005, "{f:?}");
    let p_t1 = f[1][0] + f[1][1];
    let p_t0 = f[0][0] + f[0][1];
    assert!((f[1][0] / p_t1 - s).abs() <= 0.005);
    assert!((f[1][1] / p_t1 - (1.0 - s)).abs() <= 0.005);
    assert!((f[0][0] / p_t0 - (1.0 - s)).abs() <= 0.005);
    assert!((f[0][1] / p_t0 - s).abs() <= 0.005);
}

#[test]
fn sampler_is_independent_at_half_skew() {
    let n = 100_000;
    let mut rng = rng_from(2, &[tag("sampler-test")]);
    let pairs: Vec<(f64, f64)> =
        (0..n).map(|_| sample_skewed_pair(0.5, &mut rng).unwrap()).map(|(t, b)| (t as f64, b as f64)).collect();
    let corr = correlation(&pairs.iter().map(|p| p.0).collect::<Vec<_>>(), &pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    assert!(corr.abs() < 0.01, "{corr}");
}

#[test]
fn sampler_rejects_out_of_range_skewness() {
    let mut rng = rng_from(0, &[]);
    assert!(sample_skewed_pair(1.1, &mut rng).is_err());
    assert!(sample_skewed_pair(-0.1, &mut rng).is_err());
    assert!(sample_skewed_pair(f64::NAN, &mut rng).is_err());
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn dataset(target: &str, biased: &str, s: f64, n: usize, seed: u64) -> LabeledDataset {
    build_dataset(&DatasetConfig {
        target: target.into(),
        biased: biased.into(),
        skewness: s,
        n,
        side: 16,
        seed,
    })
    .unwrap()
}

#[test]
fn dataset_labels_follow_the_skew() {
    let data = dataset("shape", "scale", 0.9, 10_000, 3);
    let t = data.binarized("shape").unwrap();
    let b = data.binarized("scale").unwrap();
    let t1: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 1).collect();
    let t0: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 0).collect();
    let p_b0_t1 = t1.iter().filter(|&&i| b[i] == 0).count() as f64 / t1.len() as f64;
    let p_b1_t0 = t0.iter().filter(|&&i| b[i] == 1).count() as f64 / t0.len() as f64;
    assert!((p_b0_t1 - 0.9).abs() <= 0.02, "{p_b0_t1}");
    assert!((p_b1_t0 - 0.9).abs() <= 0.02, "{p_b1_t0}");
}

#[test]
fn balanced_dataset_has_uncorrelated_factors() {
    let data = dataset("pos_x", "orientation", 0.5, 10_000, 4);
    for i in 0..5 {
        for j in (i + 1)..5 {
            let a = data.values(FACTOR_NAMES[i]).unwrap();
            let b = data.values(FACTOR_NAMES[j]).unwrap();
            let c = correlation(&a, &b);
            assert!(c.abs() < 0.05, "{} vs {}: {c}", FACTOR_NAMES[i], FACTOR_NAMES[j]);
        }
    }
}

#[test]
fn dataset_is_reproducible_and_round_trips() {
    let a = dataset("scale", "pos_y", 0.75, 50, 9);
    let b = dataset("scale", "pos_y", 0.75, 50, 9);
    assert_eq!(a, b);
    assert_ne!(a, dataset("scale", "pos_y", 0.75, 50, 10));
    let dir = tempfile::tempdir().unwrap();
    let [json, blob] = a.save(dir.path(), "data").unwrap();
    let loaded = LabeledDataset::load(&json).unwrap();
    assert_eq!(loaded, a);
    let [json2, blob2] = loaded.save(&dir.path().join("again"), "data").unwrap();
    assert_eq!(std::fs::read(&json).unwrap(), std::fs::read(json2).unwrap());
    assert_eq!(std::fs::read(&blob).unwrap(), std::fs::read(blob2).unwrap());
}

fn centroid_x(params: &SceneParams, side: usize) -> f64 {
    let img = render_scene(params, side).unwrap();
    let (mut m, mut mx) = (0.0, 0.0);
    for y in 0..side {
        for x in 0..side {
            let v = img.get(x, y);
            m += v;
            mx += v * (x as f64 + 0.5);
        }
    }
    mx / m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn renders_stay_in_unit_range(
        shape in 0usize..3,
        scale in 0.3..=0.8f64,
        pos_x in 0.2..=0.8f64,
        pos_y in 0.2..=0.8f64,
        orientation in 0.0..3.14f64,
        side in 16usize..40,
    ) {
        let p = SceneParams { shape: Shape::ALL[shape], scale, pos_x, pos_y, orientation };
        let img = render_scene(&p, side).unwrap();
        prop_assert_eq!(img.pixels.len(), side * side);
        prop_assert!(img.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(img.pixels.iter().any(|v| *v > 0.0));
    }

    #[test]
    fn translation_moves_the_centroid(
        shape in 0usize..3,
        scale in 0.3..=0.4f64,
        orientation in 0.0..3.14f64,
        k in 1usize..4,
    ) {
        let side = 32;
        let a = SceneParams { shape: Shape::ALL[shape], scale, pos_x: 0.4, pos_y: 0.5, orientation };
        let b = SceneParams { pos_x: 0.4 + k as f64 / side as f64, ..a };
        let shift = centroid_x(&b, side) - centroid_x(&a, side);
        prop_assert!((shift - k as f64).abs() <= 0.5, "shift {shift} for k {k}");
    }

    #[test]
    fn continuous_binarization_is_balanced(values in prop::collection::vec(0.3..=0.8f64, 1..200)) {
        let spec = AttributeSpec::continuous("scale", 0.3, 0.8);
        let bits = binarize_attribute(&spec, &values).unwrap();
        let n = values.len() as f64;
        let frac = bits.iter().map(|&b| b as f64).sum::<f64>() / n;
        // ties at the median can only shrink the positive class
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
        if distinct {
            prop_assert!((frac - 0.5).abs() <= 1.0 / n, "{frac} of {n}");
        } else {
            prop_assert!(frac <= 0.5 + 1.0 / n);
        }
    }
}

#[test]
fn every_label_satisfies_its_spec() {
    let specs = sprite_attributes();
    let data = dataset("orientation", "shape", 0.9, 500, 5);
    for label in &data.labels {
        for (spec, v) in specs.iter().zip(label) {
            assert!(spec.accepts(*v), "{} rejects {v}", spec.name);
        }
    }
}

mod common;

use common::{analytic_world, argmin_angle, random_decoder, unit};
use latent_bias::discovery::{discover, discovery_loss, latent_batch, mean_tv, DiscoveryConfig};
use latent_bias::hyperplane::{abs_cos, Hyperplane};
use latent_bias::models::Classifier;
use latent_bias::rng::tag;

fn analytic_config(lambda: f64) -> DiscoveryConfig {
    DiscoveryConfig {
        lambda,
        seed: 4,
        ..DiscoveryConfig::default()
    }
}

#[test]
fn analytic_world_recovers_the_planted_direction() {
    let (g, c) = analytic_world();
    let found = discover(&g, &c, &[1.0, 0.0], &[], &analytic_config(10.0)).unwrap();
    let w = found.hyperplane.normal();
    assert!(abs_cos(w, &[0.0, 1.0]).unwrap() >= 0.95, "{w:?}");

    // 1° grid search over unit normals at the learned offset
    let cfg = analytic_config(10.0);
    let z = latent_batch(512, 2, 99, &[tag("oracle")]);
    let o = found.hyperplane.offset();
    let (deg, _) = argmin_angle(|u| {
        let h = Hyperplane::new(u.to_vec(), o).unwrap();
        discovery_loss(&h, &z, &g, &c, &[1.0, 0.0], &[], &cfg).unwrap().point.total
    });
    let t = deg.to_radians();
    let oracle = [t.cos(), t.sin()];
    assert!(abs_cos(&oracle, &[0.0, 1.0]).unwrap() >= 0.95, "oracle at {deg}°");
    assert!(abs_cos(w, &oracle).unwrap() > 2f64.to_radians().cos(), "{w:?} vs {deg}°");
}

#[test]
fn without_penalty_the_classifier_direction_wins() {
    let (g, c) = analytic_world();
    let found = discover(&g, &c, &[1.0, 0.0], &[], &analytic_config(0.0)).unwrap();
    let w = found.hyperplane.normal();
    assert!(abs_cos(w, &[0.0, 1.0]).unwrap() <= 0.9, "{w:?}");
    assert!(abs_cos(w, &unit(&[1.0, 0.6])).unwrap() > 0.95, "{w:?}");
}

#[test]
fn penalty_keeps_clear_of_known_attributes() {
    // classifier reads the sum of the first three latents; z3 is known, z1 is the target
    let g = latent_bias::models::IdentityGenerator { dim: 3 };
    let c = Classifier::logistic(vec![3.0, 3.0, 3.0], 0.0).unwrap();
    let cfg = DiscoveryConfig {
        iterations: 400,
        seed: 8,
        ..DiscoveryConfig::default()
    };
    let found = discover(&g, &c, &[1.0, 0.0, 0.0], &[vec![0.0, 0.0, 1.0]], &cfg).unwrap();
    let w = found.hyperplane.normal();
    assert!(abs_cos(w, &[0.0, 0.0, 1.0]).unwrap() < 0.3, "{w:?}");
    assert!(abs_cos(w, &[1.0, 0.0, 0.0]).unwrap() < 0.3, "{w:?}");
    assert!(abs_cos(w, &[0.0, 1.0, 0.0]).unwrap() > 0.9, "{w:?}");
}

#[test]
fn discovery_is_deterministic() {
    let g = random_decoder(8, 4, 2);
    let c = Classifier::random(64, 6, 3);
    let cfg = DiscoveryConfig {
        iterations: 40,
        restarts: 2,
        batch_size: 16,
        seed: 21,
        ..DiscoveryConfig::default()
    };
    let w_t = [1.0, 0.0, 0.0, 0.0];
    let a = discover(&g, &c, &w_t, &[], &cfg).unwrap();
    let b = discover(&g, &c, &w_t, &[], &cfg).unwrap();
    assert_eq!(a, b);
    let other = discover(&g, &c, &w_t, &[], &DiscoveryConfig { seed: 22, ..cfg }).unwrap();
    assert_ne!(a.hyperplane, other.hyperplane);
    // canonical: unit length, first nonzero component positive
    let n = a.hyperplane.normal();
    assert!((n.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(n.iter().find(|x| **x != 0.0).unwrap() > &0.0);
    assert_eq!(a.trace.len(), 40);
}

#[test]
fn smoothed_losses_decrease_during_training() {
    use latent_bias::discovery::LossPoint;
    let (g, c) = analytic_world();
    let early_late = |t: &[LossPoint], f: fn(&LossPoint) -> f64| {
        let mean = |s: &[LossPoint]| s.iter().map(f).sum::<f64>() / s.len() as f64;
        (mean(&t[..50]), mean(&t[t.len() - 50..]))
    };
    // without the penalty only the variation term is optimized
    let free = discover(&g, &c, &[1.0, 0.0], &[], &analytic_config(0.0)).unwrap();
    let (early, late) = early_late(&free.trace, |p| p.variation);
    assert!(late < early, "{early} -> {late}");
    // with it, the total falls even though the variation term may rise
    let held = discover(&g, &c, &[1.0, 0.0], &[], &analytic_config(10.0)).unwrap();
    let (early, late) = early_late(&held.trace, |p| p.total);
    assert!(late < early, "{early} -> {late}");
}

#[test]
fn dropping_the_penalty_does_not_lower_variation() {
    let (g, c) = analytic_world();
    let with = discover(&g, &c, &[1.0, 0.0], &[], &analytic_config(10.0)).unwrap();
    let without = discover(&g, &c, &[1.0, 0.0], &[], &analytic_config(0.0)).unwrap();
    let z = latent_batch(256, 2, 5, &[tag("tv")]);
    let tv = |h: &Hyperplane| mean_tv(h, &z, &g, &c, &with.config.traversal).unwrap();
    assert!(tv(&without.hyperplane) >= tv(&with.hyperplane) - 1e-9);
}

#[test]
fn variation_alone_is_minimized_along_the_classifier_axis() {
    let g = latent_bias::models::IdentityGenerator { dim: 2 };
    let c = Classifier::logistic(vec![4.0, 0.0], 0.0).unwrap();
    let cfg = analytic_config(0.0);
    let z = latent_batch(256, 2, 17, &[tag("grid")]);
    let (deg, _) = argmin_angle(|u| {
        let h = Hyperplane::new(u.to_vec(), 0.0).unwrap();
        discovery_loss(&h, &z, &g, &c, &[0.0, 1.0], &[], &cfg).unwrap().point.variation
    });
    assert_eq!(deg, 0.0);
}

//! One full setting: skewed sprites, PCA generator, classifier, ground truth, discovery
//! and both metrics, compared with the axis baseline.
//!
//! cargo run --release --example sprite_discovery [target] [biased]

use latent_bias::evaluation::{ExperimentSetting, GeneratorKind, GridConfig, GridRunner, Method};

fn main() -> latent_bias::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let target = args.first().map_or("shape", String::as_str);
    let biased = args.get(1).map_or("pos_x", String::as_str);
    let cfg = GridConfig {
        methods: vec![Method::Discover, Method::BaselineAxis],
        ..GridConfig::default()
    };
    let setting = ExperimentSetting::new(target, biased, GeneratorKind::PcaSkewed, cfg.skewness, cfg.seed);
    setting.validate()?;
    let mut runner = GridRunner::new(cfg)?;
    for row in runner.run_cell(&setting) {
        match row.metrics {
            Some(m) => println!(
                "{:14} cos_bias {:.3}  cos_target {:.3}  delta {:+.3}  TV {:.4}",
                row.method.name(),
                m.cos_bias,
                m.cos_target,
                m.delta_cos,
                m.tv
            ),
            None => println!("{:14} failed: {}", row.method.name(), row.error.unwrap_or_default()),
        }
    }
    Ok(())
}

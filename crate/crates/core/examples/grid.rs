//! Runs the experiment grid and prints the CSV and per-method summary.
//!
//! cargo run --release --example grid            # 3 attributes, reduced sizes
//! cargo run --release --example grid -- --full  # the full 40-setting grid

use latent_bias::evaluation::{rows_to_csv, run_grid, summarize, GridConfig};

fn main() -> latent_bias::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let mut cfg = GridConfig::default();
    if !full {
        cfg.attributes = vec!["shape".into(), "scale".into(), "pos_x".into()];
        cfg.train_size = 1500;
        cfg.probe_size = 1000;
        cfg.discovery.iterations = 300;
        cfg.discovery.restarts = 2;
    }
    let rows = run_grid(&cfg.settings(), &cfg)?;
    print!("{}", rows_to_csv(&rows));
    let summary = summarize(&rows, &cfg.methods);
    for m in &summary.methods {
        println!(
            "{:20} delta-cos {:+.3} ± {:.3}  %leading {:.1}",
            m.method.name(),
            m.delta_cos.mean.unwrap_or(f64::NAN),
            m.delta_cos.std.unwrap_or(f64::NAN),
            m.percent_leading.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

//! Audits a trained classifier: which known attribute moves its output most (the
//! pseudo ground truth), and which axis hyperplane the baseline would report.
//!
//! cargo run --release --example audit

use latent_bias::evaluation::{pseudo_gt_bias, select_baseline_index, EvalConfig, GeneratorKind, GridConfig, GridRunner, ExperimentSetting};
use latent_bias::hyperplane::{abs_cos, Hyperplane};

fn main() -> latent_bias::Result<()> {
    let mut runner = GridRunner::new(GridConfig::default())?;
    let eval = EvalConfig::default();
    for (t, b) in [("shape", "pos_y"), ("pos_x", "scale")] {
        let setting = ExperimentSetting::new(t, b, GeneratorKind::PcaBalanced, 0.9, 0);
        let ctx = runner.context(&setting).map_err(latent_bias::Error::Degenerate)?;
        let basis = &ctx.world.fit.basis;
        let decoder = &ctx.world.decoder;
        let pseudo = pseudo_gt_bias(basis, t, decoder, ctx.classifier.as_ref(), &eval)?;
        println!("target {t}, planted {b}: largest TV along the {pseudo} hyperplane");
        for name in basis.names().iter().filter(|n| *n != t) {
            let tv = eval.mean_tv(&basis.hyperplane_named(name)?, decoder, ctx.classifier.as_ref())?;
            println!("  {name:12} TV {tv:.4}");
        }
        let d = basis.dim();
        let axes = (0..d).map(|k| Hyperplane::axis(d, k)).collect::<latent_bias::Result<Vec<_>>>()?;
        let k = select_baseline_index(&axes, &basis.hyperplane_named(t)?, decoder, ctx.classifier.as_ref(), &eval)?;
        let cos = abs_cos(axes[k].normal(), basis.hyperplane_named(b)?.normal())?;
        println!("  baseline picks latent axis {k} (|cos| with planted bias {cos:.3})");
    }
    Ok(())
}

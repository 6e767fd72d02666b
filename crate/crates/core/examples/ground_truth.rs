//! Fits the ground-truth attribute hyperplanes jointly in a PCA latent space.
//!
//! cargo run --release --example ground_truth

use latent_bias::hyperplane::{fit_joint_hyperplanes, JointFitConfig};
use latent_bias::models::fit_pca_decoder;
use latent_bias::world::{build_dataset, DatasetConfig, FACTOR_NAMES};

fn main() -> latent_bias::Result<()> {
    let probe = build_dataset(&DatasetConfig {
        target: "shape".into(),
        biased: "scale".into(),
        skewness: 0.5,
        n: 2000,
        side: 16,
        seed: 4,
    })?;
    let decoder = fit_pca_decoder(&probe, 10)?;
    let latents = decoder.encode(&probe.images)?;
    let labels = probe.binarized_all()?;
    let names: Vec<String> = FACTOR_NAMES.iter().map(|s| s.to_string()).collect();
    let fit = fit_joint_hyperplanes(&latents, &labels, &names, &JointFitConfig::default())?;
    for (name, acc) in names.iter().zip(&fit.accuracy) {
        println!("{name:12} probe accuracy {acc:.3}");
    }
    let gram = fit.basis.q().t_matmul(fit.basis.q())?;
    println!("max |QᵀQ - I| = {:.1e}", gram.sub(&latent_bias::numgrad::Matrix::identity(names.len()))?.max_abs());

    // how entangled the raw (pre-QR) attribute directions are
    let w = &fit.weights;
    for a in 0..names.len() {
        for b in a + 1..names.len() {
            let c = latent_bias::hyperplane::abs_cos(&w.column(a), &w.column(b))?;
            if c > 0.3 {
                println!("raw normals of {} and {} overlap: |cos| = {c:.2}", names[a], names[b]);
            }
        }
    }
    Ok(())
}

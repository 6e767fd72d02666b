//! Fits the PCA decoder at several latent sizes and reports reconstruction error.
//!
//! cargo run --release --example pca_generator

use latent_bias::models::{fit_pca_decoder, Generator};
use latent_bias::world::{build_dataset, DatasetConfig};

fn main() -> latent_bias::Result<()> {
    let data = build_dataset(&DatasetConfig {
        target: "shape".into(),
        biased: "scale".into(),
        skewness: 0.5,
        n: 2000,
        side: 16,
        seed: 3,
    })?;
    for d in [2, 5, 10, 20] {
        let decoder = fit_pca_decoder(&data, d)?;
        let recon = decoder.generate(&decoder.encode(&data.images)?)?;
        let diff = recon.sub(&data.images)?;
        let mse = diff.as_slice().iter().map(|v| v * v).sum::<f64>() / diff.as_slice().len() as f64;
        println!("d = {d:2}: reconstruction MSE {mse:.5}");
    }
    Ok(())
}

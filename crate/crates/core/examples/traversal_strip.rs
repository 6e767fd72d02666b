//! Writes the traversal images along a ground-truth hyperplane as PGM files.
//!
//! cargo run --release --example traversal_strip [attribute] [out-dir]

use std::path::PathBuf;

use latent_bias::cli::pgm_bytes;
use latent_bias::hyperplane::{fit_joint_hyperplanes, project_to_plane, traversal_latents, JointFitConfig, TraversalConfig};
use latent_bias::models::fit_pca_decoder;
use latent_bias::world::{build_dataset, DatasetConfig, FACTOR_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let attribute = args.first().map_or("pos_x", String::as_str);
    let out = args.get(1).map_or_else(|| std::env::temp_dir().join("traversal-strip"), PathBuf::from);

    let data = build_dataset(&DatasetConfig {
        target: "shape".into(),
        biased: "scale".into(),
        skewness: 0.5,
        n: 2000,
        side: 16,
        seed: 5,
    })?;
    let decoder = fit_pca_decoder(&data, 10)?;
    let names: Vec<String> = FACTOR_NAMES.iter().map(|s| s.to_string()).collect();
    let fit = fit_joint_hyperplanes(&decoder.encode(&data.images)?, &data.binarized_all()?, &names, &JointFitConfig::default())?;
    let h = fit.basis.hyperplane_named(attribute)?;

    let start = project_to_plane(&h, &vec![0.0; decoder.latent_dim()])?;
    let path = traversal_latents(&start, &h, TraversalConfig::default().alphas())?;
    std::fs::create_dir_all(&out)?;
    for (i, z) in path.iter().enumerate() {
        let file = out.join(format!("step-{i:02}.pgm"));
        std::fs::write(&file, pgm_bytes(16, 16, &decoder.decode(z)?)?)?;
    }
    println!("wrote {} images along the {attribute} hyperplane to {}", path.len(), out.display());
    Ok(())
}

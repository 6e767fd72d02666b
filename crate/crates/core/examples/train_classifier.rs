//! Trains the target classifier on skewed sprites and measures how much it leans on the
//! biased attribute.
//!
//! cargo run --release --example train_classifier

use latent_bias::models::{train_classifier, ClassifierConfig};
use latent_bias::world::{build_dataset, DatasetConfig};

fn main() -> latent_bias::Result<()> {
    let cfg = |skewness, n, seed| DatasetConfig {
        target: "shape".into(),
        biased: "scale".into(),
        skewness,
        n,
        side: 16,
        seed,
    };
    let train = build_dataset(&cfg(0.9, 4000, 1))?;
    let clf = train_classifier(&train, "shape", &ClassifierConfig { seed: 2, ..ClassifierConfig::default() })?;
    println!("epoch losses: {:?}", clf.record.epoch_loss.iter().map(|l| format!("{l:.3}")).collect::<Vec<_>>());

    // a classifier leaning on scale loses accuracy once the correlation is reversed
    for (name, s) in [("aligned", 0.9), ("balanced", 0.5), ("reversed", 0.1)] {
        let test = build_dataset(&cfg(s, 1000, 9))?;
        println!("{name:9} test accuracy {:.3}", clf.accuracy(&test.images, &test.binarized("shape")?)?);
    }
    Ok(())
}

//! Discovery on a two-dimensional world where the answer is known.
//!
//! The classifier reads `σ(4·(z1 + 0.6·z2))`; z1 is the target, so the unknown bias is z2.
//!
//! cargo run --release --example analytic_discovery

use latent_bias::discovery::{discover, DiscoveryConfig};
use latent_bias::hyperplane::abs_cos;
use latent_bias::models::{Classifier, IdentityGenerator};

fn main() -> latent_bias::Result<()> {
    let g = IdentityGenerator { dim: 2 };
    let c = Classifier::logistic(vec![4.0, 2.4], 0.0)?;
    for lambda in [10.0, 0.0] {
        let cfg = DiscoveryConfig { lambda, seed: 1, ..DiscoveryConfig::default() };
        let r = discover(&g, &c, &[1.0, 0.0], &[], &cfg)?;
        let w = r.hyperplane.normal();
        println!(
            "lambda {lambda:4}: w = [{:.3}, {:.3}], |cos(w, e2)| = {:.3}, held-out TV {:.3}",
            w[0],
            w[1],
            abs_cos(w, &[0.0, 1.0])?,
            r.final_tv
        );
    }
    Ok(())
}

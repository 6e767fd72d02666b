//! Renders sprites, samples a skewed dataset and checks the planted correlation.
//!
//! cargo run --example sprite_world

use latent_bias::world::{build_dataset, render_scene, DatasetConfig, SceneParams, Shape};

fn ascii(pixels: &[f64], side: usize) -> String {
    let ramp = [' ', '.', ':', '+', '#'];
    pixels
        .chunks(side)
        .map(|row| row.iter().map(|v| ramp[((v * 4.0).round() as usize).min(4)]).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() -> latent_bias::Result<()> {
    for shape in [Shape::Square, Shape::Ellipse, Shape::Triangle] {
        let scene = SceneParams { shape, scale: 0.6, pos_x: 0.5, pos_y: 0.5, orientation: 0.3 };
        let img = render_scene(&scene, 16)?;
        println!("{shape:?}\n{}\n", ascii(&img.pixels, img.side));
    }

    let data = build_dataset(&DatasetConfig {
        target: "shape".into(),
        biased: "scale".into(),
        skewness: 0.9,
        n: 5000,
        side: 16,
        seed: 1,
    })?;
    // planted classes (scale below the midpoint of its range) against the median split
    // the classifier is trained on
    let t = data.binarized("shape")?;
    let planted: Vec<u8> = data.values("scale")?.iter().map(|v| u8::from(*v < 0.55)).collect();
    for (name, b) in [("planted", planted), ("median split", data.binarized("scale")?)] {
        let mut counts = [[0usize; 2]; 2];
        for (ti, bi) in t.iter().zip(&b) {
            counts[*ti as usize][*bi as usize] += 1;
        }
        let cond = |ti: usize| counts[ti][0] as f64 / (counts[ti][0] + counts[ti][1]) as f64;
        println!("{name:12}: P(b=0 | t=0) = {:.3}, P(b=0 | t=1) = {:.3}", cond(0), cond(1));
    }
    Ok(())
}

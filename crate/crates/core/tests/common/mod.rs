#![allow(dead_code)]

pub mod checks;
pub mod oracles;

use latent_bias::models::LinearDecoder;
use latent_bias::numgrad::{qr_thin, Matrix};
use latent_bias::rng;

/// Decoder with random orthonormal mixing around a mid-grey mean.
pub fn random_decoder(side: usize, d: usize, seed: u64) -> LinearDecoder {
    let p = side * side;
    let mut r = rng::rng_from(seed, &[rng::tag("test-decoder")]);
    let raw = Matrix::from_vec(p, d, rng::standard_normal_vec(&mut r, p * d)).unwrap();
    let (q, _) = qr_thin(&raw).unwrap();
    let mean = (0..p).map(|i| 0.4 + 0.2 * (i as f64 / p as f64)).collect();
    LinearDecoder::new(side, q, mean, vec![1.0; d]).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64, tag: &str) -> Matrix {
    let mut r = rng::rng_from(seed, &[rng::tag(tag)]);
    Matrix::from_vec(rows, cols, rng::standard_normal_vec(&mut r, rows * cols)).unwrap()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Two latent dims fed straight into `σ(4·(z1 + 0.6·z2))`.
pub fn analytic_world() -> (latent_bias::models::IdentityGenerator, latent_bias::models::Classifier) {
    let g = latent_bias::models::IdentityGenerator { dim: 2 };
    let c = latent_bias::models::Classifier::logistic(vec![4.0, 2.4], 0.0).unwrap();
    (g, c)
}

/// Angle in degrees (in `[0, 180)`) minimizing `loss` over unit normals at 1° steps.
pub fn argmin_angle(mut loss: impl FnMut(&[f64]) -> f64) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    for deg in 0..180 {
        let t = (deg as f64).to_radians();
        let l = loss(&[t.cos(), t.sin()]);
        if l < best.1 {
            best = (deg as f64, l);
        }
    }
    best
}

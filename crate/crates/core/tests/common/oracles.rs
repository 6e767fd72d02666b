//! Independent slow versions of the closed-form pieces.

use latent_bias::evaluation::{EvalConfig, ExperimentSetting, GeneratorKind, GridRow, Method, Metrics};
use latent_bias::hyperplane::Hyperplane;
use latent_bias::models::{Generator, TargetClassifier};
use latent_bias::numgrad::Matrix;
use latent_bias::world::FACTOR_NAMES;
use latent_bias::Result;

pub const EXACT: f64 = 1e-12;

pub fn hand_tv_loss(p: &[f64], eps: f64) -> f64 {
    let mut s = 0.0;
    for i in 1..p.len() {
        s += (p[i] - p[i - 1]).abs();
    }
    -(if s > eps { s } else { eps }).ln()
}

pub fn hand_tv(p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..p.len() {
        s += (p[i] - p[i - 1]).abs();
    }
    s / (p.len() - 1) as f64
}

pub fn hand_abs_cos(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab.abs() / (aa.sqrt() * bb.sqrt())
}

pub fn settings(n: usize) -> Vec<ExperimentSetting> {
    let mut out = Vec::new();
    for t in FACTOR_NAMES {
        for b in FACTOR_NAMES {
            if t != b {
                for g in [GeneratorKind::PcaBalanced, GeneratorKind::PcaSkewed] {
                    out.push(ExperimentSetting::new(t, b, g, 0.9, 0));
                }
            }
        }
    }
    out.truncate(n);
    out
}

pub fn table(values: &[Vec<f64>], methods: &[Method]) -> Vec<GridRow> {
    let mut rows = Vec::new();
    for (s, vals) in settings(values.len()).into_iter().zip(values) {
        for (m, v) in methods.iter().zip(vals) {
            rows.push(GridRow {
                setting: s.clone(),
                method: *m,
                metrics: Some(Metrics { cos_bias: 0.5, cos_target: 0.5 - v, delta_cos: *v, tv: 0.0 }),
                error: None,
            });
        }
    }
    rows
}

pub fn hand_leading(values: &[Vec<f64>]) -> Vec<f64> {
    let k = values[0].len();
    let mut wins = vec![0.0; k];
    for row in values {
        for i in 0..k {
            if row.iter().all(|v| row[i] >= *v) {
                wins[i] += 1.0;
            }
        }
    }
    wins.iter().map(|w| 100.0 * w / values.len() as f64).collect()
}

/// Brute-force baseline selection: every TV measured one latent and one image at a time.
pub fn brute_force_baseline<G: Generator, C: TargetClassifier>(
    candidates: &[Hyperplane],
    target: &Hyperplane,
    generator: &G,
    classifier: &C,
    cfg: &EvalConfig,
) -> Result<usize> {
    let cos: Vec<f64> = candidates.iter().map(|c| hand_abs_cos(c.normal(), target.normal())).collect();
    let mut dropped = 0;
    for i in 0..cos.len() {
        if cos[i] > cos[dropped] {
            dropped = i;
        }
    }
    let batch = cfg.batch(target.dim());
    let alphas = cfg.traversal.alphas();
    let mut scores = vec![f64::NEG_INFINITY; candidates.len()];
    for (i, c) in candidates.iter().enumerate() {
        if i == dropped {
            continue;
        }
        let w = c.normal();
        let ww: f64 = w.iter().map(|x| x * x).sum();
        let wn = ww.sqrt();
        let mut total = 0.0;
        for r in 0..batch.rows() {
            let z = batch.row(r);
            let s = (z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + c.offset()) / ww;
            let mut probs = Vec::new();
            for a in alphas {
                let x: Vec<f64> = z.iter().zip(w).map(|(zi, wi)| zi - s * wi + a * wi / wn).collect();
                let img = generator.generate(&Matrix::from_rows(&[x])?)?;
                probs.push(classifier.predict(&img)?[0]);
            }
            total += hand_tv(&probs);
        }
        scores[i] = total / batch.rows() as f64;
    }
    let mut best = usize::MAX;
    for i in 0..scores.len() {
        if i != dropped && (best == usize::MAX || scores[i] > scores[best]) {
            best = i;
        }
    }
    Ok(best)
}

/// `p = 0.5 + a·sin(kπ·z₂) + b·sin(kπ·z₃)`: consecutive default alphas land on alternate
/// peaks, so the traversal along e₂ has TV `2a` and along e₃ TV `2b`.
pub struct Alternating {
    pub a: f64,
    pub b: f64,
}

impl TargetClassifier for Alternating {
    fn input_dim(&self) -> usize {
        3
    }

    fn predict(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        let k = 19.0 / 4.0 * std::f64::consts::PI;
        Ok((0..inputs.rows())
            .map(|r| {
                let z = inputs.row(r);
                0.5 + self.a * (k * z[1]).sin() + self.b * (k * z[2]).sin()
            })
            .collect())
    }
}

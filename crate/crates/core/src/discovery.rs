//! Gradient search for the hyperplane of an unknown biased attribute.
//!
//! For a candidate hyperplane `(w, o)` every latent `z` of a batch is projected onto the
//! plane, stepped along the unit normal by the traversal step sizes, decoded and
//! classified. The variation loss is `−log Σᵢ |pᵢ₊₁ − pᵢ|` of the resulting target
//! probabilities (averaged over the batch); the orthogonalization penalty sums the
//! absolute cosines between `w` and the target / known-attribute normals. The objective
//! `L_V + λ L_⊥` is minimized with Adam using an exact gradient through normalization,
//! projection, generator and classifier.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{ensure, Error, Result};
use crate::hyperplane::{Hyperplane, TraversalConfig, MIN_NORMAL_NORM};
use crate::models::{DifferentiableClassifier, DifferentiableGenerator, Generator, TargetClassifier};
use crate::numgrad::{dot, norm, AdamState, Matrix};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Sum of `|cos⟨w_b, v⟩|`.
    #[default]
    Absolute,
    /// Sum of signed `cos⟨w_b, v⟩`.
    Signed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub traversal: TraversalConfig,
    pub log_clamp: f64,
    pub penalty: PenaltyMode,
    /// Independent initializations; the one with the lowest held-out loss wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            batch_size: 64,
            learning_rate: 1e-3,
            lambda: 10.0,
            traversal: TraversalConfig::default(),
            log_clamp: 1e-12,
            penalty: PenaltyMode::Absolute,
            restarts: 4,
            seed: 0,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.iterations >= 1
            && self.batch_size >= 1
            && self.restarts >= 1
            && self.lambda >= 0.0
            && self.log_clamp > 0.0
            && self.learning_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "discovery config needs iterations, batch_size, restarts >= 1, lambda >= 0, \
                 log_clamp > 0 and a positive learning rate"
                    .into(),
            ))
        }
    }
}

/// Objective components at one iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub total: f64,
    pub variation: f64,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    pub point: LossPoint,
    pub grad_normal: Vec<f64>,
    pub grad_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    /// Unit normal with canonical sign.
    pub hyperplane: Hyperplane,
    pub trace: Vec<LossPoint>,
    /// Held-out objective of the selected restart.
    pub held_out_loss: f64,
    /// Mean TV along the learned normal on the held-out batch.
    pub final_tv: f64,
    pub restart: usize,
    pub config: DiscoveryConfig,
    pub seed: u64,
}

const RESULT_FORMAT: &str = "discovery-result";

#[derive(Serialize, Deserialize)]
struct ResultHeader {
    dim: usize,
    offset: f64,
    held_out_loss: f64,
    final_tv: f64,
    restart: usize,
    seed: u64,
    config: DiscoveryConfig,
    trace: Vec<LossPoint>,
}

impl DiscoveryResult {
    pub fn save(&self, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
        let header = ResultHeader {
            dim: self.hyperplane.dim(),
            offset: self.hyperplane.offset(),
            held_out_loss: self.held_out_loss,
            final_tv: self.final_tv,
            restart: self.restart,
            seed: self.seed,
            config: self.config.clone(),
            trace: self.trace.clone(),
        };
        artifact::save(dir, stem, RESULT_FORMAT, &header, self.hyperplane.normal())
    }

    pub fn load(json_path: &Path) -> Result<Self> {
        let (h, normal): (ResultHeader, Vec<f64>) = artifact::load(json_path, RESULT_FORMAT)?;
        if normal.len() != h.dim {
            return Err(Error::artifact(json_path, "normal length disagrees with header"));
        }
        Ok(Self {
            hyperplane: Hyperplane::new(normal, h.offset)
                .map_err(|e| Error::artifact(json_path, e.to_string()))?,
            trace: h.trace,
            held_out_loss: h.held_out_loss,
            final_tv: h.final_tv,
            restart: h.restart,
            config: h.config,
            seed: h.seed,
        })
    }

    /// Loss trace as CSV with header `iteration,L,L_V,L_perp`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,L,L_V,L_perp\n");
        for (i, p) in self.trace.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", p.total, p.variation, p.penalty);
        }
        out
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    ensure(probs.len() >= 2, || format!("need at least two predictions, got {}", probs.len()))?;
    match probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(Error::Argument(format!("probability {p} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn summed_variation(probs: &[f64]) -> f64 {
    probs.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `−log(max(Σ|pᵢ₊₁ − pᵢ|, ε))`.
pub fn total_variation_loss(probs: &[f64], eps: f64) -> Result<f64> {
    check_probs(probs)?;
    ensure(eps > 0.0, || format!("log clamp must be positive, got {eps}"))?;
    Ok(-summed_variation(probs).max(eps).ln())
}

/// Mean absolute change between consecutive predictions.
pub fn tv_metric(probs: &[f64]) -> Result<f64> {
    check_probs(probs)?;
    Ok(summed_variation(probs) / (probs.len() - 1) as f64)
}

/// Sum of `|cos⟨w_b, v⟩|` over the target normal and the known normals.
pub fn orth_penalty(w_b: &[f64], w_t: &[f64], known: &[Vec<f64>]) -> Result<f64> {
    orth_penalty_with(PenaltyMode::Absolute, w_b, w_t, known)
}

pub fn orth_penalty_with(mode: PenaltyMode, w_b: &[f64], w_t: &[f64], known: &[Vec<f64>]) -> Result<f64> {
    Ok(penalty_and_grad(mode, w_b, w_t, known)?.0)
}

fn penalty_and_grad(mode: PenaltyMode, w: &[f64], w_t: &[f64], known: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let wn = norm(w);
    if !(wn > MIN_NORMAL_NORM) {
        return Err(Error::Degenerate("biased-attribute normal has zero length".into()));
    }
    let mut total = 0.0;
    let mut grad = vec![0.0; w.len()];
    for v in std::iter::once(w_t).chain(known.iter().map(Vec::as_slice)) {
        ensure(v.len() == w.len(), || "penalty normal dimension mismatch".into())?;
        let vn = norm(v);
        if !(vn > MIN_NORMAL_NORM) {
            return Err(Error::Degenerate("target or known normal has zero length".into()));
        }
        let c = dot(w, v) / (wn * vn);
        let sign = match mode {
            PenaltyMode::Absolute => {
                total += c.abs();
                if c > 0.0 {
                    1.0
                } else if c < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            PenaltyMode::Signed => {
                total += c;
                1.0
            }
        };
        for ((g, vi), wi) in grad.iter_mut().zip(v).zip(w) {
            *g += sign * (vi / (wn * vn) - c * wi / (wn * wn));
        }
    }
    Ok((total, grad))
}

/// Objective value and exact gradient for a fixed latent batch (rows of `z_batch`).
#[allow(clippy::too_many_arguments)]
pub fn discovery_loss<G, C>(
    h_b: &Hyperplane,
    z_batch: &Matrix,
    generator: &G,
    classifier: &C,
    w_t: &[f64],
    known: &[Vec<f64>],
    cfg: &DiscoveryConfig,
) -> Result<LossEval>
where
    G: DifferentiableGenerator,
    C: DifferentiableClassifier,
{
    let d = h_b.dim();
    ensure(z_batch.rows() >= 1, || "latent batch is empty".into())?;
    ensure(z_batch.cols() == d && generator.latent_dim() == d && w_t.len() == d, || {
        "latent, hyperplane, generator and target dimensions must agree".into()
    })?;
    let w = h_b.normal();
    let o = h_b.offset();
    let n2 = dot(w, w);
    let wn = n2.sqrt();
    if !(wn > MIN_NORMAL_NORM) {
        return Err(Error::Degenerate("biased-attribute normal has zero length".into()));
    }
    let u: Vec<f64> = w.iter().map(|v| v / wn).collect();
    let alphas = cfg.traversal.alphas();
    let steps = alphas.len();
    let batch = z_batch.rows();

    let mut offsets = Vec::with_capacity(batch);
    let mut starts = Matrix::zeros(batch, d);
    for b in 0..batch {
        let z = z_batch.row(b);
        let s = (dot(w, z) + o) / n2;
        offsets.push(s);
        for (p, (zk, wk)) in starts.row_mut(b).iter_mut().zip(z.iter().zip(w)) {
            *p = zk - s * wk;
        }
    }

    let (images, gen_tape) = generator.generate_traversals(&starts, &u, alphas)?;
    let (probs, cls_tape) = classifier.forward(&images)?;

    let mut variation = 0.0;
    let mut dprobs = vec![0.0; probs.len()];
    for b in 0..batch {
        let p = &probs[b * steps..(b + 1) * steps];
        let total = summed_variation(p);
        variation += -total.max(cfg.log_clamp).ln();
        if total > cfg.log_clamp {
            let scale = -1.0 / (total * batch as f64);
            let g = &mut dprobs[b * steps..(b + 1) * steps];
            for i in 0..steps - 1 {
                let sgn = sign(p[i + 1] - p[i]);
                g[i + 1] += scale * sgn;
                g[i] -= scale * sgn;
            }
        }
    }
    variation /= batch as f64;

    let dimages = classifier.pullback(&cls_tape, &dprobs)?;
    let (dstarts, grad_u) = generator.pullback_traversals(&gen_tape, &dimages, alphas)?;

    let mut grad_w = vec![0.0; d];
    let mut grad_o = 0.0;
    for b in 0..batch {
        let dzp = dstarts.row(b);
        let z = z_batch.row(b);
        let s = offsets[b];
        let ds = -dot(w, dzp);
        let residual = dot(w, z) + o;
        for k in 0..d {
            grad_w[k] += -s * dzp[k] + ds * (z[k] / n2 - 2.0 * residual * w[k] / (n2 * n2));
        }
        grad_o += ds / n2;
    }
    let ug = dot(&u, &grad_u);
    for k in 0..d {
        grad_w[k] += (grad_u[k] - u[k] * ug) / wn;
    }

    let (penalty, grad_p) = penalty_and_grad(cfg.penalty, w, w_t, known)?;
    for k in 0..d {
        grad_w[k] += cfg.lambda * grad_p[k];
    }
    let total = variation + cfg.lambda * penalty;
    Ok(LossEval {
        point: LossPoint { total, variation, penalty },
        grad_normal: grad_w,
        grad_offset: grad_o,
    })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Batch of standard-normal latents from a seeded stream.
pub fn latent_batch(rows: usize, dim: usize, seed: u64, tags: &[u64]) -> Matrix {
    let mut r = rng::rng_from(seed, tags);
    Matrix::from_vec(rows, dim, rng::standard_normal_vec(&mut r, rows * dim)).expect("finite normals")
}

/// Classifier probabilities along the traversal through each latent (one row of `N`
/// probabilities per latent).
pub fn traversal_probabilities<G, C>(
    h: &Hyperplane,
    z_batch: &Matrix,
    generator: &G,
    classifier: &C,
    traversal: &TraversalConfig,
) -> Result<Vec<Vec<f64>>>
where
    G: Generator,
    C: TargetClassifier,
{
    let d = h.dim();
    ensure(z_batch.cols() == d && generator.latent_dim() == d, || {
        "latent, hyperplane and generator dimensions must agree".into()
    })?;
    let steps = traversal.steps();
    let mut latents = Matrix::zeros(z_batch.rows() * steps, d);
    for b in 0..z_batch.rows() {
        let zp = crate::hyperplane::project_to_plane(h, z_batch.row(b))?;
        let path = crate::hyperplane::traversal_latents(&zp, h, traversal.alphas())?;
        for (i, z) in path.iter().enumerate() {
            latents.row_mut(b * steps + i).copy_from_slice(z);
        }
    }
    let probs = classifier.predict(&generator.generate(&latents)?)?;
    Ok(probs.chunks(steps).map(<[f64]>::to_vec).collect())
}

/// Mean [`tv_metric`] over the traversals through a latent batch.
pub fn mean_tv<G, C>(
    h: &Hyperplane,
    z_batch: &Matrix,
    generator: &G,
    classifier: &C,
    traversal: &TraversalConfig,
) -> Result<f64>
where
    G: Generator,
    C: TargetClassifier,
{
    let rows = traversal_probabilities(h, z_batch, generator, classifier, traversal)?;
    let mut sum = 0.0;
    for p in &rows {
        sum += tv_metric(p)?;
    }
    Ok(sum / rows.len() as f64)
}

/// Runs the full optimization and returns the best restart.
pub fn discover<G, C>(
    generator: &G,
    classifier: &C,
    w_t: &[f64],
    known: &[Vec<f64>],
    cfg: &DiscoveryConfig,
) -> Result<DiscoveryResult>
where
    G: DifferentiableGenerator,
    C: DifferentiableClassifier,
{
    cfg.validate()?;
    let d = generator.latent_dim();
    ensure(w_t.len() == d && known.iter().all(|k| k.len() == d), || {
        format!("target/known normals must have the generator's latent dimension {d}")
    })?;
    ensure(classifier.input_dim() == generator.output_dim(), || {
        "classifier input size must match generator output size".into()
    })?;

    let held_out = latent_batch(cfg.batch_size, d, cfg.seed, &[rng::tag("held-out")]);
    let mut best: Option<(f64, usize, Hyperplane, Vec<LossPoint>)> = None;
    for restart in 0..cfg.restarts {
        let mut init = rng::rng_from(cfg.seed, &[rng::tag("init"), restart as u64]);
        let w0 = rng::standard_normal_vec(&mut init, d);
        let n0 = norm(&w0);
        let mut params: Vec<f64> = w0.iter().map(|v| v / n0).collect();
        params.push(0.0);
        let mut adam = AdamState::new(d + 1, cfg.learning_rate);
        let mut trace = Vec::with_capacity(cfg.iterations);

        for it in 0..cfg.iterations {
            let z = latent_batch(cfg.batch_size, d, cfg.seed, &[rng::tag("batch"), restart as u64, it as u64]);
            let h = Hyperplane::new(params[..d].to_vec(), params[d]);
            let eval = h.and_then(|h| discovery_loss(&h, &z, generator, classifier, w_t, known, cfg));
            let eval = match eval {
                Ok(e) if e.point.total.is_finite() => e,
                _ => return Err(Error::DiscoveryDiverged { iteration: it, trace }),
            };
            trace.push(eval.point);
            let mut grad = eval.grad_normal;
            grad.push(eval.grad_offset);
            (params, adam) = match adam.step(params, &grad) {
                Ok(next) => next,
                Err(_) => return Err(Error::DiscoveryDiverged { iteration: it, trace }),
            };
        }

        let h = Hyperplane::new(params[..d].to_vec(), params[d])
            .map_err(|_| Error::DiscoveryDiverged { iteration: cfg.iterations, trace: trace.clone() })?;
        let score = discovery_loss(&h, &held_out, generator, classifier, w_t, known, cfg)?.point.total;
        let better = match &best {
            None => true,
            Some((s, ..)) => score < *s,
        };
        if better {
            best = Some((score, restart, h, trace));
        }
    }

    let (held_out_loss, restart, h, trace) = best.expect("at least one restart");
    let hyperplane = h.canonical();
    let final_tv = mean_tv(&hyperplane, &held_out, generator, classifier, &cfg.traversal)?;
    Ok(DiscoveryResult {
        hyperplane,
        trace,
        held_out_loss,
        final_tv,
        restart,
        config: cfg.clone(),
        seed: cfg.seed,
    })
}

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{ensure, ensure_finite, Error, Result};
use crate::numgrad::Matrix;
use crate::world::LabeledDataset;

/// Maps latent vectors (rows) to images (rows).
pub trait Generator {
    fn latent_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn generate(&self, latents: &Matrix) -> Result<Matrix>;
}

/// A generator that can pull output cotangents back to latent space.
pub trait DifferentiableGenerator: Generator {
    type Tape;
    fn generate_with_tape(&self, latents: &Matrix) -> Result<(Matrix, Self::Tape)>;
    fn pullback(&self, tape: &Self::Tape, cotangent: &Matrix) -> Result<Matrix>;

    /// Images at `starts[b] + alphas[i] · direction`, one row per `(b, i)` with `i`
    /// varying fastest.
    fn generate_traversals(&self, starts: &Matrix, direction: &[f64], alphas: &[f64]) -> Result<(Matrix, Self::Tape)> {
        self.generate_with_tape(&traversal_grid(starts, direction, alphas)?)
    }

    /// Pullback of [`generate_traversals`](Self::generate_traversals): gradients with
    /// respect to the starts and to the direction.
    fn pullback_traversals(&self, tape: &Self::Tape, cotangent: &Matrix, alphas: &[f64]) -> Result<(Matrix, Vec<f64>)> {
        let dlatents = self.pullback(tape, cotangent)?;
        let steps = alphas.len();
        ensure(steps > 0 && dlatents.rows() % steps == 0, || "traversal cotangent shape mismatch".into())?;
        let d = dlatents.cols();
        let mut dstarts = Matrix::zeros(dlatents.rows() / steps, d);
        let mut ddir = vec![0.0; d];
        for r in 0..dlatents.rows() {
            let g = dlatents.row(r);
            let a = alphas[r % steps];
            for (k, (s, v)) in dstarts.row_mut(r / steps).iter_mut().zip(g).enumerate() {
                *s += v;
                ddir[k] += a * v;
            }
        }
        Ok((dstarts, ddir))
    }
}

fn traversal_grid(starts: &Matrix, direction: &[f64], alphas: &[f64]) -> Result<Matrix> {
    ensure(starts.cols() == direction.len(), || "traversal direction dimension mismatch".into())?;
    let steps = alphas.len();
    let mut out = Matrix::zeros(starts.rows() * steps, starts.cols());
    for b in 0..starts.rows() {
        for (i, a) in alphas.iter().enumerate() {
            for ((o, s), v) in out.row_mut(b * steps + i).iter_mut().zip(starts.row(b)).zip(direction) {
                *o = s + a * v;
            }
        }
    }
    Ok(out)
}

fn check_latents(latents: &Matrix, dim: usize) -> Result<()> {
    ensure(latents.cols() == dim, || {
        format!("latent dimension {} does not match generator dimension {dim}", latents.cols())
    })?;
    ensure_finite(latents.as_slice(), "latents")
}

/// `G(z) = z`; the analytic worlds use it so the classifier reads latents directly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IdentityGenerator {
    pub dim: usize,
}

pub const IDENTITY_FORMAT: &str = "identity-generator";

#[derive(Serialize, Deserialize)]
struct IdentityHeader {
    latent_dim: usize,
    meta: ModelMeta,
}

impl IdentityGenerator {
    pub fn save(&self, dir: &Path, stem: &str, meta: &ModelMeta) -> Result<[PathBuf; 2]> {
        let header = IdentityHeader {
            latent_dim: self.dim,
            meta: meta.clone(),
        };
        artifact::save(dir, stem, IDENTITY_FORMAT, &header, &[])
    }

    pub fn load(json_path: &Path) -> Result<(Self, ModelMeta)> {
        let (h, _): (IdentityHeader, Vec<f64>) = artifact::load(json_path, IDENTITY_FORMAT)?;
        if h.latent_dim == 0 {
            return Err(Error::artifact(json_path, "identity generator needs a positive dimension"));
        }
        Ok((Self { dim: h.latent_dim }, h.meta))
    }
}

impl Generator for IdentityGenerator {
    fn latent_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn generate(&self, latents: &Matrix) -> Result<Matrix> {
        check_latents(latents, self.dim)?;
        Ok(latents.clone())
    }
}

impl DifferentiableGenerator for IdentityGenerator {
    type Tape = ();

    fn generate_with_tape(&self, latents: &Matrix) -> Result<(Matrix, ())> {
        Ok((self.generate(latents)?, ()))
    }

    fn pullback(&self, _: &(), cotangent: &Matrix) -> Result<Matrix> {
        Ok(cotangent.clone())
    }
}

/// Linear decoder `clamp(A z + b, 0, 1)` with orthonormal PCA columns in `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDecoder {
    pub side: usize,
    /// P×d, orthonormal columns ordered by decreasing variance.
    pub mixing: Matrix,
    /// Mean image `b`.
    pub mean: Vec<f64>,
    /// Fraction of total pixel variance captured by each column.
    pub explained_variance: Vec<f64>,
}

/// Per-pixel flags: `true` where the clamp passed the value through.
pub struct ClampTape {
    pass: Vec<bool>,
}

impl LinearDecoder {
    /// Builds a decoder from raw parts, checking shapes and orthonormality.
    pub fn new(side: usize, mixing: Matrix, mean: Vec<f64>, explained_variance: Vec<f64>) -> Result<Self> {
        ensure(mixing.rows() == side * side && mean.len() == mixing.rows(), || {
            "decoder shapes disagree with the image side".to_string()
        })?;
        ensure(explained_variance.len() == mixing.cols(), || {
            "explained variance length must equal latent dimension".to_string()
        })?;
        let gram = mixing.t_matmul(&mixing)?;
        let dev = gram.sub(&Matrix::identity(mixing.cols()))?.max_abs();
        ensure(dev < 1e-8, || format!("decoder columns are not orthonormal (deviation {dev:e})"))?;
        Ok(Self { side, mixing, mean, explained_variance })
    }

    pub fn latent_dim(&self) -> usize {
        self.mixing.cols()
    }

    /// `Aᵀ (x − b)` for each image row.
    pub fn encode(&self, images: &Matrix) -> Result<Matrix> {
        ensure(images.cols() == self.mixing.rows(), || {
            format!("image has {} pixels, decoder expects {}", images.cols(), self.mixing.rows())
        })?;
        let mut centered = images.clone();
        for i in 0..centered.rows() {
            for (x, m) in centered.row_mut(i).iter_mut().zip(&self.mean) {
                *x -= m;
            }
        }
        centered.matmul(&self.mixing)
    }

    /// `A z + b` without the clamp.
    pub fn decode_unclamped(&self, latents: &Matrix) -> Result<Matrix> {
        check_latents(latents, self.latent_dim())?;
        let mut out = latents.matmul_t(&self.mixing)?;
        for i in 0..out.rows() {
            for (x, m) in out.row_mut(i).iter_mut().zip(&self.mean) {
                *x += m;
            }
        }
        Ok(out)
    }

    /// Decodes a single latent vector.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, z.len(), z.to_vec())?;
        Ok(self.generate(&m)?.into_vec())
    }

    pub fn save(&self, dir: &Path, stem: &str, meta: &ModelMeta) -> Result<[PathBuf; 2]> {
        let header = DecoderHeader {
            side: self.side,
            pixel_count: self.mixing.rows(),
            latent_dim: self.latent_dim(),
            explained_variance: self.explained_variance.clone(),
            meta: meta.clone(),
        };
        let mut blob = self.mixing.as_slice().to_vec();
        blob.extend_from_slice(&self.mean);
        artifact::save(dir, stem, DECODER_FORMAT, &header, &blob)
    }

    pub fn load(json_path: &Path) -> Result<(Self, ModelMeta)> {
        let (h, mut blob): (DecoderHeader, Vec<f64>) = artifact::load(json_path, DECODER_FORMAT)?;
        let p = h.pixel_count;
        if blob.len() != p * h.latent_dim + p || p != h.side * h.side {
            return Err(Error::artifact(json_path, "decoder blob size disagrees with header"));
        }
        let mean = blob.split_off(p * h.latent_dim);
        let mixing = Matrix::from_vec(p, h.latent_dim, blob)
            .map_err(|e| Error::artifact(json_path, e.to_string()))?;
        let dec = Self::new(h.side, mixing, mean, h.explained_variance)
            .map_err(|e| Error::artifact(json_path, e.to_string()))?;
        Ok((dec, h.meta))
    }
}

pub const DECODER_FORMAT: &str = "linear-decoder";

/// Provenance stored alongside a fitted model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub attribute: Option<String>,
    pub seed: u64,
    pub config: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct DecoderHeader {
    side: usize,
    pixel_count: usize,
    latent_dim: usize,
    explained_variance: Vec<f64>,
    meta: ModelMeta,
}

impl Generator for LinearDecoder {
    fn latent_dim(&self) -> usize {
        self.mixing.cols()
    }

    fn output_dim(&self) -> usize {
        self.mixing.rows()
    }

    fn generate(&self, latents: &Matrix) -> Result<Matrix> {
        Ok(self.generate_with_tape(latents)?.0)
    }
}

impl DifferentiableGenerator for LinearDecoder {
    type Tape = ClampTape;

    fn generate_with_tape(&self, latents: &Matrix) -> Result<(Matrix, ClampTape)> {
        check_latents(latents, self.latent_dim())?;
        let mut out = latents.matmul_t(&self.mixing)?;
        let mut pass = Vec::with_capacity(out.as_slice().len());
        for i in 0..out.rows() {
            for (x, m) in out.row_mut(i).iter_mut().zip(&self.mean) {
                let v = *x + m;
                pass.push((0.0..=1.0).contains(&v));
                *x = v.clamp(0.0, 1.0);
            }
        }
        Ok((out, ClampTape { pass }))
    }

    fn generate_traversals(&self, starts: &Matrix, direction: &[f64], alphas: &[f64]) -> Result<(Matrix, ClampTape)> {
        check_latents(starts, self.latent_dim())?;
        ensure(direction.len() == self.latent_dim(), || "traversal direction dimension mismatch".into())?;
        ensure_finite(direction, "traversal direction")?;
        let base = starts.matmul_t(&self.mixing)?;
        let step = self.mixing.matvec(direction)?;
        let p = self.mixing.rows();
        let mut out = Matrix::zeros(starts.rows() * alphas.len(), p);
        let mut pass = vec![false; out.as_slice().len()];
        let mut shifted = vec![0.0; p];
        for b in 0..starts.rows() {
            for ((s, r), m) in shifted.iter_mut().zip(base.row(b)).zip(&self.mean) {
                *s = r + m;
            }
            for (i, a) in alphas.iter().enumerate() {
                let r = b * alphas.len() + i;
                let img = out.row_mut(r);
                let gate = &mut pass[r * p..(r + 1) * p];
                for k in 0..p {
                    let v = shifted[k] + a * step[k];
                    gate[k] = (v >= 0.0) & (v <= 1.0);
                    img[k] = v.max(0.0).min(1.0);
                }
            }
        }
        Ok((out, ClampTape { pass }))
    }

    fn pullback_traversals(&self, tape: &ClampTape, cotangent: &Matrix, alphas: &[f64]) -> Result<(Matrix, Vec<f64>)> {
        let p = self.mixing.rows();
        let steps = alphas.len();
        ensure(cotangent.cols() == p && cotangent.as_slice().len() == tape.pass.len(), || {
            "decoder cotangent shape mismatch".to_string()
        })?;
        ensure(steps > 0 && cotangent.rows() % steps == 0, || "traversal cotangent shape mismatch".into())?;
        let mut summed = Matrix::zeros(cotangent.rows() / steps, p);
        let mut weighted = vec![0.0; p];
        for r in 0..cotangent.rows() {
            let a = alphas[r % steps];
            let gate = &tape.pass[r * p..(r + 1) * p];
            let acc = summed.row_mut(r / steps);
            for (k, g) in cotangent.row(r).iter().enumerate() {
                if gate[k] {
                    acc[k] += g;
                    weighted[k] += a * g;
                }
            }
        }
        let dstarts = summed.matmul(&self.mixing)?;
        let ddir = self.mixing.transpose().matvec(&weighted)?;
        Ok((dstarts, ddir))
    }

    fn pullback(&self, tape: &ClampTape, cotangent: &Matrix) -> Result<Matrix> {
        ensure(cotangent.cols() == self.mixing.rows() && cotangent.as_slice().len() == tape.pass.len(), || {
            "decoder cotangent shape mismatch".to_string()
        })?;
        let mut gated = cotangent.clone();
        for (g, &p) in gated.as_mut_slice().iter_mut().zip(&tape.pass) {
            if !p {
                *g = 0.0;
            }
        }
        gated.matmul(&self.mixing)
    }
}

/// Fits a `d`-dimensional PCA decoder to the dataset images.
///
/// Columns are the top-`d` eigenvectors of the pixel covariance, sign-normalized so the
/// entry of largest magnitude is positive.
pub fn fit_pca_decoder(dataset: &LabeledDataset, d: usize) -> Result<LinearDecoder> {
    let n = dataset.len();
    let p = dataset.pixel_count();
    ensure(d >= 2, || format!("latent dimension must be at least 2, got {d}"))?;
    ensure(n >= d, || format!("dataset of {n} images cannot support {d} components"))?;
    ensure(d <= p, || format!("latent dimension {d} exceeds pixel count {p}"))?;

    let images = &dataset.images;
    let mut mean = vec![0.0; p];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(images.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centered = images.clone();
    for i in 0..n {
        for (x, m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    let cov = centered.t_matmul(&centered)?.scale(1.0 / n as f64);
    let trace: f64 = (0..p).map(|i| cov.get(i, i)).sum();

    let eig = SymmetricEigen::new(DMatrix::from_row_slice(p, p, cov.as_slice()));
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]];
    let last = eig.eigenvalues[order[d - 1]];
    if !(top > 0.0) || !(last > 1e-10 * top) {
        return Err(Error::RankDeficient { column: if top > 0.0 { d - 1 } else { 0 } });
    }

    let mut mixing = Matrix::zeros(p, d);
    for (k, &idx) in order.iter().take(d).enumerate() {
        let col = eig.eigenvectors.column(idx);
        let pivot = col.iter().fold(0.0_f64, |best, &v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            mixing.set(i, k, sign * col[i]);
        }
    }
    let explained = order.iter().take(d).map(|&i| eig.eigenvalues[i] / trace).collect();
    LinearDecoder::new(dataset.side, mixing, mean, explained)
}

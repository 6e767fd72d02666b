//! Attribute hyperplanes in latent space.
//!
//! A hyperplane `wᵀx + o = 0` stands for one attribute: its unit normal is the direction
//! along which the attribute changes. This module projects latents onto planes, builds
//! traversals along normals, compares normals by absolute cosine, and fits an orthonormal
//! set of ground-truth hyperplanes jointly through a differentiable QR factorization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{ensure, ensure_finite, Error, Result};
use crate::numgrad::{dot, norm, qr_backward, qr_thin, sigmoid, softplus, AdamState, Matrix};
use crate::rng;

/// Normals shorter than this are treated as degenerate.
pub const MIN_NORMAL_NORM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        ensure_finite(&normal, "hyperplane normal")?;
        ensure(offset.is_finite(), || "hyperplane offset is not finite".into())?;
        if !(norm(&normal) > MIN_NORMAL_NORM) {
            return Err(Error::Degenerate("hyperplane normal has (near) zero length".into()));
        }
        Ok(Self { normal, offset })
    }

    /// Axis-aligned plane through the origin along coordinate `axis`.
    pub fn axis(dim: usize, axis: usize) -> Result<Self> {
        ensure(axis < dim, || format!("axis {axis} out of range for dimension {dim}"))?;
        let mut n = vec![0.0; dim];
        n[axis] = 1.0;
        Self::new(n, 0.0)
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn unit_normal(&self) -> Vec<f64> {
        let n = norm(&self.normal);
        self.normal.iter().map(|v| v / n).collect()
    }

    /// Signed distance `(wᵀz + o) / ‖w‖`.
    pub fn signed_distance(&self, z: &[f64]) -> f64 {
        (dot(&self.normal, z) + self.offset) / norm(&self.normal)
    }

    /// Unit normal with its first nonzero coordinate positive; the offset is rescaled to
    /// describe the same boundary.
    pub fn canonical(&self) -> Hyperplane {
        let n = norm(&self.normal);
        let first = self.normal.iter().find(|v| **v != 0.0).copied().unwrap_or(1.0);
        let s = if first < 0.0 { -1.0 / n } else { 1.0 / n };
        Hyperplane {
            normal: self.normal.iter().map(|v| v * s).collect(),
            offset: self.offset * s,
        }
    }

    /// `(c·w, c·o)`, the same boundary for any `c ≠ 0`.
    pub fn scaled(&self, c: f64) -> Result<Hyperplane> {
        Hyperplane::new(self.normal.iter().map(|v| v * c).collect(), self.offset * c)
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
        let header = PlaneHeader { dim: self.dim(), offset: self.offset };
        artifact::save(dir, stem, PLANE_FORMAT, &header, &self.normal)
    }

    pub fn load(json_path: &Path) -> Result<Self> {
        let (h, normal): (PlaneHeader, Vec<f64>) = artifact::load(json_path, PLANE_FORMAT)?;
        if normal.len() != h.dim {
            return Err(Error::artifact(json_path, "normal length disagrees with header"));
        }
        Self::new(normal, h.offset).map_err(|e| Error::artifact(json_path, e.to_string()))
    }
}

const PLANE_FORMAT: &str = "hyperplane";
pub const BASIS_FORMAT: &str = "hyperplane-basis";
pub const JOINT_FORMAT: &str = "joint-hyperplane-fit";

#[derive(Serialize, Deserialize)]
struct PlaneHeader {
    dim: usize,
    offset: f64,
}

/// Orthonormal normals (columns of `q`) with per-attribute offsets and names.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperplaneBasis {
    q: Matrix,
    offsets: Vec<f64>,
    names: Vec<String>,
}

impl HyperplaneBasis {
    pub fn new(q: Matrix, offsets: Vec<f64>, names: Vec<String>) -> Result<Self> {
        ensure(offsets.len() == q.cols() && names.len() == q.cols(), || {
            "basis offsets/names must have one entry per column".into()
        })?;
        let dev = q.t_matmul(&q)?.sub(&Matrix::identity(q.cols()))?.max_abs();
        ensure(dev < 1e-8, || format!("basis columns are not orthonormal (deviation {dev:e})"))?;
        Ok(Self { q, offsets, names })
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Argument(format!("attribute `{name}` is not in the basis")))
    }

    pub fn hyperplane(&self, j: usize) -> Result<Hyperplane> {
        ensure(j < self.len(), || format!("basis column {j} out of range"))?;
        Hyperplane::new(self.q.column(j), self.offsets[j])
    }

    pub fn hyperplane_named(&self, name: &str) -> Result<Hyperplane> {
        self.hyperplane(self.index_of(name)?)
    }

    pub fn normals(&self) -> Vec<Vec<f64>> {
        self.q.columns()
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
        let header = BasisHeader {
            dim: self.dim(),
            names: self.names.clone(),
            offsets: self.offsets.clone(),
        };
        artifact::save(dir, stem, BASIS_FORMAT, &header, self.q.as_slice())
    }

    pub fn load(json_path: &Path) -> Result<Self> {
        let (h, blob): (BasisHeader, Vec<f64>) = artifact::load(json_path, BASIS_FORMAT)?;
        let q = Matrix::from_vec(h.dim, h.names.len(), blob)
            .map_err(|e| Error::artifact(json_path, e.to_string()))?;
        Self::new(q, h.offsets, h.names).map_err(|e| Error::artifact(json_path, e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct BasisHeader {
    dim: usize,
    names: Vec<String>,
    offsets: Vec<f64>,
}

/// Traversal step sizes `α₁ < … < α_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TraversalConfig {
    alphas: Vec<f64>,
}

impl TraversalConfig {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        ensure(alphas.len() >= 2, || "a traversal needs at least two steps".into())?;
        check_increasing(&alphas)?;
        Ok(Self { alphas })
    }

    /// `n` values evenly spaced over `[lo, hi]`, endpoints included.
    pub fn evenly_spaced(n: usize, lo: f64, hi: f64) -> Result<Self> {
        ensure(n >= 2, || "a traversal needs at least two steps".into())?;
        let step = (hi - lo) / (n - 1) as f64;
        let mut alphas: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        alphas[n - 1] = hi;
        Self::new(alphas)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn steps(&self) -> usize {
        self.alphas.len()
    }
}

impl Default for TraversalConfig {
    fn default() -> Self {
        Self::evenly_spaced(20, -2.0, 2.0).expect("valid default traversal")
    }
}

impl TryFrom<Vec<f64>> for TraversalConfig {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v).map_err(|e| Error::Config(e.to_string()))
    }
}

impl From<TraversalConfig> for Vec<f64> {
    fn from(t: TraversalConfig) -> Self {
        t.alphas
    }
}

fn check_increasing(alphas: &[f64]) -> Result<()> {
    ensure_finite(alphas, "traversal alphas")?;
    if alphas.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(Error::Config("traversal alphas must be strictly increasing".into()))
    }
}

/// `z − ((wᵀz + o) / ‖w‖²) w`.
pub fn project_to_plane(h: &Hyperplane, z: &[f64]) -> Result<Vec<f64>> {
    ensure(z.len() == h.dim(), || {
        format!("latent has dimension {}, hyperplane {}", z.len(), h.dim())
    })?;
    let w = h.normal();
    let n2 = dot(w, w);
    if !(n2.sqrt() > MIN_NORMAL_NORM) {
        return Err(Error::Degenerate("hyperplane normal has (near) zero length".into()));
    }
    let s = (dot(w, z) + h.offset()) / n2;
    Ok(z.iter().zip(w).map(|(zi, wi)| zi - s * wi).collect())
}

/// `z + αᵢ ŵ` for each step size, starting from a point on the plane.
pub fn traversal_latents(z_on_plane: &[f64], h: &Hyperplane, alphas: &[f64]) -> Result<Vec<Vec<f64>>> {
    ensure(z_on_plane.len() == h.dim(), || {
        format!("latent has dimension {}, hyperplane {}", z_on_plane.len(), h.dim())
    })?;
    check_increasing(alphas)?;
    let dist = h.signed_distance(z_on_plane);
    ensure(dist.abs() <= 1e-8 * (1.0 + norm(z_on_plane)), || {
        format!("traversal start is not on the hyperplane (distance {dist:e})")
    })?;
    let u = h.unit_normal();
    Ok(alphas
        .iter()
        .map(|a| z_on_plane.iter().zip(&u).map(|(z, ui)| z + a * ui).collect())
        .collect())
}

/// `|w1·w2| / (‖w1‖‖w2‖)`.
pub fn abs_cos(w1: &[f64], w2: &[f64]) -> Result<f64> {
    ensure(w1.len() == w2.len(), || "abs_cos dimension mismatch".into())?;
    let (n1, n2) = (norm(w1), norm(w2));
    if !(n1 > MIN_NORMAL_NORM && n2 > MIN_NORMAL_NORM) {
        return Err(Error::Degenerate("abs_cos of a zero vector".into()));
    }
    Ok((dot(w1, w2).abs() / (n1 * n2)).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointFitConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for JointFitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            iterations: 2000,
            seed: 0,
        }
    }
}

/// Result of [`fit_joint_hyperplanes`].
#[derive(Clone, Debug, PartialEq)]
pub struct JointFit {
    pub basis: HyperplaneBasis,
    /// Unorthogonalized weights `W` at the final iterate (d×J).
    pub weights: Matrix,
    pub accuracy: Vec<f64>,
    pub final_loss: f64,
}

impl JointFit {
    /// Basis for the attributes other than `exclude`, re-orthogonalized from `W`.
    pub fn known_basis_excluding(&self, exclude: usize) -> Result<HyperplaneBasis> {
        known_basis_excluding(&self.weights, self.basis.offsets(), self.basis.names(), exclude)
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
        let header = JointHeader {
            dim: self.basis.dim(),
            names: self.basis.names.clone(),
            offsets: self.basis.offsets.clone(),
            accuracy: self.accuracy.clone(),
            final_loss: self.final_loss,
            loss_reduction: "mean over attributes of mean cross-entropy".into(),
        };
        let mut blob = self.basis.q.as_slice().to_vec();
        blob.extend_from_slice(self.weights.as_slice());
        artifact::save(dir, stem, JOINT_FORMAT, &header, &blob)
    }

    pub fn load(json_path: &Path) -> Result<Self> {
        let (h, mut blob): (JointHeader, Vec<f64>) = artifact::load(json_path, JOINT_FORMAT)?;
        let size = h.dim * h.names.len();
        if blob.len() != 2 * size {
            return Err(Error::artifact(json_path, "blob size disagrees with header"));
        }
        let w = blob.split_off(size);
        let bad = |e: Error| Error::artifact(json_path, e.to_string());
        let q = Matrix::from_vec(h.dim, h.names.len(), blob).map_err(bad)?;
        let weights = Matrix::from_vec(h.dim, h.names.len(), w).map_err(bad)?;
        Ok(Self {
            basis: HyperplaneBasis::new(q, h.offsets, h.names).map_err(bad)?,
            weights,
            accuracy: h.accuracy,
            final_loss: h.final_loss,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct JointHeader {
    dim: usize,
    names: Vec<String>,
    offsets: Vec<f64>,
    accuracy: Vec<f64>,
    final_loss: f64,
    loss_reduction: String,
}

/// Loss of the joint fit and its gradients with respect to `W` and `o`.
///
/// Logits are `Z Q + o` with `Q = qr(W)`; the loss averages the per-attribute mean
/// cross-entropies.
pub fn joint_loss_and_grad(
    w: &Matrix,
    offsets: &[f64],
    latents: &Matrix,
    labels: &[Vec<u8>],
) -> Result<(f64, Matrix, Vec<f64>)> {
    let (q, r) = qr_thin(w)?;
    let (n, j) = (latents.rows(), w.cols());
    let logits = latents.matmul(&q)?;
    let scale = 1.0 / (n * j) as f64;
    let mut loss = 0.0;
    let mut dlogits = Matrix::zeros(n, j);
    for i in 0..n {
        for k in 0..j {
            let l = logits.get(i, k) + offsets[k];
            let y = labels[k][i] as f64;
            loss += softplus(l) - y * l;
            dlogits.set(i, k, (sigmoid(l) - y) * scale);
        }
    }
    let dq = latents.t_matmul(&dlogits)?;
    let doff = (0..j).map(|k| (0..n).map(|i| dlogits.get(i, k)).sum()).collect();
    let dw = qr_backward(w, &q, &r, &dq)?;
    Ok((loss * scale, dw, doff))
}

/// Jointly fits one hyperplane per attribute with orthonormal normals `Q = qr(W)`.
///
/// `labels[j][i]` is the binary label of attribute `j` for latent row `i`.
pub fn fit_joint_hyperplanes(
    latents: &Matrix,
    labels: &[Vec<u8>],
    names: &[String],
    config: &JointFitConfig,
) -> Result<JointFit> {
    let (n, d) = latents.shape();
    let j = labels.len();
    ensure(j >= 1 && names.len() == j, || "need one name per label column".into())?;
    ensure(d >= j, || format!("cannot fit {j} orthonormal normals in dimension {d}"))?;
    ensure(n >= 2 * j, || format!("need at least {} samples, got {n}", 2 * j))?;
    ensure_finite(latents.as_slice(), "latents")?;
    for (col, name) in labels.iter().zip(names) {
        ensure(col.len() == n, || format!("label column `{name}` has the wrong length"))?;
        let pos = col.iter().filter(|&&y| y == 1).count();
        if pos == 0 || pos == n {
            return Err(Error::DegenerateLabels(format!("attribute `{name}` has a single class")));
        }
    }

    let mut init = rng::rng_from(config.seed, &[rng::tag("joint-fit-init")]);
    let w0 = rng::standard_normal_vec(&mut init, d * j);
    let fit = fit_from(w0.clone(), latents, labels, names, config)?;
    if d > j {
        return Ok(fit);
    }
    // With d == J the orientation of Q = qr(W) is sign(det W), which gradient steps
    // cannot change without passing through a singular W. Try the other orientation too.
    let mut flipped = w0;
    for r in 0..d {
        flipped[r * j + j - 1] = -flipped[r * j + j - 1];
    }
    let other = fit_from(flipped, latents, labels, names, config)?;
    Ok(if other.final_loss < fit.final_loss { other } else { fit })
}

fn fit_from(
    w0: Vec<f64>,
    latents: &Matrix,
    labels: &[Vec<u8>],
    names: &[String],
    config: &JointFitConfig,
) -> Result<JointFit> {
    let d = latents.cols();
    let j = labels.len();
    let mut params = w0;
    params.extend(std::iter::repeat(0.0).take(j));
    let mut adam = AdamState::new(params.len(), config.learning_rate);

    let unpack = |p: &[f64]| -> Result<(Matrix, Vec<f64>)> {
        Ok((Matrix::from_vec(d, j, p[..d * j].to_vec())?, p[d * j..].to_vec()))
    };
    let collapse = |e: Error, iteration: usize| match e {
        Error::RankDeficient { column } | Error::IllConditioned { index: column, .. } => {
            Error::RankCollapse { iteration, column }
        }
        other => other,
    };

    for it in 0..config.iterations {
        let (w, o) = unpack(&params)?;
        let (_, dw, doff) = joint_loss_and_grad(&w, &o, latents, labels).map_err(|e| collapse(e, it))?;
        let mut grad = dw.into_vec();
        grad.extend(doff);
        (params, adam) = adam.step(params, &grad)?;
    }

    let (w, o) = unpack(&params)?;
    let (final_loss, _, _) =
        joint_loss_and_grad(&w, &o, latents, labels).map_err(|e| collapse(e, config.iterations))?;
    let (q, _) = qr_thin(&w).map_err(|e| collapse(e, config.iterations))?;
    let logits = latents.matmul(&q)?;
    let n = latents.rows();
    let accuracy = (0..j)
        .map(|k| {
            let hits = (0..n)
                .filter(|&i| ((logits.get(i, k) + o[k]) >= 0.0) == (labels[k][i] == 1))
                .count();
            hits as f64 / n as f64
        })
        .collect();
    Ok(JointFit {
        basis: HyperplaneBasis::new(q, o, names.to_vec())?,
        weights: w,
        accuracy,
        final_loss,
    })
}

/// Drops column `exclude` from `W`, re-orthogonalizes the rest and carries their offsets.
pub fn known_basis_excluding(
    w: &Matrix,
    offsets: &[f64],
    names: &[String],
    exclude: usize,
) -> Result<HyperplaneBasis> {
    let j = w.cols();
    ensure(j >= 2, || "need at least two attributes to exclude one".into())?;
    ensure(exclude < j, || format!("column {exclude} out of range for {j} attributes"))?;
    ensure(offsets.len() == j && names.len() == j, || "offsets/names length mismatch".into())?;
    let (q, _) = qr_thin(&w.remove_column(exclude)?)?;
    HyperplaneBasis::new(q, without(offsets, exclude), without(names, exclude))
}

fn without<T: Clone>(v: &[T], exclude: usize) -> Vec<T> {
    v.iter().enumerate().filter(|(i, _)| *i != exclude).map(|(_, x)| x.clone()).collect()
}

use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::numgrad::Matrix;
use crate::rng::{self, Rng};

use super::attributes::{
    binarize_attribute, factor_index, sprite_attributes, AttributeKind, AttributeSpec,
    FACTOR_NAMES,
};
use super::render::{render_scene, SceneParams, Shape};

/// Draws a `(target, biased)` pair of binary classes with planted skew `s`.
///
/// The target is uniform; then `P(b=0|t=1) = s` and `P(b=1|t=0) = s`.
pub fn sample_skewed_pair(s: f64, rng: &mut Rng) -> Result<(u8, u8)> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Config(format!("skewness must lie in [0, 1], got {s}")));
    }
    let t = rng.gen_bool(0.5) as u8;
    let u: f64 = rng.gen();
    let b = match (t, u < s) {
        (1, true) => 0,
        (1, false) => 1,
        (_, true) => 1,
        (_, false) => 0,
    };
    Ok((t, b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub target: String,
    pub biased: String,
    pub skewness: f64,
    pub n: usize,
    #[serde(default = "default_side")]
    pub side: usize,
    pub seed: u64,
}

fn default_side() -> usize {
    32
}

/// Rendered images plus their factor labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub side: usize,
    /// One flattened image per row.
    pub images: Matrix,
    pub labels: Vec<[f64; 5]>,
    pub attributes: Vec<AttributeSpec>,
    pub config: DatasetConfig,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.side * self.side
    }

    pub fn attribute(&self, name: &str) -> Result<&AttributeSpec> {
        Ok(&self.attributes[factor_index(name)?])
    }

    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let j = factor_index(name)?;
        Ok(self.labels.iter().map(|l| l[j]).collect())
    }

    pub fn binarized(&self, name: &str) -> Result<Vec<u8>> {
        binarize_attribute(self.attribute(name)?, &self.values(name)?)
    }

    /// Binarized labels of every factor, one column per attribute.
    pub fn binarized_all(&self) -> Result<Vec<Vec<u8>>> {
        FACTOR_NAMES.iter().map(|n| self.binarized(n)).collect()
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
        let header = DatasetHeader {
            side: self.side,
            n: self.len(),
            factor_names: FACTOR_NAMES.iter().map(|s| s.to_string()).collect(),
            attributes: self.attributes.clone(),
            labels: self.labels.clone(),
            config: self.config.clone(),
        };
        artifact::save(dir, stem, DATASET_FORMAT, &header, self.images.as_slice())
    }

    pub fn load(json_path: &Path) -> Result<Self> {
        let (h, pixels): (DatasetHeader, Vec<f64>) = artifact::load(json_path, DATASET_FORMAT)?;
        if h.labels.len() != h.n || pixels.len() != h.n * h.side * h.side {
            return Err(Error::artifact(json_path, "image and label counts disagree"));
        }
        let images = Matrix::from_vec(h.n, h.side * h.side, pixels)
            .map_err(|e| Error::artifact(json_path, e.to_string()))?;
        Ok(Self {
            side: h.side,
            images,
            labels: h.labels,
            attributes: h.attributes,
            config: h.config,
        })
    }
}

const DATASET_FORMAT: &str = "labeled-dataset";

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    side: usize,
    n: usize,
    factor_names: Vec<String>,
    attributes: Vec<AttributeSpec>,
    labels: Vec<[f64; 5]>,
    config: DatasetConfig,
}

fn draw_value(spec: &AttributeSpec, class: Option<u8>, rng: &mut Rng) -> f64 {
    match (&spec.kind, class) {
        (AttributeKind::Binary, Some(c)) => c as f64,
        (AttributeKind::Binary, None) => rng.gen_bool(0.5) as u8 as f64,
        (AttributeKind::Continuous { lo, hi }, class) => {
            let mid = 0.5 * (lo + hi);
            let (a, b) = match class {
                Some(1) => (*lo, mid),
                Some(_) => (mid, *hi),
                None => (*lo, *hi),
            };
            a + rng.gen::<f64>() * (b - a)
        }
        (AttributeKind::Categorical { values, .. }, class) => {
            let positive = spec.positive_indices();
            let pool: Vec<usize> = match class {
                Some(1) => positive,
                Some(_) => (0..values.len()).filter(|i| !positive.contains(i)).collect(),
                None => (0..values.len()).collect(),
            };
            pool[rng.gen_range(0..pool.len())] as f64
        }
    }
}

fn scene_from_label(label: &[f64; 5]) -> SceneParams {
    SceneParams {
        shape: Shape::from_index(label[0] as usize).expect("valid shape index"),
        scale: label[1],
        pos_x: label[2],
        pos_y: label[3],
        orientation: label[4],
    }
}

/// Samples `n` sprites whose target/biased classes follow the skewed conditional table.
///
/// Continuous factors are split at the midpoint of their range (the population median of
/// the uniform draw); every sample uses its own stream derived from `(seed, index)`.
pub fn build_dataset(config: &DatasetConfig) -> Result<LabeledDataset> {
    let ti = factor_index(&config.target)?;
    let bi = factor_index(&config.biased)?;
    if ti == bi {
        return Err(Error::Config(format!(
            "target and biased attribute must differ (both `{}`)",
            config.target
        )));
    }
    if config.n == 0 {
        return Err(Error::Config("dataset size n must be at least 1".into()));
    }
    if config.side < super::render::MIN_SIDE {
        return Err(Error::Config(format!(
            "image side must be at least {}, got {}",
            super::render::MIN_SIDE,
            config.side
        )));
    }
    let attributes = sprite_attributes();
    let pixels = config.side * config.side;
    let mut data = Vec::with_capacity(config.n * pixels);
    let mut labels = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let mut rng = rng::rng_from(config.seed, &[rng::tag("sample"), i as u64]);
        let (t, b) = sample_skewed_pair(config.skewness, &mut rng)?;
        let mut label = [0.0; 5];
        for (j, spec) in attributes.iter().enumerate() {
            let class = if j == ti {
                Some(t)
            } else if j == bi {
                Some(b)
            } else {
                None
            };
            label[j] = draw_value(spec, class, &mut rng);
        }
        let image = render_scene(&scene_from_label(&label), config.side)?;
        data.extend_from_slice(&image.pixels);
        labels.push(label);
    }
    Ok(LabeledDataset {
        side: config.side,
        images: Matrix::from_vec(config.n, pixels, data)?,
        labels,
        attributes,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, s: f64) -> DatasetConfig {
        DatasetConfig {
            target: "shape".into(),
            biased: "scale".into(),
            skewness: s,
            n,
            side: 16,
            seed: 11,
        }
    }

    #[test]
    fn size_contract() {
        assert!(matches!(build_dataset(&cfg(0, 0.9)), Err(Error::Config(_))));
        let d = build_dataset(&cfg(1, 0.9)).unwrap();
        assert_eq!((d.images.rows(), d.labels.len()), (1, 1));
    }

    #[test]
    fn rejects_bad_attribute_names() {
        let mut c = cfg(4, 0.5);
        c.biased = "color".into();
        assert!(matches!(build_dataset(&c), Err(Error::Config(_))));
        c.biased = "shape".into();
        assert!(build_dataset(&c).is_err());
    }

    #[test]
    fn skewness_bounds_checked() {
        let mut r = rng::rng_from(0, &[]);
        assert!(sample_skewed_pair(1.01, &mut r).is_err());
        assert!(sample_skewed_pair(-0.1, &mut r).is_err());
    }

    #[test]
    fn full_skew_is_deterministic_anticorrelation() {
        let mut r = rng::rng_from(5, &[]);
        for _ in 0..1000 {
            let (t, b) = sample_skewed_pair(1.0, &mut r).unwrap();
            assert_eq!(b, 1 - t);
        }
    }

    #[test]
    fn labels_respect_specs_and_pixels_in_range() {
        let d = build_dataset(&cfg(50, 0.7)).unwrap();
        for l in &d.labels {
            for (spec, v) in d.attributes.iter().zip(l) {
                assert!(spec.accepts(*v));
            }
        }
        assert!(d.images.as_slice().iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

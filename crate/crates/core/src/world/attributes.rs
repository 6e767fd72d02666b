use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Binary,
    Continuous {
        lo: f64,
        hi: f64,
    },
    /// Values are stored as indices into `values`.
    Categorical {
        values: Vec<String>,
        positive: Vec<String>,
    },
}

/// Declarative definition of one factor of variation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl AttributeSpec {
    pub fn binary(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Binary,
        }
    }

    pub fn continuous(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Continuous { lo, hi },
        }
    }

    pub fn categorical(name: &str, values: &[&str], positive: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Categorical {
                values: values.iter().map(|s| s.to_string()).collect(),
                positive: positive.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            AttributeKind::Binary => Ok(()),
            AttributeKind::Continuous { lo, hi } => {
                if lo.is_finite() && hi.is_finite() && lo < hi {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "attribute `{}`: range [{lo}, {hi}] is empty",
                        self.name
                    )))
                }
            }
            AttributeKind::Categorical { values, positive } => {
                let known = positive.iter().all(|p| values.contains(p));
                if !known || positive.is_empty() || positive.len() >= values.len() {
                    Err(Error::Config(format!(
                        "attribute `{}`: positive subset must be a non-empty proper subset of the values",
                        self.name
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Whether `value` is admissible for this attribute.
    pub fn accepts(&self, value: f64) -> bool {
        match &self.kind {
            AttributeKind::Binary => value == 0.0 || value == 1.0,
            AttributeKind::Continuous { lo, hi } => value >= *lo && value <= *hi,
            AttributeKind::Categorical { values, .. } => {
                value >= 0.0 && value.fract() == 0.0 && (value as usize) < values.len()
            }
        }
    }

    /// Indices of the positive categories (categorical attributes only).
    pub fn positive_indices(&self) -> Vec<usize> {
        match &self.kind {
            AttributeKind::Categorical { values, positive } => values
                .iter()
                .enumerate()
                .filter(|(_, v)| positive.contains(v))
                .map(|(i, _)| i)
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Converts attribute values to `{0, 1}` classes.
///
/// Binary values pass through, categorical values map to membership in the positive
/// subset, and continuous values map to `1` iff strictly below the median of `values`.
pub fn binarize_attribute(spec: &AttributeSpec, values: &[f64]) -> Result<Vec<u8>> {
    ensure(!values.is_empty(), || {
        format!("cannot binarize an empty value list for `{}`", spec.name)
    })?;
    if let Some(bad) = values.iter().find(|v| !spec.accepts(**v)) {
        return Err(Error::Argument(format!(
            "value {bad} is not valid for attribute `{}`",
            spec.name
        )));
    }
    Ok(match &spec.kind {
        AttributeKind::Binary => values.iter().map(|&v| v as u8).collect(),
        AttributeKind::Categorical { .. } => {
            let positive = spec.positive_indices();
            values
                .iter()
                .map(|&v| positive.contains(&(v as usize)) as u8)
                .collect()
        }
        AttributeKind::Continuous { .. } => {
            let m = median(values);
            values.iter().map(|&v| (v < m) as u8).collect()
        }
    })
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub const SHAPE: &str = "shape";
pub const SCALE: &str = "scale";
pub const POS_X: &str = "pos_x";
pub const POS_Y: &str = "pos_y";
pub const ORIENTATION: &str = "orientation";

/// Factor names of the sprite world, in label order.
pub const FACTOR_NAMES: [&str; 5] = [SHAPE, SCALE, POS_X, POS_Y, ORIENTATION];

pub const SHAPE_NAMES: [&str; 3] = ["square", "ellipse", "triangle"];

/// The five factors of the sprite world.
pub fn sprite_attributes() -> Vec<AttributeSpec> {
    vec![
        AttributeSpec::categorical(SHAPE, &SHAPE_NAMES, &["square", "ellipse"]),
        AttributeSpec::continuous(SCALE, 0.3, 0.8),
        AttributeSpec::continuous(POS_X, 0.2, 0.8),
        AttributeSpec::continuous(POS_Y, 0.2, 0.8),
        AttributeSpec::continuous(ORIENTATION, 0.0, PI),
    ]
}

pub fn factor_index(name: &str) -> Result<usize> {
    FACTOR_NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown attribute `{name}`")))
}

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SIDE: usize = 16;
const SUBSAMPLES: usize = 4;
/// Minor/major axis ratio of the ellipse. Equal axes keep ellipses and triangles
/// separable for a pixel MLP at desk-scale data sizes.
const ELLIPSE_ASPECT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Square,
    Ellipse,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Ellipse, Shape::Triangle];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Shape> {
        Self::ALL.get(i).copied()
    }
}

/// One concrete assignment of the five sprite factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub shape: Shape,
    /// Side length (square), diameter (ellipse) or circumscribed diameter (triangle),
    /// as a fraction of the image side.
    pub scale: f64,
    pub pos_x: f64,
    pub pos_y: f64,
    /// Radians in `[0, π)`.
    pub orientation: f64,
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.3..=0.8).contains(&self.scale)
            && (0.2..=0.8).contains(&self.pos_x)
            && (0.2..=0.8).contains(&self.pos_y)
            && self.orientation >= 0.0
            && self.orientation < PI;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("scene parameters out of range: {self:?}")))
        }
    }

    /// Label vector in [`FACTOR_NAMES`](super::FACTOR_NAMES) order; the shape is its index.
    pub fn to_label(&self) -> [f64; 5] {
        [
            self.shape.index() as f64,
            self.scale,
            self.pos_x,
            self.pos_y,
            self.orientation,
        ]
    }

    pub fn from_label(label: &[f64; 5]) -> Result<Self> {
        let shape = Shape::from_index(label[0] as usize)
            .filter(|_| label[0].fract() == 0.0 && label[0] >= 0.0)
            .ok_or_else(|| Error::Argument(format!("invalid shape label {}", label[0])))?;
        let p = SceneParams {
            shape,
            scale: label[1],
            pos_x: label[2],
            pos_y: label[3],
            orientation: label[4],
        };
        p.validate()?;
        Ok(p)
    }
}

/// Square grayscale image, row-major, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub side: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.side + x]
    }
}

/// Rasterizes a sprite with 4×4 supersampling per pixel.
pub fn render_scene(params: &SceneParams, side: usize) -> Result<Image> {
    if side < MIN_SIDE {
        return Err(Error::Config(format!(
            "image side must be at least {MIN_SIDE}, got {side}"
        )));
    }
    params.validate()?;
    let (sin, cos) = params.orientation.sin_cos();
    let half = 0.5 * params.scale;
    let inside: Box<dyn Fn(f64, f64) -> bool> = match params.shape {
        Shape::Square => Box::new(move |u, v| u.abs() <= half && v.abs() <= half),
        Shape::Ellipse => {
            let minor = half * ELLIPSE_ASPECT;
            Box::new(move |u, v| (u / half).powi(2) + (v / minor).powi(2) <= 1.0)
        }
        Shape::Triangle => {
            // Equilateral, circumradius `half`, apex pointing up (towards -y).
            let verts: Vec<(f64, f64)> = [-PI / 2.0, PI / 6.0, 5.0 * PI / 6.0]
                .iter()
                .map(|a| (half * a.cos(), half * a.sin()))
                .collect();
            Box::new(move |u, v| {
                let edge = |(x0, y0): (f64, f64), (x1, y1): (f64, f64)| {
                    (x1 - x0) * (v - y0) - (y1 - y0) * (u - x0)
                };
                let e0 = edge(verts[0], verts[1]);
                let e1 = edge(verts[1], verts[2]);
                let e2 = edge(verts[2], verts[0]);
                (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0)
            })
        }
    };

    let inv_side = 1.0 / side as f64;
    let weight = 1.0 / (SUBSAMPLES * SUBSAMPLES) as f64;
    let mut pixels = vec![0.0; side * side];
    for py in 0..side {
        for px in 0..side {
            let mut hits = 0usize;
            for sy in 0..SUBSAMPLES {
                let y = (py as f64 + (sy as f64 + 0.5) / SUBSAMPLES as f64) * inv_side;
                for sx in 0..SUBSAMPLES {
                    let x = (px as f64 + (sx as f64 + 0.5) / SUBSAMPLES as f64) * inv_side;
                    let dx = x - params.pos_x;
                    let dy = y - params.pos_y;
                    let u = cos * dx + sin * dy;
                    let v = -sin * dx + cos * dy;
                    if inside(u, v) {
                        hits += 1;
                    }
                }
            }
            pixels[py * side + px] = hits as f64 * weight;
        }
    }
    Ok(Image { side, pixels })
}

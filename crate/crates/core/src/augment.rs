//! Paired geometric augmentation for image/mask training pairs.
//!
//! Transforms follow the Keras `ImageDataGenerator` conventions: random
//! rotation, row/column shift, shear and zoom are composed into one affine
//! map about the image center, which sends each output pixel back to a
//! source coordinate. A horizontal flip is applied afterwards.

use std::f64::consts::PI;

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::palette::LabelMap;
use crate::resample::{sample_bilinear, to_u8};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Degrees,
    Radians,
}

impl AngleUnit {
    fn to_radians(self, v: f64) -> f64 {
        match self {
            AngleUnit::Degrees => v * PI / 180.0,
            AngleUnit::Radians => v,
        }
    }
}

impl std::str::FromStr for AngleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "deg" | "degrees" => Ok(AngleUnit::Degrees),
            "rad" | "radians" => Ok(AngleUnit::Radians),
            other => Err(Error::InvalidParameter(format!("unknown angle unit '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// Rotation bound, in `angle_unit`.
    pub rotation_range: f64,
    /// Column shift bound as a fraction of the width.
    pub width_shift: f64,
    /// Row shift bound as a fraction of the height.
    pub height_shift: f64,
    /// Shear angle bound, in `angle_unit`.
    pub shear: f64,
    /// Zoom factors are drawn from `[1 - zoom, 1 + zoom]`.
    pub zoom: f64,
    pub horizontal_flip: bool,
    pub angle_unit: AngleUnit,
    pub seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            rotation_range: 0.2,
            width_shift: 0.05,
            height_shift: 0.05,
            shear: 0.05,
            zoom: 0.05,
            horizontal_flip: true,
            angle_unit: AngleUnit::Degrees,
            seed: 0,
        }
    }
}

impl AugmentParams {
    /// All ranges zero, no flip.
    pub fn none() -> Self {
        AugmentParams {
            rotation_range: 0.0,
            width_shift: 0.0,
            height_shift: 0.0,
            shear: 0.0,
            zoom: 0.0,
            horizontal_flip: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("rotation_range", self.rotation_range),
            ("width_shift", self.width_shift),
            ("height_shift", self.height_shift),
            ("shear", self.shear),
            ("zoom", self.zoom),
        ];
        for (name, v) in ranges {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        if self.zoom >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "zoom range must be below 1, got {}",
                self.zoom
            )));
        }
        Ok(())
    }
}

/// One concrete draw of augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    /// Radians.
    pub rotation: f64,
    /// Row shift as a fraction of the height.
    pub shift_rows: f64,
    /// Column shift as a fraction of the width.
    pub shift_cols: f64,
    /// Radians.
    pub shear: f64,
    /// Zoom along rows.
    pub zoom_rows: f64,
    /// Zoom along columns.
    pub zoom_cols: f64,
    pub flip: bool,
}

impl AffineTransform {
    pub fn identity() -> Self {
        AffineTransform {
            rotation: 0.0,
            shift_rows: 0.0,
            shift_cols: 0.0,
            shear: 0.0,
            zoom_rows: 1.0,
            zoom_cols: 1.0,
            flip: false,
        }
    }

    /// 3x3 homogeneous matrix over `(row, col)` mapping a centered output
    /// coordinate to a centered source coordinate (before the flip).
    fn matrix(&self, height: usize, width: usize) -> [[f64; 3]; 3] {
        let (s, c) = self.rotation.sin_cos();
        let rotation = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let shift = [
            [1.0, 0.0, self.shift_rows * height as f64],
            [0.0, 1.0, self.shift_cols * width as f64],
            [0.0, 0.0, 1.0],
        ];
        let shear = [
            [1.0, -self.shear.sin(), 0.0],
            [0.0, self.shear.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ];
        let zoom = [
            [self.zoom_rows, 0.0, 0.0],
            [0.0, self.zoom_cols, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let m = matmul3(&matmul3(&matmul3(&rotation, &shift), &shear), &zoom);
        let (oy, ox) = (height as f64 / 2.0 - 0.5, width as f64 / 2.0 - 0.5);
        let offset = [[1.0, 0.0, oy], [0.0, 1.0, ox], [0.0, 0.0, 1.0]];
        let reset = [[1.0, 0.0, -oy], [0.0, 1.0, -ox], [0.0, 0.0, 1.0]];
        matmul3(&matmul3(&offset, &m), &reset)
    }

    /// Source `(row, col)` for output pixel `(row, col)`.
    pub fn source_coord(&self, row: usize, col: usize, height: usize, width: usize) -> (f64, f64) {
        let m = self.matrix(height, width);
        let col = if self.flip { width - 1 - col } else { col };
        apply3(&m, row as f64, col as f64)
    }
}

fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn apply3(m: &[[f64; 3]; 3], r: f64, c: f64) -> (f64, f64) {
    (
        m[0][0] * r + m[0][1] * c + m[0][2],
        m[1][0] * r + m[1][1] * c + m[1][2],
    )
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, range: f64) -> f64 {
    if range > 0.0 {
        rng.random_range(-range..=range)
    } else {
        0.0
    }
}

/// Draw a transform. Deterministic for a given RNG state.
pub fn sample_transform<R: Rng + ?Sized>(params: &AugmentParams, rng: &mut R) -> AffineTransform {
    let unit = params.angle_unit;
    let rotation = unit.to_radians(symmetric(rng, params.rotation_range));
    let shift_rows = symmetric(rng, params.height_shift);
    let shift_cols = symmetric(rng, params.width_shift);
    let shear = unit.to_radians(symmetric(rng, params.shear));
    let (zoom_rows, zoom_cols) = if params.zoom > 0.0 {
        (
            rng.random_range(1.0 - params.zoom..=1.0 + params.zoom),
            rng.random_range(1.0 - params.zoom..=1.0 + params.zoom),
        )
    } else {
        (1.0, 1.0)
    };
    let flip = params.horizontal_flip && rng.random_bool(0.5);
    AffineTransform {
        rotation,
        shift_rows,
        shift_cols,
        shear,
        zoom_rows,
        zoom_cols,
        flip,
    }
}

/// Apply one transform to an image and its mask. The image is resampled
/// bilinearly with edge replication; the mask with nearest-neighbor and
/// background outside the source.
pub fn apply_pair(
    image: &RgbImage,
    mask: &LabelMap,
    t: &AffineTransform,
) -> Result<(RgbImage, LabelMap)> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if (w, h) != (mask.width(), mask.height()) {
        return Err(Error::Dimension(format!(
            "image is {w}x{h}, mask {}x{}",
            mask.width(),
            mask.height()
        )));
    }
    if w == 0 || h == 0 {
        return Err(Error::Dimension("empty image".into()));
    }
    let m = t.matrix(h, w);
    let mut out_img = RgbImage::new(w as u32, h as u32);
    let mut labels = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let src_col = if t.flip { w - 1 - col } else { col };
            let (sr, sc) = apply3(&m, row as f64, src_col as f64);
            out_img.put_pixel(
                col as u32,
                row as u32,
                image::Rgb(sample_bilinear(image, sc, sr).map(to_u8)),
            );
            let (nr, nc) = ((sr + 0.5).floor(), (sc + 0.5).floor());
            let label = if nr < 0.0 || nc < 0.0 || nr >= h as f64 || nc >= w as f64 {
                0
            } else {
                mask.get(nc as usize, nr as usize)
            };
            labels.push(label);
        }
    }
    Ok((out_img, LabelMap::new(w, h, labels)?))
}

//! Image and label-map resizing.
//!
//! Both resizers use pixel-center alignment: destination pixel `d` looks at
//! source coordinate `(d + 0.5) * in / out - 0.5`. Label maps are only ever
//! resized with nearest-neighbor so no class is ever blended.

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::palette::LabelMap;

/// Width by height in pixels, written `WxH` on the command line and in
/// JSON. Deserialization also accepts `{"width": W, "height": H}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "ResolutionRepr")]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub const fn new(width: usize, height: usize) -> Self {
        Resolution { width, height }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("resolution '{s}' is not of the form WxH"));
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let width: usize = w.trim().parse().map_err(|_| bad())?;
        let height: usize = h.trim().parse().map_err(|_| bad())?;
        if width == 0 || height == 0 {
            return Err(bad());
        }
        Ok(Resolution { width, height })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ResolutionRepr {
    Text(String),
    Fields { width: usize, height: usize },
}

impl TryFrom<ResolutionRepr> for Resolution {
    type Error = Error;

    fn try_from(r: ResolutionRepr) -> Result<Self> {
        match r {
            ResolutionRepr::Text(s) => s.parse(),
            ResolutionRepr::Fields { width, height } => format!("{width}x{height}").parse(),
        }
    }
}

impl From<Resolution> for String {
    fn from(r: Resolution) -> String {
        r.to_string()
    }
}

fn check_target(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!(
            "cannot resize to {width}x{height}"
        )));
    }
    Ok(())
}

fn nearest_index(d: usize, src: usize, dst: usize) -> usize {
    (((d as f64 + 0.5) * src as f64 / dst as f64).floor() as usize).min(src - 1)
}

pub fn resize_labels_nearest(map: &LabelMap, width: usize, height: usize) -> Result<LabelMap> {
    check_target(width, height)?;
    let (sw, sh) = (map.width(), map.height());
    let cols: Vec<usize> = (0..width).map(|x| nearest_index(x, sw, width)).collect();
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        let sy = nearest_index(y, sh, height);
        labels.extend(cols.iter().map(|&sx| map.get(sx, sy)));
    }
    LabelMap::new(width, height, labels)
}

pub fn resize_rgb_nearest(img: &RgbImage, width: usize, height: usize) -> Result<RgbImage> {
    check_target(width, height)?;
    let (sw, sh) = (img.width() as usize, img.height() as usize);
    if sw == 0 || sh == 0 {
        return Err(Error::Dimension("cannot resize an empty image".into()));
    }
    Ok(RgbImage::from_fn(width as u32, height as u32, |x, y| {
        let sx = nearest_index(x as usize, sw, width);
        let sy = nearest_index(y as usize, sh, height);
        *img.get_pixel(sx as u32, sy as u32)
    }))
}

/// Bilinear sample with edge replication. `x`, `y` are in source pixel units.
pub fn sample_bilinear(img: &RgbImage, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let px = |xx: usize, yy: usize| img.get_pixel(xx as u32, yy as u32).0;
    let (a, b, c, d) = (px(x0, y0), px(x1, y0), px(x0, y1), px(x1, y1));
    let mut out = [0.0; 3];
    for ch in 0..3 {
        let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
        let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
        out[ch] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn resize_bilinear(img: &RgbImage, width: usize, height: usize) -> Result<RgbImage> {
    check_target(width, height)?;
    let (sw, sh) = (img.width() as usize, img.height() as usize);
    if sw == 0 || sh == 0 {
        return Err(Error::Dimension("cannot resize an empty image".into()));
    }
    let sx = sw as f64 / width as f64;
    let sy = sh as f64 / height as f64;
    Ok(RgbImage::from_fn(width as u32, height as u32, |x, y| {
        let fx = (x as f64 + 0.5) * sx - 0.5;
        let fy = (y as f64 + 0.5) * sy - 0.5;
        image::Rgb(sample_bilinear(img, fx, fy).map(to_u8))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_parse() {
        assert_eq!("320x240".parse::<Resolution>().unwrap(), Resolution::new(320, 240));
        assert_eq!(Resolution::new(320, 256).to_string(), "320x256");
        assert!("320".parse::<Resolution>().is_err());
        assert!("0x4".parse::<Resolution>().is_err());
        let r = Resolution::new(64, 48);
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"64x48\"");
        assert_eq!(serde_json::from_str::<Resolution>("\"64x48\"").unwrap(), r);
        assert_eq!(serde_json::from_str::<Resolution>(r#"{"width": 64, "height": 48}"#).unwrap(), r);
        assert!(serde_json::from_str::<Resolution>(r#"{"width": 0, "height": 48}"#).is_err());
    }

    #[test]
    fn same_size_is_identity() {
        let img = RgbImage::from_fn(5, 3, |x, y| image::Rgb([x as u8 * 40, y as u8 * 70, 9]));
        assert_eq!(resize_bilinear(&img, 5, 3).unwrap(), img);
        assert_eq!(resize_rgb_nearest(&img, 5, 3).unwrap(), img);
        let map = LabelMap::new(3, 2, vec![0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(resize_labels_nearest(&map, 3, 2).unwrap(), map);
    }

    #[test]
    fn nearest_upscale_repeats() {
        let map = LabelMap::new(2, 1, vec![3, 6]).unwrap();
        let up = resize_labels_nearest(&map, 4, 2).unwrap();
        assert_eq!(up.labels(), &[3, 3, 6, 6, 3, 3, 6, 6]);
    }

    #[test]
    fn bilinear_downscale_averages() {
        let img = RgbImage::from_fn(2, 1, |x, _| image::Rgb([x as u8 * 200, 0, 0]));
        let small = resize_bilinear(&img, 1, 1).unwrap();
        assert_eq!(small.get_pixel(0, 0).0[0], 100);
    }

    #[test]
    fn rejects_zero_target() {
        let map = LabelMap::new(1, 1, vec![0]).unwrap();
        assert!(resize_labels_nearest(&map, 0, 3).is_err());
    }
}

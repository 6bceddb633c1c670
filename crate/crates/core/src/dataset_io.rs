//! Corpus discovery and image/mask file I/O.
//!
//! A corpus root holds an `images/` and a `masks/` directory. Files are
//! paired by stem, so `images/d_r_122_.jpg` goes with `masks/d_r_122_.bmp`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use crate::engine::{Real, Shape, Tensor};
use crate::error::{Error, Result};
use crate::palette::{decode_mask, encode_mask, BinaryMap, ChannelStack, ClassConfig, ClassMode, LabelMap, DEFAULT_THRESHOLD};
use crate::resample::{resize_bilinear, resize_labels_nearest, resize_rgb_nearest, Resolution};

pub const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp", "ppm"];
pub const MASK_EXTENSIONS: &[&str] = &["bmp", "png", "ppm", "pgm"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEntry {
    pub stem: String,
    pub image: PathBuf,
    pub mask: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub pairs: Vec<PairEntry>,
    /// Files with no partner in the other directory, or a second file with
    /// an already-paired stem.
    pub unpaired: Vec<PathBuf>,
    pub resolution: Option<Resolution>,
}

impl CorpusManifest {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// One training example held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: RgbImage,
    pub mask: LabelMap,
}

fn has_extension(path: &Path, allowed: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| allowed.iter().any(|a| a.eq_ignore_ascii_case(e)))
}

/// Files in `dir` with an allowed extension, grouped by stem. Within a stem
/// the files are sorted by name.
fn files_by_stem(dir: &Path, allowed: &[&str]) -> Result<BTreeMap<String, Vec<PathBuf>>> {
    let mut out: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() || !has_extension(&path, allowed) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.starts_with('.') {
            continue;
        }
        out.entry(stem.to_string()).or_default().push(path);
    }
    for files in out.values_mut() {
        files.sort();
    }
    Ok(out)
}

/// First file per stem in `dir` with one of the `allowed` extensions.
pub fn list_files(dir: impl AsRef<Path>, allowed: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::Layout(format!("{} is not a directory", dir.display())));
    }
    Ok(files_by_stem(dir, allowed)?
        .into_iter()
        .map(|(stem, mut files)| (stem, files.remove(0)))
        .collect())
}

pub fn scan_corpus(root: impl AsRef<Path>) -> Result<CorpusManifest> {
    let root = root.as_ref();
    let (img_dir, mask_dir) = (root.join("images"), root.join("masks"));
    for dir in [&img_dir, &mask_dir] {
        if !dir.is_dir() {
            return Err(Error::Layout(format!("missing directory {}", dir.display())));
        }
    }
    let images = files_by_stem(&img_dir, IMAGE_EXTENSIONS)?;
    let mut masks = files_by_stem(&mask_dir, MASK_EXTENSIONS)?;
    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    for (stem, mut imgs) in images {
        if let Some(mut ms) = masks.remove(&stem) {
            pairs.push(PairEntry {
                stem,
                image: imgs.remove(0),
                mask: ms.remove(0),
            });
            unpaired.extend(ms);
        }
        unpaired.extend(imgs);
    }
    unpaired.extend(masks.into_values().flatten());
    unpaired.sort();
    Ok(CorpusManifest {
        root: root.to_path_buf(),
        pairs,
        unpaired,
        resolution: None,
    })
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    Ok(image::open(path).map_err(|e| Error::image(path, e))?.to_rgb8())
}

/// Grayscale image as values in `[0, 1]`, used for soft saliency maps.
pub fn read_soft_gray(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f32>)> {
    let path = path.as_ref();
    let g = image::open(path).map_err(|e| Error::image(path, e))?.to_luma8();
    let (w, h) = g.dimensions();
    Ok((w as usize, h as usize, g.pixels().map(|p| p.0[0] as f32 / 255.0).collect()))
}

/// True when the file decodes as a single-channel image.
pub fn is_grayscale(path: impl AsRef<Path>) -> Result<bool> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    Ok(matches!(img.color().channel_count(), 1 | 2))
}

pub fn read_mask(path: impl AsRef<Path>, threshold: u8) -> Result<LabelMap> {
    let path = path.as_ref();
    if has_extension(path, &["pgm"]) {
        return read_label_pgm(path);
    }
    decode_mask(&read_rgb(path)?, threshold)
}

fn save(path: &Path, img: &impl ImageSave) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let format = ImageFormat::from_path(path).map_err(|e| Error::image(path, e))?;
    img.save_as(path, format).map_err(|e| Error::image(path, e))
}

trait ImageSave {
    fn save_as(&self, path: &Path, format: ImageFormat) -> image::ImageResult<()>;
}

impl ImageSave for RgbImage {
    fn save_as(&self, path: &Path, format: ImageFormat) -> image::ImageResult<()> {
        self.save_with_format(path, format)
    }
}

impl ImageSave for GrayImage {
    fn save_as(&self, path: &Path, format: ImageFormat) -> image::ImageResult<()> {
        self.save_with_format(path, format)
    }
}

pub fn write_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    save(path.as_ref(), img)
}

/// Write a label map as a palette-colored image (format from the extension).
pub fn write_mask(path: impl AsRef<Path>, map: &LabelMap) -> Result<()> {
    save(path.as_ref(), &encode_mask(map))
}

/// Class indices as an 8-bit grayscale PGM (values 0..=7).
pub fn write_label_pgm(path: impl AsRef<Path>, map: &LabelMap) -> Result<()> {
    let img = GrayImage::from_raw(map.width() as u32, map.height() as u32, map.labels().to_vec())
        .ok_or_else(|| Error::Dimension("label buffer does not match its size".into()))?;
    save(path.as_ref(), &img)
}

pub fn read_label_pgm(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let g = image::open(path).map_err(|e| Error::image(path, e))?.to_luma8();
    let (w, h) = g.dimensions();
    LabelMap::new(w as usize, h as usize, g.into_raw())
}

/// Binary map as black/white grayscale (0 or 255).
pub fn write_binary(path: impl AsRef<Path>, map: &BinaryMap) -> Result<()> {
    let img = GrayImage::from_fn(map.width as u32, map.height as u32, |x, y| {
        Luma([if map.data[y as usize * map.width + x as usize] != 0 { 255 } else { 0 }])
    });
    save(path.as_ref(), &img)
}

/// Values in `[0, 1]` as 8-bit grayscale, rounded to the nearest level.
pub fn write_soft_gray(path: impl AsRef<Path>, width: usize, height: usize, values: &[f32]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::Dimension(format!(
            "{} values for a {width}x{height} image",
            values.len()
        )));
    }
    let img = GrayImage::from_fn(width as u32, height as u32, |x, y| {
        let v = values[y as usize * width + x as usize].clamp(0.0, 1.0);
        Luma([(v * 255.0).round() as u8])
    });
    save(path.as_ref(), &img)
}

/// One binary PNG per channel, named `<stem>_<CODE>.png`.
pub fn write_channels(dir: impl AsRef<Path>, stem: &str, stack: &ChannelStack, config: &ClassConfig) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::with_capacity(stack.channels);
    for (c, name) in config.channel_names().iter().enumerate().take(stack.channels) {
        let path = dir.join(format!("{stem}_{name}.png"));
        write_binary(&path, &stack.channel_map(c))?;
        out.push(path);
    }
    Ok(out)
}

/// Read every mask file in `dir`, keyed by stem.
pub fn collect_masks(dir: impl AsRef<Path>, threshold: u8) -> Result<BTreeMap<String, LabelMap>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::Layout(format!("{} is not a directory", dir.display())));
    }
    let mut out = BTreeMap::new();
    for (stem, files) in files_by_stem(dir, MASK_EXTENSIONS)? {
        out.insert(stem, read_mask(&files[0], threshold)?);
    }
    Ok(out)
}

/// Read every image file in `dir`, keyed by stem.
pub fn collect_images(dir: impl AsRef<Path>) -> Result<BTreeMap<String, RgbImage>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::Layout(format!("{} is not a directory", dir.display())));
    }
    let mut out = BTreeMap::new();
    for (stem, files) in files_by_stem(dir, IMAGE_EXTENSIONS)? {
        out.insert(stem, read_rgb(&files[0])?);
    }
    Ok(out)
}

/// Load a pair and bring both to `resolution`: the image bilinearly, the
/// mask by nearest neighbor on the raw colors before decoding.
pub fn load_sample(entry: &PairEntry, resolution: Option<Resolution>, threshold: u8) -> Result<Sample> {
    let image = read_rgb(&entry.image)?;
    let (image, mask) = match resolution {
        Some(r) => {
            let image = if image.dimensions() == (r.width as u32, r.height as u32) {
                image
            } else {
                resize_bilinear(&image, r.width, r.height)?
            };
            let mask = if has_extension(&entry.mask, &["pgm"]) {
                resize_labels_nearest(&read_label_pgm(&entry.mask)?, r.width, r.height)?
            } else {
                let raw = read_rgb(&entry.mask)?;
                decode_mask(&resize_rgb_nearest(&raw, r.width, r.height)?, threshold)?
            };
            (image, mask)
        }
        None => (image, read_mask(&entry.mask, threshold)?),
    };
    if (image.width() as usize, image.height() as usize) != (mask.width(), mask.height()) {
        return Err(Error::Dimension(format!(
            "{}: image is {}x{} but mask is {}x{}",
            entry.stem,
            image.width(),
            image.height(),
            mask.width(),
            mask.height()
        )));
    }
    Ok(Sample { image, mask })
}

/// Like [`load_sample`] but returns the image as a `1 x 3 x H x W` tensor in `[0, 1]`.
pub fn load_pair<T: Real>(entry: &PairEntry, resolution: Resolution, threshold: u8) -> Result<(Tensor<T>, LabelMap)> {
    let s = load_sample(entry, Some(resolution), threshold)?;
    Ok((image_to_tensor(&s.image), s.mask))
}

pub fn load_corpus(manifest: &CorpusManifest, resolution: Option<Resolution>, threshold: u8) -> Result<Vec<Sample>> {
    manifest
        .pairs
        .iter()
        .map(|p| load_sample(p, resolution, threshold))
        .collect()
}

pub fn image_to_tensor<T: Real>(img: &RgbImage) -> Tensor<T> {
    batch_to_tensor(&[img])
}

/// Stack RGB images of equal size into an `N x 3 x H x W` tensor scaled by 1/255.
pub fn batch_to_tensor<T: Real>(images: &[&RgbImage]) -> Tensor<T> {
    let (w, h) = images.first().map_or((0, 0), |i| (i.width() as usize, i.height() as usize));
    let shape = Shape::new(images.len(), 3, h, w);
    let plane = w * h;
    let mut data = vec![T::zero(); shape.len()];
    let scale = T::one() / T::from_f64_lossy(255.0);
    for (n, img) in images.iter().enumerate() {
        let base = n * 3 * plane;
        for (i, p) in img.pixels().enumerate().take(plane) {
            for c in 0..3 {
                data[base + c * plane + i] = T::from_f64_lossy(p.0[c] as f64) * scale;
            }
        }
    }
    Tensor::new(shape, data).expect("buffer sized from shape")
}

/// Binary per-channel targets for a batch of label maps.
pub fn targets_to_tensor<T: Real>(masks: &[&LabelMap], config: &ClassConfig) -> Tensor<T> {
    let (w, h) = masks.first().map_or((0, 0), |m| (m.width(), m.height()));
    let c = config.output_channels();
    let shape = Shape::new(masks.len(), c, h, w);
    let plane = w * h;
    let mut data = vec![T::zero(); shape.len()];
    for (n, m) in masks.iter().enumerate() {
        for (i, &l) in m.labels().iter().enumerate().take(plane) {
            if let Some(ch) = config.channel_of(l) {
                data[(n * c + ch) * plane + i] = T::one();
            }
        }
    }
    Tensor::new(shape, data).expect("buffer sized from shape")
}

/// Dataset settings stored as JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub root: PathBuf,
    pub resolution: Resolution,
    pub mode: ClassMode,
    #[serde(default = "default_threshold")]
    pub threshold: u8,
}

fn default_threshold() -> u8 {
    DEFAULT_THRESHOLD
}

impl DatasetConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

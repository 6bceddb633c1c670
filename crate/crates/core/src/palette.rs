//! Mask palette codec.
//!
//! SUIM masks paint every pixel with one of eight 3-bit RGB colors. Each
//! channel is either 0 or 255 and carries one bit of the class code in
//! R, G, B order, so the class index is simply the value of that code
//! (`BW = 000 = 0` up to `SR = 111 = 7`).
//!
//! Real annotation files carry compression noise and anti-aliased edges,
//! so decoding never rejects a color: every channel is binarized at a
//! threshold and the result snaps to the nearest code.

use std::fmt;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default per-channel binarization threshold for mask decoding.
pub const DEFAULT_THRESHOLD: u8 = 127;

pub type Rgb = [u8; 3];

/// The eight SUIM object categories, indexed by their 3-bit color code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Category {
    /// Background (waterbody).
    BW = 0,
    /// Human divers.
    HD = 1,
    /// Aquatic plants and sea-grass.
    PF = 2,
    /// Wrecks or ruins.
    WR = 3,
    /// Robots (AUVs, ROVs, instruments).
    RO = 4,
    /// Reefs and invertebrates.
    RI = 5,
    /// Fish and vertebrates.
    FV = 6,
    /// Sea-floor and rocks.
    SR = 7,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::BW,
        Category::HD,
        Category::PF,
        Category::WR,
        Category::RO,
        Category::RI,
        Category::FV,
        Category::SR,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: u8) -> Result<Self> {
        Category::ALL
            .get(index as usize)
            .copied()
            .ok_or(Error::InvalidClass(index))
    }

    pub fn code(self) -> &'static str {
        match self {
            Category::BW => "BW",
            Category::HD => "HD",
            Category::PF => "PF",
            Category::WR => "WR",
            Category::RO => "RO",
            Category::RI => "RI",
            Category::FV => "FV",
            Category::SR => "SR",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(code))
    }

    pub fn description(self) -> &'static str {
        match self {
            Category::BW => "Background (waterbody)",
            Category::HD => "Human divers",
            Category::PF => "Aquatic plants and sea-grass",
            Category::WR => "Wrecks or ruins",
            Category::RO => "Robots (AUVs/ROVs/instruments)",
            Category::RI => "Reefs and invertebrates",
            Category::FV => "Fish and vertebrates",
            Category::SR => "Sea-floor and rocks",
        }
    }

    pub fn color(self) -> Rgb {
        bits_to_color(self.index())
    }

    /// Categories that are salient: divers, robots, fish and wrecks.
    pub fn is_salient(self) -> bool {
        matches!(
            self,
            Category::HD | Category::RO | Category::FV | Category::WR
        )
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

fn bits_to_color(bits: u8) -> Rgb {
    let on = |bit: u8| if bits & bit != 0 { 255 } else { 0 };
    [on(0b100), on(0b010), on(0b001)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PaletteEntry {
    pub category: Category,
    pub bits: u8,
    pub color: Rgb,
}

/// The class/color table. There is only one palette in practice, but it is
/// kept as a value so callers can print or iterate over it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    entries: [PaletteEntry; 8],
}

impl Default for Palette {
    fn default() -> Self {
        Self::suim()
    }
}

impl Palette {
    pub fn suim() -> Self {
        let entries = Category::ALL.map(|category| PaletteEntry {
            category,
            bits: category.index(),
            color: category.color(),
        });
        Palette { entries }
    }

    pub fn entries(&self) -> &[PaletteEntry; 8] {
        &self.entries
    }

    pub fn color(&self, class: u8) -> Result<Rgb> {
        self.entries
            .get(class as usize)
            .map(|e| e.color)
            .ok_or(Error::InvalidClass(class))
    }
}

/// Snap a color to its class index. Each channel counts as set when it is
/// strictly above `threshold`.
pub fn color_to_class(rgb: Rgb, threshold: u8) -> u8 {
    let bit = |v: u8| u8::from(v > threshold);
    (bit(rgb[0]) << 2) | (bit(rgb[1]) << 1) | bit(rgb[2])
}

pub fn class_to_color(class: u8) -> Result<Rgb> {
    if class >= 8 {
        return Err(Error::InvalidClass(class));
    }
    Ok(bits_to_color(class))
}

/// Per-pixel class indices, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "label map must be non-empty, got {width}x{height}"
            )));
        }
        if labels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= 8) {
            return Err(Error::InvalidClass(bad));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, class: Category) -> Result<Self> {
        Self::new(width, height, vec![class.index(); width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, class: Category) {
        self.labels[y * self.width + x] = class.index();
    }

    pub fn contains(&self, class: Category) -> bool {
        self.labels.contains(&class.index())
    }

    /// Per-class pixel counts.
    pub fn histogram(&self) -> [usize; 8] {
        let mut counts = [0usize; 8];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// A 0/1 map, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} values for a {width}x{height} map",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter(
                "binary map values must be 0 or 1".into(),
            ));
        }
        Ok(BinaryMap {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryMap {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

/// Which class grouping the network outputs are trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassMode {
    /// One channel per category, including background.
    Full8,
    /// HD, WR, RO, RI, FV; everything else is background.
    Major5,
    /// A single saliency channel: HD, RO, FV and WR are salient.
    Saliency1,
}

impl ClassMode {
    pub fn output_channels(self) -> usize {
        match self {
            ClassMode::Full8 => 8,
            ClassMode::Major5 => 5,
            ClassMode::Saliency1 => 1,
        }
    }

    pub fn from_channels(channels: usize) -> Result<Self> {
        match channels {
            8 => Ok(ClassMode::Full8),
            5 => Ok(ClassMode::Major5),
            1 => Ok(ClassMode::Saliency1),
            n => Err(Error::InvalidParameter(format!(
                "no class mode has {n} output channels"
            ))),
        }
    }
}

impl std::str::FromStr for ClassMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full8" => Ok(ClassMode::Full8),
            "major5" => Ok(ClassMode::Major5),
            "saliency1" => Ok(ClassMode::Saliency1),
            other => Err(Error::InvalidParameter(format!(
                "unknown class mode '{other}' (expected full8, major5 or saliency1)"
            ))),
        }
    }
}

impl fmt::Display for ClassMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassMode::Full8 => "full8",
            ClassMode::Major5 => "major5",
            ClassMode::Saliency1 => "saliency1",
        })
    }
}

/// Maps each of the eight categories to an output channel (or to nothing,
/// meaning background for that configuration).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassConfig {
    mode: ClassMode,
    merge: [Option<usize>; 8],
    names: Vec<&'static str>,
}

impl ClassConfig {
    pub fn new(mode: ClassMode) -> Self {
        let mut merge = [None; 8];
        let names = match mode {
            ClassMode::Full8 => {
                for (i, slot) in merge.iter_mut().enumerate() {
                    *slot = Some(i);
                }
                Category::ALL.iter().map(|c| c.code()).collect()
            }
            ClassMode::Major5 => {
                let major = [
                    Category::HD,
                    Category::WR,
                    Category::RO,
                    Category::RI,
                    Category::FV,
                ];
                for (channel, cat) in major.iter().enumerate() {
                    merge[cat.index() as usize] = Some(channel);
                }
                major.iter().map(|c| c.code()).collect()
            }
            ClassMode::Saliency1 => {
                for cat in Category::ALL.into_iter().filter(|c| c.is_salient()) {
                    merge[cat.index() as usize] = Some(0);
                }
                vec!["SAL"]
            }
        };
        ClassConfig { mode, merge, names }
    }

    pub fn mode(&self) -> ClassMode {
        self.mode
    }

    pub fn output_channels(&self) -> usize {
        self.names.len()
    }

    /// Output channel for a class index, `None` when the class is background.
    pub fn channel_of(&self, class: u8) -> Option<usize> {
        self.merge.get(class as usize).copied().flatten()
    }

    pub fn channel_names(&self) -> &[&'static str] {
        &self.names
    }

    /// Class index written back when a channel wins at a pixel. For the
    /// merged saliency channel there is no single class, so HD stands in.
    pub fn class_of_channel(&self, channel: usize) -> Option<u8> {
        match self.mode {
            ClassMode::Saliency1 => (channel == 0).then_some(Category::HD.index()),
            _ => self.merge.iter().position(|&m| m == Some(channel)).map(|i| i as u8),
        }
    }
}

/// Binary per-channel stack, channel-major (`C x H x W`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelStack {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl ChannelStack {
    pub fn channel(&self, c: usize) -> &[u8] {
        let plane = self.width * self.height;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_map(&self, c: usize) -> BinaryMap {
        BinaryMap {
            width: self.width,
            height: self.height,
            data: self.channel(c).to_vec(),
        }
    }
}

pub fn decode_mask(rgb: &RgbImage, threshold: u8) -> Result<LabelMap> {
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::Dimension(format!("mask image is {w}x{h}")));
    }
    let labels = rgb
        .pixels()
        .map(|p| color_to_class(p.0, threshold))
        .collect();
    LabelMap::new(w as usize, h as usize, labels)
}

pub fn encode_mask(map: &LabelMap) -> RgbImage {
    let mut out = RgbImage::new(map.width as u32, map.height as u32);
    for (px, &l) in out.pixels_mut().zip(&map.labels) {
        px.0 = bits_to_color(l);
    }
    out
}

pub fn to_channels(map: &LabelMap, config: &ClassConfig) -> ChannelStack {
    let plane = map.width * map.height;
    let channels = config.output_channels();
    let mut data = vec![0u8; channels * plane];
    for (i, &l) in map.labels.iter().enumerate() {
        if let Some(c) = config.channel_of(l) {
            data[c * plane + i] = 1;
        }
    }
    ChannelStack {
        channels,
        width: map.width,
        height: map.height,
        data,
    }
}

pub fn derive_saliency(map: &LabelMap) -> BinaryMap {
    let data = map
        .labels
        .iter()
        .map(|&l| u8::from(Category::ALL[l as usize].is_salient()))
        .collect();
    BinaryMap {
        width: map.width,
        height: map.height,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nearest_code(rgb: Rgb) -> u8 {
        // exhaustive nearest-color lookup over the palette table
        Palette::suim()
            .entries()
            .iter()
            .min_by_key(|e| {
                (0..3)
                    .map(|i| (e.color[i] as i32 - rgb[i] as i32).pow(2))
                    .sum::<i32>()
            })
            .unwrap()
            .bits
    }

    #[test]
    fn table_colors() {
        assert_eq!(color_to_class([255, 255, 0], 127), Category::FV.index());
        assert_eq!(color_to_class([0, 0, 0], 127), 0);
        assert_eq!(class_to_color(1).unwrap(), [0, 0, 255]);
        assert_eq!(class_to_color(7).unwrap(), [255, 255, 255]);
        assert_eq!(class_to_color(0).unwrap(), [0, 0, 0]);
        assert_eq!(Category::WR.color(), [0, 255, 255]);
        assert_eq!(Category::RI.color(), [255, 0, 255]);
        assert!(matches!(class_to_color(8), Err(Error::InvalidClass(8))));
    }

    #[test]
    fn noisy_color_snaps_to_nearest() {
        assert_eq!(color_to_class([250, 4, 249], 127), 5);
        assert_eq!(nearest_code([250, 4, 249]), 5);
    }

    #[test]
    fn palette_bits_match_channels() {
        for e in Palette::suim().entries() {
            for (i, bit) in [0b100u8, 0b010, 0b001].iter().enumerate() {
                assert_eq!(e.color[i] == 255, e.bits & bit != 0);
                assert!(e.color[i] == 0 || e.color[i] == 255);
            }
        }
    }

    #[test]
    fn decode_small_image() {
        let img = RgbImage::from_raw(2, 1, vec![0, 0, 255, 255, 0, 0]).unwrap();
        let map = decode_mask(&img, 127).unwrap();
        assert_eq!(map.labels(), &[1, 4]);
        assert_eq!((map.width(), map.height()), (2, 1));

        let black = RgbImage::new(3, 2);
        assert!(decode_mask(&black, 127).unwrap().labels().iter().all(|&l| l == 0));

        assert!(matches!(
            decode_mask(&RgbImage::new(0, 4), 127),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn encode_single_pixel() {
        let map = LabelMap::new(1, 1, vec![6]).unwrap();
        assert_eq!(encode_mask(&map).into_raw(), vec![255, 255, 0]);
        let zeros = LabelMap::filled(4, 3, Category::BW).unwrap();
        assert!(encode_mask(&zeros).into_raw().iter().all(|&b| b == 0));
    }

    #[test]
    fn label_map_validation() {
        assert!(LabelMap::new(0, 1, vec![]).is_err());
        assert!(LabelMap::new(2, 2, vec![0; 3]).is_err());
        assert!(matches!(
            LabelMap::new(1, 1, vec![8]),
            Err(Error::InvalidClass(8))
        ));
    }

    #[test]
    fn major5_drops_minor_classes() {
        let cfg = ClassConfig::new(ClassMode::Major5);
        let map = LabelMap::new(2, 1, vec![1, 2]).unwrap();
        let stack = to_channels(&map, &cfg);
        assert_eq!(stack.channels, 5);
        assert_eq!(cfg.channel_names(), &["HD", "WR", "RO", "RI", "FV"]);
        assert_eq!(stack.channel(0), &[1, 0]);
        for c in 1..5 {
            assert_eq!(stack.channel(c), &[0, 0]);
        }
        for cat in [Category::BW, Category::PF, Category::SR] {
            assert_eq!(cfg.channel_of(cat.index()), None);
        }
    }

    #[test]
    fn background_stack_is_zero() {
        let map = LabelMap::filled(3, 3, Category::BW).unwrap();
        for mode in [ClassMode::Major5, ClassMode::Saliency1] {
            let stack = to_channels(&map, &ClassConfig::new(mode));
            assert!(stack.data.iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn saliency_rule() {
        let map = LabelMap::new(4, 1, vec![1, 4, 6, 3]).unwrap();
        assert_eq!(derive_saliency(&map).data, vec![1, 1, 1, 1]);
        let map = LabelMap::new(4, 1, vec![0, 2, 5, 7]).unwrap();
        assert_eq!(derive_saliency(&map).data, vec![0, 0, 0, 0]);
        let map = LabelMap::filled(5, 2, Category::HD).unwrap();
        assert_eq!(derive_saliency(&map).count_ones(), 10);
    }

    #[test]
    fn channel_class_inverse() {
        for mode in [ClassMode::Full8, ClassMode::Major5] {
            let cfg = ClassConfig::new(mode);
            for c in 0..cfg.output_channels() {
                let class = cfg.class_of_channel(c).unwrap();
                assert_eq!(cfg.channel_of(class), Some(c));
            }
        }
    }

    fn label_map_strategy() -> impl Strategy<Value = LabelMap> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..8, w * h)
                .prop_map(move |labels| LabelMap::new(w, h, labels).unwrap())
        })
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(map in label_map_strategy(), t in 1u8..255) {
            prop_assert_eq!(decode_mask(&encode_mask(&map), t).unwrap(), map);
        }

        #[test]
        fn full8_exactly_one_channel(map in label_map_strategy()) {
            let stack = to_channels(&map, &ClassConfig::new(ClassMode::Full8));
            let plane = map.width() * map.height();
            for i in 0..plane {
                let ones: u8 = (0..8).map(|c| stack.data[c * plane + i]).sum();
                prop_assert_eq!(ones, 1);
            }
        }

        #[test]
        fn saliency_is_or_of_salient_channels(map in label_map_strategy()) {
            let stack = to_channels(&map, &ClassConfig::new(ClassMode::Full8));
            let sal = derive_saliency(&map);
            let plane = map.width() * map.height();
            for i in 0..plane {
                let or = [Category::HD, Category::RO, Category::FV, Category::WR]
                    .iter()
                    .any(|c| stack.data[c.index() as usize * plane + i] == 1);
                prop_assert_eq!(sal.data[i], u8::from(or));
            }
        }

        #[test]
        fn threshold_snap_matches_nearest(rgb in proptest::array::uniform3(0u8..=255)) {
            // nearest color under squared distance equals per-channel midpoint snapping
            let nearest = nearest_code(rgb);
            let mid = color_to_class(rgb, 127);
            prop_assert_eq!(mid, nearest);
        }
    }
}

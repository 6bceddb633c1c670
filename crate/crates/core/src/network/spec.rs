use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::palette::ClassMode;
use crate::resample::Resolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Rsb,
    Vgg,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rsb" => Ok(Variant::Rsb),
            "vgg" => Ok(Variant::Vgg),
            other => Err(Error::InvalidParameter(format!("unknown variant '{other}' (expected rsb or vgg)"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Rsb => "rsb",
            Variant::Vgg => "vgg",
        })
    }
}

/// Where the residual path of an RSB comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipMode {
    /// Identity shortcut from the block input (`skip=1`).
    FromInput,
    /// 1x1 projection conv + BN of the block input with the block stride (`skip=0`).
    FromIntermediateConv,
}

/// Residual skip block: 1x1 conv (stride `stride`) to `bottleneck`, a
/// `kernel` x `kernel` conv, a 1x1 conv to `filters`, each with BN; ReLU
/// after the first two and after the shortcut addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsbSpec {
    pub filters: usize,
    pub bottleneck: usize,
    pub kernel: usize,
    pub stride: usize,
    pub skip: SkipMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderStageSpec {
    /// `kernel` x `kernel` conv + BN + ReLU at full resolution, then a
    /// stride-2 3x3 conv + BN + ReLU to `down_filters`.
    Stem {
        filters: usize,
        kernel: usize,
        down_filters: usize,
    },
    Residual { blocks: Vec<RsbSpec> },
    /// 3x3 conv + ReLU per entry, then 2x2 max pooling.
    Vgg { filters: Vec<usize> },
}

/// Concatenates the output of encoder stage `skip` (if any) with the
/// running decoder tensor, then 3x3 conv + BN + ReLU to `filters` and a
/// 2x2 stride-2 transposed conv + ReLU to `up_filters`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderBlockSpec {
    pub skip: Option<usize>,
    pub filters: usize,
    pub up_filters: usize,
}

/// Optional skip concatenation, optional 2x2 stride-2 transposed conv +
/// ReLU, then a `kernel` x `kernel` conv to the output channels and a sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub skip: Option<usize>,
    pub up_filters: Option<usize>,
    pub kernel: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub variant: Variant,
    pub input_resolution: Resolution,
    pub num_output_channels: usize,
    pub encoder: Vec<EncoderStageSpec>,
    pub decoder: Vec<DecoderBlockSpec>,
    pub head: HeadSpec,
    pub seed: u64,
}

/// Channels and spatial size of a feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl fmt::Display for FeatureShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Shapes at every stage boundary, as computed by [`NetworkSpec::trace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTrace {
    pub encoder: Vec<FeatureShape>,
    pub decoder: Vec<FeatureShape>,
    pub output: FeatureShape,
}

pub const RSB_COUNT: usize = 7;

fn conv_out(size: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    (size + 2 * pad).checked_sub(kernel).map(|v| v / stride + 1)
}

/// A strided projection block followed by `count - 1` identity blocks.
fn rsb_stage(filters: usize, bottleneck: usize, count: usize) -> EncoderStageSpec {
    let mut blocks = vec![RsbSpec {
        filters,
        bottleneck,
        kernel: 3,
        stride: 2,
        skip: SkipMode::FromIntermediateConv,
    }];
    for _ in 1..count {
        blocks.push(RsbSpec {
            filters,
            bottleneck,
            kernel: 3,
            stride: 1,
            skip: SkipMode::FromInput,
        });
    }
    EncoderStageSpec::Residual { blocks }
}

impl NetworkSpec {
    /// RSB layout with base width `w`: stem to `w` at 1/2 resolution, three
    /// RSBs to `2w` at 1/4, four RSBs to `4w` at 1/8, and a mirrored decoder.
    pub fn rsb_scaled(num_output_channels: usize, resolution: Resolution, w: usize) -> Self {
        NetworkSpec {
            variant: Variant::Rsb,
            input_resolution: resolution,
            num_output_channels,
            encoder: vec![
                EncoderStageSpec::Stem {
                    filters: w,
                    kernel: 5,
                    down_filters: w,
                },
                rsb_stage(2 * w, w, 3),
                rsb_stage(4 * w, 2 * w, 4),
            ],
            decoder: vec![
                DecoderBlockSpec {
                    skip: None,
                    filters: 7 * w,
                    up_filters: 4 * w,
                },
                DecoderBlockSpec {
                    skip: Some(1),
                    filters: 4 * w,
                    up_filters: 2 * w,
                },
                DecoderBlockSpec {
                    skip: Some(0),
                    filters: 2 * w,
                    up_filters: w,
                },
            ],
            head: HeadSpec {
                skip: None,
                up_filters: None,
                kernel: 3,
            },
            seed: 0,
        }
    }

    /// Reference SUIM-Net RSB configuration at 320x240.
    pub fn rsb_reference(num_output_channels: usize) -> Self {
        Self::rsb_scaled(num_output_channels, Resolution::new(320, 240), 64)
    }

    /// Reference SUIM-Net VGG configuration at 320x256: the first four
    /// VGG-16 blocks, three decoder blocks and a final upsampling head.
    pub fn vgg_reference(num_output_channels: usize) -> Self {
        Self::vgg_scaled(num_output_channels, Resolution::new(320, 256), 64)
    }

    pub fn vgg_scaled(num_output_channels: usize, resolution: Resolution, w: usize) -> Self {
        NetworkSpec {
            variant: Variant::Vgg,
            input_resolution: resolution,
            num_output_channels,
            encoder: vec![
                EncoderStageSpec::Vgg { filters: vec![w; 2] },
                EncoderStageSpec::Vgg { filters: vec![2 * w; 2] },
                EncoderStageSpec::Vgg { filters: vec![4 * w; 3] },
                EncoderStageSpec::Vgg { filters: vec![8 * w; 3] },
            ],
            decoder: vec![
                DecoderBlockSpec {
                    skip: None,
                    filters: 8 * w,
                    up_filters: 4 * w,
                },
                DecoderBlockSpec {
                    skip: Some(2),
                    filters: 4 * w,
                    up_filters: 2 * w,
                },
                DecoderBlockSpec {
                    skip: Some(1),
                    filters: 2 * w,
                    up_filters: w,
                },
            ],
            head: HeadSpec {
                skip: Some(0),
                up_filters: Some(w),
                kernel: 3,
            },
            seed: 0,
        }
    }

    pub fn reference(variant: Variant, num_output_channels: usize) -> Self {
        match variant {
            Variant::Rsb => Self::rsb_reference(num_output_channels),
            Variant::Vgg => Self::vgg_reference(num_output_channels),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_resolution(mut self, resolution: Resolution) -> Self {
        self.input_resolution = resolution;
        self
    }

    pub fn class_mode(&self) -> Result<ClassMode> {
        ClassMode::from_channels(self.num_output_channels)
    }

    pub fn rsb_count(&self) -> usize {
        self.encoder
            .iter()
            .map(|s| match s {
                EncoderStageSpec::Residual { blocks } => blocks.len(),
                _ => 0,
            })
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NetworkSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Check structural rules and that every skip lines up, returning the
    /// feature shape at each stage boundary.
    pub fn trace(&self) -> Result<ShapeTrace> {
        let spec_err = |m: String| Err(Error::Spec(m));
        self.class_mode().map_err(|_| {
            Error::Spec(format!(
                "num_output_channels must be 1, 5 or 8, got {}",
                self.num_output_channels
            ))
        })?;
        let r = self.input_resolution;
        if r.width == 0 || r.height == 0 {
            return spec_err(format!("empty input resolution {r}"));
        }
        match self.variant {
            Variant::Rsb => {
                let ok_layout = self.encoder.len() == 3
                    && matches!(self.encoder[0], EncoderStageSpec::Stem { .. })
                    && self.encoder[1..].iter().all(|s| matches!(s, EncoderStageSpec::Residual { .. }));
                if !ok_layout {
                    return spec_err("rsb variant needs a stem followed by two residual stages".into());
                }
                if self.rsb_count() != RSB_COUNT {
                    return spec_err(format!(
                        "rsb variant needs {RSB_COUNT} residual blocks, found {}",
                        self.rsb_count()
                    ));
                }
            }
            Variant::Vgg => {
                if self.encoder.is_empty() || !self.encoder.iter().all(|s| matches!(s, EncoderStageSpec::Vgg { .. })) {
                    return spec_err("vgg variant needs only vgg encoder stages".into());
                }
            }
        }
        if self.decoder.len() != 3 {
            return spec_err(format!("decoder needs 3 blocks, found {}", self.decoder.len()));
        }

        let mut cur = FeatureShape {
            channels: 3,
            height: r.height,
            width: r.width,
        };
        let shrink = |s: FeatureShape, k: usize, st: usize, p: usize, c: usize| -> Result<FeatureShape> {
            match (conv_out(s.height, k, st, p), conv_out(s.width, k, st, p)) {
                (Some(h), Some(w)) if h > 0 && w > 0 => Ok(FeatureShape {
                    channels: c,
                    height: h,
                    width: w,
                }),
                _ => Err(Error::Spec(format!("a {k}x{k} stride-{st} layer does not fit {s}"))),
            }
        };
        let mut encoder = Vec::new();
        for (i, stage) in self.encoder.iter().enumerate() {
            match stage {
                EncoderStageSpec::Stem {
                    filters,
                    kernel,
                    down_filters,
                } => {
                    if kernel % 2 == 0 || *filters == 0 || *down_filters == 0 {
                        return spec_err(format!("stage {i}: stem needs an odd kernel and positive widths"));
                    }
                    cur = shrink(cur, *kernel, 1, kernel / 2, *filters)?;
                    cur = shrink(cur, 3, 2, 1, *down_filters)?;
                }
                EncoderStageSpec::Residual { blocks } => {
                    if blocks.is_empty() {
                        return spec_err(format!("stage {i}: empty residual stage"));
                    }
                    for (j, b) in blocks.iter().enumerate() {
                        if b.kernel % 2 == 0 || b.filters == 0 || b.bottleneck == 0 || !(1..=2).contains(&b.stride) {
                            return spec_err(format!("stage {i} block {j}: bad rsb geometry {b:?}"));
                        }
                        if b.skip == SkipMode::FromInput && (b.stride != 1 || cur.channels != b.filters) {
                            return spec_err(format!(
                                "stage {i} block {j}: an input shortcut needs stride 1 and {} == {} channels",
                                cur.channels, b.filters
                            ));
                        }
                        cur = shrink(cur, 1, b.stride, 0, b.filters)?;
                    }
                }
                EncoderStageSpec::Vgg { filters } => {
                    if filters.is_empty() || filters.contains(&0) {
                        return spec_err(format!("stage {i}: vgg stage needs positive widths"));
                    }
                    cur.channels = *filters.last().unwrap_or(&cur.channels);
                    if cur.height % 2 != 0 || cur.width % 2 != 0 {
                        return spec_err(format!("stage {i}: cannot pool odd feature map {cur}"));
                    }
                    cur = shrink(cur, 2, 2, 0, cur.channels)?;
                }
            }
            encoder.push(cur);
        }

        let skip_input = |cur: FeatureShape, skip: Option<usize>, at: &str| -> Result<FeatureShape> {
            let Some(s) = skip else { return Ok(cur) };
            let src = *encoder
                .get(s)
                .ok_or_else(|| Error::Spec(format!("{at}: skip from missing encoder stage {s}")))?;
            if (src.height, src.width) != (cur.height, cur.width) {
                return Err(Error::Spec(format!(
                    "{at}: skip from stage {s} is {src} but the decoder tensor is {cur}"
                )));
            }
            Ok(FeatureShape {
                channels: cur.channels + src.channels,
                ..cur
            })
        };
        let mut decoder = Vec::new();
        for (i, d) in self.decoder.iter().enumerate() {
            if d.filters == 0 || d.up_filters == 0 {
                return spec_err(format!("decoder block {i}: widths must be positive"));
            }
            cur = skip_input(cur, d.skip, &format!("decoder block {i}"))?;
            cur = FeatureShape {
                channels: d.up_filters,
                height: cur.height * 2,
                width: cur.width * 2,
            };
            decoder.push(cur);
        }
        cur = skip_input(cur, self.head.skip, "head")?;
        if let Some(up) = self.head.up_filters {
            if up == 0 {
                return spec_err("head: upsampling width must be positive".into());
            }
            cur = FeatureShape {
                channels: up,
                height: cur.height * 2,
                width: cur.width * 2,
            };
        }
        if self.head.kernel % 2 == 0 {
            return spec_err("head: kernel must be odd".into());
        }
        let output = FeatureShape {
            channels: self.num_output_channels,
            ..cur
        };
        if (output.height, output.width) != (r.height, r.width) {
            return spec_err(format!(
                "output is {}x{} for a {r} input; the resolution must be divisible by the encoder downsampling",
                output.width, output.height
            ));
        }
        Ok(ShapeTrace {
            encoder,
            decoder,
            output,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.trace().map(|_| ())
    }
}

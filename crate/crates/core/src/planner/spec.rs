use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const RECEPTIVE_FIELD: usize = 227;
pub const TOTAL_STRIDE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// `ln(1 + eˣ)`; smooth, used for finite-difference checks.
    Softplus,
    Identity,
}

impl Activation {
    fn code(self) -> char {
        match self {
            Activation::Relu => 'r',
            Activation::Softplus => 's',
            Activation::Identity => 'i',
        }
    }

    fn from_code(c: char) -> Option<Self> {
        match c {
            'r' => Some(Activation::Relu),
            's' => Some(Activation::Softplus),
            'i' => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        activation: Activation,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
    },
}

impl LayerSpec {
    pub fn conv(out_channels: usize, kernel: usize, stride: usize) -> Self {
        LayerSpec::Conv {
            out_channels,
            kernel,
            stride,
            padding: 0,
            activation: Activation::Relu,
        }
    }

    pub fn pool(kernel: usize, stride: usize) -> Self {
        LayerSpec::MaxPool { kernel, stride }
    }

    fn kernel_stride(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv { kernel, stride, .. } | LayerSpec::MaxPool { kernel, stride } => {
                (kernel, stride)
            }
        }
    }
}

/// A 1×1 convolution stage of the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadStage {
    pub out_channels: usize,
    pub activation: Activation,
}

/// Architecture of the fully convolutional planner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    in_channels: usize,
    conv_stack: Vec<LayerSpec>,
    head: [HeadStage; 3],
}

impl ModelSpec {
    pub fn new(in_channels: usize, conv_stack: Vec<LayerSpec>, head: [HeadStage; 3]) -> Result<Self> {
        if in_channels == 0 {
            return Err(Error::invalid("model needs at least one input channel"));
        }
        for layer in &conv_stack {
            let (k, s) = layer.kernel_stride();
            if k == 0 || s == 0 {
                return Err(Error::invalid("kernel and stride must be positive"));
            }
            if let LayerSpec::Conv {
                out_channels,
                padding,
                ..
            } = *layer
            {
                if out_channels == 0 {
                    return Err(Error::invalid("conv layers need output channels"));
                }
                if padding != 0 {
                    return Err(Error::invalid(
                        "padded convolutions break sliding-window equivalence",
                    ));
                }
            }
        }
        if head.iter().any(|h| h.out_channels == 0) {
            return Err(Error::invalid("head stages need output channels"));
        }
        let n_bins = head[2].out_channels;
        if n_bins != 1 && n_bins != 9 {
            return Err(Error::invalid(format!("n_bins must be 1 or 9, got {n_bins}")));
        }
        let spec = Self {
            in_channels,
            conv_stack,
            head,
        };
        let (rf, stride) = (spec.receptive_field(), spec.total_stride());
        if rf != RECEPTIVE_FIELD || stride != TOTAL_STRIDE {
            return Err(Error::invalid(format!(
                "architecture composes to receptive field {rf} and stride {stride}; need {RECEPTIVE_FIELD} and {TOTAL_STRIDE}"
            )));
        }
        Ok(spec)
    }

    /// Stack with the given conv widths and hidden head width.
    pub fn with_widths(widths: [usize; 5], hidden: usize, n_bins: usize, activation: Activation) -> Result<Self> {
        let conv = |out, k, s| LayerSpec::Conv {
            out_channels: out,
            kernel: k,
            stride: s,
            padding: 0,
            activation,
        };
        Self::new(
            3,
            vec![
                conv(widths[0], 11, 4),
                LayerSpec::pool(3, 2),
                conv(widths[1], 5, 1),
                LayerSpec::pool(3, 2),
                conv(widths[2], 3, 1),
                conv(widths[3], 3, 1),
                conv(widths[4], 3, 1),
                LayerSpec::pool(5, 2),
            ],
            [
                HeadStage {
                    out_channels: hidden,
                    activation,
                },
                HeadStage {
                    out_channels: hidden,
                    activation,
                },
                HeadStage {
                    out_channels: n_bins,
                    activation: Activation::Identity,
                },
            ],
        )
    }

    /// Default desk-scale planner.
    pub fn default_for(n_bins: usize) -> Result<Self> {
        Self::with_widths([24, 64, 96, 96, 64], 1024, n_bins, Activation::Relu)
    }

    /// Few-channel smooth variant for gradient checks.
    pub fn tiny(n_bins: usize) -> Result<Self> {
        Self::with_widths([2, 3, 3, 3, 2], 4, n_bins, Activation::Softplus)
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn conv_stack(&self) -> &[LayerSpec] {
        &self.conv_stack
    }

    pub fn head(&self) -> &[HeadStage; 3] {
        &self.head
    }

    pub fn n_bins(&self) -> usize {
        self.head[2].out_channels
    }

    pub fn receptive_field(&self) -> usize {
        self.conv_stack
            .iter()
            .rev()
            .fold(1, |r, l| {
                let (k, s) = l.kernel_stride();
                (r - 1) * s + k
            })
    }

    pub fn total_stride(&self) -> usize {
        self.conv_stack.iter().map(|l| l.kernel_stride().1).product()
    }

    /// Every weighted layer as `(in, out, kernel, stride, activation)`, head included.
    pub fn weighted_layers(&self) -> Vec<(usize, usize, usize, usize, Activation)> {
        let mut out = Vec::new();
        let mut c = self.in_channels;
        for l in &self.conv_stack {
            if let LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                activation,
                ..
            } = *l
            {
                out.push((c, out_channels, kernel, stride, activation));
                c = out_channels;
            }
        }
        for h in &self.head {
            out.push((c, h.out_channels, 1, 1, h.activation));
            c = h.out_channels;
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.weighted_layers()
            .iter()
            .map(|(i, o, k, _, _)| o * i * k * k + o)
            .sum()
    }

    /// Output grid of an `h × w` input.
    pub fn output_grid(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        if h < RECEPTIVE_FIELD || w < RECEPTIVE_FIELD {
            return None;
        }
        Some(((h - RECEPTIVE_FIELD) / TOTAL_STRIDE + 1, (w - RECEPTIVE_FIELD) / TOTAL_STRIDE + 1))
    }
}

/// Compact descriptor, e.g. `in3;c24k11s4p0r;m3s2;...|h1024r;h1024r;h9i`.
impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "in{}", self.in_channels)?;
        for l in &self.conv_stack {
            match *l {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    activation,
                } => write!(
                    f,
                    ";c{out_channels}k{kernel}s{stride}p{padding}{}",
                    activation.code()
                )?,
                LayerSpec::MaxPool { kernel, stride } => write!(f, ";m{kernel}s{stride}")?,
            }
        }
        f.write_str("|")?;
        let parts: Vec<String> = self
            .head
            .iter()
            .map(|h| format!("h{}{}", h.out_channels, h.activation.code()))
            .collect();
        f.write_str(&parts.join(";"))
    }
}

fn numbers(s: &str, keys: &[char]) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    let mut rest = s;
    for k in keys {
        rest = rest.strip_prefix(*k)?;
        let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        out.push(rest[..end].parse().ok()?);
        rest = &rest[end..];
    }
    rest.is_empty().then_some(out)
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("model descriptor", format!("cannot parse `{s}`"));
        let (stack, head) = s.split_once('|').ok_or_else(bad)?;
        let mut parts = stack.split(';');
        let in_channels = parts
            .next()
            .and_then(|p| p.strip_prefix("in"))
            .and_then(|p| p.parse().ok())
            .ok_or_else(bad)?;
        let mut conv_stack = Vec::new();
        for p in parts {
            if p.starts_with('c') {
                let act = p.chars().last().and_then(Activation::from_code).ok_or_else(bad)?;
                let n = numbers(&p[..p.len() - 1], &['c', 'k', 's', 'p']).ok_or_else(bad)?;
                conv_stack.push(LayerSpec::Conv {
                    out_channels: n[0],
                    kernel: n[1],
                    stride: n[2],
                    padding: n[3],
                    activation: act,
                });
            } else {
                let n = numbers(p, &['m', 's']).ok_or_else(bad)?;
                conv_stack.push(LayerSpec::pool(n[0], n[1]));
            }
        }
        let stages: Vec<HeadStage> = head
            .split(';')
            .map(|p| {
                let act = p.chars().last().and_then(Activation::from_code)?;
                let n = numbers(&p[..p.len() - 1], &['h'])?;
                Some(HeadStage {
                    out_channels: n[0],
                    activation: act,
                })
            })
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        let head: [HeadStage; 3] = stages.try_into().map_err(|_| bad())?;
        ModelSpec::new(in_channels, conv_stack, head)
    }
}

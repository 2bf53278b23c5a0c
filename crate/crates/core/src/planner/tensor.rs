use crate::error::{Error, Result};
use crate::scene::Image;

/// Row-major `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::invalid(format!(
                "tensor shape {shape:?} needs {count} samples, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let count = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; count],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `[H, W, C]` tensor scaled to `[0, 1]` from an 8-bit color image.
    pub fn from_image(image: &Image) -> Self {
        Self {
            shape: vec![image.height, image.width, image.channels],
            data: image.data.iter().map(|v| v / 255.0).collect(),
        }
    }

    /// `[H, W, C]` tensor from interleaved 8-bit samples.
    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            vec![height, width, 3],
            bytes.iter().map(|b| *b as f32 / 255.0).collect(),
        )
    }
}

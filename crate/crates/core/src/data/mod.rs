//! Images, degradation, datasets and fidelity metrics.

mod dataset;
pub mod metrics;
mod resize;
pub mod synth;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ColorType, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

pub use dataset::{Dataset, Sample};
pub use resize::resize_planes;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// An 8-bit sRGB image, samples interleaved as `RGBRGB...` row by row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageU8 {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(Error::Usage(format!(
                "{} bytes do not form a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(ImageU8 { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(x, y, c));
                }
            }
        }
        ImageU8 { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * 3 + c]
    }

    /// Top-left `width x height` window.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::Usage(format!(
                "crop {width}x{height}+{x0}+{y0} outside a {}x{} image",
                self.width, self.height
            )));
        }
        Ok(ImageU8::from_fn(width, height, |x, y, c| self.get(x0 + x, y0 + y, c)))
    }

    /// Largest top-left crop whose sides are multiples of `m`.
    pub fn mod_crop(&self, m: usize) -> Result<Self> {
        self.crop(0, 0, self.width - self.width % m, self.height - self.height % m)
    }

    /// Maps samples to `[-1, 1]` as a `1x3xHxW` tensor.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_fn(Shape::new(1, 3, self.height, self.width), |_, c, y, x| {
            to_model_range(self.get(x, y, c))
        })
    }

    /// Inverse of [`to_tensor`](Self::to_tensor) for batch item `n`; values
    /// outside `[-1, 1]` are clamped.
    pub fn from_tensor(t: &Tensor<f32>, n: usize) -> Result<Self> {
        let [batch, c, h, w] = t.shape().0;
        if c != 3 || n >= batch {
            return Err(Error::Usage(format!("cannot read image {n} from a {} tensor", t.shape())));
        }
        Ok(ImageU8::from_fn(w, h, |x, y, ch| from_model_range(t.at(n, ch, y, x))))
    }

    /// Bicubic resize to an explicit size.
    pub fn resize(&self, width: usize, height: usize) -> Result<Self> {
        let t = self.to_unit_planes();
        let r = resize_planes(&t, height, width)?;
        Ok(ImageU8::from_fn(width, height, |x, y, c| {
            r.at(0, c, y, x).round().clamp(0.0, 255.0) as u8
        }))
    }

    /// Bicubic downscale by an integer factor (sides must divide).
    pub fn downscale(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::Usage(format!(
                "a {}x{} image cannot be downscaled by {factor}",
                self.width, self.height
            )));
        }
        self.resize(self.width / factor, self.height / factor)
    }

    pub fn upscale(&self, factor: usize) -> Result<Self> {
        self.resize(self.width * factor, self.height * factor)
    }

    fn to_unit_planes(&self) -> Tensor<f32> {
        Tensor::from_fn(Shape::new(1, 3, self.height, self.width), |_, c, y, x| {
            self.get(x, y, c) as f32
        })
    }
}

pub fn to_model_range(v: u8) -> f32 {
    v as f32 / 127.5 - 1.0
}

/// Clamps to `[-1, 1]` and rounds half away from zero onto `0..=255`.
pub fn from_model_range(v: f32) -> u8 {
    let v = if v.is_nan() { -1.0 } else { v.clamp(-1.0, 1.0) };
    ((v + 1.0) * 127.5).round() as u8
}

/// Loads an 8-bit PNG; grey and alpha channels are expanded or dropped.
pub fn load_png(path: &Path) -> Result<ImageU8> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = ImageReader::with_format(BufReader::new(file), ImageFormat::Png);
    let img = reader.decode().map_err(|e| Error::Image {
        path: path.into(),
        detail: e.to_string(),
    })?;
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => {}
        other => {
            return Err(Error::Image {
                path: path.into(),
                detail: format!("unsupported sample format {other:?}; only 8-bit PNGs are read"),
            })
        }
    }
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageU8::new(w as usize, h as usize, rgb.into_raw())
}

/// Writes an RGB PNG atomically (temporary file, then rename).
pub fn save_png(img: &ImageU8, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    PngEncoder::new(&mut bytes)
        .write_image(&img.data, img.width as u32, img.height as u32, ExtendedColorType::Rgb8)
        .map_err(|e| Error::Image {
            path: path.into(),
            detail: e.to_string(),
        })?;
    crate::io::write_atomic(path, &bytes)
}

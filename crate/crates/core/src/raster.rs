//! Floating-point image rasters, bilinear resampling and colour conversion.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster data length {len} does not match {width}x{height}x{channels}")]
    LengthMismatch {
        len: usize,
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("sample {value} at index {index} is not a finite value in [0, 1]")]
    SampleOutOfRange { index: usize, value: f32 },
    #[error("raster dimensions must be positive, got {0}x{1}")]
    ZeroDimension(usize, usize),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("image I/O: {0}")]
    Image(#[from] image::ImageError),
}

/// Row-major image with 1 (gray) or 3 (RGB) interleaved channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRaster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageRaster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        if channels != 1 && channels != 3 {
            return Err(RasterError::Channels(channels));
        }
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension(width, height));
        }
        if data.len() != width * height * channels {
            return Err(RasterError::LengthMismatch {
                len: data.len(),
                width,
                height,
                channels,
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(RasterError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self, RasterError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Build from a closure returning the channel samples of pixel `(x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self, RasterError> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                data.extend_from_slice(&px[..channels.min(3)]);
            }
        }
        Self::new(width, height, channels, data)
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Rec. 601 luma for RGB, the sample itself for gray.
    pub fn luminance(&self, x: usize, y: usize) -> f64 {
        let p = self.pixel(x, y);
        if self.channels == 1 {
            p[0] as f64
        } else {
            0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
        }
    }

    pub fn channel_means(&self) -> Vec<f32> {
        let n = (self.width * self.height) as f64;
        (0..self.channels)
            .map(|c| {
                let s: f64 = self.data.iter().skip(c).step_by(self.channels).map(|&v| v as f64).sum();
                (s / n) as f32
            })
            .collect()
    }

    pub fn to_rgb(&self) -> ImageRaster {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self::from_parts_unchecked(self.width, self.height, 3, data)
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let img = image::open(path)?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &image::DynamicImage) -> Self {
        use image::DynamicImage::*;
        match img {
            ImageLuma8(g) => {
                let data = g.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
                Self::from_parts_unchecked(g.width() as usize, g.height() as usize, 1, data)
            }
            other => {
                let rgb = other.to_rgb8();
                let data = rgb.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
                Self::from_parts_unchecked(rgb.width() as usize, rgb.height() as usize, 3, data)
            }
        }
    }

    /// 8-bit bytes, rounding half up.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let bytes = self.to_rgb().to_bytes();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, bytes).expect("sized above")
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let (w, h) = (self.width as u32, self.height as u32);
        if self.channels == 1 {
            let img: GrayImage = ImageBuffer::from_raw(w, h, self.to_bytes()).expect("sized");
            img.save(path)?;
        } else {
            let img: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(w, h, self.to_bytes()).expect("sized");
            img.save(path)?;
        }
        Ok(())
    }
}

pub(crate) fn quantize(v: f32) -> u8 {
    (v as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Single-channel floating-point raster (masks, resampling grids).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        if data.len() != width * height {
            return Err(RasterError::LengthMismatch {
                len: data.len(),
                width,
                height,
                channels: 1,
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
        let img: ImageBuffer<Luma<u8>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, bytes).expect("sized");
        img.save(path)?;
        Ok(())
    }

    /// Bilinear sample at continuous source coordinates, clamped to the raster.
    pub(crate) fn sample_bilinear(&self, sx: f64, sy: f64) -> f32 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let sx = sx.clamp(0.0, max_x);
        let sy = sy.clamp(0.0, max_y);
        let x0 = sx.floor() as usize;
        let y0 = sy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = sx - x0 as f64;
        let fy = sy - y0 as f64;
        let top = self.get(x0, y0) as f64 * (1.0 - fx) + self.get(x1, y0) as f64 * fx;
        let bot = self.get(x0, y1) as f64 * (1.0 - fx) + self.get(x1, y1) as f64 * fx;
        (top * (1.0 - fy) + bot * fy) as f32
    }
}

/// Corner-aligned scale factor mapping destination index to source coordinate.
pub(crate) fn corner_scale(src: usize, dst: usize) -> f64 {
    if dst <= 1 {
        0.0
    } else {
        (src - 1) as f64 / (dst - 1) as f64
    }
}

/// Bilinear resize with corner-aligned sampling: the first and last output
/// samples coincide with the first and last input samples.
pub fn bilinear_resize(src: &GrayRaster, out_w: usize, out_h: usize) -> Result<GrayRaster, RasterError> {
    if out_w == 0 || out_h == 0 {
        return Err(RasterError::ZeroDimension(out_w, out_h));
    }
    if src.width == 0 || src.height == 0 || src.data.is_empty() {
        return Err(RasterError::ZeroDimension(src.width, src.height));
    }
    if src.width == out_w && src.height == out_h {
        return Ok(src.clone());
    }
    let kx = corner_scale(src.width, out_w);
    let ky = corner_scale(src.height, out_h);
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            data.push(src.sample_bilinear(x as f64 * kx, y as f64 * ky));
        }
    }
    Ok(GrayRaster {
        width: out_w,
        height: out_h,
        data,
    })
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// D65 white point.
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

pub fn srgb_pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Interleaved `(L, a, b)` samples, one triple per pixel.
#[derive(Debug, Clone)]
pub struct LabRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

pub fn rgb_to_lab(img: &ImageRaster) -> Result<LabRaster, RasterError> {
    if img.channels() != 3 {
        return Err(RasterError::Channels(img.channels()));
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| srgb_pixel_to_lab([p[0] as f64, p[1] as f64, p[2] as f64]))
        .collect();
    Ok(LabRaster {
        width: img.width(),
        height: img.height(),
        data,
    })
}

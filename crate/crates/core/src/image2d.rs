//! Plain float image and boolean mask buffers.
//!
//! All pixel data in the pipeline flows through these two types: rendered
//! view channels, UV-space textures, confidence maps and depth buffers.
//! Values are row-major, `channels` floats per pixel.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "expected {} floats for {}x{}x{}, got {}",
                width * height * channels,
                width,
                height,
                channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = self.index(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[f32]) {
        debug_assert_eq!(value.len(), self.channels);
        let i = self.index(x, y);
        self.data[i..i + self.channels].copy_from_slice(value);
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.index(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let i = self.index(x, y) + c;
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Bilinear sample at continuous pixel coordinates, where (0.5, 0.5) is
    /// the center of the top-left pixel. Coordinates are clamped to the
    /// image border. `out` must hold `channels` floats.
    pub fn sample_bilinear(&self, x: f32, y: f32, out: &mut [f32]) {
        let fx = (x - 0.5).clamp(0.0, (self.width - 1) as f32);
        let fy = (y - 0.5).clamp(0.0, (self.height - 1) as f32);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f32;
        let ty = fy - y0 as f32;

        let p00 = self.pixel(x0, y0);
        let p10 = self.pixel(x1, y0);
        let p01 = self.pixel(x0, y1);
        let p11 = self.pixel(x1, y1);
        for c in 0..self.channels {
            let top = p00[c] + (p10[c] - p00[c]) * tx;
            let bot = p01[c] + (p11[c] - p01[c]) * tx;
            out[c] = top + (bot - top) * ty;
        }
    }
}

/// Per-pixel boolean coverage mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_at_pixel_centers_is_exact() {
        let mut img = Image::new(4, 4, 2);
        for y in 0..4 {
            for x in 0..4 {
                img.set_pixel(x, y, &[x as f32, y as f32 * 10.0]);
            }
        }
        let mut out = [0.0; 2];
        img.sample_bilinear(2.5, 1.5, &mut out);
        assert_eq!(out, [2.0, 10.0]);
    }

    #[test]
    fn bilinear_midpoint_averages() {
        let mut img = Image::new(2, 1, 1);
        img.set_pixel(0, 0, &[0.0]);
        img.set_pixel(1, 0, &[1.0]);
        let mut out = [0.0];
        img.sample_bilinear(1.0, 0.5, &mut out);
        assert!((out[0] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn from_data_rejects_bad_shape() {
        assert!(Image::from_data(2, 2, 3, vec![0.0; 11]).is_err());
    }
}

//! Float image buffers, bilinear sampling and 8/16-bit PNG boundaries.
//!
//! Pixel `(x, y)` has its centre at integer coordinate `(x, y)`, matching the
//! projection conventions in [`crate::geom`]. Colour values are stored as
//! display-encoded (sRGB) floats in `[0, 1]`; PNG I/O only quantizes.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb, Rgba};

use crate::error::{Error, Result};

/// Interleaved `f32` image with an arbitrary channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, value: &[f32]) -> Self {
        let mut img = Image::new(width, height, value.len());
        for px in img.data.chunks_exact_mut(value.len()) {
            px.copy_from_slice(value);
        }
        img
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "buffer of {} floats does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Image {
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

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Rows as mutable slices, for parallel fills.
    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f32> {
        let stride = self.width * self.channels;
        self.data.chunks_exact_mut(stride)
    }

    /// Bilinear sample that wraps horizontally and clamps vertically (ERP layout).
    #[inline]
    pub fn sample_erp(&self, u: f64, v: f64, out: &mut [f32]) {
        let taps = erp_taps(self.width, self.height, u, v);
        self.blend_taps(&taps, out);
    }

    /// Bilinear sample with edge clamping on both axes.
    #[inline]
    pub fn sample_clamped(&self, u: f64, v: f64, out: &mut [f32]) {
        let taps = clamped_taps(self.width, self.height, u, v);
        self.blend_taps(&taps, out);
    }

    #[inline]
    fn blend_taps(&self, taps: &[(usize, f64); 4], out: &mut [f32]) {
        let c = self.channels;
        for (ch, o) in out.iter_mut().enumerate().take(c) {
            let mut acc = 0.0f64;
            for &(idx, w) in taps {
                acc += w * self.data[idx * c + ch] as f64;
            }
            *o = acc as f32;
        }
    }

    /// Bilinear sample that ignores taps whose `mask` entry is false and
    /// renormalizes the remaining weights. Returns `false` (leaving `out`
    /// untouched) when no tap is usable or the coordinate is outside the image.
    pub fn sample_masked(&self, u: f64, v: f64, mask: &[bool], out: &mut [f32]) -> bool {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(u >= -0.5 && u <= w - 0.5 && v >= -0.5 && v <= h - 0.5) {
            return false;
        }
        let taps = clamped_taps(self.width, self.height, u, v);
        let mut wsum = 0.0f64;
        let mut acc = [0.0f64; 4];
        let c = self.channels;
        for &(idx, wt) in &taps {
            if wt > 0.0 && mask[idx] {
                wsum += wt;
                for (a, &v) in acc.iter_mut().zip(&self.data[idx * c..idx * c + c.min(4)]) {
                    *a += wt * v as f64;
                }
            }
        }
        if wsum <= 0.0 {
            return false;
        }
        for ch in 0..c.min(4) {
            out[ch] = (acc[ch] / wsum) as f32;
        }
        true
    }

    /// Writes an 8-bit RGB PNG (channels beyond the third are ignored).
    pub fn save_rgb_png(&self, path: &Path) -> Result<()> {
        if self.channels < 3 {
            return Err(Error::shape("RGB export needs at least 3 channels"));
        }
        let mut buf = ImageBuffer::<Rgb<u8>, Vec<u8>>::new(self.width as u32, self.height as u32);
        for (x, y, p) in buf.enumerate_pixels_mut() {
            let s = self.pixel(x as usize, y as usize);
            *p = Rgb([quantize(s[0]), quantize(s[1]), quantize(s[2])]);
        }
        buf.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn save_rgba_png(&self, path: &Path) -> Result<()> {
        if self.channels != 4 {
            return Err(Error::shape("RGBA export needs exactly 4 channels"));
        }
        let mut buf = ImageBuffer::<Rgba<u8>, Vec<u8>>::new(self.width as u32, self.height as u32);
        for (x, y, p) in buf.enumerate_pixels_mut() {
            let s = self.pixel(x as usize, y as usize);
            *p = Rgba([quantize(s[0]), quantize(s[1]), quantize(s[2]), quantize(s[3])]);
        }
        buf.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_rgb_png(path: &Path) -> Result<Image> {
        let img = open_image(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        let data = img.into_raw().into_iter().map(dequantize).collect();
        Image::from_vec(w as usize, h as usize, 3, data)
    }

    pub fn load_rgba_png(path: &Path) -> Result<Image> {
        let img = open_image(path)?.to_rgba8();
        let (w, h) = img.dimensions();
        let data = img.into_raw().into_iter().map(dequantize).collect();
        Image::from_vec(w as usize, h as usize, 4, data)
    }
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(image::open(path)?)
}

#[inline]
pub fn quantize(x: f32) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn dequantize(b: u8) -> f32 {
    b as f32 / 255.0
}

#[inline]
fn erp_taps(w: usize, h: usize, u: f64, v: f64) -> [(usize, f64); 4] {
    let x0f = u.floor();
    let fx = u - x0f;
    let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
    let x1 = (x0 + 1) % w;
    let (y0, y1, fy) = clamp_axis(v, h);
    [
        (y0 * w + x0, (1.0 - fx) * (1.0 - fy)),
        (y0 * w + x1, fx * (1.0 - fy)),
        (y1 * w + x0, (1.0 - fx) * fy),
        (y1 * w + x1, fx * fy),
    ]
}

#[inline]
fn clamped_taps(w: usize, h: usize, u: f64, v: f64) -> [(usize, f64); 4] {
    let (x0, x1, fx) = clamp_axis(u, w);
    let (y0, y1, fy) = clamp_axis(v, h);
    [
        (y0 * w + x0, (1.0 - fx) * (1.0 - fy)),
        (y0 * w + x1, fx * (1.0 - fy)),
        (y1 * w + x0, (1.0 - fx) * fy),
        (y1 * w + x1, fx * fy),
    ]
}

#[inline]
fn clamp_axis(t: f64, n: usize) -> (usize, usize, f64) {
    let max = (n - 1) as f64;
    let t = t.clamp(0.0, max);
    let i0 = t.floor();
    let f = t - i0;
    let i0 = i0 as usize;
    (i0, (i0 + 1).min(n - 1), f)
}

/// Bilinear tap indices and weights for an ERP lookup, exposed for gradient
/// scatter in the renderer.
#[inline]
pub(crate) fn erp_bilinear_taps(w: usize, h: usize, u: f64, v: f64) -> [(usize, f64); 4] {
    erp_taps(w, h, u, v)
}

/// Per-pixel metric depth (meters along the ray, `+inf` for misses).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Counts per inverse meter in 16-bit depth PNGs: 0.3 m (the minimum scene
/// clearance) maps to full scale, `+inf` maps to 0.
pub const INVERSE_DEPTH_SCALE: f64 = 65535.0 * 0.3;

impl DepthMap {
    pub fn new(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            data: vec![f64::INFINITY; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "depth buffer of {} values does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(DepthMap {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f64) {
        self.data[y * self.width + x] = d;
    }

    /// Writes a 16-bit single channel PNG of `round(scale / depth)`.
    pub fn save_inverse_png(&self, path: &Path, scale: f64) -> Result<()> {
        let mut buf = ImageBuffer::<Luma<u16>, Vec<u16>>::new(self.width as u32, self.height as u32);
        for (x, y, p) in buf.enumerate_pixels_mut() {
            let d = self.get(x as usize, y as usize);
            let q = (scale / d).round().clamp(0.0, 65535.0);
            *p = Luma([q as u16]);
        }
        buf.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_inverse_png(path: &Path, scale: f64) -> Result<DepthMap> {
        let img = open_image(path)?.to_luma16();
        let (w, h) = img.dimensions();
        let data = img
            .into_raw()
            .into_iter()
            .map(|q| if q == 0 { f64::INFINITY } else { scale / q as f64 })
            .collect();
        DepthMap::from_vec(w as usize, h as usize, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erp_sampling_wraps_horizontally() {
        let mut img = Image::new(4, 2, 1);
        img.pixel_mut(0, 0)[0] = 1.0;
        img.pixel_mut(3, 0)[0] = 3.0;
        let mut out = [0.0f32];
        img.sample_erp(3.5, 0.0, &mut out);
        assert_eq!(out[0], 2.0);
        img.sample_erp(-0.5, 0.0, &mut out);
        assert_eq!(out[0], 2.0);
        // clamped vertically
        img.sample_erp(0.0, -3.0, &mut out);
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn masked_sampling_renormalizes() {
        let img = Image::from_vec(2, 1, 1, vec![1.0, 5.0]).unwrap();
        let mut out = [0.0f32];
        assert!(img.sample_masked(0.5, 0.0, &[true, false], &mut out));
        assert_eq!(out[0], 1.0);
        assert!(!img.sample_masked(0.5, 0.0, &[false, false], &mut out));
        assert!(!img.sample_masked(2.0, 0.0, &[true, true], &mut out));
    }

    #[test]
    fn png_quantization_bound() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let vals: Vec<f32> = (0..4 * 3 * 4).map(|i| (i as f32 * 0.0371) % 1.0).collect();
        let img = Image::from_vec(4, 3, 4, vals).unwrap();
        img.save_rgba_png(&p).unwrap();
        let back = Image::load_rgba_png(&p).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-7);
        }
    }

    #[test]
    fn inverse_depth_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        let d = DepthMap::from_vec(3, 1, vec![1.0, f64::INFINITY, 0.3]).unwrap();
        d.save_inverse_png(&p, INVERSE_DEPTH_SCALE).unwrap();
        let back = DepthMap::load_inverse_png(&p, INVERSE_DEPTH_SCALE).unwrap();
        assert!((back.get(0, 0) - 1.0).abs() < 1e-4);
        assert!(back.get(1, 0).is_infinite());
        assert!((back.get(2, 0) - 0.3).abs() < 1e-6);
    }
}

//! Minimal 8-bit frame container.
//!
//! Frames are stored interleaved, row-major, with either one (gray) or three
//! (RGB) channels. Decoding from files lives in [`crate::dataset`].

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return invalid("image must be non-empty");
        }
        if channels != 1 && channels != 3 {
            return invalid(format!("unsupported channel count {channels}"));
        }
        if data.len() != width as usize * height as usize * channels as usize {
            return invalid(format!(
                "buffer length {} does not match {width}x{height}x{channels}",
                data.len()
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// A frame filled with a single RGB color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn is_color(&self) -> bool {
        self.channels == 3
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    /// RGB value at `(x, y)`. Gray frames replicate the intensity.
    #[inline]
    pub fn rgb(&self, x: u32, y: u32) -> [u8; 3] {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize;
        if self.channels == 3 {
            [self.data[idx], self.data[idx + 1], self.data[idx + 2]]
        } else {
            let v = self.data[idx];
            [v, v, v]
        }
    }

    #[inline]
    pub fn put_rgb(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize;
        if self.channels == 3 {
            self.data[idx..idx + 3].copy_from_slice(&rgb);
        } else {
            self.data[idx] = luma(rgb).round().clamp(0.0, 255.0) as u8;
        }
    }

    /// Bilinear sample at continuous pixel coordinates, where pixel `(i, j)`
    /// has its center at `(i + 0.5, j + 0.5)`. Coordinates outside the frame
    /// replicate the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f64; 3] {
        let fx = x - 0.5;
        let fy = y - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let ax = fx - x0;
        let ay = fy - y0;
        let max_x = self.width as i64 - 1;
        let max_y = self.height as i64 - 1;
        let cx = |v: i64| v.clamp(0, max_x) as u32;
        let cy = |v: i64| v.clamp(0, max_y) as u32;
        let (xi, yi) = (x0 as i64, y0 as i64);
        let p00 = self.rgb(cx(xi), cy(yi));
        let p10 = self.rgb(cx(xi + 1), cy(yi));
        let p01 = self.rgb(cx(xi), cy(yi + 1));
        let p11 = self.rgb(cx(xi + 1), cy(yi + 1));
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] as f64 * (1.0 - ax) + p10[c] as f64 * ax;
            let bottom = p01[c] as f64 * (1.0 - ax) + p11[c] as f64 * ax;
            out[c] = top * (1.0 - ay) + bottom * ay;
        }
        out
    }
}

/// ITU-R BT.601 luma.
#[inline]
pub fn luma(rgb: [u8; 3]) -> f64 {
    0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(Image::new(0, 4, 3, vec![]).is_err());
        assert!(Image::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(Image::new(2, 2, 3, vec![0; 11]).is_err());
        assert!(Image::new(2, 2, 1, vec![0; 4]).is_ok());
    }

    #[test]
    fn bilinear_replicates_border() {
        let mut img = Image::filled(2, 1, [0, 0, 0]);
        img.put_rgb(1, 0, [200, 100, 50]);
        assert_eq!(img.sample_bilinear(-10.0, 0.5), [0.0, 0.0, 0.0]);
        assert_eq!(img.sample_bilinear(50.0, 0.5), [200.0, 100.0, 50.0]);
        let mid = img.sample_bilinear(1.0, 0.5);
        assert!((mid[0] - 100.0).abs() < 1e-12);
    }
}

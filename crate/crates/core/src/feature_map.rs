//! Multi-channel real grids.

use crate::error::{invalid, Result};

/// What the channels of a [`FeatureMap`] mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelLayout {
    /// Untyped channels (synthetic or test data).
    Generic,
    /// FHOG channels only.
    Hog,
    /// FHOG, then color names, then one cell-averaged grayscale channel.
    HogColorGray {
        hog: usize,
        color_names: usize,
        gray: usize,
    },
}

/// A `W x H x D` real grid, stored channel-major: channel `d` occupies the
/// contiguous plane `data[d*W*H .. (d+1)*W*H]`, each plane row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    cell_size: usize,
    layout: ChannelLayout,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            cell_size: 1,
            layout: ChannelLayout::Generic,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return invalid("feature map dimensions must be positive");
        }
        if data.len() != width * height * channels {
            return invalid(format!(
                "feature buffer length {} does not match {width}x{height}x{channels}",
                data.len()
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            cell_size: 1,
            layout: ChannelLayout::Generic,
            data,
        })
    }

    pub fn with_cell_size(mut self, cell_size: usize) -> Self {
        self.cell_size = cell_size;
        self
    }

    pub fn with_layout(mut self, layout: ChannelLayout) -> Self {
        self.layout = layout;
        self
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

    pub fn cell_size(&self) -> usize {
        self.cell_size
    }

    pub fn layout(&self) -> ChannelLayout {
        self.layout
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: usize) -> f64 {
        self.data[d * self.plane_len() + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: usize, v: f64) {
        let n = self.plane_len();
        self.data[d * n + y * self.width + x] = v;
    }

    pub fn channel(&self, d: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[d * n..(d + 1) * n]
    }

    pub fn channel_mut(&mut self, d: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[d * n..(d + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &FeatureMap) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Cyclic shift that moves content by `(dx, dy)`: `out[p] = self[p - (dx, dy)]`.
    pub fn cyclic_shift(&self, dx: isize, dy: isize) -> FeatureMap {
        let (w, h) = (self.width as isize, self.height as isize);
        let mut out = self.clone();
        for d in 0..self.channels {
            let src = self.channel(d);
            let dst = out.channel_mut(d);
            for y in 0..h {
                let sy = (y - dy).rem_euclid(h);
                for x in 0..w {
                    let sx = (x - dx).rem_euclid(w);
                    dst[(y * w + x) as usize] = src[(sy * w + sx) as usize];
                }
            }
        }
        out
    }
}

/// Signed displacement of a cyclic index: indices past the midpoint wrap to
/// negative values.
#[inline]
pub fn wrapped_offset(index: usize, len: usize) -> isize {
    if index > len / 2 {
        index as isize - len as isize
    } else {
        index as isize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_shift_moves_content() {
        let mut m = FeatureMap::zeros(5, 3, 1);
        m.set(0, 0, 0, 1.0);
        let s = m.cyclic_shift(2, 1);
        assert_eq!(s.get(2, 1, 0), 1.0);
        let back = s.cyclic_shift(-2, -1);
        assert_eq!(back, m);
        let wrap = m.cyclic_shift(-1, 0);
        assert_eq!(wrap.get(4, 0, 0), 1.0);
    }

    #[test]
    fn wrapped_offsets() {
        assert_eq!(wrapped_offset(0, 8), 0);
        assert_eq!(wrapped_offset(4, 8), 4);
        assert_eq!(wrapped_offset(5, 8), -3);
        assert_eq!(wrapped_offset(2, 5), 2);
        assert_eq!(wrapped_offset(3, 5), -2);
    }
}

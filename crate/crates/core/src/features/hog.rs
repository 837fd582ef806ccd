//! 31-channel FHOG descriptor (Felzenszwalb et al. variant of HOG).
//!
//! Per pixel, the gradient of the color channel with the largest magnitude
//! is snapped to one of 18 signed orientations and its magnitude is
//! bilinearly voted into the four surrounding cells. Each cell histogram is
//! then normalized by the energy of the four 2x2 cell blocks that contain
//! it, truncated at 0.2, and summarized as 18 contrast-sensitive bins,
//! 9 contrast-insensitive bins and 4 texture-energy channels.

use std::sync::OnceLock;

use crate::feature_map::{ChannelLayout, FeatureMap};

pub const SIGNED_BINS: usize = 18;
pub const UNSIGNED_BINS: usize = 9;
pub const TEXTURE_CHANNELS: usize = 4;
pub const HOG_CHANNELS: usize = SIGNED_BINS + UNSIGNED_BINS + TEXTURE_CHANNELS;

const TRUNCATION: f64 = 0.2;
const NORM_EPS: f64 = 1e-4;
const TEXTURE_SCALE: f64 = 0.2357;

/// Unit vectors of the 9 orientation half-planes, `20` degrees apart.
fn orientation_basis() -> &'static [(f64, f64); UNSIGNED_BINS] {
    static BASIS: OnceLock<[(f64, f64); UNSIGNED_BINS]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut out = [(0.0, 0.0); UNSIGNED_BINS];
        for (o, v) in out.iter_mut().enumerate() {
            let angle = o as f64 * std::f64::consts::PI / UNSIGNED_BINS as f64;
            *v = (angle.cos(), angle.sin());
        }
        out
    })
}

/// Signed orientation bin of a gradient: the basis vector with the largest
/// absolute projection, offset by 9 when the projection is negative.
#[inline]
pub fn orientation_bin(dx: f64, dy: f64) -> usize {
    bin_in(orientation_basis(), dx, dy)
}

#[inline(always)]
fn bin_in(basis: &[(f64, f64); UNSIGNED_BINS], dx: f64, dy: f64) -> usize {
    let mut best = 0.0;
    let mut bin = 0;
    for (o, (ux, uy)) in basis.iter().enumerate() {
        let dot = ux * dx + uy * dy;
        if dot > best {
            best = dot;
            bin = o;
        } else if -dot > best {
            best = -dot;
            bin = o + UNSIGNED_BINS;
        }
    }
    bin
}

/// A `width x height` grid of pixel values with up to three planes (row-major,
/// values in 0..=255).
pub struct PixelPlanes<'a> {
    pub width: usize,
    pub height: usize,
    pub planes: &'a [Vec<f64>],
}

impl PixelPlanes<'_> {
    /// Gradient `(dx, dy)` of the dominant channel at `(x, y)`, with
    /// replicated borders.
    #[inline]
    pub fn gradient(&self, x: usize, y: usize) -> (f64, f64) {
        let xl = x.saturating_sub(1);
        let xr = (x + 1).min(self.width - 1);
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(self.height - 1);
        let mut best = (0.0, 0.0);
        let mut best_mag = -1.0;
        for p in self.planes {
            let dx = p[y * self.width + xr] - p[y * self.width + xl];
            let dy = p[yd * self.width + x] - p[yu * self.width + x];
            let mag = dx * dx + dy * dy;
            if mag > best_mag {
                best_mag = mag;
                best = (dx, dy);
            }
        }
        best
    }
}

/// Cell indices and bilinear weights of the two cells each pixel coordinate
/// votes into; out-of-range cells get zero weight.
fn vote_taps(pixels: usize, cells: usize, cell_size: usize) -> Vec<[(usize, f64); 2]> {
    let cs = cell_size as f64;
    (0..pixels)
        .map(|p| {
            let pos = (p as f64 + 0.5) / cs - 0.5;
            let lo = pos.floor();
            let w1 = pos - lo;
            let lo = lo as isize;
            let tap = |c: isize, w: f64| {
                if c >= 0 && (c as usize) < cells {
                    (c as usize, w)
                } else {
                    (0, 0.0)
                }
            };
            [tap(lo, 1.0 - w1), tap(lo + 1, w1)]
        })
        .collect()
}

/// Raw (unnormalized) signed orientation histograms, `cells_x * cells_y * 18`
/// laid out cell-major.
pub fn cell_histograms(pixels: &PixelPlanes<'_>, cell_size: usize) -> (usize, usize, Vec<f64>) {
    let cells_x = pixels.width / cell_size;
    let cells_y = pixels.height / cell_size;
    let mut hist = vec![0.0; cells_x * cells_y * SIGNED_BINS];
    let xt = vote_taps(cells_x * cell_size, cells_x, cell_size);
    let yt = vote_taps(cells_y * cell_size, cells_y, cell_size);
    let basis = orientation_basis();
    for (y, ty) in yt.iter().enumerate() {
        for (x, tx) in xt.iter().enumerate() {
            let (dx, dy) = pixels.gradient(x, y);
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let bin = bin_in(basis, dx, dy);
            for &(cy, wy) in ty {
                for &(cx, wx) in tx {
                    hist[(cy * cells_x + cx) * SIGNED_BINS + bin] += wx * wy * mag;
                }
            }
        }
    }
    (cells_x, cells_y, hist)
}

/// Block-normalized FHOG features written into channels `0..31` of `out`.
pub fn fhog_into(pixels: &PixelPlanes<'_>, cell_size: usize, out: &mut FeatureMap) {
    let (cx, cy, hist) = cell_histograms(pixels, cell_size);
    debug_assert_eq!((cx, cy), (out.width(), out.height()));
    let energy: Vec<f64> = hist
        .chunks(SIGNED_BINS)
        .map(|h| {
            (0..UNSIGNED_BINS)
                .map(|o| {
                    let s = h[o] + h[o + UNSIGNED_BINS];
                    s * s
                })
                .sum()
        })
        .collect();
    let e = |x: isize, y: isize| {
        let xc = x.clamp(0, cx as isize - 1) as usize;
        let yc = y.clamp(0, cy as isize - 1) as usize;
        energy[yc * cx + xc]
    };
    let block = |x: isize, y: isize| 1.0 / (e(x, y) + e(x + 1, y) + e(x, y + 1) + e(x + 1, y + 1) + NORM_EPS).sqrt();

    for y in 0..cy {
        for x in 0..cx {
            let (xi, yi) = (x as isize, y as isize);
            let norms = [
                block(xi, yi),
                block(xi - 1, yi),
                block(xi, yi - 1),
                block(xi - 1, yi - 1),
            ];
            let h = &hist[(y * cx + x) * SIGNED_BINS..(y * cx + x + 1) * SIGNED_BINS];
            let mut texture = [0.0; TEXTURE_CHANNELS];
            for (o, &hv) in h.iter().enumerate() {
                let mut acc = 0.0;
                for (t, n) in norms.iter().enumerate() {
                    let v = (hv * n).min(TRUNCATION);
                    acc += v;
                    texture[t] += v;
                }
                out.set(x, y, o, 0.5 * acc);
            }
            for o in 0..UNSIGNED_BINS {
                let sum = h[o] + h[o + UNSIGNED_BINS];
                let acc: f64 = norms.iter().map(|n| (sum * n).min(TRUNCATION)).sum();
                out.set(x, y, SIGNED_BINS + o, 0.5 * acc);
            }
            for (t, tv) in texture.iter().enumerate() {
                out.set(x, y, SIGNED_BINS + UNSIGNED_BINS + t, TEXTURE_SCALE * tv);
            }
        }
    }
}

/// Standalone FHOG map (`Hog` layout).
pub fn fhog(pixels: &PixelPlanes<'_>, cell_size: usize) -> FeatureMap {
    let cx = pixels.width / cell_size;
    let cy = pixels.height / cell_size;
    let mut out = FeatureMap::zeros(cx, cy, HOG_CHANNELS)
        .with_cell_size(cell_size)
        .with_layout(ChannelLayout::Hog);
    fhog_into(pixels, cell_size, &mut out);
    out
}

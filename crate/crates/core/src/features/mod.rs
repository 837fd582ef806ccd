//! Patch extraction and the joint feature map of a patch: FHOG, color names
//! and a grayscale channel on a grid of square cells.

pub mod color_names;
pub mod hog;

use crate::error::{invalid, Result};
use crate::feature_map::{ChannelLayout, FeatureMap};
use crate::geometry::{Point, Rect, Size};
use crate::image::{luma, Image};

pub const DEFAULT_CELL_SIZE: usize = 4;
/// Upper bound on `W * H` of the translation feature grid.
pub const MAX_GRID_CELLS: usize = 64 * 64;
/// Minimum cells per side of any feature grid.
pub const MIN_GRID_SIDE: usize = 4;
pub const FEATURE_CHANNELS: usize = hog::HOG_CHANNELS + color_names::COLOR_NAMES + 1;

pub const LMCF_LAYOUT: ChannelLayout = ChannelLayout::HogColorGray {
    hog: hog::HOG_CHANNELS,
    color_names: color_names::COLOR_NAMES,
    gray: 1,
};

/// A resampled image region. `source_rect` is the region it was taken from,
/// in frame coordinates, and may extend past the frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePatch {
    pub pixels: Image,
    pub source_rect: Rect,
}

impl ImagePatch {
    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }
}

/// Fixed crop geometry of a tracked target: the padded search window at
/// unit scale and the canonical template it is resampled to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchGeometry {
    pub window: Size,
    pub template: (u32, u32),
    pub cell_size: usize,
}

impl PatchGeometry {
    pub fn new(base_size: Size, padding: f64, cell_size: usize) -> Result<Self> {
        if !base_size.is_positive() {
            return invalid(format!(
                "target size must be positive, got {}x{}",
                base_size.width, base_size.height
            ));
        }
        if !(padding >= 0.0) || !padding.is_finite() {
            return invalid(format!("padding must be non-negative, got {padding}"));
        }
        if cell_size == 0 {
            return invalid("cell size must be positive");
        }
        let window = base_size.scaled(1.0 + padding);
        let cs = cell_size as f64;
        let cells = (window.width / cs) * (window.height / cs);
        let shrink = if cells > MAX_GRID_CELLS as f64 {
            (cells / MAX_GRID_CELLS as f64).sqrt()
        } else {
            1.0
        };
        let side = |len: f64| {
            let c = (len / shrink / cs).round().max(MIN_GRID_SIDE as f64) as u32;
            c * cell_size as u32
        };
        let mut template = (side(window.width), side(window.height));
        // rounding can push the grid one row or column past the cap
        while (template.0 as usize / cell_size) * (template.1 as usize / cell_size) > MAX_GRID_CELLS {
            if template.0 >= template.1 {
                template.0 -= cell_size as u32;
            } else {
                template.1 -= cell_size as u32;
            }
        }
        Ok(Self {
            window,
            template,
            cell_size,
        })
    }

    pub fn grid(&self) -> (usize, usize) {
        (
            self.template.0 as usize / self.cell_size,
            self.template.1 as usize / self.cell_size,
        )
    }

    /// Frame pixels spanned by one feature cell at `scale`, per axis.
    pub fn cell_pixels(&self, scale: f64) -> (f64, f64) {
        let cs = self.cell_size as f64;
        (
            self.window.width * scale / self.template.0 as f64 * cs,
            self.window.height * scale / self.template.1 as f64 * cs,
        )
    }

    pub fn crop(&self, frame: &Image, center: Point, scale: f64) -> Result<ImagePatch> {
        if !(scale > 0.0) || !scale.is_finite() {
            return invalid(format!("scale must be positive, got {scale}"));
        }
        crop_resampled(frame, center, self.window.scaled(scale), self.template)
    }
}

/// Crop the padded region around `center` at `scale` and resample it to the
/// canonical template size `base_size * (1 + padding)` (capped so the
/// feature grid stays within [`MAX_GRID_CELLS`]).
pub fn crop_patch(frame: &Image, center: Point, base_size: Size, scale: f64, padding: f64) -> Result<ImagePatch> {
    PatchGeometry::new(base_size, padding, DEFAULT_CELL_SIZE)?.crop(frame, center, scale)
}

/// Resample the `source` region centered at `center` into an `out` sized
/// image. Pixels outside the frame replicate the border; downsampling
/// averages a supersampled grid.
pub fn crop_resampled(frame: &Image, center: Point, source: Size, out: (u32, u32)) -> Result<ImagePatch> {
    if !source.is_positive() {
        return invalid("crop region must have positive size");
    }
    if out.0 == 0 || out.1 == 0 {
        return invalid("output patch must be non-empty");
    }
    if !(center.x.is_finite() && center.y.is_finite()) {
        return invalid("crop center must be finite");
    }
    let step_x = source.width / out.0 as f64;
    let step_y = source.height / out.1 as f64;
    let kx = step_x.ceil().max(1.0) as usize;
    let ky = step_y.ceil().max(1.0) as usize;
    let norm = 1.0 / (kx * ky) as f64;
    let channels = if frame.is_color() { 3 } else { 1 };
    let x0 = center.x - source.width / 2.0;
    let y0 = center.y - source.height / 2.0;
    // Bilinear sampling is separable, so the supersampled grid is resolved
    // as a horizontal pass over the rows it touches and a vertical pass.
    let xs = pixel_weights(x0, step_x, out.0 as usize, kx, frame.width());
    let ys = pixel_weights(y0, step_y, out.1 as usize, ky, frame.height());
    let row_lo = ys.iter().flatten().map(|t| t.0).min().unwrap_or(0);
    let row_hi = ys.iter().flatten().map(|t| t.0).max().unwrap_or(0);
    let (ow, fw) = (out.0 as usize, frame.width() as usize);
    let raw = frame.as_raw();
    let mut rows = vec![0.0; (row_hi - row_lo + 1) * ow * channels];
    for (r, row) in (row_lo..=row_hi).zip(rows.chunks_mut(ow * channels)) {
        let src = &raw[r * fw * channels..(r + 1) * fw * channels];
        for (acc, taps) in row.chunks_mut(channels).zip(&xs) {
            for &(a, w) in taps {
                for (v, &p) in acc.iter_mut().zip(&src[a * channels..(a + 1) * channels]) {
                    *v += p as f64 * w;
                }
            }
        }
    }
    let mut data = Vec::with_capacity(ow * out.1 as usize * channels);
    let mut acc = vec![0.0; ow * channels];
    for taps in &ys {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for &(r, w) in taps {
            let src = &rows[(r - row_lo) * ow * channels..(r - row_lo + 1) * ow * channels];
            for (v, p) in acc.iter_mut().zip(src) {
                *v += p * w;
            }
        }
        data.extend(acc.iter().map(|v| (v * norm).round().clamp(0.0, 255.0) as u8));
    }
    Ok(ImagePatch {
        pixels: Image::new(out.0, out.1, channels as u8, data)?,
        source_rect: Rect::new(x0, y0, source.width, source.height),
    })
}

/// Per output sample along one axis, the clamped source indices touched by
/// its `k` bilinear sub-samples (as in [`Image::sample_bilinear`]) with their
/// summed weights.
fn pixel_weights(origin: f64, step: f64, n: usize, k: usize, len: u32) -> Vec<Vec<(usize, f64)>> {
    let max = len as i64 - 1;
    (0..n)
        .map(|i| {
            let mut taps: Vec<(usize, f64)> = Vec::with_capacity(k + 2);
            let mut add = |idx: i64, w: f64| {
                let idx = idx.clamp(0, max) as usize;
                match taps.iter_mut().find(|t| t.0 == idx) {
                    Some(t) => t.1 += w,
                    None => taps.push((idx, w)),
                }
            };
            for s in 0..k {
                let f = origin + (i as f64 + (s as f64 + 0.5) / k as f64) * step - 0.5;
                let lo = f.floor();
                let t = f - lo;
                add(lo as i64, 1.0 - t);
                add(lo as i64 + 1, t);
            }
            taps
        })
        .collect()
}

fn pixel_planes(img: &Image) -> Vec<Vec<f64>> {
    let n = img.width() as usize * img.height() as usize;
    let raw = img.as_raw();
    if img.is_color() {
        let mut planes = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for px in raw.chunks_exact(3) {
            for c in 0..3 {
                planes[c].push(px[c] as f64);
            }
        }
        planes
    } else {
        vec![raw.iter().map(|&v| v as f64).collect()]
    }
}

/// FHOG only, on a grid of `cell_size` cells.
pub fn extract_hog(img: &Image, cell_size: usize) -> Result<FeatureMap> {
    check_grid(img, cell_size)?;
    let planes = pixel_planes(img);
    let px = hog::PixelPlanes {
        width: img.width() as usize,
        height: img.height() as usize,
        planes: &planes,
    };
    Ok(hog::fhog(&px, cell_size))
}

fn check_grid(img: &Image, cell_size: usize) -> Result<()> {
    if cell_size == 0 {
        return invalid("cell size must be positive");
    }
    let (cx, cy) = (img.width() as usize / cell_size, img.height() as usize / cell_size);
    if cx < MIN_GRID_SIDE || cy < MIN_GRID_SIDE {
        return invalid(format!(
            "patch {}x{} yields a {cx}x{cy} cell grid; at least {MIN_GRID_SIDE}x{MIN_GRID_SIDE} required",
            img.width(),
            img.height()
        ));
    }
    Ok(())
}

/// The 42-channel map: FHOG (31), color names (10, zero for gray input) and
/// the cell-averaged intensity shifted to `[-0.5, 0.5]`.
pub fn extract_features(patch: &ImagePatch, cell_size: usize) -> Result<FeatureMap> {
    let img = &patch.pixels;
    check_grid(img, cell_size)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (cx, cy) = (w / cell_size, h / cell_size);
    let planes = pixel_planes(img);
    let px = hog::PixelPlanes {
        width: w,
        height: h,
        planes: &planes,
    };
    let mut out = FeatureMap::zeros(cx, cy, FEATURE_CHANNELS)
        .with_cell_size(cell_size)
        .with_layout(LMCF_LAYOUT);
    hog::fhog_into(&px, cell_size, &mut out);

    let cn_base = hog::HOG_CHANNELS;
    let gray_channel = cn_base + color_names::COLOR_NAMES;
    let inv_area = 1.0 / (cell_size * cell_size) as f64;
    for y in 0..cy {
        for x in 0..cx {
            let mut cn = [0.0f64; color_names::COLOR_NAMES];
            let mut gray = 0.0;
            for py in y * cell_size..(y + 1) * cell_size {
                for pxx in x * cell_size..(x + 1) * cell_size {
                    let rgb = img.rgb(pxx as u32, py as u32);
                    gray += luma(rgb);
                    if img.is_color() {
                        for (acc, v) in cn.iter_mut().zip(color_names::lookup(rgb)) {
                            *acc += *v as f64;
                        }
                    }
                }
            }
            for (k, v) in cn.iter().enumerate() {
                out.set(x, y, cn_base + k, v * inv_area);
            }
            out.set(x, y, gray_channel, gray * inv_area / 255.0 - 0.5);
        }
    }
    Ok(out)
}

/// Periodic Hann window `sin^2(pi n / N)`; a length-1 window is `[1]`.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2))
        .collect()
}

/// Multiply every channel by the separable 2-D periodic Hann window.
pub fn apply_window(map: &FeatureMap) -> FeatureMap {
    let wx = hann_periodic(map.width());
    let wy = hann_periodic(map.height());
    let mut out = map.clone();
    let w = map.width();
    for d in 0..map.channels() {
        for (i, v) in out.channel_mut(d).iter_mut().enumerate() {
            *v *= wx[i % w] * wy[i / w];
        }
    }
    out
}

/// Whether every channel is spatially constant, i.e. the patch carries no
/// positional information.
pub fn is_textureless(map: &FeatureMap) -> bool {
    (0..map.channels()).all(|d| {
        let c = map.channel(d);
        c.iter().all(|&v| v == c[0])
    })
}

/// Crop at `center`/`scale` and extract unwindowed features.
pub fn patch_features(frame: &Image, geometry: &PatchGeometry, center: Point, scale: f64) -> Result<FeatureMap> {
    let patch = geometry.crop(frame, center, scale)?;
    extract_features(&patch, geometry.cell_size)
}

/// Crop at `center`/`scale`, extract features and window them.
pub fn windowed_features(frame: &Image, geometry: &PatchGeometry, center: Point, scale: f64) -> Result<FeatureMap> {
    let patch = geometry.crop(frame, center, scale)?;
    Ok(apply_window(&extract_features(&patch, geometry.cell_size)?))
}

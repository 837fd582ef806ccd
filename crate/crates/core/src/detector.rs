//! Detection responses, peak finding and multimodal re-detection.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::feature_map::{wrapped_offset, FeatureMap};
use crate::features::{apply_window, is_textureless, patch_features, windowed_features, PatchGeometry};
use crate::geometry::{Point, Rect};
use crate::image::Image;
use crate::optimizer::DualModel;
use crate::spectral;

/// Most secondary peaks re-detected per frame.
pub const MAX_SECONDARY_PEAKS: usize = 5;

/// A real response surface over all cyclic shifts, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    peak_pos: (usize, usize),
    f_max: f64,
    f_min: f64,
}

impl ResponseMap {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return invalid(format!(
                "response of {} values does not fit a {width}x{height} grid",
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("response contains non-finite values");
        }
        let mut best = 0;
        let mut f_min = values[0];
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
            f_min = f_min.min(v);
        }
        Ok(Self {
            width,
            height,
            f_max: values[best],
            f_min,
            peak_pos: (best % width, best / width),
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn peak_pos(&self) -> (usize, usize) {
        self.peak_pos
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    /// Signed displacement, in cells, of a shift on this grid.
    pub fn displacement(&self, shift: (usize, usize)) -> (isize, isize) {
        (
            wrapped_offset(shift.0, self.width),
            wrapped_offset(shift.1, self.height),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub shift: (usize, usize),
    pub value: f64,
}

/// Global maximum first, then retained secondary peaks by decreasing value.
#[derive(Clone, Debug, PartialEq)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    pub theta: f64,
}

impl PeakSet {
    pub fn primary(&self) -> Peak {
        self.peaks[0]
    }

    pub fn secondary(&self) -> &[Peak] {
        &self.peaks[1..]
    }
}

/// Response of a model to a candidate feature map.
pub fn respond(model: &DualModel, candidate: &FeatureMap) -> Result<ResponseMap> {
    let values = model.respond_spatial(&spectral::dft2(candidate)?)?;
    ResponseMap::from_values(model.width(), model.height(), values)
}

/// Exclusion radius in cells around a retained peak.
pub fn exclusion_radius(width: usize, height: usize) -> usize {
    width.min(height).div_ceil(10)
}

fn wrapped_distance(a: usize, b: usize, len: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(len - d)
}

/// Local maxima over the wrapped 8-neighbourhood. Among equal neighbours the
/// one with the lower row-major index counts as the maximum.
fn local_maxima(response: &ResponseMap) -> Vec<Peak> {
    let (w, h) = (response.width, response.height);
    let v = &response.values;
    let mut out = Vec::new();
    for y in 0..h {
        'cells: for x in 0..w {
            let i = y * w + x;
            for dy in [h - 1, 0, 1] {
                for dx in [w - 1, 0, 1] {
                    let (nx, ny) = ((x + dx) % w, (y + dy) % h);
                    let j = ny * w + nx;
                    if j == i {
                        continue;
                    }
                    if v[j] > v[i] || (v[j] == v[i] && j < i) {
                        continue 'cells;
                    }
                }
            }
            out.push(Peak {
                shift: (x, y),
                value: v[i],
            });
        }
    }
    out
}

/// Global maximum plus local maxima whose value is at least `theta` times it
/// (and strictly below it), thinned by the exclusion radius and capped at
/// [`MAX_SECONDARY_PEAKS`].
pub fn find_peaks(response: &ResponseMap, theta: f64) -> PeakSet {
    let primary = Peak {
        shift: response.peak_pos,
        value: response.f_max,
    };
    let mut peaks = vec![primary];
    if response.f_max > 0.0 {
        let mut candidates: Vec<(usize, Peak)> = local_maxima(response)
            .into_iter()
            .filter(|p| p.value < primary.value && p.value / primary.value >= theta)
            .map(|p| (p.shift.1 * response.width + p.shift.0, p))
            .collect();
        candidates.sort_by(|a, b| b.1.value.total_cmp(&a.1.value).then(a.0.cmp(&b.0)));
        let radius = exclusion_radius(response.width, response.height);
        for (_, p) in candidates {
            if peaks.len() > MAX_SECONDARY_PEAKS {
                break;
            }
            let near = peaks.iter().any(|q| {
                wrapped_distance(p.shift.0, q.shift.0, response.width) <= radius
                    && wrapped_distance(p.shift.1, q.shift.1, response.height) <= radius
            });
            if !near {
                peaks.push(p);
            }
        }
    }
    PeakSet { peaks, theta }
}

/// Outcome of one detection pass.
#[derive(Clone, Debug)]
pub struct Detection {
    pub center: Point,
    pub response: ResponseMap,
    /// Best response among the primary map and all re-detections.
    pub f_max: f64,
    /// `f_max` of the map cropped at the previous center.
    pub primary_f_max: f64,
    /// Response maps evaluated, primary included.
    pub peaks_considered: usize,
    /// Index of the winning candidate (0 is the primary map).
    pub winner: usize,
    /// Peak location and response of the map cropped at the previous center.
    pub primary_center: Point,
    pub primary_response: ResponseMap,
    /// The primary crop has spatially constant features; `center` is the
    /// previous center and no re-detection was attempted.
    pub textureless: bool,
}

/// Multimodal detection settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectConfig {
    pub theta: f64,
    pub multimodal: bool,
}

fn crop_visible(frame: &Image, geometry: &PatchGeometry, center: Point, scale: f64) -> bool {
    let region = Rect::from_center(center, geometry.window.scaled(scale));
    region
        .clamped_to(frame.width() as f64, frame.height() as f64)
        .has_positive_area()
}

fn shift_to_pixels(response: &ResponseMap, shift: (usize, usize), cell_px: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = response.displacement(shift);
    (dx as f64 * cell_px.0, dy as f64 * cell_px.1)
}

/// Detect around `prev_center`; with multimodal detection on, re-detect at
/// every retained secondary peak and keep the map with the largest `f_max`.
/// Returns `Ok(None)` when no candidate crop overlaps the frame. A
/// textureless primary crop keeps the previous center.
pub fn multimodal_detect(
    model: &DualModel,
    frame: &Image,
    prev_center: Point,
    geometry: &PatchGeometry,
    scale: f64,
    config: DetectConfig,
) -> Result<Option<Detection>> {
    if !(config.theta > 0.0 && config.theta <= 1.0) {
        return invalid(format!("peak ratio threshold must lie in (0, 1], got {}", config.theta));
    }
    let cell_px = geometry.cell_pixels(scale);
    if !crop_visible(frame, geometry, prev_center, scale) {
        return Ok(None);
    }
    let raw = patch_features(frame, geometry, prev_center, scale)?;
    let textureless = is_textureless(&raw);
    let primary = respond(model, &apply_window(&raw))?;
    let locate = |crop_center: Point, response: &ResponseMap| {
        let (dx, dy) = shift_to_pixels(response, response.peak_pos, cell_px);
        Point::new(crop_center.x + dx, crop_center.y + dy)
    };
    let primary_f_max = primary.f_max;
    let primary_center = if textureless {
        prev_center
    } else {
        locate(prev_center, &primary)
    };
    let mut best = Detection {
        center: primary_center,
        primary_center,
        primary_response: primary.clone(),
        f_max: primary.f_max,
        primary_f_max,
        peaks_considered: 1,
        winner: 0,
        textureless,
        response: primary,
    };
    if textureless || !config.multimodal {
        return Ok(Some(best));
    }
    let peaks = find_peaks(&best.primary_response, config.theta);
    let candidates: Vec<(usize, Point)> = peaks
        .secondary()
        .iter()
        .enumerate()
        .map(|(k, peak)| {
            let (dx, dy) = shift_to_pixels(&best.primary_response, peak.shift, cell_px);
            (k + 1, Point::new(prev_center.x + dx, prev_center.y + dy))
        })
        .filter(|(_, center)| crop_visible(frame, geometry, *center, scale))
        .collect();
    let responses = candidates
        .par_iter()
        .map(|&(_, center)| respond(model, &windowed_features(frame, geometry, center, scale)?))
        .collect::<Result<Vec<_>>>()?;
    for ((index, center), response) in candidates.into_iter().zip(responses) {
        best.peaks_considered += 1;
        // strict comparison keeps the primary map, then the earliest candidate, on ties
        if response.f_max > best.f_max {
            best.center = locate(center, &response);
            best.f_max = response.f_max;
            best.winner = index;
            best.response = response;
        }
    }
    Ok(Some(best))
}

//! One-dimensional correlation filter over a geometric scale pyramid.
//!
//! Each pyramid level crops the target region at `scale * a^n`, resamples
//! it to a small fixed template, and describes it by its FHOG cells. The
//! per-level descriptors form the columns of an `S x Ds` sample; the filter
//! correlates samples along the scale axis only.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::features::{crop_resampled, extract_hog};
use crate::geometry::{Point, Rect, Size};
use crate::image::Image;
use crate::spectral::{fft1, ifft1};

/// Larger side, in pixels, of the resampled scale template.
pub const SCALE_TEMPLATE_SIDE: u32 = 32;
/// Smaller side lower bound of the scale template.
pub const SCALE_TEMPLATE_MIN_SIDE: u32 = 16;
pub const SCALE_CELL_SIZE: usize = 4;
pub const SCALE_LABEL_SIGMA: f64 = 1.0;
pub const SCALE_LAMBDA: f64 = 1e-2;
/// Smallest tracked target side in pixels.
pub const MIN_TARGET_SIDE: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub num_scales: usize,
    pub scale_factor: f64,
    pub eta: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            num_scales: 33,
            scale_factor: 1.02,
            eta: 0.015,
        }
    }
}

impl ScaleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_scales == 0 || self.num_scales.is_multiple_of(2) {
            return invalid(format!("number of scales must be odd, got {}", self.num_scales));
        }
        if !(self.scale_factor > 1.0) || !self.scale_factor.is_finite() {
            return invalid(format!("scale factor must exceed 1, got {}", self.scale_factor));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return invalid(format!("scale learning rate must lie in [0, 1], got {}", self.eta));
        }
        Ok(())
    }

    /// Pyramid exponents `-(S-1)/2 ..= (S-1)/2`.
    pub fn exponents(&self) -> Vec<i32> {
        let half = (self.num_scales / 2) as i32;
        (-half..=half).collect()
    }

    pub fn levels(&self) -> Vec<f64> {
        self.exponents().iter().map(|&n| self.scale_factor.powi(n)).collect()
    }
}

/// Symmetric Hann window over `n` scale levels; `[1]` for one level.
pub fn scale_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Per-level descriptors, level-major: `data[level * dims + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleSample {
    pub levels: usize,
    pub dims: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleModel {
    config: ScaleConfig,
    base_size: Size,
    frame_size: (u32, u32),
    template: (u32, u32),
    window: Vec<f64>,
    label_hat: Vec<Complex64>,
    /// `dims x S` numerator spectra, dimension-major.
    num: Vec<Complex64>,
    den: Vec<f64>,
    trained: bool,
    current_scale: f64,
}

fn scale_template(base: Size) -> (u32, u32) {
    let ratio = SCALE_TEMPLATE_SIDE as f64 / base.width.max(base.height);
    let side = |len: f64| {
        let px = (len * ratio / SCALE_CELL_SIZE as f64).round() as u32 * SCALE_CELL_SIZE as u32;
        px.clamp(SCALE_TEMPLATE_MIN_SIDE, SCALE_TEMPLATE_SIDE)
    };
    (side(base.width), side(base.height))
}

impl ScaleModel {
    pub fn new(config: ScaleConfig, base_size: Size, frame_size: (u32, u32)) -> Result<Self> {
        config.validate()?;
        if !base_size.is_positive() {
            return invalid("target size must be positive");
        }
        if frame_size.0 == 0 || frame_size.1 == 0 {
            return invalid("frame must be non-empty");
        }
        let s = config.num_scales;
        let mid = (s / 2) as f64;
        let mut label_hat: Vec<Complex64> = (0..s)
            .map(|i| {
                let d = i as f64 - mid;
                Complex64::new((-0.5 * d * d / (SCALE_LABEL_SIGMA * SCALE_LABEL_SIGMA)).exp(), 0.0)
            })
            .collect();
        fft1(&mut label_hat);
        Ok(Self {
            config,
            base_size,
            frame_size,
            template: scale_template(base_size),
            window: scale_window(s),
            label_hat,
            num: Vec::new(),
            den: vec![0.0; s],
            trained: false,
            current_scale: 1.0,
        })
    }

    pub fn config(&self) -> &ScaleConfig {
        &self.config
    }

    pub fn current_scale(&self) -> f64 {
        self.current_scale
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn template(&self) -> (u32, u32) {
        self.template
    }

    /// Admissible scale range: target sides at least [`MIN_TARGET_SIDE`]
    /// and at most the frame.
    pub fn scale_bounds(&self) -> (f64, f64) {
        let lo = MIN_TARGET_SIDE / self.base_size.width.min(self.base_size.height);
        let hi =
            (self.frame_size.0 as f64 / self.base_size.width).min(self.frame_size.1 as f64 / self.base_size.height);
        (lo, hi.max(lo))
    }

    pub fn clamp_scale(&self, scale: f64) -> f64 {
        let (lo, hi) = self.scale_bounds();
        scale.clamp(lo, hi)
    }

    pub fn set_current_scale(&mut self, scale: f64) {
        self.current_scale = self.clamp_scale(scale);
    }

    /// Pyramid sample around `center` at `scale`.
    pub fn sample(&self, frame: &Image, center: Point, scale: f64) -> Result<ScaleSample> {
        if !(center.x.is_finite() && center.y.is_finite()) {
            return invalid("scale sample center must be finite");
        }
        let levels = self.config.levels();
        let (tw, th) = self.template;
        let dims =
            (tw as usize / SCALE_CELL_SIZE) * (th as usize / SCALE_CELL_SIZE) * crate::features::hog::HOG_CHANNELS;
        let mut data = vec![0.0; levels.len() * dims];
        let (fw, fh) = (frame.width() as f64, frame.height() as f64);
        // levels are independent, so the parallel fill is deterministic
        data.par_chunks_mut(dims)
            .zip(levels.par_iter().zip(self.window.par_iter()))
            .try_for_each(|(out, (level, w))| -> Result<()> {
                let size = self.base_size.scaled(scale * level);
                if !Rect::from_center(center, size).clamped_to(fw, fh).has_positive_area() {
                    return Ok(());
                }
                let patch = crop_resampled(frame, center, size, self.template)?;
                let hog = extract_hog(&patch.pixels, SCALE_CELL_SIZE)?;
                for (o, v) in out.iter_mut().zip(hog.as_slice()) {
                    *o = v * w;
                }
                Ok(())
            })?;
        Ok(ScaleSample {
            levels: levels.len(),
            dims,
            data,
        })
    }

    fn check_sample(&self, sample: &ScaleSample) -> Result<()> {
        let dims = (self.template.0 as usize / SCALE_CELL_SIZE)
            * (self.template.1 as usize / SCALE_CELL_SIZE)
            * crate::features::hog::HOG_CHANNELS;
        if sample.levels != self.config.num_scales || sample.dims != dims || sample.data.len() != dims * sample.levels {
            return invalid("scale sample does not match the model pyramid");
        }
        if sample.data.iter().any(|v| !v.is_finite()) {
            return invalid("scale sample contains non-finite values");
        }
        Ok(())
    }

    /// Per-dimension spectra along the scale axis, dimension-major.
    fn spectra(sample: &ScaleSample) -> Vec<Complex64> {
        let s = sample.levels;
        let mut out = vec![Complex64::new(0.0, 0.0); sample.dims * s];
        for (k, col) in out.chunks_mut(s).enumerate() {
            for (l, c) in col.iter_mut().enumerate() {
                *c = Complex64::new(sample.data[l * sample.dims + k], 0.0);
            }
            fft1(col);
        }
        out
    }

    /// Blend the model toward `sample` with rate `eta`. An untrained model
    /// starts from zero statistics.
    pub fn train(&mut self, sample: &ScaleSample, eta: f64) -> Result<()> {
        self.check_sample(sample)?;
        if !(0.0..=1.0).contains(&eta) {
            return invalid(format!("scale learning rate must lie in [0, 1], got {eta}"));
        }
        let s = sample.levels;
        let x = Self::spectra(sample);
        if self.num.len() != x.len() {
            self.num = vec![Complex64::new(0.0, 0.0); x.len()];
        }
        let mut den = vec![0.0; s];
        for (num_col, x_col) in self.num.chunks_mut(s).zip(x.chunks(s)) {
            for l in 0..s {
                let fresh = self.label_hat[l] * x_col[l].conj();
                num_col[l] = num_col[l] * (1.0 - eta) + fresh * eta;
                den[l] += x_col[l].norm_sqr();
            }
        }
        for (d, fresh) in self.den.iter_mut().zip(den) {
            *d = *d * (1.0 - eta) + fresh * eta;
        }
        self.trained = true;
        Ok(())
    }

    /// Scale-axis response for `sample`; `None` when the model is untrained.
    pub fn response(&self, sample: &ScaleSample) -> Result<Option<Vec<f64>>> {
        self.check_sample(sample)?;
        if !self.trained {
            return Ok(None);
        }
        let s = sample.levels;
        let z = Self::spectra(sample);
        let mut acc = vec![Complex64::new(0.0, 0.0); s];
        for (num_col, z_col) in self.num.chunks(s).zip(z.chunks(s)) {
            for l in 0..s {
                acc[l] += num_col[l] * z_col[l];
            }
        }
        for (a, d) in acc.iter_mut().zip(&self.den) {
            *a /= d + SCALE_LAMBDA;
        }
        ifft1(&mut acc);
        Ok(Some(acc.iter().map(|c| c.re).collect()))
    }

    /// Scale estimate `current * a^(argmax - mid)`, clamped. A flat,
    /// non-finite or missing response keeps the current scale.
    pub fn estimate(&self, sample: &ScaleSample) -> Result<f64> {
        let Some(r) = self.response(sample)? else {
            return Ok(self.current_scale);
        };
        let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        if !max.is_finite() || !min.is_finite() || max - min <= 1e-12 * max.abs().max(1.0) {
            return Ok(self.current_scale);
        }
        let mid = r.len() / 2;
        let best = (0..r.len())
            .filter(|&i| r[i] == max)
            .min_by_key(|&i| i.abs_diff(mid))
            .unwrap_or(mid);
        let exponent = best as i32 - mid as i32;
        Ok(self.clamp_scale(self.current_scale * self.config.scale_factor.powi(exponent)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured_frame(seed: u64, w: u32, h: u32) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = Image::filled(w, h, [0, 0, 0]);
        // blocky texture so every pyramid level has structure
        let cells: Vec<[u8; 3]> = (0..(w / 6 + 1) * (h / 6 + 1)).map(|_| rng.gen()).collect();
        for y in 0..h {
            for x in 0..w {
                img.put_rgb(x, y, cells[(y / 6 * (w / 6 + 1) + x / 6) as usize]);
            }
        }
        img
    }

    #[test]
    fn pyramid_levels() {
        let c = ScaleConfig::default();
        let e = c.exponents();
        assert_eq!(e.len(), 33);
        assert_eq!((e[0], e[32]), (-16, 16));
        assert_eq!(e.iter().sum::<i32>(), 0);
        assert_eq!(c.levels()[16], 1.0);
    }

    #[test]
    fn config_validation() {
        let bad = [
            ScaleConfig {
                num_scales: 4,
                ..Default::default()
            },
            ScaleConfig {
                num_scales: 0,
                ..Default::default()
            },
            ScaleConfig {
                scale_factor: 1.0,
                ..Default::default()
            },
            ScaleConfig {
                eta: 1.5,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn window_shape() {
        assert_eq!(scale_window(1), vec![1.0]);
        let w = scale_window(5);
        let expect = [0.0, 0.5, 1.0, 0.5, 0.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn templates() {
        assert_eq!(scale_template(Size::new(40.0, 40.0)), (32, 32));
        assert_eq!(scale_template(Size::new(100.0, 25.0)), (32, 16));
        assert_eq!(scale_template(Size::new(30.0, 60.0)), (16, 32));
        assert_eq!(scale_template(Size::new(48.0, 60.0)), (24, 32));
    }

    #[test]
    fn untrained_model_keeps_scale() {
        let frame = textured_frame(1, 120, 100);
        let m = ScaleModel::new(ScaleConfig::default(), Size::new(30.0, 30.0), (120, 100)).unwrap();
        let s = m.sample(&frame, Point::new(60.0, 50.0), 1.0).unwrap();
        assert_eq!(m.estimate(&s).unwrap(), 1.0);
    }

    #[test]
    fn self_response_peaks_at_middle() {
        let frame = textured_frame(2, 160, 120);
        let mut m = ScaleModel::new(ScaleConfig::default(), Size::new(36.0, 30.0), (160, 120)).unwrap();
        let s = m.sample(&frame, Point::new(80.0, 60.0), 1.0).unwrap();
        m.train(&s, 1.0).unwrap();
        let r = m.response(&s).unwrap().unwrap();
        let arg = (0..r.len()).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
        assert_eq!(arg, 16);
        for _ in 0..5 {
            m.train(&s, 0.015).unwrap();
            assert_eq!(m.estimate(&s).unwrap(), 1.0);
        }
    }

    #[test]
    fn first_training_with_unit_rate_matches_single_frame() {
        let frame = textured_frame(3, 100, 100);
        let mut a = ScaleModel::new(ScaleConfig::default(), Size::new(30.0, 30.0), (100, 100)).unwrap();
        let s1 = a.sample(&frame, Point::new(50.0, 50.0), 1.0).unwrap();
        let s2 = a.sample(&frame, Point::new(45.0, 52.0), 1.0).unwrap();
        a.train(&s2, 1.0).unwrap();
        a.train(&s1, 1.0).unwrap();
        let mut b = a.clone();
        b.num.clear();
        b.den.iter_mut().for_each(|d| *d = 0.0);
        b.trained = false;
        b.train(&s1, 1.0).unwrap();
        assert_eq!(a, b);
        let frozen = a.clone();
        a.train(&s2, 0.0).unwrap();
        assert_eq!(a, frozen);
    }

    #[test]
    fn zero_sample_keeps_scale() {
        let frame = textured_frame(4, 100, 100);
        let mut m = ScaleModel::new(ScaleConfig::default(), Size::new(30.0, 30.0), (100, 100)).unwrap();
        m.train(&m.sample(&frame, Point::new(50.0, 50.0), 1.0).unwrap(), 1.0)
            .unwrap();
        let zero = ScaleSample {
            levels: 33,
            dims: 8 * 8 * 31,
            data: vec![0.0; 33 * 8 * 8 * 31],
        };
        assert_eq!(m.estimate(&zero).unwrap(), 1.0);
    }

    #[test]
    fn single_level_pyramid() {
        let frame = textured_frame(5, 100, 100);
        let cfg = ScaleConfig {
            num_scales: 1,
            ..Default::default()
        };
        let mut m = ScaleModel::new(cfg, Size::new(30.0, 30.0), (100, 100)).unwrap();
        let s = m.sample(&frame, Point::new(50.0, 50.0), 1.0).unwrap();
        assert_eq!(s.levels, 1);
        m.train(&s, 1.0).unwrap();
        m.set_current_scale(1.3);
        assert_eq!(m.estimate(&s).unwrap(), 1.3);
    }

    #[test]
    fn detects_growth() {
        // crop the same frame around a target that appears 1.02x larger
        let frame = textured_frame(6, 200, 200);
        let cfg = ScaleConfig::default();
        let mut m = ScaleModel::new(cfg, Size::new(40.0, 40.0), (200, 200)).unwrap();
        let s = m.sample(&frame, Point::new(100.0, 100.0), 1.0).unwrap();
        m.train(&s, 1.0).unwrap();
        // sampling at scale 1/1.02^2 is equivalent to the target growing by 1.02^2
        m.set_current_scale(1.0);
        let shrunk = m
            .sample(&frame, Point::new(100.0, 100.0), 1.0 / 1.02f64.powi(2))
            .unwrap();
        let est = m.estimate(&shrunk).unwrap();
        assert!((est - 1.02f64.powi(2)).abs() < 1e-12, "{est}");
    }

    #[test]
    fn clamping_bounds() {
        let mut m = ScaleModel::new(ScaleConfig::default(), Size::new(16.0, 32.0), (100, 80)).unwrap();
        m.set_current_scale(0.1);
        assert_eq!(m.current_scale(), 0.5);
        m.set_current_scale(10.0);
        assert_eq!(m.current_scale(), 2.5);
    }

    #[test]
    fn far_outside_levels_are_zero() {
        let frame = textured_frame(7, 50, 50);
        let m = ScaleModel::new(ScaleConfig::default(), Size::new(10.0, 10.0), (50, 50)).unwrap();
        let s = m.sample(&frame, Point::new(-30.0, -30.0), 1.0).unwrap();
        assert!(s.data.iter().all(|&v| v == 0.0));
    }
}

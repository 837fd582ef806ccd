//! The per-sequence tracking loop: initialize on the first frame, then
//! detect, estimate scale, gate and update on every following frame.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::confidence::{apce, should_update, UpdateGateState};
use crate::detector::{multimodal_detect, respond, DetectConfig};
use crate::error::{invalid, Error, Result};
use crate::features::{windowed_features, PatchGeometry, DEFAULT_CELL_SIZE};
use crate::geometry::{Point, Rect, Size};
use crate::image::Image;
use crate::labels::{build_labels, LabelField, DEFAULT_SIGMA_FACTOR};
use crate::optimizer::{interpolate_model, train_from, DualModel, ModelMode, SlackState, TrainConfig};
use crate::scale::{ScaleConfig, ScaleModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    pub padding: f64,
    pub eta: f64,
    pub theta: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub mode: ModelMode,
    pub sigma_k: f64,
    pub sigma_factor: f64,
    pub cell_size: usize,
    pub init_iterations: usize,
    pub update_iterations: usize,
    pub num_scales: usize,
    pub scale_factor: f64,
    pub scale_eta: f64,
    pub multimodal: bool,
    pub always_update: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            padding: 1.5,
            eta: 0.015,
            theta: 0.7,
            beta1: 0.7,
            beta2: 0.45,
            c: 10_000.0,
            mode: ModelMode::Linear,
            sigma_k: 0.5,
            sigma_factor: DEFAULT_SIGMA_FACTOR,
            cell_size: DEFAULT_CELL_SIZE,
            init_iterations: 10,
            update_iterations: 3,
            num_scales: 33,
            scale_factor: 1.02,
            scale_eta: 0.015,
            multimodal: true,
            always_update: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` as a value for `{key}`"))
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("padding", self.padding, self.padding >= 0.0),
            ("C", self.c, self.c > 0.0),
            ("sigma_k", self.sigma_k, self.sigma_k > 0.0),
            ("sigma_factor", self.sigma_factor, self.sigma_factor > 0.0),
            ("beta1", self.beta1, self.beta1 > 0.0),
            ("beta2", self.beta2, self.beta2 > 0.0),
            ("theta", self.theta, self.theta > 0.0 && self.theta <= 1.0),
            ("eta", self.eta, (0.0..=1.0).contains(&self.eta)),
        ];
        for (name, value, ok) in positive {
            if !ok || !value.is_finite() {
                return invalid(format!("{name} is out of range: {value}"));
            }
        }
        if self.cell_size == 0 || self.init_iterations == 0 || self.update_iterations == 0 {
            return invalid("cell_size and iteration counts must be positive");
        }
        self.scale_config().validate()
    }

    pub fn scale_config(&self) -> ScaleConfig {
        ScaleConfig {
            num_scales: self.num_scales,
            scale_factor: self.scale_factor,
            eta: self.scale_eta,
        }
    }

    fn train_config(&self, iterations: usize) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            c: self.c,
            sigma_k: self.sigma_k,
            iterations,
        }
    }

    /// Set one field by its configuration-file name.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "padding" => self.padding = parse_value(key, value)?,
            "eta" => self.eta = parse_value(key, value)?,
            "theta" => self.theta = parse_value(key, value)?,
            "beta1" => self.beta1 = parse_value(key, value)?,
            "beta2" => self.beta2 = parse_value(key, value)?,
            "C" | "c" => self.c = parse_value(key, value)?,
            "mode" => self.mode = parse_value(key, value)?,
            "sigma_k" => self.sigma_k = parse_value(key, value)?,
            "sigma_factor" => self.sigma_factor = parse_value(key, value)?,
            "cell_size" => self.cell_size = parse_value(key, value)?,
            "init_iterations" => self.init_iterations = parse_value(key, value)?,
            "update_iterations" => self.update_iterations = parse_value(key, value)?,
            "num_scales" => self.num_scales = parse_value(key, value)?,
            "scale_factor" => self.scale_factor = parse_value(key, value)?,
            "scale_eta" => self.scale_eta = parse_value(key, value)?,
            "multimodal" => self.multimodal = parse_value(key, value)?,
            "always_update" => self.always_update = parse_value(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Parse `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse_kv(text: &str, path: &Path) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            config.set(key.trim(), value.trim()).map_err(err)?;
        }
        config.validate().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_kv(&std::fs::read_to_string(path)?, path)
    }
}

/// Per-frame diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameOutput {
    /// 0-based frame position within the sequence.
    pub frame_index: usize,
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub scale: f64,
    /// Peak of the selected response map.
    pub f_max: f64,
    /// Peak of the response at the previous center, before re-detection.
    pub primary_f_max: f64,
    /// `None` for a degenerate (constant) response.
    pub apce: Option<f64>,
    pub updated: bool,
    pub peaks_considered: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerState {
    config: TrackerConfig,
    geometry: PatchGeometry,
    labels: LabelField,
    model: DualModel,
    slack: SlackState,
    gate: UpdateGateState,
    scale_model: ScaleModel,
    center: Point,
    base_size: Size,
    frame_size: (u32, u32),
    frame_index: usize,
}

fn clamp_center(center: Point, frame: (u32, u32)) -> Point {
    Point::new(center.x.clamp(0.0, frame.0 as f64), center.y.clamp(0.0, frame.1 as f64))
}

impl TrackerState {
    /// Train on the first frame around `bbox`.
    pub fn init(frame: &Image, bbox: Rect, config: TrackerConfig) -> Result<(Self, FrameOutput)> {
        config.validate()?;
        if !bbox.has_positive_area() {
            return invalid(format!("initial box must have positive area, got {bbox:?}"));
        }
        let frame_size = (frame.width(), frame.height());
        if bbox.clamped_to(frame_size.0 as f64, frame_size.1 as f64).area() <= 0.0 {
            return invalid("initial box lies outside the frame");
        }
        let base_size = bbox.size();
        let center = bbox.center();
        let geometry = PatchGeometry::new(base_size, config.padding, config.cell_size)?;
        let (gw, gh) = geometry.grid();
        let cell_px = geometry.cell_pixels(1.0);
        let target_cells = (
            (base_size.width / cell_px.0).max(1.0),
            (base_size.height / cell_px.1).max(1.0),
        );
        let labels = build_labels(gw, gh, target_cells, config.sigma_factor)?;
        let features = windowed_features(frame, &geometry, center, 1.0)?;
        let (model, slack) = train_from(&features, &labels, &config.train_config(config.init_iterations), None)?;
        let mut scale_model = ScaleModel::new(config.scale_config(), base_size, frame_size)?;
        scale_model.train(&scale_model.sample(frame, center, 1.0)?, 1.0)?;
        let response = respond(&model, &features)?;
        let state = Self {
            config,
            geometry,
            labels,
            model,
            slack,
            gate: UpdateGateState::new(config.beta1, config.beta2)?,
            scale_model,
            center,
            base_size,
            frame_size,
            frame_index: 1,
        };
        let output = FrameOutput {
            frame_index: 0,
            bbox: state.current_box(),
            scale: 1.0,
            f_max: response.f_max(),
            primary_f_max: response.f_max(),
            apce: apce(&response),
            updated: true,
            peaks_considered: 1,
            latency_ms: None,
        };
        Ok((state, output))
    }

    /// Track one frame.
    pub fn step(&mut self, frame: &Image) -> Result<FrameOutput> {
        if (frame.width(), frame.height()) != self.frame_size {
            return invalid(format!(
                "frame is {}x{} but the sequence is {}x{}",
                frame.width(),
                frame.height(),
                self.frame_size.0,
                self.frame_size.1
            ));
        }
        let frame_index = self.frame_index;
        self.frame_index += 1;
        let scale = self.scale_model.current_scale();
        let detect = DetectConfig {
            theta: self.config.theta,
            multimodal: self.config.multimodal,
        };
        let Some(detection) = multimodal_detect(&self.model, frame, self.center, &self.geometry, scale, detect)? else {
            return Ok(FrameOutput {
                frame_index,
                bbox: self.current_box(),
                scale,
                f_max: 0.0,
                primary_f_max: 0.0,
                apce: None,
                updated: false,
                peaks_considered: 0,
                latency_ms: None,
            });
        };
        // A re-detection is only trusted when it also passes the confidence
        // gate; otherwise the primary map is kept.
        let mut detection = detection;
        let mut apce_value = if detection.textureless {
            None
        } else {
            apce(&detection.response)
        };
        let (mut confident, mut gate) = should_update(&self.gate, detection.f_max, apce_value);
        if detection.winner != 0 && !confident {
            detection.center = detection.primary_center;
            detection.f_max = detection.primary_f_max;
            detection.response = detection.primary_response.clone();
            detection.winner = 0;
            apce_value = apce(&detection.response);
            (confident, gate) = should_update(&self.gate, detection.f_max, apce_value);
        }
        self.gate = gate;
        self.center = clamp_center(detection.center, self.frame_size);

        let mut scale_sample = None;
        if !detection.textureless {
            let sample = self.scale_model.sample(frame, self.center, scale)?;
            let new_scale = self.scale_model.estimate(&sample)?;
            self.scale_model.set_current_scale(new_scale);
            scale_sample = Some(sample);
        }
        let detected_scale = scale;
        let scale = self.scale_model.current_scale();

        let updated = confident || self.config.always_update;
        if updated {
            let features = windowed_features(frame, &self.geometry, self.center, scale)?;
            let (fresh, slack) = train_from(
                &features,
                &self.labels,
                &self.config.train_config(self.config.update_iterations),
                Some(&self.slack),
            )?;
            self.model = interpolate_model(&self.model, &fresh, self.config.eta)?;
            self.slack = slack;
            // the estimation sample is reused when the scale did not move
            let sample = match scale_sample {
                Some(s) if scale == detected_scale => s,
                _ => self.scale_model.sample(frame, self.center, scale)?,
            };
            self.scale_model.train(&sample, self.config.scale_eta)?;
        }
        Ok(FrameOutput {
            frame_index,
            bbox: self.current_box(),
            scale,
            f_max: detection.f_max,
            primary_f_max: detection.primary_f_max,
            apce: apce_value,
            updated,
            peaks_considered: detection.peaks_considered,
            latency_ms: None,
        })
    }

    /// Box of the current estimate, clamped to the frame.
    pub fn current_box(&self) -> Rect {
        Rect::from_center(self.center, self.base_size.scaled(self.scale_model.current_scale()))
            .clamped_to(self.frame_size.0 as f64, self.frame_size.1 as f64)
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale_model.current_scale()
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn model(&self) -> &DualModel {
        &self.model
    }

    pub fn slack(&self) -> &SlackState {
        &self.slack
    }

    pub fn gate(&self) -> &UpdateGateState {
        &self.gate
    }

    pub fn scale_model(&self) -> &ScaleModel {
        &self.scale_model
    }

    pub fn geometry(&self) -> &PatchGeometry {
        &self.geometry
    }
}

/// Track a whole sequence. `frames` yields frames in order, the first being
/// the initialization frame. With `timing` on, each record carries the
/// wall-clock latency of its step.
pub fn track_frames<I>(frames: I, init_box: Rect, config: TrackerConfig, timing: bool) -> Result<Vec<FrameOutput>>
where
    I: IntoIterator<Item = Result<Image>>,
{
    let mut frames = frames.into_iter();
    let first = frames
        .next()
        .ok_or_else(|| Error::InvalidInput("sequence has no frames".into()))??;
    let start = std::time::Instant::now();
    let (mut state, mut out) = TrackerState::init(&first, init_box, config)?;
    if timing {
        out.latency_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    let mut records = vec![out];
    for frame in frames {
        let frame = frame?;
        let start = std::time::Instant::now();
        let mut out = state.step(&frame)?;
        if timing {
            out.latency_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
        records.push(out);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrackerConfig::default();
        assert_eq!(
            (c.padding, c.eta, c.theta, c.beta1, c.beta2, c.c),
            (1.5, 0.015, 0.7, 0.7, 0.45, 10_000.0)
        );
        assert_eq!((c.num_scales, c.scale_factor), (33, 1.02));
        assert_eq!((c.init_iterations, c.update_iterations), (10, 3));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn kv_parsing() {
        let text = "# comment\npadding = 2.0\nC=500\nmode = kernel-gaussian\n\nmultimodal = false\n";
        let c = TrackerConfig::parse_kv(text, Path::new("cfg")).unwrap();
        assert_eq!(c.padding, 2.0);
        assert_eq!(c.c, 500.0);
        assert_eq!(c.mode, ModelMode::KernelGaussian);
        assert!(!c.multimodal);
        assert_eq!(c.eta, 0.015);
    }

    #[test]
    fn kv_errors_name_the_line() {
        for (text, line) in [("padding = 1\nbogus = 3\n", 2), ("eta 0.1", 1), ("theta = abc", 1)] {
            match TrackerConfig::parse_kv(text, Path::new("cfg")) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(TrackerConfig::parse_kv("theta = 1.5", Path::new("cfg")).is_err());
        assert!(TrackerConfig::parse_kv("num_scales = 4", Path::new("cfg")).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = TrackerConfig {
            mode: ModelMode::KernelLinear,
            always_update: true,
            ..Default::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"C\":10000"));
        assert_eq!(serde_json::from_str::<TrackerConfig>(&s).unwrap(), c);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        let frame = Image::filled(64, 64, [30, 60, 90]);
        let cfg = TrackerConfig::default();
        assert!(TrackerState::init(&frame, Rect::new(10.0, 10.0, 0.0, 20.0), cfg).is_err());
        assert!(TrackerState::init(&frame, Rect::new(100.0, 10.0, 10.0, 20.0), cfg).is_err());
    }

    #[test]
    fn frame_size_mismatch() {
        let frame = Image::filled(64, 64, [30, 60, 90]);
        let (mut state, _) =
            TrackerState::init(&frame, Rect::new(20.0, 20.0, 16.0, 16.0), TrackerConfig::default()).unwrap();
        assert!(state.step(&Image::filled(65, 64, [0, 0, 0])).is_err());
    }
}

//! Seeded synthetic sequences with exact ground truth.
//!
//! A noise-textured target is drawn over a static, smoothly varying
//! background. The target moves, grows, is hidden for a span of frames, or
//! is accompanied by a near-identical distractor, depending on the kind.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Frames, Sequence};
use crate::error::{invalid, Result};
use crate::geometry::{Point, Rect, Size};
use crate::image::Image;

/// Side, in pixels, of one texture block.
const TEXTURE_BLOCK: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SynthKind {
    /// Constant velocity in pixels per frame.
    Translate { velocity: (f64, f64) },
    /// Fixed center, size multiplied by `rate` every frame.
    ScaleRamp { rate: f64 },
    /// Constant velocity; the target is hidden during
    /// `start..start + frames`.
    Occlude {
        velocity: (f64, f64),
        start: usize,
        frames: usize,
        occluder: Occluder,
    },
    /// Constant velocity plus an abrupt `jump` every `period` frames. Around
    /// each jump a distractor sweeps vertically (at `sweep_speed` px per
    /// frame) through the point `offset` from the target's pre-jump center,
    /// reaching it on the jump frame. Its texture blends the target's with
    /// an unrelated one, `similarity` being the target's share.
    Distractor {
        velocity: (f64, f64),
        period: usize,
        jump: (f64, f64),
        offset: (f64, f64),
        sweep_speed: f64,
        similarity: f64,
    },
}

/// How a hidden target is rendered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occluder {
    /// The target is not drawn; the background shows through.
    Vanish,
    /// The target box is painted with a flat color.
    Box([u8; 3]),
    /// The whole frame is painted with a flat color.
    Frame([u8; 3]),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub length: usize,
    pub frame_size: (u32, u32),
    pub target_size: (f64, f64),
    /// First-frame target center; `None` centers the trajectory in the frame.
    pub start: Option<(f64, f64)>,
    pub seed: u64,
}

impl SynthSpec {
    /// 32x32 target moving 2 px per frame for 100 frames.
    pub fn translate_fixture(seed: u64) -> Self {
        Self {
            kind: SynthKind::Translate { velocity: (2.0, 0.0) },
            length: 100,
            frame_size: (320, 200),
            target_size: (32.0, 32.0),
            start: None,
            seed,
        }
    }

    /// 32x32 target growing by 2% per frame for 50 frames.
    pub fn scale_ramp_fixture(seed: u64) -> Self {
        Self {
            kind: SynthKind::ScaleRamp { rate: 1.02 },
            length: 50,
            frame_size: (240, 240),
            target_size: (32.0, 32.0),
            start: None,
            seed,
        }
    }

    /// Slowly moving target hidden for frames `40..50`.
    pub fn occlusion_fixture(seed: u64) -> Self {
        Self {
            kind: SynthKind::Occlude {
                velocity: (0.5, 0.25),
                start: 40,
                frames: 10,
                occluder: Occluder::Frame([0, 0, 0]),
            },
            length: 80,
            frame_size: (240, 200),
            target_size: (32.0, 32.0),
            start: None,
            seed,
        }
    }

    /// Target with three crossing events of a near-identical distractor. On
    /// each jump frame the distractor sits where the target was, so the
    /// strongest peak around the previous position is the distractor's.
    pub fn distractor_fixture(seed: u64) -> Self {
        Self {
            kind: SynthKind::Distractor {
                velocity: (1.0, 0.0),
                period: 25,
                jump: (22.0, 0.0),
                offset: (0.0, 0.0),
                sweep_speed: 6.0,
                similarity: 0.85,
            },
            length: 100,
            frame_size: (320, 240),
            target_size: (32.0, 32.0),
            start: None,
            seed,
        }
    }

    fn name(&self) -> &'static str {
        match self.kind {
            SynthKind::Translate { .. } => "synth-translate",
            SynthKind::ScaleRamp { .. } => "synth-scale-ramp",
            SynthKind::Occlude { .. } => "synth-occlude",
            SynthKind::Distractor { .. } => "synth-distractor",
        }
    }

    fn attributes(&self) -> Vec<String> {
        let tags: &[&str] = match self.kind {
            SynthKind::Translate { .. } => &[],
            SynthKind::ScaleRamp { .. } => &["SV"],
            SynthKind::Occlude { .. } => &["OCC"],
            SynthKind::Distractor { .. } => &["BC", "FM"],
        };
        tags.iter().map(|t| t.to_string()).collect()
    }

    fn validate(&self) -> Result<()> {
        let (fw, fh) = (self.frame_size.0 as f64, self.frame_size.1 as f64);
        let (tw, th) = self.target_size;
        if self.length == 0 || self.frame_size.0 == 0 || self.frame_size.1 == 0 {
            return invalid("synthetic sequence needs frames and a non-empty frame size");
        }
        if !(tw > 0.0 && th > 0.0 && tw.is_finite() && th.is_finite()) {
            return invalid("target size must be positive");
        }
        if tw > fw || th > fh {
            return invalid(format!("target {tw}x{th} does not fit in a {fw}x{fh} frame"));
        }
        match self.kind {
            SynthKind::ScaleRamp { rate } if !(rate > 0.0 && rate.is_finite()) => {
                invalid(format!("scale rate must be positive, got {rate}"))
            }
            SynthKind::Distractor { period, similarity, .. } if period == 0 || !(0.0..=1.0).contains(&similarity) => {
                invalid("distractor period must be positive and similarity in [0, 1]")
            }
            _ => Ok(()),
        }
    }

    /// Number of jumps at or before frame `t`.
    fn jumps_before(&self, t: usize) -> f64 {
        match self.kind {
            SynthKind::Distractor { period, .. } => (t / period) as f64,
            _ => 0.0,
        }
    }

    /// Target center relative to the first-frame center.
    fn relative_center(&self, t: usize) -> (f64, f64) {
        let tf = t as f64;
        match self.kind {
            SynthKind::Translate { velocity } | SynthKind::Occlude { velocity, .. } => {
                (velocity.0 * tf, velocity.1 * tf)
            }
            SynthKind::ScaleRamp { .. } => (0.0, 0.0),
            SynthKind::Distractor { velocity, jump, .. } => {
                let j = self.jumps_before(t);
                (velocity.0 * tf + jump.0 * j, velocity.1 * tf + jump.1 * j)
            }
        }
    }

    fn size_at(&self, t: usize) -> Size {
        let base = Size::new(self.target_size.0, self.target_size.1);
        match self.kind {
            SynthKind::ScaleRamp { rate } => base.scaled(rate.powi(t as i32)),
            _ => base,
        }
    }

    fn origin(&self) -> (f64, f64) {
        if let Some(s) = self.start {
            return s;
        }
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for t in 0..self.length {
            let (x, y) = self.relative_center(t);
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        (
            self.frame_size.0 as f64 / 2.0 - (lo.0 + hi.0) / 2.0,
            self.frame_size.1 as f64 / 2.0 - (lo.1 + hi.1) / 2.0,
        )
    }

    /// Exact target box at frame `t`.
    pub fn target_box(&self, t: usize) -> Rect {
        let (ox, oy) = self.origin();
        let (dx, dy) = self.relative_center(t);
        Rect::from_center(Point::new(ox + dx, oy + dy), self.size_at(t))
    }

    /// Distractor box at frame `t`, if it is on stage.
    pub fn distractor_box(&self, t: usize) -> Option<Rect> {
        let SynthKind::Distractor {
            period,
            offset,
            sweep_speed,
            ..
        } = self.kind
        else {
            return None;
        };
        // nearest jump frame k >= period
        let k = ((t + period / 2) / period).max(1) * period;
        if k >= self.length || t + period / 2 < k || t >= k + period.div_ceil(2) {
            return None;
        }
        let anchor = self.target_box(k - 1).center();
        let center = Point::new(
            anchor.x + offset.0,
            anchor.y + offset.1 + sweep_speed * (t as f64 - k as f64),
        );
        Some(Rect::from_center(center, self.size_at(t)))
    }

    fn occluded(&self, t: usize) -> bool {
        matches!(self.kind, SynthKind::Occlude { start, frames, .. } if t >= start && t < start + frames)
    }
}

/// A generated sequence with its exact side information.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub sequence: Sequence,
    pub spec: SynthSpec,
    /// Distractor boxes, `None` when the distractor is off stage.
    pub distractor: Vec<Option<Rect>>,
    /// Frames in which the target is hidden.
    pub occluded: Vec<bool>,
}

struct Texture {
    cols: usize,
    rows: usize,
    blocks: Vec<[f64; 3]>,
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng, size: (f64, f64)) -> Self {
        let cols = (size.0 / TEXTURE_BLOCK).ceil().max(1.0) as usize;
        let rows = (size.1 / TEXTURE_BLOCK).ceil().max(1.0) as usize;
        let blocks = (0..cols * rows)
            .map(|_| {
                [
                    rng.gen_range(0.0..255.0),
                    rng.gen_range(0.0..255.0),
                    rng.gen_range(0.0..255.0),
                ]
            })
            .collect();
        Self { cols, rows, blocks }
    }

    fn blend(&self, other: &Texture, share: f64) -> Texture {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| [0, 1, 2].map(|c| share * a[c] + (1.0 - share) * b[c]))
            .collect();
        Texture {
            cols: self.cols,
            rows: self.rows,
            blocks,
        }
    }

    /// Bilinear lookup at normalized coordinates in `[0, 1]`.
    fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let fx = (u * self.cols as f64 - 0.5).clamp(0.0, (self.cols - 1) as f64);
        let fy = (v * self.rows as f64 - 0.5).clamp(0.0, (self.rows - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.cols - 1), (y0 + 1).min(self.rows - 1));
        let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
        let b = |x: usize, y: usize| self.blocks[y * self.cols + x];
        [0, 1, 2].map(|c| {
            let top = b(x0, y0)[c] * (1.0 - ax) + b(x1, y0)[c] * ax;
            let bottom = b(x0, y1)[c] * (1.0 - ax) + b(x1, y1)[c] * ax;
            top * (1.0 - ay) + bottom * ay
        })
    }
}

fn background(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Image {
    let phase: [f64; 3] = [
        rng.gen_range(0.0..TAU),
        rng.gen_range(0.0..TAU),
        rng.gen_range(0.0..TAU),
    ];
    let mut img = Image::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let noise: f64 = rng.gen_range(-10.0..10.0);
            let r = 110.0 + 35.0 * (0.045 * xf + 0.02 * yf + phase[0]).sin() + noise;
            let g = 120.0 + 35.0 * (0.04 * yf - 0.015 * xf + phase[1]).sin() + noise;
            let b = 100.0 + 30.0 * (0.03 * (xf + yf) + phase[2]).cos() + noise;
            img.put_rgb(x, y, [r, g, b].map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }
    img
}

/// Paint `rect` with `color(u, v)` for every pixel whose center lies inside.
fn paint(img: &mut Image, rect: Rect, color: impl Fn(f64, f64) -> [f64; 3]) {
    let x0 = (rect.x - 0.5).ceil().max(0.0) as i64;
    let y0 = (rect.y - 0.5).ceil().max(0.0) as i64;
    let x1 = ((rect.right() - 0.5).ceil() as i64).min(img.width() as i64);
    let y1 = ((rect.bottom() - 0.5).ceil() as i64).min(img.height() as i64);
    for y in y0..y1 {
        for x in x0..x1 {
            let u = (x as f64 + 0.5 - rect.x) / rect.width;
            let v = (y as f64 + 0.5 - rect.y) / rect.height;
            let c = color(u, v);
            img.put_rgb(x as u32, y as u32, c.map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }
}

/// Generate the sequence described by `spec`.
pub fn synthesize_sequence(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let texture = Texture::random(&mut rng, spec.target_size);
    let other = Texture::random(&mut rng, spec.target_size);
    let distractor_texture = match spec.kind {
        SynthKind::Distractor { similarity, .. } => texture.blend(&other, similarity),
        _ => other,
    };
    let bg = background(&mut rng, spec.frame_size.0, spec.frame_size.1);

    let mut frames = Vec::with_capacity(spec.length);
    let mut ground_truth = Vec::with_capacity(spec.length);
    let mut distractor = Vec::with_capacity(spec.length);
    let mut occluded = Vec::with_capacity(spec.length);
    for t in 0..spec.length {
        let mut img = bg.clone();
        let target = spec.target_box(t);
        let d = spec.distractor_box(t);
        if let Some(d) = d {
            paint(&mut img, d, |u, v| distractor_texture.sample(u, v));
        }
        let hidden = spec.occluded(t);
        if !hidden {
            paint(&mut img, target, |u, v| texture.sample(u, v));
        } else if let SynthKind::Occlude { occluder, .. } = spec.kind {
            match occluder {
                Occluder::Vanish => {}
                Occluder::Box(c) => paint(&mut img, target, |_, _| c.map(|v| v as f64)),
                Occluder::Frame(c) => img = Image::filled(spec.frame_size.0, spec.frame_size.1, c),
            }
        }
        frames.push(img);
        ground_truth.push(Some(target));
        distractor.push(d);
        occluded.push(hidden);
    }
    Ok(Synthetic {
        sequence: Sequence {
            name: spec.name().into(),
            frames: Frames::Memory(frames),
            ground_truth,
            attributes: spec.attributes(),
        },
        spec: *spec,
        distractor,
        occluded,
    })
}

//! Sequences on disk and in memory, synthetic fixtures and result logs.
//!
//! Boxes are `(x, y, width, height)` with a 0-indexed top-left corner. OTB
//! annotations are 1-indexed and converted when they are read.

mod otb;
mod results;
pub mod synth;

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::image::Image;

pub use otb::{
    decode_image, encode_png, load_sequence, parse_ground_truth, write_sequence, GroundTruthPolicy, LoadedSequence,
    SIDECAR_FILE,
};
pub use results::{read_results, write_results, ResultLog, RESULT_FORMAT, RESULT_VERSION};
pub use synth::{synthesize_sequence, Occluder, SynthKind, SynthSpec, Synthetic};

#[derive(Clone, Debug, PartialEq)]
pub enum Frames {
    Files(Vec<PathBuf>),
    Memory(Vec<Image>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Frames,
    /// One entry per frame; `None` marks a missing annotation.
    pub ground_truth: Vec<Option<Rect>>,
    pub attributes: Vec<String>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        match &self.frames {
            Frames::Files(f) => f.len(),
            Frames::Memory(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame(&self, index: usize) -> Result<Image> {
        match &self.frames {
            Frames::Files(f) => decode_image(&f[index]),
            Frames::Memory(f) => Ok(f[index].clone()),
        }
    }

    /// Frames in order, decoded lazily.
    pub fn frame_iter(&self) -> impl Iterator<Item = Result<Image>> + '_ {
        (0..self.len()).map(move |i| self.frame(i))
    }

    /// First-frame annotation, required to start tracking.
    pub fn init_box(&self) -> Result<Rect> {
        self.ground_truth
            .first()
            .copied()
            .flatten()
            .ok_or_else(|| Error::InvalidInput(format!("sequence `{}` has no first-frame annotation", self.name)))
    }

    pub fn has_attribute(&self, tag: &str) -> bool {
        self.attributes.iter().any(|a| a.eq_ignore_ascii_case(tag))
    }
}

//! OTB directory layout: `img/` with numbered frames plus
//! `groundtruth_rect.txt`.
//!
//! An optional `sequence.cfg` sidecar holds `key = value` lines:
//! `attributes` (comma-separated tags), `start_frame` and `end_frame`
//! (inclusive frame numbers restricting which images belong to the
//! annotation, for sequences whose annotation does not start at the first
//! image).

use std::path::{Path, PathBuf};

use super::{Frames, Sequence};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::image::Image;

pub const SIDECAR_FILE: &str = "sequence.cfg";
const GROUND_TRUTH_FILES: [&str; 2] = ["groundtruth_rect.txt", "groundtruth_rect.1.txt"];

/// What to do when a sequence has no annotation file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroundTruthPolicy {
    /// Fail with [`Error::MissingGroundTruth`].
    Required,
    /// Continue with all annotations missing and report a warning.
    Optional,
}

#[derive(Clone, Debug)]
pub struct LoadedSequence {
    pub sequence: Sequence,
    pub warnings: Vec<String>,
}

/// Decode a JPEG or PNG frame, keeping gray images single-channel.
pub fn decode_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let gray = matches!(
        img.color(),
        image::ColorType::L8 | image::ColorType::La8 | image::ColorType::L16 | image::ColorType::La16
    );
    if gray {
        let buf = img.to_luma8();
        Image::new(buf.width(), buf.height(), 1, buf.into_raw())
    } else {
        let buf = img.to_rgb8();
        Image::new(buf.width(), buf.height(), 3, buf.into_raw())
    }
}

/// Encode an image as PNG.
pub fn encode_png(img: &Image, path: &Path) -> Result<()> {
    let color = if img.is_color() {
        image::ExtendedColorType::Rgb8
    } else {
        image::ExtendedColorType::L8
    };
    image::save_buffer_with_format(
        path,
        img.as_raw(),
        img.width(),
        img.height(),
        color,
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `seq` in OTB layout under `dir`: `img/0001.png, ...`, a 1-indexed
/// `groundtruth_rect.txt` (`NaN` rows for missing annotations) and a
/// sidecar listing the attributes.
pub fn write_sequence(seq: &Sequence, dir: &Path) -> Result<()> {
    let img_dir = dir.join("img");
    std::fs::create_dir_all(&img_dir)?;
    let digits = seq.len().to_string().len().max(4);
    for (i, frame) in seq.frame_iter().enumerate() {
        encode_png(&frame?, &img_dir.join(format!("{:0digits$}.png", i + 1)))?;
    }
    let mut gt = String::new();
    for rect in &seq.ground_truth {
        match rect {
            Some(r) => gt.push_str(&format!("{},{},{},{}\n", r.x + 1.0, r.y + 1.0, r.width, r.height)),
            None => gt.push_str("NaN,NaN,NaN,NaN\n"),
        }
    }
    std::fs::write(dir.join(GROUND_TRUTH_FILES[0]), gt)?;
    if !seq.attributes.is_empty() {
        std::fs::write(
            dir.join(SIDECAR_FILE),
            format!("attributes = {}\n", seq.attributes.join(",")),
        )?;
    }
    Ok(())
}

fn frame_number(path: &Path) -> Option<u64> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if !matches!(ext.as_str(), "jpg" | "jpeg" | "png") {
        return None;
    }
    path.file_stem()?.to_str()?.parse().ok()
}

/// Parse one annotation per line; comma, tab or space separated, 1-indexed.
/// `NaN` entries or non-positive sizes become missing annotations.
pub fn parse_ground_truth(text: &str, path: &Path) -> Result<Vec<Option<Rect>>> {
    let lines: Vec<&str> = text.lines().collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    let mut out = Vec::with_capacity(last);
    for (i, line) in lines[..last].iter().enumerate() {
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split([',', '\t', ' ', ';']).filter(|f| !f.is_empty()).collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 values, found {}", fields.len())));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .trim()
                .parse::<f64>()
                .map_err(|_| err(format!("`{f}` is not a number")))?;
        }
        let rect = Rect::new(v[0] - 1.0, v[1] - 1.0, v[2], v[3]);
        out.push(rect.has_positive_area().then_some(rect));
    }
    Ok(out)
}

struct Sidecar {
    attributes: Vec<String>,
    start_frame: Option<u64>,
    end_frame: Option<u64>,
}

fn read_sidecar(dir: &Path) -> Result<Sidecar> {
    let mut out = Sidecar {
        attributes: Vec::new(),
        start_frame: None,
        end_frame: None,
    };
    let path = dir.join(SIDECAR_FILE);
    if !path.exists() {
        return Ok(out);
    }
    let text = std::fs::read_to_string(&path)?;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.clone(),
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let value = value.trim();
        let number = || {
            value
                .parse::<u64>()
                .map_err(|_| err(format!("`{value}` is not a frame number")))
        };
        match key.trim() {
            "attributes" => {
                out.attributes = value
                    .split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect()
            }
            "start_frame" => out.start_frame = Some(number()?),
            "end_frame" => out.end_frame = Some(number()?),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    Ok(out)
}

/// Load an OTB-layout sequence directory.
pub fn load_sequence(dir: &Path, policy: GroundTruthPolicy) -> Result<LoadedSequence> {
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("sequence")
        .to_string();
    let img_dir = dir.join("img");
    if !img_dir.is_dir() {
        return Err(Error::InvalidInput(format!("{} has no img/ directory", dir.display())));
    }
    let sidecar = read_sidecar(dir)?;
    let mut numbered: Vec<(u64, PathBuf)> = std::fs::read_dir(&img_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| frame_number(&p).map(|n| (n, p)))
        .filter(|(n, _)| sidecar.start_frame.is_none_or(|s| *n >= s) && sidecar.end_frame.is_none_or(|e| *n <= e))
        .collect();
    numbered.sort();
    let frames: Vec<PathBuf> = numbered.into_iter().map(|(_, p)| p).collect();
    if frames.is_empty() {
        return Err(Error::InvalidInput(format!("{} contains no frames", img_dir.display())));
    }

    let mut warnings = Vec::new();
    let gt_path = GROUND_TRUTH_FILES.iter().map(|f| dir.join(f)).find(|p| p.is_file());
    let ground_truth = match gt_path {
        Some(path) => {
            let mut gt = parse_ground_truth(&std::fs::read_to_string(&path)?, &path)?;
            if gt.len() > frames.len() {
                warnings.push(format!(
                    "{name}: {} annotations for {} frames; extra annotations ignored",
                    gt.len(),
                    frames.len()
                ));
                gt.truncate(frames.len());
            } else if gt.len() < frames.len() {
                warnings.push(format!(
                    "{name}: {} annotations for {} frames; remaining frames unannotated",
                    gt.len(),
                    frames.len()
                ));
                gt.resize(frames.len(), None);
            }
            gt
        }
        None => match policy {
            GroundTruthPolicy::Required => return Err(Error::MissingGroundTruth(dir.to_path_buf())),
            GroundTruthPolicy::Optional => {
                warnings.push(format!("{name}: no ground truth file; frames are unannotated"));
                vec![None; frames.len()]
            }
        },
    };
    Ok(LoadedSequence {
        sequence: Sequence {
            name,
            frames: Frames::Files(frames),
            ground_truth,
            attributes: sidecar.attributes,
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delimiters_and_index_shift() {
        let p = Path::new("gt");
        let expect = Some(Rect::new(9.0, 19.0, 30.0, 40.0));
        for text in ["10,20,30,40", "10 20 30 40", "10\t20\t30\t40", "10, 20, 30, 40\n\n"] {
            assert_eq!(parse_ground_truth(text, p).unwrap(), vec![expect], "{text:?}");
        }
    }

    #[test]
    fn missing_entries() {
        let gt = parse_ground_truth("1,1,5,5\nNaN,NaN,NaN,NaN\n3,3,0,0\n", Path::new("gt")).unwrap();
        assert_eq!(gt, vec![Some(Rect::new(0.0, 0.0, 5.0, 5.0)), None, None]);
    }

    #[test]
    fn bad_line_is_named() {
        match parse_ground_truth("1,2,3,4\n1,2,x,4\n", Path::new("gt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_ground_truth("1,2,3\n", Path::new("gt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn frame_numbers() {
        assert_eq!(frame_number(Path::new("img/0042.jpg")), Some(42));
        assert_eq!(frame_number(Path::new("img/0042.PNG")), Some(42));
        assert_eq!(frame_number(Path::new("img/thumbs.db")), None);
        assert_eq!(frame_number(Path::new("img/a1.jpg")), None);
    }
}

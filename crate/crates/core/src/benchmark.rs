//! One-pass evaluation: precision and success curves, AUC and per-attribute
//! breakdowns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ResultLog, Sequence};
use crate::error::{Error, Result};
use crate::geometry::Rect;

pub const PRECISION_POINTS: usize = 51;
pub const SUCCESS_POINTS: usize = 21;
/// Center-error threshold reported as the headline precision.
pub const PRECISION_THRESHOLD_PX: usize = 20;

/// Center-error thresholds `0, 1, ..., 50` px.
pub fn precision_thresholds() -> Vec<f64> {
    (0..PRECISION_POINTS).map(|t| t as f64).collect()
}

/// Overlap thresholds `0, 0.05, ..., 1`.
pub fn success_thresholds() -> Vec<f64> {
    (0..SUCCESS_POINTS).map(|k| k as f64 / 20.0).collect()
}

pub fn center_error(pred: &Rect, gt: &Rect) -> f64 {
    pred.center().distance(&gt.center())
}

/// Intersection over union; 0 when the union is empty.
pub fn overlap(pred: &Rect, gt: &Rect) -> f64 {
    let inter = pred.intersection_area(gt);
    let union = pred.area() + gt.area() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Whether an overlap counts as a success at threshold `t`: strictly
/// above it, except that a perfect overlap always counts.
pub fn is_success(overlap: f64, t: f64) -> bool {
    overlap > t || overlap >= 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricCurves {
    pub precision_curve: Vec<f64>,
    pub success_curve: Vec<f64>,
    pub precision_at_20: f64,
    pub auc: f64,
}

impl MetricCurves {
    fn from_curves(precision_curve: Vec<f64>, success_curve: Vec<f64>) -> Self {
        let auc = success_curve.iter().sum::<f64>() / success_curve.len() as f64;
        Self {
            precision_at_20: precision_curve[PRECISION_THRESHOLD_PX],
            precision_curve,
            success_curve,
            auc,
        }
    }

    /// Equal-weight mean of several curve sets.
    pub fn mean(items: &[&MetricCurves]) -> Option<MetricCurves> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let avg = |f: fn(&MetricCurves) -> &Vec<f64>, len: usize| -> Vec<f64> {
            (0..len)
                .map(|i| items.iter().map(|c| f(c)[i]).sum::<f64>() / n)
                .collect()
        };
        Some(Self::from_curves(
            avg(|c| &c.precision_curve, PRECISION_POINTS),
            avg(|c| &c.success_curve, SUCCESS_POINTS),
        ))
    }
}

/// Curves of one sequence. Frames without ground truth are skipped; `None`
/// when no frame is annotated.
pub fn sequence_curves(pred: &[Rect], gt: &[Option<Rect>]) -> Option<MetricCurves> {
    let pairs: Vec<(f64, f64)> = pred
        .iter()
        .zip(gt)
        .filter_map(|(p, g)| g.map(|g| (center_error(p, &g), overlap(p, &g))))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let precision = precision_thresholds()
        .iter()
        .map(|&t| pairs.iter().filter(|(e, _)| *e <= t).count() as f64 / n)
        .collect();
    let success = success_thresholds()
        .iter()
        .map(|&t| pairs.iter().filter(|(_, o)| is_success(*o, t)).count() as f64 / n)
        .collect();
    Some(MetricCurves::from_curves(precision, success))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub name: String,
    pub frames: usize,
    pub annotated_frames: usize,
    pub curves: Option<MetricCurves>,
    /// Frames per second from recorded latencies, when present.
    pub fps: Option<f64>,
    pub update_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub overall: Option<MetricCurves>,
    pub sequences: Vec<SequenceReport>,
    pub attributes: BTreeMap<String, MetricCurves>,
}

fn sequence_report(log: &ResultLog, seq: &Sequence) -> Result<SequenceReport> {
    if log.records.len() != seq.len() {
        return Err(Error::SequenceMismatch {
            name: seq.name.clone(),
            message: format!("{} records for {} frames", log.records.len(), seq.len()),
        });
    }
    let pred: Vec<Rect> = log.records.iter().map(|r| r.bbox).collect();
    let latencies: Option<Vec<f64>> = log.records.iter().map(|r| r.latency_ms).collect();
    let fps = latencies.and_then(|l| {
        let total: f64 = l.iter().sum();
        (total > 0.0).then(|| l.len() as f64 / (total / 1e3))
    });
    let updates = log.records.iter().filter(|r| r.updated).count();
    Ok(SequenceReport {
        name: seq.name.clone(),
        frames: seq.len(),
        annotated_frames: seq.ground_truth.iter().filter(|g| g.is_some()).count(),
        curves: sequence_curves(&pred, &seq.ground_truth),
        fps,
        update_rate: updates as f64 / log.records.len().max(1) as f64,
    })
}

/// Evaluate logs against their sequences. Sequences are weighted equally;
/// an attribute's curves average the sequences tagged with it.
pub fn evaluate(logs: &[ResultLog], sequences: &[Sequence]) -> Result<BenchmarkReport> {
    if logs.len() != sequences.len() {
        return Err(Error::InvalidInput(format!(
            "{} logs for {} sequences",
            logs.len(),
            sequences.len()
        )));
    }
    let reports: Vec<SequenceReport> = logs
        .par_iter()
        .zip(sequences.par_iter())
        .map(|(l, s)| sequence_report(l, s))
        .collect::<Result<_>>()?;
    let overall = MetricCurves::mean(&reports.iter().filter_map(|r| r.curves.as_ref()).collect::<Vec<_>>());
    let mut tags: BTreeMap<String, Vec<&MetricCurves>> = BTreeMap::new();
    for (seq, rep) in sequences.iter().zip(&reports) {
        if let Some(c) = &rep.curves {
            for tag in &seq.attributes {
                tags.entry(tag.to_uppercase()).or_default().push(c);
            }
        }
    }
    let attributes = tags
        .into_iter()
        .filter_map(|(tag, items)| MetricCurves::mean(&items).map(|c| (tag, c)))
        .collect();
    Ok(BenchmarkReport {
        overall,
        sequences: reports,
        attributes,
    })
}

/// `threshold,value` lines.
pub fn curve_csv(thresholds: &[f64], values: &[f64]) -> String {
    let mut out = String::from("threshold,value\n");
    for (t, v) in thresholds.iter().zip(values) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

impl BenchmarkReport {
    /// Human-readable summary with one line per sequence and attribute.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let line = |out: &mut String, label: &str, c: &MetricCurves| {
            let _ = writeln!(
                out,
                "{label:<24} precision@20 {:.3}  AUC {:.3}",
                c.precision_at_20, c.auc
            );
        };
        match &self.overall {
            Some(c) => line(&mut out, "overall", c),
            None => out.push_str("overall                  no annotated frames\n"),
        }
        if !self.attributes.is_empty() {
            out.push_str("\nattributes\n");
            for (tag, c) in &self.attributes {
                line(&mut out, tag, c);
            }
        }
        out.push_str("\nsequences\n");
        for s in &self.sequences {
            match &s.curves {
                Some(c) => line(&mut out, &s.name, c),
                None => {
                    let _ = writeln!(out, "{:<24} no annotated frames", s.name);
                }
            }
        }
        out
    }

    /// Write `report.json`, `summary.txt` and curve tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        let mut curves: Vec<(String, &MetricCurves)> = Vec::new();
        if let Some(c) = &self.overall {
            curves.push(("overall".into(), c));
        }
        for (tag, c) in &self.attributes {
            curves.push((format!("attr_{tag}"), c));
        }
        for (name, c) in curves {
            std::fs::write(
                dir.join(format!("precision_{name}.csv")),
                curve_csv(&precision_thresholds(), &c.precision_curve),
            )?;
            std::fs::write(
                dir.join(format!("success_{name}.csv")),
                curve_csv(&success_thresholds(), &c.success_curve),
            )?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

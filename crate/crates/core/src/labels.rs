//! Gaussian score field over cyclic shifts and the margin-scaling loss
//! derived from it.

use crate::error::{invalid, Result};
use crate::feature_map::{wrapped_offset, FeatureMap};

/// Default label bandwidth as a fraction of `sqrt(target area in cells)`.
pub const DEFAULT_SIGMA_FACTOR: f64 = 0.1;

/// Score field `m` (peak 1 at shift `(0, 0)`) and root-loss field
/// `upsilon = sqrt(1 - m)`, both row-major `W x H`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelField {
    width: usize,
    height: usize,
    m: Vec<f64>,
    upsilon: Vec<f64>,
    sigma_label: f64,
}

impl LabelField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scores(&self) -> &[f64] {
        &self.m
    }

    /// Element-wise square root of the loss `1 - m`.
    pub fn upsilon(&self) -> &[f64] {
        &self.upsilon
    }

    pub fn sigma_label(&self) -> f64 {
        self.sigma_label
    }

    /// Loss of predicting shift `(x, y)` when the truth is `(0, 0)`.
    pub fn loss(&self, x: usize, y: usize) -> f64 {
        1.0 - self.m[y * self.width + x]
    }

    pub fn scores_map(&self) -> FeatureMap {
        FeatureMap::from_vec(self.width, self.height, 1, self.m.clone()).expect("label shape")
    }
}

/// Build the label field for a `width x height` cell grid and a target
/// spanning `target_cells` cells.
pub fn build_labels(width: usize, height: usize, target_cells: (f64, f64), sigma_factor: f64) -> Result<LabelField> {
    if width == 0 || height == 0 {
        return invalid("label grid must be non-empty");
    }
    let (tw, th) = target_cells;
    if !(tw >= 1.0 && th >= 1.0) {
        return invalid(format!("target must span at least one cell, got {tw}x{th}"));
    }
    if !(sigma_factor > 0.0) || !sigma_factor.is_finite() {
        return invalid(format!("sigma factor must be positive, got {sigma_factor}"));
    }
    let sigma_label = sigma_factor * (tw * th).sqrt();
    let inv = 1.0 / (2.0 * sigma_label * sigma_label);
    let mut m = Vec::with_capacity(width * height);
    for y in 0..height {
        let dy = wrapped_offset(y, height) as f64;
        for x in 0..width {
            let dx = wrapped_offset(x, width) as f64;
            m.push((-(dx * dx + dy * dy) * inv).exp());
        }
    }
    let upsilon = m.iter().map(|v| (1.0 - v).max(0.0).sqrt()).collect();
    Ok(LabelField {
        width,
        height,
        m,
        upsilon,
        sigma_label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn peak_at_origin() {
        let l = build_labels(7, 5, (3.0, 2.0), 0.1).unwrap();
        assert_eq!(l.scores()[0], 1.0);
        assert_eq!(l.upsilon()[0], 0.0);
        assert_eq!(l.loss(0, 0), 0.0);
    }

    #[test]
    fn one_sigma_value() {
        // sigma_label = 0.5 * sqrt(4 * 4) = 2 cells; shift (2, 0) sits one sigma out.
        let l = build_labels(16, 16, (4.0, 4.0), 0.5).unwrap();
        assert!((l.sigma_label() - 2.0).abs() < 1e-15);
        let m = l.scores()[2];
        assert!((m - (-0.5f64).exp()).abs() < 1e-15);
        assert!((m - 0.6065).abs() < 1e-4);
        assert!((l.upsilon()[2] - 0.6273).abs() < 1e-4);
        // the wrapped neighbour on the other side
        assert_eq!(l.scores()[14], m);
    }

    #[test]
    fn two_element_grid() {
        let l = build_labels(2, 1, (1.0, 1.0), 0.5).unwrap();
        let sigma: f64 = 0.5;
        assert_eq!(l.scores()[0], 1.0);
        assert!((l.scores()[1] - (-1.0 / (2.0 * sigma * sigma)).exp()).abs() < 1e-15);
    }

    #[test]
    fn invalid_arguments() {
        assert!(build_labels(0, 4, (1.0, 1.0), 0.1).is_err());
        assert!(build_labels(4, 4, (0.5, 1.0), 0.1).is_err());
        assert!(build_labels(4, 4, (1.0, 1.0), 0.0).is_err());
        assert!(build_labels(4, 4, (1.0, 1.0), f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn label_invariants(w in 1usize..20, h in 1usize..20, tw in 1.0f64..12.0, th in 1.0f64..12.0, f in 0.05f64..1.0) {
            let l = build_labels(w, h, (tw, th), f).unwrap();
            let m = l.scores();
            let u = l.upsilon();
            let peak = m.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(m[0], peak);
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    prop_assert!(u[i] >= 0.0);
                    prop_assert!((u[i] * u[i] + m[i] - 1.0).abs() < 1e-12);
                    let mirror = ((h - y) % h) * w + (w - x) % w;
                    prop_assert_eq!(m[i], m[mirror]);
                    // monotone in wrapped distance along each axis
                    let dx = wrapped_offset(x, w).unsigned_abs();
                    if dx > 0 {
                        let toward = if wrapped_offset(x, w) > 0 { x - 1 } else { (x + 1) % w };
                        prop_assert!(m[y * w + toward] >= m[i]);
                    }
                }
            }
        }
    }
}

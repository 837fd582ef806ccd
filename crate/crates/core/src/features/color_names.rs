//! Probabilistic color-name attributes.
//!
//! Each RGB value is softly assigned to eleven basic color terms by a
//! Gaussian affinity to a prototype in CIELAB space. The table is quantized
//! to 32 levels per channel (32768 bins, indexed `r/8 + 32*(g/8) + 1024*(b/8)`)
//! and built once. Because the eleven probabilities sum to one, the `grey`
//! term is dropped, leaving ten channels that sum to at most one.

use std::sync::OnceLock;

pub const COLOR_NAMES: usize = 10;

const LEVELS: usize = 32;
const AFFINITY_SIGMA: f64 = 20.0;

/// Basic color terms in table order, with sRGB prototypes. `grey` is the
/// dropped reference term.
const TERMS: [(&str, [u8; 3]); 11] = [
    ("black", [0, 0, 0]),
    ("blue", [0, 0, 255]),
    ("brown", [139, 69, 19]),
    ("green", [0, 160, 0]),
    ("orange", [255, 140, 0]),
    ("pink", [255, 160, 200]),
    ("purple", [128, 0, 160]),
    ("red", [255, 0, 0]),
    ("white", [255, 255, 255]),
    ("yellow", [255, 255, 0]),
    ("grey", [128, 128, 128]),
];

/// Names of the ten retained channels, in channel order.
pub fn channel_names() -> [&'static str; COLOR_NAMES] {
    let mut out = [""; COLOR_NAMES];
    for (o, t) in out.iter_mut().zip(TERMS.iter()) {
        *o = t.0;
    }
    out
}

pub fn channel_index(name: &str) -> Option<usize> {
    channel_names().iter().position(|n| *n == name)
}

fn srgb_to_linear(c: f64) -> f64 {
    let c = c / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB (D65) to CIELAB.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let x = (0.4124 * r + 0.3576 * g + 0.1805 * b) / 0.95047;
    let y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    let z = (0.0193 * r + 0.1192 * g + 0.9505 * b) / 1.08883;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Eleven-term probabilities for one RGB value.
pub fn term_probabilities(rgb: [f64; 3]) -> [f64; 11] {
    let lab = rgb_to_lab(rgb);
    let mut p = [0.0; 11];
    let inv = 1.0 / (2.0 * AFFINITY_SIGMA * AFFINITY_SIGMA);
    let mut total = 0.0;
    for (pi, (_, proto)) in p.iter_mut().zip(TERMS.iter()) {
        let q = rgb_to_lab([proto[0] as f64, proto[1] as f64, proto[2] as f64]);
        let d2: f64 = (0..3).map(|k| (lab[k] - q[k]) * (lab[k] - q[k])).sum();
        *pi = (-d2 * inv).exp();
        total += *pi;
    }
    if total > 0.0 {
        for v in p.iter_mut() {
            *v /= total;
        }
    } else {
        // far from every prototype: fall back to the nearest term
        let lab_d = |proto: &[u8; 3]| {
            let q = rgb_to_lab([proto[0] as f64, proto[1] as f64, proto[2] as f64]);
            (0..3).map(|k| (lab[k] - q[k]) * (lab[k] - q[k])).sum::<f64>()
        };
        let best = (0..11)
            .min_by(|&a, &b| lab_d(&TERMS[a].1).total_cmp(&lab_d(&TERMS[b].1)))
            .unwrap_or(10);
        p[best] = 1.0;
    }
    p
}

fn table() -> &'static [[f32; COLOR_NAMES]] {
    static TABLE: OnceLock<Vec<[f32; COLOR_NAMES]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let step = 256 / LEVELS;
        let center = |i: usize| (i * step + step / 2) as f64;
        let mut t = vec![[0.0f32; COLOR_NAMES]; LEVELS * LEVELS * LEVELS];
        for b in 0..LEVELS {
            for g in 0..LEVELS {
                for r in 0..LEVELS {
                    let p = term_probabilities([center(r), center(g), center(b)]);
                    let entry = &mut t[r + LEVELS * g + LEVELS * LEVELS * b];
                    for (e, v) in entry.iter_mut().zip(p.iter()) {
                        *e = *v as f32;
                    }
                }
            }
        }
        t
    })
}

/// Ten color-name probabilities for an 8-bit RGB pixel.
#[inline]
pub fn lookup(rgb: [u8; 3]) -> &'static [f32; COLOR_NAMES] {
    let idx = (rgb[0] as usize >> 3) + LEVELS * (rgb[1] as usize >> 3) + LEVELS * LEVELS * (rgb[2] as usize >> 3);
    &table()[idx]
}

//! Annotated frames: predicted box, optional ground truth and a corner badge
//! with the peak value, APCE and update flag.

use crate::geometry::Rect;
use crate::image::Image;
use crate::tracker::FrameOutput;

pub const UPDATED_COLOR: [u8; 3] = [40, 220, 60];
pub const HELD_COLOR: [u8; 3] = [235, 50, 40];
pub const TRUTH_COLOR: [u8; 3] = [60, 140, 255];

const GLYPH_W: u32 = 3;
const GLYPH_H: u32 = 5;
const GLYPH_SCALE: u32 = 2;

/// 3x5 glyph rows, most significant of the low three bits on the left.
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b001, 0b001, 0b001],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        'A' => [0b010, 0b101, 0b111, 0b101, 0b101],
        'C' => [0b111, 0b100, 0b100, 0b100, 0b111],
        'D' => [0b110, 0b101, 0b101, 0b101, 0b110],
        'E' => [0b111, 0b100, 0b111, 0b100, 0b111],
        'F' => [0b111, 0b100, 0b111, 0b100, 0b100],
        'M' => [0b101, 0b111, 0b111, 0b101, 0b101],
        'N' => [0b110, 0b101, 0b101, 0b101, 0b101],
        'P' => [0b111, 0b101, 0b111, 0b100, 0b100],
        'U' => [0b101, 0b101, 0b101, 0b101, 0b111],
        'X' => [0b101, 0b101, 0b010, 0b101, 0b101],
        'Y' => [0b101, 0b101, 0b010, 0b010, 0b010],
        _ => [0; 5],
    }
}

fn put(img: &mut Image, x: i64, y: i64, rgb: [u8; 3]) {
    if x >= 0 && y >= 0 && x < img.width() as i64 && y < img.height() as i64 {
        img.put_rgb(x as u32, y as u32, rgb);
    }
}

fn fill(img: &mut Image, x0: i64, y0: i64, w: i64, h: i64, rgb: [u8; 3]) {
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            put(img, x, y, rgb);
        }
    }
}

/// Outline `rect` with a `thickness`-pixel border drawn inside it.
pub fn draw_rect(img: &mut Image, rect: &Rect, rgb: [u8; 3], thickness: i64) {
    let x0 = rect.x.round() as i64;
    let y0 = rect.y.round() as i64;
    let x1 = rect.right().round() as i64;
    let y1 = rect.bottom().round() as i64;
    let (w, h) = (x1 - x0, y1 - y0);
    if w <= 0 || h <= 0 {
        return;
    }
    let t = thickness.min(w).min(h);
    fill(img, x0, y0, w, t, rgb);
    fill(img, x0, y1 - t, w, t, rgb);
    fill(img, x0, y0, t, h, rgb);
    fill(img, x1 - t, y0, t, h, rgb);
}

/// Pixel width of `text` rendered by [`draw_text`].
pub fn text_width(text: &str) -> u32 {
    text.chars().count() as u32 * (GLYPH_W + 1) * GLYPH_SCALE
}

/// Render upper-case `text` with its top-left corner at `(x, y)`.
pub fn draw_text(img: &mut Image, x: i64, y: i64, text: &str, rgb: [u8; 3]) {
    let s = GLYPH_SCALE as i64;
    for (i, c) in text.chars().enumerate() {
        let gx = x + i as i64 * (GLYPH_W as i64 + 1) * s;
        for (row, bits) in glyph(c.to_ascii_uppercase()).iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits >> (GLYPH_W - 1 - col) & 1 == 1 {
                    fill(img, gx + col as i64 * s, y + row as i64 * s, s, s, rgb);
                }
            }
        }
    }
}

/// Badge text for one frame.
pub fn badge_text(output: &FrameOutput) -> String {
    let apce = output.apce.map_or("-".to_string(), |a| format!("{a:.1}"));
    format!(
        "FMAX {:.3} APCE {} UPD {}",
        output.f_max,
        apce,
        if output.updated { "Y" } else { "N" }
    )
}

/// Color copy of `frame` with the prediction, the ground truth (if any) and
/// the badge drawn in.
pub fn render(frame: &Image, output: &FrameOutput, truth: Option<&Rect>) -> Image {
    let mut img = if frame.is_color() {
        frame.clone()
    } else {
        let mut c = Image::filled(frame.width(), frame.height(), [0, 0, 0]);
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                c.put_rgb(x, y, frame.rgb(x, y));
            }
        }
        c
    };
    if let Some(t) = truth {
        draw_rect(&mut img, t, TRUTH_COLOR, 1);
    }
    let color = if output.updated { UPDATED_COLOR } else { HELD_COLOR };
    draw_rect(&mut img, &output.bbox, color, 2);
    let text = badge_text(output);
    let pad = 3;
    fill(
        &mut img,
        0,
        0,
        (text_width(&text) + 2 * pad) as i64,
        (GLYPH_H * GLYPH_SCALE + 2 * pad) as i64,
        [0, 0, 0],
    );
    draw_text(&mut img, pad as i64, pad as i64, &text, color);
    img
}

//! 5x7 bitmap glyphs for digits and decimal separators.

use crate::raster::GrayImage;

pub const GLYPH_HEIGHT: usize = 7;

fn glyph(c: char) -> Option<&'static [&'static str; 7]> {
    Some(match c {
        '0' => &[".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
        '1' => &["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
        '2' => &[".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
        '3' => &["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
        '4' => &["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
        '5' => &["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
        '6' => &["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
        '7' => &["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
        '8' => &[".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
        '9' => &[".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
        '.' => &["..", "..", "..", "..", "..", "##", "##"],
        ',' => &["..", "..", "..", "..", "##", ".#", "#."],
        _ => return None,
    })
}

/// Width in pixels of `text` at `scale`, one scaled column between glyphs.
/// Characters without a glyph are skipped.
pub fn text_width(text: &str, scale: usize) -> usize {
    let widths: Vec<usize> = text.chars().filter_map(glyph).map(|g| g[0].len()).collect();
    if widths.is_empty() {
        return 0;
    }
    (widths.iter().sum::<usize>() + widths.len() - 1) * scale
}

/// Stamps `text` with its top-left corner at `(x, y)`, clipping at the border.
pub fn draw_text(img: &mut GrayImage, text: &str, x: usize, y: usize, scale: usize, ink: u8) {
    let mut pen = x;
    for g in text.chars().filter_map(glyph) {
        for (gy, row) in g.iter().enumerate() {
            for (gx, b) in row.bytes().enumerate() {
                if b != b'#' {
                    continue;
                }
                for sy in 0..scale {
                    for sx in 0..scale {
                        let (px, py) = (pen + gx * scale + sx, y + gy * scale + sy);
                        if px < img.width() && py < img.height() {
                            img.set(px, py, ink);
                        }
                    }
                }
            }
        }
        pen += (g[0].len() + 1) * scale;
    }
}

/// `text` on a white canvas exactly its own size.
pub fn render_text(text: &str, scale: usize) -> GrayImage {
    let mut img = GrayImage::filled(text_width(text, scale).max(1), GLYPH_HEIGHT * scale, 255);
    draw_text(&mut img, text, 0, 0, scale, 0);
    img
}

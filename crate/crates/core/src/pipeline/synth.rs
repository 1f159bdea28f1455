use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::font::{draw_text, text_width, GLYPH_HEIGHT};
use super::{PipelineConfig, PipelineError, Truth};
use crate::preprocess::rotate;
use crate::raster::{save_image, GrayImage};

pub const MARGIN: usize = 40;
pub const COLUMN_WIDTHS: [usize; 7] = [50, 170, 180, 90, 80, 80, 70];
pub const TABLE_TOP: usize = 100;
pub const ROW_HEIGHT: usize = 32;
pub const ID_COLUMN: usize = 1;
pub const SCORE_COLUMN: usize = 5;
pub const ANCHOR_ORIGIN: (usize, usize) = (40, 24);
const ANCHOR_SIZE: usize = 28;
const PAGE_WIDTH: usize = 800;
const BOTTOM_MARGIN: usize = 60;
const INK: u8 = 20;
const MAX_ROWS: usize = 200;
const BLANK_SCORE_RATE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub rows: usize,
    pub skew_deg: f64,
    pub noise_sigma: f64,
}

#[derive(Clone, Debug)]
pub struct SynthPage {
    pub image: GrayImage,
    pub truth: Truth,
}

/// Square frame with a solid core: unlike any digit, so NCC locks on it.
pub fn anchor_template() -> GrayImage {
    GrayImage::from_fn(ANCHOR_SIZE, ANCHOR_SIZE, |x, y| {
        let edge = x.min(y).min(ANCHOR_SIZE - 1 - x).min(ANCHOR_SIZE - 1 - y);
        if edge < 3 || (9..19).contains(&x) && (9..19).contains(&y) {
            INK
        } else {
            255
        }
    })
}

/// Config matching the generator's layout: no header row inside the grid.
pub fn synth_config() -> PipelineConfig {
    PipelineConfig {
        id_column: ID_COLUMN,
        score_column: SCORE_COLUMN,
        header_rows: 0,
        class_id_template: Some(PathBuf::from("anchor.pgm")),
        ..PipelineConfig::default()
    }
}

/// Writes `anchor.pgm` and `synth.conf` into `out_dir`.
pub fn write_synth_support(out_dir: impl AsRef<Path>) -> Result<(), PipelineError> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    save_image(&anchor_template(), dir.join("anchor.pgm"))?;
    std::fs::write(dir.join("synth.conf"), synth_config().to_text())?;
    Ok(())
}

fn digits(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

fn score_text(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(BLANK_SCORE_RATE) {
        return String::new();
    }
    let int = rng.gen_range(0..=10u32);
    if int == 10 || rng.gen_bool(0.4) {
        return int.to_string();
    }
    let frac = ["5", "25", "75", "0"][rng.gen_range(0..4)];
    let sep = if rng.gen_bool(0.8) { '.' } else { ',' };
    format!("{int}{sep}{frac}")
}

fn fill_rect(img: &mut GrayImage, x0: usize, y0: usize, x1: usize, y1: usize) {
    for y in y0..y1.min(img.height()) {
        for x in x0..x1.min(img.width()) {
            img.set(x, y, INK);
        }
    }
}

/// Renders a ruled score sheet with its ground truth.
///
/// The table has `rows + 1` horizontal and 8 vertical 3 px rulings centered
/// on the truth positions. Column captions sit above the top ruling, so every
/// grid row is a data row. Skew rotates the finished page about its center;
/// noise is added last.
pub fn render_transcript(p: &SynthParams) -> Result<SynthPage, PipelineError> {
    if p.rows == 0 || p.rows > MAX_ROWS {
        return Err(PipelineError::InvalidParam(format!("rows must lie in 1..={MAX_ROWS}, got {}", p.rows)));
    }
    if !(p.skew_deg.abs() <= 45.0) {
        return Err(PipelineError::InvalidParam(format!("skew out of range: {}", p.skew_deg)));
    }
    if !(p.noise_sigma >= 0.0 && p.noise_sigma.is_finite()) {
        return Err(PipelineError::InvalidParam(format!("noise sigma must be finite and >= 0: {}", p.noise_sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let height = TABLE_TOP + p.rows * ROW_HEIGHT + BOTTOM_MARGIN;
    let mut img = GrayImage::filled(PAGE_WIDTH, height, 255);

    let h_positions: Vec<usize> = (0..=p.rows).map(|i| TABLE_TOP + i * ROW_HEIGHT).collect();
    let mut v_positions = vec![MARGIN];
    for w in COLUMN_WIDTHS {
        v_positions.push(v_positions.last().unwrap() + w);
    }
    let (left, right) = (v_positions[0], *v_positions.last().unwrap());
    let (top, bottom) = (h_positions[0], *h_positions.last().unwrap());

    let class_id = digits(&mut rng, 6);
    img.paste(&anchor_template(), ANCHOR_ORIGIN.0, ANCHOR_ORIGIN.1);
    let glyph_top = ANCHOR_ORIGIN.1 + (ANCHOR_SIZE - GLYPH_HEIGHT * 3) / 2;
    draw_text(&mut img, &class_id, ANCHOR_ORIGIN.0 + ANCHOR_SIZE + 10, glyph_top, 3, INK);
    for (c, &x) in v_positions[..7].iter().enumerate() {
        draw_text(&mut img, &(c + 1).to_string(), x + 8, top - 22, 2, INK);
    }

    let mut rows = Vec::with_capacity(p.rows);
    for (r, &y) in h_positions[..p.rows].iter().enumerate() {
        let id = format!("20{}{}", rng.gen_range(15..23u32), digits(&mut rng, 4));
        let score = score_text(&mut rng);
        let name_len = rng.gen_range(4..10);
        let cells = [
            ((r + 1).to_string(), 3),
            (id.clone(), 3),
            (digits(&mut rng, name_len), 2),
            (format!("{}.{}.{}", digits(&mut rng, 2), digits(&mut rng, 2), digits(&mut rng, 2)), 2),
            (rng.gen_range(1..13u32).to_string(), 3),
            (score.clone(), 3),
            (String::new(), 3),
        ];
        for (c, (text, scale)) in cells.iter().enumerate() {
            let room = COLUMN_WIDTHS[c].saturating_sub(text_width(text, *scale) + 8);
            let dx = 6 + rng.gen_range(0..=room.min(6));
            let dy = (ROW_HEIGHT - GLYPH_HEIGHT * scale) / 2 + rng.gen_range(0..=1);
            draw_text(&mut img, text, v_positions[c] + dx, y + dy, *scale, INK);
        }
        rows.push([id, score]);
    }

    for &y in &h_positions {
        fill_rect(&mut img, left - 1, y - 1, right + 2, y + 2);
    }
    for &x in &v_positions {
        fill_rect(&mut img, x - 1, top - 1, x + 2, bottom + 2);
    }

    if p.skew_deg != 0.0 {
        img = rotate(&img, p.skew_deg, 255);
    }
    if p.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, p.noise_sigma).map_err(|e| PipelineError::InvalidParam(e.to_string()))?;
        for v in img.data_mut() {
            *v = (*v as f64 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
        }
    }

    Ok(SynthPage {
        image: img,
        truth: Truth {
            image: format!("synth_{:06}.pgm", p.seed),
            class_id: Some(class_id),
            header_rows: 0,
            h_positions,
            v_positions,
            rows,
        },
    })
}

/// Renders a page and writes `synth_<seed>.pgm` plus `synth_<seed>.truth.json`.
pub fn synth_transcript(
    seed: u64,
    rows: usize,
    skew_deg: f64,
    noise_sigma: f64,
    out_dir: impl AsRef<Path>,
) -> Result<(PathBuf, PathBuf), PipelineError> {
    let page = render_transcript(&SynthParams {
        seed,
        rows,
        skew_deg,
        noise_sigma,
    })?;
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let image_path = dir.join(&page.truth.image);
    let truth_path = dir.join(format!("synth_{seed:06}.truth.json"));
    save_image(&page.image, &image_path)?;
    std::fs::write(&truth_path, serde_json::to_string_pretty(&page.truth)? + "\n")?;
    Ok((image_path, truth_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64, rows: usize) -> SynthParams {
        SynthParams {
            seed,
            rows,
            skew_deg: 0.0,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn line_counts() {
        let page = render_transcript(&params(1, 1)).unwrap();
        assert_eq!(page.truth.h_positions.len(), 2);
        assert_eq!(page.truth.v_positions.len(), 8);
        assert_eq!(page.truth.rows.len(), 1);
        let page = render_transcript(&params(1, 30)).unwrap();
        assert_eq!(page.truth.h_positions.len(), 31);
        assert_eq!(*page.truth.v_positions.last().unwrap(), 760);
    }

    #[test]
    fn rulings_are_centered_on_truth() {
        let page = render_transcript(&params(4, 5)).unwrap();
        let y = page.truth.h_positions[2];
        let x = 500;
        assert_eq!([page.image.get(x, y - 2), page.image.get(x, y - 1)], [255, INK]);
        assert_eq!([page.image.get(x, y + 1), page.image.get(x, y + 2)], [INK, 255]);
        let x = page.truth.v_positions[3];
        assert_eq!(page.image.get(x - 2, 150), 255);
        assert_eq!(page.image.get(x + 1, 150), INK);
        assert_eq!(page.image.get(x + 2, 150), 255);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (ia, ta) = synth_transcript(9, 12, 2.0, 8.0, a.path()).unwrap();
        let (ib, tb) = synth_transcript(9, 12, 2.0, 8.0, b.path()).unwrap();
        assert_eq!(std::fs::read(ia).unwrap(), std::fs::read(ib).unwrap());
        assert_eq!(std::fs::read(ta).unwrap(), std::fs::read(tb).unwrap());
        let (ic, _) = synth_transcript(10, 12, 2.0, 8.0, b.path()).unwrap();
        assert_ne!(std::fs::read(a.path().join("synth_000009.pgm")).unwrap(), std::fs::read(ic).unwrap());
    }

    #[test]
    fn invalid_params() {
        for p in [
            params(0, 0),
            SynthParams { skew_deg: 60.0, ..params(0, 3) },
            SynthParams { noise_sigma: -1.0, ..params(0, 3) },
            SynthParams { noise_sigma: f64::NAN, ..params(0, 3) },
        ] {
            assert!(matches!(render_transcript(&p), Err(PipelineError::InvalidParam(_))));
        }
    }

    #[test]
    fn scores_follow_the_grammar_or_are_blank() {
        let page = render_transcript(&params(3, 200)).unwrap();
        let blanks = page.truth.rows.iter().filter(|r| r[1].is_empty()).count();
        assert!(blanks > 0 && blanks < 30);
        for [id, score] in &page.truth.rows {
            assert_eq!(id.len(), 8);
            assert!(score.is_empty() || super::super::parse_score(score).is_ok(), "{score}");
        }
    }

    #[test]
    fn anchor_appears_on_page() {
        let page = render_transcript(&params(2, 3)).unwrap();
        let a = anchor_template();
        let patch = page.image.crop(ANCHOR_ORIGIN.0, ANCHOR_ORIGIN.1, a.width(), a.height()).unwrap();
        assert_eq!(patch, a);
    }
}

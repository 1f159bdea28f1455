use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{parse_score, PipelineConfig, PipelineError};
use crate::crnn::{forward, preprocess_cell, CrnnError, ModelWeights};
use crate::ctc::{beam_decode, Alphabet};
use crate::exec::ExecMode;
use crate::gridparse::{
    build_grid, crop_cell, extract_line_masks, hough_lines_with, merge_lines, template_match_ncc_with, GridModel, PolarLine,
};
use crate::preprocess::{binarize, deskew_with, gaussian_blur, otsu_threshold, rotate, DeskewReport};
use crate::raster::{load_image, save_image, GrayImage};

/// Cells with less ink than this fraction are read as empty.
pub const BLANK_INK_FRACTION: f64 = 0.005;
/// Anchor matches below this NCC score mean "no class ID on this page".
pub const CLASS_ID_MIN_SCORE: f64 = 0.6;
/// Records below this confidence are flagged for review.
pub const FLAG_CONFIDENCE: f64 = 0.3;
const INK_LEVEL: u8 = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    /// Data row index, counted after the header rows.
    pub row: usize,
    pub student_id: String,
    pub score_text: String,
    pub score_value: Option<f64>,
    pub confidence: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSummary {
    pub rows: usize,
    pub cols: usize,
    pub h_positions: Vec<usize>,
    pub v_positions: Vec<usize>,
}

impl From<&GridModel> for GridSummary {
    fn from(g: &GridModel) -> Self {
        Self {
            rows: g.rows(),
            cols: g.cols(),
            h_positions: g.h_positions().to_vec(),
            v_positions: g.v_positions().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptResult {
    pub source: String,
    pub class_id: Option<String>,
    pub deskew_angle: f64,
    pub header_rows: usize,
    pub grid: GridSummary,
    pub records: Vec<ScoreRecord>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub mode: ExecMode,
    /// Intermediate images are written here as `<stem>.<stage>.pgm`.
    pub debug_dir: Option<PathBuf>,
}

/// Geometry recovered from a page before any recognition.
#[derive(Clone, Debug)]
pub struct Layout {
    pub deskew: DeskewReport,
    pub grid: GridModel,
    /// The input grayscale rotated by the deskew angle.
    pub page: GrayImage,
}

pub fn ink_fraction(cell: &GrayImage) -> f64 {
    let ink = cell.data().iter().filter(|&&p| p < INK_LEVEL).count();
    ink as f64 / cell.data().len() as f64
}

/// Reads one cell: network, then beam search over the digit alphabet.
/// Near-empty cells short-circuit to `("", 1.0)`.
pub fn recognize_cell(cell: &GrayImage, weights: &ModelWeights, beam_width: usize) -> Result<(String, f64), CrnnError> {
    if cell.data().is_empty() {
        return Err(CrnnError::EmptyImage);
    }
    if ink_fraction(cell) < BLANK_INK_FRACTION {
        return Ok((String::new(), 1.0));
    }
    let lp = forward(weights, &preprocess_cell(cell)?)?;
    let decoded = beam_decode(&lp, &Alphabet::digits(), beam_width)?;
    let conf = decoded.confidence(lp.frames());
    Ok((decoded.text, conf))
}

/// Keeps lines at the strongest line's angle. After deskew every ruling
/// shares one accumulator angle; off-angle peaks are artifacts of thick
/// strokes and segment ends.
fn parallel_to_strongest(lines: Vec<PolarLine>) -> Vec<PolarLine> {
    // hough output is sorted strongest first
    let Some(best) = lines.first() else {
        return lines;
    };
    let theta = best.theta;
    lines.into_iter().filter(|l| l.theta == theta).collect()
}

fn positions(lines: Vec<i64>, bound: usize) -> Vec<usize> {
    lines
        .into_iter()
        .filter(|&p| p >= 0 && (p as usize) < bound)
        .map(|p| p as usize)
        .collect()
}

fn analyze(
    img: &GrayImage,
    config: &PipelineConfig,
    mode: ExecMode,
    mut dump: impl FnMut(&str, &GrayImage),
) -> Result<Layout, PipelineError> {
    let blurred = gaussian_blur(img, config.gaussian_sigma, config.gaussian_radius)?;
    let bin = binarize(&blurred, otsu_threshold(&blurred));
    dump("blurred", &blurred);
    dump("binary", &bin.to_gray());
    let (report, bin) = deskew_with(&bin, config.deskew_params(), mode)?;
    debug!("deskew angle {:.2}", report.applied_angle);
    dump("deskewed", &bin.to_gray());
    let page = rotate(img, report.applied_angle, 255);

    let (hmask, vmask) = extract_line_masks(&bin, config.h_min_len_frac, config.v_min_len_frac)?;
    dump("hmask", &hmask.to_gray());
    dump("vmask", &vmask.to_gray());
    let hlines = parallel_to_strongest(hough_lines_with(&hmask, &config.hough_params(90.0), mode)?);
    let vlines = parallel_to_strongest(hough_lines_with(&vmask, &config.hough_params(0.0), mode)?);
    let h = positions(merge_lines(&hlines, config.merge_rho_tol), bin.height());
    let v = positions(merge_lines(&vlines, config.merge_rho_tol), bin.width());
    debug!("{} horizontal, {} vertical lines", h.len(), v.len());
    let grid = build_grid(&h, &v, bin.width(), bin.height())?;
    Ok(Layout {
        deskew: report,
        grid,
        page,
    })
}

/// Blur, binarize, deskew, extract rulings and build the grid.
pub fn analyze_layout(img: &GrayImage, config: &PipelineConfig, mode: ExecMode) -> Result<Layout, PipelineError> {
    analyze(img, config, mode, |_, _| {})
}

static CROP_COUNTER: AtomicUsize = AtomicUsize::new(0);

/// Runs the configured OCR command on `crop` and returns its trimmed stdout.
pub fn run_external_ocr(command: &str, crop: &GrayImage) -> Result<String, PipelineError> {
    let fail = |m: String| PipelineError::ExternalCommandFailed(m);
    let n = CROP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let path = std::env::temp_dir().join(format!("transcript-crop-{}-{n}.pgm", std::process::id()));
    save_image(crop, &path)?;
    let mut parts: Vec<String> = command.split_whitespace().map(str::to_string).collect();
    if parts.is_empty() {
        return Err(fail("empty command".into()));
    }
    let arg = path.display().to_string();
    if parts.iter().any(|p| p == "{}") {
        parts.iter_mut().filter(|p| *p == "{}").for_each(|p| *p = arg.clone());
    } else {
        parts.push(arg);
    }
    let out = Command::new(&parts[0]).args(&parts[1..]).output();
    let _ = std::fs::remove_file(&path);
    let out = out.map_err(|e| fail(format!("{}: {e}", parts[0])))?;
    if !out.status.success() {
        return Err(fail(format!("{} exited with {}", parts[0], out.status)));
    }
    let text = String::from_utf8_lossy(&out.stdout).trim().to_string();
    if text.is_empty() {
        return Err(fail(format!("{} printed nothing", parts[0])));
    }
    Ok(text)
}

/// Finds the header anchor and reads the strip to its right.
///
/// Absent when there is no template, the best match scores below
/// [`CLASS_ID_MIN_SCORE`], or recognition fails.
pub fn recognize_class_id(
    img: &GrayImage,
    template: Option<&GrayImage>,
    config: &PipelineConfig,
    weights: &ModelWeights,
    mode: ExecMode,
) -> Option<String> {
    let template = template?;
    let m = match template_match_ncc_with(img, template, mode) {
        Ok(m) => m,
        Err(e) => {
            warn!("class ID anchor: {e}");
            return None;
        }
    };
    if m.score < CLASS_ID_MIN_SCORE {
        debug!("class ID anchor score {:.3} below threshold", m.score);
        return None;
    }
    let x = m.x + template.width();
    let w = config.class_id_width.min(img.width().saturating_sub(x));
    let crop = img.crop(x, m.y, w, template.height())?;
    let text = match &config.ocr_command {
        Some(cmd) => run_external_ocr(cmd, &crop).map_err(|e| warn!("class ID: {e}")).ok()?,
        None => recognize_cell(&crop, weights, config.beam_width)
            .map_err(|e| warn!("class ID: {e}"))
            .ok()?
            .0,
    };
    (!text.is_empty()).then_some(text)
}

enum CellKind {
    Id,
    Score,
}

/// Full pipeline on an already loaded page.
pub fn process_image(
    img: &GrayImage,
    source: &str,
    config: &PipelineConfig,
    weights: &ModelWeights,
    opts: &RunOptions,
) -> Result<TranscriptResult, PipelineError> {
    config.validate()?;
    let stem = Path::new(source)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "page".into());
    let mut dump_err = None;
    let layout = analyze(img, config, opts.mode, |stage, im| {
        if let Some(dir) = &opts.debug_dir {
            if let Err(e) = std::fs::create_dir_all(dir).map_err(Into::into).and_then(|_| save_image(im, dir.join(format!("{stem}.{stage}.pgm")))) {
                dump_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = dump_err {
        return Err(e.into());
    }

    let template = config.class_id_template.as_ref().map(load_image).transpose()?;
    let class_id = recognize_class_id(&layout.page, template.as_ref(), config, weights, opts.mode);

    let grid = &layout.grid;
    let data_rows: Vec<usize> = (config.header_rows.min(grid.rows())..grid.rows()).collect();
    let jobs: Vec<(usize, CellKind)> = data_rows
        .iter()
        .flat_map(|&r| [(r, CellKind::Id), (r, CellKind::Score)])
        .collect();
    let read = |(row, kind): &(usize, CellKind)| -> (String, f64) {
        let col = match kind {
            CellKind::Id => config.id_column,
            CellKind::Score => config.score_column,
        };
        let cell = match crop_cell(&layout.page, grid, *row, col, config.inset) {
            Ok(c) => c,
            Err(e) => {
                warn!("{source}: row {row} col {col}: {e}");
                return (String::new(), 0.0);
            }
        };
        let external = match (kind, &config.ocr_command) {
            (CellKind::Id, Some(cmd)) if ink_fraction(&cell) >= BLANK_INK_FRACTION => Some(cmd),
            _ => None,
        };
        let result = match external {
            Some(cmd) => run_external_ocr(cmd, &cell).map(|t| (t, 1.0)),
            None => recognize_cell(&cell, weights, config.beam_width).map_err(Into::into),
        };
        result.unwrap_or_else(|e| {
            warn!("{source}: row {row} col {col}: {e}");
            (String::new(), 0.0)
        })
    };
    let texts = opts.mode.map(&jobs, read);

    let records = texts
        .chunks(2)
        .zip(&data_rows)
        .map(|(pair, &row)| {
            let (id, id_conf) = &pair[0];
            let (score, score_conf) = &pair[1];
            let confidence = id_conf.min(*score_conf);
            ScoreRecord {
                row: row - config.header_rows.min(grid.rows()),
                student_id: id.clone(),
                score_text: score.clone(),
                score_value: parse_score(score).ok(),
                confidence,
                flagged: confidence < FLAG_CONFIDENCE,
            }
        })
        .collect();

    Ok(TranscriptResult {
        source: source.to_string(),
        class_id,
        deskew_angle: layout.deskew.applied_angle,
        header_rows: config.header_rows,
        grid: GridSummary::from(grid),
        records,
    })
}

pub fn process_transcript(
    path: impl AsRef<Path>,
    config: &PipelineConfig,
    weights: &ModelWeights,
) -> Result<TranscriptResult, PipelineError> {
    let path = path.as_ref();
    process_image(&load_image(path)?, &path.display().to_string(), config, weights, &RunOptions::default())
}

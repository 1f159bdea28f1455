use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, TranscriptResult};

const LINE_TOLERANCE: i64 = 3;

/// Ground truth for one page.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    /// File name of the page image.
    pub image: String,
    #[serde(default)]
    pub class_id: Option<String>,
    pub header_rows: usize,
    pub h_positions: Vec<usize>,
    pub v_positions: Vec<usize>,
    /// `[student_id, score_text]` per data row.
    pub rows: Vec<[String; 2]>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += ok as usize;
    }

    pub fn ratio(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub vertical_line_acc: f64,
    pub horizontal_line_acc: f64,
    pub id_seq_acc: f64,
    pub score_seq_acc: f64,
    pub vertical_lines: Tally,
    pub horizontal_lines: Tally,
    pub ids: Tally,
    pub scores: Tally,
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<Truth, PipelineError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// A single truth file, or every `*.truth.json` in a directory (sorted).
pub fn load_truths(path: impl AsRef<Path>) -> Result<Vec<Truth>, PipelineError> {
    let path = path.as_ref();
    if !path.is_dir() {
        return Ok(vec![load_truth(path)?]);
    }
    let mut files: Vec<_> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".truth.json"))
        .collect();
    files.sort();
    files.iter().map(load_truth).collect()
}

fn count_lines(tally: &mut Tally, detected: &[usize], truth: &[usize]) {
    for &t in truth {
        tally.add(detected.iter().any(|&d| (d as i64 - t as i64).abs() <= LINE_TOLERANCE));
    }
}

fn file_name(source: &str) -> &str {
    Path::new(source).file_name().and_then(|n| n.to_str()).unwrap_or(source)
}

/// Scores predictions against truth pages, aggregated over all pages.
///
/// Pages pair up by image file name. A truth page with no prediction counts
/// every line and cell as missed; a prediction with no truth page, or with
/// records past the truth's last row, is a [`PipelineError::TruthMismatch`].
pub fn evaluate(pred: &[TranscriptResult], truth: &[Truth]) -> Result<Metrics, PipelineError> {
    let mut by_name: HashMap<&str, &TranscriptResult> = HashMap::new();
    for p in pred {
        if by_name.insert(file_name(&p.source), p).is_some() {
            return Err(PipelineError::TruthMismatch(format!("duplicate prediction for {}", p.source)));
        }
    }
    let known: Vec<&str> = truth.iter().map(|t| t.image.as_str()).collect();
    if let Some(p) = pred.iter().find(|p| !known.contains(&file_name(&p.source))) {
        return Err(PipelineError::TruthMismatch(format!("no truth page for {}", p.source)));
    }

    let (mut v, mut h, mut ids, mut scores) = Default::default();
    for t in truth {
        let p = by_name.get(t.image.as_str());
        let empty = Vec::new();
        count_lines(&mut v, p.map_or(&empty, |p| &p.grid.v_positions), &t.v_positions);
        count_lines(&mut h, p.map_or(&empty, |p| &p.grid.h_positions), &t.h_positions);
        let mut cells: Vec<Option<(&str, &str)>> = vec![None; t.rows.len()];
        for r in p.map_or(&[][..], |p| &p.records[..]) {
            let slot = cells.get_mut(r.row).ok_or_else(|| {
                PipelineError::TruthMismatch(format!("{}: record row {} but truth has {} rows", t.image, r.row, t.rows.len()))
            })?;
            *slot = Some((&r.student_id, &r.score_text));
        }
        for ([tid, tscore], cell) in t.rows.iter().zip(&cells) {
            Tally::add(&mut ids, cell.is_some_and(|c| c.0 == tid));
            Tally::add(&mut scores, cell.is_some_and(|c| c.1 == tscore));
        }
    }
    let tallies: [&Tally; 4] = [&v, &h, &ids, &scores];
    if tallies.iter().any(|t| t.total == 0) {
        return Err(PipelineError::TruthMismatch("truth holds no lines or no rows".into()));
    }
    Ok(Metrics {
        vertical_line_acc: v.ratio(),
        horizontal_line_acc: h.ratio(),
        id_seq_acc: ids.ratio(),
        score_seq_acc: scores.ratio(),
        vertical_lines: v,
        horizontal_lines: h,
        ids,
        scores,
    })
}

//! Page-level orchestration: preprocessing, grid recovery, cell recognition,
//! result emission, evaluation against ground truth and the synthetic page
//! generator used to produce that ground truth.

mod config;
mod evaluate;
pub mod font;
mod output;
mod process;
mod score;
mod synth;

pub use config::PipelineConfig;
pub use evaluate::{evaluate, load_truth, load_truths, Metrics, Truth};
pub use output::{emit_csv, emit_json, read_json, to_csv, to_json};
pub use process::{
    analyze_layout, process_image, process_transcript, recognize_cell, recognize_class_id, run_external_ocr, ink_fraction,
    GridSummary, Layout, RunOptions, ScoreRecord, TranscriptResult, BLANK_INK_FRACTION, CLASS_ID_MIN_SCORE, FLAG_CONFIDENCE,
};
pub use score::{parse_score, ScoreError};
pub use synth::{
    anchor_template, render_transcript, synth_config, synth_transcript, write_synth_support, SynthPage, SynthParams,
    ANCHOR_ORIGIN, COLUMN_WIDTHS, ID_COLUMN, MARGIN, ROW_HEIGHT, SCORE_COLUMN, TABLE_TOP,
};

use thiserror::Error;

use crate::crnn::CrnnError;
use crate::gridparse::GridError;
use crate::preprocess::PreprocessError;
use crate::raster::RasterError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Crnn(#[from] CrnnError),
    #[error("config: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("truth does not match prediction: {0}")]
    TruthMismatch(String),
    #[error("external OCR failed: {0}")]
    ExternalCommandFailed(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

//! Table-structure recovery: morphological line masks, Hough line
//! detection, grid reconstruction, cell cropping and template anchoring.

mod grid;
mod hough;
mod morph;
mod template;

pub use grid::{build_grid, crop_cell, merge_lines, GridModel};
pub use hough::{hough_accumulator, hough_lines, hough_lines_with, HoughAccumulator, HoughParams, PolarLine};
pub use morph::{dilate, erode, extract_line_masks, open, StructuringElement};
pub use template::{template_match_ncc, template_match_ncc_with, MatchResult};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("insufficient lines: {horizontal} horizontal, {vertical} vertical (need at least 2 of each)")]
    InsufficientLines { horizontal: usize, vertical: usize },
    #[error("line positions must be strictly increasing and inside the image")]
    BadPositions,
    #[error("cell ({row}, {col}) outside a {rows}x{cols} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("cell ({row}, {col}) is empty after an inset of {inset} px")]
    DegenerateCell { row: usize, col: usize, inset: usize },
    #[error("template {tw}x{th} larger than image {iw}x{ih}")]
    TemplateTooLarge {
        tw: usize,
        th: usize,
        iw: usize,
        ih: usize,
    },
}

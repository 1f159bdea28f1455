//! Batch extraction of (class ID, student ID, score) records from scanned,
//! ruled score sheets.
//!
//! Stages, in pipeline order: [`preprocess`] (denoise, binarize, deskew),
//! [`gridparse`] (line masks, Hough lines, grid, cell crops, template
//! anchor), [`crnn`] (cell recognition network on [`tensorops`] kernels) and
//! [`ctc`] decoding, orchestrated by [`pipeline`].

// `!(x > 0.0)` is how parameter checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crnn;
pub mod ctc;
pub mod exec;
pub mod gridparse;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod tensorops;

pub use exec::ExecMode;

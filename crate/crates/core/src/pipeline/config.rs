use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::PipelineError;
use crate::gridparse::HoughParams;
use crate::preprocess::DeskewParams;

/// Run-time knobs for [`process_transcript`](super::process_transcript).
///
/// The text form is one `key = value` pair per line, keys spelled exactly as
/// the fields below. `#` starts a comment. An empty value clears an optional
/// field.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub id_column: usize,
    pub score_column: usize,
    pub header_rows: usize,
    pub gaussian_sigma: f64,
    pub gaussian_radius: usize,
    pub deskew_max_angle: f64,
    pub deskew_coarse_step: f64,
    pub deskew_fine_step: f64,
    pub h_min_len_frac: f64,
    pub v_min_len_frac: f64,
    pub hough_theta_window: f64,
    pub hough_theta_step: f64,
    pub hough_rho_step: f64,
    pub hough_vote_frac: f64,
    pub merge_rho_tol: f64,
    pub inset: usize,
    pub beam_width: usize,
    /// Program plus arguments; `{}` is replaced by the crop path, otherwise
    /// the path is appended as the last argument.
    pub ocr_command: Option<String>,
    pub class_id_template: Option<PathBuf>,
    /// Width of the strip right of the anchor holding the class ID.
    pub class_id_width: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let d = DeskewParams::default();
        let h = HoughParams::horizontal();
        Self {
            id_column: 1,
            score_column: 5,
            header_rows: 1,
            gaussian_sigma: 1.0,
            gaussian_radius: 2,
            deskew_max_angle: d.max_angle,
            deskew_coarse_step: d.coarse_step,
            deskew_fine_step: d.fine_step,
            h_min_len_frac: 0.5,
            v_min_len_frac: 0.25,
            hough_theta_window: h.theta_window,
            hough_theta_step: h.theta_step,
            hough_rho_step: h.rho_step,
            hough_vote_frac: h.vote_frac,
            merge_rho_tol: 8.0,
            inset: 4,
            beam_width: 8,
            ocr_command: None,
            class_id_template: None,
            class_id_width: 160,
        }
    }
}

fn bad(key: &str, value: &str) -> PipelineError {
    PipelineError::Config(format!("bad value for {key}: {value:?}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PipelineError> {
    value.parse().map_err(|_| bad(key, value))
}

impl PipelineConfig {
    pub fn deskew_params(&self) -> DeskewParams {
        DeskewParams {
            max_angle: self.deskew_max_angle,
            coarse_step: self.deskew_coarse_step,
            fine_step: self.deskew_fine_step,
        }
    }

    pub fn hough_params(&self, theta_center: f64) -> HoughParams {
        HoughParams {
            theta_center,
            theta_window: self.hough_theta_window,
            theta_step: self.hough_theta_step,
            rho_step: self.hough_rho_step,
            vote_frac: self.hough_vote_frac,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.id_column == self.score_column {
            return Err(PipelineError::Config("id_column and score_column must differ".into()));
        }
        if self.beam_width == 0 {
            return Err(PipelineError::Config("beam_width must be at least 1".into()));
        }
        if !(self.merge_rho_tol >= 0.0) {
            return Err(PipelineError::Config("merge_rho_tol must be non-negative".into()));
        }
        Ok(())
    }

    /// Parses the text form on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(key.trim(), value.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file. A relative `class_id_template` is taken relative
    /// to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let mut c = Self::parse(&std::fs::read_to_string(path)?)?;
        if let (Some(t), Some(dir)) = (&c.class_id_template, path.parent()) {
            if t.is_relative() {
                c.class_id_template = Some(dir.join(t));
            }
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        match key {
            "id_column" => self.id_column = num(key, value)?,
            "score_column" => self.score_column = num(key, value)?,
            "header_rows" => self.header_rows = num(key, value)?,
            "gaussian_sigma" => self.gaussian_sigma = num(key, value)?,
            "gaussian_radius" => self.gaussian_radius = num(key, value)?,
            "deskew_max_angle" => self.deskew_max_angle = num(key, value)?,
            "deskew_coarse_step" => self.deskew_coarse_step = num(key, value)?,
            "deskew_fine_step" => self.deskew_fine_step = num(key, value)?,
            "h_min_len_frac" => self.h_min_len_frac = num(key, value)?,
            "v_min_len_frac" => self.v_min_len_frac = num(key, value)?,
            "hough_theta_window" => self.hough_theta_window = num(key, value)?,
            "hough_theta_step" => self.hough_theta_step = num(key, value)?,
            "hough_rho_step" => self.hough_rho_step = num(key, value)?,
            "hough_vote_frac" => self.hough_vote_frac = num(key, value)?,
            "merge_rho_tol" => self.merge_rho_tol = num(key, value)?,
            "inset" => self.inset = num(key, value)?,
            "beam_width" => self.beam_width = num(key, value)?,
            "ocr_command" => self.ocr_command = (!value.is_empty()).then(|| value.to_string()),
            "class_id_template" => self.class_id_template = (!value.is_empty()).then(|| PathBuf::from(value)),
            "class_id_width" => self.class_id_width = num(key, value)?,
            _ => return Err(PipelineError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Text form accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<String>| v.unwrap_or_default();
        let pairs: [(&str, String); 20] = [
            ("id_column", self.id_column.to_string()),
            ("score_column", self.score_column.to_string()),
            ("header_rows", self.header_rows.to_string()),
            ("gaussian_sigma", self.gaussian_sigma.to_string()),
            ("gaussian_radius", self.gaussian_radius.to_string()),
            ("deskew_max_angle", self.deskew_max_angle.to_string()),
            ("deskew_coarse_step", self.deskew_coarse_step.to_string()),
            ("deskew_fine_step", self.deskew_fine_step.to_string()),
            ("h_min_len_frac", self.h_min_len_frac.to_string()),
            ("v_min_len_frac", self.v_min_len_frac.to_string()),
            ("hough_theta_window", self.hough_theta_window.to_string()),
            ("hough_theta_step", self.hough_theta_step.to_string()),
            ("hough_rho_step", self.hough_rho_step.to_string()),
            ("hough_vote_frac", self.hough_vote_frac.to_string()),
            ("merge_rho_tol", self.merge_rho_tol.to_string()),
            ("inset", self.inset.to_string()),
            ("beam_width", self.beam_width.to_string()),
            ("ocr_command", opt(self.ocr_command.clone())),
            (
                "class_id_template",
                opt(self.class_id_template.as_ref().map(|p| p.display().to_string())),
            ),
            ("class_id_width", self.class_id_width.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

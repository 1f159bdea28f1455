use super::{GridError, PolarLine};
use crate::raster::GrayImage;

/// Clusters same-orientation lines into physical line positions.
///
/// Lines are sorted by rho and split wherever consecutive rho values differ by
/// more than `rho_tol`. Each cluster yields its vote-weighted mean rho,
/// rounded half-up. Near-vertical lines reported with theta close to 180 are
/// flipped to the equivalent negative angle first so they share a rho axis
/// with theta close to 0.
pub fn merge_lines(lines: &[PolarLine], rho_tol: f64) -> Vec<i64> {
    let mut rhos: Vec<(f64, u32)> = lines
        .iter()
        .map(|l| if l.theta >= 135.0 { (-l.rho, l.votes) } else { (l.rho, l.votes) })
        .collect();
    rhos.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut out = Vec::new();
    let mut i = 0;
    while i < rhos.len() {
        let mut j = i + 1;
        while j < rhos.len() && rhos[j].0 - rhos[j - 1].0 <= rho_tol {
            j += 1;
        }
        let cluster = &rhos[i..j];
        let weight: f64 = cluster.iter().map(|&(_, v)| v as f64).sum();
        let mean = if weight > 0.0 {
            cluster.iter().map(|&(r, v)| r * v as f64).sum::<f64>() / weight
        } else {
            cluster.iter().map(|&(r, _)| r).sum::<f64>() / cluster.len() as f64
        };
        out.push((mean + 0.5).floor() as i64);
        i = j;
    }
    out
}

/// Table geometry: horizontal line `y` positions and vertical line `x` positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridModel {
    h_positions: Vec<usize>,
    v_positions: Vec<usize>,
    image_width: usize,
    image_height: usize,
}

impl GridModel {
    pub fn h_positions(&self) -> &[usize] {
        &self.h_positions
    }

    pub fn v_positions(&self) -> &[usize] {
        &self.v_positions
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn rows(&self) -> usize {
        self.h_positions.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.v_positions.len() - 1
    }

    /// `(x0, y0, x1, y1)` of a cell, second corner exclusive.
    pub fn cell_rect(&self, row: usize, col: usize) -> Result<(usize, usize, usize, usize), GridError> {
        if row >= self.rows() || col >= self.cols() {
            return Err(GridError::IndexOutOfRange {
                row,
                col,
                rows: self.rows(),
                cols: self.cols(),
            });
        }
        Ok((
            self.v_positions[col],
            self.h_positions[row],
            self.v_positions[col + 1],
            self.h_positions[row + 1],
        ))
    }
}

pub fn build_grid(h_pos: &[usize], v_pos: &[usize], width: usize, height: usize) -> Result<GridModel, GridError> {
    if h_pos.len() < 2 || v_pos.len() < 2 {
        return Err(GridError::InsufficientLines {
            horizontal: h_pos.len(),
            vertical: v_pos.len(),
        });
    }
    let increasing = |p: &[usize], bound: usize| p.windows(2).all(|w| w[0] < w[1]) && p.iter().all(|&v| v < bound);
    if !increasing(h_pos, height) || !increasing(v_pos, width) {
        return Err(GridError::BadPositions);
    }
    Ok(GridModel {
        h_positions: h_pos.to_vec(),
        v_positions: v_pos.to_vec(),
        image_width: width,
        image_height: height,
    })
}

/// Crops cell `(row, col)` shrunk by `inset` pixels on every side.
pub fn crop_cell(img: &GrayImage, grid: &GridModel, row: usize, col: usize, inset: usize) -> Result<GrayImage, GridError> {
    let (x0, y0, x1, y1) = grid.cell_rect(row, col)?;
    let (x0, y0) = (x0 + inset, y0 + inset);
    let (x1, y1) = (x1.saturating_sub(inset), y1.saturating_sub(inset));
    if x1 <= x0 || y1 <= y0 {
        return Err(GridError::DegenerateCell { row, col, inset });
    }
    img.crop(x0, y0, x1 - x0, y1 - y0)
        .ok_or(GridError::IndexOutOfRange {
            row,
            col,
            rows: grid.rows(),
            cols: grid.cols(),
        })
}

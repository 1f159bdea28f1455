use super::GridError;
use crate::exec::ExecMode;
use crate::raster::GrayImage;

/// Best template placement (top-left corner) and its correlation score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchResult {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

/// Summed-area table with a zero top row and left column.
struct Integral {
    stride: usize,
    sum: Vec<u64>,
    sq: Vec<u64>,
}

impl Integral {
    fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut sum = vec![0u64; stride * (h + 1)];
        let mut sq = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let (mut rs, mut rq) = (0u64, 0u64);
            for x in 0..w {
                let v = img.get(x, y) as u64;
                rs += v;
                rq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
                sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + rq;
            }
        }
        Self { stride, sum, sq }
    }

    fn rect(&self, table: &[u64], x: usize, y: usize, w: usize, h: usize) -> u64 {
        let s = self.stride;
        table[(y + h) * s + x + w] + table[y * s + x] - table[y * s + x + w] - table[(y + h) * s + x]
    }
}

/// Zero-mean normalized cross-correlation over every placement.
///
/// Placements where the template or the window has zero variance score 0.
/// Ties resolve to the smallest `y`, then the smallest `x`.
pub fn template_match_ncc(img: &GrayImage, template: &GrayImage) -> Result<MatchResult, GridError> {
    template_match_ncc_with(img, template, ExecMode::default())
}

pub fn template_match_ncc_with(img: &GrayImage, template: &GrayImage, mode: ExecMode) -> Result<MatchResult, GridError> {
    let (iw, ih, tw, th) = (img.width(), img.height(), template.width(), template.height());
    if tw > iw || th > ih {
        return Err(GridError::TemplateTooLarge { tw, th, iw, ih });
    }
    let n = (tw * th) as i128;
    let t_sum: i128 = template.data().iter().map(|&v| v as i128).sum();
    let t_sq: i128 = template.data().iter().map(|&v| (v as i128) * (v as i128)).sum();
    let t_var = n * t_sq - t_sum * t_sum;
    let integral = Integral::new(img);
    let (nx, ny) = (iw - tw + 1, ih - th + 1);

    let row_best = mode.map_range(ny, |y| {
        let mut best = MatchResult { x: 0, y, score: f64::NEG_INFINITY };
        for x in 0..nx {
            let score = if t_var == 0 {
                0.0
            } else {
                let w_sum = integral.rect(&integral.sum, x, y, tw, th) as i128;
                let w_sq = integral.rect(&integral.sq, x, y, tw, th) as i128;
                let w_var = n * w_sq - w_sum * w_sum;
                if w_var == 0 {
                    0.0
                } else {
                    let mut cross = 0u64;
                    for ty in 0..th {
                        let irow = &img.row(y + ty)[x..x + tw];
                        let trow = template.row(ty);
                        cross += irow.iter().zip(trow).map(|(&a, &b)| a as u32 * b as u32).sum::<u32>() as u64;
                    }
                    let num = n * cross as i128 - t_sum * w_sum;
                    (num as f64 / ((t_var as f64).sqrt() * (w_var as f64).sqrt())).clamp(-1.0, 1.0)
                }
            };
            if score > best.score {
                best = MatchResult { x, y, score };
            }
        }
        best
    });
    let mut best = row_best[0];
    for r in &row_best[1..] {
        if r.score > best.score {
            best = *r;
        }
    }
    Ok(best)
}

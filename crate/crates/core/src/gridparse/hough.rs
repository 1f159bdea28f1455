use super::GridError;
use crate::exec::ExecMode;
use crate::raster::BinaryImage;

/// A line `rho = x cos(theta) + y sin(theta)` with its accumulator support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarLine {
    pub rho: f64,
    /// Degrees in `[0, 180)`.
    pub theta: f64,
    pub votes: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoughParams {
    /// 90 for horizontal masks, 0 for vertical ones.
    pub theta_center: f64,
    pub theta_window: f64,
    pub theta_step: f64,
    pub rho_step: f64,
    pub vote_frac: f64,
}

impl HoughParams {
    pub fn horizontal() -> Self {
        Self {
            theta_center: 90.0,
            ..Self::vertical()
        }
    }

    pub fn vertical() -> Self {
        Self {
            theta_center: 0.0,
            theta_window: 2.0,
            theta_step: 0.25,
            rho_step: 1.0,
            vote_frac: 0.4,
        }
    }

    fn validate(&self) -> Result<(), GridError> {
        if !(self.theta_window >= 0.0 && self.theta_window < 90.0) {
            return Err(GridError::InvalidParam(format!(
                "theta_window must lie in [0, 90), got {}",
                self.theta_window
            )));
        }
        if !(self.theta_step > 0.0) || !(self.rho_step > 0.0) {
            return Err(GridError::InvalidParam("hough steps must be positive".into()));
        }
        if !(self.vote_frac >= 0.0) {
            return Err(GridError::InvalidParam("vote_frac must be non-negative".into()));
        }
        Ok(())
    }
}

/// Vote counts indexed `[theta][rho]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HoughAccumulator {
    /// Angles in degrees, un-normalized (may be negative).
    pub thetas: Vec<f64>,
    /// Offset such that bin `k` is centered on `k * rho_step - rho_offset`.
    pub rho_offset: f64,
    pub rho_step: f64,
    pub rho_bins: usize,
    pub votes: Vec<u32>,
}

impl HoughAccumulator {
    #[inline]
    pub fn get(&self, t: usize, k: usize) -> u32 {
        self.votes[t * self.rho_bins + k]
    }

    pub fn rho_of(&self, k: usize) -> f64 {
        k as f64 * self.rho_step - self.rho_offset
    }
}

/// Fills the accumulator over `center ± window`. Each theta row is counted
/// independently, so parallel and sequential fills agree exactly.
pub fn hough_accumulator(mask: &BinaryImage, params: &HoughParams, mode: ExecMode) -> Result<HoughAccumulator, GridError> {
    params.validate()?;
    let n = (params.theta_window / params.theta_step).round() as i64;
    let thetas: Vec<f64> = (-n..=n)
        .map(|i| params.theta_center + i as f64 * params.theta_step)
        .collect();
    let diag = ((mask.width() as f64).powi(2) + (mask.height() as f64).powi(2)).sqrt();
    let half_bins = (diag / params.rho_step).ceil() as usize;
    let rho_offset = half_bins as f64 * params.rho_step;
    let rho_bins = 2 * half_bins + 1;
    let ink: Vec<(f64, f64)> = mask.ink_pixels().map(|(x, y)| (x as f64, y as f64)).collect();

    let mut votes = vec![0u32; thetas.len() * rho_bins];
    mode.fill_chunks(&mut votes, rho_bins, |t, row| {
        let (sin, cos) = thetas[t].to_radians().sin_cos();
        for &(x, y) in &ink {
            let rho = x * cos + y * sin;
            let k = ((rho + rho_offset) / params.rho_step + 0.5).floor();
            if k >= 0.0 && (k as usize) < rho_bins {
                row[k as usize] += 1;
            }
        }
    });
    Ok(HoughAccumulator {
        thetas,
        rho_offset,
        rho_step: params.rho_step,
        rho_bins,
        votes,
    })
}

/// Local maxima of the accumulator at or above
/// `vote_frac * (extent of the mask along the line direction)`, strongest first.
///
/// A cell is a local maximum when none of its eight neighbors has more
/// votes. Equal-vote peaks are ordered by distance from the search center,
/// then by rho.
pub fn hough_lines(mask: &BinaryImage, params: &HoughParams) -> Result<Vec<PolarLine>, GridError> {
    hough_lines_with(mask, params, ExecMode::default())
}

pub fn hough_lines_with(mask: &BinaryImage, params: &HoughParams, mode: ExecMode) -> Result<Vec<PolarLine>, GridError> {
    let acc = hough_accumulator(mask, params, mode)?;
    let center = params.theta_center.to_radians();
    let span = if center.sin().abs() >= center.cos().abs() {
        mask.width()
    } else {
        mask.height()
    };
    let threshold = params.vote_frac * span as f64;

    let nt = acc.thetas.len();
    let mut peaks = Vec::new();
    for t in 0..nt {
        for k in 0..acc.rho_bins {
            let v = acc.get(t, k);
            if v == 0 || (v as f64) < threshold {
                continue;
            }
            let mut is_max = true;
            'nb: for dt in -1i64..=1 {
                for dk in -1i64..=1 {
                    let (tt, kk) = (t as i64 + dt, k as i64 + dk);
                    if (dt, dk) == (0, 0) || tt < 0 || kk < 0 || tt >= nt as i64 || kk >= acc.rho_bins as i64 {
                        continue;
                    }
                    if acc.get(tt as usize, kk as usize) > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push((t, k, v));
            }
        }
    }
    let mid = (nt / 2) as i64;
    peaks.sort_by(|a, b| {
        b.2.cmp(&a.2)
            .then(((a.0 as i64) - mid).abs().cmp(&((b.0 as i64) - mid).abs()))
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    Ok(peaks
        .into_iter()
        .map(|(t, k, votes)| {
            let (mut theta, mut rho) = (acc.thetas[t], acc.rho_of(k));
            theta = theta.rem_euclid(360.0);
            if theta >= 180.0 {
                theta -= 180.0;
                rho = -rho;
            }
            PolarLine { rho, theta, votes }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_row() {
        let mask = BinaryImage::from_fn(100, 80, |_, y| y == 40);
        let lines = hough_lines(&mask, &HoughParams::horizontal()).unwrap();
        assert_eq!(lines[0].theta, 90.0);
        assert_eq!(lines[0].rho, 40.0);
        assert_eq!(lines[0].votes, 100);
    }

    #[test]
    fn vertical_column() {
        let mask = BinaryImage::from_fn(60, 90, |x, _| x == 25);
        let lines = hough_lines(&mask, &HoughParams::vertical()).unwrap();
        assert_eq!(lines[0].theta, 0.0);
        assert_eq!(lines[0].rho, 25.0);
    }

    #[test]
    fn negative_angles_are_normalized() {
        let mask = BinaryImage::from_fn(60, 90, |x, _| x == 25);
        for l in hough_lines(&mask, &HoughParams::vertical()).unwrap() {
            assert!((0.0..180.0).contains(&l.theta));
            if l.theta > 90.0 {
                assert!(l.rho < 0.0);
            }
        }
    }

    /// Cell-centric recount: each cell tallies pixels whose rho falls in its
    /// half-open bin.
    fn brute_accumulator(mask: &BinaryImage, acc: &HoughAccumulator) -> Vec<u32> {
        let mut out = Vec::new();
        for &theta in &acc.thetas {
            let (s, c) = theta.to_radians().sin_cos();
            for k in 0..acc.rho_bins {
                let center = acc.rho_of(k);
                let mut n = 0;
                for y in 0..mask.height() {
                    for x in 0..mask.width() {
                        if mask.get(x, y) {
                            let rho = x as f64 * c + y as f64 * s;
                            if rho >= center - acc.rho_step / 2.0 && rho < center + acc.rho_step / 2.0 {
                                n += 1;
                            }
                        }
                    }
                }
                out.push(n);
            }
        }
        out
    }

    #[test]
    fn two_lines_match_brute_force_accumulator() {
        let mask = BinaryImage::from_fn(90, 160, |x, y| (y == 40 || y == 120) && x > 3);
        let params = HoughParams::horizontal();
        let acc = hough_accumulator(&mask, &params, ExecMode::Sequential).unwrap();
        let brute = brute_accumulator(&mask, &acc);
        assert_eq!(acc.votes, brute);

        // peaks of the brute-force accumulator: best cell per dominant rho
        let thr = (0.4 * 90.0) as u32;
        let mut brute_peaks: Vec<(usize, usize)> = Vec::new();
        let nt = acc.thetas.len();
        for t in 0..nt {
            for k in 0..acc.rho_bins {
                let v = brute[t * acc.rho_bins + k];
                if v < thr {
                    continue;
                }
                let dominated = (t.saturating_sub(1)..=(t + 1).min(nt - 1)).any(|tt| {
                    (k.saturating_sub(1)..=(k + 1).min(acc.rho_bins - 1)).any(|kk| brute[tt * acc.rho_bins + kk] > v)
                });
                if !dominated {
                    brute_peaks.push((t, k));
                }
            }
        }
        let lines = hough_lines(&mask, &params).unwrap();
        assert_eq!(lines.len(), brute_peaks.len());
        for (t, k) in brute_peaks {
            let theta = acc.thetas[t];
            let rho = acc.rho_of(k);
            assert!(lines.iter().any(|l| l.theta == theta && l.rho == rho));
        }
        assert_eq!((lines[0].theta, lines[0].rho), (90.0, 40.0));
        assert_eq!((lines[1].theta, lines[1].rho), (90.0, 120.0));
    }

    #[test]
    fn modes_agree() {
        let mask = BinaryImage::from_fn(120, 100, |x, y| (x * 7 + y * 3) % 11 == 0 || y == 50);
        let p = HoughParams::horizontal();
        assert_eq!(
            hough_accumulator(&mask, &p, ExecMode::Sequential).unwrap(),
            hough_accumulator(&mask, &p, ExecMode::Parallel).unwrap()
        );
    }

    #[test]
    fn param_validation() {
        let mask = BinaryImage::zeros(5, 5);
        let bad = [
            HoughParams { theta_window: 90.0, ..HoughParams::horizontal() },
            HoughParams { theta_step: 0.0, ..HoughParams::horizontal() },
            HoughParams { rho_step: -1.0, ..HoughParams::horizontal() },
        ];
        for p in bad {
            assert!(matches!(hough_lines(&mask, &p), Err(GridError::InvalidParam(_))));
        }
    }
}

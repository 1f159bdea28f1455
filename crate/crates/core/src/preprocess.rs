//! Page preprocessing: global Otsu binarization, Gaussian denoising, rigid
//! rotation and projection-profile deskew.

use thiserror::Error;

use crate::exec::ExecMode;
use crate::raster::{BinaryImage, GrayImage};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Intensity histogram with 256 bins.
pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &p in img.data() {
        hist[p as usize] += 1;
    }
    hist
}

/// Global Otsu threshold.
///
/// Maximizes the between-class variance of the split `{p <= t}` / `{p > t}`.
/// Candidates are compared through exact integer cumulative sums, so equal
/// splits score bit-identically and the smallest maximizing `t` is returned.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let hist = histogram(img);
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();

    let mut best_t = 0u8;
    let mut best = -1.0f64;
    let mut n0 = 0u64;
    let mut s0 = 0u64;
    for t in 0..256usize {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = total - n0;
        let score = if n0 == 0 || n1 == 0 {
            0.0
        } else {
            // w0 w1 (mu0 - mu1)^2 = (N s0 - n0 S)^2 / (N^2 n0 n1)
            let num = total as i128 * s0 as i128 - n0 as i128 * total_sum as i128;
            let num = (num as f64) * (num as f64);
            num / ((total as f64) * (total as f64) * (n0 as f64) * (n1 as f64))
        };
        if score > best {
            best = score;
            best_t = t as u8;
        }
    }
    best_t
}

/// Ink mask of pixels at or below `t`.
pub fn binarize(img: &GrayImage, t: u8) -> BinaryImage {
    BinaryImage::from_fn(img.width(), img.height(), |x, y| img.get(x, y) <= t)
}

/// Sampled, normalized 1-D Gaussian of length `2 * radius + 1`.
fn gaussian_kernel_1d(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// The `(2r+1)²` normalized Gaussian kernel, row-major with `dy` outermost.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Vec<f64>, PreprocessError> {
    check_blur_params(sigma, radius)?;
    let k = gaussian_kernel_1d(sigma, radius);
    Ok(k.iter()
        .flat_map(|&ky| k.iter().map(move |&kx| ky * kx))
        .collect())
}

fn check_blur_params(sigma: f64, radius: usize) -> Result<(), PreprocessError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(PreprocessError::InvalidParam(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    if radius < 1 {
        return Err(PreprocessError::InvalidParam(
            "gaussian radius must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Reflect-101 border index (`d c b | a b c d | c b a`).
fn reflect(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let last = n as isize - 1;
    while i < 0 || i > last {
        if i < 0 {
            i = -i;
        }
        if i > last {
            i = 2 * last - i;
        }
    }
    i as usize
}

#[inline]
fn round_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Gaussian smoothing with a separable `(2r+1)²` kernel and reflected borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64, radius: usize) -> Result<GrayImage, PreprocessError> {
    check_blur_params(sigma, radius)?;
    let k = gaussian_kernel_1d(sigma, radius);
    let (w, h) = (img.width(), img.height());
    let r = radius as isize;

    let mut tmp = vec![0f64; w * h];
    for y in 0..h {
        let row = img.row(y);
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &kw) in k.iter().enumerate() {
                acc += kw * row[reflect(x as isize + j as isize - r, w)] as f64;
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = GrayImage::filled(w, h, 0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &kw) in k.iter().enumerate() {
                acc += kw * tmp[reflect(y as isize + j as isize - r, h) * w + x];
            }
            out.set(x, y, round_u8(acc));
        }
    }
    Ok(out)
}

/// Rotation about the image center by `angle` degrees, counterclockwise as
/// displayed (y down). Inverse-mapped with bilinear interpolation; samples
/// outside the frame take `background`.
pub fn rotate(img: &GrayImage, angle: f64, background: u8) -> GrayImage {
    if angle == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let (sin, cos) = angle.to_radians().sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let bg = background as f64;
    let sample = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            bg
        } else {
            img.get(x as usize, y as usize) as f64
        }
    };
    GrayImage::from_fn(w, h, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        let sx = cx + dx * cos - dy * sin;
        let sy = cy + dx * sin + dy * cos;
        let x0 = sx.floor();
        let y0 = sy.floor();
        let fx = sx - x0;
        let fy = sy - y0;
        let (x0, y0) = (x0 as isize, y0 as isize);
        let top = sample(x0, y0) * (1.0 - fx) + sample(x0 + 1, y0) * fx;
        let bottom = sample(x0, y0 + 1) * (1.0 - fx) + sample(x0 + 1, y0 + 1) * fx;
        round_u8(top * (1.0 - fy) + bottom * fy)
    })
}

/// Nearest-neighbor rotation of a mask; same conventions as [`rotate`],
/// out-of-frame samples are background.
pub fn rotate_binary(img: &BinaryImage, angle: f64) -> BinaryImage {
    if angle == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let (sin, cos) = angle.to_radians().sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    BinaryImage::from_fn(w, h, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        let sx = (cx + dx * cos - dy * sin + 0.5).floor();
        let sy = (cy + dx * sin + dy * cos + 0.5).floor();
        sx >= 0.0 && sy >= 0.0 && (sx as usize) < w && (sy as usize) < h && img.get(sx as usize, sy as usize)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeskewParams {
    pub max_angle: f64,
    pub coarse_step: f64,
    pub fine_step: f64,
}

impl Default for DeskewParams {
    fn default() -> Self {
        Self {
            max_angle: 5.0,
            coarse_step: 0.5,
            fine_step: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeskewReport {
    /// Counterclockwise correction applied to the page, in degrees.
    pub applied_angle: f64,
    /// `(angle, profile variance)` for every evaluated angle, coarse scan first.
    pub score_curve: Vec<(f64, f64)>,
}

/// Variance of the per-row ink counts after rotating the ink by `angle`.
///
/// Each ink pixel is carried to its nearest row in the rotated frame; pixels
/// leaving the frame are dropped.
pub fn profile_score(ink: &[(f64, f64)], height: usize, cy: f64, angle: f64) -> f64 {
    let (sin, cos) = angle.to_radians().sin_cos();
    let mut rows = vec![0u64; height];
    for &(dx, dy) in ink {
        let y = (cy - dx * sin + dy * cos + 0.5).floor();
        if y >= 0.0 && (y as usize) < height {
            rows[y as usize] += 1;
        }
    }
    let n = height as u128;
    let s: u128 = rows.iter().map(|&c| c as u128).sum();
    let s2: u128 = rows.iter().map(|&c| (c as u128) * (c as u128)).sum();
    // var = (n Σc² - (Σc)²) / n²
    (n * s2 - s * s) as f64 / (n * n) as f64
}

/// Projection-profile deskew with a coarse scan over `[-max, +max]` followed by
/// a fine scan of `±coarse_step` around the coarse winner.
pub fn deskew(bin: &BinaryImage, params: DeskewParams) -> Result<(DeskewReport, BinaryImage), PreprocessError> {
    deskew_with(bin, params, ExecMode::default())
}

pub fn deskew_with(
    bin: &BinaryImage,
    params: DeskewParams,
    mode: ExecMode,
) -> Result<(DeskewReport, BinaryImage), PreprocessError> {
    let report = estimate_skew(bin, params, mode)?;
    let corrected = rotate_binary(bin, report.applied_angle);
    Ok((report, corrected))
}

/// The search half of [`deskew`]: scores candidate angles without rotating the page.
pub fn estimate_skew(bin: &BinaryImage, params: DeskewParams, mode: ExecMode) -> Result<DeskewReport, PreprocessError> {
    let DeskewParams {
        max_angle,
        coarse_step,
        fine_step,
    } = params;
    if !(max_angle > 0.0) || !max_angle.is_finite() {
        return Err(PreprocessError::InvalidParam(format!(
            "max_angle must be positive, got {max_angle}"
        )));
    }
    for (name, step) in [("coarse_step", coarse_step), ("fine_step", fine_step)] {
        if !(step > 0.0) || step > max_angle {
            return Err(PreprocessError::InvalidParam(format!(
                "{name} must lie in (0, max_angle], got {step}"
            )));
        }
    }

    let cx = (bin.width() as f64 - 1.0) / 2.0;
    let cy = (bin.height() as f64 - 1.0) / 2.0;
    let ink: Vec<(f64, f64)> = bin
        .ink_pixels()
        .map(|(x, y)| (x as f64 - cx, y as f64 - cy))
        .collect();
    let height = bin.height();
    let score = |a: &f64| profile_score(&ink, height, cy, *a);

    let n_coarse = (2.0 * max_angle / coarse_step).round() as i64;
    let coarse: Vec<f64> = (0..=n_coarse)
        .map(|i| -max_angle + i as f64 * coarse_step)
        .filter(|a| a.abs() <= max_angle + 1e-9)
        .collect();
    let coarse_scores = mode.map(&coarse, score);
    let mut curve: Vec<(f64, f64)> = coarse.into_iter().zip(coarse_scores).collect();
    let coarse_best = best_angle(&curve);

    let m = (coarse_step / fine_step).round() as i64;
    let fine: Vec<f64> = (-m..=m)
        .map(|j| coarse_best + j as f64 * fine_step)
        .filter(|a| a.abs() <= max_angle + 1e-9)
        .collect();
    let fine_scores = mode.map(&fine, score);
    curve.extend(fine.into_iter().zip(fine_scores));

    Ok(DeskewReport {
        applied_angle: best_angle(&curve),
        score_curve: curve,
    })
}

/// Highest score; on ties the angle closer to zero, then the negative one.
fn best_angle(curve: &[(f64, f64)]) -> f64 {
    let mut best = curve[0];
    for &(a, s) in &curve[1..] {
        let closer = a.abs() < best.0.abs() || (a.abs() == best.0.abs() && a < best.0);
        if s > best.1 || (s == best.1 && closer) {
            best = (a, s);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook between-class variance for one threshold.
    fn sigma_b(hist: &[u64; 256], t: usize) -> f64 {
        let n: f64 = hist.iter().sum::<u64>() as f64;
        let (mut n0, mut s0, mut n1, mut s1) = (0.0, 0.0, 0.0, 0.0);
        for (v, &c) in hist.iter().enumerate() {
            if v <= t {
                n0 += c as f64;
                s0 += (v as f64) * c as f64;
            } else {
                n1 += c as f64;
                s1 += (v as f64) * c as f64;
            }
        }
        if n0 == 0.0 || n1 == 0.0 {
            return 0.0;
        }
        (n0 / n) * (n1 / n) * (s0 / n0 - s1 / n1).powi(2)
    }

    pub(crate) fn otsu_oracle(img: &GrayImage) -> u8 {
        let hist = histogram(img);
        let mut best = (0usize, sigma_b(&hist, 0));
        for t in 1..256 {
            let s = sigma_b(&hist, t);
            if s > best.1 * (1.0 + 1e-12) {
                best = (t, s);
            }
        }
        best.0 as u8
    }

    #[test]
    fn otsu_bimodal_tie_rule() {
        let mut data = vec![10u8; 50];
        data.extend(vec![200u8; 50]);
        let img = GrayImage::new(10, 10, data).unwrap();
        assert_eq!(otsu_threshold(&img), 10);
    }

    #[test]
    fn otsu_constant_image() {
        assert_eq!(otsu_threshold(&GrayImage::filled(8, 8, 128)), 0);
    }

    #[test]
    fn otsu_random_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = GrayImage::from_fn(64, 64, |_, _| rng.gen());
        assert_eq!(otsu_threshold(&img), otsu_oracle(&img));
    }

    #[test]
    fn binarize_constant_pages() {
        assert_eq!(binarize(&GrayImage::filled(5, 5, 255), 128).ink_count(), 0);
        assert_eq!(binarize(&GrayImage::filled(5, 5, 0), 128).ink_count(), 25);
    }

    #[test]
    fn binarize_bimodal_recovers_dark_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dark = BinaryImage::from_fn(40, 30, |_, _| rng.gen_bool(0.3));
        let img = GrayImage::from_fn(40, 30, |x, y| {
            if dark.get(x, y) {
                rng.gen_range(10..60)
            } else {
                rng.gen_range(180..250)
            }
        });
        assert_eq!(binarize(&img, otsu_threshold(&img)), dark);
    }

    #[test]
    fn blur_constant_image_unchanged() {
        let img = GrayImage::filled(7, 5, 93);
        assert_eq!(gaussian_blur(&img, 1.0, 2).unwrap(), img);
    }

    #[test]
    fn blur_impulse_response() {
        let mut img = GrayImage::filled(11, 11, 0);
        img.set(5, 5, 255);
        let out = gaussian_blur(&img, 1.0, 2).unwrap();
        // closed-form 2-D kernel, normalized over the 5x5 support
        let g = |dx: i32, dy: i32| (-((dx * dx + dy * dy) as f64) / 2.0).exp();
        let z: f64 = (-2..=2).flat_map(|a| (-2..=2).map(move |b| g(a, b))).sum();
        for y in 0..11i32 {
            for x in 0..11i32 {
                let (dx, dy) = (x - 5, y - 5);
                let expect = if dx.abs() <= 2 && dy.abs() <= 2 {
                    (255.0 * g(dx, dy) / z + 0.5).floor() as u8
                } else {
                    0
                };
                assert_eq!(out.get(x as usize, y as usize), expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn blur_rejects_bad_sigma() {
        let img = GrayImage::filled(3, 3, 0);
        assert!(matches!(gaussian_blur(&img, 0.0, 2), Err(PreprocessError::InvalidParam(_))));
        assert!(matches!(gaussian_blur(&img, -1.0, 2), Err(PreprocessError::InvalidParam(_))));
    }

    #[test]
    fn blur_on_single_pixel_image() {
        let img = GrayImage::filled(1, 1, 77);
        assert_eq!(gaussian_blur(&img, 1.0, 2).unwrap(), img);
    }

    #[test]
    fn rotate_identity_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = GrayImage::from_fn(20, 13, |_, _| rng.gen());
        assert_eq!(rotate(&img, 0.0, 255), img);
        let flat = GrayImage::filled(20, 13, 140);
        assert_eq!(rotate(&flat, 17.0, 140), flat);
    }

    #[test]
    fn rotate_round_trip_on_grid() {
        // soft-edged grid lines, as a scanner would deliver them
        let img = GrayImage::from_fn(200, 160, |x, y| {
            let dx = ((x % 32) as f64 - 16.0).abs();
            let dy = ((y % 32) as f64 - 16.0).abs();
            let ink = 1.0 - (1.0 - (-dx * dx / 32.0).exp()) * (1.0 - (-dy * dy / 32.0).exp());
            (255.0 * (1.0 - ink)).round() as u8
        });
        let back = rotate(&rotate(&img, 3.0, 255), -3.0, 255);
        let (x0, x1, y0, y1) = (50, 150, 40, 120);
        let err: f64 = (y0..y1)
            .flat_map(|y| (x0..x1).map(move |x| (x, y)))
            .map(|(x, y)| (img.get(x, y) as f64 - back.get(x, y) as f64).abs())
            .sum::<f64>()
            / ((x1 - x0) * (y1 - y0)) as f64;
        assert!(err < 2.0, "mean abs error {err}");
    }

    fn ruled_page(skew: f64) -> BinaryImage {
        let img = GrayImage::from_fn(300, 240, |x, y| {
            let ruled = (30..270).contains(&x) && (20..220).contains(&y) && y % 20 < 2;
            if ruled {
                0
            } else {
                255
            }
        });
        binarize(&rotate(&img, skew, 255), 128)
    }

    #[test]
    fn deskew_straight_page() {
        let (report, _) = deskew(&ruled_page(0.0), DeskewParams::default()).unwrap();
        assert!(report.applied_angle.abs() <= 0.05, "{}", report.applied_angle);
    }

    #[test]
    fn deskew_recovers_known_skew() {
        for skew in [3.0, -4.5] {
            let (report, _) = deskew(&ruled_page(skew), DeskewParams::default()).unwrap();
            assert!(
                (report.applied_angle + skew).abs() <= 0.25,
                "skew {skew} -> {}",
                report.applied_angle
            );
            let best = report
                .score_curve
                .iter()
                .find(|(a, _)| *a == report.applied_angle)
                .unwrap()
                .1;
            assert!(report.score_curve.iter().all(|&(_, s)| s <= best));
        }
    }

    #[test]
    fn deskew_param_validation() {
        let bin = ruled_page(0.0);
        for p in [
            DeskewParams { coarse_step: 0.0, ..Default::default() },
            DeskewParams { fine_step: -0.1, ..Default::default() },
            DeskewParams { coarse_step: 6.0, ..Default::default() },
        ] {
            assert!(matches!(deskew(&bin, p), Err(PreprocessError::InvalidParam(_))));
        }
    }

    #[test]
    fn deskew_modes_agree() {
        let bin = ruled_page(1.3);
        let a = estimate_skew(&bin, DeskewParams::default(), ExecMode::Sequential).unwrap();
        let b = estimate_skew(&bin, DeskewParams::default(), ExecMode::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn otsu_matches_exhaustive(seed in any::<u64>(), levels in 1u32..256) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::from_fn(16, 16, |_, _| (rng.gen_range(0..levels) * 255 / levels.max(1)) as u8);
            prop_assert_eq!(otsu_threshold(&img), otsu_oracle(&img));
        }

        #[test]
        fn binarize_monotone(seed in any::<u64>(), t1 in 0u8..=255, t2 in 0u8..=255) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::from_fn(12, 12, |_, _| rng.gen());
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            prop_assert!(binarize(&img, lo).is_subset_of(&binarize(&img, hi)));
        }

        #[test]
        fn blur_stays_in_range(seed in any::<u64>(), sigma in 0.3f64..4.0, radius in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::from_fn(9, 7, |_, _| rng.gen_range(40..200));
            let out = gaussian_blur(&img, sigma, radius).unwrap();
            let lo = *img.data().iter().min().unwrap();
            let hi = *img.data().iter().max().unwrap();
            prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
            let k = gaussian_kernel(sigma, radius).unwrap();
            prop_assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

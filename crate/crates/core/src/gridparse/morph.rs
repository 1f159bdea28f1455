use super::GridError;
use crate::raster::BinaryImage;

/// All-ones rectangular structuring element with its origin at
/// `(width / 2, height / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    pub width: usize,
    pub height: usize,
}

impl StructuringElement {
    pub fn new(width: usize, height: usize) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::InvalidParam(format!(
                "structuring element {width}x{height} must be at least 1x1"
            )));
        }
        Ok(Self { width, height })
    }

    /// Horizontal run of `len` pixels.
    pub fn horizontal(len: usize) -> Result<Self, GridError> {
        Self::new(len, 1)
    }

    /// Vertical run of `len` pixels.
    pub fn vertical(len: usize) -> Result<Self, GridError> {
        Self::new(1, len)
    }

    /// Inclusive `(lo, hi)` pixel offsets covered along x and y.
    fn window(&self) -> Window {
        let (cx, cy) = ((self.width / 2) as isize, (self.height / 2) as isize);
        Window {
            x: (-cx, self.width as isize - 1 - cx),
            y: (-cy, self.height as isize - 1 - cy),
        }
    }
}

#[derive(Clone, Copy)]
struct Window {
    x: (isize, isize),
    y: (isize, isize),
}

impl Window {
    fn reflected(self) -> Window {
        Window {
            x: (-self.x.1, -self.x.0),
            y: (-self.y.1, -self.y.0),
        }
    }
}

/// One separable pass along a line of `n` samples. `erode` keeps positions
/// whose whole window is ink (outside counts as background); otherwise a
/// position is set when any in-bounds sample under the window is ink.
fn pass_1d(src: &[u8], dst: &mut [u8], (lo, hi): (isize, isize), erode: bool) {
    let n = src.len() as isize;
    let mut prefix = Vec::with_capacity(src.len() + 1);
    prefix.push(0u32);
    for &v in src {
        prefix.push(prefix.last().unwrap() + v as u32);
    }
    for (i, out) in dst.iter_mut().enumerate() {
        let (a, b) = (i as isize + lo, i as isize + hi);
        *out = if erode {
            if a < 0 || b >= n {
                0
            } else {
                (prefix[b as usize + 1] - prefix[a as usize] == (b - a + 1) as u32) as u8
            }
        } else {
            let (a, b) = (a.max(0), b.min(n - 1));
            (a <= b && prefix[b as usize + 1] > prefix[a as usize]) as u8
        };
    }
}

fn separable(img: &BinaryImage, win: Window, erode: bool) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut rows = vec![0u8; w * h];
    for y in 0..h {
        pass_1d(&img.data()[y * w..(y + 1) * w], &mut rows[y * w..(y + 1) * w], win.x, erode);
    }
    let mut out = vec![0u8; w * h];
    let mut col = vec![0u8; h];
    let mut res = vec![0u8; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        pass_1d(&col, &mut res, win.y, erode);
        for y in 0..h {
            out[y * w + x] = res[y];
        }
    }
    BinaryImage::new(w, h, out).expect("dimensions preserved")
}

/// `out(p) = 1` iff every pixel under the element centered at `p` is ink.
pub fn erode(img: &BinaryImage, se: StructuringElement) -> BinaryImage {
    separable(img, se.window(), true)
}

/// `out(p) = 1` iff any pixel under the element centered at `p` is ink.
pub fn dilate(img: &BinaryImage, se: StructuringElement) -> BinaryImage {
    separable(img, se.window(), false)
}

/// Morphological opening: erosion, then dilation by the reflected element.
///
/// For odd-sized elements the reflection is the element itself.
pub fn open(img: &BinaryImage, se: StructuringElement) -> BinaryImage {
    let eroded = separable(img, se.window(), true);
    separable(&eroded, se.window().reflected(), false)
}

/// Horizontal and vertical line masks by opening with long thin elements.
///
/// The horizontal element spans `round(h_frac * width)` pixels, the vertical
/// one `round(v_frac * height)`.
pub fn extract_line_masks(
    img: &BinaryImage,
    h_frac: f64,
    v_frac: f64,
) -> Result<(BinaryImage, BinaryImage), GridError> {
    for f in [h_frac, v_frac] {
        if !(f > 0.0 && f < 1.0) {
            return Err(GridError::InvalidParam(format!(
                "min_len_frac must lie in (0, 1), got {f}"
            )));
        }
    }
    let lh = ((h_frac * img.width() as f64).round() as usize).max(1);
    let lv = ((v_frac * img.height() as f64).round() as usize).max(1);
    let hmask = open(img, StructuringElement::horizontal(lh)?);
    let vmask = open(img, StructuringElement::vertical(lv)?);
    Ok((hmask, vmask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct window scan over the element; `min` erodes, `max` dilates.
    fn window_oracle(img: &BinaryImage, se: StructuringElement, erode: bool) -> BinaryImage {
        let (cx, cy) = ((se.width / 2) as isize, (se.height / 2) as isize);
        BinaryImage::from_fn(img.width(), img.height(), |x, y| {
            let mut all = true;
            let mut any = false;
            for j in 0..se.height as isize {
                for i in 0..se.width as isize {
                    let (sx, sy) = (x as isize - cx + i, y as isize - cy + j);
                    let v = sx >= 0
                        && sy >= 0
                        && (sx as usize) < img.width()
                        && (sy as usize) < img.height()
                        && img.get(sx as usize, sy as usize);
                    all &= v;
                    any |= v;
                }
            }
            if erode {
                all
            } else {
                any
            }
        })
    }

    fn random_mask(seed: u64, w: usize, h: usize, p: f64) -> BinaryImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BinaryImage::from_fn(w, h, |_, _| rng.gen_bool(p))
    }

    #[test]
    fn erode_zero_padding() {
        let img = BinaryImage::from_fn(10, 10, |_, _| true);
        let out = erode(&img, StructuringElement::new(3, 1).unwrap());
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(out.get(x, y), x != 0 && x != 9);
            }
        }
    }

    #[test]
    fn erode_single_pixel_vanishes() {
        let mut img = BinaryImage::zeros(9, 9);
        img.set(4, 4, true);
        for se in [(2, 1), (1, 2), (3, 3)] {
            let se = StructuringElement::new(se.0, se.1).unwrap();
            assert_eq!(erode(&img, se).ink_count(), 0);
        }
    }

    #[test]
    fn dilate_single_pixel() {
        let mut img = BinaryImage::zeros(10, 10);
        img.set(5, 5, true);
        let out = dilate(&img, StructuringElement::new(3, 1).unwrap());
        let ink: Vec<_> = out.ink_pixels().collect();
        assert_eq!(ink, vec![(4, 5), (5, 5), (6, 5)]);
    }

    #[test]
    fn random_masks_match_window_oracle() {
        for seed in 0..20 {
            let img = random_mask(seed, 32, 32, 0.6);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let se = StructuringElement::new(rng.gen_range(1..7), rng.gen_range(1..7)).unwrap();
            assert_eq!(erode(&img, se), window_oracle(&img, se, true), "erode {se:?}");
            assert_eq!(dilate(&img, se), window_oracle(&img, se, false), "dilate {se:?}");
        }
    }

    #[test]
    fn line_masks() {
        let blank = BinaryImage::zeros(50, 40);
        let (h, v) = extract_line_masks(&blank, 0.5, 0.5).unwrap();
        assert_eq!(h.ink_count() + v.ink_count(), 0);

        let stroke = |len: usize| BinaryImage::from_fn(100, 60, |x, y| y == 30 && (10..10 + len).contains(&x));
        let long = stroke(80);
        let (h, v) = extract_line_masks(&long, 0.5, 0.5).unwrap();
        assert_eq!(h, long);
        assert_eq!(v.ink_count(), 0);

        let (h, _) = extract_line_masks(&stroke(30), 0.5, 0.5).unwrap();
        assert_eq!(h.ink_count(), 0);

        assert!(matches!(extract_line_masks(&long, 0.0, 0.5), Err(GridError::InvalidParam(_))));
        assert!(matches!(extract_line_masks(&long, 0.5, 1.0), Err(GridError::InvalidParam(_))));
    }

    proptest! {
        #[test]
        fn opening_idempotent_and_bracketed(seed in any::<u64>(), sw in 1usize..6, sh in 1usize..6, p in 0.3f64..0.9) {
            let img = random_mask(seed, 24, 20, p);
            let se = StructuringElement::new(sw, sh).unwrap();
            let once = open(&img, se);
            prop_assert_eq!(open(&once, se), once.clone());
            prop_assert!(once.is_subset_of(&img));
            prop_assert!(erode(&img, se).is_subset_of(&img));
            prop_assert!(img.is_subset_of(&dilate(&img, se)));
        }
    }
}

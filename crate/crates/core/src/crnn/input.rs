use super::manifest::{INPUT_HEIGHT, INPUT_WIDTH};
use super::CrnnError;
use crate::raster::GrayImage;
use crate::tensorops::Tensor;

/// Bilinear sample with half-pixel centers; coordinates clamp to the image.
fn bilinear(img: &GrayImage, sx: f64, sy: f64) -> f64 {
    let sx = sx.clamp(0.0, (img.width() - 1) as f64);
    let sy = sy.clamp(0.0, (img.height() - 1) as f64);
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width() - 1), (y0 + 1).min(img.height() - 1));
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
    let bottom = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Fits a cell crop into the `40×100×1` network input.
///
/// The crop is scaled with its aspect ratio kept until the height reaches 40
/// or the width reaches 100, centered vertically, left-aligned, padded with
/// white, and inverted to `(255 - p) / 255` so ink is near 1.
pub fn preprocess_cell(cell: &GrayImage) -> Result<Tensor, CrnnError> {
    let (w, h) = (cell.width(), cell.height());
    if w == 0 || h == 0 {
        return Err(CrnnError::EmptyImage);
    }
    let scale = (INPUT_HEIGHT as f64 / h as f64).min(INPUT_WIDTH as f64 / w as f64);
    let nw = ((w as f64 * scale).round() as usize).clamp(1, INPUT_WIDTH);
    let nh = ((h as f64 * scale).round() as usize).clamp(1, INPUT_HEIGHT);
    let (rx, ry) = (w as f64 / nw as f64, h as f64 / nh as f64);
    let top = (INPUT_HEIGHT - nh) / 2;

    let mut data = vec![0f32; INPUT_HEIGHT * INPUT_WIDTH];
    for y in 0..nh {
        let sy = (y as f64 + 0.5) * ry - 0.5;
        for x in 0..nw {
            let sx = (x as f64 + 0.5) * rx - 0.5;
            let p = bilinear(cell, sx, sy);
            data[(top + y) * INPUT_WIDTH + x] = ((255.0 - p) / 255.0) as f32;
        }
    }
    Ok(Tensor::new(vec![INPUT_HEIGHT, INPUT_WIDTH, 1], data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_cell_is_zero() {
        let t = preprocess_cell(&GrayImage::filled(37, 23, 255)).unwrap();
        assert_eq!(t.shape(), &[40, 100, 1]);
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn any_shape_maps_to_input_shape() {
        for (w, h) in [(1, 1), (300, 20), (20, 300), (100, 40), (7, 93)] {
            let t = preprocess_cell(&GrayImage::from_fn(w, h, |x, y| ((x * 31 + y * 17) % 256) as u8)).unwrap();
            assert_eq!(t.shape(), &[40, 100, 1]);
            assert!(t.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn exact_double_upscale() {
        let cell = GrayImage::from_fn(50, 20, |x, y| ((x * 5 + y * 11) % 256) as u8);
        let t = preprocess_cell(&cell).unwrap();
        // 2x upscale with half-pixel centers: output i samples source i/2 - 1/4
        let src = |i: usize, n: usize| -> (usize, usize, f64) {
            if i == 0 {
                return (0, 0, 0.0);
            }
            if i == 2 * n - 1 {
                return (n - 1, n - 1, 0.0);
            }
            if i % 2 == 1 {
                ((i - 1) / 2, (i + 1) / 2, 0.25)
            } else {
                (i / 2 - 1, i / 2, 0.75)
            }
        };
        for y in 0..40 {
            let (y0, y1, fy) = src(y, 20);
            for x in 0..100 {
                let (x0, x1, fx) = src(x, 50);
                let p = |xx, yy| cell.get(xx, yy) as f64;
                let v = (1.0 - fy) * ((1.0 - fx) * p(x0, y0) + fx * p(x1, y0)) + fy * ((1.0 - fx) * p(x0, y1) + fx * p(x1, y1));
                let expect = ((255.0 - v) / 255.0) as f32;
                assert!((t.data()[y * 100 + x] - expect).abs() < 1e-6, "({x},{y})");
            }
        }
    }

    #[test]
    fn wide_cell_is_centered_vertically() {
        // 200x20 -> scale 0.5 -> 100x10, rows 15..25
        let t = preprocess_cell(&GrayImage::filled(200, 20, 0)).unwrap();
        for y in 0..40 {
            let ink = t.data()[y * 100] > 0.5;
            assert_eq!(ink, (15..25).contains(&y), "row {y}");
        }
    }
}

//! Raster image carriers and file I/O.
//!
//! Images use a top-left origin with `y` growing downward and are stored
//! row-major. Binary PGM (`P5`, maxval 255) is the canonical on-disk format;
//! binary PPM (`P6`) and PNG are accepted on load and converted to gray by
//! integer luma.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image header: {0}")]
    CorruptHeader(String),
    #[error("invalid image dimensions {width}x{height} for {len} pixels")]
    BadDimensions {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

/// 8-bit grayscale image, 0 = black, 255 = white.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(RasterError::BadDimensions {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image with every pixel set to `value`.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut img = Self::filled(width, height, 0);
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y);
            }
        }
        img
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copies the `w`×`h` rectangle whose top-left corner is `(x, y)`.
    ///
    /// Returns `None` when the rectangle is empty or leaves the image.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Option<GrayImage> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return None;
        }
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            data.extend_from_slice(&self.data[row * self.width + x..row * self.width + x + w]);
        }
        Some(GrayImage {
            width: w,
            height: h,
            data,
        })
    }

    /// Writes `patch` with its top-left corner at `(x, y)`, clipping at the border.
    pub fn paste(&mut self, patch: &GrayImage, x: usize, y: usize) {
        for py in 0..patch.height {
            let ty = y + py;
            if ty >= self.height {
                break;
            }
            for px in 0..patch.width {
                let tx = x + px;
                if tx >= self.width {
                    break;
                }
                self.set(tx, ty, patch.get(px, py));
            }
        }
    }
}

/// Two-level mask, `1` = ink (foreground).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(RasterError::BadDimensions {
                width,
                height,
                len: data.len(),
            });
        }
        if data.iter().any(|&v| v > 1) {
            return Err(RasterError::CorruptHeader(
                "binary image values must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut img = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y) as u8;
            }
        }
        img
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, ink: bool) {
        self.data[y * self.width + x] = ink as u8;
    }

    pub fn ink_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Iterator over the `(x, y)` coordinates of every ink pixel in scan order.
    pub fn ink_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// `true` when every ink pixel of `self` is also ink in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }

    /// Export with ink as black (0) and background as white (255).
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&v| if v != 0 { 0 } else { 255 })
                .collect(),
        }
    }
}

/// Integer luma with half-up rounding: `(299 R + 587 G + 114 B) / 1000`.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, RasterError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(RasterError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

/// Decodes PGM/PPM/PNG bytes into a grayscale image.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, RasterError> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err(RasterError::UnsupportedFormat(
            "expected binary PGM (P5), PPM (P6) or PNG".into(),
        ))
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<GrayImage, RasterError> {
    let color = &bytes[..2] == b"P6";
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(RasterError::CorruptHeader("expected an integer".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RasterError::CorruptHeader("header integer overflows".into()))?;
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(RasterError::CorruptHeader(
                "missing whitespace after maxval".into(),
            ))
        }
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(RasterError::CorruptHeader(format!(
            "dimensions {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(RasterError::UnsupportedFormat(format!("maxval {maxval}")));
    }
    let channels = if color { 3 } else { 1 };
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| RasterError::CorruptHeader("dimensions overflow".into()))?;
    let body = &bytes[pos..];
    if body.len() < need {
        return Err(RasterError::CorruptHeader(format!(
            "expected {need} data bytes, found {}",
            body.len()
        )));
    }
    let data = if color {
        body[..need]
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect()
    } else {
        body[..need].to_vec()
    };
    GrayImage::new(width, height, data)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage, RasterError> {
    use png::{ColorType, Transformations};

    let corrupt = |e: png::DecodingError| RasterError::CorruptHeader(e.to_string());
    let mut decoder = png::Decoder::new(BufReader::new(bytes));
    decoder.set_transformations(Transformations::EXPAND | Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(corrupt)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(corrupt)?;
    let (width, height) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    let data: Vec<u8> = match info.color_type {
        ColorType::Grayscale => buf.to_vec(),
        ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|p| p[0]).collect(),
        ColorType::Rgb => buf.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect(),
        ColorType::Rgba => buf.chunks_exact(4).map(|p| luma(p[0], p[1], p[2])).collect(),
        ColorType::Indexed => {
            return Err(RasterError::UnsupportedFormat(
                "palette PNG was not expanded".into(),
            ))
        }
    };
    GrayImage::new(width, height, data)
}

/// Serializes as binary PGM: `"P5\n<w> <h>\n255\n"` followed by raw bytes.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.data);
    out
}

pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_pgm(img))?;
    Ok(())
}

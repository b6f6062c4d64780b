//! 8-bit image I/O: binary PGM/PPM and non-interlaced 8-bit PNG.
//!
//! Images load as `1 x C x H x W` tensors with values in `[0, 1]` (C = 1 for
//! grayscale, 3 for RGB). Saving maps `v` to `floor(v * 255 + 0.5)` clamped to
//! `[0, 255]`.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{contract, data_error, ensure, Result};
use crate::tensor::{Shape4, Tensor4};

/// Round-half-up 8-bit quantization of a `[0, 1]` value.
#[inline]
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Snaps every value to the nearest representable 8-bit level.
pub fn quantize_tensor(t: &Tensor4) -> Tensor4 {
    t.map(|v| f64::from(quantize(v)) / 255.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pnm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" | "ppm" | "pnm" => Some(Self::Pnm),
            "png" => Some(Self::Png),
            _ => None,
        }
    }

    /// Guesses the format from the leading magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(Self::Png)
        } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
            Some(Self::Pnm)
        } else {
            None
        }
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor4> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| data_error(path, e.to_string()))?;
    decode_image(&bytes).map_err(|e| match e {
        crate::Error::Contract(msg) => data_error(path, msg),
        other => other,
    })
}

pub fn save_image(path: impl AsRef<Path>, image: &Tensor4) -> Result<()> {
    let path = path.as_ref();
    let format = ImageFormat::from_path(path)
        .ok_or_else(|| data_error(path, "unsupported image extension (use .pgm, .ppm or .png)"))?;
    let bytes = encode_image(image, format)?;
    fs::write(path, bytes).map_err(|e| data_error(path, e.to_string()))
}

pub fn decode_image(bytes: &[u8]) -> Result<Tensor4> {
    match ImageFormat::sniff(bytes) {
        Some(ImageFormat::Png) => decode_png(bytes),
        Some(ImageFormat::Pnm) => decode_pnm(bytes),
        None => Err(contract("unrecognized image format (expected binary PGM/PPM or PNG)")),
    }
}

pub fn encode_image(image: &Tensor4, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Png => encode_png(image),
        ImageFormat::Pnm => encode_pnm(image),
    }
}

fn check_image(image: &Tensor4) -> Result<()> {
    let s = image.shape();
    ensure!(s.batch == 1, "images must have batch size 1, got {}", s.batch);
    ensure!(
        s.channels == 1 || s.channels == 3,
        "images must have 1 or 3 channels, got {}",
        s.channels
    );
    ensure!(s.height > 0 && s.width > 0, "image has no pixels");
    Ok(())
}

/// Interleaved 8-bit samples (`HWC` order) from a `1 x C x H x W` tensor.
fn to_interleaved(image: &Tensor4) -> Vec<u8> {
    let s = image.shape();
    let mut out = Vec::with_capacity(s.sample_len());
    for y in 0..s.height {
        for x in 0..s.width {
            for c in 0..s.channels {
                out.push(quantize(image.get(0, c, y, x)));
            }
        }
    }
    out
}

fn from_interleaved(samples: &[u8], channels: usize, height: usize, width: usize, max: f64) -> Tensor4 {
    Tensor4::from_fn(Shape4::new(1, channels, height, width), |_, c, y, x| {
        f64::from(samples[(y * width + x) * channels + c]) / max
    })
}

pub fn decode_png(bytes: &[u8]) -> Result<Tensor4> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| contract(format!("invalid PNG: {e}")))?;
    let info = reader.info();
    ensure!(!info.interlaced, "interlaced PNG is not supported");
    ensure!(
        info.bit_depth == png::BitDepth::Eight,
        "only 8-bit PNG is supported, got {:?}",
        info.bit_depth
    );
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(contract(format!("unsupported PNG color type {other:?}"))),
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| contract(format!("invalid PNG data: {e}")))?;
    ensure!(
        frame.line_size == width * channels,
        "unexpected PNG line size {}",
        frame.line_size
    );
    Ok(from_interleaved(&buf, channels, height, width, 255.0))
}

pub fn encode_png(image: &Tensor4) -> Result<Vec<u8>> {
    check_image(image)?;
    let s = image.shape();
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, s.width as u32, s.height as u32);
        encoder.set_color(if s.channels == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| contract(format!("PNG encode failed: {e}")))?;
        writer
            .write_image_data(&to_interleaved(image))
            .map_err(|e| contract(format!("PNG encode failed: {e}")))?;
    }
    Ok(out)
}

/// Binary PGM (`P5`) or PPM (`P6`) with maxval up to 255.
pub fn decode_pnm(bytes: &[u8]) -> Result<Tensor4> {
    let mut pos = 2;
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(contract("not a binary PGM/PPM file")),
    };
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        ensure!(pos > start, "malformed PNM header");
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| contract("malformed PNM header number"))?;
    }
    ensure!(
        bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()),
        "PNM header must end with a whitespace byte"
    );
    pos += 1;
    let [width, height, maxval] = header;
    ensure!(
        (1..=255).contains(&maxval),
        "only 8-bit PNM is supported (maxval {maxval})"
    );
    ensure!(width > 0 && height > 0, "PNM image has no pixels");
    let needed = width * height * channels;
    ensure!(
        bytes.len() >= pos + needed,
        "PNM raster truncated: need {needed} bytes, have {}",
        bytes.len().saturating_sub(pos)
    );
    Ok(from_interleaved(
        &bytes[pos..pos + needed],
        channels,
        height,
        width,
        maxval as f64,
    ))
}

pub fn encode_pnm(image: &Tensor4) -> Result<Vec<u8>> {
    check_image(image)?;
    let s = image.shape();
    let magic = if s.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", s.width, s.height).into_bytes();
    out.extend(to_interleaved(image));
    Ok(out)
}

/// Converts an RGB image to luma (ITU-R BT.601 weights); grayscale passes through.
pub fn to_grayscale(image: &Tensor4) -> Result<Tensor4> {
    check_image(image)?;
    let s = image.shape();
    if s.channels == 1 {
        return Ok(image.clone());
    }
    Ok(Tensor4::from_fn(Shape4::new(1, 1, s.height, s.width), |_, _, y, x| {
        0.299 * image.get(0, 0, y, x) + 0.587 * image.get(0, 1, y, x) + 0.114 * image.get(0, 2, y, x)
    }))
}

/// Replicates a grayscale image into three channels; RGB passes through.
pub fn to_color(image: &Tensor4) -> Result<Tensor4> {
    check_image(image)?;
    let s = image.shape();
    if s.channels == 3 {
        return Ok(image.clone());
    }
    Ok(Tensor4::from_fn(Shape4::new(1, 3, s.height, s.width), |_, _, y, x| {
        image.get(0, 0, y, x)
    }))
}

//! Noise level map files.
//!
//! Binary layout (`.nlm`):
//!
//! ```text
//! "NLM1\n"                      5 bytes, magic
//! "<width> <height>\n"          ASCII decimal
//! width * height * f32 LE       row-major values in sigma / 255 units
//! ```
//!
//! Maps can also be exported as 8-bit grayscale PNG where pixel value
//! `p = round(sigma * 255 / 75)`, i.e. black is sigma 0 and white is sigma 75.
//! Importing a PNG inverts that scaling.

use std::fs;
use std::path::Path;

use crate::data::image::{decode_png, encode_png, quantize};
use crate::error::{contract, data_error, ensure, Result};
use crate::noise::map::{NoiseLevelMap, MAX_SIGMA, SIGMA_SCALE};
use crate::tensor::{Shape4, Tensor4};

const MAGIC: &[u8] = b"NLM1\n";

pub fn encode_map(map: &NoiseLevelMap) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend(format!("{} {}\n", map.width(), map.height()).into_bytes());
    for &v in map.values() {
        out.extend((v as f32).to_le_bytes());
    }
    out
}

pub fn decode_map(bytes: &[u8]) -> Result<NoiseLevelMap> {
    ensure!(bytes.starts_with(MAGIC), "not a noise level map file (bad magic)");
    let rest = &bytes[MAGIC.len()..];
    let newline = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| contract("noise map header is missing its dimension line"))?;
    let dims = std::str::from_utf8(&rest[..newline])
        .map_err(|_| contract("noise map dimension line is not ASCII"))?;
    let mut it = dims.split(' ').map(str::parse::<usize>);
    let (width, height) = match (it.next(), it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h)), None) => (w, h),
        _ => return Err(contract(format!("malformed noise map dimensions `{dims}`"))),
    };
    let body = &rest[newline + 1..];
    ensure!(
        body.len() == width * height * 4,
        "noise map body has {} bytes, expected {}",
        body.len(),
        width * height * 4
    );
    let values = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    NoiseLevelMap::custom(height, width, values)
}

pub fn save_map(path: impl AsRef<Path>, map: &NoiseLevelMap) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_png(path) {
        encode_png(&map_to_preview(map))?
    } else {
        encode_map(map)
    };
    fs::write(path, bytes).map_err(|e| data_error(path, e.to_string()))
}

pub fn load_map(path: impl AsRef<Path>) -> Result<NoiseLevelMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| data_error(path, e.to_string()))?;
    let parsed = if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes).and_then(|img| map_from_preview(&img))
    } else {
        decode_map(&bytes)
    };
    parsed.map_err(|e| match e {
        crate::Error::Contract(msg) => data_error(path, msg),
        other => other,
    })
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Grayscale visualization with sigma 75 mapped to white.
pub fn map_to_preview(map: &NoiseLevelMap) -> Tensor4 {
    let scale = SIGMA_SCALE / MAX_SIGMA;
    Tensor4::from_vec(
        Shape4::new(1, 1, map.height(), map.width()),
        map.values()
            .iter()
            .map(|&v| f64::from(quantize(v * scale)) / 255.0)
            .collect(),
    )
    .expect("map length matches its dims")
}

pub fn map_from_preview(image: &Tensor4) -> Result<NoiseLevelMap> {
    let s = image.shape();
    ensure!(
        s.batch == 1 && s.channels == 1,
        "noise map images must be single-channel grayscale"
    );
    let scale = MAX_SIGMA / SIGMA_SCALE;
    NoiseLevelMap::custom(
        s.height,
        s.width,
        image.data().iter().map(|&p| p * scale).collect(),
    )
}

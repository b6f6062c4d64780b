//! Model file format.
//!
//! A model file is a plain-text header followed by raw little-endian values:
//!
//! ```text
//! FFDNET-MODEL\n
//! version=1\n
//! precision=f64\n            (f64 or f32: width of every stored value)
//! num_layers=15\n
//! num_channels=64\n
//! in_channels=1\n
//! downsample_factor=2\n
//! noise_map_channels=1\n
//! bn_merged=0\n              (0 or 1)
//! \n                         (blank line ends the header)
//! <values>
//! ```
//!
//! Values follow layer by layer, first to last. Each layer stores its filter
//! bank in `(out, in, 3, 3)` row-major order, then its `out` biases. Middle
//! layers of an unmerged model then store `gamma`, `beta`, `running_mean` and
//! `running_var` (`out` values each), followed by `epsilon` and `momentum`
//! (one value each). The file ends exactly after the last value.
//!
//! With `precision=f64` saving and loading is lossless.

use std::fs;
use std::path::Path;

use crate::error::{contract, data_error, ensure, Result};
use crate::layers::BatchNormLayer;
use crate::model::config::ModelConfig;
use crate::model::params::ParameterSet;

const MAGIC: &str = "FFDNET-MODEL";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    fn tag(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }

    fn width(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

fn push_values(out: &mut Vec<u8>, values: &[f64], precision: Precision) {
    for &v in values {
        match precision {
            Precision::F64 => out.extend(v.to_le_bytes()),
            Precision::F32 => out.extend((v as f32).to_le_bytes()),
        }
    }
}

pub fn encode_model(params: &ParameterSet, precision: Precision) -> Result<Vec<u8>> {
    params.validate()?;
    let c = &params.config;
    let header = format!(
        "{MAGIC}\nversion={VERSION}\nprecision={}\nnum_layers={}\nnum_channels={}\nin_channels={}\ndownsample_factor={}\nnoise_map_channels={}\nbn_merged={}\n\n",
        precision.tag(),
        c.num_layers,
        c.num_channels,
        c.in_channels,
        c.downsample_factor,
        c.noise_map_channels,
        u8::from(params.bn_merged),
    );
    let mut out = header.into_bytes();
    for layer in &params.layers {
        push_values(&mut out, layer.conv.weights.data(), precision);
        push_values(&mut out, &layer.conv.bias, precision);
        if let Some(bn) = &layer.bn {
            push_values(&mut out, &bn.gamma, precision);
            push_values(&mut out, &bn.beta, precision);
            push_values(&mut out, &bn.running_mean, precision);
            push_values(&mut out, &bn.running_var, precision);
            push_values(&mut out, &[bn.epsilon, bn.momentum], precision);
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    precision: Precision,
}

impl Reader<'_> {
    fn fill(&mut self, dst: &mut [f64]) -> Result<()> {
        let w = self.precision.width();
        let need = dst.len() * w;
        ensure!(
            self.pos + need <= self.bytes.len(),
            "model file is truncated at byte {}",
            self.bytes.len()
        );
        for (i, v) in dst.iter_mut().enumerate() {
            let b = &self.bytes[self.pos + i * w..self.pos + (i + 1) * w];
            *v = match self.precision {
                Precision::F64 => f64::from_le_bytes(b.try_into().expect("8 bytes")),
                Precision::F32 => f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))),
            };
        }
        self.pos += need;
        Ok(())
    }

    fn vec(&mut self, len: usize) -> Result<Vec<f64>> {
        let mut v = vec![0.0; len];
        self.fill(&mut v)?;
        Ok(v)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ParameterSet> {
    let end = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| contract("model header is not terminated by a blank line"))?;
    let header = std::str::from_utf8(&bytes[..end])
        .map_err(|_| contract("model header is not valid UTF-8"))?;
    let mut lines = header.lines();
    ensure!(lines.next() == Some(MAGIC), "not a model file (bad magic)");

    let mut fields = std::collections::HashMap::new();
    for line in lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| contract(format!("malformed header line `{line}`")))?;
        fields.insert(k, v);
    }
    let get = |key: &str| -> Result<&str> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| contract(format!("model header lacks `{key}`")))
    };
    let num = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| contract(format!("model header field `{key}` is not a number")))
    };
    ensure!(
        num("version")? == VERSION as usize,
        "unsupported model file version {}",
        get("version")?
    );
    let precision = match get("precision")? {
        "f64" => Precision::F64,
        "f32" => Precision::F32,
        other => return Err(contract(format!("unknown precision `{other}`"))),
    };
    let config = ModelConfig {
        num_layers: num("num_layers")?,
        num_channels: num("num_channels")?,
        in_channels: num("in_channels")?,
        downsample_factor: num("downsample_factor")?,
        noise_map_channels: num("noise_map_channels")?,
    };
    let bn_merged = match get("bn_merged")? {
        "0" => false,
        "1" => true,
        other => return Err(contract(format!("bn_merged must be 0 or 1, got `{other}`"))),
    };

    let mut params = ParameterSet::zeros(config)?;
    params.bn_merged = bn_merged;
    let mut reader = Reader {
        bytes,
        pos: end + 2,
        precision,
    };
    for layer in &mut params.layers {
        reader.fill(layer.conv.weights.data_mut())?;
        reader.fill(&mut layer.conv.bias)?;
        if bn_merged {
            layer.bn = None;
        }
        if let Some(bn) = &mut layer.bn {
            let c = bn.channels();
            let gamma = reader.vec(c)?;
            let beta = reader.vec(c)?;
            let running_mean = reader.vec(c)?;
            let running_var = reader.vec(c)?;
            let tail = reader.vec(2)?;
            *bn = BatchNormLayer {
                gamma,
                beta,
                running_mean,
                running_var,
                epsilon: tail[0],
                momentum: tail[1],
            };
        }
    }
    ensure!(
        reader.pos == bytes.len(),
        "model file has {} trailing bytes",
        bytes.len() - reader.pos
    );
    params.validate()?;
    Ok(params)
}

pub fn save_model(path: impl AsRef<Path>, params: &ParameterSet, precision: Precision) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(params, precision)?;
    fs::write(path, bytes).map_err(|e| data_error(path, e.to_string()))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ParameterSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| data_error(path, e.to_string()))?;
    decode_model(&bytes).map_err(|e| match e {
        crate::Error::Contract(msg) => data_error(path, msg),
        other => other,
    })
}

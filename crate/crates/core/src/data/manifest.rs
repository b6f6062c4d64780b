//! Training dataset manifests.
//!
//! The file format is plain text with one image per line:
//!
//! ```text
//! # comment
//! images/camera.png gray
//! images/astronaut.png color
//! images/brick.png
//! ```
//!
//! The channel mode defaults to `gray`. Relative paths resolve against the
//! manifest's directory. Patch size and the clip/augment flags are not part of
//! the file; they come from the caller.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::image::{load_image, to_color, to_grayscale};
use crate::error::{data_error, ensure, Result};
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    Gray,
    Color,
}

impl ChannelMode {
    pub fn channels(self) -> usize {
        match self {
            ChannelMode::Gray => 1,
            ChannelMode::Color => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub mode: ChannelMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Side length of square training patches; must be even.
    pub patch_size: usize,
    /// Clip and quantize noisy patches to 8 bits.
    pub clipped: bool,
    /// Apply a random rotation/flip to each patch.
    pub augment: bool,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, patch_size: usize) -> Self {
        Self {
            entries,
            patch_size,
            clipped: false,
            augment: true,
        }
    }

    /// Parses manifest text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, patch_size: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let path = parts.next().expect("non-empty line has a token");
            let mode = match parts.next() {
                None | Some("gray") => ChannelMode::Gray,
                Some("color") => ChannelMode::Color,
                Some(other) => {
                    return Err(data_error(
                        base_dir,
                        format!("line {}: unknown channel mode `{other}`", lineno + 1),
                    ))
                }
            };
            if parts.next().is_some() {
                return Err(data_error(
                    base_dir,
                    format!("line {}: expected `path [gray|color]`", lineno + 1),
                ));
            }
            let path = Path::new(path);
            let path = if path.is_absolute() {
                path.to_path_buf()
            } else {
                base_dir.join(path)
            };
            entries.push(ManifestEntry { path, mode });
        }
        let manifest = Self::new(entries, patch_size);
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>, patch_size: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| data_error(path, e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let manifest = Self::parse(&text, base, patch_size)?;
        if manifest.entries.is_empty() {
            return Err(data_error(path, "manifest lists no images"));
        }
        for entry in &manifest.entries {
            if !entry.path.exists() {
                return Err(data_error(&entry.path, "listed in manifest but does not exist"));
            }
        }
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.patch_size >= 2 && self.patch_size % 2 == 0,
            "patch size must be even and at least 2, got {}",
            self.patch_size
        );
        Ok(())
    }

    /// Loads every listed image in its declared channel mode.
    pub fn load_images(&self) -> Result<Vec<Tensor4>> {
        self.entries
            .iter()
            .map(|e| {
                let img = load_image(&e.path)?;
                match e.mode {
                    ChannelMode::Gray => to_grayscale(&img),
                    ChannelMode::Color => to_color(&img),
                }
            })
            .collect()
    }
}

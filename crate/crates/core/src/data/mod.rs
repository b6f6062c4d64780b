//! Image I/O, dataset manifests, patch extraction and augmentation.

pub mod image;
pub mod manifest;
pub mod patch;

pub use image::{load_image, quantize, quantize_tensor, save_image, ImageFormat};
pub use manifest::{ChannelMode, DatasetManifest, ManifestEntry};
pub use patch::{augment8, extract_patch, inverse_augment};

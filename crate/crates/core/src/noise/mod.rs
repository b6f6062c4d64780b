//! Noise level maps and synthetic corruption.

pub mod awgn;
pub mod file;
pub mod map;

pub use awgn::{add_awgn, add_awgn_with_rng, NoiseSpec};
pub use file::{decode_map, encode_map, load_map, save_map};
pub use map::{
    anchored_map, gradient_map, uniform_map, MapKind, NoiseLevelMap, RampAxis, RegionAnchor,
    MAX_SIGMA, SIGMA_SCALE,
};

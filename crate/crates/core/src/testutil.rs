use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Shape4, Tensor4};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(r: &mut impl Rng, shape: Shape4) -> Tensor4 {
    Tensor4::from_fn(shape, |_, _, _, _| r.gen_range(-1.0..1.0))
}

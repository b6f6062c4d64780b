//! Patch cropping and the eight rotation/flip augmentations.

use crate::error::{ensure, Result};
use crate::tensor::{Shape4, Tensor4};

/// Copies the `size x size` window whose top-left corner is `(row, col)`.
pub fn extract_patch(image: &Tensor4, top_left: (usize, usize), size: usize) -> Result<Tensor4> {
    let s = image.shape();
    let (row, col) = top_left;
    ensure!(
        row + size <= s.height && col + size <= s.width,
        "patch {size}x{size} at ({row}, {col}) exceeds the {}x{} image",
        s.height,
        s.width
    );
    let mut out = Tensor4::zeros(Shape4::new(s.batch, s.channels, size, size));
    for n in 0..s.batch {
        for c in 0..s.channels {
            let src = image.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..size {
                let from = (row + y) * s.width + col;
                dst[y * size..(y + 1) * size].copy_from_slice(&src[from..from + size]);
            }
        }
    }
    Ok(out)
}

/// Mirrors left-right.
fn flip(t: &Tensor4) -> Tensor4 {
    let s = t.shape();
    Tensor4::from_fn(s, |n, c, y, x| t.get(n, c, y, s.width - 1 - x))
}

/// Rotates 90 degrees counter-clockwise.
fn rot90(t: &Tensor4) -> Tensor4 {
    let s = t.shape();
    Tensor4::from_fn(Shape4::new(s.batch, s.channels, s.width, s.height), |n, c, y, x| {
        t.get(n, c, x, s.width - 1 - y)
    })
}

/// Applies dihedral transform `k` in `0..8`: an optional left-right flip
/// (`k >= 4`) followed by `k % 4` counter-clockwise quarter turns. `k = 0`
/// is the identity.
pub fn augment8(patch: &Tensor4, k: usize) -> Result<Tensor4> {
    ensure!(k < 8, "augmentation index must be in 0..8, got {k}");
    let mut out = if k >= 4 { flip(patch) } else { patch.clone() };
    for _ in 0..k % 4 {
        out = rot90(&out);
    }
    Ok(out)
}

/// Index of the transform undoing [`augment8`] with index `k`.
pub fn inverse_augment(k: usize) -> usize {
    if k < 4 {
        (4 - k) % 4
    } else {
        // Reflections are involutions.
        k
    }
}

//! Reversible downsampling (space-to-depth) and its inverse (depth-to-space).
//!
//! For factor `f`, input channel `c` becomes the `f*f` output channels
//! `c*f*f + i*f + j`, where sub-image `(i, j)` holds the source pixels whose
//! row is `i` and column is `j` modulo `f`. [`depth_to_space`] uses the same
//! ordering, so the two are exact inverses. Both are pure permutations: their
//! gradients are each other applied to the incoming gradient.

use crate::error::{ensure, Result};
use crate::tensor::{Shape4, Tensor4};

pub fn space_to_depth(input: &Tensor4, factor: usize) -> Result<Tensor4> {
    let s = input.shape();
    ensure!(factor >= 1, "downsampling factor must be at least 1");
    ensure!(
        s.height % factor == 0 && s.width % factor == 0,
        "spatial dims {}x{} are not divisible by {factor}",
        s.height,
        s.width
    );
    let (oh, ow) = (s.height / factor, s.width / factor);
    let out_shape = Shape4::new(s.batch, s.channels * factor * factor, oh, ow);
    let mut out = Tensor4::zeros(out_shape);
    let dst = out.data_mut();
    let src = input.data();
    for n in 0..s.batch {
        for c in 0..s.channels {
            for i in 0..factor {
                for j in 0..factor {
                    let oc = c * factor * factor + i * factor + j;
                    for y in 0..oh {
                        let d = out_shape.index(n, oc, y, 0);
                        let sr = s.index(n, c, y * factor + i, j);
                        for x in 0..ow {
                            dst[d + x] = src[sr + x * factor];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn depth_to_space(input: &Tensor4, factor: usize) -> Result<Tensor4> {
    let s = input.shape();
    ensure!(factor >= 1, "upsampling factor must be at least 1");
    let ff = factor * factor;
    ensure!(
        s.channels % ff == 0,
        "{} channels are not divisible by {ff}",
        s.channels
    );
    let out_shape = Shape4::new(s.batch, s.channels / ff, s.height * factor, s.width * factor);
    let mut out = Tensor4::zeros(out_shape);
    let dst = out.data_mut();
    let src = input.data();
    for n in 0..s.batch {
        for c in 0..out_shape.channels {
            for i in 0..factor {
                for j in 0..factor {
                    let ic = c * ff + i * factor + j;
                    for y in 0..s.height {
                        let sr = s.index(n, ic, y, 0);
                        let d = out_shape.index(n, c, y * factor + i, j);
                        for x in 0..s.width {
                            dst[d + x * factor] = src[sr + x];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

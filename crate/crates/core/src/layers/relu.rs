use crate::error::Result;
use crate::tensor::Tensor4;

pub fn relu_forward(input: &Tensor4) -> Tensor4 {
    input.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes `grad_out` where the forward input was strictly positive. The
/// derivative at exactly zero is taken as 0.
pub fn relu_backward(input: &Tensor4, grad_out: &Tensor4) -> Result<Tensor4> {
    input.zip_map(grad_out, |x, g| if x > 0.0 { g } else { 0.0 })
}

/// Backward pass expressed through the forward output, which has the same
/// positive support as the input. Lets callers drop the pre-activation.
pub(crate) fn relu_backward_from_output(output: &Tensor4, grad_out: &Tensor4) -> Result<Tensor4> {
    relu_backward(output, grad_out)
}

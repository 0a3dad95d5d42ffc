//! Deterministic tensor and small-network substrate with analytic gradients.

mod attention;
mod gradcheck;
mod mlp;
mod tensor;

pub use attention::{multi_head_attention, AttentionHead, AttentionLayer, AttentionOutput, AttentionParams};
pub use gradcheck::{finite_difference, finite_difference_gradient, max_relative_error};
pub use mlp::{log_softmax, masked_log_softmax, softmax, Activation, ForwardCache, Gradients, Layer, Mlp};
pub use tensor::{dot, l2_norm, Tensor};

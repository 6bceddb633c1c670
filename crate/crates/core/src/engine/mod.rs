//! Minimal CPU tensor engine: NCHW tensors, convolution via im2col and
//! GEMM, batch norm, pooling, binary cross-entropy and Adam.

mod activation;
mod adam;
mod batchnorm;
mod conv;
pub mod gradcheck;
mod kink;
mod layer;
mod loss;
mod pool;
mod real;
mod tensor;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar, Relu, Sigmoid};
pub use adam::{Adam, AdamConfig};
pub use batchnorm::{BatchNorm2d, DEFAULT_BN_EPS, DEFAULT_BN_MOMENTUM};
pub use conv::{
    conv2d, conv2d_backward, conv_transpose2d, conv_transpose2d_backward, Conv2d, ConvGrads,
    ConvTranspose2d,
};
pub use layer::{Layer, Mode, NamedTensor, NamedTensorMut, Sequential};
pub use loss::{bce_loss, bce_loss_backward, sigmoid_bce_backward, BCE_EPS};
pub use pool::{max_pool, MaxPool2d};
pub use real::{gemm, Layout, Real};
pub use tensor::{concat_channels, split_channels, Shape, Tensor};

//! Minimal numeric substrate: tensors, parameters, dense/conv layers,
//! elementwise nonlinearities, a splittable RNG, and a finite-difference
//! gradient checker. Everything downstream builds on these pieces.

pub mod conv;
pub mod gradcheck;
pub mod linear;
pub mod ops;
pub mod param;
pub mod rng;
pub mod tensor;

pub use conv::{conv2d_backward, conv2d_forward, Conv2dGrads};
pub use gradcheck::{grad_check, grad_check_ids, GradCheckReport, GradCheckSettings};
pub use linear::{linear_backward, linear_forward, vec_mat, LinearGrads};
pub use param::{Param, ParamId, ParamStore};
pub use rng::Rng;
pub use tensor::Tensor;

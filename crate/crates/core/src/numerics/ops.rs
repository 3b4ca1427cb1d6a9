//! Elementwise nonlinearities with analytic derivatives.

use crate::numerics::tensor::Tensor;

/// Overflow-safe softplus: ln(1 + exp(x)), with the x > 30 branch collapsing
/// to the asymptote y = x. Output is strictly positive and >= x everywhere.
#[inline]
pub fn softplus_scalar(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// d/dx softplus = sigmoid, computed in the overflow-safe form.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: &Tensor) -> Tensor {
    x.map(softplus_scalar)
}

/// Given x and the upstream gradient dy, returns dx = dy * sigmoid(x).
pub fn softplus_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    debug_assert_eq!(x.shape(), dy.shape());
    Tensor::from_fn(x.shape(), |i| dy.data()[i] * sigmoid_scalar(x.data()[i]))
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

/// dx = dy * s * (1 - s) where s = sigmoid(x).
pub fn sigmoid_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    debug_assert_eq!(x.shape(), dy.shape());
    Tensor::from_fn(x.shape(), |i| {
        let s = sigmoid_scalar(x.data()[i]);
        dy.data()[i] * s * (1.0 - s)
    })
}

#[inline]
pub fn silu_scalar(x: f64) -> f64 {
    x * sigmoid_scalar(x)
}

pub fn silu(x: &Tensor) -> Tensor {
    x.map(silu_scalar)
}

/// dx = dy * (s + x * s * (1 - s)) with s = sigmoid(x).
pub fn silu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    debug_assert_eq!(x.shape(), dy.shape());
    Tensor::from_fn(x.shape(), |i| {
        let xi = x.data()[i];
        let s = sigmoid_scalar(xi);
        dy.data()[i] * (s + xi * s * (1.0 - s))
    })
}

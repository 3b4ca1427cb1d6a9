//! Dense layer y = x W (+ b) with exact analytic backward.
//!
//! Accumulation order is fixed (row-major, ascending inner index), so results
//! are bit-deterministic for identical inputs.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// x: [L, Din], w: [Din, Dout], b: [Dout] optional -> [L, Dout].
pub fn linear_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let (l, din) = x.dims2("linear")?;
    let (win, dout) = w.dims2("linear")?;
    if din != win {
        return Err(Error::ShapeMismatch {
            op: "linear",
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        });
    }
    if let Some(b) = b {
        if b.shape() != [dout] {
            return Err(Error::ShapeMismatch {
                op: "linear bias",
                left: b.shape().to_vec(),
                right: vec![dout],
            });
        }
    }
    let mut y = Tensor::zeros(&[l, dout]);
    for i in 0..l {
        let xi = x.row(i);
        for j in 0..dout {
            let mut acc = b.map_or(0.0, |b| b.data()[j]);
            for (k, &xv) in xi.iter().enumerate() {
                acc += xv * w.at2(k, j);
            }
            y.data_mut()[i * dout + j] = acc;
        }
    }
    Ok(y)
}

pub struct LinearGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Option<Tensor>,
}

/// Given dy = dL/dy, returns dx = dy W^T, dw = x^T dy, db = column sums of dy.
pub fn linear_backward(x: &Tensor, w: &Tensor, dy: &Tensor, with_bias: bool) -> Result<LinearGrads> {
    let (l, din) = x.dims2("linear_backward")?;
    let (_, dout) = w.dims2("linear_backward")?;
    if dy.shape() != [l, dout] {
        return Err(Error::ShapeMismatch {
            op: "linear_backward",
            left: dy.shape().to_vec(),
            right: vec![l, dout],
        });
    }
    let mut dx = Tensor::zeros(&[l, din]);
    let mut dw = Tensor::zeros(&[din, dout]);
    let mut db = if with_bias { Some(Tensor::zeros(&[dout])) } else { None };
    for i in 0..l {
        let xi = x.row(i);
        let dyi = dy.row(i);
        for k in 0..din {
            let mut acc = 0.0;
            for j in 0..dout {
                acc += dyi[j] * w.at2(k, j);
            }
            dx.data_mut()[i * din + k] = acc;
        }
        for k in 0..din {
            let xv = xi[k];
            for j in 0..dout {
                dw.data_mut()[k * dout + j] += xv * dyi[j];
            }
        }
        if let Some(db) = db.as_mut() {
            for j in 0..dout {
                db.data_mut()[j] += dyi[j];
            }
        }
    }
    Ok(LinearGrads { dx, dw, db })
}

/// vec-matrix product: x: [Din], w: [Din, Dout] -> [Dout]. Convenience for
/// guidance vectors and single-row projections.
pub fn vec_mat(x: &[f64], w: &Tensor) -> Result<Vec<f64>> {
    let (din, dout) = w.dims2("vec_mat")?;
    if x.len() != din {
        return Err(Error::ShapeMismatch {
            op: "vec_mat",
            left: vec![x.len()],
            right: vec![din, dout],
        });
    }
    let mut y = vec![0.0; dout];
    for (k, &xv) in x.iter().enumerate() {
        for (j, yv) in y.iter_mut().enumerate() {
            *yv += xv * w.at2(k, j);
        }
    }
    Ok(y)
}

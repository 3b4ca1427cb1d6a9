//! 2-d convolution over `[C, H, W]` maps, kernels 1x1 and 3x3, strides 1 and 2.
//!
//! 3x3 kernels use one ring of zero padding so spatial extent follows
//! `H' = ceil(H / stride)` for both kernel sizes. Weights are `[Cout, Cin, k, k]`.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

fn check_conv(x: &Tensor, w: &Tensor, stride: usize, op: &'static str) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let (cin, h, wd) = x.dims3(op)?;
    let (cout, wcin, kh, kw) = w.dims4(op)?;
    if kh != kw || !(kh == 1 || kh == 3) {
        return Err(Error::Unsupported { what: format!("conv kernel {kh}x{kw} (expected 1x1 or 3x3)") });
    }
    if !(stride == 1 || stride == 2) {
        return Err(Error::Unsupported { what: format!("conv stride {stride} (expected 1 or 2)") });
    }
    if wcin != cin {
        return Err(Error::ShapeMismatch { op, left: x.shape().to_vec(), right: w.shape().to_vec() });
    }
    Ok((cin, h, wd, cout, kh, if kh == 3 { 1 } else { 0 }))
}

#[inline]
fn out_extent(n: usize, stride: usize) -> usize {
    n.div_ceil(stride)
}

/// x: [Cin, H, W], w: [Cout, Cin, k, k], b: [Cout] -> [Cout, ceil(H/s), ceil(W/s)].
pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>, stride: usize) -> Result<Tensor> {
    let (cin, h, wd, cout, k, pad) = check_conv(x, w, stride, "conv2d")?;
    if let Some(b) = b {
        if b.shape() != [cout] {
            return Err(Error::ShapeMismatch {
                op: "conv2d bias",
                left: b.shape().to_vec(),
                right: vec![cout],
            });
        }
    }
    let (oh, ow) = (out_extent(h, stride), out_extent(wd, stride));
    let mut y = Tensor::zeros(&[cout, oh, ow]);
    for oc in 0..cout {
        let base = b.map_or(0.0, |b| b.data()[oc]);
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = base;
                for ic in 0..cin {
                    for kh in 0..k {
                        let ih = (i * stride + kh).wrapping_sub(pad);
                        if ih >= h {
                            continue;
                        }
                        for kw in 0..k {
                            let iw = (j * stride + kw).wrapping_sub(pad);
                            if iw >= wd {
                                continue;
                            }
                            acc += x.at3(ic, ih, iw) * w.at4(oc, ic, kh, kw);
                        }
                    }
                }
                let idx = y.idx3(oc, i, j);
                y.data_mut()[idx] = acc;
            }
        }
    }
    Ok(y)
}

pub struct Conv2dGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Option<Tensor>,
}

pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    stride: usize,
    with_bias: bool,
) -> Result<Conv2dGrads> {
    let (cin, h, wd, cout, k, pad) = check_conv(x, w, stride, "conv2d_backward")?;
    let (oh, ow) = (out_extent(h, stride), out_extent(wd, stride));
    if dy.shape() != [cout, oh, ow] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            left: dy.shape().to_vec(),
            right: vec![cout, oh, ow],
        });
    }
    let mut dx = Tensor::zeros(&[cin, h, wd]);
    let mut dw = Tensor::zeros(w.shape());
    let mut db = if with_bias { Some(Tensor::zeros(&[cout])) } else { None };
    for oc in 0..cout {
        for i in 0..oh {
            for j in 0..ow {
                let g = dy.at3(oc, i, j);
                if let Some(db) = db.as_mut() {
                    db.data_mut()[oc] += g;
                }
                for ic in 0..cin {
                    for kh in 0..k {
                        let ih = (i * stride + kh).wrapping_sub(pad);
                        if ih >= h {
                            continue;
                        }
                        for kw in 0..k {
                            let iw = (j * stride + kw).wrapping_sub(pad);
                            if iw >= wd {
                                continue;
                            }
                            let xi = dx.idx3(ic, ih, iw);
                            dx.data_mut()[xi] += g * w.at4(oc, ic, kh, kw);
                            let wi = dw.idx4(oc, ic, kh, kw);
                            dw.data_mut()[wi] += g * x.at3(ic, ih, iw);
                        }
                    }
                }
            }
        }
    }
    Ok(Conv2dGrads { dx, dw, db })
}

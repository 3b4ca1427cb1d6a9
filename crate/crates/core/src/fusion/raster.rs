//! Raster-order flattening between [C, H, W] feature maps and [L, C]
//! scan sequences, L = H·W.
//!
//! Forward direction walks rows top-to-bottom, left-to-right; reverse walks
//! the same path backwards. Both are permutations, so each function is its
//! own gradient routing: the backward of `flatten_raster` is `unflatten`
//! applied to the sequence gradient with the same direction, and vice versa.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanDirection {
    Forward,
    Reverse,
}

/// A flattened feature map plus what is needed to put it back.
#[derive(Debug, Clone)]
pub struct ImageSequence {
    /// [L, C], L = H·W.
    pub x: Tensor,
    pub h: usize,
    pub w: usize,
    pub dir: ScanDirection,
}

/// map: [C, H, W] → sequence [H·W, C] in raster order.
pub fn flatten_raster(map: &Tensor, dir: ScanDirection) -> Result<ImageSequence> {
    let (c, h, w) = map.dims3("flatten_raster")?;
    let l = h * w;
    let mut x = Tensor::zeros(&[l, c]);
    for i in 0..h {
        for j in 0..w {
            let p = i * w + j;
            let row = match dir {
                ScanDirection::Forward => p,
                ScanDirection::Reverse => l - 1 - p,
            };
            for ci in 0..c {
                x.data_mut()[row * c + ci] = map.at3(ci, i, j);
            }
        }
    }
    Ok(ImageSequence { x, h, w, dir })
}

/// sequence [H·W, C] → map [C, H, W]; exact inverse of [`flatten_raster`].
pub fn unflatten(x: &Tensor, h: usize, w: usize, dir: ScanDirection) -> Result<Tensor> {
    let (l, c) = x.dims2("unflatten")?;
    if l != h * w {
        return Err(Error::ShapeMismatch {
            op: "unflatten",
            left: x.shape().to_vec(),
            right: vec![h * w, c],
        });
    }
    let mut map = Tensor::zeros(&[c, h, w]);
    for i in 0..h {
        for j in 0..w {
            let p = i * w + j;
            let row = match dir {
                ScanDirection::Forward => p,
                ScanDirection::Reverse => l - 1 - p,
            };
            for ci in 0..c {
                let idx = map.idx3(ci, i, j);
                map.data_mut()[idx] = x.at2(row, ci);
            }
        }
    }
    Ok(map)
}

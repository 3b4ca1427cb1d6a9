//! Parallel guidance: the text hidden state modulates B, C, Δ at every image
//! position within a single scan.
//!
//! The text summary is flattened to one vector, projected once per scan
//! through dedicated guidance weights, and broadcast-added to every
//! position's own projections — so guidance costs O(1) per position and the
//! whole fused scan stays linear in the sequence length. With the guidance
//! vector absent the same weights run a plain selective scan, which the
//! guidance-off reductions compare against exactly.
//!
//! Unlike a per-channel attention rescale, the guidance shifts the scan
//! dynamics themselves (through Δ and B/C), so two positions with identical
//! features can be transformed differently depending on scan context — the
//! output is not diag(s)·(unguided output) for any channel vector s.

use crate::error::Result;
use crate::fusion::raster::ImageSequence;
use crate::numerics::param::ParamStore;
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;
use crate::ssm::head::{HeadCache, ScanHead};
use crate::text::block::TextHiddenState;

/// Constant-size summary of a scanned image sequence: [D_i, E_i]. Row-major
/// data doubles as the flattened guidance vector for the text side.
#[derive(Debug, Clone)]
pub struct ImageHiddenState(pub Tensor);

impl ImageHiddenState {
    pub fn vec(&self) -> &[f64] {
        self.0.data()
    }
}

/// Scan head with guidance projections for the flattened text state.
#[derive(Debug, Clone)]
pub struct PgssWeights {
    pub head: ScanHead,
}

impl PgssWeights {
    /// `guide_dim` is the flattened text-state length D_t·E_t.
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        d_i: usize,
        e_i: usize,
        guide_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        PgssWeights { head: ScanHead::init(store, prefix, d_i, e_i, Some(guide_dim), rng) }
    }
}

pub struct PgssCache {
    head: HeadCache,
}

/// Guided scan over a flattened image sequence. `ths: None` runs the same
/// weights unguided (the ablation/reduction path). Returns (Y, IHS, cache).
pub fn pgss(
    store: &ParamStore,
    seq: &ImageSequence,
    ths: Option<&TextHiddenState>,
    w: &PgssWeights,
) -> Result<(Tensor, ImageHiddenState, PgssCache)> {
    let guide = ths.map(|t| t.vec());
    let (scan, head_cache) = w.head.forward(store, &seq.x, guide, None)?;
    Ok((
        scan.y,
        ImageHiddenState(scan.final_state),
        PgssCache { head: head_cache },
    ))
}

/// Backward of [`pgss`]: returns the gradient on the flattened sequence and,
/// when the call was guided, on the flattened text-state vector.
pub fn pgss_backward(
    store: &mut ParamStore,
    w: &PgssWeights,
    cache: &PgssCache,
    d_y: &Tensor,
    d_ihs: Option<&Tensor>,
) -> Result<(Tensor, Option<Vec<f64>>)> {
    let g = w.head.backward(store, &cache.head, d_y, d_ihs)?;
    Ok((g.d_x, g.d_guide))
}

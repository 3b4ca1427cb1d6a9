//! Stacked scan layers over the text sequence.
//!
//! One layer: u = x·W_in → scan head (B/C/Δ projected from u) → y_scan·W_out,
//! residual-added to x. The block's hidden-state summary (THS) is the final
//! scan state of the last layer — a [D_t, E_t] matrix whose size does not
//! depend on the token count.
//!
//! Layers are deliberately bias-free (W_in/W_out and the head's sequence
//! projections): a zero input propagates to exactly zero output and zero THS,
//! which the guidance-off reductions rely on.

use crate::error::Result;
use crate::numerics::linear::{linear_backward, linear_forward};
use crate::numerics::param::{ParamId, ParamStore};
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;
use crate::ssm::head::{HeadCache, ScanHead};

/// Constant-size summary of a scanned text sequence: [D_t, E_t]. The
/// row-major data doubles as the flattened guidance vector.
#[derive(Debug, Clone)]
pub struct TextHiddenState(pub Tensor);

impl TextHiddenState {
    pub fn vec(&self) -> &[f64] {
        self.0.data()
    }
}

#[derive(Debug, Clone)]
pub struct TextMambaLayer {
    /// [D_t, D_t]
    pub w_in: ParamId,
    pub head: ScanHead,
    /// [D_t, D_t]
    pub w_out: ParamId,
}

pub struct LayerPartCache {
    x: Tensor,
    scan_y: Tensor,
    head_cache: HeadCache,
}

impl TextMambaLayer {
    pub fn init(store: &mut ParamStore, prefix: &str, d_t: usize, e_t: usize, rng: &mut Rng) -> Self {
        let w_in = store.add_uniform(&format!("{prefix}.w_in"), &[d_t, d_t], d_t, rng);
        let head = ScanHead::init(store, &format!("{prefix}.head"), d_t, e_t, None, rng);
        let w_out = store.add_uniform(&format!("{prefix}.w_out"), &[d_t, d_t], d_t, rng);
        TextMambaLayer { w_in, head, w_out }
    }

    /// Processes one row block with an optional carried scan state; returns
    /// (residual output, final scan state, cache). Splitting a sequence into
    /// consecutive parts and carrying the state is exactly equivalent to one
    /// pass over the whole sequence.
    pub fn forward_part(
        &self,
        store: &ParamStore,
        x: &Tensor,
        h0: Option<&Tensor>,
    ) -> Result<(Tensor, Tensor, LayerPartCache)> {
        let u = linear_forward(x, store.value(self.w_in), None)?;
        let (scan, head_cache) = self.head.forward(store, &u, None, h0)?;
        let out = linear_forward(&scan.y, store.value(self.w_out), None)?;
        let y = x.add(&out)?;
        Ok((
            y,
            scan.final_state,
            LayerPartCache { x: x.clone(), scan_y: scan.y, head_cache },
        ))
    }

    /// Backward of [`forward_part`]: `d_y` is the gradient on the residual
    /// output, `d_final` the gradient on the part's final scan state.
    /// Returns (d_x, d_h0).
    pub fn backward_part(
        &self,
        store: &mut ParamStore,
        cache: &LayerPartCache,
        d_y: &Tensor,
        d_final: Option<&Tensor>,
    ) -> Result<(Tensor, Tensor)> {
        let g_out = linear_backward(&cache.scan_y, store.value(self.w_out), d_y, false)?;
        store.accumulate(self.w_out, &g_out.dw)?;
        let hg = self.head.backward(store, &cache.head_cache, &g_out.dx, d_final)?;
        let g_in = linear_backward(&cache.x, store.value(self.w_in), &hg.d_x, false)?;
        store.accumulate(self.w_in, &g_in.dw)?;
        // residual: d_x sees d_y directly plus the path through the layer
        let d_x = d_y.add(&g_in.dx)?;
        Ok((d_x, hg.d_h0))
    }
}

#[derive(Debug, Clone)]
pub struct TextMambaBlock {
    pub layers: Vec<TextMambaLayer>,
    pub d_t: usize,
    pub e_t: usize,
}

pub struct TextBlockCache {
    parts: Vec<LayerPartCache>,
}

impl TextMambaBlock {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        d_t: usize,
        e_t: usize,
        depth: usize,
        rng: &mut Rng,
    ) -> Self {
        assert!(depth >= 1, "text block needs at least one layer");
        let layers = (0..depth)
            .map(|i| TextMambaLayer::init(store, &format!("{prefix}.layer{i}"), d_t, e_t, rng))
            .collect();
        TextMambaBlock { layers, d_t, e_t }
    }

    /// Returns (w1, THS, cache). THS is the last layer's final scan state.
    pub fn forward(
        &self,
        store: &ParamStore,
        w0: &Tensor,
    ) -> Result<(Tensor, TextHiddenState, TextBlockCache)> {
        let mut x = w0.clone();
        let mut parts = Vec::with_capacity(self.layers.len());
        let mut ths = Tensor::zeros(&[self.d_t, self.e_t]);
        for layer in &self.layers {
            let (y, final_state, cache) = layer.forward_part(store, &x, None)?;
            x = y;
            ths = final_state;
            parts.push(cache);
        }
        Ok((x, TextHiddenState(ths), TextBlockCache { parts }))
    }

    /// Returns d_w0. `d_ths` is the gradient on the block's hidden-state
    /// summary (it only touches the last layer's scan).
    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &TextBlockCache,
        d_w1: &Tensor,
        d_ths: Option<&Tensor>,
    ) -> Result<Tensor> {
        let mut d_x = d_w1.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let d_final = if i + 1 == self.layers.len() { d_ths } else { None };
            let (dx, _d_h0) = layer.backward_part(store, &cache.parts[i], &d_x, d_final)?;
            d_x = dx;
        }
        Ok(d_x)
    }
}

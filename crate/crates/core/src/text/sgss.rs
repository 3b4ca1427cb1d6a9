//! Serial guidance: the compressed image state is scanned *before* the text.
//!
//! The [D_i, E_i] image hidden state is read as E_i tokens of dimension D_i,
//! projected into the text width, and prepended as a virtual prefix. Each
//! layer scans the prefix first, carries the resulting state into the text
//! scan, and only text rows are emitted. By the scan's prefix property this
//! is exactly a single scan over [prefix; text] restricted to the text rows —
//! the concatenated form is the oracle the tests compare against.

use crate::error::Result;
use crate::fusion::ImageHiddenState;
use crate::numerics::linear::{linear_backward, linear_forward};
use crate::numerics::param::{ParamId, ParamStore};
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;
use crate::text::block::{LayerPartCache, TextHiddenState, TextMambaLayer};

#[derive(Debug, Clone)]
pub struct SgssTextMambaBlock {
    pub layers: Vec<TextMambaLayer>,
    /// [D_i, D_t] — projects each image-state token into the text width.
    pub proj: ParamId,
    pub d_t: usize,
    pub e_t: usize,
    pub d_i: usize,
    pub e_i: usize,
}

pub struct SgssCache {
    tokens_raw: Tensor,
    /// (prefix part, text part) per layer.
    parts: Vec<(LayerPartCache, LayerPartCache)>,
}

impl SgssTextMambaBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        d_t: usize,
        e_t: usize,
        depth: usize,
        d_i: usize,
        e_i: usize,
        rng: &mut Rng,
    ) -> Self {
        assert!(depth >= 1, "sgss block needs at least one layer");
        let layers = (0..depth)
            .map(|i| TextMambaLayer::init(store, &format!("{prefix}.layer{i}"), d_t, e_t, rng))
            .collect();
        let proj = store.add_uniform(&format!("{prefix}.proj"), &[d_i, d_t], d_i, rng);
        SgssTextMambaBlock { layers, proj, d_t, e_t, d_i, e_i }
    }

    /// Returns (w2, THS, cache); THS is the final state after scanning
    /// prefix-then-text through the last layer.
    pub fn forward(
        &self,
        store: &ParamStore,
        w0: &Tensor,
        ihs: &ImageHiddenState,
    ) -> Result<(Tensor, TextHiddenState, SgssCache)> {
        // [D_i, E_i] read column-wise: token e is the e-th state column
        let tokens_raw = ihs.0.transpose2("sgss tokens")?;
        let mut prefix = linear_forward(&tokens_raw, store.value(self.proj), None)?;
        let mut text = w0.clone();
        let mut parts = Vec::with_capacity(self.layers.len());
        let mut ths = Tensor::zeros(&[self.d_t, self.e_t]);
        for layer in &self.layers {
            let (prefix_out, h_mid, cache_p) = layer.forward_part(store, &prefix, None)?;
            let (text_out, h_fin, cache_t) = layer.forward_part(store, &text, Some(&h_mid))?;
            prefix = prefix_out;
            text = text_out;
            ths = h_fin;
            parts.push((cache_p, cache_t));
        }
        Ok((text, TextHiddenState(ths), SgssCache { tokens_raw, parts }))
    }

    /// Returns (d_w0, d_ihs).
    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &SgssCache,
        d_w2: &Tensor,
        d_ths: Option<&Tensor>,
    ) -> Result<(Tensor, Tensor)> {
        let mut d_text = d_w2.clone();
        let mut d_prefix = Tensor::zeros(&[self.e_i, self.d_t]);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (cache_p, cache_t) = &cache.parts[i];
            let d_final = if i + 1 == self.layers.len() { d_ths } else { None };
            let (d_text_new, d_h_mid) = layer.backward_part(store, cache_t, &d_text, d_final)?;
            // the text scan's h0 was the prefix scan's final state
            let (d_prefix_new, _) =
                layer.backward_part(store, cache_p, &d_prefix, Some(&d_h_mid))?;
            d_text = d_text_new;
            d_prefix = d_prefix_new;
        }
        let g = linear_backward(&cache.tokens_raw, store.value(self.proj), &d_prefix, false)?;
        store.accumulate(self.proj, &g.dw)?;
        let d_ihs = g.dx.transpose2("sgss tokens")?;
        Ok((d_text, d_ihs))
    }
}

//! Token embedding lookup. Stands in for a full text encoder: phrases are
//! short token-id sequences, embeddings come from one learnable table, and
//! the per-phrase row spans are kept so downstream heads can pool text
//! features phrase-by-phrase.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct TokenEmbeddings {
    /// [L_t, D_t] — all phrases' token embeddings, concatenated.
    pub w0: Tensor,
    /// Flattened token ids, one per row of `w0`.
    pub ids: Vec<usize>,
    /// Half-open row ranges of each phrase within `w0`.
    pub phrase_spans: Vec<(usize, usize)>,
}

impl TokenEmbeddings {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Row lookup of every phrase's tokens into one [L_t, D_t] sequence.
pub fn embed_tokens(phrases: &[Vec<usize>], table: &Tensor) -> Result<TokenEmbeddings> {
    if phrases.is_empty() {
        return Err(Error::EmptyInput { what: "phrase list" });
    }
    let (vocab, d_t) = table.dims2("embed_tokens")?;
    let mut ids = Vec::new();
    let mut spans = Vec::with_capacity(phrases.len());
    for phrase in phrases {
        if phrase.is_empty() {
            return Err(Error::EmptyInput { what: "phrase" });
        }
        let start = ids.len();
        for &id in phrase {
            if id >= vocab {
                return Err(Error::OutOfVocab { id, vocab });
            }
            ids.push(id);
        }
        spans.push((start, ids.len()));
    }
    let mut w0 = Tensor::zeros(&[ids.len(), d_t]);
    for (row, &id) in ids.iter().enumerate() {
        w0.data_mut()[row * d_t..(row + 1) * d_t].copy_from_slice(table.row(id));
    }
    Ok(TokenEmbeddings { w0, ids, phrase_spans: spans })
}

/// Scatter-adds the gradient on `w0` back into table rows.
pub fn embed_tokens_backward(emb: &TokenEmbeddings, d_w0: &Tensor, vocab: usize) -> Result<Tensor> {
    let (l, d_t) = d_w0.dims2("embed_tokens_backward")?;
    if l != emb.ids.len() {
        return Err(Error::ShapeMismatch {
            op: "embed_tokens_backward",
            left: d_w0.shape().to_vec(),
            right: vec![emb.ids.len(), d_t],
        });
    }
    let mut d_table = Tensor::zeros(&[vocab, d_t]);
    for (row, &id) in emb.ids.iter().enumerate() {
        for j in 0..d_t {
            d_table.data_mut()[id * d_t + j] += d_w0.at2(row, j);
        }
    }
    Ok(d_table)
}

//! Text side: token embedding lookup, stacked scan layers producing text
//! features plus a constant-size hidden-state summary, and the serial variant
//! that scans image-state tokens as a prefix before the text.

pub mod block;
pub mod embed;
pub mod sgss;

pub use block::{TextHiddenState, TextMambaBlock, TextMambaLayer};
pub use embed::{embed_tokens, embed_tokens_backward, TokenEmbeddings};
pub use sgss::SgssTextMambaBlock;

//! Selective-scan state-space core: discretization, the sequential and
//! chunked recurrences, their backward passes, and the projection head that
//! derives per-position B/C/Δ from a sequence (optionally offset by a
//! guidance vector from the other modality).

pub mod head;
pub mod reference;
pub mod scan;

pub use head::{GuidanceWeights, HeadCache, HeadGrads, ScanHead};
pub use scan::{
    discretize, discretize_backward, flops_of_scan, selective_scan, selective_scan_backward,
    selective_scan_chunked, DiscretizedParams, ScanResult, SsmParams,
};

//! Dataset ingestion and synthesis.
//!
//! Three data paths feed the trainer and scorer:
//!
//! - [`idx`]: the big-endian IDX container for raster images and labels,
//!   plus normalization (block-average downsampling and affine rescale of
//!   pixel bytes into `[-1, 1]`).
//! - [`ehr`]: fixed-width binary encoding of diagnosis-code sets onto a
//!   1071-slot vector, a synthesizer that samples record sets with
//!   prescribed marginal prevalences and pairwise comorbidity lifts, and a
//!   CSV emitter for the synthesized corpora.
//! - [`digits`]: a deterministic glyph-based digit corpus (32x32
//!   grayscale), generated from a counter-based stream so every byte of it
//!   is reproducible from a seed. It stands in for a real handwriting
//!   corpus in tests and self-contained runs.

pub mod digits;
pub mod ehr;
pub mod idx;

pub use digits::generate_digit_corpus;
pub use ehr::{
    encode_admission, read_ehr_csv, synthesize_ehr, write_ehr_csv, SynthEhrModel, CODE_SPACE,
};
pub use idx::{
    load_idx, load_idx_images, load_idx_labels, normalize_images, write_idx_images,
    write_idx_labels, IdxImageSet,
};

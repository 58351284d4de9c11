//! Video preprocessing, slicing, the frame file format and a synthetic paired corpus.

mod corpus;
mod frames;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::audspec::AudSpecError;
use crate::nets::NetError;
use crate::tensor::TensorError;

pub use corpus::{
    assign_splits, build_dataset, compressed_spectrogram, load_sample, paired_sample, read_manifest,
    spectrogram_rows, ManifestEntry, PairedSlices, SplitName, MANIFEST_FILE,
};
pub use frames::{
    derivatives, paired_slices, preprocess, read_vfrm, resize_bilinear, slice_codes, slice_video, write_vfrm,
    FrameSequence, VFRM_MAGIC,
};
pub use synth::{
    mouth_axes, mouth_image, phone_count, render, synth_pair, synth_utterance, Utterance, FRAME_RATE, FRAME_SIZE,
    PHONES, PHONE_SECONDS, SPEAKER_PITCH_HZ,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    Invalid(String),
    #[error("{format}: {detail} at byte {offset}")]
    Format {
        format: &'static str,
        offset: usize,
        detail: String,
    },
    #[error("cannot open {0}: {1}")]
    Missing(PathBuf, std::io::Error),
    #[error(transparent)]
    Audio(#[from] AudSpecError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

//! Deep boosting: layer-wise joint feature boosting and analysis dictionary
//! learning over convolutional filter banks.
//!
//! The pipeline, per class and per layer:
//!
//! 1. Convolve every image with the layer's filter bank ([`filters`]), with
//!    energy-normalized responses at the Gabor base layer.
//! 2. Keep only the per-pixel winning response and pool the survivors into
//!    3-level spatial-pyramid histograms ([`features`]).
//! 3. Select discriminative histogram bins with Gentle AdaBoost regression
//!    stumps ([`boosting`]).
//! 4. Push the filters behind the selected bins away from the negative class
//!    by gradient descent on the analysis regularizer, then repeat
//!    ([`dictlearn`]).
//! 5. Compose pairs of selected filters into the next layer's bank,
//!    compressing near-duplicates ([`deepmodel`]).
//!
//! Classes are trained one-vs-all and scored by summing the per-layer
//! ensembles. [`evalkit`] holds the metrics, [`synth`] a deterministic
//! oriented-bars corpus for desk-scale experiments.
//!
//! With the default `parallel` feature the batch loops (feature extraction,
//! regularizer sums, stump search, per-class training) run on rayon; built
//! with `--no-default-features` the same code paths run sequentially.

pub mod boosting;
pub mod deepmodel;
pub mod dictlearn;
mod error;
pub mod evalkit;
pub mod features;
pub mod filters;
pub mod imagekit;
mod par;
pub mod synth;

pub use error::{Error, ModelFormatError, Result};

/// Caps the number of worker threads used by the parallel batch loops.
///
/// No-op when the crate is built without the `parallel` feature or when the
/// global pool has already been initialized.
pub fn init_parallelism(max_threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = max_threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = max_threads;
}

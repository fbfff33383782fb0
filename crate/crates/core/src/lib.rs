//! ECG beat classification on MIT-BIH records.
//!
//! The pipeline runs in five stages, one module each:
//!
//! * [`wfdb`] reads PhysioNet headers, format-212 signal files and MIT
//!   annotation streams.
//! * [`beats`] cuts R-R-R segments (previous R peak to next R peak) and
//!   centers them in a fixed zero-padded window.
//! * [`datasets`] maps annotation codes onto the MITBIH5 / MITBIH6 / AAMI5
//!   label schemes, subsamples normal beats and builds stratified splits.
//! * [`tensornet`] is a small 1D CNN engine (same-padded convolutions, max
//!   pooling, ReLU, dense + softmax, MSE loss, Adam) with hand-derived
//!   gradients.
//! * [`metrics`] turns predictions into confusion matrices, precision /
//!   sensitivity / F1 and one-vs-rest ROC curves.
//!
//! [`experiment`] glues them together for the `rrr-ecg` binary.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the
//! precision used for training (`f32`) and for gradient checks (`f64`).

pub mod beats;
pub mod datasets;
pub mod experiment;
pub mod metrics;
pub mod scalar;
pub mod tensornet;
pub mod wfdb;

pub use scalar::Scalar;

/// Beat window in training precision.
pub type Segment = beats::BeatSegment<f32>;
/// Labeled beat window in training precision.
pub type Labeled = datasets::LabeledSegment<f32>;
/// The CNN in training precision.
pub type Model = tensornet::Model<f32>;
/// The CNN in double precision, used for finite-difference checks.
pub type Model64 = tensornet::Model<f64>;
/// Adam state matching [`Model`].
pub type Adam = tensornet::AdamState<f32>;

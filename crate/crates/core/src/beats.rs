//! R-R-R beat segmentation.
//!
//! Each beat keeps the signal from the R peak before it to the R peak after
//! it. The span is copied into a fixed window with the beat's own R peak at
//! slot `window_length / 2` and zeros everywhere else.

use thiserror::Error;

use crate::Scalar;

/// Canonical window length.
pub const WINDOW_LENGTH: usize = 2700;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("window length {0} is below the minimum of 3")]
    WindowTooShort(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatSegment<T> {
    pub record_name: String,
    pub r_index: usize,
    pub code: u8,
    pub window: Vec<T>,
    /// Samples copied before the R peak.
    pub left_extent: usize,
    /// Samples copied after the R peak.
    pub right_extent: usize,
}

impl<T> BeatSegment<T> {
    pub fn center(&self) -> usize {
        self.window.len() / 2
    }
}

/// Cuts one window per beat that has both a predecessor and a successor.
///
/// `beat_events` are `(sample_index, code)` pairs sorted by sample index.
/// Beats whose neighbours fall outside `channel` are skipped. Spans wider
/// than the half-window on either side are clipped to it.
pub fn extract_rrr_segments<T: Scalar>(
    record_name: &str,
    channel: &[T],
    beat_events: &[(usize, u8)],
    window_length: usize,
) -> Result<Vec<BeatSegment<T>>, SegmentError> {
    if window_length < 3 {
        return Err(SegmentError::WindowTooShort(window_length));
    }
    Ok(beat_events
        .windows(3)
        .filter(|w| w[2].0 < channel.len())
        .map(|w| rrr_segment(record_name, channel, w[0].0, w[1], w[2].0, window_length))
        .collect())
}

/// Window for the beat `(r, code)` whose neighbouring R peaks sit at `prev`
/// and `next`. Requires `prev <= r <= next < channel.len()` and
/// `window_length >= 3`.
pub fn rrr_segment<T: Scalar>(
    record_name: &str,
    channel: &[T],
    prev: usize,
    (r, code): (usize, u8),
    next: usize,
    window_length: usize,
) -> BeatSegment<T> {
    let center = window_length / 2;
    let left_extent = (r - prev).min(center);
    let right_extent = (next - r).min(window_length - 1 - center);
    let mut window = vec![T::zero(); window_length];
    window[center - left_extent..=center + right_extent]
        .copy_from_slice(&channel[r - left_extent..=r + right_extent]);
    BeatSegment {
        record_name: record_name.to_owned(),
        r_index: r,
        code,
        window,
        left_extent,
        right_extent,
    }
}

/// Distribution of previous-to-next R distances over interior beats.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpanCensus {
    pub max_span: usize,
    pub n_beats: usize,
    /// Beats whose span does not fit a window of the given length.
    pub n_exceeding: usize,
    /// Histogram with `bin_width`-sample bins; `bins[i]` counts spans in
    /// `[i * bin_width, (i + 1) * bin_width)`.
    pub bins: Vec<usize>,
    pub bin_width: usize,
}

impl SpanCensus {
    pub fn new(bin_width: usize) -> Self {
        SpanCensus {
            bin_width: bin_width.max(1),
            ..Default::default()
        }
    }

    pub fn fraction_exceeding(&self) -> f64 {
        if self.n_beats == 0 {
            0.0
        } else {
            self.n_exceeding as f64 / self.n_beats as f64
        }
    }

    /// Adds every interior beat of one record.
    pub fn add_record(&mut self, beat_indices: &[usize], window_length: usize) {
        for w in beat_indices.windows(3) {
            let span = w[2] - w[0];
            self.max_span = self.max_span.max(span);
            self.n_beats += 1;
            if span > window_length - 1 {
                self.n_exceeding += 1;
            }
            let bin = span / self.bin_width;
            if self.bins.len() <= bin {
                self.bins.resize(bin + 1, 0);
            }
            self.bins[bin] += 1;
        }
    }
}

/// Largest previous-to-next R distance over all interior beats of all
/// records.
pub fn max_span_census<'a>(records: impl IntoIterator<Item = &'a [usize]>) -> usize {
    let mut census = SpanCensus::new(100);
    for beats in records {
        census.add_record(beats, WINDOW_LENGTH);
    }
    census.max_span
}

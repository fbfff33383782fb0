use super::{RecordHeader, Result, WfdbError};
use crate::Scalar;

/// Raw ADC samples, one array per signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalData {
    pub channels: Vec<Vec<i16>>,
}

/// Outcome of comparing a channel's sample sum against its header checksum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelCheck {
    pub channel: usize,
    pub computed: i16,
    pub expected: Option<i16>,
}

impl ChannelCheck {
    /// A header without a checksum field cannot fail.
    pub fn passed(&self) -> bool {
        self.expected.is_none_or(|e| e == self.computed)
    }
}

#[derive(Debug, Clone)]
pub struct DecodedSignal {
    pub signal: SignalData,
    /// Checksum comparison per channel; mismatches do not fail the parse.
    pub checks: Vec<ChannelCheck>,
}

#[inline]
fn sign_extend_12(v: u16) -> i16 {
    ((v << 4) as i16) >> 4
}

/// Decodes a format-212 file.
///
/// Every 3 bytes carry two 12-bit two's-complement samples: the low byte of
/// the first, a shared byte whose low nibble completes the first and whose
/// high nibble starts the second, then the low byte of the second. Samples
/// are interleaved across channels frame by frame.
pub fn parse_signal_212(bytes: &[u8], header: &RecordHeader) -> Result<DecodedSignal> {
    let n_signals = header.n_signals;
    let total = header.n_samples * n_signals;
    let expected = (total * 3).div_ceil(2);
    if bytes.len() < expected {
        return Err(WfdbError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }

    let mut channels = vec![Vec::with_capacity(header.n_samples); n_signals];
    let mut k = 0usize;
    let mut push = |s: i16| {
        channels[k % n_signals].push(s);
        k += 1;
    };
    for group in bytes[..expected].chunks(3) {
        let lo = group[0] as u16 | ((group[1] as u16 & 0x0F) << 8);
        push(sign_extend_12(lo));
        // An odd total leaves a two-byte tail holding only the first sample.
        if group.len() == 3 {
            let hi = group[2] as u16 | ((group[1] as u16 & 0xF0) << 4);
            push(sign_extend_12(hi));
        }
    }
    // The last full group may carry a padding sample beyond `total`.
    for c in channels.iter_mut() {
        c.truncate(header.n_samples);
    }

    let signal = SignalData { channels };
    let checks = verify_checksum(&signal, header);
    Ok(DecodedSignal { signal, checks })
}

/// Compares the 16-bit wrap-around sum of each channel with its header
/// checksum.
pub fn verify_checksum(signal: &SignalData, header: &RecordHeader) -> Vec<ChannelCheck> {
    signal
        .channels
        .iter()
        .enumerate()
        .map(|(channel, samples)| ChannelCheck {
            channel,
            computed: samples.iter().fold(0i16, |acc, &s| acc.wrapping_add(s)),
            expected: header.signals.get(channel).and_then(|s| s.checksum),
        })
        .collect()
}

/// Converts ADC samples to millivolts: `(sample - baseline) / gain`.
pub fn to_physical<T: Scalar>(signal: &SignalData, header: &RecordHeader) -> Result<Vec<Vec<T>>> {
    signal
        .channels
        .iter()
        .zip(&header.signals)
        .enumerate()
        .map(|(i, (samples, spec))| {
            if spec.gain == 0.0 {
                return Err(WfdbError::ZeroGain { signal: i });
            }
            let base = spec.baseline as f64;
            Ok(samples
                .iter()
                .map(|&s| T::of((s as f64 - base) / spec.gain))
                .collect())
        })
        .collect()
}

/// Packs interleaved channels into format 212. Used to build fixtures.
///
/// Samples outside the 12-bit range are truncated to their low 12 bits.
pub fn encode_212(channels: &[Vec<i16>]) -> Vec<u8> {
    let n = channels.first().map_or(0, Vec::len);
    let interleaved: Vec<u16> = (0..n)
        .flat_map(|i| channels.iter().map(move |c| c[i] as u16 & 0x0FFF))
        .collect();
    let mut out = Vec::with_capacity(interleaved.len().div_ceil(2) * 3);
    for pair in interleaved.chunks(2) {
        let a = pair[0];
        let b = pair.get(1).copied().unwrap_or(0);
        out.push((a & 0xFF) as u8);
        out.push((((a >> 8) & 0x0F) | ((b >> 4) & 0xF0)) as u8);
        if pair.len() == 2 {
            out.push((b & 0xFF) as u8);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfdb::parse_header;
    use proptest::prelude::*;

    fn header(n_signals: usize, n_samples: usize, checksum: i16) -> RecordHeader {
        let mut text = format!("t {n_signals} 360 {n_samples}\n");
        for _ in 0..n_signals {
            text += &format!("t.dat 212 200 12 0 0 {checksum} 0 x\n");
        }
        parse_header(text.as_bytes()).unwrap()
    }

    #[test]
    fn all_zero_group() {
        let d = parse_signal_212(&[0, 0, 0], &header(2, 1, 0)).unwrap();
        assert_eq!(d.signal.channels, vec![vec![0], vec![0]]);
    }

    #[test]
    fn sign_extension_boundary() {
        let d = parse_signal_212(&[0xFF, 0x0F, 0x00], &header(2, 1, 0)).unwrap();
        assert_eq!(d.signal.channels, vec![vec![-1], vec![0]]);
        let d = parse_signal_212(&[0x00, 0x88, 0xFF], &header(2, 1, 0)).unwrap();
        assert_eq!(d.signal.channels, vec![vec![-2048], vec![-1793]]);
    }

    #[test]
    fn odd_total_reads_first_sample_of_last_group() {
        // three samples in one channel: 5, -3, 7
        let bytes = encode_212(&[vec![5, -3, 7]]);
        assert_eq!(bytes.len(), 5);
        let d = parse_signal_212(&bytes, &header(1, 3, 9)).unwrap();
        assert_eq!(d.signal.channels, vec![vec![5, -3, 7]]);
        assert!(d.checks[0].passed());
    }

    #[test]
    fn truncated_file() {
        assert!(matches!(
            parse_signal_212(&[0, 0], &header(2, 1, 0)),
            Err(WfdbError::Truncated {
                expected: 3,
                actual: 2
            })
        ));
    }

    #[test]
    fn checksum_predicate() {
        let zeros = SignalData {
            channels: vec![vec![0; 10], vec![0; 10]],
        };
        assert!(verify_checksum(&zeros, &header(2, 10, 0))
            .iter()
            .all(ChannelCheck::passed));
        assert!(verify_checksum(&zeros, &header(2, 10, 1))
            .iter()
            .all(|c| !c.passed()));
    }

    #[test]
    fn checksum_mismatch_still_returns_data() {
        let bytes = encode_212(&[vec![1, 2], vec![3, 4]]);
        let d = parse_signal_212(&bytes, &header(2, 2, 0)).unwrap();
        assert_eq!(d.signal.channels[1], vec![3, 4]);
        assert_eq!(d.checks[0].computed, 3);
        assert!(!d.checks[0].passed());
    }

    #[test]
    fn checksum_wraps_at_16_bits() {
        let s = SignalData {
            channels: vec![vec![2047; 17]],
        };
        let expected = (2047i32 * 17) as i16;
        let h = header(1, 17, expected);
        assert_eq!(verify_checksum(&s, &h)[0].computed, expected);
    }

    #[test]
    fn physical_units() {
        let text = "t 1 360 3\nt.dat 212 200 12 1024 0 0 0 x\n";
        let h = parse_header(text.as_bytes()).unwrap();
        let s = SignalData {
            channels: vec![vec![1024, 1224, 924]],
        };
        let mv: Vec<Vec<f64>> = to_physical(&s, &h).unwrap();
        assert_eq!(mv[0], vec![0.0, 1.0, -0.5]);

        let mut zero = h.clone();
        zero.signals[0].gain = 0.0;
        assert!(matches!(
            to_physical::<f64>(&s, &zero),
            Err(WfdbError::ZeroGain { signal: 0 })
        ));
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(
            n_signals in 1usize..4,
            raw in prop::collection::vec(-2048i16..=2047, 1..200),
        ) {
            let n = raw.len() / n_signals;
            prop_assume!(n > 0);
            let channels: Vec<Vec<i16>> = (0..n_signals)
                .map(|c| (0..n).map(|i| raw[i * n_signals + c]).collect())
                .collect();
            let sums: Vec<i16> = channels
                .iter()
                .map(|c| c.iter().fold(0i16, |a, &s| a.wrapping_add(s)))
                .collect();
            let mut text = format!("t {n_signals} 360 {n}\n");
            for s in &sums {
                text += &format!("t.dat 212 200 12 0 0 {s} 0 x\n");
            }
            let h = parse_header(text.as_bytes()).unwrap();
            let d = parse_signal_212(&encode_212(&channels), &h).unwrap();
            prop_assert_eq!(&d.signal.channels, &channels);
            prop_assert!(d.checks.iter().all(ChannelCheck::passed));
        }
    }
}

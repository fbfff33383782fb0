//! Synthetic MIT-BIH style records for end-to-end tests.

#![allow(dead_code)]

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrr_ecg::wfdb::{encode_212, encode_annotations, AnnotationEvent};

pub const FS: usize = 360;
pub const GAIN: f64 = 200.0;
pub const ADC_ZERO: i32 = 1024;

/// A beat shape per annotation code: `(amplitude mV, width samples, offset)`.
fn template(code: u8) -> (f64, f64, isize) {
    match code {
        1 => (1.2, 4.0, 0),
        2 => (1.0, 14.0, 0),
        3 => (-1.0, 5.0, 0),
        5 => (-1.6, 22.0, 6),
        12 => (0.7, 3.0, -30),
        8 => (0.6, 4.0, 0),
        _ => (0.4, 9.0, 3),
    }
}

/// ADC samples for one lead holding a Gaussian bump per beat.
pub fn render(n_samples: usize, beats: &[(usize, u8)]) -> Vec<i16> {
    let mut mv = vec![0.0f64; n_samples];
    for &(r, code) in beats {
        let (amp, width, offset) = template(code);
        let centre = r as isize + offset;
        let reach = (4.0 * width) as isize;
        for t in (centre - reach).max(0)..(centre + reach).min(n_samples as isize) {
            let d = (t - centre) as f64 / width;
            mv[t as usize] += amp * (-0.5 * d * d).exp();
        }
        if code == 12 {
            // pacing spike ahead of the complex
            let s = (r as isize - 40).max(0) as usize;
            mv[s] += 2.0;
        }
    }
    mv.iter()
        .map(|v| (ADC_ZERO as f64 + (GAIN * v).round()).clamp(-2048.0, 2047.0) as i16)
        .collect()
}

/// Beats every ~`spacing` samples, cycling through `codes`.
pub fn beat_train(n_samples: usize, codes: &[u8], spacing: usize, seed: u64) -> Vec<(usize, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beats = Vec::new();
    let mut t = spacing / 2;
    let mut k = 0;
    while t + spacing / 2 < n_samples {
        beats.push((t, codes[k % codes.len()]));
        k += 1;
        t += spacing - spacing / 5 + rng.gen_range(0..2 * spacing / 5);
    }
    beats
}

/// Writes `<name>.hea`, `<name>.dat` (format 212, two leads) and
/// `<name>.atr` into `dir`. Lead 1 is a scaled copy of lead 0.
pub fn write_record(dir: &Path, name: &str, n_samples: usize, beats: &[(usize, u8)]) {
    let lead0 = render(n_samples, beats);
    let lead1: Vec<i16> = lead0.iter().map(|&v| ((v as i32 - ADC_ZERO) / 2) as i16).collect();
    let checksum = |c: &[i16]| c.iter().fold(0i16, |a, &v| a.wrapping_add(v));
    let header = format!(
        "{name} 2 {FS} {n_samples}\n\
         {name}.dat 212 {GAIN}({ADC_ZERO})/mV 12 0 {} {} 0 MLII\n\
         {name}.dat 212 {GAIN}(0)/mV 12 0 {} {} 0 V1\n",
        lead0[0],
        checksum(&lead0),
        lead1[0],
        checksum(&lead1),
    );
    fs::write(dir.join(format!("{name}.hea")), header).unwrap();
    fs::write(dir.join(format!("{name}.dat")), encode_212(&[lead0, lead1])).unwrap();

    let mut events = vec![AnnotationEvent {
        aux: Some("(N".into()),
        ..AnnotationEvent::new(1, 28)
    }];
    events.extend(beats.iter().map(|&(t, c)| AnnotationEvent::new(t as u64, c)));
    fs::write(dir.join(format!("{name}.atr")), encode_annotations(&events)).unwrap();
}

/// Records `names`, each holding every code in `codes` several times.
pub fn write_corpus(dir: &Path, names: &[&str], codes: &[u8], n_samples: usize) {
    for (i, name) in names.iter().enumerate() {
        let beats = beat_train(n_samples, codes, 300, i as u64);
        write_record(dir, name, n_samples, &beats);
    }
}

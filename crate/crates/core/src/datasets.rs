//! Label schemes, normal-beat subsampling and stratified 80/20 splits.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::beats::BeatSegment;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("balance fraction {0} is outside (0, 1]")]
    Fraction(f64),
    #[error("class `{class}` has {count} segments; at least 2 are needed to split")]
    TooFewInClass { class: String, count: usize },
    #[error("nothing to split")]
    Empty,
    #[error("at least one run is required")]
    NoRuns,
    #[error("unknown label scheme `{0}`")]
    UnknownScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    Mitbih5,
    Mitbih6,
    Aami5,
}

impl SchemeId {
    pub const ALL: [SchemeId; 3] = [SchemeId::Mitbih5, SchemeId::Mitbih6, SchemeId::Aami5];
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeId::Mitbih5 => "MITBIH5",
            SchemeId::Mitbih6 => "MITBIH6",
            SchemeId::Aami5 => "AAMI5",
        })
    }
}

impl FromStr for SchemeId {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MITBIH5" => Ok(SchemeId::Mitbih5),
            "MITBIH6" => Ok(SchemeId::Mitbih6),
            "AAMI5" => Ok(SchemeId::Aami5),
            _ => Err(DatasetError::UnknownScheme(s.to_owned())),
        }
    }
}

/// Mapping from MIT-BIH annotation codes to dense class indices.
///
/// Class 0 is the normal class in every scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelScheme {
    pub id: SchemeId,
    pub class_names: Vec<&'static str>,
    /// `(codes, class index)`; codes not listed are excluded.
    groups: Vec<(&'static [u8], usize)>,
    pub excluded_records: Vec<&'static str>,
}

impl LabelScheme {
    pub fn new(id: SchemeId) -> Self {
        match id {
            SchemeId::Mitbih5 => LabelScheme {
                id,
                class_names: vec!["N", "L", "R", "V", "/"],
                groups: vec![(&[1], 0), (&[2], 1), (&[3], 2), (&[5], 3), (&[12], 4)],
                excluded_records: vec![],
            },
            SchemeId::Mitbih6 => LabelScheme {
                id,
                class_names: vec!["N", "L", "R", "V", "/", "Other"],
                groups: vec![
                    (&[1], 0),
                    (&[2], 1),
                    (&[3], 2),
                    (&[5], 3),
                    (&[12], 4),
                    (&[4, 6, 7, 8, 9, 10, 11, 13, 34, 38], 5),
                ],
                excluded_records: vec![],
            },
            SchemeId::Aami5 => LabelScheme {
                id,
                class_names: vec!["N", "S", "V", "F", "Q"],
                groups: vec![
                    (&[1, 2, 3, 34, 11], 0),
                    (&[8, 4, 7, 9], 1),
                    (&[5, 10], 2),
                    (&[6], 3),
                    (&[12, 38, 13], 4),
                ],
                excluded_records: vec!["102", "104", "107", "217"],
            },
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Class index for an annotation code, or `None` when excluded.
    pub fn map_label(&self, code: u8) -> Option<usize> {
        self.groups
            .iter()
            .find(|(codes, _)| codes.contains(&code))
            .map(|&(_, class)| class)
    }

    pub fn includes_record(&self, name: &str) -> bool {
        !self.excluded_records.contains(&name)
    }

    /// Codes mapped to `class`, ascending.
    pub fn codes_of(&self, class: usize) -> Vec<u8> {
        let mut codes: Vec<u8> = self
            .groups
            .iter()
            .filter(|g| g.1 == class)
            .flat_map(|g| g.0.iter().copied())
            .collect();
        codes.sort_unstable();
        codes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment<T> {
    pub segment: BeatSegment<T>,
    pub class: usize,
}

/// Labels segments under `scheme`, dropping excluded codes and records.
pub fn label_segments<T>(
    segments: impl IntoIterator<Item = BeatSegment<T>>,
    scheme: &LabelScheme,
) -> Vec<LabeledSegment<T>> {
    segments
        .into_iter()
        .filter(|s| scheme.includes_record(&s.record_name))
        .filter_map(|segment| {
            scheme
                .map_label(segment.code)
                .map(|class| LabeledSegment { segment, class })
        })
        .collect()
}

/// Segment count per class index.
pub fn class_counts<T>(items: &[LabeledSegment<T>], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for s in items {
        counts[s.class] += 1;
    }
    counts
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Keeps `round(fraction * n)` of the class-0 segments, drawn uniformly
/// without replacement. Other classes pass through; relative order is kept.
pub fn balance_normals<T>(
    items: Vec<LabeledSegment<T>>,
    fraction: f64,
    seed: u64,
) -> Result<Vec<LabeledSegment<T>>, DatasetError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DatasetError::Fraction(fraction));
    }
    let normals: Vec<usize> = items
        .iter()
        .enumerate()
        .filter(|(_, s)| s.class == 0)
        .map(|(i, _)| i)
        .collect();
    let keep_n = (fraction * normals.len() as f64).round() as usize;
    let mut keep = vec![true; items.len()];
    if keep_n < normals.len() {
        for &i in &normals {
            keep[i] = false;
        }
        for k in index::sample(&mut rng(seed), normals.len(), keep_n) {
            keep[normals[k]] = true;
        }
    }
    Ok(items
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect())
}

/// Caps every class at `cap` segments, drawn uniformly without replacement.
pub fn cap_per_class<T>(
    items: Vec<LabeledSegment<T>>,
    n_classes: usize,
    cap: usize,
    seed: u64,
) -> Vec<LabeledSegment<T>> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, s) in items.iter().enumerate() {
        by_class[s.class].push(i);
    }
    let mut keep = vec![false; items.len()];
    let mut r = rng(seed);
    for members in &by_class {
        if members.len() <= cap {
            members.iter().for_each(|&i| keep[i] = true);
        } else {
            for k in index::sample(&mut r, members.len(), cap) {
                keep[members[k]] = true;
            }
        }
    }
    items
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}

/// Train/test partition as indices into the labeled segment list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub scheme: SchemeId,
}

/// Per-class training share: `ceil(0.8 n)`, keeping at least one test item.
pub fn train_share(n: usize) -> usize {
    ((4 * n).div_ceil(5)).min(n.saturating_sub(1))
}

/// Stratified 80/20 split; every class contributes to both sides.
pub fn split_80_20<T>(
    items: &[LabeledSegment<T>],
    scheme: &LabelScheme,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    if items.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in items.iter().enumerate() {
        by_class.entry(s.class).or_default().push(i);
    }
    let mut r = rng(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in by_class {
        if members.len() < 2 {
            return Err(DatasetError::TooFewInClass {
                class: scheme
                    .class_names
                    .get(class)
                    .map_or_else(|| class.to_string(), |n| n.to_string()),
                count: members.len(),
            });
        }
        members.shuffle(&mut r);
        let n_train = train_share(members.len());
        test.extend_from_slice(&members[n_train..]);
        members.truncate(n_train);
        train.extend(members);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit {
        train,
        test,
        seed,
        scheme: scheme.id,
    })
}

/// Seed for run `run` of an experiment: `master + run`.
pub fn derive_seed(master: u64, run: usize) -> u64 {
    master.wrapping_add(run as u64)
}

/// `n_runs` independent stratified 80/20 splits (repeated random splits, so
/// test sets may overlap between runs).
pub fn make_cv_runs<T>(
    items: &[LabeledSegment<T>],
    scheme: &LabelScheme,
    n_runs: usize,
    seed: u64,
) -> Result<Vec<DatasetSplit>, DatasetError> {
    if n_runs == 0 {
        return Err(DatasetError::NoRuns);
    }
    (0..n_runs)
        .map(|run| split_80_20(items, scheme, derive_seed(seed, run)))
        .collect()
}

/// Writes `record_name,r_index,code,class_index,partition` lines, training
/// segments first, each side in segment order.
pub fn write_manifest<T, W: Write>(
    mut out: W,
    items: &[LabeledSegment<T>],
    split: &DatasetSplit,
) -> io::Result<()> {
    for (indices, partition) in [(&split.train, "train"), (&split.test, "test")] {
        for &i in indices {
            let s = &items[i];
            writeln!(
                out,
                "{},{},{},{},{}",
                s.segment.record_name, s.segment.r_index, s.segment.code, s.class, partition
            )?;
        }
    }
    Ok(())
}

/// One parsed manifest line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub record_name: String,
    pub r_index: usize,
    pub code: u8,
    pub class: usize,
    pub train: bool,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = || format!("manifest line {}: `{line}`", n + 1);
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(ManifestEntry {
                record_name: f[0].to_owned(),
                r_index: f[1].parse().map_err(|_| bad())?,
                code: f[2].parse().map_err(|_| bad())?,
                class: f[3].parse().map_err(|_| bad())?,
                train: match f[4] {
                    "train" => true,
                    "test" => false,
                    _ => return Err(bad()),
                },
            })
        })
        .collect()
}

use super::MetricsError;

/// Counts with rows indexed by the actual class and columns by the
/// predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn column_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    /// trace / total
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.n_classes).map(|c| self.counts[c][c]).sum();
        trace as f64 / total as f64
    }

    /// Each row divided by its sum; empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&v| if s == 0 { 0.0 } else { v as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }
}

pub fn confusion(actual: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix, MetricsError> {
    if actual.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&a, &p) in actual.iter().zip(predicted) {
        let index = a.max(p);
        if index >= n_classes {
            return Err(MetricsError::ClassOutOfRange { index, n_classes });
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerClass {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
    /// Set when any of the three ratios had a zero denominator and was
    /// reported as 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub per_class: Vec<PerClass>,
    pub macro_precision: f64,
    pub macro_sensitivity: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64, undefined: &mut bool) -> f64 {
    if den == 0 {
        *undefined = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision TP/(TP+FP), sensitivity TP/(TP+FN) and F1 2TP/(2TP+FP+FN) per
/// class, with unweighted means over classes.
pub fn class_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let per_class: Vec<PerClass> = (0..cm.n_classes)
        .map(|c| {
            let tp = cm.counts[c][c];
            let fp = cm.column_sum(c) - tp;
            let fn_ = cm.row_sum(c) - tp;
            let mut undefined = false;
            PerClass {
                tp,
                fp,
                fn_,
                precision: ratio(tp, tp + fp, &mut undefined),
                sensitivity: ratio(tp, tp + fn_, &mut undefined),
                f1: ratio(2 * tp, 2 * tp + fp + fn_, &mut undefined),
                undefined,
            }
        })
        .collect();
    let mean = |f: fn(&PerClass) -> f64| {
        if per_class.is_empty() {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / per_class.len() as f64
        }
    };
    ClassMetrics {
        macro_precision: mean(|m| m.precision),
        macro_sensitivity: mean(|m| m.sensitivity),
        macro_f1: mean(|m| m.f1),
        accuracy: cm.accuracy(),
        per_class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(k: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
        prop::collection::vec((0..k, 0..k), 0..200)
    }

    proptest! {
        #[test]
        fn relabeling_permutes_per_class_values(
            data in pairs(5),
            perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let (a, p): (Vec<usize>, Vec<usize>) = data.iter().copied().unzip();
            let m = class_metrics(&confusion(&a, &p, 5).unwrap());
            let pa: Vec<usize> = a.iter().map(|&c| perm[c]).collect();
            let pp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
            let q = class_metrics(&confusion(&pa, &pp, 5).unwrap());
            for c in 0..5 {
                prop_assert_eq!(m.per_class[c], q.per_class[perm[c]]);
            }
            prop_assert!((m.macro_f1 - q.macro_f1).abs() < 1e-12);
        }

        #[test]
        fn rows_and_accuracy(data in pairs(4)) {
            let (a, p): (Vec<usize>, Vec<usize>) = data.iter().copied().unzip();
            let cm = confusion(&a, &p, 4).unwrap();
            for (c, row) in cm.row_normalized().iter().enumerate() {
                let s: f64 = row.iter().sum();
                let want = if cm.row_sum(c) == 0 { 0.0 } else { 1.0 };
                prop_assert!((s - want).abs() < 1e-12);
            }
            let matching = data.iter().filter(|(x, y)| x == y).count();
            let frac = if data.is_empty() { 0.0 } else { matching as f64 / data.len() as f64 };
            prop_assert_eq!(cm.accuracy(), frac);
            prop_assert_eq!(cm.total(), data.len() as u64);
        }
    }

    #[test]
    fn identity() {
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let m = class_metrics(&cm);
        assert!(m.per_class.iter().all(|c| c.precision == 1.0 && c.sensitivity == 1.0 && c.f1 == 1.0));
        assert_eq!((m.macro_f1, m.accuracy), (1.0, 1.0));
    }

    #[test]
    fn off_diagonal() {
        let cm = confusion(&[0, 0], &[1, 1], 2).unwrap();
        assert_eq!(cm.counts[0][1], 2);
        assert_eq!(cm.accuracy(), 0.0);
        assert_eq!(cm.row_normalized(), vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn hand_values() {
        // class 0: TP 40, FP 10, FN 10
        let cm = ConfusionMatrix {
            n_classes: 2,
            counts: vec![vec![40, 10], vec![10, 40]],
        };
        let m = class_metrics(&cm);
        let c = m.per_class[0];
        assert_eq!((c.tp, c.fp, c.fn_), (40, 10, 10));
        assert!((c.precision - 0.8).abs() < 1e-15);
        assert!((c.sensitivity - 0.8).abs() < 1e-15);
        assert!((c.f1 - 0.8).abs() < 1e-15);
        assert!(!c.undefined);
    }

    #[test]
    fn absent_class_is_flagged() {
        let cm = confusion(&[0, 1], &[0, 1], 3).unwrap();
        let m = class_metrics(&cm);
        let c = m.per_class[2];
        assert_eq!((c.precision, c.sensitivity, c.f1), (0.0, 0.0, 0.0));
        assert!(c.undefined);
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(
            confusion(&[0], &[0, 1], 2),
            Err(MetricsError::LengthMismatch { actual: 1, predicted: 2 })
        );
        assert_eq!(
            confusion(&[0, 3], &[0, 1], 2),
            Err(MetricsError::ClassOutOfRange { index: 3, n_classes: 2 })
        );
    }
}

use std::fmt;

use super::MetricsError;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores `>= threshold` count as positive; the first point uses +inf.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub class: usize,
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn grade(&self) -> AucGrade {
        auc_grade(self.auc)
    }
}

/// One-vs-rest ROC for `class`, sweeping its probability from the highest
/// distinct value down. Tied scores enter the curve together, so a tie group
/// contributes a diagonal segment. AUC is the trapezoidal area.
pub fn roc_auc<T: Scalar>(scores: &[Vec<T>], actual: &[usize], class: usize) -> Result<RocCurve, MetricsError> {
    if scores.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            actual: actual.len(),
            predicted: scores.len(),
        });
    }
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(scores.len());
    for (s, &a) in scores.iter().zip(actual) {
        let v = s.get(class).ok_or(MetricsError::ClassOutOfRange {
            index: class,
            n_classes: s.len(),
        })?;
        pairs.push((v.wide(), a == class));
    }
    let positives = pairs.iter().filter(|p| p.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::UndefinedAuc {
            class,
            positives,
            negatives,
        });
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let threshold = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let last = *points.last().unwrap();
        let point = RocPoint {
            threshold,
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        };
        auc += (point.fpr - last.fpr) * (point.tpr + last.tpr) / 2.0;
        points.push(point);
    }
    Ok(RocCurve { class, points, auc })
}

/// Qualitative AUC bands; lower bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AucGrade {
    Perfect,
    Excellent,
    Good,
    Medium,
    Poor,
    Failure,
    /// Below 0.5: worse than chance.
    WorseThanChance,
}

impl AucGrade {
    pub fn label(self) -> &'static str {
        match self {
            AucGrade::Perfect => "Perfect",
            AucGrade::Excellent => "Excellent",
            AucGrade::Good => "Good",
            AucGrade::Medium => "Medium",
            AucGrade::Poor => "Poor",
            AucGrade::Failure | AucGrade::WorseThanChance => "Failure",
        }
    }

    pub fn worse_than_chance(self) -> bool {
        self == AucGrade::WorseThanChance
    }
}

impl fmt::Display for AucGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn auc_grade(auc: f64) -> AucGrade {
    match auc {
        a if a >= 1.0 => AucGrade::Perfect,
        a if a >= 0.9 => AucGrade::Excellent,
        a if a >= 0.8 => AucGrade::Good,
        a if a >= 0.7 => AucGrade::Medium,
        a if a >= 0.6 => AucGrade::Poor,
        a if a >= 0.5 => AucGrade::Failure,
        _ => AucGrade::WorseThanChance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_col(scores: &[f64]) -> Vec<Vec<f64>> {
        scores.iter().map(|&s| vec![s, 1.0 - s]).collect()
    }

    /// (concordant + ties / 2) / (positives * negatives)
    fn pair_count_auc(scores: &[f64], positive: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if positive[i] && !positive[j] {
                    pairs += 1.0;
                    if si > sj {
                        num += 1.0;
                    } else if si == sj {
                        num += 0.5;
                    }
                }
            }
        }
        num / pairs
    }

    #[test]
    fn separated_scores() {
        let r = roc_auc(&one_col(&[0.9, 0.8, 0.3, 0.1]), &[0, 0, 1, 1], 0).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.grade(), AucGrade::Perfect);
        assert_eq!((r.points[0].fpr, r.points[0].tpr), (0.0, 0.0));
        let end = r.points.last().unwrap();
        assert_eq!((end.fpr, end.tpr), (1.0, 1.0));
    }

    #[test]
    fn all_tied() {
        let r = roc_auc(&one_col(&[0.5; 6]), &[0, 1, 0, 1, 1, 1], 0).unwrap();
        assert_eq!(r.points.len(), 2);
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn alternating_labels() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let r = roc_auc(&one_col(&scores), &[0, 1, 0, 1], 0).unwrap();
        let oracle = pair_count_auc(&scores, &[true, false, true, false]);
        assert_eq!(oracle, 0.75);
        assert!((r.auc - oracle).abs() < 1e-12);
    }

    #[test]
    fn undefined_without_negatives() {
        assert_eq!(
            roc_auc(&one_col(&[0.1, 0.2]), &[0, 0], 0),
            Err(MetricsError::UndefinedAuc { class: 0, positives: 2, negatives: 0 })
        );
    }

    #[test]
    fn grades() {
        assert_eq!(auc_grade(1.0), AucGrade::Perfect);
        assert_eq!(auc_grade(0.95), AucGrade::Excellent);
        assert_eq!(auc_grade(0.9), AucGrade::Excellent);
        assert_eq!(auc_grade(0.8999), AucGrade::Good);
        assert_eq!(auc_grade(0.7), AucGrade::Medium);
        assert_eq!(auc_grade(0.65), AucGrade::Poor);
        assert_eq!(auc_grade(0.55), AucGrade::Failure);
        assert_eq!(auc_grade(0.55).label(), "Failure");
        let g = auc_grade(0.3);
        assert_eq!(g.label(), "Failure");
        assert!(g.worse_than_chance());
    }

    proptest! {
        #[test]
        fn trapezoid_matches_pair_counting(
            data in prop::collection::vec((0u8..8, any::<bool>()), 2..50)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 8.0).collect();
            let positive: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(positive.iter().any(|&p| p) && positive.iter().any(|&p| !p));
            let actual: Vec<usize> = positive.iter().map(|&p| if p { 0 } else { 1 }).collect();
            let r = roc_auc(&one_col(&scores), &actual, 0).unwrap();
            prop_assert!((r.auc - pair_count_auc(&scores, &positive)).abs() < 1e-9);
            prop_assert!(r.points.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
        }
    }
}

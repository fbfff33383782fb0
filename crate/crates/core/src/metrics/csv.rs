use std::io::{self, Write};

use super::{ClassMetrics, ConfusionMatrix, RocCurve};

fn header<W: Write>(out: &mut W, names: &[&str]) -> io::Result<()> {
    write!(out, "actual\\predicted")?;
    for n in names {
        write!(out, ",{n}")?;
    }
    writeln!(out)
}

pub fn write_confusion_counts<W: Write>(mut out: W, cm: &ConfusionMatrix, names: &[&str]) -> io::Result<()> {
    header(&mut out, names)?;
    for (name, row) in names.iter().zip(&cm.counts) {
        write!(out, "{name}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_confusion_probabilities<W: Write>(mut out: W, cm: &ConfusionMatrix, names: &[&str]) -> io::Result<()> {
    header(&mut out, names)?;
    for (name, row) in names.iter().zip(cm.row_normalized()) {
        write!(out, "{name}")?;
        for v in row {
            write!(out, ",{v:.6}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One row per class plus an `average` row of macro means. `aucs` holds the
/// one-vs-rest AUC per class where it was defined.
pub fn write_class_metrics<W: Write>(
    mut out: W,
    metrics: &ClassMetrics,
    names: &[&str],
    codes: &[Vec<u8>],
    aucs: &[Option<f64>],
) -> io::Result<()> {
    writeln!(out, "class,symbol,codes,precision,sensitivity,f1,auc,grade,tp,fp,fn,undefined")?;
    for (c, m) in metrics.per_class.iter().enumerate() {
        let codes: Vec<String> = codes[c].iter().map(u8::to_string).collect();
        let (auc, grade) = match aucs[c] {
            Some(a) => (format!("{a:.6}"), super::auc_grade(a).label()),
            None => (String::new(), ""),
        };
        writeln!(
            out,
            "{c},{},{},{:.6},{:.6},{:.6},{auc},{grade},{},{},{},{}",
            names[c],
            codes.join(" "),
            m.precision,
            m.sensitivity,
            m.f1,
            m.tp,
            m.fp,
            m.fn_,
            m.undefined
        )?;
    }
    let defined: Vec<f64> = aucs.iter().flatten().copied().collect();
    let macro_auc = if defined.is_empty() {
        String::new()
    } else {
        format!("{:.6}", defined.iter().sum::<f64>() / defined.len() as f64)
    };
    writeln!(
        out,
        "average,,,{:.6},{:.6},{:.6},{macro_auc},,,,,",
        metrics.macro_precision, metrics.macro_sensitivity, metrics.macro_f1
    )
}

pub fn write_roc<W: Write>(mut out: W, roc: &RocCurve) -> io::Result<()> {
    writeln!(out, "threshold,fpr,tpr")?;
    for p in &roc.points {
        writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr)?;
    }
    Ok(())
}

/// Headline numbers of one evaluated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: String,
    pub run: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_sensitivity: f64,
    pub macro_f1: f64,
    pub macro_auc: f64,
}

impl SummaryRow {
    pub const HEADER: &'static str =
        "scheme,run,n_test,accuracy,macro_precision,macro_sensitivity,macro_f1,macro_auc";

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.scheme,
            self.run,
            self.n_test,
            self.accuracy,
            self.macro_precision,
            self.macro_sensitivity,
            self.macro_f1,
            self.macro_auc
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 8 {
            return None;
        }
        Some(SummaryRow {
            scheme: f[0].to_owned(),
            run: f[1].parse().ok()?,
            n_test: f[2].parse().ok()?,
            accuracy: f[3].parse().ok()?,
            macro_precision: f[4].parse().ok()?,
            macro_sensitivity: f[5].parse().ok()?,
            macro_f1: f[6].parse().ok()?,
            macro_auc: f[7].parse().ok()?,
        })
    }
}

pub fn write_summary<W: Write>(mut out: W, rows: &[SummaryRow]) -> io::Result<()> {
    writeln!(out, "{}", SummaryRow::HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.to_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{class_metrics, confusion, roc_auc};
    use super::*;

    #[test]
    fn csv_layouts() {
        let cm = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        let names = ["N", "V"];
        let mut buf = Vec::new();
        write_confusion_counts(&mut buf, &cm, &names).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "actual\\predicted,N,V\nN,1,1\nV,0,2\n");

        let mut buf = Vec::new();
        write_confusion_probabilities(&mut buf, &cm, &names).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("N,0.500000,0.500000\n"));

        let m = class_metrics(&cm);
        let mut buf = Vec::new();
        write_class_metrics(&mut buf, &m, &names, &[vec![1], vec![5, 10]], &[Some(0.75), None]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,N,1,1.000000,0.500000,0.666667,0.750000,Medium,1,0,1,false"));
        assert!(lines[2].starts_with("1,V,5 10,"));
        assert!(lines[3].starts_with("average,,,"));

        let roc = roc_auc(&[vec![0.9f64, 0.1], vec![0.2, 0.8]], &[0, 1], 0).unwrap();
        let mut buf = Vec::new();
        write_roc(&mut buf, &roc).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "threshold,fpr,tpr\ninf,0,0\n0.9,0,1\n0.2,1,1\n");
    }

    #[test]
    fn summary_round_trip() {
        let row = SummaryRow {
            scheme: "MITBIH5".into(),
            run: 3,
            n_test: 7404,
            accuracy: 0.9924,
            macro_precision: 0.99,
            macro_sensitivity: 0.98,
            macro_f1: 0.985,
            macro_auc: 0.9994,
        };
        assert_eq!(SummaryRow::parse(&row.to_line()), Some(row));
        assert_eq!(SummaryRow::parse(SummaryRow::HEADER), None);
    }
}

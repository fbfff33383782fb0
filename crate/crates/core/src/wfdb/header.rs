use super::{Result, WfdbError};

/// One signal line of a header.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub file_name: String,
    pub format_code: u16,
    /// ADC units per physical unit (millivolt for MIT-BIH).
    pub gain: f64,
    /// ADC value of 0 mV. Defaults to `adc_zero` when the gain field has no
    /// parenthesised baseline, which is the case for every MIT-BIH header.
    pub baseline: i32,
    pub units: String,
    pub adc_resolution: u32,
    pub adc_zero: i32,
    pub initial_value: i32,
    pub checksum: Option<i16>,
    pub block_size: u32,
    pub lead_description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sampling_frequency: f64,
    pub n_samples: usize,
    pub signals: Vec<SignalSpec>,
    pub comments: Vec<String>,
}

impl RecordHeader {
    /// Deviations from the MIT-BIH layout (two leads at 360 Hz).
    pub fn mitbih_issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.n_signals != 2 {
            issues.push(format!("{} signals, expected 2", self.n_signals));
        }
        if self.sampling_frequency != 360.0 {
            issues.push(format!("{} Hz, expected 360", self.sampling_frequency));
        }
        issues
    }
}

const DEFAULT_GAIN: f64 = 200.0;
const DEFAULT_FREQUENCY: f64 = 250.0;

fn err(line: usize, message: impl Into<String>) -> WfdbError {
    WfdbError::Header {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, what: &str, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| err(line, format!("bad {what} `{tok}`")))
}

/// Parses the text of a `.hea` file.
pub fn parse_header(bytes: &[u8]) -> Result<RecordHeader> {
    let text = std::str::from_utf8(bytes).map_err(|e| err(0, format!("not UTF-8: {e}")))?;
    let mut comments = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if let Some(c) = trimmed.strip_prefix('#') {
            comments.push(c.trim().to_owned());
        } else if !trimmed.is_empty() {
            lines.push((i + 1, trimmed));
        }
    }
    let Some(&(first, record_line)) = lines.first() else {
        return Err(err(1, "missing record line"));
    };
    let toks: Vec<&str> = record_line.split_whitespace().collect();
    if toks.len() < 2 {
        return Err(err(first, "record line needs a name and a signal count"));
    }
    let record_name = toks[0];
    if record_name.contains('/') {
        return Err(err(first, "multi-segment records are not supported"));
    }
    let n_signals: usize = num(first, "signal count", toks[1])?;
    let sampling_frequency = match toks.get(2) {
        Some(tok) => {
            let f = tok.split('/').next().unwrap_or(tok);
            let f: f64 = num(first, "sampling frequency", f)?;
            if !(f > 0.0) {
                return Err(err(first, "sampling frequency must be positive"));
            }
            f
        }
        None => DEFAULT_FREQUENCY,
    };
    let n_samples: usize = match toks.get(3) {
        Some(tok) => num(first, "sample count", tok)?,
        None => return Err(err(first, "record line lacks a sample count")),
    };
    if n_samples == 0 {
        return Err(err(first, "sample count is zero"));
    }

    let signal_lines = &lines[1..];
    if signal_lines.len() != n_signals {
        return Err(WfdbError::SignalCount {
            declared: n_signals,
            found: signal_lines.len(),
        });
    }
    let signals = signal_lines
        .iter()
        .map(|&(line, text)| parse_signal_line(line, text))
        .collect::<Result<Vec<_>>>()?;

    Ok(RecordHeader {
        record_name: record_name.to_owned(),
        n_signals,
        sampling_frequency,
        n_samples,
        signals,
        comments,
    })
}

fn parse_signal_line(line: usize, text: &str) -> Result<SignalSpec> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() < 2 {
        return Err(err(line, "signal line needs a file name and a format"));
    }
    let format_code = match toks[1].parse::<u16>() {
        Ok(212) => 212,
        _ => {
            return Err(WfdbError::UnsupportedFormat {
                line,
                format: toks[1].to_owned(),
            })
        }
    };

    let (gain, explicit_baseline, units) = match toks.get(2) {
        Some(tok) => parse_gain(line, tok)?,
        None => (DEFAULT_GAIN, None, "mV".to_owned()),
    };
    let adc_resolution = match toks.get(3) {
        Some(t) => num(line, "ADC resolution", t)?,
        None => 12,
    };
    let adc_zero = match toks.get(4) {
        Some(t) => num(line, "ADC zero", t)?,
        None => 0,
    };
    let initial_value = match toks.get(5) {
        Some(t) => num(line, "initial value", t)?,
        None => 0,
    };
    // Written signed by the C library and unsigned by some other tools.
    let checksum = match toks.get(6) {
        Some(t) => Some(num::<i64>(line, "checksum", t)? as i16),
        None => None,
    };
    let block_size = match toks.get(7) {
        Some(t) => num(line, "block size", t)?,
        None => 0,
    };
    let lead_description = toks.get(8..).map(|d| d.join(" ")).unwrap_or_default();

    Ok(SignalSpec {
        file_name: toks[0].to_owned(),
        format_code,
        gain,
        baseline: explicit_baseline.unwrap_or(adc_zero),
        units,
        adc_resolution,
        adc_zero,
        initial_value,
        checksum,
        block_size,
        lead_description,
    })
}

/// `gain[(baseline)][/units]`
fn parse_gain(line: usize, tok: &str) -> Result<(f64, Option<i32>, String)> {
    let (head, units) = match tok.split_once('/') {
        Some((h, u)) => (h, u.to_owned()),
        None => (tok, "mV".to_owned()),
    };
    let (gain, baseline) = match head.split_once('(') {
        Some((g, rest)) => {
            let b = rest
                .strip_suffix(')')
                .ok_or_else(|| err(line, format!("unclosed baseline in `{tok}`")))?;
            (g, Some(num(line, "baseline", b)?))
        }
        None => (head, None),
    };
    let gain: f64 = num(line, "gain", gain)?;
    if gain < 0.0 || !gain.is_finite() {
        return Err(err(line, format!("invalid gain `{tok}`")));
    }
    // A zero gain marks an uncalibrated signal; WFDB substitutes the default.
    let gain = if gain == 0.0 { DEFAULT_GAIN } else { gain };
    Ok((gain, baseline, units))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER_100: &str = "100 2 360 650000\n\
        100.dat 212 200 11 1024 995 -22131 0 MLII\n\
        100.dat 212 200 11 1024 1011 20052 0 V5\n\
        # 69 M 1085 1629 x1\n\
        # Aldomet, Inderal\n";

    #[test]
    fn mitbih_style_header() {
        let h = parse_header(HEADER_100.as_bytes()).unwrap();
        assert_eq!(h.record_name, "100");
        assert_eq!(h.n_signals, 2);
        assert_eq!(h.sampling_frequency, 360.0);
        assert_eq!(h.n_samples, 650000);
        assert!(h.mitbih_issues().is_empty());
        let s = &h.signals[0];
        assert_eq!(s.format_code, 212);
        assert_eq!(s.gain, 200.0);
        assert_eq!(s.adc_resolution, 11);
        assert_eq!(s.adc_zero, 1024);
        assert_eq!(s.baseline, 1024);
        assert_eq!(s.initial_value, 995);
        assert_eq!(s.checksum, Some(-22131));
        assert_eq!(s.lead_description, "MLII");
        assert_eq!(h.signals[1].checksum, Some(20052));
        assert_eq!(h.comments.len(), 2);
    }

    #[test]
    fn gain_with_baseline_and_units() {
        let text = "r 1 360 10\nr.dat 212 200.0(-5)/uV 12 0 1377 60075 0 lead II\n";
        let h = parse_header(text.as_bytes()).unwrap();
        let s = &h.signals[0];
        assert_eq!(s.baseline, -5);
        assert_eq!(s.units, "uV");
        assert_eq!(s.checksum, Some(60075u16 as i16));
        assert_eq!(s.lead_description, "lead II");
    }

    #[test]
    fn format_16_is_rejected() {
        let text = "r 1 360 10\nr.dat 16 200 12 0 0 0 0 x\n";
        match parse_header(text.as_bytes()) {
            Err(WfdbError::UnsupportedFormat { line, format }) => {
                assert_eq!(line, 2);
                assert_eq!(format, "16");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn signal_count_mismatch() {
        let text = "r 2 360 10\nr.dat 212 200 12 0 0 0 0 x\n";
        assert!(matches!(
            parse_header(text.as_bytes()),
            Err(WfdbError::SignalCount {
                declared: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let text = "# comment\nr 1 360 10\nr.dat 212 abc 12 0 0 0 0 x\n";
        match parse_header(text.as_bytes()) {
            Err(WfdbError::Header { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_header(b"r two 360 10\n"),
            Err(WfdbError::Header { line: 1, .. })
        ));
        assert!(matches!(
            parse_header(b"r/3 2 360 10\n"),
            Err(WfdbError::Header { line: 1, .. })
        ));
    }
}

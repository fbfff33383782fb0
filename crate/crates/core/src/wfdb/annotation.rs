use super::{Result, WfdbError};

/// Annotation codes that mark a beat (an annotated R peak).
pub const BEAT_CODES: [u8; 15] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 34, 38];

/// Standard WFDB mnemonic for an annotation code, `"?"` when unassigned.
pub fn code_symbol(code: u8) -> &'static str {
    const TABLE: [&str; 42] = [
        " ", "N", "L", "R", "a", "V", "F", "J", "A", "S", "E", "j", "/", "Q", "~", "?", "|", "?",
        "s", "T", "*", "D", "\"", "=", "p", "B", "^", "t", "+", "u", "?", "!", "[", "]", "e", "n",
        "@", "x", "f", "(", ")", "r",
    ];
    TABLE.get(code as usize).copied().unwrap_or("?")
}

const SKIP: u16 = 59;
const NUM: u16 = 60;
const SUB: u16 = 61;
const CHN: u16 = 62;
const AUX: u16 = 63;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationEvent {
    pub sample_index: u64,
    pub code: u8,
    pub subtype: i8,
    pub channel: u8,
    pub num: i8,
    pub aux: Option<String>,
}

impl AnnotationEvent {
    pub fn new(sample_index: u64, code: u8) -> Self {
        AnnotationEvent {
            sample_index,
            code,
            subtype: 0,
            channel: 0,
            num: 0,
            aux: None,
        }
    }

    pub fn is_beat(&self) -> bool {
        BEAT_CODES.contains(&self.code)
    }
}

fn word(bytes: &[u8], at: usize) -> Option<u16> {
    bytes.get(at..at + 2).map(|b| u16::from_le_bytes([b[0], b[1]]))
}

/// Decodes an MIT-format annotation stream.
///
/// Each 16-bit little-endian word holds a 6-bit type in its high bits and a
/// 10-bit field below. Types 1..=58 are annotations whose field is the time
/// increment; 59 (SKIP) adds the 32-bit interval that follows; 60/61/62 set
/// `num` / `subtype` / `channel` of the preceding annotation; 63 attaches an
/// aux string of the given byte length. `num` and `channel` carry over to
/// later annotations, `subtype` and `aux` do not. A zero word ends the stream.
pub fn parse_annotations(bytes: &[u8]) -> Result<Vec<AnnotationEvent>> {
    let mut events: Vec<AnnotationEvent> = Vec::new();
    let mut time: i64 = 0;
    let mut last_time: i64 = 0;
    let mut num: i8 = 0;
    let mut channel: u8 = 0;
    let mut pos = 0usize;

    loop {
        let offset = pos;
        let w = word(bytes, pos).ok_or(WfdbError::MissingTerminator { offset })?;
        pos += 2;
        let (kind, field) = (w >> 10, w & 0x03FF);
        match kind {
            0 if field == 0 => break,
            SKIP => {
                let (hi, lo) = match (word(bytes, pos), word(bytes, pos + 2)) {
                    (Some(hi), Some(lo)) => (hi, lo),
                    _ => return Err(WfdbError::MissingTerminator { offset: pos }),
                };
                pos += 4;
                time += (((hi as u32) << 16) | lo as u32) as i32 as i64;
            }
            NUM => {
                num = field as u8 as i8;
                if let Some(e) = events.last_mut() {
                    e.num = num;
                }
            }
            SUB => {
                if let Some(e) = events.last_mut() {
                    e.subtype = field as u8 as i8;
                }
            }
            CHN => {
                channel = field as u8;
                if let Some(e) = events.last_mut() {
                    e.channel = channel;
                }
            }
            AUX => {
                let len = field as usize;
                let padded = len + (len & 1);
                let available = bytes.len() - pos;
                if padded > available {
                    return Err(WfdbError::AuxOverrun {
                        offset,
                        needed: padded,
                        available,
                    });
                }
                let text = String::from_utf8_lossy(&bytes[pos..pos + len]).into_owned();
                pos += padded;
                if let Some(e) = events.last_mut() {
                    e.aux = Some(text);
                }
            }
            code => {
                time += field as i64;
                if time < 0 {
                    return Err(WfdbError::NegativeTime { offset, time });
                }
                if time < last_time {
                    return Err(WfdbError::NonMonotonic {
                        offset,
                        time,
                        previous: last_time,
                    });
                }
                last_time = time;
                events.push(AnnotationEvent {
                    sample_index: time as u64,
                    code: code as u8,
                    subtype: 0,
                    channel,
                    num,
                    aux: None,
                });
            }
        }
    }
    Ok(events)
}

/// Encodes annotations in MIT format. Used to build fixtures.
///
/// Events must be sorted by `sample_index` and have codes in `1..=58`.
pub fn encode_annotations(events: &[AnnotationEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    let put = |w: u16, out: &mut Vec<u8>| out.extend_from_slice(&w.to_le_bytes());
    let mut prev = 0u64;
    let mut num: i8 = 0;
    let mut channel: u8 = 0;
    for e in events {
        let delta = e.sample_index - prev;
        prev = e.sample_index;
        if delta > 0x03FF {
            put(SKIP << 10, &mut out);
            put((delta >> 16) as u16, &mut out);
            put(delta as u16, &mut out);
            put((e.code as u16) << 10, &mut out);
        } else {
            put(((e.code as u16) << 10) | delta as u16, &mut out);
        }
        if e.num != num {
            num = e.num;
            put((NUM << 10) | (num as u8 as u16), &mut out);
        }
        if e.subtype != 0 {
            put((SUB << 10) | (e.subtype as u8 as u16), &mut out);
        }
        if e.channel != channel {
            channel = e.channel;
            put((CHN << 10) | channel as u16, &mut out);
        }
        if let Some(aux) = &e.aux {
            let b = aux.as_bytes();
            put((AUX << 10) | b.len() as u16, &mut out);
            out.extend_from_slice(b);
            if b.len() % 2 == 1 {
                out.push(0);
            }
        }
    }
    put(0, &mut out);
    out
}

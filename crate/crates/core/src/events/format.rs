// SPDX-License-Identifier: Apache-2.0

//! On-disk event formats.
//!
//! CSV: one event per line, `t_us,x,y,polarity`, ASCII decimal, LF-terminated,
//! no header. The sensor size is not stored and must be supplied.
//!
//! EVT1 (little-endian):
//!
//! ```text
//! 0   8  magic "EVT1\0\0\0\0"
//! 8   2  sensor_w  u16
//! 10  2  sensor_h  u16
//! 12  4  count     u32
//! 16  .. count records of 14 bytes: t_us u64, x u16, y u16, polarity u8, pad u8 (0)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_event, Event, EventStream};
use crate::error::{Error, Result};

pub const EVT1_MAGIC: [u8; 8] = *b"EVT1\0\0\0\0";
const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Csv,
    Evt1,
}

impl EventFormat {
    /// Guesses from the file extension, then from the leading bytes.
    pub fn detect(path: &Path, head: &[u8]) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("txt") => EventFormat::Csv,
            Some("evt1") | Some("bin") => EventFormat::Evt1,
            _ if head.starts_with(&EVT1_MAGIC[..4]) => EventFormat::Evt1,
            _ => EventFormat::Csv,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            EventFormat::Csv => "csv",
            EventFormat::Evt1 => "evt1",
        }
    }
}

impl std::str::FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EventFormat::Csv),
            "evt1" => Ok(EventFormat::Evt1),
            other => Err(Error::Config(format!("unknown event format '{other}' (expected csv or evt1)"))),
        }
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str, record: usize) -> Result<T> {
    let raw = field.ok_or_else(|| Error::Parse {
        record,
        message: format!("missing field '{name}'"),
    })?;
    if raw.is_empty() || !raw.bytes().all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse {
            record,
            message: format!("field '{name}' is not a decimal integer: {raw:?}"),
        });
    }
    raw.parse().map_err(|_| Error::Parse {
        record,
        message: format!("field '{name}' out of range: {raw}"),
    })
}

/// Parses CSV events against a `sensor_w x sensor_h` sensor.
pub fn read_csv(bytes: &[u8], sensor_w: u16, sensor_h: u16) -> Result<EventStream> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        record: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut events = Vec::new();
    if body.is_empty() {
        return Ok(EventStream::new(sensor_w, sensor_h));
    }
    let mut prev = 0;
    for (record, line) in body.split('\n').enumerate() {
        let mut fields = line.split(',');
        let t: u64 = parse_field(fields.next(), "t_us", record)?;
        let x: u64 = parse_field(fields.next(), "x", record)?;
        let y: u64 = parse_field(fields.next(), "y", record)?;
        let polarity: u8 = parse_field(fields.next(), "polarity", record)?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                record,
                message: "more than four fields".into(),
            });
        }
        if x >= u64::from(sensor_w) || y >= u64::from(sensor_h) {
            return Err(Error::OutOfBounds {
                record,
                x,
                y,
                width: sensor_w,
                height: sensor_h,
            });
        }
        let event = Event {
            t,
            x: x as u16,
            y: y as u16,
            polarity,
        };
        check_event(record, &event, sensor_w, sensor_h, prev)?;
        prev = t;
        events.push(event);
    }
    Ok(EventStream {
        sensor_w,
        sensor_h,
        events,
    })
}

pub fn write_csv(stream: &EventStream, out: &mut impl Write) -> std::io::Result<()> {
    let mut buf = String::with_capacity(stream.len() * 20);
    for e in &stream.events {
        use std::fmt::Write as _;
        let _ = writeln!(buf, "{},{},{},{}", e.t, e.x, e.y, e.polarity);
    }
    out.write_all(buf.as_bytes())
}

pub fn read_evt1(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse {
            record: 0,
            message: format!("EVT1 header needs {HEADER_LEN} bytes, got {}", bytes.len()),
        });
    }
    if bytes[..8] != EVT1_MAGIC {
        return Err(Error::Parse {
            record: 0,
            message: "bad EVT1 magic".into(),
        });
    }
    let sensor_w = u16::from_le_bytes([bytes[8], bytes[9]]);
    let sensor_h = u16::from_le_bytes([bytes[10], bytes[11]]);
    let count = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * RECORD_LEN {
        let complete = body.len() / RECORD_LEN;
        return Err(Error::Parse {
            record: complete.min(count),
            message: format!(
                "header declares {count} records ({} bytes), body has {} bytes",
                count * RECORD_LEN,
                body.len()
            ),
        });
    }
    let mut events = Vec::with_capacity(count);
    let mut prev = 0;
    for (record, r) in body.chunks_exact(RECORD_LEN).enumerate() {
        let event = Event {
            t: u64::from_le_bytes(r[0..8].try_into().expect("8 bytes")),
            x: u16::from_le_bytes([r[8], r[9]]),
            y: u16::from_le_bytes([r[10], r[11]]),
            polarity: r[12],
        };
        if r[13] != 0 {
            return Err(Error::Parse {
                record,
                message: format!("non-zero pad byte {}", r[13]),
            });
        }
        check_event(record, &event, sensor_w, sensor_h, prev)?;
        prev = event.t;
        events.push(event);
    }
    Ok(EventStream {
        sensor_w,
        sensor_h,
        events,
    })
}

pub fn write_evt1(stream: &EventStream, out: &mut impl Write) -> std::io::Result<()> {
    let count = u32::try_from(stream.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "more than u32::MAX events"))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + stream.len() * RECORD_LEN);
    buf.extend_from_slice(&EVT1_MAGIC);
    buf.extend_from_slice(&stream.sensor_w.to_le_bytes());
    buf.extend_from_slice(&stream.sensor_h.to_le_bytes());
    buf.extend_from_slice(&count.to_le_bytes());
    for e in &stream.events {
        buf.extend_from_slice(&e.t.to_le_bytes());
        buf.extend_from_slice(&e.x.to_le_bytes());
        buf.extend_from_slice(&e.y.to_le_bytes());
        buf.push(e.polarity);
        buf.push(0);
    }
    out.write_all(&buf)
}

/// Parses `bytes` in `format`. `sensor` is used for CSV only; EVT1 carries it.
pub fn parse_events(bytes: &[u8], format: EventFormat, sensor: (u16, u16)) -> Result<EventStream> {
    match format {
        EventFormat::Csv => read_csv(bytes, sensor.0, sensor.1),
        EventFormat::Evt1 => read_evt1(bytes),
    }
}

pub fn parse_events_file(path: &Path, format: Option<EventFormat>, sensor: (u16, u16)) -> Result<EventStream> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = format.unwrap_or_else(|| EventFormat::detect(path, &bytes));
    parse_events(&bytes, format, sensor)
}

pub fn write_events_file(path: &Path, stream: &EventStream, format: EventFormat) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    match format {
        EventFormat::Csv => write_csv(stream, &mut file),
        EventFormat::Evt1 => write_evt1(stream, &mut file),
    }
    .and_then(|_| file.flush())
    .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_csv_record() {
        let s = read_csv(b"1000,5,7,1\n", 128, 128).unwrap();
        assert_eq!(s.events, vec![Event { t: 1000, x: 5, y: 7, polarity: 1 }]);
    }

    #[test]
    fn empty_inputs() {
        assert!(read_csv(b"", 128, 128).unwrap().is_empty());
        let mut buf = Vec::new();
        write_evt1(&EventStream::new(128, 128), &mut buf).unwrap();
        assert_eq!(buf.len(), 16);
        assert!(read_evt1(&buf).unwrap().is_empty());
    }

    #[test]
    fn csv_bounds_and_order() {
        assert!(matches!(
            read_csv(b"0,128,0,1\n", 128, 128),
            Err(Error::OutOfBounds { record: 0, x: 128, .. })
        ));
        assert!(matches!(
            read_csv(b"5,0,0,1\n4,0,0,1\n", 128, 128),
            Err(Error::Order { record: 1, prev: 5, t: 4 })
        ));
        assert!(matches!(read_csv(b"1,2,3\n", 128, 128), Err(Error::Parse { record: 0, .. })));
        assert!(matches!(read_csv(b"1,2,3,1\n1,2,x,0\n", 128, 128), Err(Error::Parse { record: 1, .. })));
        assert!(matches!(read_csv(b"1,2,3,2\n", 128, 128), Err(Error::Parse { .. })));
        assert!(matches!(read_csv(b"1,2,3,1,0\n", 128, 128), Err(Error::Parse { .. })));
        assert!(matches!(read_csv(b"-1,2,3,1\n", 128, 128), Err(Error::Parse { .. })));
    }

    #[test]
    fn evt1_layout_is_bit_exact() {
        let event = Event { t: 0x0102030405060708, x: 127, y: 12, polarity: 1 };
        let s = EventStream::from_events(128, 64, vec![event]).unwrap();
        let mut buf = Vec::new();
        write_evt1(&s, &mut buf).unwrap();
        let expected: Vec<u8> = [
            &b"EVT1\0\0\0\0"[..],
            &[128, 0, 64, 0, 1, 0, 0, 0],
            &[8, 7, 6, 5, 4, 3, 2, 1, 127, 0, 12, 0, 1, 0],
        ]
        .concat();
        assert_eq!(buf, expected);
    }

    #[test]
    fn evt1_rejects_corruption() {
        let s = EventStream::from_events(4, 4, vec![Event { t: 1, x: 1, y: 2, polarity: 0 }]).unwrap();
        let mut buf = Vec::new();
        write_evt1(&s, &mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(read_evt1(&bad_magic).is_err());

        assert!(matches!(read_evt1(&buf[..buf.len() - 1]), Err(Error::Parse { .. })));

        let mut oob = buf.clone();
        oob[16 + 8] = 4;
        assert!(matches!(read_evt1(&oob), Err(Error::OutOfBounds { record: 0, .. })));

        let mut pad = buf.clone();
        pad[16 + 13] = 1;
        assert!(matches!(read_evt1(&pad), Err(Error::Parse { .. })));
    }

    #[test]
    fn detect_by_extension_and_magic() {
        assert_eq!(EventFormat::detect(Path::new("a.csv"), b"EVT1"), EventFormat::Csv);
        assert_eq!(EventFormat::detect(Path::new("a.evt1"), b""), EventFormat::Evt1);
        assert_eq!(EventFormat::detect(Path::new("a.dat"), b"EVT1\0\0\0\0"), EventFormat::Evt1);
        assert_eq!(EventFormat::detect(Path::new("a.dat"), b"1,2,3,0"), EventFormat::Csv);
    }
}

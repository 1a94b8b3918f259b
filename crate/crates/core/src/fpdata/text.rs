//! Minutiae text format.
//!
//! ```text
//! # comment lines start with '#', blank lines are skipped
//! <subject_id> <impression_id> <width> <height>
//! <x> <y> <theta_degrees>
//! ...
//! ```
//!
//! Angles are stored in degrees in [0, 360) with six decimal digits and held
//! in radians in memory. Fields are separated by ASCII whitespace.

use thiserror::Error;

use super::{Minutia, MinutiaeRecord, RecordError};

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("no header line found")]
    MissingHeader,
    #[error("line {line}: expected {expected}, got {got} fields")]
    FieldCount {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: cannot parse {what} from {token:?}")]
    BadField {
        line: usize,
        what: &'static str,
        token: String,
    },
    #[error("line {line}: angle {value} outside [0, 360)")]
    AngleOutOfRange { line: usize, value: f64 },
    #[error("line {line}: {source}")]
    Record { line: usize, source: RecordError },
    #[error("no minutiae lines after the header")]
    NoMinutiae,
}

pub fn parse_minutiae(input: &str) -> Result<MinutiaeRecord, TextError> {
    let mut header: Option<(usize, String, String, u32, u32)> = None;
    let mut minutiae: Vec<Minutia> = Vec::new();
    let mut last_line = 0usize;

    for (idx, raw) in input.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if header.is_none() {
            if fields.len() != 4 {
                return Err(TextError::FieldCount {
                    line,
                    expected: 4,
                    got: fields.len(),
                });
            }
            let width = parse_u32(line, "width", fields[2])?;
            let height = parse_u32(line, "height", fields[3])?;
            header = Some((
                line,
                fields[0].to_string(),
                fields[1].to_string(),
                width,
                height,
            ));
            continue;
        }
        if fields.len() != 3 {
            return Err(TextError::FieldCount {
                line,
                expected: 3,
                got: fields.len(),
            });
        }
        let x = parse_u32(line, "x", fields[0])?;
        let y = parse_u32(line, "y", fields[1])?;
        let deg: f64 = fields[2]
            .parse()
            .ok()
            .filter(|d: &f64| d.is_finite())
            .ok_or_else(|| TextError::BadField {
                line,
                what: "angle",
                token: fields[2].into(),
            })?;
        if !(0.0..360.0).contains(&deg) {
            return Err(TextError::AngleOutOfRange { line, value: deg });
        }
        minutiae.push(
            Minutia::new(x, y, deg.to_radians())
                .map_err(|source| TextError::Record { line, source })?,
        );
        last_line = line;
    }

    let (hline, subject, impression, width, height) = header.ok_or(TextError::MissingHeader)?;
    if minutiae.is_empty() {
        return Err(TextError::NoMinutiae);
    }
    MinutiaeRecord::new(subject, impression, width, height, minutiae).map_err(|source| {
        TextError::Record {
            line: last_line.max(hline),
            source,
        }
    })
}

fn parse_u32(line: usize, what: &'static str, token: &str) -> Result<u32, TextError> {
    token.parse().map_err(|_| TextError::BadField {
        line,
        what,
        token: token.into(),
    })
}

pub fn write_minutiae(record: &MinutiaeRecord) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} {} {} {}\n",
        record.subject_id, record.impression_id, record.width, record.height
    ));
    for m in record.minutiae() {
        let mut deg = m.theta().to_degrees();
        // an angle within rounding distance of 2pi must not print as 360
        if (deg * 1e6).round() >= 360e6 {
            deg = 0.0;
        }
        out.push_str(&format!("{} {} {:.6}\n", m.x, m.y, deg));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn parses_header_and_lines() {
        let input =
            "# capture 3 of subject 7\nS07 I03 300 300\n120 85 270.000000\n40 222 13.500000\n";
        let rec = parse_minutiae(input).unwrap();
        assert_eq!(rec.subject_id, "S07");
        assert_eq!(rec.impression_id, "I03");
        assert_eq!((rec.width, rec.height), (300, 300));
        assert_eq!(rec.len(), 2);
        let m = rec.minutiae()[0];
        assert_eq!((m.x, m.y), (120, 85));
        assert!((m.theta() - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_angle_at_360() {
        let input = "S I 10 10\n1 2 360.0\n";
        assert_eq!(
            parse_minutiae(input).unwrap_err(),
            TextError::AngleOutOfRange {
                line: 2,
                value: 360.0
            }
        );
    }

    #[test]
    fn rejects_negative_angle_and_bad_tokens() {
        assert!(matches!(
            parse_minutiae("S I 10 10\n1 2 -1.0\n").unwrap_err(),
            TextError::AngleOutOfRange { .. }
        ));
        assert!(matches!(
            parse_minutiae("S I 10 10\n1 two 3.0\n").unwrap_err(),
            TextError::BadField { what: "y", .. }
        ));
        // u32 parse also rejects negatives and fractions for coordinates
        assert!(matches!(
            parse_minutiae("S I 10 10\n-1 2 3.0\n").unwrap_err(),
            TextError::BadField { what: "x", .. }
        ));
    }

    #[test]
    fn rejects_duplicate_and_out_of_bounds() {
        assert!(matches!(
            parse_minutiae("S I 10 10\n1 2 3.0\n1 2 9.0\n").unwrap_err(),
            TextError::Record {
                source: RecordError::DuplicatePosition { .. },
                ..
            }
        ));
        assert!(matches!(
            parse_minutiae("S I 10 10\n10 2 3.0\n").unwrap_err(),
            TextError::Record {
                source: RecordError::OutOfBounds { .. },
                ..
            }
        ));
    }

    #[test]
    fn rejects_empty_inputs() {
        assert_eq!(parse_minutiae("").unwrap_err(), TextError::MissingHeader);
        assert_eq!(
            parse_minutiae("# only a comment\n").unwrap_err(),
            TextError::MissingHeader
        );
        assert_eq!(
            parse_minutiae("S I 10 10\n").unwrap_err(),
            TextError::NoMinutiae
        );
    }

    #[test]
    fn writes_six_decimal_degrees() {
        let rec =
            MinutiaeRecord::new("a", "b", 100, 100, vec![Minutia::new(5, 6, PI).unwrap()]).unwrap();
        assert_eq!(write_minutiae(&rec), "a b 100 100\n5 6 180.000000\n");
    }

    #[test]
    fn round_trip_is_exact() {
        let input = "S7 i2 640 480\n12 34 359.999999\n600 479 0.000000\n33 44 13.731254\n";
        let rec = parse_minutiae(input).unwrap();
        let written = write_minutiae(&rec);
        assert_eq!(written, input);
        assert_eq!(parse_minutiae(&written).unwrap(), rec);
    }
}

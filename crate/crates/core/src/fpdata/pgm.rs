//! PGM skeleton images, plain (P2) and binary (P5), maxval up to 255.
//!
//! Any sample value above 127 is ridge. Header comments (`#` to end of line)
//! are allowed anywhere whitespace is.

use thiserror::Error;

use super::{RecordError, SkeletonImage};

#[derive(Debug, Error, PartialEq)]
pub enum PgmError {
    #[error("not a PGM file (magic {found:?})")]
    BadMagic { found: String },
    #[error("maxval {maxval} unsupported (only single-byte samples, maxval <= 255)")]
    UnsupportedMaxval { maxval: u32 },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("sample value {value} exceeds maxval {maxval}")]
    SampleOutOfRange { value: u32, maxval: u32 },
    #[error("payload truncated: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("image is {got_w}x{got_h} but the record says {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Parses a P2 or P5 skeleton. When `expected` dimensions are given (usually
/// from the sibling minutiae record) a mismatch is an error.
pub fn parse_skeleton(
    bytes: &[u8],
    expected: Option<(u32, u32)>,
) -> Result<SkeletonImage, PgmError> {
    let mut cursor = 0usize;
    let magic = read_token(bytes, &mut cursor).ok_or_else(|| PgmError::BadMagic {
        found: String::new(),
    })?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => {
            return Err(PgmError::BadMagic {
                found: other.to_string(),
            })
        }
    };

    let width = read_header_u32(bytes, &mut cursor, "width")?;
    let height = read_header_u32(bytes, &mut cursor, "height")?;
    let maxval = read_header_u32(bytes, &mut cursor, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::UnsupportedMaxval { maxval });
    }
    if let Some((want_w, want_h)) = expected {
        if (width, height) != (want_w, want_h) {
            return Err(PgmError::DimensionMismatch {
                got_w: width,
                got_h: height,
                want_w,
                want_h,
            });
        }
    }

    let expected_len = (width as usize) * (height as usize);
    let samples: Vec<u8> = if binary {
        // exactly one whitespace byte separates the header from the payload
        if cursor >= bytes.len() {
            return Err(PgmError::Truncated {
                expected: expected_len,
                found: 0,
            });
        }
        cursor += 1;
        let payload = &bytes[cursor.min(bytes.len())..];
        if payload.len() < expected_len {
            return Err(PgmError::Truncated {
                expected: expected_len,
                found: payload.len(),
            });
        }
        payload[..expected_len].to_vec()
    } else {
        let mut out = Vec::with_capacity(expected_len);
        while out.len() < expected_len {
            match read_token(bytes, &mut cursor) {
                Some(tok) => {
                    let v: u32 = tok
                        .parse()
                        .map_err(|_| PgmError::BadHeader(format!("bad sample {tok:?}")))?;
                    if v > maxval {
                        return Err(PgmError::SampleOutOfRange { value: v, maxval });
                    }
                    out.push(v as u8);
                }
                None => {
                    return Err(PgmError::Truncated {
                        expected: expected_len,
                        found: out.len(),
                    })
                }
            }
        }
        out
    };

    for &s in &samples {
        if u32::from(s) > maxval {
            return Err(PgmError::SampleOutOfRange {
                value: s.into(),
                maxval,
            });
        }
    }
    let pixels = samples.into_iter().map(|s| u8::from(s > 127)).collect();
    Ok(SkeletonImage::from_pixels(width, height, pixels)?)
}

/// Serializes as binary P5, ridge = 255, background = 0.
pub fn write_skeleton(skeleton: &SkeletonImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", skeleton.width(), skeleton.height()).into_bytes();
    for y in 0..skeleton.height() {
        for x in 0..skeleton.width() {
            out.push(if skeleton.is_ridge(x.into(), y.into()) {
                255
            } else {
                0
            });
        }
    }
    out
}

/// Reads the next whitespace-delimited token, skipping '#' comments.
fn read_token(bytes: &[u8], cursor: &mut usize) -> Option<String> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    if *cursor >= bytes.len() {
        return None;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    Some(String::from_utf8_lossy(&bytes[start..*cursor]).into_owned())
}

fn read_header_u32(bytes: &[u8], cursor: &mut usize, what: &str) -> Result<u32, PgmError> {
    let tok =
        read_token(bytes, cursor).ok_or_else(|| PgmError::BadHeader(format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| PgmError::BadHeader(format!("bad {what} {tok:?}")))
}

//! Fingerprint data model and on-disk formats.
//!
//! A record is a minutiae list tagged with subject/impression identifiers and
//! image dimensions; a skeleton is the thinned binary ridge map the features
//! are read from. File formats are documented in docs/formats.md.

mod dataset;
mod pgm;
mod text;

pub use dataset::{load_dataset, write_dataset, DatasetError};
pub use pgm::{parse_skeleton, write_skeleton, PgmError};
pub use text::{parse_minutiae, write_minutiae, TextError};

use thiserror::Error;

use crate::angle::normalize_tau;

/// One minutia: integer pixel position plus orientation in radians [0, 2pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minutia {
    pub x: u32,
    pub y: u32,
    theta: f64,
}

impl Minutia {
    /// `theta` is normalized into [0, 2pi); non-finite angles are rejected.
    pub fn new(x: u32, y: u32, theta: f64) -> Result<Self, RecordError> {
        if !theta.is_finite() {
            return Err(RecordError::NonFiniteAngle { x, y });
        }
        Ok(Self {
            x,
            y,
            theta: normalize_tau(theta),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x as f64, self.y as f64)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("minutia at ({x}, {y}) has a non-finite angle")]
    NonFiniteAngle { x: u32, y: u32 },
    #[error("record holds no minutiae")]
    Empty,
    #[error("minutia at ({x}, {y}) lies outside the {width}x{height} image")]
    OutOfBounds {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
    #[error("two minutiae share the position ({x}, {y})")]
    DuplicatePosition { x: u32, y: u32 },
    #[error("image dimensions {width}x{height} are degenerate")]
    BadDimensions { width: u32, height: u32 },
}

/// A minutiae set for one captured impression.
///
/// Invariants held by construction: at least one minutia, all inside the
/// stated image bounds, no two at the same pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MinutiaeRecord {
    pub subject_id: String,
    pub impression_id: String,
    pub width: u32,
    pub height: u32,
    minutiae: Vec<Minutia>,
}

impl MinutiaeRecord {
    pub fn new(
        subject_id: impl Into<String>,
        impression_id: impl Into<String>,
        width: u32,
        height: u32,
        minutiae: Vec<Minutia>,
    ) -> Result<Self, RecordError> {
        if width == 0 || height == 0 {
            return Err(RecordError::BadDimensions { width, height });
        }
        if minutiae.is_empty() {
            return Err(RecordError::Empty);
        }
        for m in &minutiae {
            if m.x >= width || m.y >= height {
                return Err(RecordError::OutOfBounds {
                    x: m.x,
                    y: m.y,
                    width,
                    height,
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for m in &minutiae {
            if !seen.insert((m.x, m.y)) {
                return Err(RecordError::DuplicatePosition { x: m.x, y: m.y });
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            impression_id: impression_id.into(),
            width,
            height,
            minutiae,
        })
    }

    pub fn minutiae(&self) -> &[Minutia] {
        &self.minutiae
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }
}

/// Thinned binary ridge image. Pixel value 1 marks ridge.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl SkeletonImage {
    /// `pixels` is row-major, any nonzero byte counts as ridge.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RecordError> {
        if width == 0 || height == 0 {
            return Err(RecordError::BadDimensions { width, height });
        }
        assert_eq!(
            pixels.len(),
            (width as usize) * (height as usize),
            "pixel buffer size"
        );
        let pixels = pixels.into_iter().map(|p| u8::from(p != 0)).collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn blank(width: u32, height: u32) -> Result<Self, RecordError> {
        Self::from_pixels(width, height, vec![0; (width as usize) * (height as usize)])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Out-of-bounds coordinates read as background.
    pub fn is_ridge(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.pixels[(y as usize) * (self.width as usize) + (x as usize)] != 0
    }

    pub fn set_ridge(&mut self, x: u32, y: u32) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.pixels[(y as usize) * (self.width as usize) + (x as usize)] = 1;
    }

    pub fn ridge_pixel_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }
}

/// One impression on disk: minutiae record plus, when present, its skeleton.
#[derive(Debug, Clone)]
pub struct DatasetEntry {
    pub record: MinutiaeRecord,
    pub skeleton: Option<SkeletonImage>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn minutia_normalizes_theta() {
        let m = Minutia::new(3, 4, TAU + 0.5).unwrap();
        assert!((m.theta() - 0.5).abs() < 1e-12);
        assert!(Minutia::new(0, 0, f64::NAN).is_err());
    }

    #[test]
    fn record_rejects_violations() {
        let m = |x, y| Minutia::new(x, y, 0.0).unwrap();
        assert_eq!(
            MinutiaeRecord::new("s", "i", 10, 10, vec![]).unwrap_err(),
            RecordError::Empty
        );
        assert!(matches!(
            MinutiaeRecord::new("s", "i", 10, 10, vec![m(10, 3)]).unwrap_err(),
            RecordError::OutOfBounds { .. }
        ));
        assert!(matches!(
            MinutiaeRecord::new("s", "i", 10, 10, vec![m(1, 2), m(1, 2)]).unwrap_err(),
            RecordError::DuplicatePosition { x: 1, y: 2 }
        ));
        assert!(MinutiaeRecord::new("s", "i", 10, 10, vec![m(1, 2), m(2, 1)]).is_ok());
    }

    #[test]
    fn skeleton_reads_out_of_bounds_as_background() {
        let mut sk = SkeletonImage::blank(4, 3).unwrap();
        sk.set_ridge(2, 1);
        assert!(sk.is_ridge(2, 1));
        assert!(!sk.is_ridge(-1, 0));
        assert!(!sk.is_ridge(4, 0));
        assert!(!sk.is_ridge(0, 3));
        assert_eq!(sk.ridge_pixel_count(), 1);
    }
}

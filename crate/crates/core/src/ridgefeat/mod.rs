//! Per-sector ridge features and the feature matrix.
//!
//! For every minutia, each of its sector neighbors contributes one feature
//! pair: the number of ridges crossed on the way to the neighbor, and the
//! mean of the crossing tangents measured relative to the connecting segment.
//! Sectors without a neighbor, or whose segment crosses nothing, carry the
//! exact sentinel (0, 0); matching skips sentinel pairs.

mod crossings;

pub use crossings::{
    crossing_tangent, find_ridge_crossings, supercover_cells, CrossingError, RidgeCrossing,
    TANGENT_WINDOW,
};

use thiserror::Error;

use crate::angle::wrap_pi;
use crate::fpdata::{Minutia, MinutiaeRecord, SkeletonImage};
use crate::par;
use crate::sectoring::{build_neighbor_structure, SectorConfig};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Crossing(#[from] CrossingError),
    #[error("skeleton is {skel_w}x{skel_h} but the record says {rec_w}x{rec_h}")]
    DimensionMismatch {
        skel_w: u32,
        skel_h: u32,
        rec_w: u32,
        rec_h: u32,
    },
    #[error("{len} scalars do not form rows of {per_row} (sector count {sectors})")]
    BadScalarCount {
        len: usize,
        per_row: usize,
        sectors: usize,
    },
}

/// One (ridge count, mean relative orientation) pair. The all-zero value is
/// the reserved sentinel for "nothing here".
///
/// `ridge_count` is a float because a template decoded with the wrong key
/// yields arbitrary reals in count slots; pipeline-produced counts are whole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorFeature {
    pub ridge_count: f64,
    pub mean_orientation: f64,
}

impl SectorFeature {
    pub const ABSENT: Self = Self {
        ridge_count: 0.0,
        mean_orientation: 0.0,
    };

    pub fn is_absent(&self) -> bool {
        self.ridge_count == 0.0 && self.mean_orientation == 0.0
    }
}

/// Cluster-centered mean of undirected angle differences (period pi).
///
/// A plain arithmetic mean of wrapped values is unstable when the inputs
/// straddle the +-pi/2 seam, which is exactly where ridge tangents sit for a
/// radial segment. The doubled-angle resultant picks a provisional center m;
/// averaging the deviations around m is then seam-free. For inputs that do
/// not straddle the seam this equals the plain mean.
pub fn mean_relative_orientation(diffs: &[f64]) -> f64 {
    assert!(!diffs.is_empty(), "mean of no angles");
    let (s, c) = diffs.iter().fold((0.0, 0.0), |(s, c), &d| {
        (s + (2.0 * d).sin(), c + (2.0 * d).cos())
    });
    let m = 0.5 * s.atan2(c);
    let adj = diffs.iter().map(|&d| wrap_pi(d - m)).sum::<f64>() / diffs.len() as f64;
    wrap_pi(m + adj)
}

/// Feature for one (reference minutia, sector neighbor) pair.
pub fn sector_feature(
    skeleton: &SkeletonImage,
    reference: &Minutia,
    neighbor: &Minutia,
) -> Result<SectorFeature, CrossingError> {
    let segment_dir =
        (neighbor.y as f64 - reference.y as f64).atan2(neighbor.x as f64 - reference.x as f64);
    let crossings = find_ridge_crossings(
        skeleton,
        (reference.x, reference.y),
        (neighbor.x, neighbor.y),
    )?;
    if crossings.is_empty() {
        return Ok(SectorFeature::ABSENT);
    }
    let diffs: Vec<f64> = crossings
        .iter()
        .map(|c| wrap_pi(c.tangent - segment_dir))
        .collect();
    Ok(SectorFeature {
        ridge_count: crossings.len() as f64,
        mean_orientation: mean_relative_orientation(&diffs),
    })
}

/// n x s grid of sector features, one row per minutia.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    sectors: usize,
    rows: Vec<Vec<SectorFeature>>,
}

impl FeatureMatrix {
    pub fn new(sectors: usize, rows: Vec<Vec<SectorFeature>>) -> Self {
        assert!(!rows.is_empty(), "feature matrix needs at least one row");
        assert!(
            rows.iter().all(|r| r.len() == sectors),
            "ragged feature rows"
        );
        Self { sectors, rows }
    }

    pub fn sector_count(&self) -> usize {
        self.sectors
    }

    pub fn minutia_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<SectorFeature>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[SectorFeature] {
        &self.rows[i]
    }

    /// Total scalar count n * 2s, the protected template side length.
    pub fn scalar_len(&self) -> usize {
        self.rows.len() * 2 * self.sectors
    }

    /// True when every cell is the sentinel (e.g. a single-minutia record).
    pub fn is_degenerate(&self) -> bool {
        self.rows.iter().flatten().all(SectorFeature::is_absent)
    }

    /// Row-major interleaved [count_1, orient_1, ..., count_s, orient_s].
    pub fn to_scalars(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.scalar_len());
        for row in &self.rows {
            for f in row {
                out.push(f.ridge_count);
                out.push(f.mean_orientation);
            }
        }
        out
    }

    /// Inverse of [`to_scalars`]; bit-exact.
    pub fn from_scalars(scalars: &[f64], sectors: usize) -> Result<Self, FeatureError> {
        let per_row = 2 * sectors;
        if sectors == 0 || scalars.is_empty() || !scalars.len().is_multiple_of(per_row) {
            return Err(FeatureError::BadScalarCount {
                len: scalars.len(),
                per_row,
                sectors,
            });
        }
        let rows = scalars
            .chunks_exact(per_row)
            .map(|chunk| {
                chunk
                    .chunks_exact(2)
                    .map(|p| SectorFeature {
                        ridge_count: p[0],
                        mean_orientation: p[1],
                    })
                    .collect()
            })
            .collect();
        Ok(Self { sectors, rows })
    }

    /// One line per minutia, `count,orient` pairs, full float precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let line: Vec<String> = row
                .iter()
                .map(|f| format!("{},{}", f.ridge_count, f.mean_orientation))
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Extracts the full feature matrix for a record. Minutiae are processed in
/// parallel when the `parallel` feature is on.
pub fn build_feature_matrix(
    record: &MinutiaeRecord,
    skeleton: &SkeletonImage,
    config: &SectorConfig,
) -> Result<FeatureMatrix, FeatureError> {
    if (skeleton.width(), skeleton.height()) != (record.width, record.height) {
        return Err(FeatureError::DimensionMismatch {
            skel_w: skeleton.width(),
            skel_h: skeleton.height(),
            rec_w: record.width,
            rec_h: record.height,
        });
    }
    let minutiae = record.minutiae();
    let rows: Vec<Result<Vec<SectorFeature>, CrossingError>> =
        par::map_indexed(minutiae.len(), |i| {
            let ns = build_neighbor_structure(record, i, config);
            ns.neighbors
                .iter()
                .map(|slot| match slot {
                    None => Ok(SectorFeature::ABSENT),
                    Some(nb) => sector_feature(skeleton, &minutiae[i], &minutiae[nb.index]),
                })
                .collect()
        });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureMatrix::new(config.sector_count(), rows))
}

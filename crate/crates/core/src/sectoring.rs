//! Angular sector partition around a reference minutia.
//!
//! Directions are measured in the reference minutia's own coordinate frame
//! (rotated by its orientation), so the partition travels with the minutia
//! under rigid motion of the print. Sector 1 starts at the orientation ray;
//! sector i covers [(i-1), i) * 2pi/s. Each sector keeps at most one
//! neighbor: the closest minutia whose direction falls inside it.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::angle::normalize_tau;
use crate::fpdata::{Minutia, MinutiaeRecord};

#[derive(Debug, Error, PartialEq)]
pub enum SectorError {
    #[error("sector count {0} too small, need at least 2")]
    TooFewSectors(usize),
    #[error("point coincides with the reference minutia at ({x}, {y})")]
    ZeroDisplacement { x: u32, y: u32 },
}

/// Number of equal angular sectors, fixed per deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectorConfig {
    sectors: usize,
}

impl SectorConfig {
    pub fn new(sectors: usize) -> Result<Self, SectorError> {
        if sectors < 2 {
            return Err(SectorError::TooFewSectors(sectors));
        }
        Ok(Self { sectors })
    }

    pub fn sector_count(&self) -> usize {
        self.sectors
    }

    pub fn sector_width(&self) -> f64 {
        TAU / self.sectors as f64
    }
}

impl Default for SectorConfig {
    fn default() -> Self {
        Self { sectors: 8 }
    }
}

/// Direction from the reference minutia to a point, measured against the
/// minutia's orientation, in [0, 2pi).
pub fn relative_angle(reference: &Minutia, x: f64, y: f64) -> Result<f64, SectorError> {
    let dx = x - reference.x as f64;
    let dy = y - reference.y as f64;
    if dx == 0.0 && dy == 0.0 {
        return Err(SectorError::ZeroDisplacement {
            x: reference.x,
            y: reference.y,
        });
    }
    Ok(normalize_tau(dy.atan2(dx) - reference.theta()))
}

/// Maps a relative angle in [0, 2pi) to its 1-based sector index.
pub fn sector_index(angle: f64, config: &SectorConfig) -> usize {
    let idx = (angle / config.sector_width()).floor() as usize + 1;
    // guard against idx == s+1 when rounding pushes angle/width up to s
    idx.min(config.sectors)
}

/// The neighbor chosen for one sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Index into the record's minutiae list.
    pub index: usize,
    pub distance: f64,
    pub relative_angle: f64,
}

/// Per-sector nearest neighbors of one reference minutia.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborStructure {
    pub reference_index: usize,
    /// Slot i holds sector i+1. `None` = empty sector.
    pub neighbors: Vec<Option<Neighbor>>,
    /// True when the record has no other minutia to choose from.
    pub degenerate: bool,
}

/// Picks, for every sector, the closest other minutia falling inside it.
/// Distance ties break toward the smaller relative angle, then the smaller
/// minutia index.
pub fn build_neighbor_structure(
    record: &MinutiaeRecord,
    reference_index: usize,
    config: &SectorConfig,
) -> NeighborStructure {
    let minutiae = record.minutiae();
    assert!(
        reference_index < minutiae.len(),
        "reference index out of range"
    );
    let reference = &minutiae[reference_index];
    let mut neighbors: Vec<Option<Neighbor>> = vec![None; config.sector_count()];

    for (index, m) in minutiae.iter().enumerate() {
        if index == reference_index {
            continue;
        }
        // distinct minutiae never share a pixel, so this cannot fail
        let rel = relative_angle(reference, m.x as f64, m.y as f64)
            .expect("distinct minutiae share a position");
        let distance = (m.x as f64 - reference.x as f64).hypot(m.y as f64 - reference.y as f64);
        let slot = &mut neighbors[sector_index(rel, config) - 1];
        let candidate = Neighbor {
            index,
            distance,
            relative_angle: rel,
        };
        let replace = match slot {
            None => true,
            Some(best) => (distance, rel, index) < (best.distance, best.relative_angle, best.index),
        };
        if replace {
            *slot = Some(candidate);
        }
    }

    NeighborStructure {
        reference_index,
        neighbors,
        degenerate: minutiae.len() == 1,
    }
}

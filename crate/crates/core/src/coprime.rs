//! Protected templates: feature scalars scattered over seeded filler.
//!
//! The n*2s feature scalars are written into a T x T grid (T = n*2s) along a
//! position cycle derived from the secret key (k1, k2, k3, k4, rho): entry t
//! goes to row ((k1-1 + t*k3) mod T) + 1, column ((k2-1 + t*k4) mod T) + 1,
//! 1-based. Because gcd(k3, T) = 1 the row sequence visits T distinct rows,
//! so the T positions never collide. Every other cell holds a filler value
//! from the keyed stream seeded by rho. Without the key the feature cells are
//! statistically indistinguishable from filler; changing the key revokes the
//! template.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::par;
use crate::ridgefeat::{FeatureError, FeatureMatrix};
use crate::rng::filler_value;

pub const TEMPLATE_MAGIC: &[u8; 4] = b"CPT1";
pub const TEMPLATE_VERSION: u32 = 1;

/// Secret key material for one template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeySet {
    pub k1: u32,
    pub k2: u32,
    pub k3: u32,
    pub k4: u32,
    pub rho: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("{name} = {value} outside [{lo}, {hi}] for template side {t}")]
    OutOfRange {
        name: &'static str,
        value: u32,
        lo: u32,
        hi: u32,
        t: u32,
    },
    #[error("{name} = {value} shares factor {gcd} with template side {t}")]
    NotCoprime {
        name: &'static str,
        value: u32,
        gcd: u32,
        t: u32,
    },
    #[error("template side {t} admits no coprime step size")]
    NoCoprimeStep { t: u32 },
}

#[derive(Debug, Error)]
#[error("key line must be five integers: k1 k2 k3 k4 rho")]
pub struct KeyParseError;

impl KeySet {
    /// Single-line form `k1 k2 k3 k4 rho`, the key file format.
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.k1, self.k2, self.k3, self.k4, self.rho
        )
    }

    pub fn from_line(line: &str) -> Result<Self, KeyParseError> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(KeyParseError);
        }
        let parse_u32 = |s: &str| s.parse::<u32>().map_err(|_| KeyParseError);
        Ok(Self {
            k1: parse_u32(fields[0])?,
            k2: parse_u32(fields[1])?,
            k3: parse_u32(fields[2])?,
            k4: parse_u32(fields[3])?,
            rho: fields[4].parse().map_err(|_| KeyParseError)?,
        })
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Checks k1, k2 in [1, t] and k3, k4 in [2, t] coprime to t.
pub fn validate_keys(keys: &KeySet, t: u32) -> Result<(), KeyError> {
    assert!(t >= 2, "template side must be at least 2");
    for (name, value) in [("k1", keys.k1), ("k2", keys.k2)] {
        if value < 1 || value > t {
            return Err(KeyError::OutOfRange {
                name,
                value,
                lo: 1,
                hi: t,
                t,
            });
        }
    }
    for (name, value) in [("k3", keys.k3), ("k4", keys.k4)] {
        if value < 2 || value > t {
            return Err(KeyError::OutOfRange {
                name,
                value,
                lo: 2,
                hi: t,
                t,
            });
        }
        let g = gcd(value, t);
        if g != 1 {
            return Err(KeyError::NotCoprime {
                name,
                value,
                gcd: g,
                t,
            });
        }
    }
    Ok(())
}

/// Draws a valid key set for side `t` from a deterministic stream.
pub fn derive_keys(seed: u64, t: u32) -> Result<KeySet, KeyError> {
    assert!(t >= 2, "template side must be at least 2");
    // every t >= 3 has gcd(t-1, t) = 1 with t-1 >= 2; t = 2 has nothing
    if t == 2 {
        return Err(KeyError::NoCoprimeStep { t });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = || loop {
        let c = rng.gen_range(2..=t);
        if gcd(c, t) == 1 {
            return c;
        }
    };
    let k3 = step();
    let k4 = step();
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995);
    Ok(KeySet {
        k1: rng2.gen_range(1..=t),
        k2: rng2.gen_range(1..=t),
        k3,
        k4,
        rho: rng2.gen(),
    })
}

/// The T feature positions for a key, 1-based (row, column), in write order.
pub fn position_cycle(keys: &KeySet, t: u32) -> Vec<(u32, u32)> {
    let t64 = u64::from(t);
    (0..t64)
        .map(|i| {
            let r = (u64::from(keys.k1) - 1 + i * u64::from(keys.k3)) % t64 + 1;
            let c = (u64::from(keys.k2) - 1 + i * u64::from(keys.k4)) % t64 + 1;
            (r as u32, c as u32)
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("template side {side} incompatible with sector count {sectors}")]
    Corrupt { side: u32, sectors: u16 },
    #[error("not a template file (bad magic)")]
    BadMagic,
    #[error("unsupported template format version {0}")]
    UnsupportedVersion(u32),
    #[error("template file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// T x T grid of f64 cells. Holds no key material.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtectedTemplate {
    side: u32,
    sectors: u16,
    cells: Vec<f64>,
}

impl ProtectedTemplate {
    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn sector_count(&self) -> u16 {
        self.sectors
    }

    pub fn cell(&self, row: u32, col: u32) -> f64 {
        assert!(row >= 1 && row <= self.side && col >= 1 && col <= self.side);
        self.cells[((row - 1) as usize) * self.side as usize + (col - 1) as usize]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Binary serialization: magic, version, side, sectors, then side^2
    /// little-endian f64 cells, row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + self.cells.len() * 8);
        out.extend_from_slice(TEMPLATE_MAGIC);
        out.extend_from_slice(&TEMPLATE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.side.to_le_bytes());
        out.extend_from_slice(&self.sectors.to_le_bytes());
        for c in &self.cells {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TemplateError> {
        if bytes.len() < 14 {
            return Err(TemplateError::Truncated {
                expected: 14,
                found: bytes.len(),
            });
        }
        if &bytes[0..4] != TEMPLATE_MAGIC {
            return Err(TemplateError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != TEMPLATE_VERSION {
            return Err(TemplateError::UnsupportedVersion(version));
        }
        let side = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let sectors = u16::from_le_bytes(bytes[12..14].try_into().unwrap());
        if side < 2 || sectors < 2 || side % (2 * u32::from(sectors)) != 0 {
            return Err(TemplateError::Corrupt { side, sectors });
        }
        let n_cells = (side as usize) * (side as usize);
        let expected = 14 + n_cells * 8;
        if bytes.len() != expected {
            return Err(TemplateError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        let cells = bytes[14..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            side,
            sectors,
            cells,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TemplateError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TemplateError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Builds the protected template for a feature matrix under a key.
pub fn generate_template(
    features: &FeatureMatrix,
    keys: &KeySet,
) -> Result<ProtectedTemplate, TemplateError> {
    let side_usize = features.scalar_len();
    let side = u32::try_from(side_usize).expect("template side fits u32");
    validate_keys(keys, side)?;

    let rho = keys.rho;
    let mut cells: Vec<f64> =
        par::map_indexed(side_usize * side_usize, |i| filler_value(rho, i as u64));
    let scalars = features.to_scalars();
    for (value, (row, col)) in scalars.iter().zip(position_cycle(keys, side)) {
        cells[((row - 1) as usize) * side_usize + (col - 1) as usize] = *value;
    }
    Ok(ProtectedTemplate {
        side,
        sectors: features.sector_count() as u16,
        cells,
    })
}

/// Reads the feature matrix back out of a template. With the generating key
/// this is bit-exact; with any other valid key it yields unrelated values.
pub fn extract_features(
    template: &ProtectedTemplate,
    keys: &KeySet,
) -> Result<FeatureMatrix, TemplateError> {
    validate_keys(keys, template.side)?;
    let scalars: Vec<f64> = position_cycle(keys, template.side)
        .into_iter()
        .map(|(r, c)| template.cell(r, c))
        .collect();
    Ok(FeatureMatrix::from_scalars(
        &scalars,
        template.sectors as usize,
    )?)
}

/// Exhaustive key-search size for an attacker who knows neither starting
/// position nor step pair: (T^2)^2 attempts for T = n*2s.
pub fn brute_force_estimate(minutiae: u32, sectors: u32) -> u128 {
    let t = u128::from(minutiae) * 2 * u128::from(sectors);
    t.pow(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridgefeat::SectorFeature;

    fn sample_matrix(n: usize, s: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                (0..s)
                    .map(|_| {
                        if rng.gen_bool(0.3) {
                            SectorFeature::ABSENT
                        } else {
                            SectorFeature {
                                ridge_count: f64::from(rng.gen_range(1..=9)),
                                mean_orientation: rng.gen_range(-1.57..=1.57),
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        FeatureMatrix::new(s, rows)
    }

    #[test]
    fn cycle_walks_the_documented_positions() {
        let keys = KeySet {
            k1: 2,
            k2: 2,
            k3: 3,
            k4: 5,
            rho: 0,
        };
        let cycle = position_cycle(&keys, 7);
        assert_eq!(&cycle[..3], &[(2, 2), (5, 7), (1, 5)]);
        assert_eq!(cycle.len(), 7);
    }

    #[test]
    fn cycle_positions_are_distinct() {
        for (t, seed) in [(4u32, 1u64), (16, 2), (48, 3), (160, 4), (1024, 5)] {
            let keys = derive_keys(seed, t).unwrap();
            let cycle = position_cycle(&keys, t);
            let set: std::collections::HashSet<_> = cycle.iter().collect();
            assert_eq!(set.len(), t as usize, "collision for side {t}");
            for &(r, c) in &cycle {
                assert!((1..=t).contains(&r) && (1..=t).contains(&c));
            }
        }
    }

    #[test]
    fn validate_keys_bounds_and_coprimality() {
        let ok = KeySet {
            k1: 1,
            k2: 800,
            k3: 3,
            k4: 799,
            rho: 9,
        };
        assert!(validate_keys(&ok, 800).is_ok());
        let bad_step = KeySet { k3: 4, ..ok };
        assert_eq!(
            validate_keys(&bad_step, 800).unwrap_err(),
            KeyError::NotCoprime {
                name: "k3",
                value: 4,
                gcd: 4,
                t: 800
            }
        );
        let bad_start = KeySet { k1: 0, ..ok };
        assert!(matches!(
            validate_keys(&bad_start, 800).unwrap_err(),
            KeyError::OutOfRange { name: "k1", .. }
        ));
        let too_big = KeySet { k4: 801, ..ok };
        assert!(matches!(
            validate_keys(&too_big, 800).unwrap_err(),
            KeyError::OutOfRange { name: "k4", .. }
        ));
        // step of 1 would put consecutive entries on adjacent rows
        let unit_step = KeySet { k3: 1, ..ok };
        assert!(matches!(
            validate_keys(&unit_step, 800).unwrap_err(),
            KeyError::OutOfRange { name: "k3", .. }
        ));
    }

    #[test]
    fn derived_keys_validate() {
        for seed in 0..50u64 {
            for t in [4u32, 16, 54, 128, 800] {
                let keys = derive_keys(seed, t).unwrap();
                validate_keys(&keys, t).unwrap();
            }
        }
        assert_eq!(
            derive_keys(1, 2).unwrap_err(),
            KeyError::NoCoprimeStep { t: 2 }
        );
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let fm = sample_matrix(5, 4, 11); // side 40
        let keys = derive_keys(21, 40).unwrap();
        let tpl = generate_template(&fm, &keys).unwrap();
        assert_eq!(tpl.side(), 40);
        let back = extract_features(&tpl, &keys).unwrap();
        assert_eq!(back, fm);
    }

    #[test]
    fn wrong_key_extraction_is_unrelated() {
        let fm = sample_matrix(6, 8, 3); // side 96
        let keys_a = derive_keys(100, 96).unwrap();
        let keys_b = derive_keys(200, 96).unwrap();
        assert_ne!(keys_a, keys_b);
        let tpl = generate_template(&fm, &keys_a).unwrap();
        let wrong = extract_features(&tpl, &keys_b).unwrap();
        let original = fm.to_scalars();
        let got = wrong.to_scalars();
        let same = original
            .iter()
            .zip(&got)
            .filter(|(a, b)| a.to_bits() == b.to_bits())
            .count();
        assert!(
            same * 10 < original.len(),
            "{same}/{} scalars survived",
            original.len()
        );
    }

    #[test]
    fn filler_differs_from_features_without_key() {
        // template cells off the cycle come from the rho stream; two
        // templates of the same features under different rho share the cycle
        // content but almost no filler
        let fm = sample_matrix(4, 4, 7); // side 32
        let mut keys_a = derive_keys(31, 32).unwrap();
        let mut keys_b = keys_a;
        keys_a.rho = 1111;
        keys_b.rho = 2222;
        let ta = generate_template(&fm, &keys_a).unwrap();
        let tb = generate_template(&fm, &keys_b).unwrap();
        let cycle: std::collections::HashSet<(u32, u32)> =
            position_cycle(&keys_a, 32).into_iter().collect();
        let mut off_cycle = 0usize;
        let mut equal = 0usize;
        for r in 1..=32u32 {
            for c in 1..=32u32 {
                if !cycle.contains(&(r, c)) {
                    off_cycle += 1;
                    if ta.cell(r, c).to_bits() == tb.cell(r, c).to_bits() {
                        equal += 1;
                    }
                }
            }
        }
        assert!(
            equal * 20 < off_cycle,
            "{equal}/{off_cycle} filler cells agree"
        );
    }

    #[test]
    fn file_round_trip_and_rejections() {
        let fm = sample_matrix(3, 4, 9); // side 24
        let keys = derive_keys(5, 24).unwrap();
        let tpl = generate_template(&fm, &keys).unwrap();
        let bytes = tpl.to_bytes();
        let back = ProtectedTemplate::from_bytes(&bytes).unwrap();
        assert_eq!(back, tpl);
        // cells round-trip bit-exactly through the file form
        assert_eq!(extract_features(&back, &keys).unwrap(), fm);

        assert!(matches!(
            ProtectedTemplate::from_bytes(b"nope").unwrap_err(),
            TemplateError::Truncated { .. }
        ));
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(
            ProtectedTemplate::from_bytes(&wrong_magic).unwrap_err(),
            TemplateError::BadMagic
        ));
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(
            ProtectedTemplate::from_bytes(&wrong_version).unwrap_err(),
            TemplateError::UnsupportedVersion(9)
        ));
        let mut short = bytes.clone();
        short.truncate(bytes.len() - 8);
        assert!(matches!(
            ProtectedTemplate::from_bytes(&short).unwrap_err(),
            TemplateError::Truncated { .. }
        ));
    }

    #[test]
    fn rejects_invalid_keys_at_both_ends() {
        let fm = sample_matrix(2, 4, 2); // side 16
        let bad = KeySet {
            k1: 1,
            k2: 1,
            k3: 4,
            k4: 3,
            rho: 0,
        };
        assert!(matches!(
            generate_template(&fm, &bad).unwrap_err(),
            TemplateError::Key(KeyError::NotCoprime { .. })
        ));
        let keys = derive_keys(8, 16).unwrap();
        let tpl = generate_template(&fm, &keys).unwrap();
        assert!(matches!(
            extract_features(&tpl, &bad).unwrap_err(),
            TemplateError::Key(KeyError::NotCoprime { .. })
        ));
    }

    #[test]
    fn key_line_round_trip() {
        let keys = KeySet {
            k1: 3,
            k2: 17,
            k3: 5,
            k4: 23,
            rho: 987654321,
        };
        let parsed = KeySet::from_line(&keys.to_line()).unwrap();
        assert_eq!(parsed, keys);
        assert!(KeySet::from_line("1 2 3").is_err());
        assert!(KeySet::from_line("a b c d e").is_err());
        assert!(KeySet::from_line("1 2 3 4 5 6").is_err());
    }

    #[test]
    fn brute_force_estimate_closed_form() {
        assert_eq!(brute_force_estimate(50, 8), 409_600_000_000);
        assert_eq!(brute_force_estimate(1, 1), 16);
        // grows as the fourth power of the side
        assert_eq!(brute_force_estimate(2, 1), 256);
    }
}

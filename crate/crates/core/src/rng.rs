//! Deterministic filler streams.
//!
//! Template cells that do not carry feature data are filled with values that
//! must be reproducible bit-for-bit from the seed alone, on any platform, and
//! addressable by cell index in O(1) so templates never need to be stored.
//! The stream is therefore a pure function of (seed, index) built on the
//! splitmix64 finalizer rather than a stateful generator. The exact algorithm
//! is fixed in docs/formats.md; changing it breaks existing template files.

use std::f64::consts::{PI, TAU};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 output finalizer.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Raw 64-bit word for one cell of the stream with the given seed.
pub fn cell_word(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Filler value for one template cell.
///
/// Half the cells get a count-like integer in [0, 25] stored as f64, the rest
/// an orientation-like real in (-pi, pi], so filler is statistically hard to
/// tell apart from feature data without the key.
pub fn filler_value(seed: u64, index: u64) -> f64 {
    let w = cell_word(seed, index);
    if w & 1 == 0 {
        ((w >> 8) % 26) as f64
    } else {
        // u in [0, 1), so the result lands in (-pi, pi]
        let u = ((w >> 11) as f64) / ((1u64 << 53) as f64);
        PI - TAU * u
    }
}

/// Derives an unrelated substream seed, used to give every subject, impression
/// or key draw its own deterministic stream from one master seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_mul(GAMMA)))
}

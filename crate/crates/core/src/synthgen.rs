//! Synthetic fingerprints with closed-form ridge structure.
//!
//! A scene is a set of concentric rings (spacing `d`, radii `k*d`) plus
//! minutiae placed in polar coordinates about the ring center. Rings are
//! rasterized by the distance test |dist - k*d| <= 0.5, which depends only on
//! the distance to the center, so rotating a scene about its center leaves
//! the skeleton bitwise unchanged relative to the minutiae. The number of
//! rings a straight segment crosses is then known in closed form, giving the
//! test suite an independent ground truth for ridge counting.
//!
//! Two layout families:
//!
//! * [`radial_scene`]: all minutiae on one line through the center. Every
//!   minutia-pair segment is radial, so ring crossings are perpendicular and
//!   pixel rounding provably cannot change a crossing count (endpoint radii
//!   keep >= 0.3*d clearance from every ring). Used wherever exact feature
//!   invariance is asserted.
//! * [`scatter_scene`]: unconstrained random layout, used to build
//!   populations for verification experiments where score tolerances absorb
//!   rasterization noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::angle::normalize_tau;
use crate::fpdata::{DatasetEntry, Minutia, MinutiaeRecord, RecordError, SkeletonImage};
use crate::rng::derive_seed;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("rings of radius up to {extent:.1} px do not fit a {width}x{height} canvas")]
    RingsDontFit {
        extent: f64,
        width: u32,
        height: u32,
    },
    #[error("minutia {index} lands outside the canvas at ({x:.1}, {y:.1})")]
    OutOfCanvas { index: usize, x: f64, y: f64 },
    #[error("cannot place {requested} minutiae, layout capacity is {capacity}")]
    TooManyMinutiae { requested: usize, capacity: usize },
    #[error("jitter could not find a free pixel for minutia {index}")]
    JitterExhausted { index: usize },
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Rotation about the scene center followed by a translation, both applied to
/// minutiae and (implicitly, via the center) to the rings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: f64,
    pub dx: f64,
    pub dy: f64,
}

impl RigidTransform {
    pub const IDENTITY: Self = Self {
        rotation: 0.0,
        dx: 0.0,
        dy: 0.0,
    };

    /// Draws rotation in [-max_rotation, max_rotation] and each translation
    /// component in [-max_shift, max_shift].
    pub fn random(rng: &mut impl Rng, max_rotation: f64, max_shift: f64) -> Self {
        Self {
            rotation: rng.gen_range(-max_rotation..=max_rotation),
            dx: rng.gen_range(-max_shift..=max_shift),
            dy: rng.gen_range(-max_shift..=max_shift),
        }
    }
}

/// One minutia in scene coordinates: direction `ray` and distance `radius`
/// from the center, orientation `theta`, all before any transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub ray: f64,
    pub radius: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub width: u32,
    pub height: u32,
    pub center: (f64, f64),
    pub ring_spacing: f64,
    pub ring_count: u32,
    pub placements: Vec<Placement>,
}

impl SyntheticScene {
    /// Continuous minutia position under a transform.
    pub fn world_position(&self, index: usize, t: &RigidTransform) -> (f64, f64) {
        let p = &self.placements[index];
        let a = p.ray + t.rotation;
        (
            self.center.0 + t.dx + p.radius * a.cos(),
            self.center.1 + t.dy + p.radius * a.sin(),
        )
    }
}

/// Layout knobs shared by both scene families.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub minutiae: usize,
    /// Subject-level draw range for the ring spacing, pixels.
    pub ring_spacing: (f64, f64),
    /// Sector count the thetas are tuned for (radial scenes center every
    /// neighbor direction inside a sector).
    pub sectors: usize,
    /// Minimum pairwise distance in scatter layouts, pixels.
    pub min_separation: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            minutiae: 8,
            ring_spacing: (8.5, 11.5),
            sectors: 8,
            min_separation: 22.0,
        }
    }
}

/// Border the outermost ring must keep from the canvas edge, leaving room for
/// the transforms used in tests.
const RING_MARGIN: f64 = 13.0;

fn max_ring_extent(params: &SceneParams) -> f64 {
    (params.width.min(params.height) as f64) / 2.0 - RING_MARGIN
}

/// All minutiae on one line through the ring center, one per annulus.
///
/// Radii sit at (k + f)*d with f in [0.3, 0.7], so every endpoint keeps at
/// least 0.3*d clearance from every ring even after pixel rounding. Thetas
/// are chosen so both along-ray directions fall mid-sector, which keeps
/// sector assignment stable under the <= atan(1.42/gap) direction wobble that
/// rounding can introduce.
pub fn radial_scene(seed: u64, params: &SceneParams) -> Result<SyntheticScene, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(params.ring_spacing.0..=params.ring_spacing.1);
    let ring_count = (max_ring_extent(params) / d).floor() as u32;
    let capacity = ring_count.saturating_sub(1) as usize;
    if params.minutiae > capacity {
        return Err(SynthError::TooManyMinutiae {
            requested: params.minutiae,
            capacity,
        });
    }

    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut annuli: Vec<u32> = (1..ring_count).collect();
    // Fisher-Yates so the subset of occupied annuli varies with the seed
    for i in (1..annuli.len()).rev() {
        annuli.swap(i, rng.gen_range(0..=i));
    }
    annuli.truncate(params.minutiae);

    let width = std::f64::consts::TAU / params.sectors as f64;
    // mid-sector offset; for odd sector counts the two opposite directions
    // differ by half a sector width, so quarter-width centers both
    let omega = if params.sectors.is_multiple_of(2) {
        width / 2.0
    } else {
        width / 4.0
    };

    let placements = annuli
        .iter()
        .map(|&k| {
            let frac: f64 = rng.gen_range(0.3..=0.7);
            let radius = (k as f64 + frac) * d;
            let opposite: bool = rng.gen();
            let ray = normalize_tau(if opposite {
                phi + std::f64::consts::PI
            } else {
                phi
            });
            let slot = rng.gen_range(0..params.sectors) as f64;
            let theta = normalize_tau(ray - (omega + slot * width));
            Placement { ray, radius, theta }
        })
        .collect();

    Ok(SyntheticScene {
        width: params.width,
        height: params.height,
        center: (params.width as f64 / 2.0, params.height as f64 / 2.0),
        ring_spacing: d,
        ring_count,
        placements,
    })
}

/// Unconstrained layout: random rays, annulus clearance kept, pairwise
/// distance at least `min_separation`.
pub fn scatter_scene(seed: u64, params: &SceneParams) -> Result<SyntheticScene, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(params.ring_spacing.0..=params.ring_spacing.1);
    let ring_count = (max_ring_extent(params) / d).floor() as u32;
    if ring_count < 3 {
        return Err(SynthError::TooManyMinutiae {
            requested: params.minutiae,
            capacity: 0,
        });
    }

    let mut placements: Vec<Placement> = Vec::with_capacity(params.minutiae);
    let mut attempts = 0usize;
    while placements.len() < params.minutiae {
        attempts += 1;
        if attempts > 4000 {
            return Err(SynthError::TooManyMinutiae {
                requested: params.minutiae,
                capacity: placements.len(),
            });
        }
        let k = rng.gen_range(1..ring_count) as f64;
        let radius = (k + rng.gen_range(0.3..=0.7)) * d;
        let ray = rng.gen_range(0.0..std::f64::consts::TAU);
        let (x, y) = (radius * ray.cos(), radius * ray.sin());
        let clear = placements.iter().all(|p| {
            let (px, py) = (p.radius * p.ray.cos(), p.radius * p.ray.sin());
            (x - px).hypot(y - py) >= params.min_separation
        });
        if clear {
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            placements.push(Placement { ray, radius, theta });
        }
    }

    Ok(SyntheticScene {
        width: params.width,
        height: params.height,
        center: (params.width as f64 / 2.0, params.height as f64 / 2.0),
        ring_spacing: d,
        ring_count,
        placements,
    })
}

/// Rasterizes the rings and minutiae under a transform. No noise: rendering
/// the same scene twice gives identical output.
pub fn render_scene(
    scene: &SyntheticScene,
    t: &RigidTransform,
    subject_id: &str,
    impression_id: &str,
) -> Result<DatasetEntry, SynthError> {
    render_with_noise(scene, t, None, subject_id, impression_id)
}

/// Like [`render_scene`] with per-minutia Gaussian position noise drawn from
/// a dedicated stream, mimicking capture-to-capture detector jitter.
pub fn render_jittered(
    scene: &SyntheticScene,
    t: &RigidTransform,
    sigma: f64,
    seed: u64,
    subject_id: &str,
    impression_id: &str,
) -> Result<DatasetEntry, SynthError> {
    render_with_noise(scene, t, Some((sigma, seed)), subject_id, impression_id)
}

fn render_with_noise(
    scene: &SyntheticScene,
    t: &RigidTransform,
    noise: Option<(f64, u64)>,
    subject_id: &str,
    impression_id: &str,
) -> Result<DatasetEntry, SynthError> {
    let (w, h) = (scene.width, scene.height);
    let cx = scene.center.0 + t.dx;
    let cy = scene.center.1 + t.dy;
    let extent = scene.ring_count as f64 * scene.ring_spacing + 0.5;
    if cx - extent < 0.0
        || cy - extent < 0.0
        || cx + extent > (w - 1) as f64
        || cy + extent > (h - 1) as f64
    {
        return Err(SynthError::RingsDontFit {
            extent,
            width: w,
            height: h,
        });
    }

    let mut skeleton = SkeletonImage::blank(w, h)?;
    for y in 0..h {
        for x in 0..w {
            let r = (x as f64 - cx).hypot(y as f64 - cy);
            let k = (r / scene.ring_spacing).round();
            if k >= 1.0 && k <= scene.ring_count as f64 && (r - k * scene.ring_spacing).abs() <= 0.5
            {
                skeleton.set_ridge(x, y);
            }
        }
    }

    let mut rng = noise.map(|(sigma, seed)| {
        (
            ChaCha8Rng::seed_from_u64(seed),
            Normal::new(0.0, sigma).expect("sigma >= 0"),
        )
    });
    let mut minutiae: Vec<Minutia> = Vec::with_capacity(scene.placements.len());
    let mut used = std::collections::HashSet::new();
    for index in 0..scene.placements.len() {
        let (bx, by) = scene.world_position(index, t);
        let theta = normalize_tau(scene.placements[index].theta + t.rotation);
        let mut placed = false;
        for _ in 0..32 {
            let (jx, jy) = match &mut rng {
                Some((r, normal)) => (normal.sample(r), normal.sample(r)),
                None => (0.0, 0.0),
            };
            let (fx, fy) = (bx + jx, by + jy);
            let (px, py) = (fx.round(), fy.round());
            if px < 0.0 || py < 0.0 || px >= w as f64 || py >= h as f64 {
                if rng.is_none() {
                    return Err(SynthError::OutOfCanvas {
                        index,
                        x: fx,
                        y: fy,
                    });
                }
                continue;
            }
            if !used.insert((px as u32, py as u32)) {
                if rng.is_none() {
                    // noise-free placements are >= 5 px apart, cannot collide
                    unreachable!("duplicate pixel in noise-free render");
                }
                continue;
            }
            minutiae.push(Minutia::new(px as u32, py as u32, theta)?);
            placed = true;
            break;
        }
        if !placed {
            return Err(SynthError::JitterExhausted { index });
        }
    }

    let record = MinutiaeRecord::new(subject_id, impression_id, w, h, minutiae)?;
    Ok(DatasetEntry {
        record,
        skeleton: Some(skeleton),
    })
}

/// Closed-form ring crossing count for a pair of minutiae in a radial scene.
///
/// Returns `None` when the two placements are not collinear with the center.
/// Counts rings whose radius falls strictly inside the signed interval the
/// segment covers along the shared line; a segment through the center crosses
/// the inner rings once on each side.
pub fn oracle_radial_crossings(scene: &SyntheticScene, i: usize, j: usize) -> Option<u32> {
    let a = &scene.placements[i];
    let b = &scene.placements[j];
    let rel = (a.ray - b.ray).sin().abs();
    if rel > 1e-9 {
        return None;
    }
    let u1 = a.radius;
    let u2 = b.radius * (b.ray - a.ray).cos(); // +r same side, -r opposite
    let (lo, hi) = if u1 < u2 { (u1, u2) } else { (u2, u1) };
    let d = scene.ring_spacing;
    let mut count = 0u32;
    for k in 1..=scene.ring_count {
        let ring = k as f64 * d;
        if ring > lo && ring < hi {
            count += 1;
        }
        if -ring > lo && -ring < hi {
            count += 1;
        }
    }
    Some(count)
}

/// Builds `subjects x impressions` records. Each subject gets its own scatter
/// layout and ring spacing; impressions differ by a random rigid transform
/// plus `sigma` pixels of position noise. Fully determined by `seed`.
pub fn generate_population(
    subjects: usize,
    impressions: usize,
    sigma: f64,
    seed: u64,
    params: &SceneParams,
) -> Result<Vec<DatasetEntry>, SynthError> {
    let mut entries = Vec::with_capacity(subjects * impressions);
    for s in 0..subjects {
        let subject_seed = derive_seed(seed, s as u64);
        let scene = scatter_scene(subject_seed, params)?;
        let subject_id = format!("s{s:03}");
        for imp in 0..impressions {
            let imp_seed = derive_seed(subject_seed, 1_000 + imp as u64);
            let mut trng = ChaCha8Rng::seed_from_u64(imp_seed);
            let t = if imp == 0 {
                RigidTransform::IDENTITY
            } else {
                RigidTransform::random(&mut trng, 0.4, 6.0)
            };
            let impression_id = format!("i{imp:02}");
            let entry = if sigma > 0.0 && imp > 0 {
                render_jittered(
                    &scene,
                    &t,
                    sigma,
                    derive_seed(imp_seed, 7),
                    &subject_id,
                    &impression_id,
                )?
            } else {
                render_scene(&scene, &t, &subject_id, &impression_id)?
            };
            entries.push(entry);
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_scene_is_deterministic_and_collinear() {
        let params = SceneParams::default();
        let a = radial_scene(11, &params).unwrap();
        let b = radial_scene(11, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.placements.len(), 8);
        let base = a.placements[0].ray;
        for p in &a.placements {
            assert!((p.ray - base).sin().abs() < 1e-12, "off the shared line");
            let frac = p.radius / a.ring_spacing % 1.0;
            assert!(
                (0.299..=0.701).contains(&frac),
                "ring clearance violated: {frac}"
            );
        }
        assert_ne!(a, radial_scene(12, &params).unwrap());
    }

    #[test]
    fn render_marks_rings_and_minutiae() {
        let scene = radial_scene(3, &SceneParams::default()).unwrap();
        let entry = render_scene(&scene, &RigidTransform::IDENTITY, "s", "i").unwrap();
        let skel = entry.skeleton.as_ref().unwrap();
        // ring pixels exist at each radius along the +x axis from the center
        let (cx, cy) = scene.center;
        for k in 1..=scene.ring_count {
            let x = (cx + k as f64 * scene.ring_spacing).round() as i64;
            let near: bool = (-1..=1).any(|dx| skel.is_ridge(x + dx, cy.round() as i64));
            assert!(near, "ring {k} missing on +x axis");
        }
        // minutiae are off-ridge by construction
        for m in entry.record.minutiae() {
            assert!(
                !skel.is_ridge(m.x as i64, m.y as i64),
                "minutia on a ridge pixel"
            );
        }
        assert_eq!(entry.record.len(), 8);
    }

    #[test]
    fn rotation_about_center_keeps_ring_raster() {
        let scene = radial_scene(5, &SceneParams::default()).unwrap();
        let a = render_scene(&scene, &RigidTransform::IDENTITY, "s", "i").unwrap();
        let rot = RigidTransform {
            rotation: 1.234,
            dx: 0.0,
            dy: 0.0,
        };
        let b = render_scene(&scene, &rot, "s", "i").unwrap();
        assert_eq!(a.skeleton, b.skeleton, "pure rotation must not move rings");
    }

    #[test]
    fn oracle_counts_same_and_opposite_side() {
        let mk = |ray: f64, radius: f64| Placement {
            ray,
            radius,
            theta: 0.0,
        };
        let scene = SyntheticScene {
            width: 256,
            height: 256,
            center: (128.0, 128.0),
            ring_spacing: 10.0,
            ring_count: 10,
            placements: vec![mk(0.0, 25.0), mk(0.0, 55.0), mk(std::f64::consts::PI, 35.0)],
        };
        // same side: rings at 30, 40, 50 lie between 25 and 55
        assert_eq!(oracle_radial_crossings(&scene, 0, 1), Some(3));
        // 55 one side to 35 the other: rings 10..50 inbound, 10..30 outbound
        assert_eq!(oracle_radial_crossings(&scene, 1, 2), Some(5 + 3));
        // 25 to 35 across the center: rings 10, 20 on each side
        assert_eq!(oracle_radial_crossings(&scene, 0, 2), Some(2 + 3));
        // non-collinear pair has no closed form
        let mut skewed = scene.clone();
        skewed.placements[1].ray = 0.3;
        assert_eq!(oracle_radial_crossings(&skewed, 0, 1), None);
    }

    #[test]
    fn scatter_scene_respects_separation() {
        let params = SceneParams::default();
        let scene = scatter_scene(9, &params).unwrap();
        assert_eq!(scene.placements.len(), params.minutiae);
        for (i, p) in scene.placements.iter().enumerate() {
            for q in scene.placements.iter().skip(i + 1) {
                let (px, py) = (p.radius * p.ray.cos(), p.radius * p.ray.sin());
                let (qx, qy) = (q.radius * q.ray.cos(), q.radius * q.ray.sin());
                assert!((px - qx).hypot(py - qy) >= params.min_separation);
            }
        }
    }

    #[test]
    fn population_is_deterministic_and_well_formed() {
        let params = SceneParams::default();
        let a = generate_population(3, 4, 1.0, 77, &params).unwrap();
        let b = generate_population(3, 4, 1.0, 77, &params).unwrap();
        assert_eq!(a.len(), 12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.record, y.record);
            assert_eq!(x.skeleton, y.skeleton);
        }
        let ids: std::collections::HashSet<(String, String)> = a
            .iter()
            .map(|e| (e.record.subject_id.clone(), e.record.impression_id.clone()))
            .collect();
        assert_eq!(ids.len(), 12);
        // all records share the configured minutia count
        assert!(a.iter().all(|e| e.record.len() == params.minutiae));
    }

    #[test]
    fn oversized_rings_are_rejected() {
        let scene = SyntheticScene {
            width: 64,
            height: 64,
            center: (32.0, 32.0),
            ring_spacing: 10.0,
            ring_count: 5,
            placements: vec![Placement {
                ray: 0.0,
                radius: 15.0,
                theta: 0.0,
            }],
        };
        assert!(matches!(
            render_scene(&scene, &RigidTransform::IDENTITY, "s", "i").unwrap_err(),
            SynthError::RingsDontFit { .. }
        ));
    }
}

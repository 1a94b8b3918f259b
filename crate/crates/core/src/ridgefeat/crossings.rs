//! Ridge crossing detection along a minutia-pair segment.
//!
//! The segment is walked with a supercover traversal (every cell the
//! continuous segment touches, both cells on exact corner hits), so a ridge
//! cannot slip between two diagonal steps. The two cells flanking an exact
//! corner hit are occupied simultaneously and count as one step of the walk;
//! otherwise a ridge touching only one of them would split a single physical
//! crossing in two. Each maximal run of consecutive ridge-bearing steps is
//! one crossing; runs touching the endpoint cells are discarded because a
//! minutia sits on its own ridge.

use thiserror::Error;

use crate::angle::normalize_pi;
use crate::fpdata::SkeletonImage;

/// Half-width of the square window used to estimate a crossing tangent.
pub const TANGENT_WINDOW: i64 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum CrossingError {
    #[error("segment endpoints coincide at ({0}, {1})")]
    DegenerateSegment(u32, u32),
    #[error("segment endpoint ({x}, {y}) lies outside the {width}x{height} skeleton")]
    OutsideImage {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
    #[error("fewer than 2 ridge pixels around ({x:.1}, {y:.1}), tangent undefined")]
    DegenerateTangent { x: f64, y: f64 },
}

/// One detected ridge crossing: run midpoint and the local ridge tangent,
/// undirected, in [0, pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeCrossing {
    pub position: (f64, f64),
    pub tangent: f64,
}

/// One step of the traversal: the cell the segment occupies, or the two
/// cells flanking an exact corner hit, which it occupies at the same moment.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    One((i64, i64)),
    Corner((i64, i64), (i64, i64)),
}

fn supercover_steps(p0: (i64, i64), p1: (i64, i64)) -> Vec<Step> {
    let dx = (p1.0 - p0.0).abs();
    let dy = (p1.1 - p0.1).abs();
    let sx = (p1.0 - p0.0).signum();
    let sy = (p1.1 - p0.1).signum();
    let mut steps = Vec::with_capacity((dx + dy + 2) as usize);
    let (mut x, mut y) = p0;
    steps.push(Step::One((x, y)));
    let ddx = 2 * dx;
    let ddy = 2 * dy;

    if ddx >= ddy {
        let mut err = dx;
        let mut errprev = dx;
        for _ in 0..dx {
            x += sx;
            err += ddy;
            if err > ddx {
                y += sy;
                err -= ddx;
                match (err + errprev).cmp(&ddx) {
                    std::cmp::Ordering::Less => steps.push(Step::One((x, y - sy))),
                    std::cmp::Ordering::Greater => steps.push(Step::One((x - sx, y))),
                    std::cmp::Ordering::Equal => {
                        steps.push(Step::Corner((x, y - sy), (x - sx, y)));
                    }
                }
            }
            steps.push(Step::One((x, y)));
            errprev = err;
        }
    } else {
        let mut err = dy;
        let mut errprev = dy;
        for _ in 0..dy {
            y += sy;
            err += ddx;
            if err > ddy {
                x += sx;
                err -= ddy;
                match (err + errprev).cmp(&ddy) {
                    std::cmp::Ordering::Less => steps.push(Step::One((x - sx, y))),
                    std::cmp::Ordering::Greater => steps.push(Step::One((x, y - sy))),
                    std::cmp::Ordering::Equal => {
                        steps.push(Step::Corner((x - sx, y), (x, y - sy)));
                    }
                }
            }
            steps.push(Step::One((x, y)));
            errprev = err;
        }
    }
    steps
}

/// Cells touched by the segment between two integer points, in traversal
/// order from `p0`. Exact corner crossings contribute both adjacent cells.
pub fn supercover_cells(p0: (i64, i64), p1: (i64, i64)) -> Vec<(i64, i64)> {
    let steps = supercover_steps(p0, p1);
    let mut cells = Vec::with_capacity(steps.len() + 2);
    for step in steps {
        match step {
            Step::One(c) => cells.push(c),
            Step::Corner(c1, c2) => {
                cells.push(c1);
                cells.push(c2);
            }
        }
    }
    cells
}

/// Undirected ridge direction near `position`: principal axis of the ridge
/// pixels whose centers lie in the closed square of side 2w+1 centered on the
/// sub-pixel position.
///
/// The square is continuous, not anchored to a rounded pixel: a crossing
/// sitting exactly on a cell boundary takes the symmetric 2w+2 span instead
/// of an arbitrary 2w+1 side. Without that, windows fail to mirror under the
/// exact 90-degree motions the invariance tests rely on.
pub fn crossing_tangent(
    skeleton: &SkeletonImage,
    position: (f64, f64),
    window: i64,
) -> Result<f64, CrossingError> {
    let half = window as f64 + 0.5;
    let x_lo = (position.0 - half).ceil() as i64;
    let x_hi = (position.0 + half).floor() as i64;
    let y_lo = (position.1 - half).ceil() as i64;
    let y_hi = (position.1 + half).floor() as i64;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            if skeleton.is_ridge(x, y) {
                pts.push((x as f64, y as f64));
            }
        }
    }
    if pts.len() < 2 {
        return Err(CrossingError::DegenerateTangent {
            x: position.0,
            y: position.1,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    // principal axis of the scatter; an isotropic window yields 0, which is
    // arbitrary but deterministic
    Ok(normalize_pi(0.5 * (2.0 * sxy).atan2(sxx - syy)))
}

/// Detects ridge crossings between two minutia positions, ordered by distance
/// from `p1`. Crossings whose tangent is undefined are dropped.
pub fn find_ridge_crossings(
    skeleton: &SkeletonImage,
    p1: (u32, u32),
    p2: (u32, u32),
) -> Result<Vec<RidgeCrossing>, CrossingError> {
    if p1 == p2 {
        return Err(CrossingError::DegenerateSegment(p1.0, p1.1));
    }
    for p in [p1, p2] {
        if p.0 >= skeleton.width() || p.1 >= skeleton.height() {
            return Err(CrossingError::OutsideImage {
                x: p.0,
                y: p.1,
                width: skeleton.width(),
                height: skeleton.height(),
            });
        }
    }

    let a = (p1.0 as i64, p1.1 as i64);
    let b = (p2.0 as i64, p2.1 as i64);
    let steps = supercover_steps(a, b);

    let mut crossings = Vec::new();
    let mut run: Vec<(i64, i64)> = Vec::new();
    let flush = |run: &mut Vec<(i64, i64)>, out: &mut Vec<RidgeCrossing>| {
        if run.is_empty() {
            return;
        }
        let keep = !run.iter().any(|&c| c == a || c == b);
        if keep {
            let n = run.len() as f64;
            let mid = (
                run.iter().map(|c| c.0 as f64).sum::<f64>() / n,
                run.iter().map(|c| c.1 as f64).sum::<f64>() / n,
            );
            if let Ok(tangent) = crossing_tangent(skeleton, mid, TANGENT_WINDOW) {
                out.push(RidgeCrossing {
                    position: mid,
                    tangent,
                });
            }
        }
        run.clear();
    };
    for step in &steps {
        let pair = match *step {
            Step::One(c) => [Some(c), None],
            Step::Corner(c1, c2) => [Some(c1), Some(c2)],
        };
        let mut on_ridge = false;
        for cell in pair.into_iter().flatten() {
            if skeleton.is_ridge(cell.0, cell.1) {
                run.push(cell);
                on_ridge = true;
            }
        }
        if !on_ridge {
            flush(&mut run, &mut crossings);
        }
    }
    flush(&mut run, &mut crossings);
    Ok(crossings)
}

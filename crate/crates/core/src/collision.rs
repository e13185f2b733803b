//! Arm-to-arm self-collision distance.
//!
//! Links are zero-radius segments between consecutive joint positions. The
//! distance between two links is resolved the classic way: closest approach
//! of the two supporting lines, accepted when both line parameters fall in
//! `[0, 1]`, otherwise the minimum of the four endpoint-to-segment distances.
//! Link thickness is folded into the threshold `d_thr`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative cross-product magnitude below which two lines count as parallel.
pub const PARALLEL_TOL: f64 = 1e-9;
/// Segments shorter than this are treated as points.
pub const DEGENERATE_LEN: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CollisionError {
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("configuration error: {0}")]
    Configuration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
}

impl Segment {
    pub fn new(start: Vector3<f64>, end: Vector3<f64>) -> Self {
        Self { start, end }
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.end - self.start
    }

    pub fn is_degenerate(&self) -> bool {
        self.direction().norm() <= DEGENERATE_LEN
    }

    pub fn point_at(&self, c: f64) -> Vector3<f64> {
        self.start + self.direction() * c
    }

    fn require_proper(&self) -> Result<(), CollisionError> {
        if self.is_degenerate() {
            Err(CollisionError::Degenerate("zero-length segment"))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineLineDistance {
    pub distance: f64,
    /// Closest-approach parameter on the first line.
    pub c_a: f64,
    /// Closest-approach parameter on the second line.
    pub c_b: f64,
    pub parallel: bool,
}

/// Distance between the infinite lines through `a` and `b`.
///
/// For parallel lines the distance is the perpendicular distance from
/// `a.start` to line `b`; `c_a` is then 0 and `c_b` the projection of
/// `a.start` onto `b`.
pub fn line_line_distance(a: &Segment, b: &Segment) -> Result<LineLineDistance, CollisionError> {
    a.require_proper()?;
    b.require_proper()?;
    let na = a.direction();
    let nb = b.direction();
    let cross = na.cross(&nb);
    let cross_norm = cross.norm();
    let r = a.start - b.start;

    if cross_norm <= PARALLEL_TOL * na.norm() * nb.norm() {
        let cb = r.dot(&nb) / nb.norm_squared();
        let foot = b.point_at(cb);
        return Ok(LineLineDistance {
            distance: (a.start - foot).norm(),
            c_a: 0.0,
            c_b: cb,
            parallel: true,
        });
    }

    // Normal equations of min |r + c_a n_a - c_b n_b|².
    let aa = na.norm_squared();
    let ab = na.dot(&nb);
    let bb = nb.norm_squared();
    let d = na.dot(&r);
    let e = nb.dot(&r);
    let denom = aa * bb - ab * ab;
    Ok(LineLineDistance {
        distance: cross.dot(&r).abs() / cross_norm,
        c_a: (ab * e - bb * d) / denom,
        c_b: (aa * e - ab * d) / denom,
        parallel: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSegmentDistance {
    pub distance: f64,
    /// Projection parameter of the point on the segment's line.
    pub b: f64,
    pub witness: Vector3<f64>,
}

pub fn point_segment_distance(c: &Vector3<f64>, s: &Segment) -> Result<PointSegmentDistance, CollisionError> {
    s.require_proper()?;
    let dir = s.direction();
    let to_point = c - s.start;
    let b = dir.dot(&to_point) / dir.norm_squared();
    if (0.0..=1.0).contains(&b) {
        return Ok(PointSegmentDistance {
            distance: dir.cross(&to_point).norm() / dir.norm(),
            b,
            witness: s.point_at(b),
        });
    }
    let d_start = to_point.norm();
    let d_end = (c - s.end).norm();
    let (distance, witness) = if d_start <= d_end {
        (d_start, s.start)
    } else {
        (d_end, s.end)
    };
    Ok(PointSegmentDistance { distance, b, witness })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentDistance {
    pub distance: f64,
    pub witness_a: Vector3<f64>,
    pub witness_b: Vector3<f64>,
}

impl SegmentDistance {
    fn swapped(self) -> Self {
        Self {
            distance: self.distance,
            witness_a: self.witness_b,
            witness_b: self.witness_a,
        }
    }
}

/// Exact minimum distance between two closed, non-degenerate segments.
pub fn segment_segment_distance(a: &Segment, b: &Segment) -> Result<SegmentDistance, CollisionError> {
    let lines = line_line_distance(a, b)?;
    let unit = 0.0..=1.0;
    if !lines.parallel && unit.contains(&lines.c_a) && unit.contains(&lines.c_b) {
        return Ok(SegmentDistance {
            distance: lines.distance,
            witness_a: a.point_at(lines.c_a),
            witness_b: b.point_at(lines.c_b),
        });
    }

    // Closest pair lies on the boundary: one endpoint against the other segment.
    let candidates = [
        endpoint_against(&a.start, b)?,
        endpoint_against(&a.end, b)?,
        endpoint_against(&b.start, a)?.swapped(),
        endpoint_against(&b.end, a)?.swapped(),
    ];
    Ok(candidates
        .into_iter()
        .reduce(|best, c| if c.distance < best.distance { c } else { best })
        .expect("four candidates"))
}

fn endpoint_against(p: &Vector3<f64>, s: &Segment) -> Result<SegmentDistance, CollisionError> {
    let r = point_segment_distance(p, s)?;
    Ok(SegmentDistance {
        distance: r.distance,
        witness_a: *p,
        witness_b: r.witness,
    })
}

/// Distance between two links where either may have collapsed to a point.
fn link_distance(a: &Segment, b: &Segment) -> SegmentDistance {
    match (a.is_degenerate(), b.is_degenerate()) {
        (false, false) => segment_segment_distance(a, b).expect("non-degenerate"),
        (true, false) => endpoint_against(&a.start, b).expect("non-degenerate"),
        (false, true) => endpoint_against(&b.start, a).expect("non-degenerate").swapped(),
        (true, true) => SegmentDistance {
            distance: (a.start - b.start).norm(),
            witness_a: a.start,
            witness_b: b.start,
        },
    }
}

/// Polyline through an arm's joint positions, base to end-effector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSkeleton {
    pub points: Vec<Vector3<f64>>,
}

impl ArmSkeleton {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self { points }
    }

    pub fn segment_count(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.points.windows(2).map(|w| Segment::new(w[0], w[1]))
    }

    /// Same polyline with every point mapped through `f`.
    pub fn map(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Self {
        Self::new(self.points.iter().map(f).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub d_min: f64,
    /// (left segment index, right segment index)
    pub closest_pair: (usize, usize),
    pub witness_left: Vector3<f64>,
    pub witness_right: Vector3<f64>,
}

/// Minimum distance over every left × right link pair.
///
/// With `skip_terminal` set, each arm's last segment (the gripper) is left
/// out: grippers deliberately meet the object, and hence each other's
/// neighbourhood, during coordinated grasping.
pub fn min_arm_distance(
    left: &ArmSkeleton,
    right: &ArmSkeleton,
    skip_terminal: bool,
) -> Result<DistanceReport, CollisionError> {
    let usable = |s: &ArmSkeleton| s.segment_count().saturating_sub(usize::from(skip_terminal));
    let (nl, nr) = (usable(left), usable(right));
    if nl == 0 || nr == 0 {
        return Err(CollisionError::Configuration(format!(
            "skeletons need at least one link to compare (left {}, right {} points)",
            left.points.len(),
            right.points.len()
        )));
    }
    let mut best: Option<DistanceReport> = None;
    for (i, ls) in left.segments().take(nl).enumerate() {
        for (j, rs) in right.segments().take(nr).enumerate() {
            let d = link_distance(&ls, &rs);
            if best.is_none_or(|b| d.distance < b.d_min) {
                best = Some(DistanceReport {
                    d_min: d.distance,
                    closest_pair: (i, j),
                    witness_left: d.witness_a,
                    witness_right: d.witness_b,
                });
            }
        }
    }
    Ok(best.expect("at least one pair"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SafetyVerdict {
    Safe,
    Unsafe { report: DistanceReport },
}

impl SafetyVerdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, SafetyVerdict::Safe)
    }
}

/// Safe when `d_min ≥ d_thr` (boundary inclusive).
pub fn collision_check(report: &DistanceReport, d_thr: f64) -> SafetyVerdict {
    if report.d_min >= d_thr {
        SafetyVerdict::Safe
    } else {
        SafetyVerdict::Unsafe { report: *report }
    }
}

//! Planar geometry on the 32x32 stimulus canvas.

use std::ops::{Add, Sub};

use crate::rng::Rng;
use crate::stimulus::StimulusError;

/// Side length of the square canvas in pixels.
pub const CANVAS_SIZE: usize = 32;
/// Minimum segment length: 30% of the canvas diagonal, rounded to whole pixels.
pub const MIN_SEGMENT_LENGTH: f64 = 13.0;
/// Upper bound on rejection-sampling attempts for any single construction.
pub const MAX_ATTEMPTS: usize = 10_000;

/// Tolerance used when deciding whether two endpoints coincide.
pub const VERTEX_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Sub for Point {
    type Output = Point;

    fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }
}

impl Add for Point {
    type Output = Point;

    fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        self.sub(other).norm()
    }

    pub fn coincides(self, other: Point) -> bool {
        self.distance(other) <= VERTEX_EPS
    }

    /// Unit vector at `degrees` measured counter-clockwise from +x.
    pub fn from_angle(degrees: f64) -> Point {
        let r = degrees.to_radians();
        Point::new(r.cos(), r.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn direction(&self) -> Point {
        self.b.sub(self.a)
    }

    pub fn point_at(&self, t: f64) -> Point {
        self.a.add(self.direction().scale(t))
    }

    /// Shortest distance from `p` to any point of the segment.
    pub fn distance_to_point(&self, p: Point) -> f64 {
        let d = self.direction();
        let len2 = d.dot(d);
        if len2 == 0.0 {
            return p.distance(self.a);
        }
        let t = (p.sub(self.a).dot(d) / len2).clamp(0.0, 1.0);
        p.distance(self.point_at(t))
    }
}

/// Axis-aligned square region `[min, max]^2` that sampled endpoints must lie in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: f64,
    pub max: f64,
}

impl Region {
    /// The drawable canvas with a one-pixel margin on every edge.
    pub const CANVAS: Region = Region {
        min: 1.0,
        max: (CANVAS_SIZE - 2) as f64,
    };

    pub fn contains(&self, p: Point) -> bool {
        (self.min..=self.max).contains(&p.x) && (self.min..=self.max).contains(&p.y)
    }

    /// Longest segment that fits in the region (its diagonal).
    pub fn max_chord(&self) -> f64 {
        (self.max - self.min) * std::f64::consts::SQRT_2
    }

    pub fn sample_point(&self, rng: &mut Rng) -> Point {
        Point::new(rng.uniform(self.min, self.max), rng.uniform(self.min, self.max))
    }
}

/// Outcome of a parametric segment-segment test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intersection {
    /// The segments meet at `s1(t1) == s2(t2)`, both parameters in `[0, 1]`.
    Crossing {
        t1: f64,
        t2: f64,
    },
    /// Collinear segments sharing more than one point. No unique crossing.
    CollinearOverlap,
    Disjoint,
}

impl Intersection {
    pub fn params(&self) -> Option<(f64, f64)> {
        match *self {
            Intersection::Crossing { t1, t2 } => Some((t1, t2)),
            _ => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Intersection::CollinearOverlap)
    }

    /// True when the segments share any point at all.
    pub fn touches(&self) -> bool {
        !matches!(self, Intersection::Disjoint)
    }
}

/// Solves `s1.a + t1*d1 = s2.a + t2*d2` for the crossing parameters.
pub fn segments_intersect(s1: &Segment, s2: &Segment) -> Intersection {
    let d1 = s1.direction();
    let d2 = s2.direction();
    let offset = s2.a.sub(s1.a);
    let denom = d1.cross(d2);
    let scale = d1.norm() * d2.norm();

    if denom.abs() <= 1e-12 * scale.max(1.0) {
        // Parallel. Only collinear overlap counts as contact.
        if offset.cross(d1).abs() > 1e-9 * d1.norm().max(1.0) {
            return Intersection::Disjoint;
        }
        let len2 = d1.dot(d1);
        if len2 == 0.0 {
            return Intersection::Disjoint;
        }
        let u0 = offset.dot(d1) / len2;
        let u1 = s2.b.sub(s1.a).dot(d1) / len2;
        let (lo, hi) = if u0 <= u1 { (u0, u1) } else { (u1, u0) };
        return if hi >= 0.0 && lo <= 1.0 {
            Intersection::CollinearOverlap
        } else {
            Intersection::Disjoint
        };
    }

    let t1 = offset.cross(d2) / denom;
    let t2 = offset.cross(d1) / denom;
    if (0.0..=1.0).contains(&t1) && (0.0..=1.0).contains(&t2) {
        Intersection::Crossing { t1, t2 }
    } else {
        Intersection::Disjoint
    }
}

/// Minimum Euclidean distance between two segments (zero when they touch).
pub fn segment_distance(s1: &Segment, s2: &Segment) -> f64 {
    if segments_intersect(s1, s2).touches() {
        return 0.0;
    }
    s1.distance_to_point(s2.a)
        .min(s1.distance_to_point(s2.b))
        .min(s2.distance_to_point(s1.a))
        .min(s2.distance_to_point(s1.b))
}

/// Error returned by [`angle_between`] when the segments share no endpoint.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("segments do not share the given vertex")]
pub struct NoSharedVertex;

/// Interior angle in degrees between two segments meeting at `vertex`.
pub fn angle_between(s1: &Segment, s2: &Segment, vertex: Point) -> Result<f64, NoSharedVertex> {
    let r1 = ray_from(s1, vertex).ok_or(NoSharedVertex)?;
    let r2 = ray_from(s2, vertex).ok_or(NoSharedVertex)?;
    Ok(r1.cross(r2).abs().atan2(r1.dot(r2)).to_degrees())
}

fn ray_from(s: &Segment, vertex: Point) -> Option<Point> {
    if s.a.coincides(vertex) {
        Some(s.b.sub(s.a))
    } else if s.b.coincides(vertex) {
        Some(s.a.sub(s.b))
    } else {
        None
    }
}

/// Finds the single endpoint shared by two segments, if any.
pub fn shared_vertex(s1: &Segment, s2: &Segment) -> Option<Point> {
    [s1.a, s1.b]
        .into_iter()
        .find(|&p| p.coincides(s2.a) || p.coincides(s2.b))
}

/// Acceptance test applied to each sampled segment.
pub fn accept_segment(segment: &Segment, length_min: f64, region: Region) -> bool {
    region.contains(segment.a) && region.contains(segment.b) && segment.length() >= length_min
}

/// Rejection-samples a segment with both endpoints in `region`.
pub fn sample_segment(rng: &mut Rng, length_min: f64, region: Region) -> Result<Segment, StimulusError> {
    if length_min > region.max_chord() {
        return Err(StimulusError::RegionTooSmall {
            length_min,
            max_chord: region.max_chord(),
        });
    }
    for _ in 0..MAX_ATTEMPTS {
        let s = Segment::new(region.sample_point(rng), region.sample_point(rng));
        if accept_segment(&s, length_min, region) {
            return Ok(s);
        }
    }
    Err(StimulusError::RejectionExhausted {
        what: "segment",
        attempts: MAX_ATTEMPTS,
    })
}

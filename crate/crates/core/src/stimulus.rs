//! The six line/angle tasks: vector-level stimulus construction and the
//! geometric checker that certifies each stimulus before it is drawn.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use crate::geometry::{
    angle_between, sample_segment, segment_distance, segments_intersect, shared_vertex, Point, Region, Segment,
    MAX_ATTEMPTS, MIN_SEGMENT_LENGTH,
};
use crate::rng::Rng;

/// Interior angle range shared by "an angle" and triangle corners.
pub const ANGLE_RANGE: (f64, f64) = (20.0, 160.0);
pub const BLUNT_RANGE: (f64, f64) = (100.0, 160.0);
pub const SHARP_RANGE: (f64, f64) = (20.0, 80.0);
/// Allowed crossing position along each segment of a crossing pair.
pub const CROSSING_RANGE: (f64, f64) = (0.2, 0.8);
/// Minimum gap between a distractor (or a non-crossing partner) and any other segment.
pub const CLEARANCE: f64 = 1.0;

/// Longest arm or crossing segment drawn by the generator.
const MAX_SAMPLED_LENGTH: f64 = 26.0;
/// Angle between the two lines of a crossing pair. Shallow crossings read as overlaps.
const CROSSING_ANGLE: (f64, f64) = (20.0, 160.0);
/// Metadata is recomputed from geometry and must agree to this tolerance.
const METADATA_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StimulusError {
    #[error("segment of length {length_min} cannot fit in a region with max chord {max_chord:.2}")]
    RegionTooSmall { length_min: f64, max_chord: f64 },
    #[error("rejection sampling for {what} exhausted after {attempts} attempts")]
    RejectionExhausted { what: &'static str, attempts: usize },
    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(u8),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("stimulus spec failed verification: {0}")]
    Unverified(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    AngCrs,
    AngCrsLn,
    AngTriLn,
    BltSrp,
    BltSrpLn,
    CrsNcrs,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::AngCrs,
        Task::AngCrsLn,
        Task::AngTriLn,
        Task::BltSrp,
        Task::BltSrpLn,
        Task::CrsNcrs,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Task> {
        Task::ALL.get(usize::from(id)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::AngCrs => "ang_crs",
            Task::AngCrsLn => "ang_crs_ln",
            Task::AngTriLn => "ang_tri_ln",
            Task::BltSrp => "blt_srp",
            Task::BltSrpLn => "blt_srp_ln",
            Task::CrsNcrs => "crs_ncrs",
        }
    }

    /// Whether the task adds a distractor line crossing nothing else.
    pub fn has_distractor(self) -> bool {
        matches!(self, Task::AngCrsLn | Task::AngTriLn | Task::BltSrpLn)
    }

    fn figure(self, label: u8) -> Figure {
        match (self, label) {
            (Task::AngCrs | Task::AngCrsLn | Task::AngTriLn, 0) => Figure::Angle(ANGLE_RANGE),
            (Task::AngCrs | Task::AngCrsLn, _) => Figure::Crossing,
            (Task::AngTriLn, _) => Figure::Triangle,
            (Task::BltSrp | Task::BltSrpLn, 0) => Figure::Angle(BLUNT_RANGE),
            (Task::BltSrp | Task::BltSrpLn, _) => Figure::Angle(SHARP_RANGE),
            (Task::CrsNcrs, 0) => Figure::Crossing,
            (Task::CrsNcrs, _) => Figure::NonCrossing,
        }
    }

    /// Number of segments in a stimulus of this task and label.
    pub fn segment_count(self, label: u8) -> usize {
        self.figure(label).segment_count() + usize::from(self.has_distractor())
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = StimulusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| StimulusError::UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Figure {
    Angle((f64, f64)),
    Crossing,
    NonCrossing,
    Triangle,
}

impl Figure {
    fn segment_count(self) -> usize {
        match self {
            Figure::Triangle => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    WhiteOnDark,
    BlackOnLight,
}

/// Measured quantities recorded at generation time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    /// Angle (one entry) or triangle corners (three entries), in degrees.
    pub angles: Vec<f64>,
    /// Crossing parameters along the first and second figure segment.
    pub crossing: Option<(f64, f64)>,
}

/// Exact vector description of one stimulus. Figure segments come first,
/// followed by the distractor for the `*_ln` tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusSpec {
    pub task: Task,
    pub label: u8,
    pub segments: Vec<Segment>,
    pub polarity: Polarity,
    pub metadata: Metadata,
}

impl StimulusSpec {
    pub fn new(task: Task, label: u8, segments: Vec<Segment>, polarity: Polarity) -> Self {
        Self {
            task,
            label,
            segments,
            polarity,
            metadata: Metadata::default(),
        }
    }
}

/// One failed constraint.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("label {0} is not binary")]
    InvalidLabel(u8),
    #[error("expected {expected} segments, found {found}")]
    SegmentCount { expected: usize, found: usize },
    #[error("segment {index} has length {length:.3} below 13 px")]
    SegmentTooShort { index: usize, length: f64 },
    #[error("segment {index} leaves the canvas margin")]
    OutOfBounds { index: usize },
    #[error("angle arms do not share a vertex")]
    NoSharedVertex,
    #[error("angle {measured:.2} outside blunt/sharp ranges (needs {lo}..{hi})")]
    BluntSharpAngle { measured: f64, lo: f64, hi: f64 },
    #[error("angle {measured:.2} outside {lo}..{hi} degrees")]
    AngleOutOfRange { measured: f64, lo: f64, hi: f64 },
    #[error("segments do not cross")]
    NotCrossing,
    #[error("crossing parameter {t:.3} below 0.2")]
    CrossingBelow { t: f64 },
    #[error("crossing parameter {t:.3} above 0.8")]
    CrossingAbove { t: f64 },
    #[error("non-crossing pair touches or crosses")]
    UnexpectedContact,
    #[error("segments {first} and {second} only {distance:.3} px apart")]
    TooClose { first: usize, second: usize, distance: f64 },
    #[error("triangle sides do not close into three distinct corners")]
    NotATriangle,
    #[error("distractor crosses segment {index}")]
    DistractorCrosses { index: usize },
    #[error("recorded metadata disagrees with geometry")]
    MetadataMismatch,
}

/// Result of [`verify_spec`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Verification {
    pub violations: Vec<Violation>,
}

impl Verification {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-derives every task constraint from the raw segment geometry.
pub fn verify_spec(spec: &StimulusSpec) -> Verification {
    let mut v = Vec::new();
    if spec.label > 1 {
        v.push(Violation::InvalidLabel(spec.label));
        return Verification { violations: v };
    }
    let expected = spec.task.segment_count(spec.label);
    if spec.segments.len() != expected {
        v.push(Violation::SegmentCount {
            expected,
            found: spec.segments.len(),
        });
        return Verification { violations: v };
    }

    for (index, s) in spec.segments.iter().enumerate() {
        let length = s.length();
        if length < MIN_SEGMENT_LENGTH {
            v.push(Violation::SegmentTooShort { index, length });
        }
        if !Region::CANVAS.contains(s.a) || !Region::CANVAS.contains(s.b) {
            v.push(Violation::OutOfBounds { index });
        }
    }

    let figure = spec.task.figure(spec.label);
    let n_fig = figure.segment_count();
    let segs = &spec.segments;
    let mut measured = Metadata::default();

    match figure {
        Figure::Angle((lo, hi)) => match shared_vertex(&segs[0], &segs[1]) {
            Some(vertex) => {
                let far_coincide = other_end(&segs[0], vertex).coincides(other_end(&segs[1], vertex));
                match angle_between(&segs[0], &segs[1], vertex) {
                    Ok(angle) if !far_coincide => {
                        measured.angles.push(angle);
                        if !(lo..=hi).contains(&angle) {
                            let blunt_sharp = matches!(spec.task, Task::BltSrp | Task::BltSrpLn);
                            v.push(if blunt_sharp {
                                Violation::BluntSharpAngle {
                                    measured: angle,
                                    lo,
                                    hi,
                                }
                            } else {
                                Violation::AngleOutOfRange {
                                    measured: angle,
                                    lo,
                                    hi,
                                }
                            });
                        }
                    }
                    _ => v.push(Violation::NoSharedVertex),
                }
            }
            None => v.push(Violation::NoSharedVertex),
        },
        Figure::Crossing => match segments_intersect(&segs[0], &segs[1]).params() {
            Some((t1, t2)) => {
                measured.crossing = Some((t1, t2));
                for t in [t1, t2] {
                    if t < CROSSING_RANGE.0 {
                        v.push(Violation::CrossingBelow { t });
                    } else if t > CROSSING_RANGE.1 {
                        v.push(Violation::CrossingAbove { t });
                    }
                }
            }
            None => v.push(Violation::NotCrossing),
        },
        Figure::NonCrossing => {
            if segments_intersect(&segs[0], &segs[1]).touches() {
                v.push(Violation::UnexpectedContact);
            } else {
                let distance = segment_distance(&segs[0], &segs[1]);
                if distance < CLEARANCE {
                    v.push(Violation::TooClose {
                        first: 0,
                        second: 1,
                        distance,
                    });
                }
            }
        }
        Figure::Triangle => match triangle_corners(&segs[0], &segs[1], &segs[2]) {
            Some(angles) => {
                for &angle in &angles {
                    if !(ANGLE_RANGE.0..=ANGLE_RANGE.1).contains(&angle) {
                        v.push(Violation::AngleOutOfRange {
                            measured: angle,
                            lo: ANGLE_RANGE.0,
                            hi: ANGLE_RANGE.1,
                        });
                    }
                }
                measured.angles = angles.to_vec();
            }
            None => v.push(Violation::NotATriangle),
        },
    }

    if spec.task.has_distractor() {
        let d = &segs[n_fig];
        for (index, other) in segs[..n_fig].iter().enumerate() {
            if segments_intersect(d, other).touches() {
                v.push(Violation::DistractorCrosses { index });
            } else {
                let distance = segment_distance(d, other);
                if distance < CLEARANCE {
                    v.push(Violation::TooClose {
                        first: n_fig,
                        second: index,
                        distance,
                    });
                }
            }
        }
    }

    if !metadata_agrees(&spec.metadata, &measured) {
        v.push(Violation::MetadataMismatch);
    }

    Verification { violations: v }
}

fn other_end(s: &Segment, vertex: Point) -> Point {
    if s.a.coincides(vertex) {
        s.b
    } else {
        s.a
    }
}

/// Corner angles of a closed three-segment loop, ordered by the vertex
/// shared between segments (0,1), (1,2), (2,0).
fn triangle_corners(s0: &Segment, s1: &Segment, s2: &Segment) -> Option<[f64; 3]> {
    let v01 = shared_vertex(s0, s1)?;
    let v12 = shared_vertex(s1, s2)?;
    let v20 = shared_vertex(s2, s0)?;
    if v01.coincides(v12) || v12.coincides(v20) || v20.coincides(v01) {
        return None;
    }
    Some([
        angle_between(s0, s1, v01).ok()?,
        angle_between(s1, s2, v12).ok()?,
        angle_between(s2, s0, v20).ok()?,
    ])
}

fn metadata_agrees(recorded: &Metadata, measured: &Metadata) -> bool {
    let angles_ok = recorded.angles.is_empty()
        || (recorded.angles.len() == measured.angles.len()
            && recorded
                .angles
                .iter()
                .zip(&measured.angles)
                .all(|(a, b)| (a - b).abs() <= METADATA_TOL));
    let crossing_ok = match (recorded.crossing, measured.crossing) {
        (None, _) => true,
        (Some((a1, a2)), Some((b1, b2))) => (a1 - b1).abs() <= METADATA_TOL && (a2 - b2).abs() <= METADATA_TOL,
        (Some(_), None) => false,
    };
    angles_ok && crossing_ok
}

/// Shared countdown so one spec never draws more than [`MAX_ATTEMPTS`] candidates.
struct Budget {
    left: usize,
}

impl Budget {
    fn spend(&mut self, what: &'static str) -> Result<(), StimulusError> {
        if self.left == 0 {
            return Err(StimulusError::RejectionExhausted {
                what,
                attempts: MAX_ATTEMPTS,
            });
        }
        self.left -= 1;
        Ok(())
    }
}

/// Draws a stimulus for `task`/`label` that passes [`verify_spec`].
pub fn gen_spec(task: Task, label: u8, rng: &mut Rng) -> Result<StimulusSpec, StimulusError> {
    if label > 1 {
        return Err(StimulusError::InvalidLabel(label));
    }
    let polarity = if rng.coin() {
        Polarity::WhiteOnDark
    } else {
        Polarity::BlackOnLight
    };
    let mut budget = Budget { left: MAX_ATTEMPTS };

    loop {
        let mut metadata = Metadata::default();
        let mut segments = match task.figure(label) {
            Figure::Angle(range) => {
                let (a, b, angle) = draw_angle(rng, range, &mut budget)?;
                metadata.angles.push(angle);
                vec![a, b]
            }
            Figure::Crossing => {
                let (a, b, t) = draw_crossing(rng, &mut budget)?;
                metadata.crossing = Some(t);
                vec![a, b]
            }
            Figure::NonCrossing => {
                let (a, b) = draw_non_crossing(rng, &mut budget)?;
                vec![a, b]
            }
            Figure::Triangle => {
                let (sides, angles) = draw_triangle(rng, &mut budget)?;
                metadata.angles = angles.to_vec();
                sides.to_vec()
            }
        };
        if task.has_distractor() {
            segments.push(draw_distractor(rng, &segments, &mut budget)?);
        }

        // Recompute from geometry so the stored values are exactly what the
        // checker measures.
        let mut spec = StimulusSpec {
            task,
            label,
            segments,
            polarity,
            metadata: Metadata::default(),
        };
        let check = verify_spec(&spec);
        if check.is_valid() {
            spec.metadata = measured_metadata(&spec, metadata);
            return Ok(spec);
        }
        budget.spend("verified spec")?;
    }
}

fn measured_metadata(spec: &StimulusSpec, drawn: Metadata) -> Metadata {
    let segs = &spec.segments;
    match spec.task.figure(spec.label) {
        Figure::Angle(_) => {
            let vertex = shared_vertex(&segs[0], &segs[1]).expect("verified angle");
            Metadata {
                angles: vec![angle_between(&segs[0], &segs[1], vertex).expect("verified angle")],
                crossing: None,
            }
        }
        Figure::Crossing => Metadata {
            angles: Vec::new(),
            crossing: segments_intersect(&segs[0], &segs[1]).params(),
        },
        Figure::Triangle => Metadata {
            angles: triangle_corners(&segs[0], &segs[1], &segs[2])
                .expect("verified triangle")
                .to_vec(),
            crossing: None,
        },
        Figure::NonCrossing => drawn,
    }
}

fn draw_angle(
    rng: &mut Rng,
    (lo, hi): (f64, f64),
    budget: &mut Budget,
) -> Result<(Segment, Segment, f64), StimulusError> {
    let region = Region::CANVAS;
    loop {
        budget.spend("angle")?;
        let vertex = region.sample_point(rng);
        let angle = rng.uniform(lo, hi);
        let heading = rng.uniform(0.0, 360.0);
        let l1 = rng.uniform(MIN_SEGMENT_LENGTH, MAX_SAMPLED_LENGTH);
        let l2 = rng.uniform(MIN_SEGMENT_LENGTH, MAX_SAMPLED_LENGTH);
        let p1 = vertex.add(Point::from_angle(heading).scale(l1));
        let p2 = vertex.add(Point::from_angle(heading + angle).scale(l2));
        if region.contains(p1) && region.contains(p2) {
            return Ok((Segment::new(vertex, p1), Segment::new(vertex, p2), angle));
        }
    }
}

fn draw_crossing(rng: &mut Rng, budget: &mut Budget) -> Result<(Segment, Segment, (f64, f64)), StimulusError> {
    let region = Region::CANVAS;
    loop {
        budget.spend("crossing pair")?;
        let centre = region.sample_point(rng);
        let h1 = rng.uniform(0.0, 360.0);
        let h2 = h1 + rng.uniform(CROSSING_ANGLE.0, CROSSING_ANGLE.1);
        let t1 = rng.uniform(CROSSING_RANGE.0, CROSSING_RANGE.1);
        let t2 = rng.uniform(CROSSING_RANGE.0, CROSSING_RANGE.1);
        let l1 = rng.uniform(MIN_SEGMENT_LENGTH, MAX_SAMPLED_LENGTH);
        let l2 = rng.uniform(MIN_SEGMENT_LENGTH, MAX_SAMPLED_LENGTH);
        let s1 = through(centre, Point::from_angle(h1), t1, l1);
        let s2 = through(centre, Point::from_angle(h2), t2, l2);
        if [s1.a, s1.b, s2.a, s2.b].iter().all(|&p| region.contains(p)) {
            return Ok((s1, s2, (t1, t2)));
        }
    }
}

/// Segment of length `len` along `dir` that passes `centre` at parameter `t`.
fn through(centre: Point, dir: Point, t: f64, len: f64) -> Segment {
    Segment::new(centre.sub(dir.scale(t * len)), centre.add(dir.scale((1.0 - t) * len)))
}

fn draw_non_crossing(rng: &mut Rng, budget: &mut Budget) -> Result<(Segment, Segment), StimulusError> {
    loop {
        budget.spend("non-crossing pair")?;
        let s1 = sample_segment(rng, MIN_SEGMENT_LENGTH, Region::CANVAS)?;
        let s2 = sample_segment(rng, MIN_SEGMENT_LENGTH, Region::CANVAS)?;
        if segment_distance(&s1, &s2) >= CLEARANCE {
            return Ok((s1, s2));
        }
    }
}

fn draw_triangle(rng: &mut Rng, budget: &mut Budget) -> Result<([Segment; 3], [f64; 3]), StimulusError> {
    let region = Region::CANVAS;
    loop {
        budget.spend("triangle")?;
        let v = [
            region.sample_point(rng),
            region.sample_point(rng),
            region.sample_point(rng),
        ];
        let sides = [
            Segment::new(v[0], v[1]),
            Segment::new(v[1], v[2]),
            Segment::new(v[2], v[0]),
        ];
        if sides.iter().any(|s| s.length() < MIN_SEGMENT_LENGTH) {
            continue;
        }
        let Some(angles) = triangle_corners(&sides[0], &sides[1], &sides[2]) else {
            continue;
        };
        if angles.iter().all(|a| (ANGLE_RANGE.0..=ANGLE_RANGE.1).contains(a)) {
            return Ok((sides, angles));
        }
    }
}

fn draw_distractor(rng: &mut Rng, figure: &[Segment], budget: &mut Budget) -> Result<Segment, StimulusError> {
    loop {
        budget.spend("distractor")?;
        let d = sample_segment(rng, MIN_SEGMENT_LENGTH, Region::CANVAS)?;
        if figure.iter().all(|s| segment_distance(&d, s) >= CLEARANCE) {
            return Ok(d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
            assert_eq!(Task::from_id(t.id()), Some(t));
        }
        assert!("ang-crs".parse::<Task>().is_err());
        assert_eq!(Task::from_id(6), None);
    }

    #[test]
    fn segment_counts_stay_within_two_to_four() {
        for t in Task::ALL {
            for label in 0..2 {
                let n = t.segment_count(label);
                assert!((2..=4).contains(&n), "{t} {label} -> {n}");
            }
        }
        assert_eq!(Task::AngTriLn.segment_count(1), 4);
        assert_eq!(Task::AngTriLn.segment_count(0), 3);
    }

    #[test]
    fn blunt_spec_has_blunt_angle() {
        let mut rng = Rng::new(11);
        for _ in 0..200 {
            let spec = gen_spec(Task::BltSrp, 0, &mut rng).unwrap();
            let a = spec.metadata.angles[0];
            assert!((100.0..=160.0).contains(&a), "{a}");
        }
    }

    #[test]
    fn non_crossing_pair_has_no_intersection() {
        let mut rng = Rng::new(12);
        for _ in 0..200 {
            let spec = gen_spec(Task::CrsNcrs, 1, &mut rng).unwrap();
            assert_eq!(spec.segments.len(), 2);
            assert!(segments_intersect(&spec.segments[0], &spec.segments[1])
                .params()
                .is_none());
        }
    }

    #[test]
    fn triangle_spec_has_four_segments() {
        let mut rng = Rng::new(13);
        let spec = gen_spec(Task::AngTriLn, 1, &mut rng).unwrap();
        assert_eq!(spec.segments.len(), 4);
        assert_eq!(spec.metadata.angles.len(), 3);
        let sum: f64 = spec.metadata.angles.iter().sum();
        assert!((sum - 180.0).abs() < 1e-9);
    }

    #[test]
    fn valid_blunt_angle_passes() {
        // 120 degrees between headings 15 and 135.
        let v = p(12.0, 8.0);
        let arm1 = Segment::new(v, v.add(Point::from_angle(15.0).scale(15.0)));
        let arm2 = Segment::new(v, v.add(Point::from_angle(135.0).scale(14.0)));
        let spec = StimulusSpec::new(Task::BltSrp, 0, vec![arm1, arm2], Polarity::WhiteOnDark);
        let check = verify_spec(&spec);
        assert!(check.is_valid(), "{:?}", check.violations);
    }

    #[test]
    fn right_angle_rejected_for_blunt_sharp() {
        let v = p(5.0, 5.0);
        let spec = StimulusSpec::new(
            Task::BltSrp,
            0,
            vec![Segment::new(v, p(25.0, 5.0)), Segment::new(v, p(5.0, 25.0))],
            Polarity::WhiteOnDark,
        );
        let check = verify_spec(&spec);
        assert!(!check.is_valid());
        assert!(check
            .violations
            .iter()
            .any(|v| v.to_string().contains("outside blunt/sharp ranges")));
        // Same geometry as the sharp class is still invalid.
        let sharp = StimulusSpec { label: 1, ..spec };
        assert!(!verify_spec(&sharp).is_valid());
    }

    #[test]
    fn low_crossing_parameter_rejected() {
        // Horizontal segment crossed at 10% of its length.
        let s1 = Segment::new(p(5.0, 16.0), p(25.0, 16.0));
        let s2 = Segment::new(p(7.0, 8.0), p(7.0, 24.0));
        let spec = StimulusSpec::new(Task::AngCrs, 1, vec![s1, s2], Polarity::BlackOnLight);
        let check = verify_spec(&spec);
        assert!(check
            .violations
            .iter()
            .any(|v| v.to_string().contains("crossing parameter") && v.to_string().contains("below 0.2")));
    }

    #[test]
    fn distractor_touching_figure_rejected() {
        let v = p(5.0, 5.0);
        let arm1 = Segment::new(v, v.add(Point::from_angle(10.0).scale(20.0)));
        let arm2 = Segment::new(v, v.add(Point::from_angle(60.0).scale(20.0)));
        let cut = Segment::new(p(20.0, 2.0), p(8.0, 25.0));
        let spec = StimulusSpec::new(Task::BltSrpLn, 1, vec![arm1, arm2, cut], Polarity::WhiteOnDark);
        let check = verify_spec(&spec);
        assert!(check
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DistractorCrosses { .. })));
    }

    #[test]
    fn short_segments_and_wrong_counts_flagged() {
        let spec = StimulusSpec::new(
            Task::CrsNcrs,
            1,
            vec![
                Segment::new(p(2.0, 2.0), p(8.0, 2.0)),
                Segment::new(p(2.0, 20.0), p(25.0, 20.0)),
            ],
            Polarity::WhiteOnDark,
        );
        assert!(matches!(
            verify_spec(&spec).violations[0],
            Violation::SegmentTooShort { index: 0, .. }
        ));
        let wrong = StimulusSpec::new(Task::AngTriLn, 1, spec.segments.clone(), Polarity::WhiteOnDark);
        assert!(matches!(
            verify_spec(&wrong).violations[0],
            Violation::SegmentCount { expected: 4, found: 2 }
        ));
    }

    #[test]
    fn tampered_metadata_detected() {
        let mut rng = Rng::new(3);
        let mut spec = gen_spec(Task::AngCrs, 0, &mut rng).unwrap();
        spec.metadata.angles[0] += 1.0;
        assert!(verify_spec(&spec).violations.contains(&Violation::MetadataMismatch));
    }

    #[test]
    fn invalid_label_rejected() {
        let mut rng = Rng::new(3);
        assert_eq!(gen_spec(Task::AngCrs, 2, &mut rng), Err(StimulusError::InvalidLabel(2)));
    }
}

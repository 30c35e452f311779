//! Beam engine: binary beam indices, placement constraints, optical
//! behaviours and the tracer that places elements while propagating beams.
//!
//! A beam is the straight-line polyline carrying one index. Index 1 is the
//! root of each source; a branching interaction on beam `i` emits the
//! transmitted (or zeroth-order) child `2i` and the reflected (or diffracted)
//! child `2i + 1`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{
    intersect_ray_axis, ray_segment_intersection, reflect_direction, Axis, Cardinal, GeometryError, Heading,
    Point2, Pose, Rect, Turn,
};

/// Hits closer than this to a ray origin are ignored.
const HIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeamError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("element `{element}`: {source}")]
    Constraint {
        element: String,
        #[source]
        source: GeometryError,
    },
    #[error("element `{element}`: diffracted order is evanescent (transverse component {transverse:.6})")]
    Evanescent { element: String, transverse: f64 },
    #[error("element `{element}`: beam grazes the optical axis")]
    Grazing { element: String },
    #[error("no Littrow solution for order {order} at {wavelength_nm} nm and {groove_density} lines/mm")]
    NoLittrowSolution {
        wavelength_nm: f64,
        groove_density: f64,
        order: i32,
    },
    #[error("element `{element}`: `{orientation}` orientation needs a {needs} behaviour")]
    OrientationMismatch {
        element: String,
        orientation: &'static str,
        needs: &'static str,
    },
    #[error("element `{element}`: reference element `{target}` is not placed yet")]
    UnknownReference { element: String, target: String },
    #[error("element `{element}` references beam {index} of source `{source_name}`, which never exists")]
    DanglingIndex {
        element: String,
        source_name: String,
        index: BeamIndex,
    },
    #[error("element `{element}` is queued on beam {index} after it already branched at `{branch}`")]
    AfterBranch {
        element: String,
        index: BeamIndex,
        branch: String,
    },
    #[error("element `{element}` references unknown source `{source_name}`")]
    UnknownSource { element: String, source_name: String },
    #[error("element `{element}` has no placement constraint")]
    MissingConstraint { element: String },
    #[error("source `{0}` lies outside the plate outline")]
    SourceOutside(String),
    #[error("beam {index} of `{source_name}` exceeds the maximum branching depth {max_depth}")]
    DepthExceeded {
        source_name: String,
        index: BeamIndex,
        max_depth: u32,
    },
    #[error("beam {index} of `{source_name}` exceeds {limit} interactions (optical loop?)")]
    InteractionLimit {
        source_name: String,
        index: BeamIndex,
        limit: usize,
    },
}

/// Binary beam index; the root is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeamIndex(pub u64);

impl BeamIndex {
    pub const ROOT: BeamIndex = BeamIndex(1);

    pub fn transmitted(self) -> BeamIndex {
        BeamIndex(self.0 << 1)
    }

    pub fn reflected(self) -> BeamIndex {
        BeamIndex((self.0 << 1) | 1)
    }

    pub fn parent(self) -> Option<BeamIndex> {
        (self.0 > 1).then_some(BeamIndex(self.0 >> 1))
    }

    /// Number of branchings since the root.
    pub fn depth(self) -> u32 {
        63 - self.0.leading_zeros()
    }

    /// Trunk beams are reached by transmission only: 0b1, 0b10, 0b100, ...
    pub fn is_trunk(self) -> bool {
        self.0.is_power_of_two()
    }
}

impl fmt::Display for BeamIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0b{:b}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid beam index `{0}` (expected a binary literal such as 0b110)")]
pub struct BeamIndexParseError(pub String);

impl FromStr for BeamIndex {
    type Err = BeamIndexParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("0b")
            .ok_or_else(|| BeamIndexParseError(s.to_string()))?;
        let v = u64::from_str_radix(digits, 2).map_err(|_| BeamIndexParseError(s.to_string()))?;
        if v == 0 {
            return Err(BeamIndexParseError(s.to_string()));
        }
        Ok(BeamIndex(v))
    }
}

impl Serialize for BeamIndex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BeamIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Paraxial state of a segment relative to its reference axis: lateral
/// offset `y` (mm) at the segment origin and angle `theta` (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RayState {
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementConstraint {
    Distance(f64),
    AbsX(f64),
    AbsY(f64),
}

impl PlacementConstraint {
    pub fn scaled(self, k: f64) -> Self {
        match self {
            PlacementConstraint::Distance(d) => PlacementConstraint::Distance(d * k),
            PlacementConstraint::AbsX(x) => PlacementConstraint::AbsX(x * k),
            PlacementConstraint::AbsY(y) => PlacementConstraint::AbsY(y * k),
        }
    }
}

/// Resolves a constraint from the last interaction point along the beam.
/// Returns the placement point and the distance travelled.
pub fn resolve_constraint(
    origin: Point2,
    heading: Heading,
    constraint: PlacementConstraint,
) -> Result<(Point2, f64), BeamError> {
    match constraint {
        PlacementConstraint::Distance(d) => {
            if !(d > 0.0) {
                return Err(BeamError::NonPositiveDistance(d));
            }
            Ok((origin + heading.unit() * d, d))
        }
        PlacementConstraint::AbsX(x) => intersect_ray_axis(origin, heading, Axis::X, x).map_err(|e| {
            BeamError::Constraint {
                element: String::new(),
                source: e,
            }
        }),
        PlacementConstraint::AbsY(y) => intersect_ray_axis(origin, heading, Axis::Y, y).map_err(|e| {
            BeamError::Constraint {
                element: String::new(),
                source: e,
            }
        }),
    }
}

/// How an element acts on a beam that reaches its aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OpticalBehavior {
    Mirror,
    Splitter,
    ThinLens {
        focal_length: f64,
    },
    Aom {
        /// Deflection per order, radians.
        deflection: f64,
        /// Drive frequency, MHz.
        rf_frequency: f64,
        order: i32,
        pass_zeroth: bool,
    },
    Grating {
        /// Lines per millimetre.
        groove_density: f64,
        order: i32,
        pass_zeroth: bool,
    },
    Iris {
        blocked: BTreeSet<BeamIndex>,
    },
    Sink,
    Inert,
}

impl OpticalBehavior {
    pub fn kind(&self) -> &'static str {
        match self {
            OpticalBehavior::Mirror => "mirror",
            OpticalBehavior::Splitter => "splitter",
            OpticalBehavior::ThinLens { .. } => "thin_lens",
            OpticalBehavior::Aom { .. } => "aom",
            OpticalBehavior::Grating { .. } => "grating",
            OpticalBehavior::Iris { .. } => "iris",
            OpticalBehavior::Sink => "sink",
            OpticalBehavior::Inert => "inert",
        }
    }

    /// Elements whose aperture plane is the reflecting surface.
    pub fn is_reflective(&self) -> bool {
        matches!(
            self,
            OpticalBehavior::Mirror | OpticalBehavior::Splitter | OpticalBehavior::Grating { .. }
        )
    }

    /// Elements that bend beams by refraction or diffraction rather than by
    /// a plane reflection.
    pub fn is_beam_shaping(&self) -> bool {
        matches!(
            self,
            OpticalBehavior::ThinLens { .. } | OpticalBehavior::Aom { .. } | OpticalBehavior::Grating { .. }
        )
    }
}

/// Child indices produced when beam `index` interacts with `behavior`.
pub fn child_indices(index: BeamIndex, behavior: &OpticalBehavior) -> Vec<BeamIndex> {
    match behavior {
        OpticalBehavior::Splitter => vec![index.transmitted(), index.reflected()],
        OpticalBehavior::Aom { pass_zeroth: true, .. } | OpticalBehavior::Grating { pass_zeroth: true, .. } => {
            vec![index.transmitted(), index.reflected()]
        }
        OpticalBehavior::Iris { blocked } if blocked.contains(&index) => vec![],
        OpticalBehavior::Sink => vec![],
        _ => vec![index],
    }
}

/// Littrow angle (radians from the grating normal) for the given order.
pub fn littrow_angle(wavelength_nm: f64, groove_density: f64, order: i32) -> Result<f64, BeamError> {
    let s = order as f64 * wavelength_nm * 1e-6 * groove_density / 2.0;
    if !(s.abs() <= 1.0) || order == 0 {
        return Err(BeamError::NoLittrowSolution {
            wavelength_nm,
            groove_density,
            order,
        });
    }
    Ok(s.asin())
}

/// How an element is oriented when placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Perpendicular fold for mirrors and splitters.
    Turn(Turn),
    /// Grid-aligned facing. Splitters reflect into the facing rotated a
    /// quarter turn counter-clockwise.
    Facing(Cardinal),
    /// Explicit surface normal (reflectors) or optical axis.
    Normal(Heading),
    /// Grating normal set for first-order retro-reflection.
    Littrow,
    /// Normal antiparallel to another placed element's normal.
    ParallelTo(String),
    /// Axis along the incoming beam.
    AlongBeam,
    /// Facing back along the incoming beam (retro-reflection for mirrors).
    Retro,
}

/// A placed element as seen by the tracer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalElement {
    pub name: String,
    pub pose: Pose,
    /// Surface normal for reflectors, optical axis otherwise.
    pub normal: Heading,
    pub behavior: OpticalBehavior,
    /// Full clear aperture width in the aperture plane.
    pub aperture: f64,
}

impl OpticalElement {
    pub fn aperture_segment(&self) -> (Point2, Point2) {
        let t = self.normal.unit().perp() * (self.aperture / 2.0);
        (self.pose.position - t, self.pose.position + t)
    }
}

/// Reference axis a segment's ray state is measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RefAxis {
    point: Point2,
    heading: Heading,
}

impl RefAxis {
    fn state_at(&self, p: Point2, h: Heading) -> RayState {
        RayState {
            y: (p - self.point).dot(self.heading.unit().perp()),
            theta: self.heading.delta_to(h),
        }
    }

    fn reflected(&self, surface_point: Point2, normal: Heading) -> RefAxis {
        let n = normal.unit();
        let d = (self.point - surface_point).dot(n);
        RefAxis {
            point: self.point - n * (2.0 * d),
            heading: reflect_direction(self.heading, normal),
        }
    }
}

/// A ray about to interact with an element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncomingRay {
    pub index: BeamIndex,
    pub point: Point2,
    pub heading: Heading,
    pub frequency_offset: f64,
}

/// One beam leaving an interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutgoingRay {
    pub index: BeamIndex,
    pub heading: Heading,
    pub frequency_offset: f64,
    kind: OutKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum OutKind {
    Straight,
    Reflected,
    Lens,
    Diffracted,
}

/// Result of a single interaction.
#[derive(Debug, Clone, PartialEq)]
pub enum Interaction {
    /// The beam continues under the same index.
    Continue(OutgoingRay),
    /// The beam ends and spawns two children.
    Branch(OutgoingRay, OutgoingRay),
    Absorbed,
    Blocked,
}

fn ray(index: BeamIndex, heading: Heading, f: f64, kind: OutKind) -> OutgoingRay {
    OutgoingRay {
        index,
        heading,
        frequency_offset: f,
        kind,
    }
}

/// Applies an element's behaviour to a ray that hits it.
pub fn interact(element: &OpticalElement, ray_in: &IncomingRay, wavelength_nm: f64) -> Result<Interaction, BeamError> {
    let i = ray_in.index;
    let f = ray_in.frequency_offset;
    let h = ray_in.heading;
    match &element.behavior {
        // Mirrors and gratings only work from the front; the back of the
        // part stops the beam.
        OpticalBehavior::Mirror | OpticalBehavior::Grating { .. } if h.unit().dot(element.normal.unit()) >= 0.0 => {
            Ok(Interaction::Blocked)
        }
        OpticalBehavior::Mirror => Ok(Interaction::Continue(ray(
            i,
            reflect_direction(h, element.normal),
            f,
            OutKind::Reflected,
        ))),
        OpticalBehavior::Splitter => Ok(Interaction::Branch(
            ray(i.transmitted(), h, f, OutKind::Straight),
            ray(i.reflected(), reflect_direction(h, element.normal), f, OutKind::Reflected),
        )),
        OpticalBehavior::ThinLens { focal_length } => {
            let d = h.unit();
            let mut a = element.normal.unit();
            if d.dot(a) < 0.0 {
                a = -a;
            }
            let along = d.dot(a);
            if along.abs() < 1e-12 {
                return Err(BeamError::Grazing {
                    element: element.name.clone(),
                });
            }
            let perp = a.perp();
            let y = (ray_in.point - element.pose.position).dot(perp);
            let slope = d.dot(perp) / along - y / focal_length;
            let out = (a + perp * slope).angle();
            Ok(Interaction::Continue(ray(i, out, f, OutKind::Lens)))
        }
        OpticalBehavior::Aom {
            deflection,
            rf_frequency,
            order,
            pass_zeroth,
        } => {
            let d = h.unit();
            let a = element.normal.unit();
            let s = a.perp();
            let t = d.dot(s) + *order as f64 * deflection.sin();
            if t.abs() >= 1.0 {
                return Err(BeamError::Evanescent {
                    element: element.name.clone(),
                    transverse: t,
                });
            }
            let l = d.dot(a).signum() * (1.0 - t * t).sqrt();
            let out = (a * l + s * t).angle();
            let shifted = f + *order as f64 * rf_frequency;
            if *pass_zeroth {
                Ok(Interaction::Branch(
                    ray(i.transmitted(), h, f, OutKind::Straight),
                    ray(i.reflected(), out, shifted, OutKind::Diffracted),
                ))
            } else {
                Ok(Interaction::Continue(ray(i, out, shifted, OutKind::Diffracted)))
            }
        }
        OpticalBehavior::Grating {
            groove_density,
            order,
            pass_zeroth,
        } => {
            let d = h.unit();
            let n = element.normal.unit();
            let tau = n.perp();
            let dn = d.dot(n);
            let t = d.dot(tau) + *order as f64 * wavelength_nm * 1e-6 * groove_density;
            if t.abs() > 1.0 {
                return Err(BeamError::Evanescent {
                    element: element.name.clone(),
                    transverse: t,
                });
            }
            let normal_part = -dn.signum() * (1.0 - t * t).sqrt();
            let out = (n * normal_part + tau * t).angle();
            let specular = reflect_direction(h, element.normal);
            if *pass_zeroth && *order != 0 {
                Ok(Interaction::Branch(
                    ray(i.transmitted(), specular, f, OutKind::Reflected),
                    ray(i.reflected(), out, f, OutKind::Diffracted),
                ))
            } else if *order == 0 {
                Ok(Interaction::Continue(ray(i, specular, f, OutKind::Reflected)))
            } else {
                Ok(Interaction::Continue(ray(i, out, f, OutKind::Diffracted)))
            }
        }
        OpticalBehavior::Iris { blocked } => {
            if blocked.contains(&i) {
                Ok(Interaction::Blocked)
            } else {
                Ok(Interaction::Continue(ray(i, h, f, OutKind::Straight)))
            }
        }
        OpticalBehavior::Sink => Ok(Interaction::Absorbed),
        OpticalBehavior::Inert => Ok(Interaction::Continue(ray(i, h, f, OutKind::Straight))),
    }
}

/// Straight piece of a beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSegment {
    pub index: BeamIndex,
    pub origin: Point2,
    pub heading: Heading,
    pub terminus: Option<Point2>,
    /// Accumulated frequency shift, MHz.
    pub frequency_offset: f64,
    pub ray_state: RayState,
    pub drill_width: f64,
    pub start_element: Option<String>,
    pub end_element: Option<String>,
}

impl BeamSegment {
    /// End point, using `fallback` as the length of an unterminated segment.
    pub fn end_or(&self, fallback: f64) -> Point2 {
        self.terminus
            .unwrap_or_else(|| self.origin + self.heading.unit() * fallback)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BeamFate {
    /// No further interaction and no bounds to escape from.
    Open,
    /// Left the plate outline.
    Escaped { at: Point2 },
    Absorbed { element: String },
    Blocked { element: String },
    Branched { element: String },
    Truncated { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub index: BeamIndex,
    pub segments: Vec<BeamSegment>,
    pub fate: BeamFate,
}

impl Beam {
    pub fn is_open(&self) -> bool {
        matches!(self.fate, BeamFate::Open | BeamFate::Escaped { .. })
    }

    /// True when no children were spawned.
    pub fn is_leaf(&self) -> bool {
        !matches!(self.fate, BeamFate::Branched { .. })
    }
}

/// All beams descending from one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamTree {
    pub source: String,
    pub origin: Point2,
    pub heading: Heading,
    pub drill_width: f64,
    pub beams: BTreeMap<BeamIndex, Beam>,
}

impl BeamTree {
    pub fn segments(&self) -> impl Iterator<Item = &BeamSegment> {
        self.beams.values().flat_map(|b| b.segments.iter())
    }
}

/// Beam source declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub name: String,
    pub origin: Point2,
    pub heading: Heading,
    pub drill_width: f64,
}

/// Element to be placed along a beam.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementSpec {
    pub name: String,
    pub source: String,
    pub index: BeamIndex,
    pub constraint: Option<PlacementConstraint>,
    pub orientation: Orientation,
    pub behavior: OpticalBehavior,
    pub aperture: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceLimits {
    pub max_depth: u32,
    pub max_interactions: usize,
}

impl Default for TraceLimits {
    fn default() -> Self {
        TraceLimits {
            max_depth: 16,
            max_interactions: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpec {
    pub sources: Vec<SourceSpec>,
    pub elements: Vec<ElementSpec>,
    /// Elements fixed at known poses before tracing starts.
    pub fixed: Vec<OpticalElement>,
    pub bounds: Option<Rect>,
    pub wavelength_nm: f64,
    pub limits: TraceLimits,
}

/// Where an element from `TraceSpec::elements` ended up.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub element: usize,
    pub pose: Pose,
    pub normal: Heading,
    /// Distance from the previous interaction point along the beam.
    pub distance: f64,
    /// Placed after its beam had already been stopped.
    pub dark: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueSeverity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceIssue {
    pub severity: IssueSeverity,
    pub error: BeamError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOutcome {
    pub trees: Vec<BeamTree>,
    pub placements: Vec<Placement>,
    pub issues: Vec<TraceIssue>,
}

impl TraceOutcome {
    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == IssueSeverity::Error)
    }

    pub fn tree(&self, source: &str) -> Option<&BeamTree> {
        self.trees.iter().find(|t| t.source == source)
    }

    pub fn placement_of(&self, element: usize) -> Option<&Placement> {
        self.placements.iter().find(|p| p.element == element)
    }
}

type Key = (usize, BeamIndex);

struct Cursor {
    point: Point2,
    heading: Heading,
    frequency: f64,
    axis: RefAxis,
    last: Option<usize>,
    interactions: usize,
}

struct Tracer<'a> {
    spec: &'a TraceSpec,
    world: Vec<OpticalElement>,
    /// Index into `spec.elements` for each world entry, `None` for fixed parts.
    world_origin: Vec<Option<usize>>,
    queues: BTreeMap<Key, VecDeque<usize>>,
    live: BTreeMap<Key, Cursor>,
    beams: Vec<BTreeMap<BeamIndex, Beam>>,
    placements: Vec<Placement>,
    issues: Vec<TraceIssue>,
}

/// Propagates every source, placing queued elements along their beams and
/// letting beams without queued elements run until they hit an aperture or
/// leave the bounds.
pub fn trace(spec: &TraceSpec) -> TraceOutcome {
    let mut t = Tracer {
        spec,
        world: spec.fixed.clone(),
        world_origin: vec![None; spec.fixed.len()],
        queues: BTreeMap::new(),
        live: BTreeMap::new(),
        beams: vec![BTreeMap::new(); spec.sources.len()],
        placements: Vec::new(),
        issues: Vec::new(),
    };
    t.run();
    let trees = spec
        .sources
        .iter()
        .zip(t.beams)
        .map(|(s, beams)| BeamTree {
            source: s.name.clone(),
            origin: s.origin,
            heading: s.heading,
            drill_width: s.drill_width,
            beams,
        })
        .collect();
    TraceOutcome {
        trees,
        placements: t.placements,
        issues: t.issues,
    }
}

impl<'a> Tracer<'a> {
    fn error(&mut self, e: BeamError) {
        self.issues.push(TraceIssue {
            severity: IssueSeverity::Error,
            error: e,
        });
    }

    fn warn(&mut self, e: BeamError) {
        self.issues.push(TraceIssue {
            severity: IssueSeverity::Warning,
            error: e,
        });
    }

    fn run(&mut self) {
        let spec = self.spec;
        for (ei, e) in spec.elements.iter().enumerate() {
            match spec.sources.iter().position(|s| s.name == e.source) {
                Some(si) => self.queues.entry((si, e.index)).or_default().push_back(ei),
                None => self.error(BeamError::UnknownSource {
                    element: e.name.clone(),
                    source_name: e.source.clone(),
                }),
            }
        }
        for (si, s) in spec.sources.iter().enumerate() {
            if let Some(b) = spec.bounds {
                if !b.contains(s.origin, 1e-9) {
                    self.error(BeamError::SourceOutside(s.name.clone()));
                    continue;
                }
            }
            self.live.insert(
                (si, BeamIndex::ROOT),
                Cursor {
                    point: s.origin,
                    heading: s.heading,
                    frequency: 0.0,
                    axis: RefAxis {
                        point: s.origin,
                        heading: s.heading,
                    },
                    last: None,
                    interactions: 0,
                },
            );
            self.beams[si].insert(
                BeamIndex::ROOT,
                Beam {
                    index: BeamIndex::ROOT,
                    segments: Vec::new(),
                    fate: BeamFate::Open,
                },
            );
        }

        loop {
            let queued = self
                .live
                .keys()
                .find(|k| self.queues.get(k).is_some_and(|q| !q.is_empty()))
                .copied();
            if let Some(key) = queued {
                let ei = self.queues.get_mut(&key).and_then(|q| q.pop_front()).expect("non-empty");
                self.place_queued(key, ei);
                continue;
            }
            let Some(&key) = self.live.keys().next() else { break };
            self.free_propagate(key);
        }

        // Whatever is still queued sits on a beam that never existed.
        let leftovers: Vec<(Key, usize)> = self
            .queues
            .iter()
            .flat_map(|(k, q)| q.iter().map(move |&e| (*k, e)))
            .collect();
        for ((si, index), ei) in leftovers {
            let e = &spec.elements[ei];
            let beam_exists = self.beams[si].get(&index);
            if let Some(Beam {
                fate: BeamFate::Branched { element },
                ..
            }) = beam_exists
            {
                let branch = element.clone();
                self.error(BeamError::AfterBranch {
                    element: e.name.clone(),
                    index,
                    branch,
                });
            } else {
                self.error(BeamError::DanglingIndex {
                    element: e.name.clone(),
                    source_name: spec.sources[si].name.clone(),
                    index,
                });
            }
        }
    }

    fn orient(&self, e: &ElementSpec, incoming: Heading) -> Result<(Heading, Heading), BeamError> {
        match &e.orientation {
            Orientation::Turn(t) => Ok((t.normal(), t.normal())),
            Orientation::Facing(c) => {
                let h = c.heading();
                if matches!(e.behavior, OpticalBehavior::Splitter) {
                    Ok((h, Turn::new(*c, c.rot90()).expect("quarter turn").normal()))
                } else {
                    Ok((h, h))
                }
            }
            Orientation::Normal(n) => Ok((*n, *n)),
            Orientation::Littrow => match e.behavior {
                OpticalBehavior::Grating {
                    groove_density, order, ..
                } => {
                    let th = littrow_angle(self.spec.wavelength_nm, groove_density, order)?;
                    let n = incoming.rotated(std::f64::consts::PI - th);
                    Ok((n, n))
                }
                _ => Err(BeamError::OrientationMismatch {
                    element: e.name.clone(),
                    orientation: "littrow",
                    needs: "grating",
                }),
            },
            Orientation::ParallelTo(target) => {
                let other = self
                    .world
                    .iter()
                    .find(|w| &w.name == target)
                    .ok_or_else(|| BeamError::UnknownReference {
                        element: e.name.clone(),
                        target: target.clone(),
                    })?;
                let n = other.normal.reversed();
                Ok((n, n))
            }
            Orientation::AlongBeam => Ok((incoming, incoming)),
            Orientation::Retro => Ok((incoming.reversed(), incoming.reversed())),
        }
    }

    fn place_queued(&mut self, key: Key, ei: usize) {
        let spec = self.spec;
        let e = &spec.elements[ei];
        let (origin, heading) = {
            let c = &self.live[&key];
            (c.point, c.heading)
        };
        let Some(constraint) = e.constraint else {
            self.error(BeamError::MissingConstraint { element: e.name.clone() });
            return;
        };
        let (pos, dist) = match resolve_constraint(origin, heading, constraint) {
            Ok(v) => v,
            Err(err) => {
                self.error(name_constraint_error(err, &e.name));
                return;
            }
        };
        let (pose_h, normal) = match self.orient(e, heading) {
            Ok(v) => v,
            Err(err) => {
                self.error(err);
                return;
            }
        };
        let placed = OpticalElement {
            name: e.name.clone(),
            pose: Pose::new(pos, pose_h),
            normal,
            behavior: e.behavior.clone(),
            aperture: e.aperture,
        };
        self.placements.push(Placement {
            element: ei,
            pose: placed.pose,
            normal,
            distance: dist,
            dark: false,
        });
        self.world.push(placed);
        self.world_origin.push(Some(ei));
        let wi = self.world.len() - 1;
        self.hit(key, wi, pos);
    }

    fn free_propagate(&mut self, key: Key) {
        let (origin, d, last) = {
            let c = &self.live[&key];
            (c.point, c.heading.unit(), c.last)
        };
        let mut best: Option<(f64, usize)> = None;
        for (wi, w) in self.world.iter().enumerate() {
            if Some(wi) == last || w.aperture <= 0.0 {
                continue;
            }
            let (a, b) = w.aperture_segment();
            if let Some((t, _)) = ray_segment_intersection(origin, d, a, b, 1e-9) {
                if t > HIT_EPS && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, wi));
                }
            }
        }
        match best {
            Some((t, wi)) => {
                let p = origin + d * t;
                self.hit(key, wi, p);
            }
            None => {
                let c = self.live.remove(&key).expect("live");
                let (end, fate) = match self.spec.bounds {
                    Some(b) => {
                        let t = b.exit_distance(c.point, c.heading);
                        let at = c.point + c.heading.unit() * t;
                        (Some(at), BeamFate::Escaped { at })
                    }
                    None => (None, BeamFate::Open),
                };
                self.push_segment(key, &c, end, None);
                self.set_fate(key, fate);
            }
        }
    }

    fn push_segment(&mut self, key: Key, c: &Cursor, terminus: Option<Point2>, end_element: Option<String>) {
        let (si, index) = key;
        let seg = BeamSegment {
            index,
            origin: c.point,
            heading: c.heading,
            terminus,
            frequency_offset: c.frequency,
            ray_state: c.axis.state_at(c.point, c.heading),
            drill_width: self.spec.sources[si].drill_width,
            start_element: c.last.map(|w| self.world[w].name.clone()),
            end_element,
        };
        self.beams[si].get_mut(&index).expect("beam exists").segments.push(seg);
    }

    fn set_fate(&mut self, key: Key, fate: BeamFate) {
        self.beams[key.0].get_mut(&key.1).expect("beam exists").fate = fate;
    }

    /// The beam `key` reaches world element `wi` at `p`.
    fn hit(&mut self, key: Key, wi: usize, p: Point2) {
        let spec = self.spec;
        let elem = self.world[wi].clone();
        let mut c = self.live.remove(&key).expect("live cursor");
        self.push_segment(key, &c, Some(p), Some(elem.name.clone()));
        c.interactions += 1;
        if c.interactions > spec.limits.max_interactions {
            self.set_fate(
                key,
                BeamFate::Truncated {
                    reason: "interaction limit".into(),
                },
            );
            self.warn(BeamError::InteractionLimit {
                source_name: spec.sources[key.0].name.clone(),
                index: key.1,
                limit: spec.limits.max_interactions,
            });
            self.place_dark(key, p, c.heading);
            return;
        }
        let incoming = IncomingRay {
            index: key.1,
            point: p,
            heading: c.heading,
            frequency_offset: c.frequency,
        };
        let result = match interact(&elem, &incoming, spec.wavelength_nm) {
            Ok(r) => r,
            Err(err) => {
                self.error(err);
                self.set_fate(
                    key,
                    BeamFate::Truncated {
                        reason: format!("interaction failed at `{}`", elem.name),
                    },
                );
                self.place_dark(key, p, c.heading);
                return;
            }
        };
        match result {
            Interaction::Continue(out) => {
                c.axis = next_axis(&c.axis, &elem, p, &out);
                c.point = p;
                c.heading = out.heading;
                c.frequency = out.frequency_offset;
                c.last = Some(wi);
                self.live.insert(key, c);
            }
            Interaction::Branch(a, b) => {
                self.set_fate(
                    key,
                    BeamFate::Branched {
                        element: elem.name.clone(),
                    },
                );
                if key.1.depth() + 1 > spec.limits.max_depth {
                    self.set_fate(
                        key,
                        BeamFate::Truncated {
                            reason: "maximum branching depth".into(),
                        },
                    );
                    self.warn(BeamError::DepthExceeded {
                        source_name: spec.sources[key.0].name.clone(),
                        index: key.1,
                        max_depth: spec.limits.max_depth,
                    });
                    return;
                }
                for out in [a, b] {
                    let child = Cursor {
                        point: p,
                        heading: out.heading,
                        frequency: out.frequency_offset,
                        axis: next_axis(&c.axis, &elem, p, &out),
                        last: Some(wi),
                        interactions: c.interactions,
                    };
                    self.beams[key.0].insert(
                        out.index,
                        Beam {
                            index: out.index,
                            segments: Vec::new(),
                            fate: BeamFate::Open,
                        },
                    );
                    self.live.insert((key.0, out.index), child);
                }
            }
            Interaction::Absorbed => {
                self.set_fate(key, BeamFate::Absorbed { element: elem.name });
                self.place_dark(key, p, c.heading);
            }
            Interaction::Blocked => {
                self.set_fate(key, BeamFate::Blocked { element: elem.name });
                self.place_dark(key, p, c.heading);
            }
        }
    }

    /// Places the rest of a stopped beam's queue along its line without
    /// further interaction.
    fn place_dark(&mut self, key: Key, mut origin: Point2, heading: Heading) {
        let spec = self.spec;
        let pending: Vec<usize> = self.queues.get_mut(&key).map(|q| q.drain(..).collect()).unwrap_or_default();
        for ei in pending {
            let e = &spec.elements[ei];
            let Some(constraint) = e.constraint else {
                self.error(BeamError::MissingConstraint { element: e.name.clone() });
                continue;
            };
            let (pos, dist) = match resolve_constraint(origin, heading, constraint) {
                Ok(v) => v,
                Err(err) => {
                    self.error(name_constraint_error(err, &e.name));
                    continue;
                }
            };
            let (pose_h, normal) = match self.orient(e, heading) {
                Ok(v) => v,
                Err(err) => {
                    self.error(err);
                    continue;
                }
            };
            self.placements.push(Placement {
                element: ei,
                pose: Pose::new(pos, pose_h),
                normal,
                distance: dist,
                dark: true,
            });
            self.world.push(OpticalElement {
                name: e.name.clone(),
                pose: Pose::new(pos, pose_h),
                normal,
                behavior: e.behavior.clone(),
                aperture: e.aperture,
            });
            self.world_origin.push(Some(ei));
            origin = pos;
        }
    }
}

fn name_constraint_error(err: BeamError, name: &str) -> BeamError {
    match err {
        BeamError::Constraint { source, .. } => BeamError::Constraint {
            element: name.to_string(),
            source,
        },
        other => other,
    }
}

fn next_axis(axis: &RefAxis, elem: &OpticalElement, p: Point2, out: &OutgoingRay) -> RefAxis {
    match out.kind {
        OutKind::Straight => *axis,
        OutKind::Reflected => axis.reflected(elem.pose.position, elem.normal),
        OutKind::Lens => {
            let mut a = elem.normal;
            if a.unit().dot(out.heading.unit()) < 0.0 {
                a = a.reversed();
            }
            RefAxis {
                point: elem.pose.position,
                heading: a,
            }
        }
        OutKind::Diffracted => RefAxis {
            point: p,
            heading: out.heading,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    #[test]
    fn index_display_and_parse() {
        assert_eq!(BeamIndex(0b1110).to_string(), "0b1110");
        assert_eq!("0b111".parse::<BeamIndex>().unwrap(), BeamIndex(7));
        assert!("111".parse::<BeamIndex>().is_err());
        assert!("0b0".parse::<BeamIndex>().is_err());
        assert_eq!(BeamIndex(0b110).parent(), Some(BeamIndex(0b11)));
        assert_eq!(BeamIndex::ROOT.parent(), None);
        assert_eq!(BeamIndex(0b1011).depth(), 3);
    }

    #[test]
    fn non_positive_distance_is_rejected() {
        let r = resolve_constraint(Vec2::ZERO, Heading::RIGHT, PlacementConstraint::Distance(0.0));
        assert_eq!(r, Err(BeamError::NonPositiveDistance(0.0)));
    }

    #[test]
    fn iris_blocks_only_listed_indices() {
        let iris = OpticalBehavior::Iris {
            blocked: [BeamIndex(0b10)].into_iter().collect(),
        };
        assert!(child_indices(BeamIndex(0b10), &iris).is_empty());
        assert_eq!(child_indices(BeamIndex(0b11), &iris), vec![BeamIndex(0b11)]);
    }
}

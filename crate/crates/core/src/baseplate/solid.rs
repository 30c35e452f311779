//! Subtractive description of a plate: a rectangular block minus holes,
//! pockets and beam channels.

use serde::{Deserialize, Serialize};

use super::collide::{shape_inside_rect, shapes_overlap, TOUCH_TOL};
use super::Plate;
use crate::beam::BeamIndex;
use crate::components::{Counterbore, DrillFeature, HoleDepth, PocketDepth, Shape, Side};
use crate::diagnostics::Diagnostic;
use crate::geometry::{circle_polygon, Heading, Point2, Pose, Rect, Vec2, INCH};

/// Clearance hole for a 1/4-20 or M6 cap screw into the table.
pub const GRID_HOLE_DIAMETER: f64 = 6.6;
pub const GRID_COUNTERBORE_DIAMETER: f64 = 11.0;
pub const GRID_COUNTERBORE_DEPTH: f64 = 6.5;
/// Clearance between a grid counterbore and the plate edge, mm.
pub const GRID_EDGE_MARGIN: f64 = 1.0;
/// Segments used to approximate circles in meshes and overlap tests.
pub const CIRCLE_SEGMENTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureOrigin {
    /// Table mounting hole.
    Grid,
    Element { name: String },
    Beam { source: String, index: BeamIndex },
}

/// A machining feature in plate coordinates. Depths are measured from the
/// top surface unless a counterbore says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum PlateFeature {
    Hole {
        at: Point2,
        diameter: f64,
        depth: HoleDepth,
        counterbore: Option<Counterbore>,
        thread: Option<String>,
        origin: FeatureOrigin,
    },
    Pocket {
        center: Point2,
        /// Direction of the `length` side.
        heading: Heading,
        width: f64,
        length: f64,
        depth: f64,
        origin: FeatureOrigin,
    },
    Channel {
        from: Point2,
        to: Point2,
        width: f64,
        depth: f64,
        origin: FeatureOrigin,
    },
}

/// Which part of the plate thickness a cut removes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutSpan {
    Through,
    /// From the top surface down by the given depth.
    Top(f64),
    /// From the bottom surface up by the given depth.
    Bottom(f64),
}

/// A prismatic cut: a convex plan polygon and a depth span.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub polygon: Vec<Point2>,
    pub span: CutSpan,
}

fn rect_polygon(center: Point2, heading: Heading, length: f64, width: f64) -> Vec<Point2> {
    let pose = Pose::new(center, heading);
    let (hx, hy) = (length / 2.0, width / 2.0);
    [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
        .iter()
        .map(|&(x, y)| pose.apply(Vec2::new(x, y)))
        .collect()
}

impl PlateFeature {
    pub fn origin(&self) -> &FeatureOrigin {
        match self {
            PlateFeature::Hole { origin, .. } | PlateFeature::Pocket { origin, .. } | PlateFeature::Channel { origin, .. } => origin,
        }
    }

    /// Largest plan outline of the feature.
    pub fn plan_shape(&self) -> Shape {
        match self {
            PlateFeature::Hole {
                at, diameter, counterbore, ..
            } => Shape::Disc {
                center: *at,
                radius: counterbore.map_or(*diameter, |c| c.diameter.max(*diameter)) / 2.0,
            },
            PlateFeature::Pocket {
                center,
                heading,
                width,
                length,
                ..
            } => Shape::Polygon(rect_polygon(*center, *heading, *length, *width)),
            PlateFeature::Channel { from, to, width, .. } => {
                let d = *to - *from;
                Shape::Polygon(rect_polygon((*from + *to) * 0.5, d.angle(), d.norm(), *width))
            }
        }
    }

    /// Prismatic cuts making up the feature on a plate of thickness `dz`.
    pub fn cuts(&self, dz: f64) -> Vec<Cut> {
        match self {
            PlateFeature::Hole {
                at,
                diameter,
                depth,
                counterbore,
                ..
            } => {
                let mut v = vec![Cut {
                    polygon: circle_polygon(*at, diameter / 2.0, CIRCLE_SEGMENTS),
                    span: match depth {
                        HoleDepth::Through => CutSpan::Through,
                        HoleDepth::Blind(d) if *d >= dz => CutSpan::Through,
                        HoleDepth::Blind(d) => CutSpan::Top(*d),
                    },
                }];
                if let Some(c) = counterbore {
                    v.push(Cut {
                        polygon: circle_polygon(*at, c.diameter / 2.0, CIRCLE_SEGMENTS),
                        span: match c.side {
                            Side::Top => CutSpan::Top(c.depth),
                            Side::Bottom => CutSpan::Bottom(c.depth),
                        },
                    });
                }
                v
            }
            PlateFeature::Pocket {
                center,
                heading,
                width,
                length,
                depth,
                ..
            } => vec![Cut {
                polygon: rect_polygon(*center, *heading, *length, *width),
                span: if *depth >= dz { CutSpan::Through } else { CutSpan::Top(*depth) },
            }],
            PlateFeature::Channel { depth, .. } => {
                let Shape::Polygon(polygon) = self.plan_shape() else { unreachable!() };
                vec![Cut {
                    polygon,
                    span: if *depth >= dz { CutSpan::Through } else { CutSpan::Top(*depth) },
                }]
            }
        }
    }
}

/// Drill features of every element, transformed into plate coordinates.
fn element_features(plate: &Plate, diags: &mut Vec<Diagnostic>) -> Vec<PlateFeature> {
    let mut out = Vec::new();
    for e in &plate.elements {
        let iface = e.component.plate_interface();
        let datum = iface.datum_pose(&e.pose);
        let origin = FeatureOrigin::Element { name: e.name.clone() };
        for d in &iface.drill {
            match d {
                DrillFeature::Hole {
                    at,
                    diameter,
                    depth,
                    counterbore,
                    thread,
                } => out.push(PlateFeature::Hole {
                    at: datum.apply(*at),
                    diameter: *diameter,
                    depth: *depth,
                    counterbore: *counterbore,
                    thread: thread.clone(),
                    origin: origin.clone(),
                }),
                DrillFeature::Pocket {
                    at,
                    width,
                    length,
                    depth,
                    tolerance,
                } => {
                    let depth = match depth {
                        PocketDepth::Fixed(z) => *z,
                        PocketDepth::Auto => match iface.optical_center.height {
                            Some(h) => h - plate.optics_dz,
                            None => {
                                diags.push(Diagnostic::error(
                                    "solid.pocket",
                                    e.name.clone(),
                                    format!("`{}` asks for an automatic pocket but has no fixed optical height", iface.id),
                                ));
                                continue;
                            }
                        },
                    };
                    if depth <= 1e-9 {
                        // At beam height no pocket is needed; below it rule.height reports it.
                        continue;
                    }
                    if depth >= plate.dz {
                        diags.push(Diagnostic::error(
                            "solid.pocket",
                            e.name.clone(),
                            format!("pocket for `{}` is {depth:.3} mm deep, plate is {:.3} mm", e.name, plate.dz),
                        ));
                        continue;
                    }
                    out.push(PlateFeature::Pocket {
                        center: datum.apply(*at),
                        heading: datum.heading,
                        width: width + tolerance,
                        length: length + tolerance,
                        depth,
                        origin: origin.clone(),
                    });
                }
                DrillFeature::Channel { from, to, width, depth } => out.push(PlateFeature::Channel {
                    from: datum.apply(*from),
                    to: datum.apply(*to),
                    width: *width,
                    depth: *depth,
                    origin: origin.clone(),
                }),
            }
        }
    }
    out
}

fn snap_key(p: Point2) -> (i64, i64) {
    ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64)
}

/// One channel per distinct beam segment when the beam runs below the top
/// surface. Retraced segments share a channel.
fn beam_channels(plate: &Plate) -> Vec<PlateFeature> {
    if plate.optics_dz >= 0.0 {
        return Vec::new();
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    let reach = plate.dx + plate.dy;
    for tree in &plate.trees {
        for seg in tree.segments() {
            let (a, b) = (seg.origin, seg.end_or(reach));
            if a.distance(b) < 1e-9 {
                continue;
            }
            let (ka, kb) = (snap_key(a), snap_key(b));
            if !seen.insert((ka.min(kb), ka.max(kb))) {
                continue;
            }
            let width = seg.drill_width;
            out.push(PlateFeature::Channel {
                from: a,
                to: b,
                width,
                depth: -plate.optics_dz + width / 2.0,
                origin: FeatureOrigin::Beam {
                    source: tree.source.clone(),
                    index: seg.index,
                },
            });
        }
    }
    out
}

/// Odd-inch mounting holes that fit inside the machinable outline and
/// clear every part, drill feature and channel.
fn grid_holes(plate: &Plate, occupied: &[Shape]) -> Vec<PlateFeature> {
    let phys = plate.physical_outline();
    let cb_depth = GRID_COUNTERBORE_DEPTH.min(plate.dz / 2.0);
    let r = GRID_COUNTERBORE_DIAMETER / 2.0 + GRID_EDGE_MARGIN;
    let mut out = Vec::new();
    let nx = (plate.dx / INCH).floor() as i64;
    let ny = (plate.dy / INCH).floor() as i64;
    for i in (1..=nx).step_by(2) {
        for j in (1..=ny).step_by(2) {
            let at = Vec2::new(i as f64 * INCH, j as f64 * INCH);
            let keep_out = Shape::Disc { center: at, radius: r };
            if !shape_inside_rect(&keep_out, &phys, 0.0) {
                continue;
            }
            let cb = Shape::Disc {
                center: at,
                radius: GRID_COUNTERBORE_DIAMETER / 2.0,
            };
            if occupied.iter().any(|s| shapes_overlap(&cb, s, TOUCH_TOL)) {
                continue;
            }
            out.push(PlateFeature::Hole {
                at,
                diameter: GRID_HOLE_DIAMETER,
                depth: HoleDepth::Through,
                counterbore: Some(Counterbore {
                    diameter: GRID_COUNTERBORE_DIAMETER,
                    depth: cb_depth,
                    side: Side::Top,
                }),
                thread: None,
                origin: FeatureOrigin::Grid,
            });
        }
    }
    out
}

/// All features of a traced plate: grid holes first, then element
/// features in element order, then channels.
pub fn collect_features(plate: &Plate) -> (Vec<PlateFeature>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let elements = element_features(plate, &mut diags);
    let channels = beam_channels(plate);
    let mut occupied: Vec<Shape> = plate.elements.iter().flat_map(|e| e.outlines()).collect();
    occupied.extend(elements.iter().chain(&channels).map(PlateFeature::plan_shape));
    let phys = plate.physical_outline();
    for f in &elements {
        if !shape_inside_rect(&f.plan_shape(), &phys, 1e-9) {
            let FeatureOrigin::Element { name } = f.origin() else { continue };
            diags.push(Diagnostic::error(
                "solid.outside",
                name.clone(),
                format!("a drill feature of `{name}` lies outside the plate outline"),
            ));
        }
    }
    let mut all = grid_holes(plate, &occupied);
    all.extend(elements);
    all.extend(channels);
    diags.sort();
    diags.dedup();
    (all, diags)
}

/// Block plus features, ready for meshing.
#[derive(Debug, Clone, PartialEq)]
pub struct Solid {
    /// Machinable outline in plate coordinates.
    pub outline: Rect,
    pub dz: f64,
    pub features: Vec<PlateFeature>,
}

impl Solid {
    pub fn new(outline: Rect, dz: f64) -> Self {
        Solid {
            outline,
            dz,
            features: Vec::new(),
        }
    }

    pub fn cuts(&self) -> Vec<Cut> {
        self.features.iter().flat_map(|f| f.cuts(self.dz)).collect()
    }
}

pub fn build_solid(plate: &Plate) -> Solid {
    Solid {
        outline: plate.physical_outline(),
        dz: plate.dz,
        features: plate.features.clone(),
    }
}

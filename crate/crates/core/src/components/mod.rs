//! Component catalog: parametric component definitions, optic-type tables
//! mapping abstract roles to concrete parts, the Littrow grating mount
//! generator and mesh-backed custom components.

mod catalog;
pub mod grating;
pub mod mesh_import;
mod optic_type;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::OpticalBehavior;
use crate::expr::ExprError;
use crate::geometry::{Point2, Pose, Vec2};

pub use catalog::{layered_catalog, load_catalog, Catalog, CatalogSource, ComponentDef};
pub use optic_type::{resolve_role, OpticTypeTable, ResolvedRole, RoleBinding};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read catalog `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("duplicate {kind} id `{id}` in `{second}` (first defined in `{first}`)")]
    Duplicate {
        kind: &'static str,
        id: String,
        first: String,
        second: String,
    },
    #[error("component `{component}` references unknown mount `{mount}`")]
    DanglingMount { component: String, mount: String },
    #[error("mount chain of `{0}` is cyclic")]
    MountCycle(String),
    #[error("{file}: component `{id}`: {message}")]
    Invalid { file: String, id: String, message: String },
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{component}` has no parameter `{param}`")]
    UnknownParam { component: String, param: String },
    #[error("component `{component}`: {source}")]
    Expr {
        component: String,
        #[source]
        source: ExprError,
    },
    #[error("unknown optic type `{0}`")]
    UnknownOpticType(String),
    #[error("optic type `{optic_type}` has no role `{role}`")]
    UnknownRole { optic_type: String, role: String },
    #[error("mesh `{path}`: {message}")]
    Mesh { path: String, message: String },
}

/// Planar outline in the component's local frame, centred on its datum.
/// Local x runs along the placement heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum Footprint {
    /// `depth` along local x, `width` along local y.
    Rect { width: f64, depth: f64, height: f64 },
    Disc { diameter: f64, height: f64 },
}

impl Footprint {
    pub fn height(&self) -> f64 {
        match self {
            Footprint::Rect { height, .. } | Footprint::Disc { height, .. } => *height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counterbore {
    pub diameter: f64,
    pub depth: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleDepth {
    Through,
    Blind(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PocketDepth {
    /// Deep enough to bring the optical centre down to the beam plane.
    Auto,
    Fixed(f64),
}

/// Machining feature in the component's local frame (relative to its datum).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum DrillFeature {
    Hole {
        at: Vec2,
        diameter: f64,
        depth: HoleDepth,
        counterbore: Option<Counterbore>,
        thread: Option<String>,
    },
    Pocket {
        at: Vec2,
        /// Along local y.
        width: f64,
        /// Along local x.
        length: f64,
        depth: PocketDepth,
        tolerance: f64,
    },
    Channel {
        from: Vec2,
        to: Vec2,
        width: f64,
        depth: f64,
    },
}

/// Where the optical centre sits relative to the datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalCenter {
    pub offset: Vec2,
    /// Height above the component's base; `None` when adjustable.
    pub height: Option<f64>,
}

/// A fully evaluated component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub id: String,
    pub description: String,
    pub params: BTreeMap<String, f64>,
    pub footprint: Footprint,
    pub optical_center: OpticalCenter,
    pub aperture: f64,
    pub behavior: Option<OpticalBehavior>,
    pub drill: Vec<DrillFeature>,
    pub mount_chain: Vec<String>,
}

impl ComponentSpec {
    /// Datum pose for an optical centre placed at `optical`.
    pub fn datum_pose(&self, optical: &Pose) -> Pose {
        let off = self.optical_center.offset;
        Pose::new(optical.apply(Vec2::new(-off.x, -off.y)), optical.heading)
    }

    /// Footprint outline for an optical centre placed at `optical`.
    pub fn outline(&self, optical: &Pose) -> Shape {
        let datum = self.datum_pose(optical);
        match self.footprint {
            Footprint::Rect { width, depth, .. } => {
                let (hx, hy) = (depth / 2.0, width / 2.0);
                Shape::Polygon(
                    [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
                        .iter()
                        .map(|&(x, y)| datum.apply(Vec2::new(x, y)))
                        .collect(),
                )
            }
            Footprint::Disc { diameter, .. } => Shape::Disc {
                center: datum.position,
                radius: diameter / 2.0,
            },
        }
    }
}

/// A placed planar outline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Shape {
    /// Convex polygon, counter-clockwise.
    Polygon(Vec<Point2>),
    Disc { center: Point2, radius: f64 },
}

impl Shape {
    pub fn bounds(&self) -> crate::geometry::Rect {
        match self {
            Shape::Polygon(p) => crate::geometry::Rect::bounding(p),
            Shape::Disc { center, radius } => crate::geometry::Rect::new(
                *center - Vec2::new(*radius, *radius),
                *center + Vec2::new(*radius, *radius),
            ),
        }
    }
}

/// An optic together with the mounts that hold it, outermost last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedComponent {
    pub optic: ComponentSpec,
    pub mounts: Vec<ComponentSpec>,
}

impl ResolvedComponent {
    /// The part that sits on the plate and carries the machining features.
    pub fn plate_interface(&self) -> &ComponentSpec {
        self.mounts.last().unwrap_or(&self.optic)
    }

    pub fn parts(&self) -> impl Iterator<Item = &ComponentSpec> {
        std::iter::once(&self.optic).chain(self.mounts.iter())
    }
}

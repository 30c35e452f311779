//! Baseplates: beam sources, elements placed along beams, design-rule
//! lints, collision checks and the subtractive solid description.

pub mod collide;
pub mod mesher;
pub mod rules;
pub mod solid;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{
    trace, BeamError, BeamIndex, BeamTree, ElementSpec, IssueSeverity, OpticalBehavior, OpticalElement, Orientation,
    PlacementConstraint, SourceSpec, TraceLimits, TraceSpec,
};
use crate::components::{ComponentSpec, ResolvedComponent, Shape};
use crate::diagnostics::Diagnostic;
use crate::geometry::{Heading, Point2, Pose, Rect};

pub use collide::{detect_collisions, segment_crosses_shape, shape_inside_rect, shapes_overlap};
pub use rules::check_design_rules;
pub use mesher::{mesh_solid, MeshingError};
pub use solid::{build_solid, collect_features, Cut, CutSpan, FeatureOrigin, PlateFeature, Solid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlateError {
    #[error("plate dimensions must be positive (dx={dx}, dy={dy}, dz={dz})")]
    Dimensions { dx: f64, dy: f64, dz: f64 },
    #[error("edge gap {gap} must be non-negative and leave material inside the plate")]
    Gap { gap: f64 },
    #[error("beam `{name}` starts at ({x:.3}, {y:.3}), outside the plate outline")]
    SourceOutside { name: String, x: f64, y: f64 },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("element `{element}` references unknown beam `{source_name}`")]
    UnknownSource { element: String, source_name: String },
    #[error("component `{component}` of `{element}` has no optical behavior and cannot be placed on a beam")]
    NotOptical { element: String, component: String },
}

/// A beam source registered on a plate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSource {
    pub name: String,
    pub origin: Point2,
    pub heading: Heading,
    pub drill_width: f64,
}

/// How a beam-placed element was positioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementPlacement {
    pub source: String,
    pub index: BeamIndex,
    pub constraint: PlacementConstraint,
    /// Distance travelled from the previous interaction point.
    pub distance: f64,
    /// Placed on a beam that had already been stopped.
    pub dark: bool,
    /// The constraint came from the optic-type table rather than the
    /// layout (and so does not scale with it).
    pub from_role: bool,
}

/// An element with its resolved pose. `pose` locates the optical centre
/// in plate coordinates; its heading is the element's facing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedElement {
    pub name: String,
    pub role: Option<String>,
    pub component: ResolvedComponent,
    pub pose: Pose,
    pub table_pose: Pose,
    /// Surface normal for reflectors, optical axis otherwise.
    pub normal: Heading,
    /// `None` for parts fixed at explicit coordinates.
    pub placement: Option<ElementPlacement>,
}

impl PlacedElement {
    pub fn behavior(&self) -> Option<&OpticalBehavior> {
        self.component.optic.behavior.as_ref()
    }

    /// Every part of the element with its datum pose.
    pub fn parts(&self) -> impl Iterator<Item = (&ComponentSpec, Pose)> {
        self.component.parts().map(move |p| (p, p.datum_pose(&self.pose)))
    }

    /// Plan outlines of the optic and all its mounts.
    pub fn outlines(&self) -> Vec<Shape> {
        self.component.parts().map(|p| p.outline(&self.pose)).collect()
    }

    pub fn optical(&self) -> Option<OpticalElement> {
        self.behavior().map(|b| OpticalElement {
            name: self.name.clone(),
            pose: self.pose,
            normal: self.normal,
            behavior: b.clone(),
            aperture: self.component.optic.aperture,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Declared {
    Part(PlacedElement),
    Along {
        name: String,
        role: Option<String>,
        component: ResolvedComponent,
        source: String,
        index: BeamIndex,
        constraint: Option<PlacementConstraint>,
        from_role: bool,
        orientation: Orientation,
    },
}

impl Declared {
    fn name(&self) -> &str {
        match self {
            Declared::Part(p) => &p.name,
            Declared::Along { name, .. } => name,
        }
    }
}

/// A rectangular plate on the table grid. Plate coordinates have their
/// origin at the lower-left corner of the nominal outline; `pose` places
/// that corner on the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plate {
    pub name: String,
    pub template: String,
    pub optic_type: String,
    pub scale: f64,
    pub label: Option<String>,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub gap: f64,
    /// Height of the beam plane above the top surface; negative when the
    /// optics are inset into the plate.
    pub optics_dz: f64,
    pub pose: Pose,
    pub sources: Vec<BeamSource>,
    pub elements: Vec<PlacedElement>,
    pub trees: Vec<BeamTree>,
    pub features: Vec<PlateFeature>,
    #[serde(skip)]
    declared: Vec<Declared>,
}

impl Plate {
    pub fn new(name: &str, dx: f64, dy: f64, dz: f64, gap: f64, optics_dz: f64, pose: Pose) -> Result<Plate, PlateError> {
        if !(dx > 0.0 && dy > 0.0 && dz > 0.0) {
            return Err(PlateError::Dimensions { dx, dy, dz });
        }
        if !(gap >= 0.0 && 2.0 * gap < dx.min(dy)) {
            return Err(PlateError::Gap { gap });
        }
        Ok(Plate {
            name: name.to_string(),
            template: String::new(),
            optic_type: String::new(),
            scale: 1.0,
            label: None,
            dx,
            dy,
            dz,
            gap,
            optics_dz,
            pose,
            sources: Vec::new(),
            elements: Vec::new(),
            trees: Vec::new(),
            features: Vec::new(),
            declared: Vec::new(),
        })
    }

    /// Nominal outline on the table grid, plate coordinates.
    pub fn outline(&self) -> Rect {
        Rect::from_size(self.dx, self.dy)
    }

    /// Outline of the material actually machined: nominal minus the gap.
    pub fn physical_outline(&self) -> Rect {
        self.outline().inset(self.gap)
    }

    /// Corners of the nominal outline in table coordinates.
    pub fn table_corners(&self) -> [Point2; 4] {
        self.outline().corners().map(|c| self.pose.apply(c))
    }

    fn name_taken(&self, name: &str) -> bool {
        self.declared.iter().any(|d| d.name() == name) || self.elements.iter().any(|e| e.name == name)
    }

    /// Registers a root beam (index 0b1) starting at `(x, y)`.
    pub fn add_beam_path(&mut self, name: &str, x: f64, y: f64, heading: Heading, drill_width: f64) -> Result<(), PlateError> {
        let origin = Point2::new(x, y);
        if !self.outline().contains(origin, 1e-9) {
            return Err(PlateError::SourceOutside {
                name: name.to_string(),
                x,
                y,
            });
        }
        if self.sources.iter().any(|s| s.name == name) {
            return Err(PlateError::DuplicateName(name.to_string()));
        }
        self.sources.push(BeamSource {
            name: name.to_string(),
            origin,
            heading,
            drill_width,
        });
        Ok(())
    }

    /// Queues an element on beam `index` of `source`; its pose is resolved
    /// by [`Plate::trace`].
    #[allow(clippy::too_many_arguments)]
    pub fn place_element_along_beam(
        &mut self,
        name: &str,
        role: Option<&str>,
        component: ResolvedComponent,
        source: &str,
        index: BeamIndex,
        constraint: Option<PlacementConstraint>,
        from_role: bool,
        orientation: Orientation,
    ) -> Result<(), PlateError> {
        if self.name_taken(name) {
            return Err(PlateError::DuplicateName(name.to_string()));
        }
        if !self.sources.iter().any(|s| s.name == source) {
            return Err(PlateError::UnknownSource {
                element: name.to_string(),
                source_name: source.to_string(),
            });
        }
        if component.optic.behavior.is_none() {
            return Err(PlateError::NotOptical {
                element: name.to_string(),
                component: component.optic.id.clone(),
            });
        }
        self.declared.push(Declared::Along {
            name: name.to_string(),
            role: role.map(str::to_string),
            component,
            source: source.to_string(),
            index,
            constraint,
            from_role,
            orientation,
        });
        Ok(())
    }

    /// Adds a part at a fixed pose (optical centre and facing).
    pub fn add_part(&mut self, name: &str, role: Option<&str>, component: ResolvedComponent, pose: Pose) -> Result<(), PlateError> {
        if self.name_taken(name) {
            return Err(PlateError::DuplicateName(name.to_string()));
        }
        self.declared.push(Declared::Part(PlacedElement {
            name: name.to_string(),
            role: role.map(str::to_string),
            component,
            pose,
            table_pose: self.pose.compose(&pose),
            normal: pose.heading,
            placement: None,
        }));
        Ok(())
    }

    /// Traces all sources, resolving queued elements. Elements whose
    /// placement fails are dropped and reported.
    pub fn trace(&mut self, wavelength_nm: f64, limits: TraceLimits) -> Vec<Diagnostic> {
        let declared = std::mem::take(&mut self.declared);
        let mut along = Vec::new();
        let mut fixed = Vec::new();
        for d in &declared {
            match d {
                Declared::Part(p) => {
                    if let Some(o) = p.optical() {
                        fixed.push(o);
                    }
                }
                Declared::Along {
                    name,
                    component,
                    source,
                    index,
                    constraint,
                    orientation,
                    ..
                } => along.push(ElementSpec {
                    name: name.clone(),
                    source: source.clone(),
                    index: *index,
                    constraint: *constraint,
                    orientation: orientation.clone(),
                    behavior: component.optic.behavior.clone().expect("checked when queued"),
                    aperture: component.optic.aperture,
                }),
            }
        }
        let spec = TraceSpec {
            sources: self
                .sources
                .iter()
                .map(|s| SourceSpec {
                    name: s.name.clone(),
                    origin: s.origin,
                    heading: s.heading,
                    drill_width: s.drill_width,
                })
                .collect(),
            elements: along,
            fixed,
            bounds: Some(self.outline()),
            wavelength_nm,
            limits,
        };
        let outcome = trace(&spec);
        let diags: Vec<Diagnostic> = outcome.issues.iter().map(|i| issue_diagnostic(i.severity, &i.error)).collect();
        let mut k = 0;
        for d in declared {
            match d {
                Declared::Part(p) => self.elements.push(p),
                Declared::Along {
                    name,
                    role,
                    component,
                    source,
                    index,
                    constraint,
                    from_role,
                    ..
                } => {
                    let ei = k;
                    k += 1;
                    let Some(pl) = outcome.placement_of(ei) else { continue };
                    let Some(constraint) = constraint else { continue };
                    self.elements.push(PlacedElement {
                        name,
                        role,
                        component,
                        pose: pl.pose,
                        table_pose: self.pose.compose(&pl.pose),
                        normal: pl.normal,
                        placement: Some(ElementPlacement {
                            source,
                            index,
                            constraint,
                            distance: pl.distance,
                            dark: pl.dark,
                            from_role,
                        }),
                    });
                }
            }
        }
        self.trees = outcome.trees;
        diags
    }

    pub fn element(&self, name: &str) -> Option<&PlacedElement> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn tree(&self, source: &str) -> Option<&BeamTree> {
        self.trees.iter().find(|t| t.source == source)
    }
}

/// Maps a tracer issue onto a diagnostic code.
fn issue_diagnostic(sev: IssueSeverity, e: &BeamError) -> Diagnostic {
    let (code, subject) = match e {
        BeamError::DanglingIndex { element, .. } | BeamError::AfterBranch { element, .. } => {
            ("trace.dangling", element.clone())
        }
        BeamError::Constraint { element, .. }
        | BeamError::Grazing { element }
        | BeamError::MissingConstraint { element } => ("trace.constraint", element.clone()),
        BeamError::NonPositiveDistance(_) => ("trace.constraint", String::new()),
        BeamError::Evanescent { element, .. } => ("trace.evanescent", element.clone()),
        BeamError::OrientationMismatch { element, .. } | BeamError::UnknownReference { element, .. } => {
            ("trace.orientation", element.clone())
        }
        BeamError::NoLittrowSolution { .. } => ("trace.orientation", String::new()),
        BeamError::UnknownSource { element, .. } => ("trace.source", element.clone()),
        BeamError::SourceOutside(s) => ("trace.source", s.clone()),
        BeamError::DepthExceeded { source_name, index, .. } => ("trace.depth", format!("{source_name}:{index}")),
        BeamError::InteractionLimit { source_name, index, .. } => ("trace.loop", format!("{source_name}:{index}")),
    };
    match sev {
        IssueSeverity::Error => Diagnostic::error(code, subject, e.to_string()),
        IssueSeverity::Warning => Diagnostic::warning(code, subject, e.to_string()),
    }
}

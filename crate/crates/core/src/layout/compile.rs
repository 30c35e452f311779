//! Compile pipeline: optic-type substitution, scaling, tracing, checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::document::{
    generate_grid, parse_templates, ConstraintKind, ElementDecl, ElementKind, InstanceDecl, LayoutDocument,
    MountChoice, Target, Template,
};
use super::syntax::ParseError;
use crate::baseplate::collide::detect_plate_overlaps;
use crate::baseplate::{check_design_rules, collect_features, detect_collisions, Plate};
use crate::beam::{BeamFate, OpticalBehavior, Orientation, PlacementConstraint, TraceLimits};
use crate::components::{Catalog, CatalogSource, OpticTypeTable, ResolvedComponent};
use crate::diagnostics::{sort_diagnostics, Diagnostic};
use crate::expr::{Expr, Scope};
use crate::geometry::{Cardinal, Heading, Point2, Pose, Rect, Turn, Vec2, INCH};

/// Templates shipped with the compiler.
pub const PRELUDE: &str = include_str!("../../layouts/prelude.optl");

/// Default edge gap between the nominal and machined outline, mm.
pub const DEFAULT_GAP: f64 = INCH / 8.0;

/// Collinearity tolerance for plate-to-plate beam handoff, mm.
const HANDOFF_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub document_sha256: String,
    pub catalogs: Vec<CatalogSource>,
}

/// Result of compiling a layout document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Table size in inches.
    pub table: (f64, f64),
    pub wavelength_nm: f64,
    pub label: Option<String>,
    pub plates: Vec<Plate>,
    pub diagnostics: Vec<Diagnostic>,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Scene {
    pub fn error_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.is_error()).count()
    }

    pub fn warning_count(&self) -> usize {
        self.diagnostics.len() - self.error_count()
    }

    pub fn has_errors(&self) -> bool {
        self.error_count() > 0
    }

    pub fn plate(&self, name: &str) -> Option<&Plate> {
        self.plates.iter().find(|p| p.name == name)
    }

    /// Table outline in millimetres.
    pub fn table_rect(&self) -> Rect {
        Rect::from_size(self.table.0 * INCH, self.table.1 * INCH)
    }

    /// Canonical dump: pretty JSON with a trailing newline.
    pub fn dump(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn load(text: &str) -> Result<Scene, SceneError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Prelude templates, parsed once per call.
pub fn prelude_templates() -> Vec<Template> {
    parse_templates(PRELUDE).expect("bundled prelude parses")
}

/// Parses an element or beam angle.
fn parse_orientation(text: &str, scope: &Scope) -> Result<Orientation, String> {
    let t = text.trim();
    match t {
        "littrow" => return Ok(Orientation::Littrow),
        "along" | "along_beam" => return Ok(Orientation::AlongBeam),
        "retro" | "back" => return Ok(Orientation::Retro),
        _ => {}
    }
    if let Some(target) = t.strip_prefix("parallel:") {
        if target.is_empty() {
            return Err("`parallel:` needs an element name".into());
        }
        return Ok(Orientation::ParallelTo(target.to_string()));
    }
    if let Ok(c) = t.parse::<Cardinal>() {
        return Ok(Orientation::Facing(c));
    }
    if t.contains('-') && t.chars().all(|c| c.is_ascii_alphabetic() || c == '-') {
        return t.parse::<Turn>().map(Orientation::Turn).map_err(|e| e.to_string());
    }
    let deg = Expr::parse(t).and_then(|e| e.eval(scope)).map_err(|e| e.to_string())?;
    Ok(Orientation::Normal(Heading::from_degrees(deg)))
}

/// Heading for a beam source or a fixed part.
fn parse_heading(text: &str, scope: &Scope) -> Result<Heading, String> {
    match parse_orientation(text, scope)? {
        Orientation::Facing(c) => Ok(c.heading()),
        Orientation::Turn(t) => Ok(t.normal()),
        Orientation::Normal(h) => Ok(h),
        _ => Err(format!("`{text}` needs a beam to refer to; use a direction or an angle in degrees")),
    }
}

struct Ctx<'a> {
    catalog: &'a Catalog,
    wavelength_nm: f64,
    limits: TraceLimits,
}

fn eval(e: &Expr, scope: &Scope, what: &str) -> Result<f64, Diagnostic> {
    e.eval(scope)
        .map_err(|err| Diagnostic::error("layout.expr", what.to_string(), format!("{what}: {err}")))
}

fn eval_map(list: &[(String, Expr)], scope: &Scope, what: &str) -> Result<BTreeMap<String, f64>, Diagnostic> {
    list.iter()
        .map(|(k, e)| Ok((k.clone(), eval(e, scope, &format!("{what}.{k}"))?)))
        .collect()
}

fn resolve_element(
    e: &ElementDecl,
    ot: &OpticTypeTable,
    catalog: &Catalog,
    scope: &Scope,
) -> Result<(ResolvedComponent, Option<PlacementConstraint>), Diagnostic> {
    let p = eval_map(&e.params, scope, &e.name)?;
    let m = eval_map(&e.mount_params, scope, &e.name)?;
    let (id, mut params, mut mount_params, mounts, placement) = match &e.target {
        Target::Role(r) => {
            let b = ot.roles.get(r).ok_or_else(|| {
                Diagnostic::error(
                    "layout.role",
                    e.name.clone(),
                    format!("optic type `{}` has no role `{r}`", ot.name),
                )
            })?;
            (b.component.clone(), b.params.clone(), b.mount_params.clone(), b.mounts.clone(), b.placement)
        }
        Target::Component(c) => (c.clone(), BTreeMap::new(), BTreeMap::new(), None, None),
    };
    params.extend(p);
    mount_params.extend(m);
    let mounts = match &e.mount {
        MountChoice::Default => mounts,
        MountChoice::None => Some(Vec::new()),
        MountChoice::Id(id) => Some(vec![id.clone()]),
    };
    let mut comp = catalog
        .resolve(&id, &params, mounts.as_deref(), &mount_params)
        .map_err(|err| Diagnostic::error("layout.param", e.name.clone(), err.to_string()))?;
    if !e.block.is_empty() {
        match comp.optic.behavior.as_mut() {
            Some(OpticalBehavior::Iris { blocked }) => blocked.extend(e.block.iter().copied()),
            _ => {
                return Err(Diagnostic::error(
                    "layout.param",
                    e.name.clone(),
                    format!("`block=` applies to irises only, `{}` is not one", comp.optic.id),
                ))
            }
        }
    }
    Ok((comp, placement))
}

/// Builds and checks one plate instance.
fn build_plate(
    ctx: &Ctx,
    t: &Template,
    inst: &InstanceDecl,
    name: &str,
    ot: &OpticTypeTable,
) -> (Option<Plate>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let s = ot.scale;
    let mut scope = Scope::standard().with("scale", s).with("gap", DEFAULT_GAP);
    for (k, e) in &t.params {
        let ov = inst.params.iter().find(|(n, _)| n == k).map(|(_, e)| e);
        match eval(ov.unwrap_or(e), &scope, k) {
            Ok(v) => scope.set(k, v),
            Err(d) => {
                diags.push(d);
                return (None, diags);
            }
        }
    }
    for (k, _) in &inst.params {
        if !t.params.iter().any(|(n, _)| n == k) {
            diags.push(Diagnostic::error(
                "layout.param",
                String::new(),
                format!("template `{}` has no parameter `{k}`", t.name),
            ));
        }
    }
    let decl = t.plate.as_ref().expect("templates carry a plate");
    let dims = (|| -> Result<(f64, f64, f64, f64), Diagnostic> {
        let dx = eval(&decl.dx, &scope, "dx")?;
        let dy = eval(&decl.dy, &scope, "dy")?;
        let gap = match &decl.gap {
            Some(g) => eval(g, &scope, "gap")?,
            None => DEFAULT_GAP,
        };
        let dz = match &decl.dz {
            Some(z) => eval(z, &scope, "dz")?,
            None => ot.base_dz,
        };
        Ok((dx, dy, gap, dz))
    })();
    let (dx, dy, gap, dz) = match dims {
        Ok(v) => v,
        Err(d) => {
            diags.push(d);
            return (None, diags);
        }
    };
    scope.set("dx", dx);
    scope.set("dy", dy);
    scope.set("gap", gap);
    let pose = Pose::new(Vec2::new(inst.x * INCH, inst.y * INCH), Heading::from_degrees(inst.angle));
    let mut plate = match Plate::new(name, dx * s, dy * s, dz, gap, ot.optics_dz, pose) {
        Ok(p) => p,
        Err(e) => {
            diags.push(Diagnostic::error("layout.param", String::new(), e.to_string()));
            return (None, diags);
        }
    };
    plate.template = t.name.clone();
    plate.optic_type = ot.name.clone();
    plate.scale = s;
    plate.label = decl.label.clone();

    for b in &t.beams {
        let r = (|| -> Result<(), Diagnostic> {
            let x = eval(&b.x, &scope, &b.name)? * s;
            let y = eval(&b.y, &scope, &b.name)? * s;
            let h = parse_heading(&b.angle, &scope)
                .map_err(|m| Diagnostic::error("layout.param", b.name.clone(), m))?;
            let w = match &b.drill_width {
                Some(w) => eval(w, &scope, &b.name)?,
                None => ot.beam_width,
            };
            plate
                .add_beam_path(&b.name, x, y, h, w)
                .map_err(|e| Diagnostic::error("trace.source", b.name.clone(), e.to_string()))
        })();
        if let Err(d) = r {
            diags.push(d);
        }
    }

    for e in &t.elements {
        let r = (|| -> Result<(), Diagnostic> {
            let (comp, role_placement) = resolve_element(e, ot, ctx.catalog, &scope)?;
            let role = match &e.target {
                Target::Role(r) => Some(r.as_str()),
                Target::Component(_) => None,
            };
            let plate_err = |err: crate::baseplate::PlateError| {
                let code = match err {
                    crate::baseplate::PlateError::DuplicateName(_) => "layout.duplicate",
                    crate::baseplate::PlateError::UnknownSource { .. } => "trace.source",
                    _ => "layout.param",
                };
                Diagnostic::error(code, e.name.clone(), err.to_string())
            };
            match &e.kind {
                ElementKind::Place { beam, index, constraint } => {
                    let orientation = parse_orientation(&e.angle, &scope)
                        .map_err(|m| Diagnostic::error("layout.param", e.name.clone(), m))?;
                    let (constraint, from_role) = match constraint {
                        Some((kind, expr)) => {
                            let v = eval(expr, &scope, &e.name)?;
                            let c = match kind {
                                ConstraintKind::Distance => PlacementConstraint::Distance(v),
                                ConstraintKind::X => PlacementConstraint::AbsX(v),
                                ConstraintKind::Y => PlacementConstraint::AbsY(v),
                            };
                            (Some(c.scaled(s)), false)
                        }
                        None => (role_placement, role_placement.is_some()),
                    };
                    plate
                        .place_element_along_beam(&e.name, role, comp, beam, *index, constraint, from_role, orientation)
                        .map_err(plate_err)
                }
                ElementKind::Part { x, y } => {
                    let x = eval(x, &scope, &e.name)? * s;
                    let y = eval(y, &scope, &e.name)? * s;
                    let h = parse_heading(&e.angle, &scope)
                        .map_err(|m| Diagnostic::error("layout.param", e.name.clone(), m))?;
                    plate
                        .add_part(&e.name, role, comp, Pose::new(Point2::new(x, y), h))
                        .map_err(plate_err)
                }
            }
        })();
        if let Err(d) = r {
            diags.push(d);
        }
    }

    diags.extend(plate.trace(ctx.wavelength_nm, ctx.limits));
    diags.extend(check_design_rules(&plate));
    diags.extend(detect_collisions(&plate));
    let (features, fd) = collect_features(&plate);
    plate.features = features;
    diags.extend(fd);
    (Some(plate), diags)
}

/// Beams leaving one plate must enter the next plate they reach on a
/// declared source with the same line and heading.
fn handoff_rule(plates: &[Plate]) -> Vec<Diagnostic> {
    let shapes: Vec<[Point2; 4]> = plates.iter().map(Plate::table_corners).collect();
    let mut out = Vec::new();
    for (pi, p) in plates.iter().enumerate() {
        for tree in &p.trees {
            for beam in tree.beams.values() {
                let BeamFate::Escaped { at } = beam.fate else { continue };
                if !beam.index.is_trunk() {
                    continue;
                }
                let Some(last) = beam.segments.last() else { continue };
                let origin = p.pose.apply(at);
                let heading = p.pose.apply_heading(last.heading);
                let dir = heading.unit();
                // Nearest plate whose outline the ray enters.
                let mut hit: Option<(f64, usize)> = None;
                for (qi, corners) in shapes.iter().enumerate() {
                    if qi == pi {
                        continue;
                    }
                    for k in 0..4 {
                        let (a, b) = (corners[k], corners[(k + 1) % 4]);
                        if let Some((t, _)) = crate::geometry::ray_segment_intersection(origin, dir, a, b, 1e-9) {
                            if t >= -HANDOFF_TOL && hit.is_none_or(|(bt, _)| t < bt) {
                                hit = Some((t, qi));
                            }
                        }
                    }
                }
                let Some((_, qi)) = hit else { continue };
                let q = &plates[qi];
                let matched = q.sources.iter().any(|src| {
                    let o = q.pose.apply(src.origin);
                    let h = q.pose.apply_heading(src.heading);
                    let d = o - origin;
                    h.delta_to(heading).abs() < 1e-9 && d.cross(dir).abs() < HANDOFF_TOL && d.dot(dir) > -HANDOFF_TOL
                });
                if !matched {
                    out.push(Diagnostic::warning(
                        "rule.handoff",
                        format!("{}/{}:{}", p.name, tree.source, beam.index),
                        format!(
                            "beam {} of `{}` leaves `{}` toward `{}` but meets no source there",
                            beam.index, tree.source, p.name, q.name
                        ),
                    ));
                }
            }
        }
    }
    out
}

/// Compiles a parsed document. All findings, including unresolvable
/// templates and optic types, are reported as diagnostics.
pub fn compile(doc: &LayoutDocument, catalog: &Catalog) -> Scene {
    compile_with(doc, catalog, TraceLimits::default())
}

pub fn compile_with(doc: &LayoutDocument, catalog: &Catalog, limits: TraceLimits) -> Scene {
    let ctx = Ctx {
        catalog,
        wavelength_nm: doc.wavelength_nm,
        limits,
    };
    let mut diags = Vec::new();
    let mut templates: BTreeMap<String, Template> = prelude_templates().into_iter().map(|t| (t.name.clone(), t)).collect();
    let mut seen = BTreeSet::new();
    for t in &doc.templates {
        if !seen.insert(t.name.clone()) {
            diags.push(Diagnostic::error(
                "layout.duplicate",
                t.name.clone(),
                format!("template `{}` is defined twice (line {})", t.name, t.line),
            ));
        }
        templates.insert(t.name.clone(), t.clone());
    }

    // Expand grids and assign names.
    let mut expanded: Vec<(InstanceDecl, String)> = Vec::new();
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    for inst in &doc.instances {
        let base = inst.name.clone().unwrap_or_else(|| inst.template.clone());
        let items: Vec<InstanceDecl> = match inst.grid {
            Some(g) => generate_grid(&inst.template, &base, g, (inst.x, inst.y, inst.angle))
                .into_iter()
                .map(|mut i| {
                    i.optic_type = inst.optic_type.clone();
                    i.params = inst.params.clone();
                    i.line = inst.line;
                    i
                })
                .collect(),
            None => vec![inst.clone()],
        };
        for i in items {
            let explicit = i.name.is_some();
            let want = i.name.clone().unwrap_or_else(|| base.clone());
            let n = used.entry(want.clone()).or_insert(0);
            *n += 1;
            let name = if *n == 1 {
                want
            } else if explicit {
                diags.push(Diagnostic::error(
                    "layout.duplicate",
                    want.clone(),
                    format!("plate name `{want}` is used more than once (line {})", i.line),
                ));
                continue;
            } else {
                format!("{want}_{n}")
            };
            expanded.push((i, name));
        }
    }

    let table = Rect::from_size(doc.table.0 * INCH, doc.table.1 * INCH);
    let mut plates = Vec::new();
    for (inst, name) in &expanded {
        let Some(t) = templates.get(&inst.template) else {
            diags.push(Diagnostic::error(
                "layout.unknown_template",
                name.clone(),
                format!("unknown template `{}` (line {})", inst.template, inst.line),
            ));
            continue;
        };
        let Some(ot_name) = inst.optic_type.clone().or_else(|| t.default_type.clone()) else {
            diags.push(Diagnostic::error(
                "layout.unknown_optic_type",
                name.clone(),
                format!("template `{}` has no default optic type; add `with <type>` (line {})", t.name, inst.line),
            ));
            continue;
        };
        let Some(ot) = catalog.optic_type(&ot_name) else {
            diags.push(Diagnostic::error(
                "layout.unknown_optic_type",
                name.clone(),
                format!("unknown optic type `{ot_name}` (line {})", inst.line),
            ));
            continue;
        };
        if (inst.angle / 90.0).fract().abs() > 1e-12 {
            diags.push(Diagnostic::error(
                "layout.param",
                name.clone(),
                format!("plate angle {} is not a multiple of 90 degrees (line {})", inst.angle, inst.line),
            ));
            continue;
        }
        let (plate, pd) = build_plate(&ctx, t, inst, name, ot);
        diags.extend(pd.into_iter().map(|d| d.within(name)));
        if let Some(plate) = plate {
            if plate.table_corners().iter().any(|c| !table.contains(*c, 1e-6)) {
                diags.push(Diagnostic::error(
                    "layout.bounds",
                    name.clone(),
                    format!("plate `{name}` extends past the {}x{} inch table", doc.table.0, doc.table.1),
                ));
            }
            plates.push(plate);
        }
    }
    diags.extend(detect_plate_overlaps(&plates));
    diags.extend(handoff_rule(&plates));
    sort_diagnostics(&mut diags);
    Scene {
        table: doc.table,
        wavelength_nm: doc.wavelength_nm,
        label: doc.label.clone(),
        plates,
        diagnostics: diags,
        provenance: Provenance {
            document_sha256: doc.source_sha256.clone(),
            catalogs: catalog.sources().to_vec(),
        },
    }
}

/// Errors that stop compilation before any plate is built.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}:{source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Catalog(#[from] crate::components::CatalogError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_grammar() {
        let s = Scope::standard();
        assert_eq!(parse_orientation("up-right", &s).unwrap(), Orientation::Turn(Turn::new(Cardinal::Up, Cardinal::Right).unwrap()));
        assert_eq!(parse_orientation("left", &s).unwrap(), Orientation::Facing(Cardinal::Left));
        assert_eq!(parse_orientation("littrow", &s).unwrap(), Orientation::Littrow);
        assert_eq!(parse_orientation("parallel:g", &s).unwrap(), Orientation::ParallelTo("g".into()));
        assert!(parse_orientation("up-down", &s).is_err());
        assert_eq!(parse_orientation("90", &s).unwrap(), Orientation::Normal(Heading::UP));
    }

    #[test]
    fn prelude_parses() {
        let names: Vec<String> = prelude_templates().into_iter().map(|t| t.name).collect();
        for n in ["rb_sas", "ecdl", "singlepass", "doublepass", "mirror_cell", "waveplate_cell"] {
            assert!(names.iter().any(|m| m == n), "missing {n}");
        }
    }
}

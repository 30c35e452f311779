//! Design-rule lints. All findings are warnings.
//!
//! * `rule.grid`: a mirror or splitter turns a grid-aligned beam off the grid.
//! * `rule.branching`: splits off the main beam go to both sides of it.
//! * `rule.height`: an optical centre does not sit at the beam height.
//!
//! The hand-off rule needs the whole table and lives with the layout
//! compiler.

use std::collections::BTreeSet;

use super::{PlacedElement, Plate};
use crate::beam::{BeamFate, BeamIndex, BeamSegment, BeamTree, OpticalBehavior};
use crate::components::{DrillFeature, PocketDepth};
use crate::diagnostics::Diagnostic;
use crate::geometry::Heading;

pub const HEIGHT_TOL: f64 = 1e-6;
const CARDINAL_TOL: f64 = 1e-9;

pub fn check_design_rules(plate: &Plate) -> Vec<Diagnostic> {
    let mut d = grid_rule(plate);
    d.extend(branching_rule(plate));
    d.extend(height_rule(plate));
    d
}

/// Heading of the beam arriving at the start of `beam.segments[k]`.
fn incoming_heading(tree: &BeamTree, index: BeamIndex, k: usize) -> Heading {
    if k > 0 {
        return tree.beams[&index].segments[k - 1].heading;
    }
    match index.parent().and_then(|p| tree.beams.get(&p)) {
        Some(parent) => parent.segments.last().map_or(tree.heading, |s| s.heading),
        None => tree.heading,
    }
}

fn is_fold(e: &PlacedElement) -> bool {
    matches!(e.behavior(), Some(OpticalBehavior::Mirror | OpticalBehavior::Splitter))
}

fn grid_rule(plate: &Plate) -> Vec<Diagnostic> {
    let mut flagged = BTreeSet::new();
    for tree in &plate.trees {
        for (index, beam) in &tree.beams {
            for (k, seg) in beam.segments.iter().enumerate() {
                if seg.heading.is_cardinal_within(CARDINAL_TOL) {
                    continue;
                }
                let Some(name) = &seg.start_element else { continue };
                let Some(el) = plate.element(name) else { continue };
                if is_fold(el) && incoming_heading(tree, *index, k).is_cardinal_within(CARDINAL_TOL) {
                    flagged.insert(name.clone());
                }
            }
        }
    }
    flagged
        .into_iter()
        .map(|n| Diagnostic::warning("rule.grid", n.clone(), format!("`{n}` sends a grid-aligned beam off the grid")))
        .collect()
}

fn first_segment(tree: &BeamTree, index: BeamIndex) -> Option<&BeamSegment> {
    tree.beams.get(&index).and_then(|b| b.segments.first())
}

/// Side of the parent beam the reflected child leaves on: +1 left, -1 right.
pub fn branch_sense(parent: Heading, reflected: Heading) -> Option<i8> {
    let c = parent.unit().cross(reflected.unit());
    if c.abs() < 1e-9 {
        None
    } else if c > 0.0 {
        Some(1)
    } else {
        Some(-1)
    }
}

fn branching_rule(plate: &Plate) -> Vec<Diagnostic> {
    let mut senses = BTreeSet::new();
    for tree in &plate.trees {
        for (index, beam) in &tree.beams {
            let BeamFate::Branched { element } = &beam.fate else { continue };
            if !index.is_trunk() || !matches!(plate.element(element).and_then(|e| e.behavior()), Some(OpticalBehavior::Splitter)) {
                continue;
            }
            let parent = beam.segments.last().map_or(tree.heading, |s| s.heading);
            if let Some(child) = first_segment(tree, index.reflected()) {
                if let Some(s) = branch_sense(parent, child.heading) {
                    senses.insert(s);
                }
            }
        }
    }
    if senses.len() > 1 {
        vec![Diagnostic::warning(
            "rule.branching",
            plate.name.clone(),
            "splits off the main beam branch to both sides",
        )]
    } else {
        vec![]
    }
}

/// Height of the optical centre above the plate top once the element is
/// mounted. `None` when the height is adjustable.
pub fn effective_height(e: &PlacedElement, optics_dz: f64) -> Option<f64> {
    let iface = e.component.plate_interface();
    let h = iface.optical_center.height?;
    let auto_pocket = iface
        .drill
        .iter()
        .any(|d| matches!(d, DrillFeature::Pocket { depth: PocketDepth::Auto, .. }));
    if auto_pocket && h >= optics_dz - HEIGHT_TOL {
        Some(optics_dz)
    } else {
        let sunk: f64 = iface
            .drill
            .iter()
            .filter_map(|d| match d {
                DrillFeature::Pocket { depth: PocketDepth::Fixed(z), .. } => Some(*z),
                _ => None,
            })
            .fold(0.0, f64::max);
        Some(h - sunk)
    }
}

fn height_rule(plate: &Plate) -> Vec<Diagnostic> {
    plate
        .elements
        .iter()
        .filter_map(|e| {
            let h = effective_height(e, plate.optics_dz)?;
            ((h - plate.optics_dz).abs() > HEIGHT_TOL).then(|| {
                Diagnostic::warning(
                    "rule.height",
                    e.name.clone(),
                    format!(
                        "optical centre of `{}` sits at {h:.3} mm, beam height is {:.3} mm",
                        e.name, plate.optics_dz
                    ),
                )
            })
        })
        .collect()
}

//! Footprint, beam-path and plate-edge collision checks.
//!
//! Broad phase is a sort-and-sweep over bounding boxes; the narrow phase
//! is a separating-axis test on convex outlines. Shapes that merely touch
//! (overlap no deeper than `TOUCH_TOL`) do not collide.

use std::collections::BTreeSet;

use super::Plate;
use crate::components::Shape;
use crate::diagnostics::Diagnostic;
use crate::geometry::{point_segment_distance, Point2, Rect, Vec2};

pub const TOUCH_TOL: f64 = 1e-6;

fn project(points: &[Point2], axis: Vec2) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

fn edge_normals(poly: &[Point2]) -> impl Iterator<Item = Vec2> + '_ {
    let n = poly.len();
    (0..n).filter_map(move |i| {
        let e = poly[(i + 1) % n] - poly[i];
        (e.norm() > 1e-12).then(|| e.perp().normalized())
    })
}

/// Penetration depth of two intervals: how far one must move to separate.
fn overlap_on(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1 - b.0).min(b.1 - a.0)
}

/// Minimum overlap depth of two point sets over the given axes.
fn sat_depth(a: &[Point2], b: &[Point2], axes: impl Iterator<Item = Vec2>) -> f64 {
    axes.map(|ax| overlap_on(project(a, ax), project(b, ax)))
        .fold(f64::INFINITY, f64::min)
}

fn poly_disc_depth(poly: &[Point2], c: Point2, r: f64) -> f64 {
    let nearest = poly
        .iter()
        .copied()
        .min_by(|p, q| p.distance(c).total_cmp(&q.distance(c)))
        .unwrap_or(c);
    let mut axes: Vec<Vec2> = edge_normals(poly).collect();
    if nearest.distance(c) > 1e-12 {
        axes.push((nearest - c).normalized());
    }
    axes.into_iter()
        .map(|ax| {
            let d = c.dot(ax);
            overlap_on(project(poly, ax), (d - r, d + r))
        })
        .fold(f64::INFINITY, f64::min)
}

/// True when two convex shapes overlap with positive area.
pub fn shapes_overlap(a: &Shape, b: &Shape, tol: f64) -> bool {
    match (a, b) {
        (Shape::Polygon(p), Shape::Polygon(q)) => sat_depth(p, q, edge_normals(p).chain(edge_normals(q))) > tol,
        (Shape::Polygon(p), Shape::Disc { center, radius }) | (Shape::Disc { center, radius }, Shape::Polygon(p)) => {
            poly_disc_depth(p, *center, *radius) > tol
        }
        (Shape::Disc { center: c1, radius: r1 }, Shape::Disc { center: c2, radius: r2 }) => {
            r1 + r2 - c1.distance(*c2) > tol
        }
    }
}

/// True when the segment `a`–`b` passes through the interior of `s`.
pub fn segment_crosses_shape(a: Point2, b: Point2, s: &Shape, tol: f64) -> bool {
    if a.distance(b) <= tol {
        return false;
    }
    match s {
        Shape::Polygon(p) => {
            let seg = [a, b];
            let axis = (b - a).perp().normalized();
            sat_depth(&seg, p, edge_normals(p).chain(std::iter::once(axis))) > tol
        }
        Shape::Disc { center, radius } => radius - point_segment_distance(*center, a, b) > tol,
    }
}

/// True when `s` lies inside `r` (touching the boundary allowed).
pub fn shape_inside_rect(s: &Shape, r: &Rect, tol: f64) -> bool {
    match s {
        Shape::Polygon(p) => p.iter().all(|q| r.contains(*q, tol)),
        Shape::Disc { .. } => {
            let b = s.bounds();
            r.contains(b.min, tol) && r.contains(b.max, tol)
        }
    }
}

/// Candidate pairs whose boxes overlap, by sort-and-sweep on x.
pub fn sweep_pairs(boxes: &[Rect]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| boxes[i].min.x.total_cmp(&boxes[j].min.x));
    let mut out = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        active.retain(|&j| boxes[j].max.x > boxes[i].min.x);
        for &j in &active {
            if boxes[j].min.y < boxes[i].max.y && boxes[i].min.y < boxes[j].max.y {
                out.push((i.min(j), i.max(j)));
            }
        }
        active.push(i);
    }
    out
}

fn pair_subject(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a} & {b}")
    } else {
        format!("{b} & {a}")
    }
}

/// Footprint overlaps, beams crossing foreign parts, and parts outside
/// the machinable outline.
pub fn detect_collisions(plate: &Plate) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    // (element index, shape)
    let parts: Vec<(usize, Shape)> = plate
        .elements
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.outlines().into_iter().map(move |s| (i, s)))
        .collect();
    let boxes: Vec<Rect> = parts.iter().map(|(_, s)| s.bounds()).collect();

    let mut hits = BTreeSet::new();
    for (i, j) in sweep_pairs(&boxes) {
        let (ei, ej) = (parts[i].0, parts[j].0);
        if ei == ej || hits.contains(&(ei.min(ej), ei.max(ej))) {
            continue;
        }
        if shapes_overlap(&parts[i].1, &parts[j].1, TOUCH_TOL) {
            hits.insert((ei.min(ej), ei.max(ej)));
        }
    }
    for (i, j) in hits {
        let (a, b) = (&plate.elements[i].name, &plate.elements[j].name);
        diags.push(Diagnostic::error(
            "collide.footprint",
            pair_subject(a, b),
            format!("footprints of `{a}` and `{b}` overlap"),
        ));
    }

    let reach = plate.dx + plate.dy;
    for tree in &plate.trees {
        // A beam folded back over a part would otherwise report it once
        // per segment.
        let mut crossed = BTreeSet::new();
        for seg in tree.segments() {
            let (a, b) = (seg.origin, seg.end_or(reach));
            let sb = Rect::bounding(&[a, b]);
            for (k, (ei, shape)) in parts.iter().enumerate() {
                let name = &plate.elements[*ei].name;
                if seg.start_element.as_ref() == Some(name) || seg.end_element.as_ref() == Some(name) {
                    continue;
                }
                let bb = &boxes[k];
                if bb.max.x < sb.min.x || bb.min.x > sb.max.x || bb.max.y < sb.min.y || bb.min.y > sb.max.y {
                    continue;
                }
                if segment_crosses_shape(a, b, shape, TOUCH_TOL) {
                    crossed.insert((seg.index, name.clone()));
                }
            }
        }
        for (index, name) in crossed {
            diags.push(Diagnostic::error(
                "collide.beam",
                format!("{}:{}|{}", tree.source, index, name),
                format!("beam {} of `{}` passes through `{name}`", index, tree.source),
            ));
        }
    }

    let phys = plate.physical_outline();
    let mut outside = BTreeSet::new();
    for (ei, shape) in &parts {
        if !shape_inside_rect(shape, &phys, 1e-9) {
            outside.insert(*ei);
        }
    }
    for ei in outside {
        let name = &plate.elements[ei].name;
        diags.push(Diagnostic::warning(
            "collide.edge",
            name.clone(),
            format!("`{name}` extends past the plate edge"),
        ));
    }
    diags
}

/// Physical outline of a plate in table coordinates.
pub fn plate_table_shape(plate: &Plate) -> Shape {
    let r = plate.physical_outline();
    Shape::Polygon(r.corners().iter().map(|c| plate.pose.apply(*c)).collect())
}

/// Overlapping plates on the table.
pub fn detect_plate_overlaps(plates: &[Plate]) -> Vec<Diagnostic> {
    let shapes: Vec<Shape> = plates.iter().map(plate_table_shape).collect();
    let boxes: Vec<Rect> = shapes.iter().map(Shape::bounds).collect();
    let mut pairs = sweep_pairs(&boxes);
    pairs.sort();
    pairs
        .into_iter()
        .filter(|&(i, j)| shapes_overlap(&shapes[i], &shapes[j], TOUCH_TOL))
        .map(|(i, j)| {
            let (a, b) = (&plates[i].name, &plates[j].name);
            Diagnostic::error("collide.plate", pair_subject(a, b), format!("plates `{a}` and `{b}` overlap"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, s: f64) -> Shape {
        Shape::Polygon(vec![
            Vec2::new(x, y),
            Vec2::new(x + s, y),
            Vec2::new(x + s, y + s),
            Vec2::new(x, y + s),
        ])
    }

    #[test]
    fn touching_squares_do_not_collide() {
        assert!(!shapes_overlap(&square(0.0, 0.0, 1.0), &square(1.0, 0.0, 1.0), TOUCH_TOL));
        assert!(shapes_overlap(&square(0.0, 0.0, 1.0), &square(0.9, 0.5, 1.0), TOUCH_TOL));
    }

    #[test]
    fn disc_against_corner() {
        let d = Shape::Disc {
            center: Vec2::new(1.5, 1.5),
            radius: 0.6,
        };
        // corner distance is 0.707
        assert!(!shapes_overlap(&square(0.0, 0.0, 1.0), &d, TOUCH_TOL));
        let d = Shape::Disc {
            center: Vec2::new(1.5, 1.5),
            radius: 0.8,
        };
        assert!(shapes_overlap(&square(0.0, 0.0, 1.0), &d, TOUCH_TOL));
    }

    #[test]
    fn segment_grazing_edge_is_not_a_crossing() {
        let s = square(0.0, 0.0, 1.0);
        assert!(!segment_crosses_shape(Vec2::new(-1.0, 1.0), Vec2::new(2.0, 1.0), &s, TOUCH_TOL));
        assert!(segment_crosses_shape(Vec2::new(-1.0, 0.5), Vec2::new(2.0, 0.5), &s, TOUCH_TOL));
        assert!(!segment_crosses_shape(Vec2::new(-1.0, 0.5), Vec2::new(-0.1, 0.5), &s, TOUCH_TOL));
    }

    #[test]
    fn sweep_finds_all_box_overlaps() {
        let boxes = vec![
            Rect::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 2.0)),
            Rect::new(Vec2::new(1.0, 1.0), Vec2::new(3.0, 3.0)),
            Rect::new(Vec2::new(5.0, 0.0), Vec2::new(6.0, 1.0)),
            Rect::new(Vec2::new(1.5, -5.0), Vec2::new(1.8, 5.0)),
        ];
        let mut p = sweep_pairs(&boxes);
        p.sort();
        assert_eq!(p, vec![(0, 1), (0, 3), (1, 3)]);
    }
}

//! Plan-view SVG schematics. One user unit is one millimetre; the drawing
//! flips y so the plate's +y points up the page.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::baseplate::Plate;
use crate::components::Shape;
use crate::diagnostics::Diagnostic;
use crate::geometry::{Point2, Pose, Rect};
use crate::layout::Scene;

use super::{num, plate_slugs};

const DEPTH_COLORS: [&str; 6] = ["#d62728", "#ff7f0e", "#2ca02c", "#1f77b4", "#9467bd", "#8c564b"];

pub(crate) fn esc(s: &str) -> String {
    let mut o = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => o.push_str("&amp;"),
            '<' => o.push_str("&lt;"),
            '>' => o.push_str("&gt;"),
            '"' => o.push_str("&quot;"),
            c => o.push(c),
        }
    }
    o
}

fn sp(attrs: &str) -> String {
    if attrs.is_empty() {
        String::new()
    } else {
        format!(" {attrs}")
    }
}

/// Minimal SVG writer taking world coordinates with y up.
pub(crate) struct SvgDoc {
    out: String,
    flip: f64,
}

impl SvgDoc {
    /// `view` is the visible world rectangle; world y maps to `flip - y`.
    pub fn new(view: Rect, flip: f64) -> Self {
        let (w, h) = (view.width(), view.height());
        let mut out = String::new();
        let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}mm\" height=\"{}mm\" viewBox=\"{} {} {} {}\">",
            num(w),
            num(h),
            num(view.min.x),
            num(flip - view.max.y),
            num(w),
            num(h)
        );
        SvgDoc { out, flip }
    }

    fn y(&self, y: f64) -> String {
        num(self.flip - y)
    }

    pub fn open_group(&mut self, id: &str, attrs: &str) {
        let _ = writeln!(self.out, "<g id=\"{}\"{}>", esc(id), sp(attrs));
    }

    pub fn open_class(&mut self, class: &str, attrs: &str) {
        let _ = writeln!(self.out, "<g class=\"{}\"{}>", esc(class), sp(attrs));
    }

    pub fn close_group(&mut self) {
        self.out.push_str("</g>\n");
    }

    pub fn rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, attrs: &str) {
        let _ = writeln!(
            self.out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"{}/>",
            num(x0.min(x1)),
            self.y(y0.max(y1)),
            num((x1 - x0).abs()),
            num((y1 - y0).abs()),
            sp(attrs)
        );
    }

    pub fn line(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, attrs: &str) {
        let _ = writeln!(
            self.out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"{}/>",
            num(x0),
            self.y(y0),
            num(x1),
            self.y(y1),
            sp(attrs)
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, attrs: &str) {
        let _ = writeln!(self.out, "<circle cx=\"{}\" cy=\"{}\" r=\"{}\"{}/>", num(x), self.y(y), num(r), sp(attrs));
    }

    pub fn polygon(&mut self, pts: &[Point2], attrs: &str) {
        let p: Vec<String> = pts.iter().map(|p| format!("{},{}", num(p.x), self.y(p.y))).collect();
        let _ = writeln!(self.out, "<polygon points=\"{}\"{}/>", p.join(" "), sp(attrs));
    }

    pub fn shape(&mut self, s: &Shape, attrs: &str) {
        match s {
            Shape::Polygon(p) => self.polygon(p, attrs),
            Shape::Disc { center, radius } => self.circle(center.x, center.y, *radius, attrs),
        }
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str, attrs: &str) {
        let _ = writeln!(self.out, "<text x=\"{}\" y=\"{}\"{}>{}</text>", num(x), self.y(y), sp(attrs), esc(s));
    }

    pub fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn place(shape: Shape, pose: &Pose) -> Shape {
    match shape {
        Shape::Polygon(p) => Shape::Polygon(p.into_iter().map(|q| pose.apply(q)).collect()),
        Shape::Disc { center, radius } => Shape::Disc {
            center: pose.apply(center),
            radius,
        },
    }
}

/// Elements named by collision diagnostics, as (plate, element) pairs, and
/// plates named by plate overlaps.
fn collision_marks(diags: &[Diagnostic]) -> (BTreeSet<(String, String)>, BTreeSet<String>) {
    let mut elements = BTreeSet::new();
    let mut plates = BTreeSet::new();
    for d in diags.iter().filter(|d| d.code.starts_with("collide.")) {
        if d.code == "collide.plate" {
            plates.extend(d.subject.split(" & ").map(str::to_string));
            continue;
        }
        let Some((plate, rest)) = d.subject.split_once('/') else { continue };
        let names: Vec<&str> = match rest.split_once('|') {
            Some((_, name)) => vec![name],
            None => rest.split(" & ").collect(),
        };
        for n in names {
            elements.insert((plate.to_string(), n.to_string()));
        }
    }
    (elements, plates)
}

/// Draws one plate mapped to the drawing frame by `pose`.
fn draw_plate(doc: &mut SvgDoc, plate: &Plate, slug: &str, pose: &Pose) {
    let corners = |r: Rect| -> Vec<Point2> { r.corners().iter().map(|c| pose.apply(*c)).collect() };
    doc.open_group(&format!("plate-{slug}"), "");
    doc.polygon(&corners(plate.outline()), "fill=\"none\" stroke=\"#999\" stroke-width=\"0.3\" stroke-dasharray=\"3 2\"");
    doc.polygon(&corners(plate.physical_outline()), "fill=\"#eef1f4\" stroke=\"#333\" stroke-width=\"0.5\"");

    doc.open_class("footprints", "fill=\"#ffffff\" fill-opacity=\"0.7\" stroke=\"#555\" stroke-width=\"0.3\"");
    for e in &plate.elements {
        for s in e.outlines() {
            doc.shape(&place(s, pose), "");
        }
    }
    doc.close_group();

    doc.open_class("beams", "fill=\"none\" stroke-linecap=\"round\"");
    let reach = plate.dx + plate.dy;
    for tree in &plate.trees {
        for beam in tree.beams.values() {
            let depth = beam.index.depth() as usize;
            let color = DEPTH_COLORS[depth.min(DEPTH_COLORS.len() - 1)];
            let width = (1.2 - 0.15 * depth as f64).max(0.3);
            let class = if beam.is_leaf() { "beam leaf" } else { "beam" };
            doc.open_class(
                class,
                &format!(
                    "data-beam=\"{}:{}\" data-depth=\"{depth}\" stroke=\"{color}\" stroke-width=\"{}\"",
                    esc(&tree.source),
                    beam.index,
                    num(width)
                ),
            );
            for seg in &beam.segments {
                let (a, b) = (pose.apply(seg.origin), pose.apply(seg.end_or(reach)));
                doc.line(a.x, a.y, b.x, b.y, "");
            }
            doc.close_group();
        }
    }
    doc.close_group();

    doc.open_class("labels", "font-size=\"3\" font-family=\"sans-serif\" text-anchor=\"middle\" fill=\"#000\"");
    for e in &plate.elements {
        let p = pose.apply(e.pose.position);
        doc.text(p.x, p.y, &e.name, "");
    }
    let title = plate.label.as_deref().unwrap_or(&plate.name);
    let c = pose.apply(Point2::new(plate.gap + 2.0, plate.dy - plate.gap - 6.0));
    doc.text(c.x, c.y, title, "text-anchor=\"start\" font-size=\"5\"");
    doc.close_group();
    doc.close_group();
}

fn draw_highlights(doc: &mut SvgDoc, plates: &[(&Plate, Pose)], diags: &[Diagnostic]) {
    let (elements, plate_marks) = collision_marks(diags);
    doc.open_group("collisions", "fill=\"#ff0000\" fill-opacity=\"0.35\" stroke=\"#ff0000\" stroke-width=\"0.8\"");
    for (plate, pose) in plates {
        if plate_marks.contains(&plate.name) {
            let pts: Vec<Point2> = plate.physical_outline().corners().iter().map(|c| pose.apply(*c)).collect();
            doc.polygon(&pts, "fill-opacity=\"0.15\"");
        }
        for e in &plate.elements {
            if elements.contains(&(plate.name.clone(), e.name.clone())) {
                for s in e.outlines() {
                    doc.shape(&place(s, pose), "");
                }
            }
        }
    }
    doc.close_group();
}

/// The whole table in table millimetres: frame, every plate, and the
/// collision highlight layer.
pub fn scene_svg(scene: &Scene) -> String {
    let table = scene.table_rect();
    let mut doc = SvgDoc::new(table.inset(-20.0), table.max.y);
    doc.open_group("table", "");
    doc.rect(table.min.x, table.min.y, table.max.x, table.max.y, "fill=\"none\" stroke=\"#000\" stroke-width=\"1\"");
    if let Some(l) = &scene.label {
        doc.text(0.0, table.max.y + 6.0, l, "font-size=\"8\" font-family=\"sans-serif\"");
    }
    doc.close_group();
    let slugs = plate_slugs(scene);
    for (p, slug) in scene.plates.iter().zip(&slugs) {
        draw_plate(&mut doc, p, slug, &p.pose);
    }
    let posed: Vec<(&Plate, Pose)> = scene.plates.iter().map(|p| (p, p.pose)).collect();
    draw_highlights(&mut doc, &posed, &scene.diagnostics);
    doc.finish()
}

/// One plate in its own coordinates, highlighting the collisions that
/// `diagnostics` report against it.
pub fn plate_svg(plate: &Plate, diagnostics: &[Diagnostic]) -> String {
    let mut doc = SvgDoc::new(plate.outline().inset(-10.0), plate.dy);
    let identity = Pose::identity();
    draw_plate(&mut doc, plate, &super::slugify(&plate.name), &identity);
    draw_highlights(&mut doc, &[(plate, identity)], diagnostics);
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_subjects_name_elements_and_plates() {
        let d = vec![
            Diagnostic::error("collide.footprint", "p/a & b", ""),
            Diagnostic::error("collide.beam", "p/laser:0b10|c", ""),
            Diagnostic::warning("collide.edge", "q/d", ""),
            Diagnostic::error("collide.plate", "p & q", ""),
            Diagnostic::warning("rule.grid", "p/e", ""),
        ];
        let (e, p) = collision_marks(&d);
        let names: Vec<String> = e.iter().map(|(p, n)| format!("{p}/{n}")).collect();
        assert_eq!(names, ["p/a", "p/b", "p/c", "q/d"]);
        assert_eq!(p.into_iter().collect::<Vec<_>>(), ["p", "q"]);
    }

    #[test]
    fn text_is_escaped() {
        assert_eq!(esc("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}

//! Drill drawings: a feature table (CSV) and a dimensioned plan (SVG) per
//! plate, in plate millimetres with the origin at the lower-left corner of
//! the nominal outline.

use std::fmt::Write;

use crate::baseplate::{FeatureOrigin, Plate, PlateFeature};
use crate::components::{HoleDepth, Side};

use super::num;
use super::svg::SvgDoc;

fn origin_text(o: &FeatureOrigin) -> String {
    match o {
        FeatureOrigin::Grid => "grid".to_string(),
        FeatureOrigin::Element { name } => format!("element:{name}"),
        FeatureOrigin::Beam { source, index } => format!("beam:{source}:{index}"),
    }
}

/// Feature labels: holes `H1..`, pockets `P1..`, channels `C1..`, in
/// feature order.
fn labels(plate: &Plate) -> Vec<String> {
    let (mut h, mut p, mut c) = (0, 0, 0);
    plate
        .features
        .iter()
        .map(|f| match f {
            PlateFeature::Hole { .. } => {
                h += 1;
                format!("H{h}")
            }
            PlateFeature::Pocket { .. } => {
                p += 1;
                format!("P{p}")
            }
            PlateFeature::Channel { .. } => {
                c += 1;
                format!("C{c}")
            }
        })
        .collect()
}

fn depth_text(d: f64, dz: f64) -> String {
    if d >= dz {
        "through".to_string()
    } else {
        num(d)
    }
}

pub const DRILL_HEADER: [&str; 15] = [
    "id",
    "type",
    "origin",
    "x",
    "y",
    "diameter",
    "depth",
    "counterbore_diameter",
    "counterbore_depth",
    "counterbore_side",
    "thread",
    "width",
    "length",
    "heading_deg",
    "x2_y2",
];

/// Feature table. Holes fill the diameter, counterbore and thread columns;
/// pockets fill width, length and heading; channels give both end points.
pub fn drill_csv(plate: &Plate) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DRILL_HEADER).expect("in-memory write");
    for (f, id) in plate.features.iter().zip(labels(plate)) {
        let mut row = vec![String::new(); DRILL_HEADER.len()];
        row[0] = id;
        row[2] = origin_text(f.origin());
        match f {
            PlateFeature::Hole {
                at,
                diameter,
                depth,
                counterbore,
                thread,
                ..
            } => {
                row[1] = "hole".into();
                row[3] = num(at.x);
                row[4] = num(at.y);
                row[5] = num(*diameter);
                row[6] = match depth {
                    HoleDepth::Through => "through".into(),
                    HoleDepth::Blind(d) => depth_text(*d, plate.dz),
                };
                if let Some(cb) = counterbore {
                    row[7] = num(cb.diameter);
                    row[8] = num(cb.depth);
                    row[9] = match cb.side {
                        Side::Top => "top".into(),
                        Side::Bottom => "bottom".into(),
                    };
                }
                row[10] = thread.clone().unwrap_or_default();
            }
            PlateFeature::Pocket {
                center,
                heading,
                width,
                length,
                depth,
                ..
            } => {
                row[1] = "pocket".into();
                row[3] = num(center.x);
                row[4] = num(center.y);
                row[6] = depth_text(*depth, plate.dz);
                row[11] = num(*width);
                row[12] = num(*length);
                row[13] = num(heading.degrees());
            }
            PlateFeature::Channel {
                from, to, width, depth, ..
            } => {
                row[1] = "channel".into();
                row[3] = num(from.x);
                row[4] = num(from.y);
                row[6] = depth_text(*depth, plate.dz);
                row[11] = num(*width);
                row[12] = num((*to - *from).norm());
                row[13] = num((*to - *from).angle().degrees());
                row[14] = format!("{} {}", num(to.x), num(to.y));
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Plan view with overall dimensions, every feature outlined and labelled,
/// and thread callouts beside tapped holes.
pub fn drill_svg(plate: &Plate) -> String {
    let margin = 25.0;
    let mut doc = SvgDoc::new(plate.outline().inset(-margin), plate.dy);
    doc.open_group("outline", "fill=\"none\" stroke=\"#000\" stroke-width=\"0.5\"");
    let n = plate.outline();
    doc.rect(n.min.x, n.min.y, n.max.x, n.max.y, "stroke-dasharray=\"2 2\" stroke=\"#888\"");
    let ph = plate.physical_outline();
    doc.rect(ph.min.x, ph.min.y, ph.max.x, ph.max.y, "");
    doc.close_group();

    doc.open_group("dimensions", "stroke=\"#000\" stroke-width=\"0.25\" font-size=\"5\" font-family=\"sans-serif\"");
    let y0 = -10.0;
    doc.line(0.0, y0, plate.dx, y0, "");
    doc.text(plate.dx / 2.0, y0 - 6.0, &format!("{} mm", num(plate.dx)), "text-anchor=\"middle\" stroke=\"none\"");
    let x0 = -10.0;
    doc.line(x0, 0.0, x0, plate.dy, "");
    doc.text(x0 - 2.0, plate.dy / 2.0, &format!("{} mm", num(plate.dy)), "text-anchor=\"end\" stroke=\"none\"");
    doc.text(
        0.0,
        plate.dy + 8.0,
        &format!("{}: thickness {} mm, edge gap {} mm", plate.name, num(plate.dz), num(plate.gap)),
        "stroke=\"none\"",
    );
    doc.close_group();

    doc.open_group("features", "fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"0.3\" font-size=\"3\" font-family=\"sans-serif\"");
    for (f, id) in plate.features.iter().zip(labels(plate)) {
        match f {
            PlateFeature::Hole {
                at,
                diameter,
                counterbore,
                thread,
                ..
            } => {
                doc.circle(at.x, at.y, diameter / 2.0, "");
                if let Some(cb) = counterbore {
                    doc.circle(at.x, at.y, cb.diameter / 2.0, "stroke-dasharray=\"1 1\"");
                }
                let r = counterbore.map_or(*diameter, |c| c.diameter.max(*diameter)) / 2.0;
                let mut label = id;
                if let Some(t) = thread {
                    let _ = write!(label, " {t}");
                }
                doc.text(at.x + r + 0.5, at.y + r + 0.5, &label, "fill=\"#1f4e9c\" stroke=\"none\"");
            }
            PlateFeature::Pocket { center, .. } | PlateFeature::Channel { from: center, .. } => {
                if let crate::components::Shape::Polygon(pts) = f.plan_shape() {
                    doc.polygon(&pts, "");
                }
                doc.text(center.x, center.y, &id, "fill=\"#1f4e9c\" stroke=\"none\" text-anchor=\"middle\"");
            }
        }
    }
    doc.close_group();
    doc.finish()
}

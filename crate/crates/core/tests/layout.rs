mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use beamplan::beam::{BeamIndex, PlacementConstraint};
use beamplan::components::Catalog;
use beamplan::export::{bom_csv, render, Format};
use beamplan::geometry::Heading;
use beamplan::layout::{format_document, generate_grid, parse_document, GridSpec, ParseError, Scene};
use common::*;
use proptest::prelude::*;

const GAP: f64 = INCH / 8.0;

/// Optic-type tables from the Rb SAS listing: (name, scale, base_dz,
/// optics_dz, beam_width).
const OPTIC_TYPES: [(&str, f64, f64, f64, f64); 4] = [
    ("mini_optics", 0.25, INCH / 4.0, 0.5, 1.5),
    ("half_inch_unmounted", 0.5, 3.0 * INCH / 2.0, -INCH / 4.0, 3.0),
    ("half_inch_mounted", 1.0, INCH, INCH / 2.0, 3.0),
    ("one_inch_mounted", 1.25, INCH, INCH, 3.0),
];

/// Elements of the listing: (name, beam index, distance in inches before
/// scaling).
const SAS_ELEMENTS: [(&str, u64, f64); 14] = [
    ("input_mirror_1", 0b1, 1.5),
    ("input_mirror_2", 0b1, 1.0),
    ("half_waveplate_1", 0b1, 1.5),
    ("beam_splitter_1", 0b1, 2.0),
    ("mirror_1", 0b11, 3.5),
    ("splitter", 0b11, 0.75),
    ("half_waveplate_probe", 0b111, 1.75),
    ("probe_mirror_1", 0b111, 1.25),
    ("probe_mirror_2", 0b111, 1.5),
    ("rb_cell", 0b111, 3.5),
    ("pump_mirror_1", 0b110, 3.0),
    ("half_waveplate_pump", 0b110, 4.0),
    ("pump_mirror_2", 0b110, 5.5),
    ("beam_splitter_2", 0b110, 1.5),
];

fn sas_at(optic_type: &str) -> Scene {
    compile_text(&format!("table dx=40 dy=12\nplate rb_sas at (1, 1, 0) with {optic_type}\n"))
}

#[test]
fn optic_type_tables_match_the_listing() {
    let cat = Catalog::bundled();
    for (name, scale, base_dz, optics_dz, beam_width) in OPTIC_TYPES {
        let t = cat.optic_type(name).unwrap();
        assert_eq!(t.scale, scale, "{name}");
        assert!((t.base_dz - base_dz).abs() < 1e-12, "{name}");
        assert!((t.optics_dz - optics_dz).abs() < 1e-12, "{name}");
        assert_eq!(t.beam_width, beam_width, "{name}");
        for role in ["mirror", "waveplate", "splitter", "cube_splitter", "rb_cell", "photodiode"] {
            assert!(t.roles.contains_key(role), "{name} lacks {role}");
        }
    }
    let mounted = cat.optic_type("half_inch_mounted").unwrap();
    assert_eq!(mounted.roles["mirror"].mounts.as_deref(), Some(&["mirror_mount_km05".to_string()][..]));
    assert_eq!(mounted.roles["photodiode"].component, "photodetector_pda10a2");
    let one = cat.optic_type("one_inch_mounted").unwrap();
    assert_eq!(one.roles["mirror"].params["diameter"], INCH);
    assert_eq!(one.roles["cube_splitter"].params["cube_size"], 20.0);
    let mini = cat.optic_type("mini_optics").unwrap();
    assert_eq!(mini.roles["mirror"].component, "square_mirror");
    assert_eq!(mini.roles["mirror"].params["width"], 3.0);
}

#[test]
fn sas_plates_follow_the_listing() {
    for (name, scale, base_dz, optics_dz, beam_width) in OPTIC_TYPES {
        let scene = sas_at(name);
        assert!(scene.diagnostics.is_empty(), "{name}: {:?}", scene.diagnostics);
        let p = &scene.plates[0];
        assert!((p.dx - scale * 18.0 * INCH).abs() < 1e-9);
        assert!((p.dy - scale * 6.0 * INCH).abs() < 1e-9);
        assert!((p.dz - base_dz).abs() < 1e-12);
        assert!((p.optics_dz - optics_dz).abs() < 1e-12);
        assert!((p.gap - GAP).abs() < 1e-12);
        let src: BTreeMap<&str, _> = p.sources.iter().map(|s| (s.name.as_str(), s)).collect();
        assert!((src["alt"].origin.x - (p.dx - scale * 1.5 * INCH)).abs() < 1e-9);
        assert!((src["input"].origin.x - (p.dx - scale * 2.5 * INCH)).abs() < 1e-9);
        for s in src.values() {
            assert_eq!(s.origin.y, 0.0);
            assert_eq!(s.heading, Heading::from_degrees(90.0));
            assert_eq!(s.drill_width, beam_width);
        }

        assert_eq!(p.elements.len(), 15);
        for (el, index, inches) in SAS_ELEMENTS {
            let e = p.element(el).unwrap_or_else(|| panic!("{name}: {el} missing"));
            let pl = e.placement.as_ref().unwrap();
            assert_eq!(pl.index, BeamIndex(index), "{name}/{el}");
            assert_eq!(pl.source, "input");
            assert!((pl.distance - scale * inches * INCH).abs() < 1e-9, "{name}/{el}");
        }
        let pd = p.element("photodiode").unwrap().placement.clone().unwrap();
        assert_eq!(pd.index, BeamIndex(0b1110));
        let expected = match name {
            "mini_optics" | "half_inch_unmounted" => PlacementConstraint::AbsX(GAP),
            "half_inch_mounted" => PlacementConstraint::Distance(2.0 * INCH),
            _ => PlacementConstraint::Distance(1.25 * 2.0 * INCH),
        };
        assert_eq!(pd.constraint, expected, "{name}");
        assert!(pd.from_role);
    }
}

#[test]
fn golden_sas_document_compiles_quickly() {
    let t = Instant::now();
    let scene = compile_layout("rb_sas.optl");
    let elapsed = t.elapsed();
    assert!(scene.diagnostics.is_empty(), "{:?}", scene.diagnostics);
    assert_eq!(scene.plates.len(), 4);
    for p in &scene.plates {
        assert_eq!(p.elements.len(), 15);
        assert_eq!(p.element("photodiode").unwrap().placement.as_ref().unwrap().index, BeamIndex(0b1110));
    }
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
}

#[test]
fn layout_scales_with_the_optic_type() {
    let small = distance_positions(&sas_at("mini_optics"));
    let large = distance_positions(&sas_at("one_inch_mounted"));
    assert_eq!(small.len(), 14);
    assert_eq!(small.keys().collect::<Vec<_>>(), large.keys().collect::<Vec<_>>());
    for (name, (x, y)) in &small {
        let (xl, yl) = large[name];
        assert!((x / 0.25 - xl / 1.25).abs() <= 1e-9, "{name} x");
        assert!((y / 0.25 - yl / 1.25).abs() <= 1e-9, "{name} y");
    }
}

#[test]
fn laser_cooling_document_is_clean() {
    let scene = compile_layout("laser_cooling.optl");
    assert!(scene.diagnostics.is_empty(), "{:?}", scene.diagnostics);
    assert_eq!(scene.table, (36.0, 22.0));
    assert_eq!(scene.wavelength_nm, 421.6);
    let names: Vec<&str> = scene.plates.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["ecdl", "rb_sas", "singlepass", "doublepass"]);
}

#[test]
fn compile_and_exports_are_deterministic() {
    let run = || {
        let scene = compile_layout("laser_cooling.optl");
        let mut out = vec![("dump".to_string(), scene.dump().into_bytes())];
        for f in [Format::Stl, Format::Svg, Format::Bom, Format::Drill, Format::Scene] {
            out.extend(render(&scene, f).unwrap());
        }
        out
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), b.len());
    for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between runs");
    }
}

#[test]
fn scene_dump_round_trips() {
    let scene = compile_layout("laser_cooling.optl");
    let dump = scene.dump();
    assert!(dump.contains("\"0b1110\""));
    let back = Scene::load(&dump).unwrap();
    assert_eq!(back, scene);
    assert_eq!(back.dump(), dump);
}

#[test]
fn grid_demo_compiles_with_expected_bom() {
    let t = Instant::now();
    let scene = compile_layout("grid_demo.optl");
    let elapsed = t.elapsed();
    assert_eq!(scene.error_count(), 0, "{:?}", scene.diagnostics);
    assert_eq!(scene.plates.len(), 86);
    let totals = bom_totals(&bom_csv(&scene));
    assert_eq!(totals["circular_mirror"], 36);
    assert_eq!(totals["mirror_mount_km05"], 36);
    assert_eq!(totals["waveplate"], 50);
    assert_eq!(totals["rotation_stage_rsp05"], 50);
    assert!(elapsed.as_secs_f64() < 5.0, "{elapsed:?}");
}

proptest! {
    #[test]
    fn grid_expansion_is_a_full_lattice(rows in 1u32..8, cols in 1u32..8, pitch in 0.5..3.0f64, x in 0.0..10.0f64, y in 0.0..10.0f64) {
        let g = generate_grid("cell", "g", GridSpec { rows, cols, pitch }, (x, y, 0.0));
        prop_assert_eq!(g.len(), (rows * cols) as usize);
        let mut names: Vec<_> = g.iter().map(|i| i.name.clone().unwrap()).collect();
        names.sort();
        names.dedup();
        prop_assert_eq!(names.len(), g.len());
        for i in &g {
            let (r, c) = ((i.x - x) / pitch, (i.y - y) / pitch);
            prop_assert!((r - r.round()).abs() < 1e-9 && (c - c.round()).abs() < 1e-9);
            prop_assert!(r.round() < rows as f64 && c.round() < cols as f64);
        }
    }
}

#[test]
fn bundled_layouts_are_canonically_formatted() {
    for f in ["rb_sas.optl", "laser_cooling.optl", "grid_demo.optl", "prelude.optl"] {
        let text = std::fs::read_to_string(layouts_dir().join(f)).unwrap();
        let formatted = format_document(&text).unwrap();
        assert_eq!(formatted, text, "{f}");
        assert_eq!(format_document(&formatted).unwrap(), formatted);
    }
}

#[test]
fn formatting_normalises_whitespace() {
    let messy = "table   dx=36  dy=22\n\n\n   plate rb_sas   at (20,1,90)\n";
    let once = format_document(messy).unwrap();
    assert_eq!(format_document(&once).unwrap(), once);
    // Blank runs collapse, so only line numbers may change.
    let strip = |t: &str| -> Vec<_> {
        parse_document(t)
            .unwrap()
            .instances
            .into_iter()
            .map(|mut i| {
                i.line = 0;
                i
            })
            .collect()
    };
    assert_eq!(strip(&once), strip(messy));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let err = parse_document("table dx=10 dy=10\nplate rb_sas at (1, 1, 0\n").unwrap_err();
    assert_eq!(err.line(), Some(2));
    assert!(matches!(parse_document(""), Err(ParseError::EmptyTable)));
    let err = parse_document("table dx=10 dy=10\nfrobnicate x=1\n").unwrap_err();
    assert_eq!(err.line(), Some(2));
}

fn codes(scene: &Scene) -> Vec<String> {
    scene.diagnostics.iter().map(|d| format!("{} {}", d.code, d.subject)).collect()
}

#[test]
fn semantic_problems_become_diagnostics() {
    let s = compile_text("table dx=20 dy=10\nplate no_such_template at (1, 1, 0)\n");
    assert!(codes(&s).iter().any(|c| c.starts_with("layout.unknown_template")), "{:?}", codes(&s));
    let s = compile_text("table dx=20 dy=10\nplate rb_sas at (1, 1, 0) with no_such_type\n");
    assert!(codes(&s).iter().any(|c| c.starts_with("layout.unknown_optic_type")), "{:?}", codes(&s));
    let s = compile_text("table dx=40 dy=10\nplate rb_sas at (1, 1, 0)\nplate rb_sas at (1, 1, 0)\n");
    assert!(s.has_errors());
    let s = compile_text("table dx=10 dy=10\nplate rb_sas at (1, 1, 0)\n");
    assert!(s.diagnostics.iter().any(|d| d.code == "layout.bounds"), "{:?}", codes(&s));
}

#[test]
fn overlapping_plates_are_reported() {
    let s = compile_text("table dx=40 dy=20\nplate rb_sas at (1, 1, 0) name=a\nplate rb_sas at (5, 3, 0) name=b\n");
    let plates: Vec<_> = s.diagnostics.iter().filter(|d| d.code == "collide.plate").collect();
    assert_eq!(plates.len(), 1, "{:?}", codes(&s));
    assert_eq!(plates[0].subject, "a & b");
}

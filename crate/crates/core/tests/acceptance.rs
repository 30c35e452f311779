//! Acceptance run: one pass/fail line per criterion, non-zero exit on any
//! failure.

mod common;

use std::cell::Cell;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use beamplan::baseplate::{build_solid, detect_collisions, mesh_solid, FeatureOrigin, PlateFeature, Solid};
use beamplan::beam::{littrow_angle, trace, BeamIndex};
use beamplan::components::{Catalog, HoleDepth};
use beamplan::export::{bom_csv, render, Format};
use beamplan::geometry::{Point2, Rect};
use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn golden_sas() -> Outcome {
    let t = Instant::now();
    let scene = compile_layout("rb_sas.optl");
    let elapsed = t.elapsed().as_secs_f64();
    ensure(scene.plates.len() == 4, || format!("{} plates", scene.plates.len()))?;
    ensure(scene.error_count() == 0, || format!("{} errors", scene.error_count()))?;
    let rules: Vec<_> = scene.diagnostics.iter().filter(|d| d.code.starts_with("rule.")).collect();
    ensure(rules.is_empty(), || format!("rule warnings: {rules:?}"))?;
    for p in &scene.plates {
        ensure(p.elements.len() == 15, || format!("{}: {} elements", p.name, p.elements.len()))?;
        let pd = p.element("photodiode").and_then(|e| e.placement.as_ref()).map(|pl| pl.index);
        ensure(pd == Some(BeamIndex(0b1110)), || format!("{}: photodiode on {pd:?}", p.name))?;
    }
    ensure(elapsed < 1.0, || format!("took {elapsed:.3} s"))?;
    Ok(format!("4 scales, 15 elements each, {elapsed:.3} s"))
}

fn scale_covariance() -> Outcome {
    let at = |t: &str| compile_text(&format!("table dx=40 dy=12\nplate rb_sas at (1, 1, 0) with {t}\n"));
    let small = distance_positions(&at("mini_optics"));
    let large = distance_positions(&at("one_inch_mounted"));
    ensure(!small.is_empty(), || "no distance-constrained elements".into())?;
    ensure(small.keys().eq(large.keys()), || "element sets differ".into())?;
    let mut worst = 0.0f64;
    for (name, (x, y)) in &small {
        let (xl, yl) = large[name];
        let err = (x / 0.25 - xl / 1.25).abs().max((y / 0.25 - yl / 1.25).abs());
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("{name}: off by {err:e}"))?;
    }
    Ok(format!("{} elements, worst {worst:.1e} mm", small.len()))
}

fn binary_indexing() -> Outcome {
    let beams = Cell::new(0usize);
    runner(1000)
        .run(&prop::collection::vec(any::<u8>(), 1..40), |bytes| {
            let (spec, _) = splitter_tree(&bytes);
            let out = trace(&spec);
            let tree = out.tree("laser").ok_or_else(|| TestCaseError::fail("no tree"))?;
            check_index_laws(tree).map_err(TestCaseError::fail)?;
            beams.set(beams.get() + tree.beams.len());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("1000 trees, {} beams", beams.get()))
}

fn double_pass_retro() -> Outcome {
    let t = Instant::now();
    let (mut worst_angle, mut worst_offset) = (0.0f64, 0.0f64);
    for k in -10..=10 {
        let deflection = (0.5 * k as f64).to_radians();
        let ((p_in, h_in), (p_out, h_out, freq), rf) = double_pass(deflection);
        let (di, d_out) = (h_in.unit(), h_out.unit());
        let angle = (d_out.x * -di.y - d_out.y * -di.x).atan2(-(d_out.x * di.x + d_out.y * di.y)).abs();
        let offset = ((p_out.x - p_in.x) * di.y - (p_out.y - p_in.y) * di.x).abs();
        worst_angle = worst_angle.max(angle);
        worst_offset = worst_offset.max(offset);
        ensure(angle <= 1e-12, || format!("{:.1} deg: angle {angle:e}", 0.5 * k as f64))?;
        ensure(offset <= 1e-9, || format!("{:.1} deg: offset {offset:e}", 0.5 * k as f64))?;
        ensure(freq == 2.0 * rf, || format!("frequency {freq} for rf {rf}"))?;
    }
    let elapsed = t.elapsed().as_secs_f64();
    ensure(elapsed < 1.0, || format!("took {elapsed:.3} s"))?;
    Ok(format!("21 deflections, worst {worst_angle:.1e} rad / {worst_offset:.1e} mm, {elapsed:.3} s"))
}

fn littrow() -> Outcome {
    let got = littrow_angle(421.6, 3600.0, 1).map_err(|e| e.to_string())?;
    let oracle = asin_fixed_point(4216 * 3600, 20_000_000);
    ensure((got - oracle).abs() <= 1e-12, || format!("421.6 nm: {got} vs {oracle}"))?;
    // Integer wavelength (nm) and groove density keep the sine rational.
    let inputs = (300i128..=1600, 1i128..=3, 0.0..1.0f64).prop_map(|(wl, m, frac)| {
        let max = 1_800_000 / (m * wl);
        (wl, m, ((frac * max as f64) as i128).clamp(1, max))
    });
    let worst = Cell::new(0.0f64);
    runner(100)
        .run(&inputs, |(wl, m, density)| {
            let theta = littrow_angle(wl as f64, density as f64, m as i32).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let oracle = asin_fixed_point(m * wl * density, 2_000_000);
            prop_assert!((theta - oracle).abs() <= 1e-12, "{theta} vs {oracle}");
            let lambda_mm = wl as f64 * 1e-6;
            let residual = 2.0 / density as f64 * theta.sin() - m as f64 * lambda_mm;
            worst.set(worst.get().max(residual.abs() / (m as f64 * lambda_mm)));
            prop_assert!(residual.abs() <= 4.0 * f64::EPSILON * m as f64 * lambda_mm, "residual {residual:e}");
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("oracle within 1e-12, worst relative residual {:.1e}", worst.get()))
}

fn collisions() -> Outcome {
    let cat = Catalog::bundled();
    let ids = all_component_ids(&cat);
    let t = Instant::now();
    let reported = Cell::new(0usize);
    runner(1000)
        .run(&scene_strategy(ids.len()), |spec| {
            let plate = build_scene(&spec, &cat, &ids);
            let found = keys(&detect_collisions(&plate));
            let unique: BTreeSet<DiagKey> = found.iter().cloned().collect();
            prop_assert_eq!(unique.len(), found.len(), "duplicate diagnostics");
            prop_assert_eq!(&unique, &collision_oracle(&plate));
            reported.set(reported.get() + unique.len());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed().as_secs_f64();
    ensure(elapsed < 30.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!("1000 scenes, {} collisions matched, {elapsed:.1} s", reported.get()))
}

fn mesh_ok(solid: &Solid) -> Result<i64, String> {
    let mesh = mesh_solid(solid).map_err(|e| e.to_string())?;
    let topo = stl_topology(&mesh.to_stl("acceptance"));
    ensure(topo.non_manifold == 0, || format!("{} non-manifold edges", topo.non_manifold))?;
    ensure(topo.misoriented == 0, || format!("{} misoriented edges", topo.misoriented))?;
    ensure(topo.signed_volume > 0.0, || "inward normals".into())?;
    let genus = genus_oracle(&solid.cuts(), solid.outline.min, solid.outline.max, solid.dz) as i64;
    ensure(topo.euler() == 2 - 2 * genus, || format!("chi {} for genus {genus}", topo.euler()))?;
    Ok(topo.euler())
}

fn mesh() -> Outcome {
    let block = || Solid::new(Rect::new(Point2::new(0.0, 0.0), Point2::new(100.0, 50.0)), 12.7);
    ensure(mesh_ok(&block())? == 2, || "empty plate chi != 2".into())?;
    let mut holed = block();
    holed.features.push(PlateFeature::Hole {
        at: Point2::new(50.0, 25.0),
        diameter: 6.6,
        depth: HoleDepth::Through,
        counterbore: None,
        thread: None,
        origin: FeatureOrigin::Grid,
    });
    ensure(mesh_ok(&holed)? == 0, || "one-hole plate chi != 0".into())?;
    let mut chis = Vec::new();
    for p in &compile_layout("rb_sas.optl").plates {
        chis.push(mesh_ok(&build_solid(p)).map_err(|e| format!("{}: {e}", p.name))?);
    }
    Ok(format!("empty 2, one hole 0, SAS plates {chis:?}"))
}

fn determinism() -> Outcome {
    let run = || {
        let scene = compile_layout("laser_cooling.optl");
        let mut out = vec![("dump".to_string(), scene.dump().into_bytes())];
        for f in [Format::Stl, Format::Svg, Format::Bom, Format::Drill, Format::Scene] {
            out.extend(render(&scene, f).expect("renders"));
        }
        out
    };
    let (a, b) = (run(), run());
    ensure(a.len() == b.len(), || "artifact count differs".into())?;
    for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
        ensure(na == nb && ba == bb, || format!("{na} differs"))?;
    }
    Ok(format!("{} artifacts identical", a.len()))
}

fn grid_demo() -> Outcome {
    let t = Instant::now();
    let scene = compile_layout("grid_demo.optl");
    let elapsed = t.elapsed().as_secs_f64();
    ensure(scene.error_count() == 0, || format!("{} errors", scene.error_count()))?;
    let totals = bom_totals(&bom_csv(&scene));
    for (id, want) in [("circular_mirror", 36), ("mirror_mount_km05", 36), ("waveplate", 50), ("rotation_stage_rsp05", 50)] {
        let got = totals.get(id).copied().unwrap_or(0);
        ensure(got == want, || format!("{id}: {got} != {want}"))?;
    }
    ensure(elapsed < 5.0, || format!("took {elapsed:.3} s"))?;
    Ok(format!("{} plates, {elapsed:.3} s", scene.plates.len()))
}

fn paraxial_lens() -> Outcome {
    let f = 100.0;
    let m = mat_mul(free_space(f), thin_lens(f));
    let fan = lens_fan(f);
    ensure(fan.len() == 11, || format!("{} rays", fan.len()))?;
    let mut worst = 0.0f64;
    for (y0, at, heading) in fan {
        let y = at.y + (50.0 + f - at.x) * heading.radians().tan();
        let (y_abcd, _) = apply(m, (y0, 0.0));
        ensure((y - y_abcd).abs() <= 1e-9, || format!("y0={y0}: {y} vs ABCD {y_abcd}"))?;
        ensure(y.abs() <= 1e-9, || format!("y0={y0}: misses focus by {y:e}"))?;
        worst = worst.max(y.abs());
    }
    Ok(format!("11 rays, worst {worst:.1e} mm at the focal plane"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("golden SAS at four scales", golden_sas),
        ("scale covariance", scale_covariance),
        ("binary beam indexing", binary_indexing),
        ("double-pass retro-reflection", double_pass_retro),
        ("Littrow angle", littrow),
        ("collision detection", collisions),
        ("mesh validity", mesh),
        ("determinism", determinism),
        ("grid demo", grid_demo),
        ("paraxial lens", paraxial_lens),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({why})", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

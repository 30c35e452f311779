mod common;

use std::collections::BTreeSet;

use beamplan::beam::{child_indices, littrow_angle, trace, BeamFate, BeamIndex, OpticalBehavior};
use beamplan::geometry::{reflect_direction, Heading};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn splitter_trees_obey_the_index_laws(bytes in prop::collection::vec(any::<u8>(), 1..40)) {
        let (spec, internal) = splitter_tree(&bytes);
        let out = trace(&spec);
        let tree = out.tree("laser").unwrap();
        prop_assert!(check_index_laws(tree).is_ok(), "{:?}", check_index_laws(tree));
        if out.issues.is_empty() {
            let branched: BTreeSet<BeamIndex> = tree
                .beams
                .values()
                .filter(|b| matches!(b.fate, BeamFate::Branched { .. }))
                .map(|b| b.index)
                .collect();
            prop_assert!(internal.is_subset(&branched), "{internal:?} vs {branched:?}");
        }
    }

    #[test]
    fn child_rule_holds_for_any_index(i in 1u64..(1 << 62)) {
        let idx = BeamIndex(i);
        let kids = child_indices(idx, &OpticalBehavior::Splitter);
        prop_assert_eq!(kids.iter().map(|k| k.0).collect::<Vec<_>>(), vec![2 * i, 2 * i + 1]);
        for k in &kids {
            prop_assert_eq!(k.parent(), Some(idx));
            prop_assert_eq!(k.depth(), idx.depth() + 1);
            let (p, c) = (idx.to_string(), k.to_string());
            prop_assert!(c.starts_with(&p) && c.len() == p.len() + 1);
            prop_assert_eq!(c.parse::<BeamIndex>().unwrap(), *k);
        }
        // Non-splitting elements keep the index.
        prop_assert_eq!(child_indices(idx, &OpticalBehavior::Mirror), vec![idx]);
    }

    #[test]
    fn reflection_matches_vector_formula(d in 0.0..360.0f64, n in 0.0..360.0f64) {
        let out = reflect_direction(Heading::from_degrees(d), Heading::from_degrees(n));
        let (dx, dy) = (d.to_radians().cos(), d.to_radians().sin());
        let (nx, ny) = (n.to_radians().cos(), n.to_radians().sin());
        let k = 2.0 * (dx * nx + dy * ny);
        let (ex, ey) = (dx - k * nx, dy - k * ny);
        let u = out.unit();
        prop_assert!((u.x - ex).abs() < 1e-12 && (u.y - ey).abs() < 1e-12);
    }

    #[test]
    fn littrow_satisfies_the_grating_equation(
        wl in 300.0..1600.0f64,
        sine in 0.01..0.99f64,
        order in 1i32..=3,
    ) {
        let lambda_mm = wl * 1e-6;
        // Pick the groove density from the Littrow sine so every input is valid.
        let density = 2.0 * sine / (order as f64 * lambda_mm);
        let theta = littrow_angle(wl, density, order).unwrap();
        let residual = 2.0 * (1.0 / density) * theta.sin() - order as f64 * lambda_mm;
        prop_assert!(residual.abs() <= 4.0 * f64::EPSILON * order as f64 * lambda_mm, "residual {residual:e}");
    }
}

#[test]
fn root_index_and_text_form() {
    assert_eq!(BeamIndex::ROOT.to_string(), "0b1");
    assert_eq!("0b1110".parse::<BeamIndex>().unwrap(), BeamIndex(14));
    assert!("0b0".parse::<BeamIndex>().is_err());
    assert!("1110".parse::<BeamIndex>().is_err());
    assert!(BeamIndex(8).is_trunk() && !BeamIndex(9).is_trunk());
}

#[test]
fn arcsine_oracle_is_sound() {
    assert!((asin_fixed_point(1, 2) - std::f64::consts::FRAC_PI_6).abs() < 1e-15);
    assert!((asin_fixed_point(0, 1)).abs() == 0.0);
    assert!((asin_fixed_point(-1, 2) + std::f64::consts::FRAC_PI_6).abs() < 1e-15);
}

#[test]
fn littrow_matches_high_precision_oracle() {
    // 1 * 421.6e-6 mm * 3600 / mm / 2 = 0.75888 exactly.
    let oracle = asin_fixed_point(75_888, 100_000);
    let got = littrow_angle(421.6, 3600.0, 1).unwrap();
    assert!((got - oracle).abs() <= 1e-12, "{got} vs {oracle}");
    assert!(littrow_angle(780.0, 3600.0, 1).is_err(), "no solution past grazing");
    assert!(littrow_angle(421.6, 3600.0, 0).is_err(), "zeroth order has no Littrow angle");
}

#[test]
fn paraxial_fan_focuses_at_the_focal_length() {
    let f = 100.0;
    let m = mat_mul(free_space(f), thin_lens(f));
    for (y0, at, heading) in lens_fan(f) {
        // Height at the back focal plane from the traced segment.
        let slope = heading.radians().tan();
        let y_traced = at.y + (50.0 + f - at.x) * slope;
        let (y_abcd, _) = apply(m, (y0, 0.0));
        assert!((y_traced - y_abcd).abs() <= 1e-9, "y0={y0}: {y_traced} vs {y_abcd}");
        assert!(y_traced.abs() <= 1e-9);
        let (_, theta) = apply(thin_lens(f), (y0, 0.0));
        assert!((slope - theta).abs() <= 1e-12, "slope {slope} vs {theta}");
    }
}

#[test]
fn diverging_lens_matches_abcd() {
    let f = -80.0;
    for (y0, at, heading) in lens_fan(f) {
        let slope = heading.radians().tan();
        for d in [10.0, 40.0, 120.0] {
            let (y, _) = apply(mat_mul(free_space(d), thin_lens(f)), (y0, 0.0));
            let y_traced = at.y + (50.0 + d - at.x) * slope;
            assert!((y - y_traced).abs() <= 1e-9);
        }
    }
}

#[test]
fn double_pass_returns_along_the_input() {
    for k in -10..=10 {
        let deflection = (0.5 * k as f64).to_radians();
        let ((p_in, h_in), (p_out, h_out, freq), rf) = double_pass(deflection);
        let (di, d_out) = (h_in.unit(), h_out.unit());
        // Angle between the output and the reversed input.
        let angle = (d_out.x * -di.y - d_out.y * -di.x).atan2(-(d_out.x * di.x + d_out.y * di.y));
        assert!(angle.abs() <= 1e-12, "deflection {deflection}: angle {angle:e}");
        let lateral = ((p_out.x - p_in.x) * di.y - (p_out.y - p_in.y) * di.x).abs();
        assert!(lateral <= 1e-9, "deflection {deflection}: offset {lateral:e}");
        assert_eq!(freq, 2.0 * rf);
    }
}

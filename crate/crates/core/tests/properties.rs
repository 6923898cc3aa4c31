mod common;

use num_complex::Complex64;
use proptest::prelude::*;

use cpi_core::analysis::{
    dof_interval, double_slit, modality_image, visibility, visibility_map, DofOptions, Modality,
};
use cpi_core::engine::{
    coherent_psf, gamma_map, ghost_image, incoherent_psf, plan_object_sampling, refocus, GammaOptions,
    ImageProfile,
};
use cpi_core::io::{decode_tensor, encode_tensor};
use cpi_core::speckle::{fresnel_propagate, max_fresnel_distance, generate_frames, PropagationPlan};
use cpi_core::{make_slit_mask, SampledGrid, ScenarioConfig};

fn paper() -> ScenarioConfig {
    ScenarioConfig::paper_setup()
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn resolution_and_dof_are_tied_to_the_aperture(lambda in 300e-9f64..1.1e-6, na in 0.005f64..0.5) {
        let cfg = ScenarioConfig { wavelength: lambda, source_na: na, ..paper() };
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        prop_assert!(rel(cfg.focused_resolution() * na, lambda) < 1e-14);
        prop_assert!(rel(cfg.dof_standard() * na * na, lambda) < 1e-14);
    }

    #[test]
    fn slit_masks_are_even(n in 1usize..8, a in 0.5e-6f64..200e-6, gap in 0.0f64..300e-6, x in -2e-3f64..2e-3) {
        let m = make_slit_mask(n, a, a + gap).unwrap();
        prop_assert_eq!(m.transmission_at(x), m.transmission_at(-x));
        let g = SampledGrid::centered(101, 4e-6).unwrap();
        let s = m.sample(&g);
        for i in 0..g.len() {
            prop_assert!((s[i] - s[g.len() - 1 - i]).norm() < 1e-12);
        }
    }

    #[test]
    fn angular_resolution_grows_with_distance_under_diffraction(a in 5e-6f64..200e-6, z1 in 0.02f64..0.5, dz in 0.0f64..0.5) {
        let mask = make_slit_mask(1, a, a).unwrap();
        let near = paper().with_z_b(z1).derived_quantities(&mask);
        let far = paper().with_z_b(z1 + dz).derived_quantities(&mask);
        prop_assume!(near.diffraction_term >= near.lens_term.max(near.pixel_term));
        prop_assert!(far.angular_resolution >= near.angular_resolution);
    }

    #[test]
    fn incoherent_psf_is_squared_coherent_psf(z_b in 0.05f64..0.2) {
        let cfg = paper().with_z_b(z_b);
        let g = SampledGrid::centered(401, 0.25e-6).unwrap();
        let j = incoherent_psf(&cfg, &g).unwrap();
        let c = coherent_psf(&cfg, &g).unwrap();
        let c2: Vec<f64> = c.values.iter().map(|v| v.norm_sqr()).collect();
        let peak = c2.iter().copied().fold(0.0, f64::max);
        let jp = j.peak();
        for (a, b) in j.values.iter().zip(&c2) {
            prop_assert!((a / jp - b / peak).abs() < 1e-10);
        }
    }

    #[test]
    fn visibility_ignores_positive_rescaling(
        ratio in 1.5f64..5.0,
        defocus in -3e-3f64..3e-3,
        scale in prop_oneof![1e-12f64..1e-3, 1e-3f64..1e3, 1e3f64..1e12],
    ) {
        let cfg = paper();
        let mask = double_slit(ratio * cfg.focused_resolution()).unwrap();
        let img = modality_image(Modality::Standard, &cfg, &mask, cfg.z_a + defocus).unwrap();
        let scaled = ImageProfile { values: img.values.iter().map(|v| v * scale).collect(), ..img.clone() };
        let v0 = visibility(&img, &mask).unwrap();
        let v1 = visibility(&scaled, &mask).unwrap();
        prop_assert!((v0 - v1).abs() < 1e-12, "{} vs {}", v0, v1);
    }

    #[test]
    fn fresnel_steps_conserve_power(
        seed in any::<u64>(),
        frac in 0.0f64..1.0,
    ) {
        use rand::{Rng, SeedableRng};
        let g = SampledGrid::centered(256, 10e-6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let field: Vec<Complex64> = (0..g.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let z = frac * max_fresnel_distance(&g, 532e-9);
        let out = fresnel_propagate(&field, &g, z, 532e-9).unwrap();
        let p0: f64 = field.iter().map(|v| v.norm_sqr()).sum();
        let p1: f64 = out.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!(((p1 - p0) / p0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn correlation_function_is_non_negative(
        n in 1usize..4,
        a_um in 10.0f64..60.0,
        pitch_factor in 1.2f64..2.5,
        z_b in 0.08f64..0.12,
    ) {
        let cfg = paper().with_z_b(z_b);
        let mask = make_slit_mask(n, a_um * 1e-6, pitch_factor * a_um * 1e-6).unwrap();
        let ga = SampledGrid::centered(48, 12e-6).unwrap();
        let gb = SampledGrid::centered(24, 150e-6).unwrap();
        let t = gamma_map(&cfg, &mask, &ga, &gb).unwrap();
        prop_assert!(t.values().iter().all(|&v| v >= 0.0));
        prop_assert!(ghost_image(&t).values.iter().all(|&v| v >= 0.0));
        prop_assert!(refocus(&t).image.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn fft_correlation_matches_direct_quadrature(
        a_um in 15.0f64..60.0,
        z_b in 0.085f64..0.12,
    ) {
        let cfg = paper().with_z_b(z_b);
        let mask = make_slit_mask(3, a_um * 1e-6, 2.0 * a_um * 1e-6).unwrap();
        let ga = SampledGrid::centered(24, 20e-6).unwrap();
        let gb = SampledGrid::centered(16, 150e-6).unwrap();
        let fft = gamma_map(&cfg, &mask, &ga, &gb).unwrap();
        let nodes = plan_object_sampling(&cfg, &mask, &ga, &gb, &GammaOptions::default()).unwrap();
        let direct = common::gamma_trapezoid(&cfg, &mask, &ga, &gb, &nodes);
        prop_assert!(common::relative_rmse(fft.values(), &direct) < 1e-6);
    }

    #[test]
    fn tensor_files_round_trip_exactly(
        values in proptest::collection::vec(0.0f64..1e6, 12),
        spacing in 1e-7f64..1e-4,
    ) {
        let ga = SampledGrid::centered(4, spacing).unwrap();
        let gb = SampledGrid::centered(3, 10.0 * spacing).unwrap();
        let t = cpi_core::engine::CorrelationTensor::new(values, ga, gb, paper(), cpi_core::engine::Provenance::Analytic).unwrap();
        let (back, spec) = decode_tensor(&encode_tensor(&t, Some("slits:n=2,a=1e-5,d=2e-5")).unwrap()).unwrap();
        prop_assert_eq!(back, t);
        prop_assert_eq!(spec.as_deref(), Some("slits:n=2,a=1e-5,d=2e-5"));
    }

    #[test]
    fn frame_generation_is_reproducible(seed in any::<u64>()) {
        let cfg = paper().with_z_b(paper().z_a);
        let plan = PropagationPlan::desk(&cfg, 16, 8).unwrap();
        let mask = make_slit_mask(2, 28e-6, 56e-6).unwrap();
        let a = generate_frames(&cfg, &mask, &plan, 3, seed).unwrap();
        let b = generate_frames(&cfg, &mask, &plan, 3, seed).unwrap();
        prop_assert!(a == b);
    }
}

proptest! {
    #![proptest_config(cases(6))]

    #[test]
    fn standard_visibility_never_recovers_with_defocus(ratio in 1.5f64..6.0) {
        let cfg = paper();
        let defocus: Vec<f64> = (-12..=12).map(|i| i as f64 * 0.5e-3).collect();
        let map = visibility_map(Modality::Standard, &cfg, &[ratio], &defocus).unwrap();
        let centre = defocus.len() / 2;
        for j in centre..defocus.len() - 1 {
            prop_assert!(map.get(0, j + 1) <= map.get(0, j) + 1e-9, "far side at {}", defocus[j + 1]);
        }
        for j in 1..=centre {
            prop_assert!(map.get(0, j - 1) <= map.get(0, j) + 1e-9, "near side at {}", defocus[j - 1]);
        }
    }

    #[test]
    fn plenoptic_dof_contains_standard_dof(ratio in 1.5f64..20.0) {
        let cfg = paper();
        let mask = double_slit(ratio * cfg.focused_resolution()).unwrap();
        let opts = DofOptions::default();
        let std = dof_interval(Modality::Standard, &cfg, &mask, &opts).unwrap();
        let pi = dof_interval(Modality::StandardPi(3), &cfg, &mask, &opts).unwrap();
        prop_assume!(!std.is_empty() && !pi.is_empty());
        prop_assert!(pi.near <= std.near + opts.tolerance && pi.far >= std.far - opts.tolerance,
            "standard [{}, {}] vs plenoptic [{}, {}]", std.near, std.far, pi.near, pi.far);
    }
}

#[test]
fn cpi_depth_of_field_is_asymmetric() {
    let cfg = paper();
    let mask = double_slit(0.198e-3).unwrap();
    let opts = DofOptions::default();
    let iv = dof_interval(Modality::CpiRefocused, &cfg, &mask, &opts).unwrap();
    assert!(iv.resolved);
    let near = cfg.z_a - iv.near;
    let far = iv.far - cfg.z_a;
    assert!((near - far).abs() > 10.0 * opts.tolerance, "near {near} far {far}");
}

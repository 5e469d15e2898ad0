//! Property checks on random inputs.

use std::f64::consts::PI;

use grover_optics::analysis::find_peaks_in;
use grover_optics::cli::parse_config;
use grover_optics::field::{BeamParams, Field, GridSpec, Plane};
use grover_optics::optics::{apply_plate, Direction, LensTransform, PlateSpec, Spot};
use grover_optics::twomode::{self, TwoModeParams};
use ndarray::Array2;
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn field_from(values: &[(f64, f64)], n: usize) -> Array2<C> {
    Array2::from_shape_fn((n, n), |(r, c)| {
        let (a, b) = values[(r * n + c) % values.len()];
        C::new(a, b) * (1.0 + ((r * 31 + c * 17) % 7) as f64)
    })
}

fn resolved(finesse: f64) -> bool {
    let r = twomode::reflectivity_for_finesse(finesse);
    let p = TwoModeParams::new(0.05, (1.0 - r).sqrt(), 0.0).unwrap();
    let alphas: Vec<f64> = (0..4000).map(|k| -PI + 2.0 * PI * k as f64 / 4000.0).collect();
    let power: Vec<f64> = twomode::spectrum(&p, &alphas).unwrap().iter().map(|s| s.total_power()).collect();
    find_peaks_in(&alphas, &power, 0.5).unwrap().peaks.len() >= 2
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lens_transform_is_unitary(values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..64)) {
        let n = 64;
        let x = field_from(&values, n);
        let lt = LensTransform::new(n);
        let mut y = x.clone();
        lt.transform_pixels(&mut y, Direction::Forward);
        let p0: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let p1: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        prop_assume!(p0 > 0.0);
        prop_assert!((p1 / p0 - 1.0).abs() < 1e-12);
        lt.transform_pixels(&mut y, Direction::Inverse);
        let err = (&y - &x).iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12 * p0.sqrt());
    }

    #[test]
    fn phase_plates_preserve_power(
        cx in -4.0f64..4.0, cy in -4.0f64..4.0, radius in 1.0f64..3.0,
        phase in -3.1f64..3.1, passes in 1u32..4,
    ) {
        let beam = BeamParams::from_channels(656e-9, 0.34, 20.0).unwrap();
        let grid = GridSpec::auto(&beam, 256).unwrap();
        let dx = grid.dx();
        let plate = PlateSpec::with_spots(
            Plane::Image,
            vec![Spot { center: [cx * dx * 4.0, cy * dx * 4.0], radius: radius * dx * 2.0, phase }],
            passes,
        ).unwrap();
        let amps = field_from(&[(0.3, -0.2), (0.1, 0.5), (-0.7, 0.2)], grid.n());
        let f = Field::new(grid, Plane::Image, amps).unwrap();
        let g = apply_plate(&f, &plate, passes).unwrap();
        prop_assert!((g.power() / f.power() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn manifest_round_trips(
        channels in 150.0f64..800.0, reflectivity in 0.5f64..0.98,
        excess in 0.0f64..0.3, trips in 1usize..200,
    ) {
        let text = format!(
            "kind = \"pulse\"\n[beam]\nchannels = {channels}\n[loss]\nreflectivity = {reflectivity}\nexcess = {excess}\n[run]\nround_trips = {trips}\n"
        );
        let m = parse_config(&text).unwrap();
        let again = parse_config(&m.to_toml()).unwrap();
        prop_assert_eq!(&again, &m);
        prop_assert_eq!(again.to_toml(), m.to_toml());
    }

    #[test]
    fn doublet_resolution_is_monotone_in_finesse(f1 in 10.0f64..140.0, f2 in 10.0f64..140.0) {
        let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
        prop_assert!(!resolved(lo) || resolved(hi), "resolved at F = {lo} but not at F = {hi}");
    }
}

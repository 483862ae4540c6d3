use kinuq_core::collision::{q_naive, CollisionParams, SpectralKernel};
use kinuq_core::phase_space::{maxwellian_matched_slice, slice_l1, slice_moments, Primitive, VelocityGrid};
use kinuq_core::uq::{lambda_coeff, mc_estimate, sample_variance, select_points, RandomSample};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn spectral_collision_equals_the_direct_sum(half in 2usize..=6, seed in any::<u64>()) {
        let n = 2 * half;
        let vg = VelocityGrid::new(n, 8.0).unwrap();
        let k = SpectralKernel::build(CollisionParams::default(), &vg).unwrap();
        let f: Vec<f64> = RandomSample::from_stream(seed, 0, n * n).z.iter().map(|z| 0.5 * (z + 1.0)).collect();
        let a = k.apply(&f).unwrap();
        let b = q_naive(&f, &k).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10, "{x} vs {y} at N = {n}");
        }
    }

    #[test]
    fn l1_distance_is_a_metric(seed in any::<u64>()) {
        let vg = VelocityGrid::new(8, 8.0).unwrap();
        let draw = |s| RandomSample::from_stream(seed, s, 64).z;
        let (a, b, c) = (draw(0), draw(1), draw(2));
        let (ab, ba, ac, bc) = (slice_l1(&a, &b, &vg), slice_l1(&b, &a, &vg), slice_l1(&a, &c, &vg), slice_l1(&b, &c, &vg));
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(slice_l1(&a, &a, &vg), 0.0);
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn fitted_maxwellian_carries_its_moments(
        rho in 0.1f64..2.0,
        ux in -1.0f64..1.0,
        uy in -1.0f64..1.0,
        temp in 0.1f64..2.0,
        fine in any::<bool>(),
    ) {
        // spacing 1 cannot carry a Maxwellian much narrower than the Sod right state
        prop_assume!(fine || temp >= 0.25);
        let vg = VelocityGrid::new(if fine { 32 } else { 16 }, 8.0).unwrap();
        let mut s = vec![0.0; vg.slice_len()];
        let p = Primitive::new(rho, ux, uy, temp);
        maxwellian_matched_slice(p, &vg, &mut s);
        let q = slice_moments(&s, &vg, 0).unwrap();
        prop_assert!((q.rho - rho).abs() <= 1e-12 * rho);
        prop_assert!((q.ux - ux).abs() <= 1e-11 && (q.uy - uy).abs() <= 1e-11);
        prop_assert!((q.temp - temp).abs() <= 1e-11 * temp.max(1.0));
    }

    #[test]
    fn regression_lambda_never_increases_the_variance(seed in any::<u64>(), m in 2usize..40) {
        let fine: Vec<Vec<f64>> = (0..m).map(|i| RandomSample::from_stream(seed, i as u64, 6).z).collect();
        let coarse: Vec<Vec<f64>> = fine
            .iter()
            .zip(0..)
            .map(|(f, i)| {
                let n = RandomSample::from_stream(seed ^ 0x5555, i, 6).z;
                f.iter().zip(&n).map(|(a, b)| 0.8 * a + 0.3 * b).collect()
            })
            .collect();
        let lam = lambda_coeff(&fine, &coarse).unwrap();
        let corrected: Vec<Vec<f64>> = fine
            .iter()
            .zip(&coarse)
            .map(|(f, c)| f.iter().zip(c).zip(&lam.values).map(|((a, b), l)| a - l * b).collect())
            .collect();
        let plain: Vec<Vec<f64>> =
            fine.iter().zip(&coarse).map(|(f, c)| f.iter().zip(c).map(|(a, b)| a - b).collect()).collect();
        let (vc, vp) = (sample_variance(&corrected).unwrap(), sample_variance(&plain).unwrap());
        for (a, b) in vc.iter().zip(&vp) {
            prop_assert!(*a <= b * (1.0 + 1e-10) + 1e-15, "{a} > {b}");
        }
    }

    #[test]
    fn point_selection_is_scale_invariant(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let snaps: Vec<Vec<f64>> = (0..12).map(|i| RandomSample::from_stream(seed, i, 20).z).collect();
        let scaled: Vec<Vec<f64>> = snaps.iter().map(|s| s.iter().map(|v| v * scale).collect()).collect();
        let a = select_points(&snaps, 0.1, 6).unwrap();
        let b = select_points(&scaled, 0.1, 6).unwrap();
        prop_assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn sample_mean_commutes_with_shifts(seed in any::<u64>(), shift in -10.0f64..10.0) {
        let s: Vec<Vec<f64>> = (0..17).map(|i| RandomSample::from_stream(seed, i, 5).z).collect();
        let t: Vec<Vec<f64>> = s.iter().map(|v| v.iter().map(|x| x + shift).collect()).collect();
        let (a, b) = (mc_estimate(&s).unwrap(), mc_estimate(&t).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x + shift - y).abs() <= 1e-12 * (1.0 + shift.abs()));
        }
        prop_assert!(sample_variance(&s).unwrap().iter().all(|v| *v >= 0.0));
    }
}

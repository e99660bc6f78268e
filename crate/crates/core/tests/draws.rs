use proptest::prelude::*;
use sevlogit_core::halton::{build_draws, first_primes, halton_uniforms, radical_inverse, standard_normal_quantile};
use statrs::distribution::{ContinuousCDF, Normal};

/// Digit reversal written out longhand, as an independent oracle.
fn reversed_digits(mut i: u64, b: u64) -> f64 {
    let mut num = 0u64;
    let mut den = 1u64;
    while i > 0 {
        num = num * b + i % b;
        den *= b;
        i /= b;
    }
    num as f64 / den as f64
}

#[test]
fn first_eight_values_in_bases_two_and_three() {
    let b2 = [0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875, 0.0625];
    let b3 = [1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0, 4.0 / 9.0, 7.0 / 9.0, 2.0 / 9.0, 5.0 / 9.0, 8.0 / 9.0];
    for i in 0..8 {
        assert_eq!(radical_inverse(i as u64 + 1, 2).unwrap(), b2[i]);
        assert_eq!(radical_inverse(i as u64 + 1, 3).unwrap(), b3[i]);
    }
}

#[test]
fn base_two_is_dyadically_stratified() {
    // Any 16 consecutive indices starting at a multiple of 16 put exactly one
    // point in each interval [k/16, (k+1)/16).
    for start in [0u64, 16, 160, 4096] {
        let mut hits = [0; 16];
        for i in start..start + 16 {
            let u = if i == 0 { 0.0 } else { radical_inverse(i, 2).unwrap() };
            hits[(u * 16.0) as usize] += 1;
        }
        assert_eq!(hits, [1; 16], "start {start}");
    }
}

#[test]
fn quantile_agrees_with_bisection_on_the_cdf() {
    let n = Normal::standard();
    let invert = |p: f64| {
        let (mut lo, mut hi) = (-40.0f64, 40.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if n.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    for &p in &[1e-12, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.97575, 0.999, 1.0 - 1e-6] {
        let z = standard_normal_quantile(p).unwrap();
        assert!((z - invert(p)).abs() < 1e-9, "p={p}: {z} vs {}", invert(p));
    }
}

#[test]
fn normal_draws_have_standard_moments() {
    let d = build_draws(200, 500, 2, 100).unwrap();
    for dim in 0..2 {
        let vals: Vec<f64> = (0..200).flat_map(|o| (0..500).map(move |r| (o, r))).map(|(o, r)| d.get(o, r, dim)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 1e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-2, "var {var}");
    }
}

#[test]
fn builder_matches_a_sequential_loop() {
    let (n_obs, n_draws, n_dims, skip) = (37, 11, 3, 100);
    let u = halton_uniforms(n_obs, n_draws, n_dims, skip).unwrap();
    let d = build_draws(n_obs, n_draws, n_dims, skip).unwrap();
    let bases = first_primes(n_dims);
    let mut k = 0;
    for o in 0..n_obs {
        for r in 0..n_draws {
            let index = skip + 1 + (o * n_draws + r) as u64;
            for (dim, &b) in bases.iter().enumerate() {
                assert_eq!(u[k], reversed_digits(index, b as u64));
                assert_eq!(d.get(o, r, dim), standard_normal_quantile(u[k]).unwrap());
                k += 1;
            }
        }
    }
}

proptest! {
    #[test]
    fn radical_inverse_matches_longhand(i in 1u64..u32::MAX as u64, base_ix in 0usize..6) {
        let b = first_primes(6)[base_ix];
        let u = radical_inverse(i, b).unwrap();
        prop_assert!(u > 0.0 && u < 1.0);
        prop_assert!((u - reversed_digits(i, b as u64)).abs() < 1e-15);
    }

    #[test]
    fn draws_are_finite_and_repeatable(n_obs in 1usize..20, n_draws in 1usize..20, n_dims in 1usize..4, skip in 0u64..1000) {
        let a = build_draws(n_obs, n_draws, n_dims, skip).unwrap();
        let b = build_draws(n_obs, n_draws, n_dims, skip).unwrap();
        prop_assert!(a.values().iter().all(|v| v.is_finite()));
        prop_assert_eq!(a.values(), b.values());
        prop_assert_eq!(a.bases(), &first_primes(n_dims)[..]);
    }

    #[test]
    fn quantile_is_monotone(a in 1e-9f64..1.0, b in 1e-9f64..1.0) {
        prop_assume!(a < b && b < 1.0);
        prop_assert!(standard_normal_quantile(a).unwrap() <= standard_normal_quantile(b).unwrap());
    }
}

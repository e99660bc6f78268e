use proptest::prelude::*;
use sevlogit_core::halton::build_draws;
use sevlogit_core::inference::{
    chi_square_sf, format_p, lr_pooled_test, lr_transferability, marginal_effects, share_below_zero, transferability_matrix,
};
use sevlogit_core::likelihood::simulated_probabilities;
use sevlogit_core::synthetic::{generate_dataset, CovariateLaw, GenConfig};
use sevlogit_core::estimate::{estimate, EstimationOptions};
use sevlogit_core::{
    ChoiceObservation, CompiledModel, Dataset, IndicatorGroup, Level, MixingDistribution, ModelSpec, ParameterDef,
    ParameterVector, Stratum,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const NAMES: [&str; 8] = ["male", "rural", "urban", "speed1", "speed2", "speed3", "daylight", "dark_lighted"];

fn fixture() -> Dataset {
    let rows: [(Level, [f64; 8]); 10] = [
        (Level::None, [1., 1., 0., 0., 1., 0., 1., 0.]),
        (Level::Minor, [0., 0., 1., 1., 0., 0., 0., 1.]),
        (Level::Major, [1., 1., 0., 0., 0., 1., 0., 0.]),
        (Level::None, [1., 0., 1., 0., 1., 0., 1., 0.]),
        (Level::None, [0., 1., 0., 0., 0., 1., 0., 1.]),
        (Level::Minor, [1., 0., 1., 1., 0., 0., 1., 0.]),
        (Level::None, [1., 1., 0., 0., 1., 0., 0., 0.]),
        (Level::Major, [0., 0., 1., 0., 0., 1., 1., 0.]),
        (Level::None, [1., 1., 0., 1., 0., 0., 0., 1.]),
        (Level::Minor, [0., 0., 1., 0., 1., 0., 1., 0.]),
    ];
    Dataset::new(
        Stratum::Normal,
        NAMES.iter().map(|s| s.to_string()).collect(),
        vec![
            IndicatorGroup::new(["rural", "urban"], true),
            IndicatorGroup::new(["speed1", "speed2", "speed3"], true),
            IndicatorGroup::new(["daylight", "dark_lighted"], false),
        ],
        rows.iter()
            .map(|(c, x)| ChoiceObservation { chosen: *c, covariates: x.to_vec() })
            .collect(),
    )
    .unwrap()
}

fn spec() -> ModelSpec {
    ModelSpec::new(vec![
        ParameterDef::constant("c_minor", Level::Minor),
        ParameterDef::fixed("male_major", Level::Major, "male"),
        ParameterDef::fixed("urban_minor", Level::Minor, "urban"),
        ParameterDef::random("speed3_major", Level::Major, "speed3", MixingDistribution::Normal),
        ParameterDef::fixed("speed1_none", Level::None, "speed1"),
        ParameterDef::fixed("dark_none", Level::None, "dark_lighted"),
    ])
}

/// Counterfactual pair written out per variable, independent of the library.
fn toggle(x: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let groups: [&[usize]; 3] = [&[1, 2], &[3, 4, 5], &[6, 7]];
    let complete = [true, true, false];
    let mut on = x.to_vec();
    let mut off = x.to_vec();
    on[k] = 1.0;
    off[k] = 0.0;
    for (g, full) in groups.iter().zip(complete) {
        if g.contains(&k) {
            for &m in g.iter() {
                if m != k {
                    on[m] = 0.0;
                }
            }
            if x[k] == 1.0 && full {
                off[*g.iter().find(|&&m| m != k).unwrap()] = 1.0;
            }
        }
    }
    (on, off)
}

#[test]
fn marginal_effects_match_the_per_observation_definition() {
    let ds = fixture();
    let spec = spec();
    let theta = [0.4, -1.1, 0.6, 0.9, 1.3, 0.8, -0.5];
    let draws = build_draws(ds.len(), 200, 1, 100).unwrap();
    let table = marginal_effects(&spec, &theta, &ds, &draws, None).unwrap();
    let model = CompiledModel::for_dataset(&spec, &ds).unwrap();
    for row in &table.rows {
        let k = NAMES.iter().position(|n| *n == row.variable).unwrap();
        let mut acc = [0.0; 3];
        for (n, obs) in ds.observations().iter().enumerate() {
            let (on, off) = toggle(&obs.covariates, k);
            let p1 = simulated_probabilities(&model, &theta, &on, draws.for_observation(n)).unwrap();
            let p0 = simulated_probabilities(&model, &theta, &off, draws.for_observation(n)).unwrap();
            for l in 0..3 {
                acc[l] += p1[l] - p0[l];
            }
        }
        let brute = acc.map(|a| a / ds.len() as f64);
        assert_eq!(row.effects, brute, "{}", row.variable);
        assert!(row.effects.iter().sum::<f64>().abs() < 1e-10);
    }
    assert_eq!(table.rows.len(), 5);
}

#[test]
fn variables_outside_the_spec_are_rejected() {
    let ds = fixture();
    let draws = build_draws(ds.len(), 10, 1, 100).unwrap();
    let theta = [0.0; 7];
    assert!(marginal_effects(&spec(), &theta, &ds, &draws, Some(&["rural".to_string()])).is_err());
}

#[test]
fn zero_coefficients_give_zero_effects() {
    let ds = fixture();
    let draws = build_draws(ds.len(), 10, 1, 100).unwrap();
    let theta = [0.3, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0];
    let t = marginal_effects(&spec(), &theta, &ds, &draws, Some(&["male".to_string()])).unwrap();
    assert_eq!(t.get("male"), Some(&[0.0, 0.0, 0.0]));
}

#[test]
fn printed_male_row_sums_to_zero() {
    let row: [f64; 3] = ["-0.048", "0.004", "0.044"].map(|s| s.parse().unwrap());
    assert!(row.iter().sum::<f64>().abs() < 1e-12);
}

#[test]
fn pooled_test_anchor() {
    let r = lr_pooled_test(-18_528.20, &[-14_687.87, -1_844.82, -1_594.62], 26).unwrap();
    assert!((r.statistic - 801.78).abs() < 0.01);
    assert!(r.p_value < 1e-100);
    assert_eq!(format_p(r.p_value), "< 0.001");
    let zero = lr_pooled_test(-10.0, &[-4.0, -6.0], 3).unwrap();
    assert_eq!((zero.statistic, zero.p_value), (0.0, 1.0));
    assert!(lr_pooled_test(-10.0, &[-6.0, -6.0], 3).is_err());
}

#[test]
fn transfer_table_arithmetic() {
    let own = [("normal", -14_687.87), ("rain", -1_844.82), ("snow", -1_594.62)];
    let row_df = [15u32, 10, 13];
    let printed = [[0.0, 51.46, 38.09], [414.12, 0.0, 32.92], [664.08, 37.30, 0.0]];
    for a in 0..3 {
        for b in 0..3 {
            if a == b {
                continue;
            }
            // The unprinted foreign-model log-likelihood implied by each cell.
            let ll_a_on_b = own[b].1 - printed[a][b] / 2.0;
            let r = lr_transferability(ll_a_on_b, own[b].1, row_df[a]).unwrap();
            assert!((r.statistic - printed[a][b]).abs() < 0.01, "{} on {}", own[a].0, own[b].0);
            assert!(r.p_value < 0.001);
            let oracle = 1.0 - ChiSquared::new(row_df[a] as f64).unwrap().cdf(r.statistic);
            assert!((r.p_value - oracle).abs() < 1e-12);
        }
    }
}

#[test]
fn chi_square_reference_points() {
    assert!((chi_square_sf(22.31, 13).unwrap() - 0.051).abs() < 1e-3);
    assert!((chi_square_sf(5.99, 2).unwrap() - 0.050).abs() < 1e-3);
    assert!(chi_square_sf(801.78, 26).unwrap() < 1e-100);
    assert!(chi_square_sf(-1.0, 2).is_err());
    assert!(chi_square_sf(1.0, 0).is_err());
}

#[test]
fn share_anchors() {
    let cases = [(-1.91, 2.54, 77.4), (-1.90, 3.67, 69.8), (-2.94, 3.35, 81.0), (-1.32, 2.00, 74.5), (0.78, 1.53, 30.5)];
    for (mu, sigma, pct) in cases {
        assert!((100.0 * share_below_zero(mu, sigma).unwrap() - pct).abs() < 0.1);
    }
}

proptest! {
    #[test]
    fn chi_square_matches_reference(x in 0.0f64..400.0, df in 1u32..120) {
        let ours = chi_square_sf(x, df).unwrap();
        let oracle = ChiSquared::new(df as f64).unwrap().sf(x);
        prop_assert!((ours - oracle).abs() <= 1e-10, "x={} df={}: {} vs {}", x, df, ours, oracle);
    }

    #[test]
    fn chi_square_is_monotone(x in 0.01f64..200.0, dx in 0.01f64..20.0, df in 1u32..60) {
        prop_assert!(chi_square_sf(x + dx, df).unwrap() <= chi_square_sf(x, df).unwrap());
        prop_assert!(chi_square_sf(x, df + 1).unwrap() >= chi_square_sf(x, df).unwrap());
    }

    #[test]
    fn shares_are_complementary(mu in -10.0f64..10.0, sigma in 0.01f64..10.0) {
        let s = share_below_zero(mu, sigma).unwrap() + share_below_zero(-mu, sigma).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lr_p_value_is_the_tail(stat in 0.0f64..300.0, df in 1u32..40) {
        let r = lr_transferability(-100.0 - stat / 2.0, -100.0, df).unwrap();
        prop_assert!((r.p_value - chi_square_sf(r.statistic, df).unwrap()).abs() < 1e-12);
    }
}

fn stratum_config(stratum: Stratum, theta: Vec<f64>, seed: u64) -> GenConfig {
    GenConfig {
        spec: ModelSpec::new(vec![
            ParameterDef::constant("c_minor", Level::Minor),
            ParameterDef::fixed("male_major", Level::Major, "male"),
            ParameterDef::fixed("curve_none", Level::None, "curve"),
        ]),
        theta_true: ParameterVector(theta),
        n_obs: 3_000,
        seed,
        covariate_law: vec![
            CovariateLaw::Indicator { name: "male".into(), rate: 0.7 },
            CovariateLaw::Indicator { name: "curve".into(), rate: 0.3 },
        ],
        stratum,
    }
}

#[test]
fn transfer_matrix_covers_every_ordered_pair() {
    let configs = [
        stratum_config(Stratum::Normal, vec![-0.5, 0.8, 0.4], 1),
        stratum_config(Stratum::Rain, vec![-0.2, -0.6, 1.0], 2),
    ];
    let data: Vec<Dataset> = configs.iter().map(|c| generate_dataset(c).unwrap()).collect();
    let narrow = ModelSpec::new(vec![ParameterDef::constant("c_minor", Level::Minor)]);
    let specs = [configs[0].spec.clone(), narrow];
    let opts = EstimationOptions::default();
    let own: Vec<_> = specs.iter().zip(&data).map(|(s, d)| estimate(s, d, &opts).unwrap()).collect();
    let strata: Vec<_> = [Stratum::Normal, Stratum::Rain]
        .iter()
        .zip(&specs)
        .zip(&data)
        .map(|((s, spec), d)| (*s, spec, d))
        .collect();
    let cells = transferability_matrix(&strata, &own.iter().collect::<Vec<_>>(), &opts).unwrap();
    assert_eq!(cells.len(), 2);
    // Narrow spec on normal data loses fit: a valid positive statistic.
    let c = cells.iter().find(|c| c.model == Stratum::Rain).unwrap();
    let t = c.test.as_ref().unwrap();
    assert_eq!(t.df, 1);
    assert!(t.statistic > 0.0);
    // The wider spec on rain data beats rain's own narrow fit: flagged, not fatal.
    let c = cells.iter().find(|c| c.model == Stratum::Normal).unwrap();
    assert!(c.test.is_none() && c.error.is_some());
}

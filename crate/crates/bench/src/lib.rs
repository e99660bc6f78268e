//! Shared fixtures for the benchmarks.

use sevlogit_core::synthetic::{generate_dataset, CovariateLaw, GenConfig};
use sevlogit_core::{Dataset, Level, MixingDistribution, ModelSpec, ParameterDef, ParameterVector, Stratum};

fn indicator(name: &str, rate: f64) -> CovariateLaw {
    CovariateLaw::Indicator { name: name.into(), rate }
}

/// Eight-slot model with two normally distributed coefficients, sized like a
/// mid-sized weather stratum.
pub fn mixed_fixture(n_obs: usize) -> (GenConfig, Dataset) {
    let config = GenConfig {
        spec: ModelSpec::new(vec![
            ParameterDef::constant("c_major", Level::Major),
            ParameterDef::constant("c_minor", Level::Minor),
            ParameterDef::fixed("male_major", Level::Major, "male"),
            ParameterDef::random("curve_major", Level::Major, "curve", MixingDistribution::Normal),
            ParameterDef::fixed("rural_minor", Level::Minor, "rural"),
            ParameterDef::random("weekend_none", Level::None, "weekend", MixingDistribution::Normal),
        ]),
        theta_true: ParameterVector(vec![-2.0, -0.8, -0.6, 1.0, 0.7, 0.4, 0.3, 0.9]),
        n_obs,
        seed: 11,
        covariate_law: vec![
            indicator("male", 0.85),
            indicator("curve", 0.2),
            indicator("rural", 0.45),
            indicator("weekend", 0.2),
        ],
        stratum: Stratum::Normal,
    };
    let ds = generate_dataset(&config).expect("fixture generates");
    (config, ds)
}

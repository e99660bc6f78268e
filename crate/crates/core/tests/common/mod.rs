#![allow(dead_code)]

use sevlogit_core::data::record::*;
use sevlogit_core::synthetic::{CovariateLaw, GenConfig};
use sevlogit_core::{CrashRecord, Level, MixingDistribution, ModelSpec, ParameterDef, ParameterVector, Stratum};

pub fn record(id: &str, weather: Weather, severity: Severity5) -> CrashRecord {
    CrashRecord {
        crash_id: id.into(),
        severity5: severity,
        weather,
        area: Area::Rural,
        alignment: Alignment::Straight,
        manner: Manner::OtherManner,
        harmful_event: HarmfulEvent::MotorVehicleInTransport,
        lighting: Lighting::Daylight,
        truck_type: TruckType::TractorSemi,
        speed_limit: 65,
        lane_count: 2,
        aadt: 20_000,
        surface: Surface::Asphalt,
        route: Route::Interstate,
        crash_time: 600,
        day: Day::Weekday,
        driver_sex: Sex::Male,
        restraint_used: true,
        location_type: LocationType::Segment,
    }
}

pub fn indicator(name: &str, rate: f64) -> CovariateLaw {
    CovariateLaw::Indicator { name: name.into(), rate }
}

pub fn group(members: &[&str], probabilities: &[f64]) -> CovariateLaw {
    CovariateLaw::Group {
        members: members.iter().map(|m| m.to_string()).collect(),
        probabilities: probabilities.to_vec(),
    }
}

/// Two constants plus four fixed indicator effects.
pub fn mnl_config(n_obs: usize, seed: u64) -> GenConfig {
    GenConfig {
        spec: ModelSpec::new(vec![
            ParameterDef::constant("c_major", Level::Major),
            ParameterDef::constant("c_minor", Level::Minor),
            ParameterDef::fixed("male_major", Level::Major, "male"),
            ParameterDef::fixed("rural_minor", Level::Minor, "rural"),
            ParameterDef::fixed("curve_major", Level::Major, "curve"),
            ParameterDef::fixed("weekend_none", Level::None, "weekend"),
        ]),
        theta_true: ParameterVector(vec![-2.0, -0.8, 0.6, 0.4, 0.9, -0.5]),
        n_obs,
        seed,
        covariate_law: vec![
            indicator("male", 0.85),
            group(&["rural", "urban"], &[0.45, 0.55]),
            indicator("curve", 0.25),
            group(&["weekday", "weekend"], &[0.8, 0.2]),
        ],
        stratum: Stratum::Normal,
    }
}

/// One constant, one fixed effect and one normally distributed effect.
pub fn mixed_config(n_obs: usize, seed: u64) -> GenConfig {
    GenConfig {
        spec: ModelSpec::new(vec![
            ParameterDef::constant("c_minor", Level::Minor),
            ParameterDef::fixed("male_major", Level::Major, "male"),
            ParameterDef::random("curve_major", Level::Major, "curve", MixingDistribution::Normal),
        ]),
        theta_true: ParameterVector(vec![-0.5, -0.3, 1.0, 0.8]),
        n_obs,
        seed,
        covariate_law: vec![indicator("male", 0.5), indicator("curve", 0.6)],
        stratum: Stratum::Normal,
    }
}

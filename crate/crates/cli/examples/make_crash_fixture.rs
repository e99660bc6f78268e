//! Writes the bundled synthetic crash file used by `fixtures/run.json`.
//!
//! Severities are drawn from per-weather mixed logit models, so a run over
//! the file recovers effects of known sign. Usage:
//!
//!     cargo run -p sevlogit-cli --example make_crash_fixture -- fixtures/crashes.csv

use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sevlogit_core::data::record::*;
use sevlogit_core::data::{derive_indicators, indicator_names};

const N_ROWS: usize = 9_000;
const SEED: u64 = 2019;

/// (variable, level index, mean, sd); sd > 0 marks a random coefficient.
type Term = (&'static str, usize, f64, f64);

const NORMAL: &[Term] = &[
    ("CONSTANT", 0, -2.3, 0.0),
    ("CONSTANT", 1, -1.1, 0.0),
    ("male", 0, -1.0, 0.0),
    ("dark_lighted", 0, 0.7, 0.0),
    ("time1", 0, 0.6, 0.0),
    ("rural", 1, 0.5, 0.0),
    ("weekend", 1, -0.6, 1.6),
    ("object", 2, 0.6, 0.0),
];

const RAIN: &[Term] = &[
    ("CONSTANT", 0, -2.4, 0.0),
    ("CONSTANT", 1, -0.9, 0.0),
    ("male", 0, -0.9, 0.0),
    ("single_unit", 1, 0.7, 0.0),
    ("daylight", 2, -0.5, 0.0),
    ("weekend", 1, -0.4, 1.3),
];

const SNOW: &[Term] = &[
    ("CONSTANT", 0, -2.2, 0.0),
    ("CONSTANT", 1, -1.4, 0.0),
    ("male", 0, -0.6, 0.0),
    ("curve", 0, 1.0, 0.0),
    ("interstate", 1, 0.6, 0.0),
    ("urban", 2, -0.6, 0.0),
];

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[(T, f64)]) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(v, p) in items {
        acc += p;
        if u < acc {
            return v;
        }
    }
    items[items.len() - 1].0
}

fn severity(rng: &mut ChaCha8Rng, terms: &[Term], names: &[String], x: &[f64]) -> Severity5 {
    let mut v = [0.0f64; 3];
    for &(var, level, mean, sd) in terms {
        let value = if var == "CONSTANT" {
            1.0
        } else {
            x[names.iter().position(|n| n == var).expect("indicator")]
        };
        let z: f64 = rng.sample(StandardNormal);
        v[level] += (mean + sd * z) * value;
    }
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = v.map(|u| (u - m).exp());
    let total: f64 = e.iter().sum();
    let level = pick(rng, &[(0usize, e[0] / total), (1, e[1] / total), (2, e[2] / total)]);
    let u: f64 = rng.random();
    match (level, u < 0.5) {
        (0, true) => Severity5::Fatal,
        (0, false) => Severity5::Disabling,
        (1, true) => Severity5::Evident,
        (1, false) => Severity5::Possible,
        _ => Severity5::None,
    }
}

fn code5(s: Severity5) -> &'static str {
    match s {
        Severity5::Fatal => "K",
        Severity5::Disabling => "A",
        Severity5::Evident => "B",
        Severity5::Possible => "C",
        Severity5::None => "O",
    }
}

fn main() -> std::io::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "fixtures/crashes.csv".into());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let names = indicator_names();
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(
        out,
        "CASENO,SEV,WEATHER,area,alignment,manner,harmful_event,lighting,truck_type,VEH_TYPE,speed_limit,lane_count,aadt,surface,route,HOUR_MIN,CRASH_DATE,driver_sex,restraint_used,location_type"
    )?;
    let start = NaiveDate::from_ymd_opt(2009, 1, 1).expect("date");
    for i in 0..N_ROWS {
        let weather = pick(
            &mut rng,
            &[(Weather::Normal, 0.70), (Weather::Rain, 0.15), (Weather::Snow, 0.12), (Weather::Other, 0.03)],
        );
        let date = start + Duration::days(rng.random_range(0..1826));
        let day = if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) { Day::Weekend } else { Day::Weekday };
        let truck_type = pick(
            &mut rng,
            &[
                (TruckType::SingleUnit, 0.25),
                (TruckType::TruckTrailer, 0.10),
                (TruckType::TractorSemi, 0.60),
                (TruckType::TractorDouble, 0.05),
            ],
        );
        let mut r = CrashRecord {
            crash_id: format!("{}", 100_000 + i),
            severity5: Severity5::None,
            weather,
            area: pick(&mut rng, &[(Area::Rural, 0.45), (Area::Urban, 0.55)]),
            alignment: pick(&mut rng, &[(Alignment::Curve, 0.15), (Alignment::Straight, 0.85)]),
            manner: pick(
                &mut rng,
                &[(Manner::RearEnd, 0.20), (Manner::Sideswipe, 0.15), (Manner::OtherManner, 0.65)],
            ),
            harmful_event: pick(
                &mut rng,
                &[
                    (HarmfulEvent::MotorVehicleInTransport, 0.60),
                    (HarmfulEvent::FixedOrOtherObject, 0.20),
                    (HarmfulEvent::RanOffRoad, 0.10),
                    (HarmfulEvent::OtherEvent, 0.10),
                ],
            ),
            lighting: pick(
                &mut rng,
                &[
                    (Lighting::Daylight, 0.65),
                    (Lighting::DarkLighted, 0.15),
                    (Lighting::DarkUnlighted, 0.15),
                    (Lighting::OtherLight, 0.05),
                ],
            ),
            truck_type,
            speed_limit: pick(&mut rng, &[(25, 0.05), (35, 0.15), (45, 0.15), (55, 0.25), (65, 0.30), (70, 0.10)]),
            lane_count: pick(&mut rng, &[(2, 0.45), (3, 0.15), (4, 0.30), (6, 0.10)]),
            aadt: pick(&mut rng, &[(8_000u64, 0.3), (30_000, 0.35), (75_000, 0.25), (140_000, 0.10)])
                + rng.random_range(0..5_000),
            surface: pick(&mut rng, &[(Surface::Asphalt, 0.7), (Surface::OtherSurface, 0.3)]),
            route: pick(&mut rng, &[(Route::Interstate, 0.4), (Route::NonInterstate, 0.6)]),
            crash_time: rng.random_range(0..1440),
            day,
            driver_sex: pick(&mut rng, &[(Sex::Male, 0.9), (Sex::Female, 0.1)]),
            restraint_used: rng.random::<f64>() < 0.9,
            location_type: pick(&mut rng, &[(LocationType::Intersection, 0.04), (LocationType::Segment, 0.96)]),
        };
        let x = derive_indicators(&r);
        r.severity5 = match weather {
            Weather::Rain => severity(&mut rng, RAIN, &names, &x),
            Weather::Snow => severity(&mut rng, SNOW, &names, &x),
            _ => severity(&mut rng, NORMAL, &names, &x),
        };
        let weather_code = match weather {
            Weather::Normal => "1",
            Weather::Rain => "2",
            Weather::Snow => "3",
            Weather::Other => "9",
        };
        let veh = match truck_type {
            TruckType::SingleUnit => "21",
            TruckType::TruckTrailer => "22",
            TruckType::TractorSemi => "23",
            TruckType::TractorDouble => "24",
        };
        // A few rows that ingestion must reject or filter.
        let speed = if i % 2_000 == 1_999 { "unknown".to_string() } else { r.speed_limit.to_string() };
        let veh = if i % 1_500 == 700 { "11" } else { veh };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:02}{:02},{},{},{},{}",
            r.crash_id,
            code5(r.severity5),
            weather_code,
            r.area.code(),
            r.alignment.code(),
            r.manner.code(),
            r.harmful_event.code(),
            r.lighting.code(),
            r.truck_type.code(),
            veh,
            speed,
            r.lane_count,
            r.aadt,
            r.surface.code(),
            r.route.code(),
            r.crash_time / 60,
            r.crash_time % 60,
            date.format("%Y-%m-%d"),
            r.driver_sex.code(),
            r.restraint_used,
            r.location_type.code(),
        )?;
    }
    out.flush()
}

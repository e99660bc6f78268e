//! Coding of crash records into the binary indicator scheme.

use super::dataset::IndicatorGroup;
use super::record::*;

/// Indicator names in canonical column order.
pub const INDICATOR_NAMES: [&str; 33] = [
    "male",
    "restraint",
    "rural",
    "urban",
    "curve",
    "rear_end",
    "sideswipe",
    "object",
    "mvit",
    "ran_off",
    "daylight",
    "dark_lighted",
    "dark_unlighted",
    "single_unit",
    "truck_trailer",
    "truck_semi",
    "speed1",
    "speed2",
    "speed3",
    "lane1",
    "lane2",
    "aadt1",
    "aadt2",
    "aadt3",
    "aadt4",
    "asphalt",
    "interstate",
    "time1",
    "time2",
    "time3",
    "time4",
    "weekday",
    "weekend",
];

pub const N_INDICATORS: usize = INDICATOR_NAMES.len();

pub fn indicator_names() -> Vec<String> {
    INDICATOR_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Mutually exclusive groups of the crash indicator scheme.
pub fn crash_groups() -> Vec<IndicatorGroup> {
    vec![
        IndicatorGroup::new(["rural", "urban"], true),
        IndicatorGroup::new(["speed1", "speed2", "speed3"], true),
        IndicatorGroup::new(["lane1", "lane2"], true),
        IndicatorGroup::new(["aadt1", "aadt2", "aadt3", "aadt4"], true),
        IndicatorGroup::new(["time1", "time2", "time3", "time4"], true),
        IndicatorGroup::new(["weekday", "weekend"], true),
        IndicatorGroup::new(["daylight", "dark_lighted", "dark_unlighted"], false),
        IndicatorGroup::new(["rear_end", "sideswipe"], false),
        IndicatorGroup::new(["object", "mvit", "ran_off"], false),
        IndicatorGroup::new(["single_unit", "truck_trailer", "truck_semi"], false),
    ]
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Speed bin index: 0 for ≤ 40 mph, 1 for 41 to 64 mph, 2 for ≥ 65 mph.
pub fn speed_bin(speed_limit: u32) -> usize {
    match speed_limit {
        0..=40 => 0,
        41..=64 => 1,
        _ => 2,
    }
}

pub fn aadt_bin(aadt: u64) -> usize {
    match aadt {
        0..=15_000 => 0,
        15_001..=50_000 => 1,
        50_001..=100_000 => 2,
        _ => 3,
    }
}

/// Time-of-day bin: 07:00 to 09:59, 10:00 to 15:59, 16:00 to 18:59, otherwise.
pub fn time_bin(minutes: u32) -> usize {
    match minutes {
        420..=599 => 0,
        600..=959 => 1,
        960..=1139 => 2,
        _ => 3,
    }
}

/// Indicator values for one record, aligned with [`indicator_names`].
pub fn derive_indicators(r: &CrashRecord) -> Vec<f64> {
    let speed = speed_bin(r.speed_limit);
    let aadt = aadt_bin(r.aadt);
    let time = time_bin(r.crash_time);
    let lanes_wide = r.lane_count >= 4;
    vec![
        flag(r.driver_sex == Sex::Male),
        flag(r.restraint_used),
        flag(r.area == Area::Rural),
        flag(r.area == Area::Urban),
        flag(r.alignment == Alignment::Curve),
        flag(r.manner == Manner::RearEnd),
        flag(r.manner == Manner::Sideswipe),
        flag(r.harmful_event == HarmfulEvent::FixedOrOtherObject),
        flag(r.harmful_event == HarmfulEvent::MotorVehicleInTransport),
        flag(r.harmful_event == HarmfulEvent::RanOffRoad),
        flag(r.lighting == Lighting::Daylight),
        flag(r.lighting == Lighting::DarkLighted),
        flag(r.lighting == Lighting::DarkUnlighted),
        flag(r.truck_type == TruckType::SingleUnit),
        flag(r.truck_type == TruckType::TruckTrailer),
        flag(r.truck_type == TruckType::TractorSemi),
        flag(speed == 0),
        flag(speed == 1),
        flag(speed == 2),
        flag(!lanes_wide),
        flag(lanes_wide),
        flag(aadt == 0),
        flag(aadt == 1),
        flag(aadt == 2),
        flag(aadt == 3),
        flag(r.surface == Surface::Asphalt),
        flag(r.route == Route::Interstate),
        flag(time == 0),
        flag(time == 1),
        flag(time == 2),
        flag(time == 3),
        flag(r.day == Day::Weekday),
        flag(r.day == Day::Weekend),
    ]
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sample_record() -> CrashRecord {
        CrashRecord {
            crash_id: "c1".into(),
            severity5: Severity5::None,
            weather: Weather::Normal,
            area: Area::Rural,
            alignment: Alignment::Straight,
            manner: Manner::RearEnd,
            harmful_event: HarmfulEvent::MotorVehicleInTransport,
            lighting: Lighting::Daylight,
            truck_type: TruckType::TractorSemi,
            speed_limit: 55,
            lane_count: 4,
            aadt: 30_000,
            surface: Surface::Asphalt,
            route: Route::Interstate,
            crash_time: 8 * 60,
            day: Day::Weekday,
            driver_sex: Sex::Male,
            restraint_used: true,
            location_type: LocationType::Segment,
        }
    }

    fn value(values: &[f64], name: &str) -> f64 {
        values[INDICATOR_NAMES.iter().position(|n| *n == name).unwrap()]
    }

    #[test]
    fn speed_55_is_speed2() {
        let v = derive_indicators(&sample_record());
        assert_eq!(
            (value(&v, "speed1"), value(&v, "speed2"), value(&v, "speed3")),
            (0.0, 1.0, 0.0)
        );
    }

    #[test]
    fn speed_bin_edges() {
        assert_eq!(speed_bin(40), 0);
        assert_eq!(speed_bin(45), 1);
        assert_eq!(speed_bin(42), 1);
        assert_eq!(speed_bin(60), 1);
        assert_eq!(speed_bin(65), 2);
    }

    #[test]
    fn half_past_four_is_time3() {
        let mut r = sample_record();
        r.crash_time = 16 * 60 + 30;
        let v = derive_indicators(&r);
        let times: Vec<f64> = ["time1", "time2", "time3", "time4"]
            .iter()
            .map(|n| value(&v, n))
            .collect();
        assert_eq!(times, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn time_bin_edges() {
        assert_eq!(time_bin(419), 3);
        assert_eq!(time_bin(420), 0);
        assert_eq!(time_bin(599), 0);
        assert_eq!(time_bin(600), 1);
        assert_eq!(time_bin(959), 1);
        assert_eq!(time_bin(1139), 2);
        assert_eq!(time_bin(1140), 3);
        assert_eq!(time_bin(0), 3);
    }

    #[test]
    fn aadt_15000_is_aadt1() {
        let mut r = sample_record();
        r.aadt = 15_000;
        let v = derive_indicators(&r);
        assert_eq!(value(&v, "aadt1"), 1.0);
        assert_eq!(value(&v, "aadt2"), 0.0);
        assert_eq!(aadt_bin(15_001), 1);
        assert_eq!(aadt_bin(50_000), 1);
        assert_eq!(aadt_bin(100_000), 2);
        assert_eq!(aadt_bin(100_001), 3);
    }

    #[test]
    fn lane_split_at_four() {
        let mut r = sample_record();
        r.lane_count = 3;
        let v = derive_indicators(&r);
        assert_eq!((value(&v, "lane1"), value(&v, "lane2")), (1.0, 0.0));
    }

    #[test]
    fn every_name_is_emitted() {
        let v = derive_indicators(&sample_record());
        assert_eq!(v.len(), N_INDICATORS);
        assert_eq!(indicator_names().len(), N_INDICATORS);
    }
}

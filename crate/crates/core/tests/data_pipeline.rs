mod common;

use common::record;
use proptest::prelude::*;
use sevlogit_core::data::record::*;
use sevlogit_core::data::{read_dataset, stratify, summarize, write_dataset};
use sevlogit_core::data::schema::{parse_records, CrashSchema};
use sevlogit_core::{ChoiceObservation, Dataset, IndicatorGroup, Level, Stratum};

#[test]
fn ten_records_partition_four_three_two() {
    let mut records = Vec::new();
    for i in 0..4 {
        records.push(record(&format!("n{i}"), Weather::Normal, Severity5::None));
    }
    for i in 0..3 {
        records.push(record(&format!("r{i}"), Weather::Rain, Severity5::Possible));
    }
    for i in 0..2 {
        records.push(record(&format!("s{i}"), Weather::Snow, Severity5::Fatal));
    }
    records.push(record("o", Weather::Other, Severity5::None));
    let s = stratify(&records).unwrap();
    assert_eq!((s.normal.len(), s.rain.len(), s.snow.len()), (4, 3, 2));
    assert_eq!(s.pooled.len(), 9);
    assert_eq!(s.excluded.len(), 1);
    assert_eq!(s.excluded[0].reason, "weather other");
    assert!(s.warnings.is_empty());
    assert_eq!(s.snow.observations()[0].chosen, Level::Major);
}

#[test]
fn intersection_crashes_are_excluded() {
    let mut r = record("x", Weather::Normal, Severity5::None);
    r.location_type = LocationType::Intersection;
    let s = stratify(&[r, record("y", Weather::Rain, Severity5::None)]).unwrap();
    assert_eq!(s.excluded.len(), 1);
    assert_eq!(s.excluded[0].crash_id, "x");
    assert_eq!(s.excluded[0].reason, "intersection");
    assert_eq!(s.warnings, vec!["stratum normal is empty", "stratum snow is empty"]);
}

fn severity_count_fixture(counts: [usize; 3]) -> Vec<CrashRecord> {
    let severities = [Severity5::Disabling, Severity5::Evident, Severity5::None];
    let mut out = Vec::new();
    for (sev, &n) in severities.iter().zip(&counts) {
        for i in 0..n {
            out.push(record(&format!("{i}"), Weather::Normal, *sev));
        }
    }
    out
}

#[test]
fn severity_counts_reproduce_reference_percentages() {
    let cases = [
        ([443, 4_023, 35_993], [1.1, 9.9, 89.0]),
        ([47, 511, 4_308], [1.0, 10.5, 88.5]),
        ([39, 459, 3_425], [1.0, 11.7, 87.3]),
    ];
    for (counts, pct) in cases {
        let s = stratify(&severity_count_fixture(counts)).unwrap();
        let t = summarize(&s.normal).unwrap();
        assert_eq!(t.n, counts.iter().sum::<usize>());
        for (share, expect) in t.levels.iter().zip(pct) {
            assert_eq!((share.percent * 10.0).round() / 10.0, expect);
        }
    }
    let s = stratify(&severity_count_fixture([443, 4_023, 35_993])).unwrap();
    assert_eq!(s.normal.len(), 40_459);
}

#[test]
fn csv_through_stratification() {
    let schema = CrashSchema::from_json(include_str!("fixtures/schema.json")).unwrap();
    let out = parse_records(include_str!("fixtures/crashes.csv").as_bytes(), &schema, false).unwrap();
    assert_eq!(out.records.len(), 3);
    assert_eq!(out.rejects.len(), 1);
    assert_eq!(out.rejects[0].reason, "speed_limit unparseable");
    let s = stratify(&out.records).unwrap();
    assert_eq!(s.normal.len() + s.rain.len() + s.snow.len() + s.excluded.len(), out.records.len());
}

fn arb_record() -> impl Strategy<Value = CrashRecord> {
    (
        0usize..5,
        0usize..4,
        any::<bool>(),
        0usize..4,
        0usize..4,
        5u32..=85,
        1u32..8,
        0u64..200_000,
        0u32..1440,
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(sev, weather, rural, manner, light, speed, lanes, aadt, time, weekend, male, inter)| {
            let mut r = record("p", Weather::Normal, Severity5::None);
            r.severity5 = Severity5::from_code(Severity5::CODES[sev]).unwrap();
            r.weather = Weather::from_code(Weather::CODES[weather]).unwrap();
            r.area = if rural { Area::Rural } else { Area::Urban };
            r.manner = Manner::from_code(Manner::CODES[manner % Manner::CODES.len()]).unwrap();
            r.lighting = Lighting::from_code(Lighting::CODES[light]).unwrap();
            r.speed_limit = speed;
            r.lane_count = lanes;
            r.aadt = aadt;
            r.crash_time = time;
            r.day = if weekend { Day::Weekend } else { Day::Weekday };
            r.driver_sex = if male { Sex::Male } else { Sex::Female };
            r.location_type = if inter { LocationType::Intersection } else { LocationType::Segment };
            r
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_complete(records in prop::collection::vec(arb_record(), 0..60)) {
        let s = stratify(&records).unwrap();
        prop_assert_eq!(s.normal.len() + s.rain.len() + s.snow.len() + s.excluded.len(), records.len());
        prop_assert_eq!(s.pooled.len(), s.normal.len() + s.rain.len() + s.snow.len());
    }

    #[test]
    fn complete_groups_sum_to_one(records in prop::collection::vec(arb_record(), 1..40)) {
        let s = stratify(&records).unwrap();
        for obs in s.pooled.observations() {
            for g in s.pooled.groups().iter().filter(|g| g.complete) {
                let sum: f64 = g.members.iter().map(|m| obs.covariates[s.pooled.column(m).unwrap()]).sum();
                prop_assert_eq!(sum, 1.0);
            }
        }
    }

    #[test]
    fn summary_ignores_order(records in prop::collection::vec(arb_record(), 2..40), seed in any::<u64>()) {
        let s = stratify(&records).unwrap();
        prop_assume!(!s.pooled.is_empty());
        let mut obs = s.pooled.observations().to_vec();
        let k = (seed as usize) % obs.len();
        obs.rotate_left(k);
        obs.reverse();
        let shuffled = s.pooled.with_observations(Stratum::Pooled, obs).unwrap();
        prop_assert_eq!(summarize(&s.pooled).unwrap(), summarize(&shuffled).unwrap());
    }

    #[test]
    fn summary_sd_matches_bernoulli_formula(records in prop::collection::vec(arb_record(), 2..40)) {
        let s = stratify(&records).unwrap();
        prop_assume!(s.pooled.len() >= 2);
        let t = summarize(&s.pooled).unwrap();
        let n = t.n as f64;
        let total: f64 = t.levels.iter().map(|l| l.percent).sum();
        prop_assert!((total - 100.0).abs() <= 0.1);
        for ind in &t.indicators {
            let p = ind.mean;
            let sd = (p * (1.0 - p)).sqrt() * (n / (n - 1.0)).sqrt();
            prop_assert!((sd - ind.sd).abs() < 0.01);
        }
    }

    #[test]
    fn dataset_file_round_trips(records in prop::collection::vec(arb_record(), 0..30)) {
        let s = stratify(&records).unwrap();
        let mut buf = Vec::new();
        write_dataset(&s.pooled, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(back, s.pooled);
    }
}

#[test]
fn consolidation_is_monotone_and_onto() {
    let order = [Severity5::Fatal, Severity5::Disabling, Severity5::Evident, Severity5::Possible, Severity5::None];
    let mapped: Vec<usize> = order.iter().map(|s| consolidate_severity(*s).index()).collect();
    assert!(mapped.windows(2).all(|w| w[0] <= w[1]));
    for l in Level::ALL {
        assert!(mapped.contains(&l.index()));
    }
}

#[test]
fn fractional_weights_survive_the_file_format() {
    let ds = Dataset::new(
        Stratum::Rain,
        vec!["a".into(), "b".into()],
        vec![IndicatorGroup::new(["a", "b"], true)],
        vec![ChoiceObservation { chosen: Level::Minor, covariates: vec![1.0, 0.0] }],
    )
    .unwrap();
    let mut buf = Vec::new();
    write_dataset(&ds, &mut buf).unwrap();
    assert_eq!(read_dataset(buf.as_slice()).unwrap(), ds);
}

use serde::{Deserialize, Serialize};

use crate::level::Level;

macro_rules! coded_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $code:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const CODES: &'static [&'static str] = &[$($code),+];

            pub fn from_code(code: &str) -> Option<Self> {
                match code {
                    $($code => Some($name::$variant),)+
                    _ => None,
                }
            }

            pub fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }
        }
    };
}

coded_enum!(
    /// Five-level KABCO-style severity as recorded on the crash report.
    Severity5 {
        Fatal => "fatal",
        Disabling => "disabling",
        Evident => "evident",
        Possible => "possible",
        None => "none",
    }
);
coded_enum!(Weather { Normal => "normal", Rain => "rain", Snow => "snow", Other => "other" });
coded_enum!(Area { Rural => "rural", Urban => "urban" });
coded_enum!(Alignment { Straight => "straight", Curve => "curve" });
coded_enum!(Manner { RearEnd => "rear_end", Sideswipe => "sideswipe", OtherManner => "other_manner" });
coded_enum!(HarmfulEvent {
    MotorVehicleInTransport => "motor_vehicle_in_transport",
    FixedOrOtherObject => "fixed_or_other_object",
    RanOffRoad => "ran_off_road",
    OtherEvent => "other_event",
});
coded_enum!(Lighting {
    Daylight => "daylight",
    DarkLighted => "dark_lighted",
    DarkUnlighted => "dark_unlighted",
    OtherLight => "other_light",
});
coded_enum!(TruckType {
    SingleUnit => "single_unit",
    TruckTrailer => "truck_trailer",
    TractorSemi => "tractor_semi",
    TractorDouble => "tractor_double",
});
coded_enum!(Surface { Asphalt => "asphalt", OtherSurface => "other_surface" });
coded_enum!(Route { Interstate => "interstate", NonInterstate => "non_interstate" });
coded_enum!(Day { Weekday => "weekday", Weekend => "weekend" });
coded_enum!(Sex { Male => "male", Female => "female" });
coded_enum!(LocationType { Segment => "segment", Intersection => "intersection" });

/// Maps the five recorded severities onto the three modelled levels.
pub fn consolidate_severity(severity: Severity5) -> Level {
    match severity {
        Severity5::Fatal | Severity5::Disabling => Level::Major,
        Severity5::Evident | Severity5::Possible => Level::Minor,
        Severity5::None => Level::None,
    }
}

/// One raw crash row after field-level validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashRecord {
    pub crash_id: String,
    pub severity5: Severity5,
    pub weather: Weather,
    pub area: Area,
    pub alignment: Alignment,
    pub manner: Manner,
    pub harmful_event: HarmfulEvent,
    pub lighting: Lighting,
    pub truck_type: TruckType,
    /// mph
    pub speed_limit: u32,
    pub lane_count: u32,
    pub aadt: u64,
    pub surface: Surface,
    pub route: Route,
    /// Minutes since midnight, `0..=1439`.
    pub crash_time: u32,
    pub day: Day,
    pub driver_sex: Sex,
    pub restraint_used: bool,
    pub location_type: LocationType,
}

impl CrashRecord {
    pub const SPEED_RANGE: std::ops::RangeInclusive<u32> = 5..=85;

    /// Checks the numeric range invariants; enum fields are valid by construction.
    pub fn check(&self) -> Result<(), String> {
        if !Self::SPEED_RANGE.contains(&self.speed_limit) {
            return Err(format!("speed_limit {} outside [5, 85]", self.speed_limit));
        }
        if self.lane_count < 1 {
            return Err("lane_count must be at least 1".into());
        }
        if self.crash_time > 1439 {
            return Err(format!("crash_time {} outside [0, 1439]", self.crash_time));
        }
        Ok(())
    }
}

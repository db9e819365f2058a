//! Fixed dashboard layout: four drones, eight attributes each.
//!
//! Every per-pair table in the crate is a flat `[T; N_PAIRS]` indexed by
//! [`pair_index`], drone-major, attributes in canonical [`Attr`] order. That
//! order is part of every serialized format and must not change.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub const N_DRONES: usize = 4;
pub const N_ATTRS: usize = 8;
pub const N_PAIRS: usize = N_DRONES * N_ATTRS;

/// A displayed drone attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attr {
    HorizontalVelocity,
    VerticalVelocity,
    Altitude,
    Battery,
    Rotor,
    WindSpeed,
    DistanceToTarget,
    NoFlyZone,
}

impl Attr {
    pub const ALL: [Attr; N_ATTRS] = [
        Attr::HorizontalVelocity,
        Attr::VerticalVelocity,
        Attr::Altitude,
        Attr::Battery,
        Attr::Rotor,
        Attr::WindSpeed,
        Attr::DistanceToTarget,
        Attr::NoFlyZone,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Attr> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Attr::HorizontalVelocity => "horizontal_velocity",
            Attr::VerticalVelocity => "vertical_velocity",
            Attr::Altitude => "altitude",
            Attr::Battery => "battery",
            Attr::Rotor => "rotor",
            Attr::WindSpeed => "wind_speed",
            Attr::DistanceToTarget => "distance_to_target",
            Attr::NoFlyZone => "no_fly_zone",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Attr::HorizontalVelocity | Attr::VerticalVelocity | Attr::WindSpeed => "m/s",
            Attr::Altitude | Attr::DistanceToTarget => "m",
            Attr::Battery | Attr::Rotor | Attr::NoFlyZone => "",
        }
    }

    /// Documented value range `(min, max)`; used for clamping and for
    /// min-max normalization of observations and change magnitudes.
    pub fn range(self) -> (f64, f64) {
        match self {
            Attr::HorizontalVelocity => (0.0, 30.0),
            Attr::VerticalVelocity => (0.0, 10.0),
            Attr::Altitude => (0.0, 200.0),
            Attr::Battery => (0.0, 1.0),
            Attr::Rotor => (0.0, 1.0),
            Attr::WindSpeed => (0.0, 30.0),
            Attr::DistanceToTarget => (0.0, 2000.0),
            Attr::NoFlyZone => (0.0, 1.0),
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Attr::Rotor | Attr::NoFlyZone)
    }

    /// Clamp into range; binary attributes snap to 0 or 1.
    pub fn clamp(self, value: f64) -> f64 {
        let (lo, hi) = self.range();
        let v = value.clamp(lo, hi);
        if self.is_binary() {
            if v >= 0.5 {
                1.0
            } else {
                0.0
            }
        } else {
            v
        }
    }

    pub fn normalize(self, value: f64) -> f64 {
        let (lo, hi) = self.range();
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn in_range(self, value: f64) -> bool {
        let (lo, hi) = self.range();
        if self.is_binary() {
            value == 0.0 || value == 1.0
        } else {
            value.is_finite() && value >= lo && value <= hi
        }
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attr::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAttribute(s.to_string()))
    }
}

impl Serialize for Attr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Attr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Index of a drone on the dashboard, `0..N_DRONES`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct DroneId(usize);

impl DroneId {
    pub fn new(index: usize) -> Result<Self, Error> {
        if index < N_DRONES {
            Ok(DroneId(index))
        } else {
            Err(Error::UnknownDrone(index))
        }
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn all() -> impl Iterator<Item = DroneId> {
        (0..N_DRONES).map(DroneId)
    }
}

impl<'de> Deserialize<'de> for DroneId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let index = usize::deserialize(deserializer)?;
        DroneId::new(index).map_err(serde::de::Error::custom)
    }
}

/// One icon on the dashboard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub drone: DroneId,
    pub attr: Attr,
}

impl Pair {
    pub fn new(drone: DroneId, attr: Attr) -> Self {
        Pair { drone, attr }
    }

    pub fn index(self) -> usize {
        pair_index(self.drone, self.attr)
    }

    pub fn from_index(index: usize) -> Option<Pair> {
        if index >= N_PAIRS {
            return None;
        }
        Some(Pair {
            drone: DroneId(index / N_ATTRS),
            attr: Attr::ALL[index % N_ATTRS],
        })
    }

    pub fn all() -> impl Iterator<Item = Pair> {
        (0..N_PAIRS).map(|i| Pair::from_index(i).unwrap())
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.drone.0, self.attr)
    }
}

pub fn pair_index(drone: DroneId, attr: Attr) -> usize {
    drone.0 * N_ATTRS + attr.index()
}

/// Attribute of the pair stored at flat index `i`.
pub fn attr_of(i: usize) -> Attr {
    Attr::ALL[i % N_ATTRS]
}

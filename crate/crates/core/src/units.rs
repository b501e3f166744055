//! Unit-carrying scalars shared by every model.
//!
//! External convention: power in W, energy in Wh, time in s. Power and
//! current are charge-positive (flow into the storage is `> 0`).

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum UnitError {
    #[error("{quantity} must be finite, got {value}")]
    NotFinite { quantity: &'static str, value: f64 },
    #[error("{quantity} must be > 0, got {value}")]
    NotPositive { quantity: &'static str, value: f64 },
    #[error("{quantity} must lie in [0, 1], got {value}")]
    OutOfUnitRange { quantity: &'static str, value: f64 },
}

fn finite(quantity: &'static str, value: f64) -> Result<f64, UnitError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(UnitError::NotFinite { quantity, value })
    }
}

macro_rules! signed_quantity {
    ($(#[$meta:meta])* $name:ident, $label:literal, $unit:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
        #[serde(try_from = "f64", into = "f64")]
        pub struct $name(f64);

        impl $name {
            pub const ZERO: Self = Self(0.0);

            pub fn new(value: f64) -> Result<Self, UnitError> {
                finite($label, value).map(Self)
            }

            #[inline]
            pub fn value(self) -> f64 {
                self.0
            }

            #[inline]
            pub fn abs(self) -> Self {
                Self(self.0.abs())
            }

            /// Internal constructor for values produced by arithmetic on
            /// already-validated quantities.
            #[inline]
            pub(crate) fn raw(value: f64) -> Self {
                debug_assert!(value.is_finite(), concat!($label, " became non-finite"));
                Self(value)
            }
        }

        impl TryFrom<f64> for $name {
            type Error = UnitError;
            fn try_from(value: f64) -> Result<Self, UnitError> {
                Self::new(value)
            }
        }

        impl From<$name> for f64 {
            fn from(q: $name) -> f64 {
                q.0
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                Self::raw(self.0 + rhs.0)
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: Self) {
                *self = *self + rhs;
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(self, rhs: Self) -> Self {
                Self::raw(self.0 - rhs.0)
            }
        }

        impl SubAssign for $name {
            fn sub_assign(&mut self, rhs: Self) {
                *self = *self - rhs;
            }
        }

        impl Neg for $name {
            type Output = Self;
            fn neg(self) -> Self {
                Self(-self.0)
            }
        }

        impl Mul<f64> for $name {
            type Output = Self;
            fn mul(self, rhs: f64) -> Self {
                Self::raw(self.0 * rhs)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", self.0, $unit)
            }
        }
    };
}

signed_quantity!(
    /// Power in watts. Positive charges the storage (or is a production surplus).
    PowerW,
    "power",
    "W"
);
signed_quantity!(
    /// Signed energy in watt-hours.
    EnergyWh,
    "energy",
    "Wh"
);
signed_quantity!(
    /// Current in amperes, positive when charging.
    CurrentA,
    "current",
    "A"
);

/// A strictly positive, finite duration in seconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DurationS(f64);

impl DurationS {
    pub fn new(seconds: f64) -> Result<Self, UnitError> {
        let seconds = finite("duration", seconds)?;
        if seconds > 0.0 {
            Ok(Self(seconds))
        } else {
            Err(UnitError::NotPositive {
                quantity: "duration",
                value: seconds,
            })
        }
    }

    #[inline]
    pub fn seconds(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn hours(self) -> f64 {
        hours_of(self)
    }
}

impl TryFrom<f64> for DurationS {
    type Error = UnitError;
    fn try_from(value: f64) -> Result<Self, UnitError> {
        Self::new(value)
    }
}

impl From<DurationS> for f64 {
    fn from(d: DurationS) -> f64 {
        d.0
    }
}

impl fmt::Display for DurationS {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} s", self.0)
    }
}

/// State of charge as a fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Soc(f64);

impl Soc {
    pub const EMPTY: Self = Self(0.0);
    pub const FULL: Self = Self(1.0);

    pub fn new(value: f64) -> Result<Self, UnitError> {
        let value = finite("state of charge", value)?;
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(UnitError::OutOfUnitRange {
                quantity: "state of charge",
                value,
            })
        }
    }

    /// Clamps a model-computed ratio into `[0, 1]`; absorbs rounding at the ends.
    pub fn saturating(value: f64) -> Self {
        debug_assert!(value.is_finite());
        Self(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Soc {
    type Error = UnitError;
    fn try_from(value: f64) -> Result<Self, UnitError> {
        Self::new(value)
    }
}

impl From<Soc> for f64 {
    fn from(s: Soc) -> f64 {
        s.0
    }
}

impl fmt::Display for Soc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// Energy moved by a constant power over a duration, in Wh.
#[inline]
pub fn energy_of(power: PowerW, duration: DurationS) -> EnergyWh {
    EnergyWh::raw(power.0 * duration.0 / SECONDS_PER_HOUR)
}

/// Duration expressed in hours.
#[inline]
pub fn hours_of(duration: DurationS) -> f64 {
    duration.0 / SECONDS_PER_HOUR
}

impl Mul<DurationS> for PowerW {
    type Output = EnergyWh;
    fn mul(self, rhs: DurationS) -> EnergyWh {
        energy_of(self, rhs)
    }
}

//! Shared domain types: event class labels and signal-to-noise levels.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of power-quality event classes in the catalogue.
pub const CLASS_COUNT: usize = 14;

/// A power-quality event class label, `v1` through `v14`.
///
/// Stored 1-based to match the catalogue numbering; `index()` gives the
/// 0-based position used for array indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(u8);

impl ClassId {
    /// Builds a class id, rejecting anything outside `1..=14`.
    pub fn new(id: u8) -> Option<Self> {
        (1..=CLASS_COUNT as u8).contains(&id).then_some(Self(id))
    }

    /// All fourteen classes in catalogue order.
    pub fn all() -> impl Iterator<Item = ClassId> {
        (1..=CLASS_COUNT as u8).map(ClassId)
    }

    /// 1-based catalogue number.
    pub fn number(self) -> u8 {
        self.0
    }

    /// 0-based index for table lookups.
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl FromStr for ClassId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix('v')
            .ok_or_else(|| format!("class label must look like v1..v14, got {s:?}"))?;
        let id: u8 = digits
            .parse()
            .map_err(|_| format!("class label must look like v1..v14, got {s:?}"))?;
        ClassId::new(id).ok_or_else(|| format!("class number out of range in {s:?}"))
    }
}

impl Serialize for ClassId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Signal-to-noise ratio in decibels; `SnrDb::CLEAN` marks a noise-free signal.
///
/// Serialized as the string `"inf"` or a decimal number so it survives JSON,
/// TOML, and CSV round trips unchanged.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SnrDb(f64);

impl SnrDb {
    /// Noise-free sentinel.
    pub const CLEAN: SnrDb = SnrDb(f64::INFINITY);

    /// A finite SNR level in decibels.
    pub fn db(value: f64) -> Self {
        Self(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_clean(self) -> bool {
        self.0.is_infinite()
    }

    /// Stable bit pattern for keying RNG streams (`-0.0` folded into `0.0`).
    pub fn key_bits(self) -> u64 {
        let v = if self.0 == 0.0 { 0.0 } else { self.0 };
        v.to_bits()
    }
}

impl fmt::Display for SnrDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for SnrDb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(SnrDb::CLEAN);
        }
        s.parse::<f64>()
            .map(SnrDb)
            .map_err(|_| format!("SNR must be a number of decibels or \"inf\", got {s:?}"))
    }
}

impl Serialize for SnrDb {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SnrDb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        // Accept both `snr = "inf"` and `snr = 40` style config values.
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(SnrDb(v)),
            Raw::Text(s) => s.parse().map_err(D::Error::custom),
        }
    }
}

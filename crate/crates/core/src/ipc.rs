//! IPC phase classes and layer kinds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An IPC phase classification, 1 (minimal) through 5 (famine).
/// Higher is worse; ordering follows severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IpcClass(u8);

impl IpcClass {
    pub const MIN: IpcClass = IpcClass(1);
    pub const MAX: IpcClass = IpcClass(5);
    pub const ALL: [IpcClass; 5] = [
        IpcClass(1),
        IpcClass(2),
        IpcClass(3),
        IpcClass(4),
        IpcClass(5),
    ];

    pub fn new(value: u8) -> Result<IpcClass> {
        if (1..=5).contains(&value) {
            Ok(IpcClass(value))
        } else {
            Err(Error::Config(format!("IPC class {value} out of range 1..=5")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based index for confusion-matrix addressing.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_index(i: usize) -> IpcClass {
        debug_assert!(i < 5);
        IpcClass(i as u8 + 1)
    }

    /// Crisis-or-worse under the standard binarization threshold.
    pub fn is_crisis(self) -> bool {
        self.0 >= 3
    }
}

impl TryFrom<i64> for IpcClass {
    type Error = Error;

    fn try_from(v: i64) -> Result<IpcClass> {
        if (1..=5).contains(&v) {
            Ok(IpcClass(v as u8))
        } else {
            Err(Error::Config(format!("IPC class {v} out of range 1..=5")))
        }
    }
}

impl fmt::Display for IpcClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for IpcClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for IpcClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(deserializer)?;
        IpcClass::new(v).map_err(serde::de::Error::custom)
    }
}

/// Which classification a layer carries: current situation or a projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LayerKind {
    /// Current situation, assessed for the publication period itself.
    Cs,
    /// Near-term projection, one period ahead.
    Ml1,
    /// Medium-term projection, two periods ahead.
    Ml2,
}

impl LayerKind {
    pub const ALL: [LayerKind; 3] = [LayerKind::Cs, LayerKind::Ml1, LayerKind::Ml2];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Cs => "CS",
            LayerKind::Ml1 => "ML1",
            LayerKind::Ml2 => "ML2",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<LayerKind> {
        match s.to_ascii_uppercase().as_str() {
            "CS" => Ok(LayerKind::Cs),
            "ML1" => Ok(LayerKind::Ml1),
            "ML2" => Ok(LayerKind::Ml2),
            other => Err(Error::Config(format!("unknown layer kind {other:?}"))),
        }
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Kind of a photonic mode. The declaration order is the canonical rank.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeKind {
    /// Channel time bin `t'_t`, the arm Alice's photons enter (`a_t`).
    ChannelTimeBin,
    /// Second interferometer input `b_t`, normally blocked.
    BlockedTimeBin,
    /// Straight output arm `s_t`.
    OutputStraight,
    /// Down output arm `d_t`.
    OutputDown,
    PolarizationH,
    PolarizationV,
    Custom(String),
}

impl ModeKind {
    fn tag(&self) -> &str {
        match self {
            ModeKind::ChannelTimeBin => "t",
            ModeKind::BlockedTimeBin => "b",
            ModeKind::OutputStraight => "s",
            ModeKind::OutputDown => "d",
            ModeKind::PolarizationH => "h",
            ModeKind::PolarizationV => "v",
            ModeKind::Custom(name) => name,
        }
    }

    fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "t" => ModeKind::ChannelTimeBin,
            "b" => ModeKind::BlockedTimeBin,
            "s" => ModeKind::OutputStraight,
            "d" => ModeKind::OutputDown,
            "h" => ModeKind::PolarizationH,
            "v" => ModeKind::PolarizationV,
            other => {
                let ok = !other.is_empty()
                    && other
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
                if !ok {
                    return Err(Error::Registry(format!("invalid mode kind '{other}'")));
                }
                ModeKind::Custom(other.to_string())
            }
        })
    }
}

/// A single bosonic mode, identified by kind and integer slot.
///
/// Time-bin indices are in units of the interferometer delay. Labels
/// serialize as `"kind:index"`, for example `"t:-1"` or `"s:2"`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub kind: ModeKind,
    pub index: i32,
}

impl ModeLabel {
    pub fn new(kind: ModeKind, index: i32) -> Self {
        ModeLabel { kind, index }
    }

    /// Channel time bin `t'_t` (interferometer input `a_t`).
    pub fn chan(t: i32) -> Self {
        Self::new(ModeKind::ChannelTimeBin, t)
    }

    /// Blocked interferometer input `b_t`.
    pub fn blocked(t: i32) -> Self {
        Self::new(ModeKind::BlockedTimeBin, t)
    }

    pub fn straight(t: i32) -> Self {
        Self::new(ModeKind::OutputStraight, t)
    }

    pub fn down(t: i32) -> Self {
        Self::new(ModeKind::OutputDown, t)
    }

    pub fn pol_h(slot: i32) -> Self {
        Self::new(ModeKind::PolarizationH, slot)
    }

    pub fn pol_v(slot: i32) -> Self {
        Self::new(ModeKind::PolarizationV, slot)
    }

    pub fn custom(name: &str, index: i32) -> Self {
        Self::new(ModeKind::Custom(name.to_string()), index)
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.tag(), self.index)
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, idx) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::Registry(format!("mode label '{s}' lacks ':index'")))?;
        let index = idx
            .parse::<i32>()
            .map_err(|_| Error::Registry(format!("mode label '{s}' has a non-integer index")))?;
        Ok(ModeLabel::new(ModeKind::from_tag(tag)?, index))
    }
}

impl Serialize for ModeLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModeLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

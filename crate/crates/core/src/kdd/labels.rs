//! Attack-name to attack-group mapping.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Five-way KDD'99 grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackClass {
    Normal,
    DoS,
    Probe,
    R2L,
    U2R,
}

impl AttackClass {
    pub const ALL: [AttackClass; 5] = [
        AttackClass::Normal,
        AttackClass::DoS,
        AttackClass::Probe,
        AttackClass::R2L,
        AttackClass::U2R,
    ];

    pub fn binary(self) -> BinaryClass {
        match self {
            AttackClass::Normal => BinaryClass::Normal,
            _ => BinaryClass::Intrusive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttackClass::Normal => "normal",
            AttackClass::DoS => "dos",
            AttackClass::Probe => "probe",
            AttackClass::R2L => "r2l",
            AttackClass::U2R => "u2r",
        }
    }
}

impl fmt::Display for AttackClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(AttackClass::Normal),
            "dos" => Ok(AttackClass::DoS),
            "probe" => Ok(AttackClass::Probe),
            "r2l" => Ok(AttackClass::R2L),
            "u2r" => Ok(AttackClass::U2R),
            other => Err(Error::InvalidArgument(format!("unknown attack class {other:?}"))),
        }
    }
}

/// Binary ground truth and detector verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryClass {
    Normal,
    Intrusive,
}

impl BinaryClass {
    pub fn is_intrusive(self) -> bool {
        self == BinaryClass::Intrusive
    }

    pub fn from_intrusive(intrusive: bool) -> Self {
        if intrusive {
            BinaryClass::Intrusive
        } else {
            BinaryClass::Normal
        }
    }
}

/// Attack names listed as examples per group, test-set and training-set columns.
pub const SEED_LABELS: &[(&str, AttackClass)] = &[
    ("processtable", AttackClass::DoS),
    ("mailbomb", AttackClass::DoS),
    ("neptune", AttackClass::DoS),
    ("teardrop", AttackClass::DoS),
    ("named", AttackClass::R2L),
    ("xsnoop", AttackClass::R2L),
    ("spy", AttackClass::R2L),
    ("multihop", AttackClass::R2L),
    ("ps", AttackClass::U2R),
    ("xterm", AttackClass::U2R),
    ("bufferoverflow", AttackClass::U2R),
    ("perl", AttackClass::U2R),
    ("saint", AttackClass::Probe),
    ("mscan", AttackClass::Probe),
    ("portsweep", AttackClass::Probe),
    ("ipsweep", AttackClass::Probe),
];

/// Remaining attack names of the KDD'99 training and "corrected" test files,
/// grouped per the KDD Cup task description.
pub const EXTENSION_LABELS: &[(&str, AttackClass)] = &[
    ("back", AttackClass::DoS),
    ("land", AttackClass::DoS),
    ("pod", AttackClass::DoS),
    ("smurf", AttackClass::DoS),
    ("apache2", AttackClass::DoS),
    ("udpstorm", AttackClass::DoS),
    ("satan", AttackClass::Probe),
    ("nmap", AttackClass::Probe),
    ("ftp_write", AttackClass::R2L),
    ("guess_passwd", AttackClass::R2L),
    ("imap", AttackClass::R2L),
    ("phf", AttackClass::R2L),
    ("warezclient", AttackClass::R2L),
    ("warezmaster", AttackClass::R2L),
    ("sendmail", AttackClass::R2L),
    ("snmpgetattack", AttackClass::R2L),
    ("snmpguess", AttackClass::R2L),
    ("worm", AttackClass::R2L),
    ("xlock", AttackClass::R2L),
    ("buffer_overflow", AttackClass::U2R),
    ("loadmodule", AttackClass::U2R),
    ("rootkit", AttackClass::U2R),
    ("sqlattack", AttackClass::U2R),
    ("httptunnel", AttackClass::U2R),
];

/// What to do with a label absent from the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelMode {
    Strict,
    Lenient(AttackClass),
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(LabelMode::Strict),
            "lenient" => Ok(LabelMode::Lenient(AttackClass::DoS)),
            other => match other.strip_prefix("lenient:") {
                Some(group) => Ok(LabelMode::Lenient(group.parse()?)),
                None => Err(Error::InvalidArgument(format!(
                    "label mode must be strict, lenient or lenient:<group>, got {other:?}"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabelMap {
    groups: HashMap<String, AttackClass>,
    mode: LabelMode,
}

impl Default for LabelMap {
    fn default() -> Self {
        Self::new(LabelMode::Strict)
    }
}

impl LabelMap {
    /// Seed labels plus the shipped extension, with "normal" mapping to itself.
    pub fn new(mode: LabelMode) -> Self {
        let mut groups: HashMap<String, AttackClass> = SEED_LABELS
            .iter()
            .chain(EXTENSION_LABELS)
            .map(|(l, g)| (l.to_string(), *g))
            .collect();
        groups.insert("normal".into(), AttackClass::Normal);
        LabelMap { groups, mode }
    }

    /// Only the seed labels (and "normal").
    pub fn seed_only(mode: LabelMode) -> Self {
        let mut groups: HashMap<String, AttackClass> =
            SEED_LABELS.iter().map(|(l, g)| (l.to_string(), *g)).collect();
        groups.insert("normal".into(), AttackClass::Normal);
        LabelMap { groups, mode }
    }

    pub fn insert(&mut self, label: impl Into<String>, group: AttackClass) {
        self.groups.insert(label.into(), group);
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn contains(&self, label: &str) -> bool {
        self.groups.contains_key(label)
    }

    pub fn group_attack(&self, label: &str) -> Result<AttackClass> {
        let label = label.strip_suffix('.').unwrap_or(label);
        match self.groups.get(label) {
            Some(g) => Ok(*g),
            None => match self.mode {
                LabelMode::Strict => Err(Error::UnknownLabel(label.to_string())),
                LabelMode::Lenient(g) => Ok(g),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_examples() {
        let m = LabelMap::default();
        assert_eq!(m.group_attack("neptune").unwrap(), AttackClass::DoS);
        assert_eq!(m.group_attack("portsweep").unwrap(), AttackClass::Probe);
        assert_eq!(m.group_attack("normal").unwrap(), AttackClass::Normal);
    }

    #[test]
    fn every_seed_label_maps_to_its_group() {
        let m = LabelMap::seed_only(LabelMode::Strict);
        for (label, group) in SEED_LABELS {
            assert_eq!(m.group_attack(label).unwrap(), *group, "{label}");
        }
    }

    #[test]
    fn seed_and_extension_do_not_overlap() {
        for (l, _) in EXTENSION_LABELS {
            assert!(!SEED_LABELS.iter().any(|(s, _)| s == l), "{l}");
        }
    }

    #[test]
    fn strict_and_lenient_modes() {
        let strict = LabelMap::new(LabelMode::Strict);
        assert!(matches!(strict.group_attack("zeroday"), Err(Error::UnknownLabel(_))));
        let lenient = LabelMap::new("lenient:r2l".parse().unwrap());
        assert_eq!(lenient.group_attack("zeroday").unwrap(), AttackClass::R2L);
    }

    #[test]
    fn binary_truth_follows_group() {
        for c in AttackClass::ALL {
            assert_eq!(c.binary().is_intrusive(), c != AttackClass::Normal);
        }
    }
}

//! Numeric encoding of the three categorical KDD features.
//!
//! `protocol_type` expands to three binary columns using the fixed codes
//! tcp = 001, icmp = 010, udp = 011. Protocols outside that set seen while
//! building a table take the next free 3-bit codes (100, 101, ...).
//! `service` and `flag` each become one integer column holding the value's
//! frequency rank in the table's source data (most frequent = 0, ties broken
//! lexicographically).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::record::{ConnectionRecord, FEATURE_NAMES, NUMERIC_COUNT};
use crate::error::{Error, Result};

/// Fixed protocol codes, most significant bit first.
pub const PROTOCOL_CODES: [(&str, u8); 3] = [("tcp", 0b001), ("icmp", 0b010), ("udp", 0b011)];

/// Length of an encoded vector: 38 numeric + 3 protocol bits + service + flag.
pub const ENCODED_WIDTH: usize = NUMERIC_COUNT + 3 + 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingTable {
    protocols: BTreeMap<String, u8>,
    services: Vec<String>,
    flags: Vec<String>,
    #[serde(skip)]
    service_index: HashMap<String, usize>,
    #[serde(skip)]
    flag_index: HashMap<String, usize>,
}

impl EncodingTable {
    /// Builds a table covering every categorical value in `records`.
    pub fn build<'a, I>(records: I) -> Self
    where
        I: IntoIterator<Item = &'a ConnectionRecord>,
    {
        let mut protocols: BTreeMap<String, u8> = PROTOCOL_CODES
            .iter()
            .map(|(name, code)| (name.to_string(), *code))
            .collect();
        let mut extra_protocols = Vec::new();
        let mut services: HashMap<&str, usize> = HashMap::new();
        let mut flags: HashMap<&str, usize> = HashMap::new();
        for r in records {
            if !protocols.contains_key(&r.protocol) && !extra_protocols.contains(&r.protocol) {
                extra_protocols.push(r.protocol.clone());
            }
            *services.entry(&r.service).or_default() += 1;
            *flags.entry(&r.flag).or_default() += 1;
        }
        extra_protocols.sort();
        for (i, p) in extra_protocols.into_iter().enumerate() {
            // Codes 100..111; beyond seven protocols the bits wrap, which no
            // KDD-format file reaches.
            protocols.insert(p, 0b100 + (i as u8 % 4));
        }
        Self::from_parts(protocols, rank(services), rank(flags))
    }

    fn from_parts(protocols: BTreeMap<String, u8>, services: Vec<String>, flags: Vec<String>) -> Self {
        let mut table = EncodingTable {
            protocols,
            services,
            flags,
            service_index: HashMap::new(),
            flag_index: HashMap::new(),
        };
        table.reindex();
        table
    }

    /// Rebuilds lookup maps; needed after deserialization.
    pub fn reindex(&mut self) {
        self.service_index = self
            .services
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        self.flag_index = self
            .flags
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
    }

    pub fn protocol_code(&self, protocol: &str) -> Result<u8> {
        self.protocols
            .get(protocol)
            .copied()
            .ok_or_else(|| Error::UnknownCategory {
                column: "protocol_type",
                value: protocol.to_string(),
            })
    }

    pub fn service_rank(&self, service: &str) -> Result<usize> {
        self.service_index
            .get(service)
            .copied()
            .ok_or_else(|| Error::UnknownCategory {
                column: "service",
                value: service.to_string(),
            })
    }

    pub fn flag_rank(&self, flag: &str) -> Result<usize> {
        self.flag_index
            .get(flag)
            .copied()
            .ok_or_else(|| Error::UnknownCategory {
                column: "flag",
                value: flag.to_string(),
            })
    }

    pub fn service_count(&self) -> usize {
        self.services.len()
    }

    pub fn flag_count(&self) -> usize {
        self.flags.len()
    }

    /// Encodes a record; fails on any categorical value absent from the table.
    pub fn encode(&self, record: &ConnectionRecord) -> Result<Vec<f64>> {
        let code = self.protocol_code(&record.protocol)?;
        let service = self.service_rank(&record.service)?;
        let flag = self.flag_rank(&record.flag)?;
        Ok(self.assemble(record, code, service as f64, flag as f64))
    }

    /// Like [`encode`](Self::encode), but unseen service/flag values take the
    /// rank one past the last known value instead of failing. Unknown
    /// protocols still fail. Returns the vector and whether a fallback was used.
    pub fn encode_with_unseen(&self, record: &ConnectionRecord) -> Result<(Vec<f64>, bool)> {
        let code = self.protocol_code(&record.protocol)?;
        let (service, s_unseen) = match self.service_index.get(&record.service) {
            Some(&i) => (i, false),
            None => (self.services.len(), true),
        };
        let (flag, f_unseen) = match self.flag_index.get(&record.flag) {
            Some(&i) => (i, false),
            None => (self.flags.len(), true),
        };
        Ok((
            self.assemble(record, code, service as f64, flag as f64),
            s_unseen || f_unseen,
        ))
    }

    fn assemble(&self, record: &ConnectionRecord, code: u8, service: f64, flag: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(ENCODED_WIDTH);
        v.push(record.numeric[0]);
        v.push(f64::from((code >> 2) & 1));
        v.push(f64::from((code >> 1) & 1));
        v.push(f64::from(code & 1));
        v.push(service);
        v.push(flag);
        v.extend_from_slice(&record.numeric[1..]);
        v
    }

    /// Recovers the protocol name from the three protocol columns of an
    /// unnormalized encoded vector.
    pub fn decode_protocol(&self, encoded: &[f64]) -> Option<&str> {
        let bits = encoded.get(1..4)?;
        let code = bits
            .iter()
            .fold(0u8, |acc, &b| (acc << 1) | u8::from(b >= 0.5));
        self.protocols
            .iter()
            .find(|(_, &c)| c == code)
            .map(|(name, _)| name.as_str())
    }
}

fn rank(counts: HashMap<&str, usize>) -> Vec<String> {
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().map(|(s, _)| s.to_string()).collect()
}

/// Column names of an encoded vector, in order.
pub fn encoded_column_names() -> Vec<String> {
    let mut names = Vec::with_capacity(ENCODED_WIDTH);
    for (i, name) in FEATURE_NAMES.iter().enumerate() {
        match i {
            1 => names.extend(["protocol_b2", "protocol_b1", "protocol_b0"].map(String::from)),
            _ => names.push(name.to_string()),
        }
    }
    names
}

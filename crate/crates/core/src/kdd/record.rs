//! Raw KDD'99 connection records.

use crate::error::{Error, Result};

/// Names of the 41 KDD'99 features in file order.
pub const FEATURE_NAMES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

/// Positions of the three categorical features in a raw line.
pub const PROTOCOL_FIELD: usize = 1;
pub const SERVICE_FIELD: usize = 2;
pub const FLAG_FIELD: usize = 3;

/// Number of numeric features (41 minus the three categoricals).
pub const NUMERIC_COUNT: usize = 38;

/// One parsed connection: the three categorical fields, the 38 numeric
/// features in file order (duration first), and the attack label.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionRecord {
    pub protocol: String,
    pub service: String,
    pub flag: String,
    pub numeric: [f64; NUMERIC_COUNT],
    pub label: String,
}

impl ConnectionRecord {
    pub fn duration(&self) -> f64 {
        self.numeric[0]
    }
}

/// Parses one comma-separated KDD line. A trailing period on the label is
/// stripped, and surrounding whitespace is ignored.
pub fn parse_record(line: &str) -> Result<ConnectionRecord> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != FEATURE_NAMES.len() + 1 {
        return Err(Error::FieldCount {
            found: fields.len(),
        });
    }

    let mut numeric = [0.0; NUMERIC_COUNT];
    let mut slot = 0;
    for (i, raw) in fields[..41].iter().enumerate() {
        if matches!(i, PROTOCOL_FIELD | SERVICE_FIELD | FLAG_FIELD) {
            continue;
        }
        let raw = raw.trim();
        numeric[slot] = raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::NumericParse {
                field: i,
                name: FEATURE_NAMES[i],
                value: raw.to_string(),
            })?;
        slot += 1;
    }

    let label = fields[41].trim();
    let label = label.strip_suffix('.').unwrap_or(label).trim();
    if label.is_empty() {
        return Err(Error::UnknownLabel(String::new()));
    }

    Ok(ConnectionRecord {
        protocol: fields[PROTOCOL_FIELD].trim().to_string(),
        service: fields[SERVICE_FIELD].trim().to_string(),
        flag: fields[FLAG_FIELD].trim().to_string(),
        numeric,
        label: label.to_string(),
    })
}

/// Formats a record back into KDD line syntax, with the trailing period.
pub fn format_record(r: &ConnectionRecord) -> String {
    let mut out = String::with_capacity(160);
    let mut numeric = r.numeric.iter();
    for i in 0..41 {
        if i > 0 {
            out.push(',');
        }
        match i {
            PROTOCOL_FIELD => out.push_str(&r.protocol),
            SERVICE_FIELD => out.push_str(&r.service),
            FLAG_FIELD => out.push_str(&r.flag),
            _ => {
                let v = *numeric.next().expect("38 numeric fields");
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    out.push_str(&format!("{}", v as i64));
                } else {
                    out.push_str(&format!("{v:.2}"));
                }
            }
        }
    }
    out.push(',');
    out.push_str(&r.label);
    out.push('.');
    out
}

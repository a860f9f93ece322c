//! KDD'99 ingestion: parsing, categorical encoding, attack grouping,
//! normalization and seeded sampling.

pub mod dataset;
pub mod encoding;
pub mod labels;
pub mod record;
pub mod synth;

pub use dataset::{read_records, shuffle_split, Dataset, IngestReport, NormalizationBounds, Row};
pub use encoding::{EncodingTable, ENCODED_WIDTH};
pub use labels::{AttackClass, BinaryClass, LabelMap, LabelMode};
pub use record::{parse_record, ConnectionRecord};

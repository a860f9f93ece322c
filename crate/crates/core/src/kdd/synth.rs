//! Seeded generator of KDD'99-format traffic.
//!
//! Produces connection records whose per-attack feature profiles follow the
//! broad shape of the published data (smurf floods as 1032/520-byte ICMP
//! echo replies with saturated counts, neptune as S0 SYN floods to
//! `private`, scans with high `diff_srv_rate` and REJ flags, content attacks
//! riding on normal-looking logged-in TCP sessions) and whose label mix is
//! close to the 10% training file or the "corrected" test file. Profiles
//! overlap on purpose so detectors cannot reach perfect scores trivially.

use std::io::Write;
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};

use super::record::{format_record, ConnectionRecord, NUMERIC_COUNT};
use crate::error::Result;

/// Which published file the label mix imitates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// kddcup.data_10_percent: 22 attack types, about 80% attacks.
    Training,
    /// corrected: adds attacks absent from training.
    Test,
}

const TRAINING_MIX: &[(&str, f64)] = &[
    ("smurf", 0.568),
    ("neptune", 0.217),
    ("normal", 0.197),
    ("back", 0.0045),
    ("satan", 0.0032),
    ("ipsweep", 0.0025),
    ("portsweep", 0.0021),
    ("warezclient", 0.0021),
    ("teardrop", 0.002),
    ("pod", 0.0005),
    ("nmap", 0.0005),
    ("guess_passwd", 0.0001),
    ("buffer_overflow", 0.00006),
    ("land", 0.00004),
    ("warezmaster", 0.00004),
    ("imap", 0.00002),
    ("rootkit", 0.00002),
];

const TEST_MIX: &[(&str, f64)] = &[
    ("smurf", 0.527),
    ("neptune", 0.186),
    ("normal", 0.195),
    ("snmpgetattack", 0.0248),
    ("mailbomb", 0.0160),
    ("guess_passwd", 0.0141),
    ("snmpguess", 0.0078),
    ("warezmaster", 0.0052),
    ("mscan", 0.0034),
    ("apache2", 0.0026),
    ("processtable", 0.0024),
    ("saint", 0.0024),
    ("satan", 0.0053),
    ("back", 0.0035),
    ("portsweep", 0.0011),
    ("ipsweep", 0.0010),
    ("pod", 0.0003),
    ("teardrop", 0.00004),
    ("buffer_overflow", 0.00007),
];

// Positions within ConnectionRecord::numeric (file index minus the three
// categoricals before it).
mod idx {
    pub const DURATION: usize = 0;
    pub const SRC_BYTES: usize = 1;
    pub const DST_BYTES: usize = 2;
    pub const LAND: usize = 3;
    pub const WRONG_FRAGMENT: usize = 4;
    pub const HOT: usize = 6;
    pub const FAILED_LOGINS: usize = 7;
    pub const LOGGED_IN: usize = 8;
    pub const COMPROMISED: usize = 9;
    pub const ROOT_SHELL: usize = 10;
    pub const FILE_CREATIONS: usize = 13;
    pub const IS_GUEST: usize = 18;
    pub const COUNT: usize = 19;
    pub const SRV_COUNT: usize = 20;
    pub const SERROR: usize = 21;
    pub const SRV_SERROR: usize = 22;
    pub const RERROR: usize = 23;
    pub const SRV_RERROR: usize = 24;
    pub const SAME_SRV: usize = 25;
    pub const DIFF_SRV: usize = 26;
    pub const SRV_DIFF_HOST: usize = 27;
    pub const DH_COUNT: usize = 28;
    pub const DH_SRV_COUNT: usize = 29;
    pub const DH_SAME_SRV: usize = 30;
    pub const DH_DIFF_SRV: usize = 31;
    pub const DH_SAME_SRC_PORT: usize = 32;
    pub const DH_SRV_DIFF_HOST: usize = 33;
    pub const DH_SERROR: usize = 34;
    pub const DH_SRV_SERROR: usize = 35;
    pub const DH_RERROR: usize = 36;
    pub const DH_SRV_RERROR: usize = 37;
}

pub struct Generator {
    rng: ChaCha8Rng,
    labels: Vec<&'static str>,
    mix: WeightedIndex<f64>,
}

impl Generator {
    pub fn new(flavor: Flavor, seed: u64) -> Self {
        let table = match flavor {
            Flavor::Training => TRAINING_MIX,
            Flavor::Test => TEST_MIX,
        };
        Generator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            labels: table.iter().map(|(l, _)| *l).collect(),
            mix: WeightedIndex::new(table.iter().map(|(_, w)| *w)).expect("positive weights"),
        }
    }

    pub fn next_record(&mut self) -> ConnectionRecord {
        let label = self.labels[self.mix.sample(&mut self.rng)];
        self.record_for(label)
    }

    pub fn records(&mut self, n: usize) -> Vec<ConnectionRecord> {
        (0..n).map(|_| self.next_record()).collect()
    }

    /// One record drawn from the named attack's profile.
    pub fn record_for(&mut self, label: &str) -> ConnectionRecord {
        let mut c = Conn::new(&mut self.rng);
        match label {
            "normal" => c.normal(),
            "smurf" => c.flood_icmp("ecr_i", 1032.0, 520.0),
            "pod" => {
                c.flood_icmp("ecr_i", 1480.0, 1480.0);
                c.n[idx::WRONG_FRAGMENT] = 1.0;
                c.n[idx::COUNT] = c.rng.gen_range(1..=5) as f64;
                c.n[idx::SRV_COUNT] = c.n[idx::COUNT];
            }
            "neptune" => c.syn_flood(),
            "teardrop" => {
                c.proto("udp", "private", "SF");
                c.n[idx::SRC_BYTES] = 28.0;
                c.n[idx::WRONG_FRAGMENT] = 3.0;
                c.host_window(1.0, 0.0, 0.0);
                c.n[idx::COUNT] = c.rng.gen_range(50..=110) as f64;
                c.n[idx::SRV_COUNT] = c.n[idx::COUNT];
            }
            "land" => {
                c.syn_flood();
                c.n[idx::LAND] = 1.0;
                c.n[idx::COUNT] = 1.0;
                c.n[idx::SRV_COUNT] = 1.0;
            }
            "back" => {
                let flag = c.pick(&[("SF", 0.85), ("RSTR", 0.15)]);
                c.proto("tcp", "http", flag);
                c.n[idx::SRC_BYTES] = 54540.0 + c.jitter(200.0);
                c.n[idx::DST_BYTES] = c.rng.gen_range(7000.0..9000.0);
                c.n[idx::HOT] = 2.0;
                c.n[idx::LOGGED_IN] = 1.0;
                c.n[idx::COMPROMISED] = 1.0;
                c.counts(2..=12, 0.0, 0.0);
                c.host_window(1.0, 0.0, 0.0);
            }
            "apache2" => {
                let flag = c.pick(&[("RSTR", 0.6), ("SF", 0.4)]);
                c.proto("tcp", "http", flag);
                c.n[idx::SRC_BYTES] = c.rng.gen_range(0.0..500.0);
                c.counts(80..=250, 0.0, 0.4);
                c.host_window(1.0, 0.1, 0.6);
            }
            "mailbomb" => {
                c.proto("tcp", "smtp", "SF");
                c.n[idx::SRC_BYTES] = 1376.0 + c.jitter(20.0);
                c.n[idx::DST_BYTES] = 322.0 + c.jitter(10.0);
                c.n[idx::LOGGED_IN] = 1.0;
                c.counts(1..=4, 0.0, 0.0);
                c.host_window(1.0, 0.0, 0.0);
            }
            "processtable" => {
                let service = c.pick(&[("finger", 0.5), ("http", 0.5)]);
                let flag = c.pick(&[("S1", 0.5), ("SF", 0.5)]);
                c.proto("tcp", service, flag);
                c.n[idx::DURATION] = c.rng.gen_range(600.0..2500.0);
                c.counts(1..=3, 0.0, 0.0);
                c.host_window(1.0, 0.0, 0.0);
            }
            "ipsweep" => {
                c.proto("icmp", "eco_i", "SF");
                c.n[idx::SRC_BYTES] = c.pick_num(&[(8.0, 0.6), (18.0, 0.4)]);
                c.counts(1..=3, 0.0, 0.0);
                c.n[idx::SRV_DIFF_HOST] = 1.0;
                c.scan_window(true);
            }
            "nmap" => {
                let service = c.pick(&[("eco_i", 0.5), ("private", 0.5)]);
                c.proto("icmp", service, "SF");
                c.n[idx::SRC_BYTES] = 8.0;
                c.counts(1..=3, 0.0, 0.0);
                c.scan_window(true);
            }
            "portsweep" => {
                let flag = c.pick(&[("REJ", 0.45), ("RSTR", 0.45), ("SF", 0.1)]);
                c.proto("tcp", "private", flag);
                c.n[idx::DURATION] = c.pick_num(&[(0.0, 0.7), (1.0, 0.1), (2500.0, 0.2)]);
                c.counts(1..=3, 0.0, 0.6);
                c.scan_window(false);
                c.n[idx::DH_RERROR] = c.rng.gen_range(0.5..1.0);
            }
            "satan" | "saint" | "mscan" => {
                let service = c.pick(&[("private", 0.5), ("other", 0.3), ("telnet", 0.2)]);
                let flag = c.pick(&[("REJ", 0.6), ("S0", 0.2), ("SF", 0.2)]);
                c.proto("tcp", service, flag);
                c.counts(1..=200, 0.1, 0.7);
                c.n[idx::SAME_SRV] = c.rng.gen_range(0.0..0.2);
                c.n[idx::DIFF_SRV] = c.rng.gen_range(0.5..1.0);
                c.scan_window(false);
            }
            "guess_passwd" => {
                let service = c.pick(&[("telnet", 0.6), ("pop_3", 0.4)]);
                let flag = c.pick(&[("RSTO", 0.7), ("SF", 0.3)]);
                c.proto("tcp", service, flag);
                c.n[idx::SRC_BYTES] = c.rng.gen_range(100.0..130.0);
                c.n[idx::DST_BYTES] = c.rng.gen_range(100.0..190.0);
                c.n[idx::FAILED_LOGINS] = 1.0;
                c.n[idx::HOT] = c.rng.gen_range(0..=1) as f64;
                c.counts(1..=3, 0.0, 0.2);
                c.host_window(1.0, 0.0, 0.3);
            }
            "warezclient" | "warezmaster" => {
                let service = c.pick(&[("ftp_data", 0.6), ("ftp", 0.4)]);
                c.proto("tcp", service, "SF");
                c.n[idx::DURATION] = c.rng.gen_range(0.0f64..700.0).round();
                c.n[idx::SRC_BYTES] = c.sample_lognormal(10.0, 1.2);
                c.n[idx::HOT] = c.rng.gen_range(0..=28) as f64;
                c.n[idx::LOGGED_IN] = 1.0;
                c.n[idx::IS_GUEST] = 1.0;
                c.counts(1..=3, 0.0, 0.0);
                c.host_window(0.3, 0.0, 0.0);
            }
            "imap" | "snmpguess" | "snmpgetattack" => {
                if label == "imap" {
                    let flag = c.pick(&[("SH", 0.4), ("S0", 0.3), ("SF", 0.3)]);
                    c.proto("tcp", "imap4", flag);
                    c.counts(1..=12, 0.5, 0.0);
                } else {
                    // SNMP attacks look almost exactly like normal SNMP polling.
                    c.proto("udp", "private", "SF");
                    c.n[idx::SRC_BYTES] = 105.0 + c.jitter(3.0);
                    c.n[idx::DST_BYTES] = if label == "snmpguess" { 0.0 } else { 146.0 + c.jitter(3.0) };
                    c.counts(1..=300, 0.0, 0.0);
                }
                c.host_window(1.0, 0.0, 0.0);
            }
            "buffer_overflow" | "rootkit" | "perl" | "loadmodule" | "ps" | "xterm" => {
                let service = c.pick(&[("telnet", 0.7), ("ftp_data", 0.3)]);
                c.proto("tcp", service, "SF");
                c.n[idx::DURATION] = c.rng.gen_range(20.0f64..400.0).round();
                c.n[idx::SRC_BYTES] = c.rng.gen_range(1000.0f64..4000.0).round();
                c.n[idx::DST_BYTES] = c.rng.gen_range(2000.0f64..10000.0).round();
                c.n[idx::HOT] = c.rng.gen_range(1..=4) as f64;
                c.n[idx::LOGGED_IN] = 1.0;
                c.n[idx::ROOT_SHELL] = c.pick_num(&[(1.0, 0.7), (0.0, 0.3)]);
                c.n[idx::FILE_CREATIONS] = c.rng.gen_range(0..=2) as f64;
                c.counts(1..=2, 0.0, 0.0);
                c.host_window(0.5, 0.0, 0.0);
            }
            _ => c.normal(),
        }
        c.finish(label)
    }

    /// Writes `n` generated records in KDD line format.
    pub fn write_file(&mut self, path: &Path, n: usize) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for _ in 0..n {
            writeln!(out, "{}", format_record(&self.next_record()))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Records whose label is decided by `duration` alone: 0 for normal, 1000
/// for intrusive (labelled smurf). Protocol, service and source bytes cycle
/// through a few values independent of the label, so every combination
/// repeats many times.
pub fn separable_records(n: usize, seed: u64) -> Vec<ConnectionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let intrusive = rng.gen_bool(0.5);
            let (protocol, service) = [("tcp", "http"), ("udp", "domain_u"), ("icmp", "ecr_i")][rng.gen_range(0..3)];
            let mut numeric = [0.0; NUMERIC_COUNT];
            numeric[idx::DURATION] = if intrusive { 1000.0 } else { 0.0 };
            numeric[idx::SRC_BYTES] = [100.0, 200.0][rng.gen_range(0..2)];
            ConnectionRecord {
                protocol: protocol.to_string(),
                service: service.to_string(),
                flag: "SF".to_string(),
                numeric,
                label: if intrusive { "smurf" } else { "normal" }.to_string(),
            }
        })
        .collect()
}

struct Conn<'a> {
    rng: &'a mut ChaCha8Rng,
    protocol: &'static str,
    service: &'static str,
    flag: &'static str,
    n: [f64; NUMERIC_COUNT],
}

impl<'a> Conn<'a> {
    fn new(rng: &'a mut ChaCha8Rng) -> Self {
        Conn {
            rng,
            protocol: "tcp",
            service: "http",
            flag: "SF",
            n: [0.0; NUMERIC_COUNT],
        }
    }

    fn proto(&mut self, protocol: &'static str, service: &'static str, flag: &'static str) {
        self.protocol = protocol;
        self.service = service;
        self.flag = flag;
    }

    fn pick(&mut self, options: &[(&'static str, f64)]) -> &'static str {
        let w = WeightedIndex::new(options.iter().map(|o| o.1)).expect("weights");
        options[w.sample(self.rng)].0
    }

    fn pick_num(&mut self, options: &[(f64, f64)]) -> f64 {
        let w = WeightedIndex::new(options.iter().map(|o| o.1)).expect("weights");
        options[w.sample(self.rng)].0
    }

    fn jitter(&mut self, sd: f64) -> f64 {
        Normal::new(0.0, sd).expect("sd").sample(self.rng).round()
    }

    fn sample_lognormal(&mut self, mu: f64, sigma: f64) -> f64 {
        LogNormal::new(mu, sigma).expect("sigma").sample(self.rng).round()
    }

    fn rate(&mut self, center: f64) -> f64 {
        let noise = Normal::new(0.0, 0.05).expect("sd").sample(self.rng);
        ((center + noise).clamp(0.0, 1.0) * 100.0).round() / 100.0
    }

    /// Same-host window counts plus error rates for the last two seconds.
    fn counts(&mut self, count: std::ops::RangeInclusive<u32>, serror: f64, rerror: f64) {
        let c = f64::from(self.rng.gen_range(count));
        self.n[idx::COUNT] = c;
        self.n[idx::SRV_COUNT] = (c * self.rng.gen_range(0.2..1.0)).max(1.0).round();
        self.n[idx::SERROR] = self.rate(serror);
        self.n[idx::SRV_SERROR] = self.rate(serror);
        self.n[idx::RERROR] = self.rate(rerror);
        self.n[idx::SRV_RERROR] = self.rate(rerror);
        self.n[idx::SAME_SRV] = self.rate(1.0 - rerror * 0.5);
        self.n[idx::DIFF_SRV] = self.rate(rerror * 0.3);
    }

    /// Destination-host window over the last 100 connections.
    fn host_window(&mut self, same_srv: f64, serror: f64, rerror: f64) {
        self.n[idx::DH_COUNT] = f64::from(self.rng.gen_range(1..=255));
        self.n[idx::DH_SRV_COUNT] = f64::from(self.rng.gen_range(1..=255));
        self.n[idx::DH_SAME_SRV] = self.rate(same_srv);
        self.n[idx::DH_DIFF_SRV] = self.rate(1.0 - same_srv);
        self.n[idx::DH_SAME_SRC_PORT] = self.rate(0.05);
        self.n[idx::DH_SRV_DIFF_HOST] = self.rate(0.02);
        self.n[idx::DH_SERROR] = self.rate(serror);
        self.n[idx::DH_SRV_SERROR] = self.rate(serror);
        self.n[idx::DH_RERROR] = self.rate(rerror);
        self.n[idx::DH_SRV_RERROR] = self.rate(rerror);
    }

    fn scan_window(&mut self, icmp: bool) {
        self.n[idx::DH_COUNT] = f64::from(self.rng.gen_range(1..=255));
        self.n[idx::DH_SRV_COUNT] = f64::from(self.rng.gen_range(1..=40));
        self.n[idx::DH_SAME_SRV] = self.rate(if icmp { 0.9 } else { 0.05 });
        self.n[idx::DH_DIFF_SRV] = self.rate(if icmp { 0.05 } else { 0.7 });
        self.n[idx::DH_SAME_SRC_PORT] = self.rate(if icmp { 0.9 } else { 0.6 });
        self.n[idx::DH_SRV_DIFF_HOST] = self.rate(if icmp { 0.6 } else { 0.1 });
    }

    fn flood_icmp(&mut self, service: &'static str, bytes: f64, alt_bytes: f64) {
        self.proto("icmp", service, "SF");
        self.n[idx::SRC_BYTES] = if self.rng.gen_bool(0.8) { bytes } else { alt_bytes };
        let c = if self.rng.gen_bool(0.9) { 511.0 } else { f64::from(self.rng.gen_range(100..511)) };
        self.n[idx::COUNT] = c;
        self.n[idx::SRV_COUNT] = c;
        self.n[idx::SAME_SRV] = 1.0;
        self.n[idx::DH_COUNT] = 255.0;
        self.n[idx::DH_SRV_COUNT] = 255.0;
        self.n[idx::DH_SAME_SRV] = 1.0;
        self.n[idx::DH_SAME_SRC_PORT] = self.rate(1.0);
    }

    fn syn_flood(&mut self) {
        let service = self.pick(&[("private", 0.75), ("other", 0.05), ("telnet", 0.05), ("http", 0.05), ("finger", 0.05), ("ftp_data", 0.05)]);
        let flag = self.pick(&[("S0", 0.85), ("REJ", 0.12), ("RSTO", 0.03)]);
        self.proto("tcp", service, flag);
        let rej = flag == "REJ";
        let c = f64::from(self.rng.gen_range(80..=511));
        self.n[idx::COUNT] = c;
        self.n[idx::SRV_COUNT] = f64::from(self.rng.gen_range(1..=30));
        self.n[idx::SERROR] = self.rate(if rej { 0.0 } else { 1.0 });
        self.n[idx::SRV_SERROR] = self.n[idx::SERROR];
        self.n[idx::RERROR] = self.rate(if rej { 1.0 } else { 0.0 });
        self.n[idx::SRV_RERROR] = self.n[idx::RERROR];
        self.n[idx::SAME_SRV] = self.rate(0.05);
        self.n[idx::DIFF_SRV] = self.rate(0.07);
        self.n[idx::DH_COUNT] = 255.0;
        self.n[idx::DH_SRV_COUNT] = f64::from(self.rng.gen_range(1..=30));
        self.n[idx::DH_SAME_SRV] = self.rate(0.05);
        self.n[idx::DH_DIFF_SRV] = self.rate(0.07);
        self.n[idx::DH_SERROR] = self.rate(if rej { 0.0 } else { 1.0 });
        self.n[idx::DH_SRV_SERROR] = self.n[idx::DH_SERROR];
        self.n[idx::DH_RERROR] = self.rate(if rej { 1.0 } else { 0.0 });
        self.n[idx::DH_SRV_RERROR] = self.n[idx::DH_RERROR];
    }

    fn normal(&mut self) {
        let kind = self.pick(&[("http", 0.62), ("smtp", 0.10), ("ftp_data", 0.06), ("domain_u", 0.06), ("ecr_i", 0.01), ("private", 0.06), ("other", 0.04), ("ftp", 0.02), ("telnet", 0.03)]);
        let protocol = match kind {
            "domain_u" | "private" => "udp",
            "ecr_i" => "icmp",
            _ => "tcp",
        };
        let flag = if protocol == "tcp" {
            self.pick(&[("SF", 0.96), ("REJ", 0.02), ("S0", 0.005), ("RSTO", 0.005), ("S1", 0.01)])
        } else {
            "SF"
        };
        self.proto(protocol, kind, flag);
        match kind {
            "http" => {
                self.n[idx::SRC_BYTES] = self.sample_lognormal(5.5, 0.5);
                self.n[idx::DST_BYTES] = self.sample_lognormal(8.0, 1.0);
            }
            "smtp" => {
                self.n[idx::DURATION] = self.rng.gen_range(0..=3) as f64;
                self.n[idx::SRC_BYTES] = self.sample_lognormal(7.0, 0.8);
                self.n[idx::DST_BYTES] = self.sample_lognormal(5.9, 0.3);
            }
            "ftp_data" | "ftp" => {
                self.n[idx::DURATION] = self.pick_num(&[(0.0, 0.8), (2.0, 0.1), (30.0, 0.1)]);
                self.n[idx::SRC_BYTES] = self.sample_lognormal(7.5, 2.0);
            }
            "telnet" => {
                self.n[idx::DURATION] = self.rng.gen_range(5.0f64..3000.0).round();
                self.n[idx::SRC_BYTES] = self.sample_lognormal(6.5, 1.0);
                self.n[idx::DST_BYTES] = self.sample_lognormal(8.0, 1.0);
                self.n[idx::HOT] = self.pick_num(&[(0.0, 0.8), (1.0, 0.2)]);
            }
            "ecr_i" => {
                self.n[idx::SRC_BYTES] = self.pick_num(&[(520.0, 0.5), (30.0, 0.5)]);
            }
            _ => {
                self.n[idx::SRC_BYTES] = self.sample_lognormal(3.9, 0.4);
                self.n[idx::DST_BYTES] = self.sample_lognormal(4.5, 0.6);
            }
        }
        self.n[idx::LOGGED_IN] = f64::from(u8::from(protocol == "tcp" && flag == "SF"));
        let busy = self.rng.gen_bool(0.05);
        if busy {
            self.counts(100..=511, 0.0, 0.05);
        } else {
            self.counts(1..=30, 0.0, 0.02);
        }
        if flag == "REJ" {
            self.n[idx::RERROR] = self.rate(0.8);
        } else if flag == "S0" {
            self.n[idx::SERROR] = self.rate(0.8);
        }
        let same = self.rng.gen_range(0.4..1.0);
        self.host_window(same, 0.01, 0.02);
    }

    fn finish(self, label: &str) -> ConnectionRecord {
        ConnectionRecord {
            protocol: self.protocol.to_string(),
            service: self.service.to_string(),
            flag: self.flag.to_string(),
            numeric: self.n,
            label: label.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdd::labels::LabelMap;
    use crate::kdd::record::parse_record;

    #[test]
    fn separable_label_follows_duration() {
        let rows = separable_records(500, 4);
        assert!(rows.iter().all(|r| (r.label == "smurf") == (r.duration() > 0.0)));
        let intrusive = rows.iter().filter(|r| r.label == "smurf").count();
        assert!(intrusive > 200 && intrusive < 300);
        assert_eq!(rows, separable_records(500, 4));
    }

    #[test]
    fn generated_lines_parse_and_label() {
        let labels = LabelMap::default();
        for flavor in [Flavor::Training, Flavor::Test] {
            let mut g = Generator::new(flavor, 3);
            for r in g.records(2000) {
                let line = format_record(&r);
                let back = parse_record(&line).unwrap();
                assert_eq!(back.label, r.label);
                labels.group_attack(&back.label).unwrap();
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let a = Generator::new(Flavor::Training, 9).records(50);
        let b = Generator::new(Flavor::Training, 9).records(50);
        assert_eq!(a, b);
    }

    #[test]
    fn training_mix_is_attack_majority() {
        let rs = Generator::new(Flavor::Training, 1).records(5000);
        let normal = rs.iter().filter(|r| r.label == "normal").count();
        let share = normal as f64 / rs.len() as f64;
        assert!((0.15..0.25).contains(&share), "{share}");
    }
}

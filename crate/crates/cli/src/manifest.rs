//! Run manifests: everything needed to reproduce an output file bit-for-bit
//! on the same build, plus a content hash that excludes the timestamp so
//! reproduced outputs carry identical hashes.

use serde::{Deserialize, Serialize};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Canonical flat key-value config text, prior included.
    pub config: String,
    pub seed: u64,
    pub n: usize,
    pub trials: usize,
    pub tool_version: String,
    /// ISO-8601 UTC; informational only, excluded from the content hash.
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, config: String, seed: u64, n: usize, trials: usize) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            n,
            trials,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: iso8601_utc_now(),
        }
    }

    /// FNV-1a hash of every reproducibility-relevant field.
    pub fn content_hash(&self) -> String {
        let payload = format!(
            "{}\n{}\n{}\n{}\n{}\n{}",
            self.command, self.config, self.seed, self.n, self.trials, self.tool_version
        );
        format!("{:016x}", fnv1a64(payload.as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization cannot fail")
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("cannot parse manifest: {e}")))
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read manifest `{}`: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Current UTC time as `YYYY-MM-DDTHH:MM:SSZ` without external date crates.
pub fn iso8601_utc_now() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    iso8601_from_unix(secs)
}

fn iso8601_from_unix(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let tod = secs.rem_euclid(86_400);
    let (y, m, d) = civil_from_days(days);
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
        y,
        m,
        d,
        tod / 3600,
        (tod % 3600) / 60,
        tod % 60
    )
}

/// Gregorian date from days since 1970-01-01 (proleptic, era decomposition).
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (y + i64::from(m <= 2), m, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_timestamp() {
        let mut a = RunManifest::new("simulate", "delta = 0.7\n".into(), 1, 100, 10);
        let mut b = a.clone();
        a.timestamp = "2001-01-01T00:00:00Z".into();
        b.timestamp = "2002-02-02T02:02:02Z".into();
        assert_eq!(a.content_hash(), b.content_hash());
        b.seed = 2;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn json_round_trip() {
        let m = RunManifest::new("sweep", "kappa = 0.1\n".into(), 42, 500, 100);
        let back = RunManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn civil_dates() {
        assert_eq!(iso8601_from_unix(0), "1970-01-01T00:00:00Z");
        assert_eq!(iso8601_from_unix(951_782_400), "2000-02-29T00:00:00Z");
        assert_eq!(iso8601_from_unix(1_700_000_000), "2023-11-14T22:13:20Z");
    }
}

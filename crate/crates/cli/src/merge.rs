//! Flag/config-file merging and small value parsers.
//!
//! Precedence per option: explicit flag, then the config file entry under the
//! flag's long name, then the built-in default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};

pub struct Merge<'a> {
    map: &'a BTreeMap<String, String>,
}

impl<'a> Merge<'a> {
    pub fn new(map: &'a BTreeMap<String, String>) -> Self {
        Self { map }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn value<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.map.get(key) {
            Some(s) => s.parse().map_err(|e| anyhow!("config {key}={s:?}: {e}")),
            None => Ok(default),
        }
    }

    pub fn string(&self, key: &str, flag: Option<String>, default: &str) -> Result<String> {
        Ok(flag.or_else(|| self.map.get(key).cloned()).unwrap_or_else(|| default.to_string()))
    }

    pub fn opt_string(&self, key: &str, flag: Option<String>) -> Result<Option<String>> {
        Ok(flag.or_else(|| self.map.get(key).cloned()))
    }

    pub fn duration_us(&self, key: &str, flag: Option<String>, default_us: u64) -> Result<u64> {
        match flag.or_else(|| self.map.get(key).cloned()) {
            None => Ok(default_us),
            Some(s) => parse_duration_us(&s),
        }
    }

    /// Boolean switch supplied via the config file (`key=true`).
    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.map.get(key) {
            None => Ok(false),
            Some(s) => match s.as_str() {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                other => bail!("config {key}={other:?}: expected true/false"),
            },
        }
    }
}

/// Parses `500us`, `24ms`, `2s`, or a bare microsecond count.
pub fn parse_duration_us(s: &str) -> Result<u64> {
    let s = s.trim();
    let (number, scale) = if let Some(v) = s.strip_suffix("us") {
        (v, 1.0)
    } else if let Some(v) = s.strip_suffix("ms") {
        (v, 1_000.0)
    } else if let Some(v) = s.strip_suffix('s') {
        (v, 1_000_000.0)
    } else {
        (s, 1.0)
    };
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| anyhow!("bad duration {s:?}: expected e.g. 500us, 24ms, 2s"))?;
    if value < 0.0 {
        bail!("duration {s:?} must be >= 0");
    }
    Ok((value * scale).round() as u64)
}

/// Comma-separated list of instants; each entry takes duration suffixes.
pub fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    let mut out: Vec<u64> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_duration_us)
        .collect::<Result<_>>()?;
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        assert_eq!(parse_duration_us("500us").unwrap(), 500);
        assert_eq!(parse_duration_us("24ms").unwrap(), 24_000);
        assert_eq!(parse_duration_us("2s").unwrap(), 2_000_000);
        assert_eq!(parse_duration_us("1234").unwrap(), 1_234);
        assert_eq!(parse_duration_us("1.5ms").unwrap(), 1_500);
        assert!(parse_duration_us("fast").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_u64_list("30ms,10ms,50ms").unwrap(), vec![10_000, 30_000, 50_000]);
    }

    #[test]
    fn merge_precedence() {
        let mut map = BTreeMap::new();
        map.insert("th".to_string(), "5".to_string());
        let m = Merge::new(&map);
        assert_eq!(m.value("th", Some(3u32), 2).unwrap(), 3, "flag wins");
        assert_eq!(m.value("th", None::<u32>, 2).unwrap(), 5, "config file next");
        assert_eq!(m.value("radius", None::<u32>, 2).unwrap(), 2, "default last");
    }
}

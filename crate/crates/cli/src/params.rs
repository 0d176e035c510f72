//! Stage parameters from an optional `key=value` config file plus flags.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Params {
    /// Config-file entries first, then flags on top. Keys outside `allowed`
    /// are rejected in both places.
    pub fn resolve(allowed: &[&str], config: Option<(&str, &str)>, flags: &[(&str, Option<&str>)]) -> CliResult<Params> {
        let mut values = BTreeMap::new();
        if let Some((name, text)) = config {
            for (n, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::usage(format!("{name}:{}: expected key=value", n + 1)))?;
                let key = normalize(k);
                if !allowed.contains(&key.as_str()) {
                    return Err(CliError::usage(format!(
                        "{name}:{}: unknown config key {key:?} (accepted: {})",
                        n + 1,
                        allowed.join(", ")
                    )));
                }
                if values.insert(key.clone(), v.trim().to_string()).is_some() {
                    return Err(CliError::usage(format!("{name}:{}: key {key:?} given twice", n + 1)));
                }
            }
        }
        for (k, v) in flags {
            debug_assert!(allowed.contains(k), "flag {k} missing from the allowed list");
            if let Some(v) = v {
                values.insert(k.to_string(), v.to_string());
            }
        }
        Ok(Params { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|e| CliError::usage(format!("invalid value {s:?} for {key}: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    /// Resolved entries in key order, for provenance lines.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALLOWED: &[&str] = &["seed", "min_df", "max_df"];

    #[test]
    fn flags_win_over_config() {
        let p = Params::resolve(ALLOWED, Some(("c.txt", "# comment\nmin-df = 2\nmax_df=0.9\n")), &[("min_df", Some("5"))]).unwrap();
        assert_eq!(p.get::<usize>("min_df").unwrap(), Some(5));
        assert_eq!(p.get::<f64>("max_df").unwrap(), Some(0.9));
        assert_eq!(p.get_or("seed", 7u64).unwrap(), 7);
    }

    #[test]
    fn unknown_and_malformed_keys_are_usage_errors() {
        let e = Params::resolve(ALLOWED, Some(("c.txt", "window=3\n")), &[]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("window"));
        assert!(Params::resolve(ALLOWED, Some(("c.txt", "min_df\n")), &[]).is_err());
        assert!(Params::resolve(ALLOWED, Some(("c.txt", "min_df=1\nmin_df=2\n")), &[]).is_err());
    }

    #[test]
    fn bad_values_are_reported() {
        let p = Params::resolve(ALLOWED, None, &[("min_df", Some("two"))]).unwrap();
        let e = p.get::<usize>("min_df").unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}

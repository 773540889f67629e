//! Flat `key = value` run configs. One assignment per line, `#` starts
//! a comment, duplicate and unknown keys are errors that carry the
//! offending line number. Every command writes the settings it actually
//! ran with back out as `config.resolved`, in the same format.

use std::fmt::Display;
use std::path::Path;

pub type CliResult<T> = Result<T, String>;

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug)]
pub struct Config {
    entries: Vec<Entry>,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Config> {
        let mut entries: Vec<Entry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or(format!(
                "config line {line}: expected 'key = value', got '{stripped}'"
            ))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key.is_empty() {
                return Err(format!("config line {line}: missing key before '='"));
            }
            if value.is_empty() {
                return Err(format!("config line {line}: empty value for '{key}'"));
            }
            if let Some(first) = entries.iter().find(|e| e.key == key) {
                return Err(format!(
                    "config line {line}: duplicate key '{key}' (first set at line {})",
                    first.line
                ));
            }
            entries.push(Entry { key, value, line });
        }
        Ok(Config { entries })
    }

    /// Rejects any key outside the command's vocabulary, so typos fail
    /// loudly instead of silently falling back to defaults.
    pub fn check_keys(&self, allowed: &[&str]) -> CliResult<()> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(format!(
                    "config line {}: unknown key '{}' (expected one of: {})",
                    e.line,
                    e.key,
                    allowed.join(", ")
                ));
            }
        }
        Ok(())
    }

    fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key)
            .ok_or(format!("config is missing required key '{key}'"))
    }

    fn parsed<T: std::str::FromStr>(&self, e: &Entry, kind: &str) -> CliResult<T> {
        e.value.parse().map_err(|_| {
            format!(
                "config line {}: key '{}' expects {kind}, got '{}'",
                e.line, e.key, e.value
            )
        })
    }

    pub fn f64_opt(&self, key: &str) -> CliResult<Option<f64>> {
        self.entry(key).map(|e| self.parsed(e, "a number")).transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        self.entry(key)
            .map(|e| self.parsed(e, "a non-negative integer"))
            .transpose()
            .map(|v| v.unwrap_or(default))
    }

    pub fn u64_opt(&self, key: &str) -> CliResult<Option<u64>> {
        self.entry(key)
            .map(|e| self.parsed(e, "a non-negative integer"))
            .transpose()
    }

    /// Comma-separated floats, e.g. `gammas = 0, 1, 100`.
    pub fn f64_list(&self, key: &str) -> CliResult<Vec<f64>> {
        let e = self
            .entry(key)
            .ok_or(format!("config is missing required key '{key}'"))?;
        e.value
            .split(',')
            .map(|part| {
                part.trim().parse().map_err(|_| {
                    format!(
                        "config line {}: key '{}' expects comma-separated numbers, got '{}'",
                        e.line,
                        e.key,
                        part.trim()
                    )
                })
            })
            .collect()
    }
}

/// Accumulates the effective settings of a run for `config.resolved`.
pub struct Resolved {
    lines: Vec<String>,
}

impl Resolved {
    pub fn new() -> Self {
        Resolved { lines: Vec::new() }
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join("config.resolved");
        std::fs::write(&path, self.lines.join("\n") + "\n")
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_values() {
        let cfg = Config::parse("# run\nsteps = 100\n\nloss = elbo # inline\n").unwrap();
        assert_eq!(cfg.get("steps"), Some("100"));
        assert_eq!(cfg.get("loss"), Some("elbo"));
        assert_eq!(cfg.usize_or("steps", 7).unwrap(), 100);
        assert_eq!(cfg.usize_or("absent", 7).unwrap(), 7);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::parse("steps = 10\nnonsense\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        let err = Config::parse("a = 1\nb = 2\na = 3\n").unwrap_err();
        assert!(err.contains("line 3") && err.contains("line 1"), "{err}");
        let cfg = Config::parse("steps = ten\n").unwrap();
        let err = cfg.usize_or("steps", 1).unwrap_err();
        assert!(err.contains("line 1") && err.contains("ten"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line() {
        let cfg = Config::parse("steps = 10\nstepz = 11\n").unwrap();
        let err = cfg.check_keys(&["steps"]).unwrap_err();
        assert!(err.contains("line 2") && err.contains("stepz"), "{err}");
        cfg.check_keys(&["steps", "stepz"]).unwrap();
    }

    #[test]
    fn float_lists_split_on_commas() {
        let cfg = Config::parse("gammas = 0, 1.5,100\n").unwrap();
        assert_eq!(cfg.f64_list("gammas").unwrap(), vec![0.0, 1.5, 100.0]);
        let cfg = Config::parse("gammas = 0, x\n").unwrap();
        assert!(cfg.f64_list("gammas").unwrap_err().contains("'x'"));
    }

    #[test]
    fn resolved_round_trips_through_the_parser() {
        let mut r = Resolved::new();
        r.set("loss", "elbo");
        r.set("steps", 100);
        let text = r.lines.join("\n");
        let cfg = Config::parse(&text).unwrap();
        assert_eq!(cfg.get("loss"), Some("elbo"));
        assert_eq!(cfg.get("steps"), Some("100"));
    }
}

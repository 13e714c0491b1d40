//! The JSON envelope shared by every verb.

use std::fs;
use std::io;

use crate::config::Config;

/// Bumped whenever a field of a report changes meaning or is removed.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub verb: String,
    pub pass: bool,
    pub result: serde_json::Value,
}

impl Report {
    pub fn new(verb: &str, pass: bool, result: serde_json::Value) -> Self {
        Report { verb: verb.to_string(), pass, result }
    }

    pub fn to_json(&self, cfg: &Config) -> serde_json::Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "verb": self.verb,
            "config": cfg.to_json(),
            "pass": self.pass,
            "result": self.result,
        })
    }

    /// Pretty JSON with keys in sorted order and a trailing newline.
    pub fn render(&self, cfg: &Config) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json(cfg)).expect("JSON values always serialize");
        s.push('\n');
        s
    }

    /// Writes to the configured output path, or stdout when there is none.
    pub fn emit(&self, cfg: &Config) -> io::Result<()> {
        let text = self.render(cfg);
        match &cfg.output {
            Some(path) => fs::write(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_is_sorted_and_versioned() {
        let r = Report::new("eis", true, serde_json::json!({"z": 1, "a": 2}));
        let text = r.render(&Config::default());
        assert!(text.find("\"config\"").unwrap() < text.find("\"verb\"").unwrap());
        assert!(text.find("\"a\"").unwrap() < text.find("\"z\"").unwrap());
        assert!(text.contains("\"schema_version\": 1"));
        assert_eq!(text, r.render(&Config::default()));
    }
}

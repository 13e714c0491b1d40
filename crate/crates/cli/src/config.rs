//! Run configuration: defaults, `key=value` files, the precision environment
//! variable and command-line overrides, validated once at startup.

use std::fs;
use std::path::{Path, PathBuf};

use eisfam::arith::{fmt_rat, is_prime, parse_rat, rat_int, PadicCtx, Rat};
use eisfam::family::EvalPrecision;
use thiserror::Error;

/// Environment variable holding the default p-adic working precision N.
pub const PRECISION_ENV: &str = "EISFAM_PRECISION";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected key=value, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    Value { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub p: u64,
    /// working precision N of p-adic contexts
    pub precision: u32,
    /// guard digits g; results are certified to N − g
    pub guard: u32,
    /// q-expansion bound in full q units
    pub q_bound: Rat,
    /// trailing Mahler terms used in the tail certificate
    pub mahler_window: usize,
    /// cocycle truncation (B_q, B_t, B_T); B_t = 0 means j + 2
    pub trunc_q: Rat,
    pub trunc_t: u32,
    pub trunc_big_t: u32,
    pub output: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            p: 5,
            precision: 25,
            guard: 6,
            q_bound: rat_int(3),
            mahler_window: 8,
            trunc_q: rat_int(4),
            trunc_t: 0,
            trunc_big_t: 2,
            output: None,
        }
    }
}

impl Config {
    /// Defaults, with the precision taken from the environment when set.
    pub fn from_env() -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        if let Ok(v) = std::env::var(PRECISION_ENV) {
            cfg.set("precision", &v)?;
        }
        Ok(cfg)
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        self.apply_text(&text)
    }

    /// Applies `key=value` lines. Blank lines and lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::Value { key: key.to_string(), value: value.to_string() };
        match key {
            "p" => self.p = value.parse().map_err(|_| bad())?,
            "precision" | "N" => self.precision = value.parse().map_err(|_| bad())?,
            "guard" | "g" => self.guard = value.parse().map_err(|_| bad())?,
            "q_bound" => self.q_bound = parse_rat(value).map_err(|_| bad())?,
            "mahler_window" => self.mahler_window = value.parse().map_err(|_| bad())?,
            "trunc_q" => self.trunc_q = parse_rat(value).map_err(|_| bad())?,
            "trunc_t" => self.trunc_t = value.parse().map_err(|_| bad())?,
            "trunc_T" | "trunc_big_t" => self.trunc_big_t = value.parse().map_err(|_| bad())?,
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        if self.p == 2 || !is_prime(self.p) {
            return fail(format!("p = {} must be an odd prime", self.p));
        }
        if self.precision == 0 || self.guard >= self.precision {
            return fail(format!("need 0 <= guard < precision, got guard {} and precision {}", self.guard, self.precision));
        }
        if self.q_bound < rat_int(0) || self.trunc_q < rat_int(0) {
            return fail("q-bounds must be nonnegative".into());
        }
        if self.mahler_window == 0 {
            return fail("mahler_window must be positive".into());
        }
        if self.trunc_big_t == 0 {
            return fail("trunc_T must be positive".into());
        }
        Ok(())
    }

    pub fn ctx(&self) -> PadicCtx {
        PadicCtx::new(self.p, self.precision).expect("validated prime and precision")
    }

    /// Precision at which p-adic results are certified.
    pub fn certified(&self) -> i64 {
        self.precision as i64 - self.guard as i64
    }

    pub fn eval_precision(&self) -> EvalPrecision {
        EvalPrecision { ctx: self.ctx(), requested: self.certified(), window: self.mahler_window }
    }

    /// The same configuration with `extra` more digits of working precision
    /// and of requested precision.
    pub fn raised(&self, extra: u32) -> Self {
        Config { precision: self.precision + extra, ..self.clone() }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "p": self.p,
            "precision": self.precision,
            "guard": self.guard,
            "certified_precision": self.certified(),
            "q_bound": fmt_rat(&self.q_bound),
            "mahler_window": self.mahler_window,
            "trunc_q": fmt_rat(&self.trunc_q),
            "trunc_t": self.trunc_t,
            "trunc_T": self.trunc_big_t,
            "output": self.output.as_ref().map(|p| p.display().to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_value_text() {
        let mut cfg = Config::default();
        cfg.apply_text("# run settings\np = 7\nprecision=30\n\nq_bound = 5/2\ntrunc_T=3\n").unwrap();
        assert_eq!(cfg.p, 7);
        assert_eq!(cfg.precision, 30);
        assert_eq!(cfg.q_bound, parse_rat("5/2").unwrap());
        assert_eq!(cfg.trunc_big_t, 3);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = Config::default();
        assert!(matches!(cfg.apply_text("p 5"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(cfg.set("colour", "red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(cfg.set("precision", "many"), Err(ConfigError::Value { .. })));
        cfg.p = 4;
        assert!(cfg.validate().is_err());
        cfg.p = 5;
        cfg.guard = 25;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn certified_precision_leaves_guard_digits() {
        let cfg = Config::default();
        assert_eq!(cfg.certified(), 19);
        assert_eq!(cfg.raised(5).certified(), 24);
    }
}

//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Values
//! are layered: built-in defaults, then a config file, then command-line
//! overrides, and finally the `ORCH_SEED` environment variable for `seed`.
//! Unknown keys and unparsable values are errors that name the key.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const SEED_ENV: &str = "ORCH_SEED";

/// The shipped desk-scale reference configuration.
pub const REFERENCE_DESK: &str = include_str!("../data/reference-desk.config");

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    // generation
    pub n_records: usize,
    pub disruption_rate: f64,
    pub multilingual_rate: f64,
    pub missing_rate: f64,
    pub outlier_rate: f64,
    pub fields: usize,
    pub n_workers: usize,
    // preprocessing and split
    pub cap_pct: f64,
    pub r_threshold: f64,
    pub key_features: usize,
    pub normalize_language: bool,
    pub train_frac: f64,
    pub folds: usize,
    pub shift_size: usize,
    // scenario
    pub downtime_multiplier: f64,
    pub reroute_minutes: f64,
    pub surge_wait_factor: f64,
    pub defer_positions: usize,
    pub decision_cap: u32,
    pub discount_minutes: f64,
    // dqn
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub batch_size: usize,
    pub target_sync_every: u64,
    pub train_steps: u64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub replay_capacity: usize,
    pub grad_clip_norm: f64,
    pub checkpoint_every: u64,
    pub grid_learning_rates: Vec<f64>,
    pub grid_hidden_layers: Vec<usize>,
    pub grid_hidden_widths: Vec<usize>,
    // baselines
    pub forest_trees: usize,
    pub forest_max_depth: usize,
    pub forest_min_samples_split: usize,
    pub forest_class_balanced: bool,
    pub surge_threshold: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            n_records: 10_000,
            disruption_rate: 0.05,
            multilingual_rate: 0.10,
            missing_rate: 0.03,
            outlier_rate: 0.01,
            fields: 120,
            n_workers: 8,
            cap_pct: 0.99,
            r_threshold: 0.8,
            key_features: 100,
            normalize_language: true,
            train_frac: 0.8,
            folds: 5,
            shift_size: 100,
            downtime_multiplier: 2.0,
            reroute_minutes: 5.0,
            surge_wait_factor: 1.0,
            defer_positions: 3,
            decision_cap: 6,
            discount_minutes: 5.0,
            learning_rate: 0.01,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            batch_size: 64,
            target_sync_every: 500,
            train_steps: 20_000,
            hidden_layers: 5,
            hidden_width: 64,
            replay_capacity: 50_000,
            grad_clip_norm: 5.0,
            checkpoint_every: 0,
            grid_learning_rates: Vec::new(),
            grid_hidden_layers: Vec::new(),
            grid_hidden_widths: Vec::new(),
            forest_trees: 50,
            forest_max_depth: 8,
            forest_min_samples_split: 5,
            forest_class_balanced: true,
            surge_threshold: 5,
        }
    }
}

fn bad(key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("{key}: invalid value `{value}` ({why})"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, "not a number"))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

macro_rules! config_keys {
    ($($key:ident: $kind:ident),* $(,)?) => {
        impl RunConfig {
            /// Every accepted key, in file order.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let value = value.trim();
                match key {
                    $(stringify!($key) => self.$key = config_keys!(@parse $kind, key, value),)*
                    _ => return Err(Error::Config(format!("unknown key `{key}`"))),
                }
                Ok(())
            }

            /// The configuration as a config file, one line per key.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $(writeln!(out, "{} = {}", stringify!($key), config_keys!(@show $kind, self.$key)).expect("writing to a string");)*
                out
            }
        }
    };
    (@parse num, $k:expr, $v:expr) => { num($k, $v)? };
    (@parse flag, $k:expr, $v:expr) => { flag($k, $v)? };
    (@parse list, $k:expr, $v:expr) => { list($k, $v)? };
    (@show num, $e:expr) => { $e.to_string() };
    (@show flag, $e:expr) => { $e.to_string() };
    (@show list, $e:expr) => { join(&$e) };
}

config_keys! {
    seed: num,
    n_records: num,
    disruption_rate: num,
    multilingual_rate: num,
    missing_rate: num,
    outlier_rate: num,
    fields: num,
    n_workers: num,
    cap_pct: num,
    r_threshold: num,
    key_features: num,
    normalize_language: flag,
    train_frac: num,
    folds: num,
    shift_size: num,
    downtime_multiplier: num,
    reroute_minutes: num,
    surge_wait_factor: num,
    defer_positions: num,
    decision_cap: num,
    discount_minutes: num,
    learning_rate: num,
    gamma: num,
    epsilon_start: num,
    epsilon_end: num,
    epsilon_decay_steps: num,
    batch_size: num,
    target_sync_every: num,
    train_steps: num,
    hidden_layers: num,
    hidden_width: num,
    replay_capacity: num,
    grad_clip_norm: num,
    checkpoint_every: num,
    grid_learning_rates: list,
    grid_hidden_layers: list,
    grid_hidden_widths: list,
    forest_trees: num,
    forest_max_depth: num,
    forest_min_samples_split: num,
    forest_class_balanced: flag,
    surge_threshold: num,
}

impl RunConfig {
    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn reference() -> RunConfig {
        RunConfig::from_text(REFERENCE_DESK).expect("shipped reference config parses")
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::MissingInput(format!("config file {}: {e}", path.display())))?;
        RunConfig::from_text(&text)
    }

    /// Defaults, then the optional file, then `overrides`, then `ORCH_SEED`.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut cfg = match file {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.seed = num(SEED_ENV, &seed)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, why: &str| if ok { Ok(()) } else { Err(Error::Config(format!("{key}: {why}"))) };
        for (key, v) in [
            ("disruption_rate", self.disruption_rate),
            ("multilingual_rate", self.multilingual_rate),
            ("missing_rate", self.missing_rate),
            ("outlier_rate", self.outlier_rate),
        ] {
            check((0.0..=1.0).contains(&v), key, "must be in [0, 1]")?;
        }
        check(self.n_records > 0, "n_records", "must be positive")?;
        check(self.n_workers > 0, "n_workers", "must be positive")?;
        check(self.fields >= crate::domain::CORE_FIELD_COUNT, "fields", "below the core field count")?;
        check(self.fields <= crate::datagen::MAX_FIELD_COUNT, "fields", "above the maximum field count")?;
        check(self.cap_pct > 0.0 && self.cap_pct <= 1.0, "cap_pct", "must be in (0, 1]")?;
        check((0.0..=1.0).contains(&self.r_threshold), "r_threshold", "must be in [0, 1]")?;
        check(self.train_frac > 0.0 && self.train_frac < 1.0, "train_frac", "must be in (0, 1)")?;
        check(self.folds >= 1, "folds", "must be positive")?;
        check(self.shift_size >= 1, "shift_size", "must be positive")?;
        check(self.decision_cap >= 1, "decision_cap", "must be positive")?;
        check(self.discount_minutes > 0.0, "discount_minutes", "must be positive")?;
        check(self.surge_threshold >= 1, "surge_threshold", "must be at least 1")?;
        check(self.forest_trees >= 1, "forest_trees", "must be positive")?;
        for hp in self.grid() {
            hp.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

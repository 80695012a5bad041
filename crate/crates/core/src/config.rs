//! TOML experiment configuration. Every field except `seed` is optional and
//! falls back to the per-suite default; errors point at the offending line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::DyadicMesh;
use crate::shifts::ShiftMode;
use crate::suites::Suite;
use crate::weights::WeightSpec;
use crate::young::YoungFunction;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "DYADIC_BUMP_THREADS";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Option<String>,
    pub seed: u64,
    pub dim: Option<u32>,
    pub depth: Option<u32>,
    /// Resolutions for the cross-resolution suites.
    pub depths: Option<Vec<u32>>,
    pub p: Option<f64>,
    pub delta: Option<f64>,
    /// Cascade strength of generated weight pairs.
    pub eta: Option<f64>,
    /// Number of cascade pairs.
    pub pairs: Option<usize>,
    /// Trial budget (random functions, shifts, candidates or steps).
    pub budget: Option<usize>,
    pub u: Option<String>,
    pub sigma: Option<String>,
    #[serde(default)]
    pub young: YoungSection,
    #[serde(default)]
    pub shift: ShiftSection,
    #[serde(default)]
    pub hilbert: HilbertSection,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YoungSection {
    pub a: Option<String>,
    pub b: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSection {
    pub mode: Option<String>,
    pub m: Option<u32>,
    pub n: Option<u32>,
    pub seed: Option<u64>,
    /// Use the sparse-family shift `S_L` of this parent order.
    pub lerner_order: Option<u32>,
    pub family_min_level: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertSection {
    /// Truncation in cell widths (at least 0.5).
    pub eps_cells: Option<f64>,
    pub min_depth: Option<u32>,
    pub candidate_levels: Option<u32>,
    pub maximal_cap: Option<f64>,
    pub penalty: Option<f64>,
}

/// 1-based line of byte offset `at`.
fn line_of(text: &str, at: usize) -> usize {
    text[..at.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...`, inside `[section]` when given.
fn key_line(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        if k.trim() == key && current.as_deref() == section {
            return Some(i + 1);
        }
    }
    None
}

impl ExperimentConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate().map_err(|(section, key, message)| match key_line(text, section, key) {
            Some(line) => Error::Parse { line, message },
            None => Error::Config(message),
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    /// Semantic checks; on failure names the `(section, key)` to blame.
    pub fn validate(&self) -> std::result::Result<(), (Option<&'static str>, &'static str, String)> {
        let top = |key: &'static str, msg: String| (None, key, msg);
        if let Some(s) = &self.suite {
            s.parse::<Suite>().map_err(|e| top("suite", e.to_string()))?;
        }
        let dim = self.dim.unwrap_or(1);
        if let Some(d) = self.depth {
            DyadicMesh::new(dim, d).map_err(|e| top("depth", e.to_string()))?;
        } else if self.dim.is_some() {
            DyadicMesh::new(dim, 1).map_err(|e| top("dim", e.to_string()))?;
        }
        for &d in self.depths.iter().flatten() {
            DyadicMesh::new(dim, d).map_err(|e| top("depths", e.to_string()))?;
        }
        if let Some(p) = self.p {
            if !(p > 1.0 && p.is_finite()) {
                return Err(top("p", format!("p = {p} must lie in (1, ∞)")));
            }
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(top("delta", format!("delta = {d} must be nonnegative")));
            }
        }
        if let Some(e) = self.eta {
            if !(0.0..1.0).contains(&e) {
                return Err(top("eta", format!("eta = {e} must lie in [0, 1)")));
            }
        }
        for (key, spec) in [("u", &self.u), ("sigma", &self.sigma)] {
            if let Some(s) = spec {
                WeightSpec::parse(s).map_err(|e| top(key, e.to_string()))?;
            }
        }
        for (key, spec) in [("a", &self.young.a), ("b", &self.young.b)] {
            if let Some(s) = spec {
                YoungFunction::parse(s).map_err(|e| (Some("young"), key, e.to_string()))?;
            }
        }
        if let Some(m) = &self.shift.mode {
            m.parse::<ShiftMode>().map_err(|e| (Some("shift"), "mode", e.to_string()))?;
        }
        if let Some(e) = self.hilbert.eps_cells {
            if !(e >= 0.5 && e.is_finite()) {
                return Err((Some("hilbert"), "eps_cells", format!("eps_cells = {e} must be at least 0.5")));
            }
        }
        Ok(())
    }
}

/// Size the global rayon pool from [`THREADS_ENV`]; returns the cap if set.
pub fn apply_thread_cap() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    Ok(Some(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = r#"
suite = "maximal"
seed = 7
depths = [8, 10]
eta = 0.4
u = "cascade:0.5,1"

[young]
b = "logbump:p=2,delta=1"

[shift]
mode = "positive"
m = 1
"#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.depths, Some(vec![8, 10]));
        assert_eq!(c.shift.m, Some(1));
    }

    #[test]
    fn errors_name_the_line() {
        let missing_seed = "suite = \"holder\"\n";
        assert!(matches!(ExperimentConfig::from_toml_str(missing_seed), Err(Error::Parse { .. })));
        let unknown = "seed = 1\n\nwobble = 3\n";
        match ExperimentConfig::from_toml_str(unknown) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_eta = "seed = 1\neta = 1.5\n";
        match ExperimentConfig::from_toml_str(bad_eta) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("eta"));
            }
            other => panic!("{other:?}"),
        }
        let bad_mode = "seed = 1\n[young]\na = \"power:p=2\"\n[shift]\nmode = \"wavy\"\n";
        match ExperimentConfig::from_toml_str(bad_mode) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let bad_suite = "seed = 1\nsuite = \"nope\"\n";
        assert!(matches!(ExperimentConfig::from_toml_str(bad_suite), Err(Error::Parse { line: 2, .. })));
        let deep = "seed = 1\ndepth = 30\n";
        assert!(matches!(ExperimentConfig::from_toml_str(deep), Err(Error::Parse { line: 2, .. })));
    }
}

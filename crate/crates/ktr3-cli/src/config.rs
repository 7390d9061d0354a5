//! INI configuration with strict key validation.
//!
//! Every key is optional; flags override file values which override
//! defaults. Unknown sections or keys are hard errors so that a typo
//! cannot silently run the default experiment.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use ktr3::datagen::Problem;
use ktr3::evaluation::{default_lambda_grid, RiskMode};

/// Fully resolved settings for every subcommand.
#[derive(Debug, Clone)]
pub struct Config {
    pub problem: Problem,
    pub n_min: usize,
    pub n_max: usize,
    pub n_points: usize,
    pub repetitions: usize,
    pub risk_mode: RiskMode,
    /// Prefix-draw window `{⌊(1-α)n⌋, …, n-1}`; 1 is the full uniform
    /// draw, a tiny value scores the final fit alone.
    pub tail_fraction: f64,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
    pub check_instances: usize,
    pub check_max_n: usize,
    pub timing: bool,
    pub svg: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            problem: Problem::Spline {
                b: 0.125,
                beta: 0.4375,
                epsilon: 0.1,
            },
            n_min: 100,
            n_max: 1000,
            n_points: 8,
            repetitions: 5,
            risk_mode: RiskMode::KAverage,
            tail_fraction: 1.0,
            lambda_grid: default_lambda_grid(),
            seed: 42,
            check_instances: 100,
            check_max_n: 50,
            timing: false,
            svg: true,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = Config::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            config.apply_ini(&text)
                .with_context(|| format!("in config {}", path.display()))?;
        }
        Ok(config)
    }

    fn apply_ini(&mut self, text: &str) -> Result<()> {
        let entries = parse_ini(text)?;

        // The problem section is resolved as a whole so that switching
        // `kind` picks up the matching parameter defaults.
        let (mut b, mut beta, mut epsilon) = (0.125, 0.4375, 0.1);
        let mut q = 2.0;
        let mut kind = "spline".to_string();
        if let Problem::Spline {
            b: b0,
            beta: beta0,
            epsilon: e0,
        } = self.problem
        {
            (b, beta, epsilon) = (b0, beta0, e0);
        }

        for ((section, key), value) in &entries {
            let parse_f64 =
                || -> Result<f64> { value.parse().map_err(|_| bad(section, key, value)) };
            let parse_usize =
                || -> Result<usize> { value.parse().map_err(|_| bad(section, key, value)) };
            match (section.as_str(), key.as_str()) {
                ("problem", "kind") => kind = value.clone(),
                ("problem", "b") => b = parse_f64()?,
                ("problem", "beta") => beta = parse_f64()?,
                ("problem", "epsilon") => epsilon = parse_f64()?,
                ("problem", "q") => q = parse_f64()?,
                ("experiment", "n_min") => self.n_min = parse_usize()?,
                ("experiment", "n_max") => self.n_max = parse_usize()?,
                ("experiment", "n_points") => self.n_points = parse_usize()?,
                ("experiment", "repetitions") => self.repetitions = parse_usize()?,
                ("experiment", "risk_mode") => {
                    self.risk_mode = value.parse().map_err(|_| bad(section, key, value))?
                }
                ("experiment", "tail_fraction") => {
                    let v = parse_f64()?;
                    if !(v > 0.0 && v <= 1.0) {
                        return Err(bad(section, key, value));
                    }
                    self.tail_fraction = v;
                }
                ("experiment", "lambda_grid") => {
                    let grid: std::result::Result<Vec<f64>, _> =
                        value.split(',').map(|v| v.trim().parse()).collect();
                    self.lambda_grid = grid.map_err(|_| bad(section, key, value))?;
                }
                ("experiment", "seed") => self.seed = value.parse().map_err(|_| bad(section, key, value))?,
                ("check", "instances") => self.check_instances = parse_usize()?,
                ("check", "max_n") => self.check_max_n = parse_usize()?,
                ("output", "timing") => self.timing = parse_bool(value).ok_or_else(|| bad(section, key, value))?,
                ("output", "svg") => self.svg = parse_bool(value).ok_or_else(|| bad(section, key, value))?,
                _ => bail!("unknown config key [{section}] {key}"),
            }
        }

        self.problem = match kind.as_str() {
            "spline" => Problem::Spline { b, beta, epsilon },
            "zero_noise" => Problem::ZeroNoise { q },
            other => bail!("unknown problem kind {other:?} (expected spline or zero_noise)"),
        };
        Ok(())
    }

    /// Logarithmic grid of sample sizes, deduplicated ascending.
    pub fn n_grid(&self) -> Result<Vec<usize>> {
        if self.n_min == 0 || self.n_max < self.n_min || self.n_points == 0 {
            bail!(
                "bad size grid: n_min={}, n_max={}, n_points={}",
                self.n_min,
                self.n_max,
                self.n_points
            );
        }
        let (lo, hi) = ((self.n_min as f64).ln(), (self.n_max as f64).ln());
        let count = self.n_points.max(1);
        let mut grid: Vec<usize> = (0..count)
            .map(|i| {
                let t = if count == 1 {
                    0.0
                } else {
                    i as f64 / (count - 1) as f64
                };
                (lo + t * (hi - lo)).exp().round() as usize
            })
            .collect();
        grid.dedup();
        Ok(grid)
    }
}

fn bad(section: &str, key: &str, value: &str) -> anyhow::Error {
    anyhow!("bad value for [{section}] {key}: {value:?}")
}

fn parse_bool(value: &str) -> Option<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Minimal INI reader: `[section]` headers, `key = value` pairs, `#` or
/// `;` comments (full-line or trailing), blank lines ignored.
fn parse_ini(text: &str) -> Result<BTreeMap<(String, String), String>> {
    let mut entries = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find(['#', ';']) {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            section = name
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("line {}: malformed section header {raw:?}", lineno + 1))?
                .trim()
                .to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got {raw:?}", lineno + 1))?;
        if section.is_empty() {
            bail!("line {}: key outside any [section]", lineno + 1);
        }
        let prior = entries.insert(
            (section.clone(), key.trim().to_string()),
            value.trim().to_string(),
        );
        if prior.is_some() {
            bail!("line {}: duplicate key {} in [{}]", lineno + 1, key.trim(), section);
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_file() {
        let c = Config::load(None).unwrap();
        assert_eq!(c.n_points, 8);
        assert_eq!(c.seed, 42);
        assert!(matches!(c.problem, Problem::Spline { .. }));
        assert_eq!(c.lambda_grid.len(), 26);
    }

    #[test]
    fn full_file_round_trip() {
        let mut c = Config::default();
        c.apply_ini(
            "# experiment setup\n\
             [problem]\n kind = zero_noise\n q = 4.0\n\
             [experiment]\n n_min = 50 ; inline comment\n n_max = 200\n n_points = 3\n\
             repetitions = 2\n risk_mode = single_draw\n tail_fraction = 0.25\n\
             lambda_grid = 0, 1e-3, 1\n seed = 7\n\
             [check]\n instances = 5\n max_n = 10\n\
             [output]\n timing = true\n svg = false\n",
        )
        .unwrap();
        assert_eq!(c.problem, Problem::ZeroNoise { q: 4.0 });
        assert_eq!((c.n_min, c.n_max, c.n_points), (50, 200, 3));
        assert_eq!(c.repetitions, 2);
        assert_eq!(c.risk_mode, RiskMode::SingleDraw);
        assert_eq!(c.tail_fraction, 0.25);
        assert_eq!(c.lambda_grid, vec![0.0, 1e-3, 1.0]);
        assert_eq!(c.seed, 7);
        assert_eq!((c.check_instances, c.check_max_n), (5, 10));
        assert!(c.timing);
        assert!(!c.svg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut c = Config::default();
        assert!(c.apply_ini("[problem]\nbeta = 0.25\ntypo = 1\n").is_err());
        assert!(c.apply_ini("[nonsense]\nx = 1\n").is_err());
        assert!(c.apply_ini("[problem]\nkind = cubic\n").is_err());
        assert!(c.apply_ini("[experiment]\nn_min = tiny\n").is_err());
        assert!(c.apply_ini("orphan = 1\n").is_err());
        assert!(c.apply_ini("[experiment]\nseed = 1\nseed = 2\n").is_err());
    }

    #[test]
    fn size_grids_are_log_spaced_and_deduplicated() {
        let c = Config {
            n_min: 100,
            n_max: 1000,
            n_points: 8,
            ..Config::default()
        };
        let grid = c.n_grid().unwrap();
        assert_eq!(grid.first(), Some(&100));
        assert_eq!(grid.last(), Some(&1000));
        assert_eq!(grid.len(), 8);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));

        let tiny = Config {
            n_min: 5,
            n_max: 6,
            n_points: 8,
            ..Config::default()
        };
        let grid = tiny.n_grid().unwrap();
        assert!(grid.len() <= 3);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));

        assert!(Config {
            n_min: 10,
            n_max: 5,
            n_points: 2,
            ..Config::default()
        }
        .n_grid()
        .is_err());
    }
}

//! `key = value` configuration files merged with command-line flags.
//!
//! Precedence is flag, then file, then built-in default. Every value is kept
//! as text until [`Settings::resolve`] so that errors can name the key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use icc_core::algos::{Algorithm, Metric};
use icc_core::consensus::{EnsembleConfig, RankSpec, Representation};
use icc_core::dimred::RankPolicy;
use icc_core::icc::{IccConfig, IterateRepresentations};
use icc_core::ingest::Layout;

use crate::error::{CliError, Result};

pub const KEYS: [&str; 15] = [
    "input",
    "layout",
    "ktilde",
    "tau",
    "theta",
    "max_iterations",
    "algorithms",
    "representations",
    "rank_policy",
    "ranks",
    "metric",
    "seed",
    "out_dir",
    "squared_exponent",
    "iterate_representations",
];

/// Raw textual settings, keyed by config key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse_file_text(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "config line {}: expected `key = value`, got `{raw}`",
                    no + 1
                ))
            })?;
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key `{key}` (known keys: {})",
                    no + 1,
                    KEYS.join(", ")
                )));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Settings { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Settings::parse_file_text(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key), "unknown key {key}");
        self.values.insert(key.into(), value.into());
    }

    /// Later settings win.
    pub fn overlay(mut self, other: &Settings) -> Settings {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T>(
        &self,
        key: &str,
        default: T,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse(v).map_err(|m| CliError::config(key, m)),
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let defaults = IccConfig::default();
        let input = self
            .get("input")
            .filter(|s| !s.is_empty())
            .map(PathBuf::from);
        let layout = self.parsed("layout", Layout::RowsAreObservations, parse_layout)?;
        let ktilde = self.parsed("ktilde", defaults.ensemble.ktilde.clone(), parse_ktilde)?;
        let tau = self.parsed("tau", defaults.tau, |v| {
            let t = parse_f64(v)?;
            if (0.0..0.5).contains(&t) {
                Ok(t)
            } else {
                Err(format!("must lie in [0, 0.5), got {v}"))
            }
        })?;
        let theta = self.parsed("theta", defaults.theta, |v| {
            let t = parse_f64(v)?;
            if t > 0.0 && t < 1.0 {
                Ok(t)
            } else {
                Err(format!("must lie in (0, 1), got {v}"))
            }
        })?;
        let max_iterations = self.parsed("max_iterations", defaults.max_iterations, |v| match v
            .parse::<usize>(
        ) {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("expected a positive integer, got `{v}`")),
        })?;
        let algorithms = self.parsed("algorithms", Algorithm::ALL.to_vec(), |v| {
            parse_list(v, &Algorithm::ALL)
        })?;
        let representations =
            self.parsed("representations", Representation::ALL.to_vec(), |v| {
                parse_list(v, &Representation::ALL)
            })?;
        let policy = self.parsed("rank_policy", RankPolicy::Variance, |v| match v {
            "variance" => Ok(RankPolicy::Variance),
            "fraction" | "fraction-of-n" => Ok(RankPolicy::FractionOfN),
            _ => Err(format!("expected variance or fraction, got `{v}`")),
        })?;
        let ranks = match self.get("ranks") {
            None => RankSpec::Policy(policy),
            Some(v) => {
                if self.get("rank_policy").is_some() {
                    return Err(CliError::config(
                        "ranks",
                        "conflicts with rank_policy; give one or the other",
                    ));
                }
                let r = parse_ktilde(v).map_err(|m| CliError::config("ranks", m))?;
                RankSpec::Explicit(r)
            }
        };
        let metric = self.parsed("metric", Metric::Euclidean, |v| match v {
            "euclidean" => Ok(Metric::Euclidean),
            "spherical" => Ok(Metric::Spherical),
            _ => Err(format!("expected euclidean or spherical, got `{v}`")),
        })?;
        let seed = self.parsed("seed", 0u64, |v| {
            v.parse::<u64>()
                .map_err(|_| format!("expected a nonnegative integer, got `{v}`"))
        })?;
        let out_dir = PathBuf::from(self.get("out_dir").unwrap_or("icc-out"));
        let squared_exponent = self.parsed("squared_exponent", false, parse_bool)?;
        let iterate_representations = self.parsed(
            "iterate_representations",
            IterateRepresentations::All,
            |v| v.parse().map_err(|e: icc_core::Error| e.to_string()),
        )?;
        let icc = IccConfig {
            ensemble: EnsembleConfig {
                ktilde,
                algorithms,
                representations,
                ranks,
                metric,
                base_seed: seed,
                ..EnsembleConfig::default()
            },
            tau,
            max_iterations,
            theta,
            iterate_representations,
            ..defaults
        };
        let ens = &icc.ensemble;
        if ens.ktilde.is_empty() || ens.ktilde[0] == 0 {
            return Err(CliError::config("ktilde", "values must be positive"));
        }
        if ens.algorithms.is_empty() {
            return Err(CliError::config(
                "algorithms",
                "at least one algorithm is required",
            ));
        }
        if ens.representations.is_empty() {
            return Err(CliError::config(
                "representations",
                "at least one representation is required",
            ));
        }
        Ok(RunConfig {
            input,
            layout,
            icc,
            out_dir,
            squared_exponent,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub layout: Layout,
    pub icc: IccConfig,
    pub out_dir: PathBuf,
    pub squared_exponent: bool,
}

impl RunConfig {
    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| {
            CliError::config(
                "input",
                "no input file given (use --input or `input =` in the config file)",
            )
        })
    }

    /// Every setting with defaults filled in, one `key = value` per line in
    /// key order. The same text parses back to the same configuration.
    pub fn to_config_text(&self) -> String {
        let e = &self.icc.ensemble;
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut kv: Vec<(&str, String)> = vec![
            (
                "input",
                self.input
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            ("layout", layout_name(self.layout).into()),
            ("ktilde", join(&e.ktilde)),
            ("tau", self.icc.tau.to_string()),
            ("theta", self.icc.theta.to_string()),
            ("max_iterations", self.icc.max_iterations.to_string()),
            (
                "algorithms",
                e.algorithms
                    .iter()
                    .map(|a| a.name())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "representations",
                e.representations
                    .iter()
                    .map(|r| r.name())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("metric", e.metric.name().into()),
            ("seed", e.base_seed.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("squared_exponent", self.squared_exponent.to_string()),
            (
                "iterate_representations",
                self.icc.iterate_representations.name().into(),
            ),
        ];
        match &e.ranks {
            RankSpec::Policy(p) => kv.push((
                "rank_policy",
                match p {
                    RankPolicy::Variance => "variance".into(),
                    RankPolicy::FractionOfN => "fraction".into(),
                },
            )),
            RankSpec::Explicit(r) => kv.push(("ranks", join(r))),
        }
        kv.sort_by_key(|(k, _)| *k);
        let mut out = String::new();
        for (k, v) in kv {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn layout_name(l: Layout) -> &'static str {
    match l {
        Layout::RowsAreObservations => "rows",
        Layout::ColumnsAreObservations => "columns",
    }
}

fn parse_layout(v: &str) -> Result<Layout, String> {
    match v {
        "rows" | "rows-as-observations" => Ok(Layout::RowsAreObservations),
        "columns" | "columns-as-observations" => Ok(Layout::ColumnsAreObservations),
        _ => Err(format!("expected rows or columns, got `{v}`")),
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("expected a number, got `{v}`"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

/// Comma-separated integers and inclusive `a:b` ranges, e.g. `2:4,8`.
/// The result must be strictly increasing.
pub fn parse_ktilde(v: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{s}` is not a nonnegative integer"))
        };
        match part.split_once(':') {
            Some((a, b)) => {
                let (a, b) = (int(a)?, int(b)?);
                if a > b {
                    return Err(format!("range `{part}` is empty"));
                }
                out.extend(a..=b);
            }
            None => out.push(int(part)?),
        }
    }
    if out.is_empty() {
        return Err("no values given".into());
    }
    if out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("values must be strictly increasing, got {out:?}"));
    }
    Ok(out)
}

fn parse_list<T>(v: &str, all: &[T]) -> Result<Vec<T>, String>
where
    T: Copy + PartialEq + std::str::FromStr<Err = icc_core::Error>,
{
    if v.trim() == "all" {
        return Ok(all.to_vec());
    }
    let mut out: Vec<T> = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let item: T = part.parse().map_err(|e: icc_core::Error| e.to_string())?;
        if out.contains(&item) {
            return Err(format!("`{part}` listed twice"));
        }
        out.push(item);
    }
    Ok(out)
}

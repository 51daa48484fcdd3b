use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Hemisphere,
    Halfspace,
}

/// Flags shared by every subcommand. All optional so that a config file can
/// fill what is missing; flags win.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    #[arg(long)]
    pub gamma: Option<f64>,
    /// boundary dimension; defaults to the smallest integer above 2 gamma + 1
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    /// latitude quadrature nodes (sobolev)
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// multiplies every tolerance budget
    #[arg(long)]
    pub tol_scale: Option<f64>,
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryKind>,
    /// directory for `<command>.csv` and `<command>.json`; stdout/stderr otherwise
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// comma-separated mode list (degrees k, or frequencies xi for dtn/appendix);
    /// an empty string gives an empty table
    #[arg(long)]
    pub modes: Option<String>,
    /// plain-text `key = value` file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub gamma: f64,
    pub n: usize,
    pub kmax: Option<usize>,
    pub nodes: usize,
    pub seed: u64,
    pub tol_scale: f64,
    pub geometry: GeometryKind,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub trials: usize,
    pub modes: Option<Vec<f64>>,
}

const KEYS: [&str; 10] = ["gamma", "n", "kmax", "nodes", "seed", "tol_scale", "geometry", "out", "trials", "modes"];

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got `{line}`", i + 1);
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            bail!("config line {}: unknown key `{}`", i + 1, k.trim());
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            bail!("config line {}: duplicate key `{key}`", i + 1);
        }
    }
    Ok(map)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|e| anyhow::anyhow!("config key `{key}` = `{v}`: {e}")),
    }
}

pub fn parse_modes(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad mode `{t}`")))
        .collect()
}

pub fn default_n(gamma: f64) -> usize {
    (2.0 * gamma + 1.0).floor() as usize + 1
}

impl Settings {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let map = match &flags.config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        let gamma = flags.gamma.or(get(&map, "gamma")?).unwrap_or(1.5);
        let geometry = match (flags.geometry, map.get("geometry")) {
            (Some(g), _) => g,
            (None, Some(v)) => GeometryKind::from_str(v, true).map_err(|e| anyhow::anyhow!("config key `geometry`: {e}"))?,
            (None, None) => GeometryKind::Hemisphere,
        };
        let modes = match (&flags.modes, map.get("modes")) {
            (Some(s), _) => Some(parse_modes(s)?),
            (None, Some(s)) => Some(parse_modes(s)?),
            (None, None) => None,
        };
        let s = Settings {
            gamma,
            n: flags.n.or(get(&map, "n")?).unwrap_or_else(|| default_n(gamma)),
            kmax: flags.kmax.or(get(&map, "kmax")?),
            nodes: flags.nodes.or(get(&map, "nodes")?).unwrap_or(256),
            seed: flags.seed.or(get(&map, "seed")?).unwrap_or(0),
            tol_scale: flags.tol_scale.or(get(&map, "tol_scale")?).unwrap_or(1.0),
            geometry,
            out: flags.out.clone().or(get(&map, "out")?),
            trials: flags.trials.or(get(&map, "trials")?).unwrap_or(100),
            modes,
        };
        if !(s.tol_scale > 0.0 && s.tol_scale.is_finite()) {
            bail!("tol_scale must be positive, got {}", s.tol_scale);
        }
        Ok(s)
    }

    /// Explicit mode list, or `0..=kmax` degrees.
    pub fn degrees(&self, kmax_default: usize) -> Result<Vec<usize>> {
        match &self.modes {
            None => Ok((0..=self.kmax.unwrap_or(kmax_default)).collect()),
            Some(v) => v
                .iter()
                .map(|&x| {
                    if x >= 0.0 && x.fract() == 0.0 {
                        Ok(x as usize)
                    } else {
                        bail!("mode degree must be a nonnegative integer, got {x}")
                    }
                })
                .collect(),
        }
    }

    /// Explicit frequency list, or dyadic `2^-3 ..= 2^3`.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        match &self.modes {
            None => Ok((-3..=3).map(|j| 2f64.powi(j)).collect()),
            Some(v) => {
                if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                    bail!("frequency must be positive, got {x}");
                }
                Ok(v.clone())
            }
        }
    }
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_kv(&text).with_context(|| format!("in {}", path.display()))
}

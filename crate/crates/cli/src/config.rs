//! Run configuration: command-line flags merged over an optional `key=value` file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use quakescore::calibration::{DEFAULT_LEVEL, DEFAULT_REPLICATES};
use quakescore::inference::DEFAULT_LAG;
use quakescore::synth::DEFAULT_NULL_REPLICATES;
use quakescore::ScoringFunction;

use crate::Usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Score,
    Murphy,
    Dmtest,
    Ttest,
    Reliability,
    Decompose,
    Simulate,
    SpatialDiff,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Score => "score",
            Command::Murphy => "murphy",
            Command::Dmtest => "dmtest",
            Command::Ttest => "ttest",
            Command::Reliability => "reliability",
            Command::Decompose => "decompose",
            Command::Simulate => "simulate",
            Command::SpatialDiff => "spatial-diff",
        }
    }
}

/// Flags shared by every command. Every flag can also be set in the config file
/// under its long name; flags given on the command line win.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Forecast panel CSV (repeatable).
    #[arg(long = "forecast", value_name = "PATH")]
    pub forecasts: Vec<PathBuf>,
    /// Observation panel CSV.
    #[arg(long, value_name = "PATH", conflicts_with = "catalog")]
    pub obs: Option<PathBuf>,
    /// Event catalog CSV, binned onto the grid and the forecast period.
    #[arg(long, value_name = "PATH")]
    pub catalog: Option<PathBuf>,
    /// Grid CSV; required with --catalog.
    #[arg(long, value_name = "PATH")]
    pub grid: Option<PathBuf>,
    /// Minimum magnitude of binned catalog events.
    #[arg(long, value_name = "X", allow_negative_numbers = true)]
    pub mag_threshold: Option<f64>,
    /// Scoring function: poisson, quadratic, patton:B or elementary:THETA.
    #[arg(long, value_name = "ID")]
    pub score: Option<String>,
    /// Autocovariance lag of the DM variance (default 6, or 0 with --weekday-only).
    #[arg(long, value_name = "L")]
    pub lag: Option<usize>,
    /// Consistency band level.
    #[arg(long, value_name = "P")]
    pub level: Option<f64>,
    /// Band replicates (default 1000) or null replicates for simulate (default 400).
    #[arg(long, value_name = "R")]
    pub replicates: Option<usize>,
    /// Random seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Keep only one weekday (mon..sun or 0..6, Monday = 0).
    #[arg(long, value_name = "DAY")]
    pub weekday_only: Option<String>,
    /// Use spatially aggregated (number) pairs.
    #[arg(long)]
    pub aggregated: bool,
    /// Also render SVG figures.
    #[arg(long)]
    pub emit_svg: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// key=value configuration file mirroring the flags.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObsSource {
    Panel(PathBuf),
    Catalog { catalog: PathBuf, threshold: f64 },
    None,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub forecasts: Vec<PathBuf>,
    pub obs: ObsSource,
    pub grid: Option<PathBuf>,
    pub score: ScoringFunction,
    pub lag: usize,
    pub level: f64,
    pub replicates: usize,
    pub seed: u64,
    pub weekday: Option<u32>,
    pub aggregated: bool,
    pub emit_svg: bool,
    pub out: PathBuf,
}

const KEYS: &[&str] = &[
    "forecast",
    "obs",
    "catalog",
    "grid",
    "mag-threshold",
    "score",
    "lag",
    "level",
    "replicates",
    "seed",
    "weekday-only",
    "aggregated",
    "emit-svg",
    "out",
];

/// Parses `key=value` lines. `#` starts a comment; `forecast` may repeat.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, Vec<String>>, Usage> {
    let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Usage(format!("{}:{}: unknown key '{key}'", path.display(), i + 1)));
        }
        let mut value = value.trim().to_string();
        // relative paths in the file are relative to the file itself
        if matches!(key.as_str(), "forecast" | "obs" | "catalog" | "grid" | "out") && Path::new(&value).is_relative() {
            value = base.join(&value).to_string_lossy().into_owned();
        }
        map.entry(key).or_default().push(value);
    }
    Ok(map)
}

fn single<'a>(file: &'a BTreeMap<String, Vec<String>>, key: &str) -> Result<Option<&'a str>, Usage> {
    match file.get(key).map(Vec::as_slice) {
        None => Ok(None),
        Some([v]) => Ok(Some(v.as_str())),
        Some(_) => Err(Usage(format!("config key '{key}' given more than once"))),
    }
}

fn pick<T: std::str::FromStr>(
    flag: Option<T>,
    file: &BTreeMap<String, Vec<String>>,
    key: &str,
) -> Result<Option<T>, Usage>
where
    T::Err: std::fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    single(file, key)?
        .map(|v| v.parse::<T>().map_err(|e| Usage(format!("config key '{key}': {e}"))))
        .transpose()
}

fn pick_bool(flag: bool, file: &BTreeMap<String, Vec<String>>, key: &str) -> Result<bool, Usage> {
    if flag {
        return Ok(true);
    }
    match single(file, key)? {
        None => Ok(false),
        Some(v) => match v.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(Usage(format!("config key '{key}': expected true or false, got '{v}'"))),
        },
    }
}

pub fn parse_weekday(s: &str) -> Result<u32, Usage> {
    let s = s.trim().to_ascii_lowercase();
    if let Ok(n) = s.parse::<u32>() {
        return if n < 7 {
            Ok(n)
        } else {
            Err(Usage(format!("weekday index {n} is not in 0..6")))
        };
    }
    const NAMES: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
    NAMES
        .iter()
        .position(|n| s.starts_with(n))
        .map(|i| i as u32)
        .ok_or_else(|| Usage(format!("unknown weekday '{s}'")))
}

impl RunConfig {
    pub fn resolve(command: Command, args: RunArgs) -> Result<Self, Usage> {
        let file = match &args.config {
            Some(p) => parse_config_file(p)?,
            None => BTreeMap::new(),
        };
        let forecasts = if args.forecasts.is_empty() {
            file.get("forecast")
                .map(|v| v.iter().map(PathBuf::from).collect())
                .unwrap_or_default()
        } else {
            args.forecasts
        };
        let obs_path: Option<PathBuf> = pick(args.obs, &file, "obs")?;
        let catalog: Option<PathBuf> = pick(args.catalog, &file, "catalog")?;
        let grid: Option<PathBuf> = pick(args.grid, &file, "grid")?;
        let threshold: Option<f64> = pick(args.mag_threshold, &file, "mag-threshold")?;
        let obs = match (obs_path, catalog) {
            (Some(_), Some(_)) => return Err(Usage("give either --obs or --catalog, not both".into())),
            (Some(p), None) => ObsSource::Panel(p),
            (None, Some(c)) => {
                if grid.is_none() {
                    return Err(Usage("--catalog needs --grid".into()));
                }
                let threshold = threshold.ok_or_else(|| Usage("--catalog needs --mag-threshold".into()))?;
                if !threshold.is_finite() {
                    return Err(Usage(format!("magnitude threshold {threshold} is not finite")));
                }
                ObsSource::Catalog { catalog: c, threshold }
            }
            (None, None) => ObsSource::None,
        };
        let score = match pick::<String>(args.score, &file, "score")? {
            Some(s) => s.parse::<ScoringFunction>().map_err(|e| Usage(e.to_string()))?,
            None => ScoringFunction::Poisson,
        };
        let weekday = pick::<String>(args.weekday_only, &file, "weekday-only")?
            .map(|s| parse_weekday(&s))
            .transpose()?;
        let lag = pick(args.lag, &file, "lag")?.unwrap_or(if weekday.is_some() { 0 } else { DEFAULT_LAG });
        let level = pick(args.level, &file, "level")?.unwrap_or(DEFAULT_LEVEL);
        if !(level > 0.0 && level < 1.0) {
            return Err(Usage(format!("--level must lie in (0, 1), got {level}")));
        }
        let default_replicates = if command == Command::Simulate {
            DEFAULT_NULL_REPLICATES
        } else {
            DEFAULT_REPLICATES
        };
        let replicates = pick(args.replicates, &file, "replicates")?.unwrap_or(default_replicates);
        if replicates == 0 {
            return Err(Usage("--replicates must be at least 1".into()));
        }
        let config = RunConfig {
            command,
            forecasts,
            obs,
            grid,
            score,
            lag,
            level,
            replicates,
            seed: pick(args.seed, &file, "seed")?.unwrap_or(0),
            weekday,
            aggregated: pick_bool(args.aggregated, &file, "aggregated")?,
            emit_svg: pick_bool(args.emit_svg, &file, "emit-svg")?,
            out: pick(args.out, &file, "out")?.unwrap_or_else(|| PathBuf::from(".")),
        };
        config.check_files()?;
        Ok(config)
    }

    fn check_files(&self) -> Result<(), Usage> {
        let mut paths: Vec<&Path> = self.forecasts.iter().map(PathBuf::as_path).collect();
        match &self.obs {
            ObsSource::Panel(p) => paths.push(p),
            ObsSource::Catalog { catalog, .. } => paths.push(catalog),
            ObsSource::None => {}
        }
        paths.extend(self.grid.as_deref());
        match paths.into_iter().find(|p| !p.is_file()) {
            Some(p) => Err(Usage(format!("{}: no such file", p.display()))),
            None => Ok(()),
        }
    }

    /// Effective configuration in the same `key=value` format the config file accepts.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# command={}", self.command.name());
        for f in &self.forecasts {
            let _ = writeln!(s, "forecast={}", f.display());
        }
        match &self.obs {
            ObsSource::Panel(p) => {
                let _ = writeln!(s, "obs={}", p.display());
            }
            ObsSource::Catalog { catalog, threshold } => {
                let _ = writeln!(s, "catalog={}", catalog.display());
                let _ = writeln!(s, "mag-threshold={threshold}");
            }
            ObsSource::None => {}
        }
        if let Some(g) = &self.grid {
            let _ = writeln!(s, "grid={}", g.display());
        }
        let _ = writeln!(s, "score={}", self.score);
        let _ = writeln!(s, "lag={}", self.lag);
        let _ = writeln!(s, "level={}", self.level);
        let _ = writeln!(s, "replicates={}", self.replicates);
        let _ = writeln!(s, "seed={}", self.seed);
        if let Some(w) = self.weekday {
            let _ = writeln!(s, "weekday-only={w}");
        }
        let _ = writeln!(s, "aggregated={}", self.aggregated);
        let _ = writeln!(s, "emit-svg={}", self.emit_svg);
        let _ = writeln!(s, "out={}", self.out.display());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weekday_names_and_indices() {
        assert_eq!(parse_weekday("Monday").unwrap(), 0);
        assert_eq!(parse_weekday("sun").unwrap(), 6);
        assert_eq!(parse_weekday("3").unwrap(), 3);
        assert!(parse_weekday("7").is_err());
        assert!(parse_weekday("someday").is_err());
    }

    #[test]
    fn flags_override_file_and_defaults_follow_command() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "# comment\nlag = 3\nseed=9\nscore=patton:1.5\naggregated=true\n").unwrap();
        let args = RunArgs {
            config: Some(cfg.clone()),
            seed: Some(1),
            ..RunArgs::default()
        };
        let c = RunConfig::resolve(Command::Simulate, args).unwrap();
        assert_eq!((c.lag, c.seed, c.replicates), (3, 1, DEFAULT_NULL_REPLICATES));
        assert_eq!(c.score, ScoringFunction::Patton { b: 1.5 });
        assert!(c.aggregated);

        let c = RunConfig::resolve(Command::Reliability, RunArgs::default()).unwrap();
        assert_eq!(
            (c.lag, c.replicates, c.level),
            (DEFAULT_LAG, DEFAULT_REPLICATES, DEFAULT_LEVEL)
        );

        let weekly = RunArgs {
            weekday_only: Some("mon".into()),
            ..RunArgs::default()
        };
        assert_eq!(RunConfig::resolve(Command::Dmtest, weekly).unwrap().lag, 0);
    }

    #[test]
    fn echo_round_trips_through_the_file_parser() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.csv");
        std::fs::write(&f, "").unwrap();
        let args = RunArgs {
            forecasts: vec![f.clone(), f.clone()],
            level: Some(0.8),
            out: Some(dir.path().join("out")),
            ..RunArgs::default()
        };
        let c = RunConfig::resolve(Command::Score, args).unwrap();
        let cfg = dir.path().join("echo.cfg");
        std::fs::write(&cfg, c.echo()).unwrap();
        let again = RunConfig::resolve(
            Command::Score,
            RunArgs {
                config: Some(cfg),
                ..RunArgs::default()
            },
        )
        .unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn bad_settings_are_usage_errors() {
        let missing = RunArgs {
            forecasts: vec!["/nonexistent/f.csv".into()],
            ..RunArgs::default()
        };
        assert!(RunConfig::resolve(Command::Score, missing).is_err());
        let level = RunArgs {
            level: Some(1.5),
            ..RunArgs::default()
        };
        assert!(RunConfig::resolve(Command::Reliability, level).is_err());
        let catalog = RunArgs {
            catalog: Some("c.csv".into()),
            ..RunArgs::default()
        };
        assert!(RunConfig::resolve(Command::Score, catalog).is_err());
    }
}

use anyhow::{Context, Result};
use chrono::NaiveDate;
use quakescore::inference::weekday_indices;
use quakescore::io::{self, BinningReport};
use quakescore::{Error, ForecastPanel, GridSpec, ObservationPanel, TimeIndex};

use crate::config::{ObsSource, RunConfig};
use crate::Usage;

/// Panels of one run, already restricted to the selected weekday.
pub struct Inputs {
    pub grid: GridSpec,
    pub time: TimeIndex,
    /// Original day indices kept in the panels.
    pub days: Vec<usize>,
    pub forecasts: Vec<ForecastPanel>,
    pub obs: ObservationPanel,
    pub binning: Option<BinningReport>,
}

impl Inputs {
    pub fn date(&self, i: usize) -> NaiveDate {
        self.time.date(self.days[i])
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.forecasts.iter().map(|f| f.model_id().to_string()).collect()
    }
}

pub fn load(config: &RunConfig, min_forecasts: usize) -> Result<Inputs> {
    if config.forecasts.len() < min_forecasts {
        return Err(Usage(format!(
            "{} needs at least {min_forecasts} --forecast panel(s), got {}",
            config.command.name(),
            config.forecasts.len()
        ))
        .into());
    }
    let grid = match &config.grid {
        Some(p) => io::load_grid(p)?,
        None => io::grid_from_panel(&config.forecasts[0])?,
    };
    let mut forecasts = Vec::with_capacity(config.forecasts.len());
    let mut time: Option<TimeIndex> = None;
    for path in &config.forecasts {
        let (panel, header) = io::load_forecast(path, &grid)?;
        let t = header.time_index()?;
        match time {
            None => time = Some(t),
            Some(first) if first != t => {
                return Err(Error::DimensionMismatch(format!(
                    "{} covers {} days from {} (window {}), unlike the first forecast",
                    path.display(),
                    t.days(),
                    t.origin(),
                    t.window_length()
                ))
                .into())
            }
            Some(_) => {}
        }
        forecasts.push(panel);
    }
    let time = time.expect("at least one forecast");
    let (obs, binning) = match &config.obs {
        ObsSource::Panel(p) => {
            let (obs, header) = io::load_observations(p, &grid)?;
            if header.time_index()? != time {
                return Err(Error::DimensionMismatch(format!(
                    "{} does not cover the forecast period ({} days from {})",
                    p.display(),
                    time.days(),
                    time.origin()
                ))
                .into());
            }
            (obs, None)
        }
        ObsSource::Catalog { catalog, threshold } => {
            let cat = io::load_catalog(catalog)?;
            let report = io::bin_catalog(&cat, &grid, &time, *threshold)
                .with_context(|| format!("binning {}", catalog.display()))?;
            (report.observations.clone(), Some(report))
        }
        ObsSource::None => return Err(Usage(format!("{} needs --obs or --catalog", config.command.name())).into()),
    };
    let days = match config.weekday {
        Some(w) => weekday_indices(&time, w)?,
        None => (0..time.days()).collect(),
    };
    let (forecasts, obs) = if config.weekday.is_some() {
        (
            forecasts.iter().map(|f| f.select_days(&days)).collect(),
            obs.select_days(&days),
        )
    } else {
        (forecasts, obs)
    };
    Ok(Inputs {
        grid,
        time,
        days,
        forecasts,
        obs,
        binning,
    })
}

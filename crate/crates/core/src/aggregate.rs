//! Spatial and temporal aggregation of pointwise scores.
//!
//! Daily scores are spatial *sums* over cells; the total score is the mean of
//! the daily scores over days. Every spatial sum is compensated and computed
//! sequentially within a day, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ensure_same_dims, ForecastPanel, ObservationPanel};
use crate::numeric::{compensated_mean, compensated_sum, CompensatedSum};
use crate::scoring::ScoringFunction;

/// Spatially aggregated daily scores of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyScoreSeries {
    model_id: String,
    values: Vec<f64>,
}

impl DailyScoreSeries {
    pub fn new(model_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("daily score series is empty"));
        }
        Ok(Self {
            model_id: model_id.into(),
            values,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mean of the daily scores over days.
    pub fn total_score(&self) -> f64 {
        total_score(self)
    }

    pub fn select_days(&self, days: &[usize]) -> Self {
        Self {
            model_id: self.model_id.clone(),
            values: days.iter().map(|&t| self.values[t]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub model_id: String,
    pub total_score: f64,
    pub number_score: f64,
    pub per_cell_mean: Vec<f64>,
}

pub fn daily_scores(
    forecast: &ForecastPanel,
    obs: &ObservationPanel,
    scoring: ScoringFunction,
) -> Result<DailyScoreSeries> {
    ensure_same_dims(forecast, obs)?;
    let values = (0..forecast.days())
        .into_par_iter()
        .map(|t| {
            compensated_sum(
                forecast
                    .day(t)
                    .iter()
                    .zip(obs.day(t))
                    .map(|(&x, &y)| scoring.score(x, y)),
            )
        })
        .collect();
    DailyScoreSeries::new(forecast.model_id(), values)
}

pub fn total_score(series: &DailyScoreSeries) -> f64 {
    compensated_mean(series.values())
}

/// Spatial totals `(sum_c x[c, t], sum_c y[c, t])` for each day.
pub fn aggregated_pairs(forecast: &ForecastPanel, obs: &ObservationPanel) -> Result<(Vec<f64>, Vec<u64>)> {
    ensure_same_dims(forecast, obs)?;
    let x = (0..forecast.days())
        .map(|t| compensated_sum(forecast.day(t).iter().copied()))
        .collect();
    let y = (0..obs.days()).map(|t| obs.day_total(t)).collect();
    Ok((x, y))
}

/// Daily scores of the spatially aggregated forecast against the aggregated count.
pub fn number_score_series(
    forecast: &ForecastPanel,
    obs: &ObservationPanel,
    scoring: ScoringFunction,
) -> Result<DailyScoreSeries> {
    let (x, y) = aggregated_pairs(forecast, obs)?;
    let values = x.iter().zip(&y).map(|(&x, &y)| scoring.score_total(x, y)).collect();
    DailyScoreSeries::new(forecast.model_id(), values)
}

pub fn number_score(forecast: &ForecastPanel, obs: &ObservationPanel, scoring: ScoringFunction) -> Result<f64> {
    Ok(number_score_series(forecast, obs, scoring)?.total_score())
}

/// Mean score over days for every cell.
pub fn per_cell_mean_scores(
    forecast: &ForecastPanel,
    obs: &ObservationPanel,
    scoring: ScoringFunction,
) -> Result<Vec<f64>> {
    ensure_same_dims(forecast, obs)?;
    let mut acc = vec![CompensatedSum::new(); forecast.cells()];
    for t in 0..forecast.days() {
        for ((a, &x), &y) in acc.iter_mut().zip(forecast.day(t)).zip(obs.day(t)) {
            a.add(scoring.score(x, y));
        }
    }
    let days = forecast.days() as f64;
    Ok(acc.iter().map(|a| a.value() / days).collect())
}

pub fn summarize(forecast: &ForecastPanel, obs: &ObservationPanel, scoring: ScoringFunction) -> Result<ScoreSummary> {
    Ok(ScoreSummary {
        model_id: forecast.model_id().to_string(),
        total_score: daily_scores(forecast, obs, scoring)?.total_score(),
        number_score: number_score(forecast, obs, scoring)?,
        per_cell_mean: per_cell_mean_scores(forecast, obs, scoring)?,
    })
}

/// `d_t = a_t - b_t`. Infinite daily scores make the difference undefined.
pub fn daily_difference(a: &DailyScoreSeries, b: &DailyScoreSeries) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::dims(format!(
            "series '{}' has {} days but '{}' has {}",
            a.model_id(),
            a.len(),
            b.model_id(),
            b.len()
        )));
    }
    for s in [a, b] {
        if let Some(t) = s.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "daily score of '{}' on day {t} is {}",
                s.model_id(),
                s.values()[t]
            )));
        }
    }
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeDifference {
    /// `D_t`, running sum of daily differences.
    pub cumulative: Vec<f64>,
    /// `D_t / N_t`; `None` while no event has been observed.
    pub normalized: Vec<Option<f64>>,
    /// `N_t`, running count of observed events.
    pub event_counts: Vec<u64>,
}

pub fn cumulative_difference(d: &[f64], obs: &ObservationPanel) -> Result<CumulativeDifference> {
    if d.len() != obs.days() {
        return Err(Error::dims(format!(
            "{} daily differences but {} observation days",
            d.len(),
            obs.days()
        )));
    }
    let mut acc = CompensatedSum::new();
    let mut n = 0u64;
    let mut out = CumulativeDifference {
        cumulative: Vec::with_capacity(d.len()),
        normalized: Vec::with_capacity(d.len()),
        event_counts: Vec::with_capacity(d.len()),
    };
    for (t, &dt) in d.iter().enumerate() {
        acc.add(dt);
        n += obs.day_total(t);
        let dsum = acc.value();
        out.cumulative.push(dsum);
        out.normalized.push((n > 0).then(|| dsum / n as f64));
        out.event_counts.push(n);
    }
    Ok(out)
}

/// Per-cell mean score difference `(1/T) sum_t (S(a) - S(b))`; `None` marks
/// cells where an infinite score makes the difference undefined.
pub fn spatial_difference_map(
    fa: &ForecastPanel,
    fb: &ForecastPanel,
    obs: &ObservationPanel,
    scoring: ScoringFunction,
) -> Result<Vec<Option<f64>>> {
    ensure_same_dims(fa, obs)?;
    ensure_same_dims(fb, obs)?;
    let mut acc = vec![CompensatedSum::new(); obs.cells()];
    let mut undefined = vec![false; obs.cells()];
    for t in 0..obs.days() {
        let rows = fa.day(t).iter().zip(fb.day(t)).zip(obs.day(t));
        for (c, ((&xa, &xb), &y)) in rows.enumerate() {
            let (sa, sb) = (scoring.score(xa, y), scoring.score(xb, y));
            if sa.is_finite() && sb.is_finite() {
                acc[c].add(sa - sb);
            } else {
                undefined[c] = true;
            }
        }
    }
    let days = obs.days() as f64;
    Ok(acc
        .iter()
        .zip(&undefined)
        .map(|(a, &u)| (!u).then(|| a.value() / days))
        .collect())
}

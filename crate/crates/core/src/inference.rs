//! Pairwise comparative tests: Diebold-Mariano, information gain and the
//! CSEP T-test.
//!
//! Orientation throughout: a positive statistic means model `j` has the
//! higher (worse) score, and the one-sided p-value is small when `k` is
//! significantly better than `j`.

use chrono::Datelike;
use rayon::prelude::*;

use crate::aggregate::{daily_difference, DailyScoreSeries};
use crate::error::{Error, Result};
use crate::model::{ensure_same_dims, ForecastPanel, ObservationPanel, TimeIndex};
use crate::numeric::{compensated_mean, normal_sf, student_t_sf, CompensatedSum};

/// Lag window used for overlapping seven-day forecast windows.
pub const DEFAULT_LAG: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    DieboldMariano,
    CsepT,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub kind: TestKind,
    pub model_j: String,
    pub model_k: String,
    pub statistic: f64,
    /// `sigma^2` for the DM test, `s^2` for the T-test.
    pub variance_estimate: f64,
    /// Lag `L` for the DM test, degrees of freedom for the T-test.
    pub lag_or_dof: usize,
    /// One-sided p-value, `1 - F(statistic)`.
    pub p_value: f64,
}

impl TestResult {
    pub fn two_sided_p(&self) -> f64 {
        (2.0 * self.p_value.min(1.0 - self.p_value)).min(1.0)
    }
}

/// Sample autocovariance of `d` at `lag`, about the mean and normalized by `1/T`.
pub fn autocovariance(d: &[f64], mean: f64, lag: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    for t in lag..d.len() {
        acc.add((d[t] - mean) * (d[t - lag] - mean));
    }
    acc.value() / d.len() as f64
}

/// Diebold-Mariano test on two daily score series.
pub fn dm_test(series_j: &DailyScoreSeries, series_k: &DailyScoreSeries, lag: usize) -> Result<TestResult> {
    let d = daily_difference(series_j, series_k)?;
    let t = d.len();
    if lag >= t {
        return Err(Error::invalid(format!(
            "lag {lag} must be smaller than the series length {t}"
        )));
    }
    if d.iter().all(|&v| v == d[0]) {
        return Err(Error::ZeroVariance(format!(
            "daily score differences of '{}' and '{}' are constant",
            series_j.model_id(),
            series_k.model_id()
        )));
    }
    let mean = compensated_mean(&d);
    let mut var = CompensatedSum::new();
    var.add(autocovariance(&d, mean, 0));
    for l in 1..=lag {
        var.add(2.0 * autocovariance(&d, mean, l));
    }
    let var = var.value();
    if var.is_nan() || var <= 0.0 {
        return Err(Error::NonpositiveVariance { value: var, lag });
    }
    let z = (t as f64).sqrt() * mean / var.sqrt();
    Ok(TestResult {
        kind: TestKind::DieboldMariano,
        model_j: series_j.model_id().to_string(),
        model_k: series_k.model_id().to_string(),
        statistic: z,
        variance_estimate: var,
        lag_or_dof: lag,
        p_value: normal_sf(z),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationGain {
    /// `T (S̄_j - S̄_k)` under the Poisson score.
    pub ig: f64,
    /// `IG / N_T`.
    pub igpe: f64,
    pub n_events: u64,
}

/// Information gain and information gain per earthquake from Poisson daily
/// score series.
pub fn information_gain(
    series_j: &DailyScoreSeries,
    series_k: &DailyScoreSeries,
    obs: &ObservationPanel,
) -> Result<InformationGain> {
    let d = daily_difference(series_j, series_k)?;
    if d.len() != obs.days() {
        return Err(Error::dims(format!(
            "{} score days but {} observation days",
            d.len(),
            obs.days()
        )));
    }
    let n_events = obs.total();
    if n_events == 0 {
        return Err(Error::NoEvents(
            "information gain per earthquake needs at least one event".into(),
        ));
    }
    let ig = d.iter().copied().fold(CompensatedSum::new(), |mut a, v| {
        a.add(v);
        a
    });
    let ig = ig.value();
    Ok(InformationGain {
        ig,
        igpe: ig / n_events as f64,
        n_events,
    })
}

/// CSEP T-test of `fa` (model `j`) against `fb` (model `k`).
pub fn csep_t_test(fa: &ForecastPanel, fb: &ForecastPanel, obs: &ObservationPanel) -> Result<TestResult> {
    ensure_same_dims(fa, obs)?;
    ensure_same_dims(fb, obs)?;
    let n = obs.total();
    if n < 2 {
        return Err(Error::NoEvents(format!(
            "the T-test needs at least two events, found {n}"
        )));
    }
    let mut ig = CompensatedSum::new();
    let mut s1 = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for t in 0..obs.days() {
        for c in 0..obs.cells() {
            let (xj, xk, y) = (fa.get(c, t), fb.get(c, t), obs.get(c, t));
            ig.add(xj - xk);
            if y == 0 {
                continue;
            }
            if xj <= 0.0 || xk <= 0.0 {
                return Err(Error::NonFinite(format!(
                    "zero forecast at cell {c}, day {t} where {y} event(s) occurred; the log ratio is undefined"
                )));
            }
            let delta = xj.ln() - xk.ln();
            let yf = y as f64;
            ig.add(-yf * delta);
            s1.add(yf * delta);
            s2.add(yf * delta * delta);
        }
    }
    let nf = n as f64;
    let s1 = s1.value();
    let var = s2.value() / (nf - 1.0) - s1 * s1 / (nf * (nf - 1.0));
    if var.is_nan() || var <= 0.0 {
        return Err(Error::ZeroVariance(format!(
            "log forecast ratios of '{}' and '{}' do not vary across events",
            fa.model_id(),
            fb.model_id()
        )));
    }
    let igpe = ig.value() / nf;
    let theta = nf.sqrt() * igpe / var.sqrt();
    let dof = (n - 1) as usize;
    Ok(TestResult {
        kind: TestKind::CsepT,
        model_j: fa.model_id().to_string(),
        model_k: fb.model_id().to_string(),
        statistic: theta,
        variance_estimate: var,
        lag_or_dof: dof,
        p_value: student_t_sf(theta, dof as f64),
    })
}

/// Day indices whose date falls on `weekday` (0 = Monday, ..., 6 = Sunday).
pub fn weekday_indices(time: &TimeIndex, weekday: u32) -> Result<Vec<usize>> {
    if weekday > 6 {
        return Err(Error::invalid(format!(
            "weekday must be in 0..=6 (0 = Monday), got {weekday}"
        )));
    }
    let days: Vec<usize> = (0..time.days())
        .filter(|&t| time.date(t).weekday().num_days_from_monday() == weekday)
        .collect();
    if days.is_empty() {
        return Err(Error::invalid(format!(
            "no day in the period falls on weekday {weekday}"
        )));
    }
    Ok(days)
}

pub fn subsample_series(series: &DailyScoreSeries, time: &TimeIndex, weekday: u32) -> Result<DailyScoreSeries> {
    check_len(series.len(), time)?;
    Ok(series.select_days(&weekday_indices(time, weekday)?))
}

pub fn subsample_forecast(panel: &ForecastPanel, time: &TimeIndex, weekday: u32) -> Result<ForecastPanel> {
    check_len(panel.days(), time)?;
    Ok(panel.select_days(&weekday_indices(time, weekday)?))
}

pub fn subsample_observations(obs: &ObservationPanel, time: &TimeIndex, weekday: u32) -> Result<ObservationPanel> {
    check_len(obs.days(), time)?;
    Ok(obs.select_days(&weekday_indices(time, weekday)?))
}

fn check_len(days: usize, time: &TimeIndex) -> Result<()> {
    if days != time.days() {
        return Err(Error::dims(format!(
            "{days} days of data but the time index has {}",
            time.days()
        )));
    }
    Ok(())
}

/// Outcome of one ordered pair in an all-pairs comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub j: usize,
    pub k: usize,
    pub result: std::result::Result<TestResult, String>,
}

/// DM tests for every ordered pair `j != k`.
pub fn pairwise_dm(series: &[DailyScoreSeries], lag: usize) -> Vec<PairOutcome> {
    ordered_pairs(series.len())
        .into_par_iter()
        .map(|(j, k)| PairOutcome {
            j,
            k,
            result: dm_test(&series[j], &series[k], lag).map_err(|e| e.to_string()),
        })
        .collect()
}

/// T-tests for every ordered pair `j != k`.
pub fn pairwise_t(forecasts: &[ForecastPanel], obs: &ObservationPanel) -> Vec<PairOutcome> {
    ordered_pairs(forecasts.len())
        .into_par_iter()
        .map(|(j, k)| PairOutcome {
            j,
            k,
            result: csep_t_test(&forecasts[j], &forecasts[k], obs).map_err(|e| e.to_string()),
        })
        .collect()
}

fn ordered_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|j| (0..m).filter(move |&k| k != j).map(move |k| (j, k)))
        .collect()
}

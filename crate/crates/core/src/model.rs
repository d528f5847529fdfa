//! Domain types shared by every module.
//!
//! Panels are dense `C x T` matrices stored day-major: the `C` values of day `t`
//! occupy the contiguous range `t * C .. (t + 1) * C`. All types are immutable
//! once constructed; constructors validate their invariants.

use std::collections::HashMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Axis-aligned cell geometry in degrees. Containment is half-open:
/// `[lon_min, lon_max) x [lat_min, lat_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBox {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl CellBox {
    pub fn new(lon_min: f64, lon_max: f64, lat_min: f64, lat_max: f64) -> Result<Self> {
        let all_finite = [lon_min, lon_max, lat_min, lat_max].iter().all(|v| v.is_finite());
        if !all_finite || lon_min >= lon_max || lat_min >= lat_max {
            return Err(Error::invalid(format!(
                "degenerate cell box lon [{lon_min}, {lon_max}) lat [{lat_min}, {lat_max})"
            )));
        }
        Ok(Self {
            lon_min,
            lon_max,
            lat_min,
            lat_max,
        })
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        self.lon_min <= lon && lon < self.lon_max && self.lat_min <= lat && lat < self.lat_max
    }

    /// Two boxes overlap when their intersection has positive area; shared edges are fine.
    pub fn overlaps(&self, other: &CellBox) -> bool {
        self.lon_min < other.lon_max
            && other.lon_min < self.lon_max
            && self.lat_min < other.lat_max
            && other.lat_min < self.lat_max
    }
}

/// The spatial partition of the testing region.
#[derive(Debug, Clone)]
pub struct GridSpec {
    cell_ids: Vec<String>,
    geometry: Option<Vec<CellBox>>,
    index: HashMap<String, usize>,
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.cell_ids == other.cell_ids && self.geometry == other.geometry
    }
}

impl GridSpec {
    pub fn new(cell_ids: Vec<String>) -> Result<Self> {
        if cell_ids.is_empty() {
            return Err(Error::invalid("grid has no cells"));
        }
        let mut index = HashMap::with_capacity(cell_ids.len());
        for (i, id) in cell_ids.iter().enumerate() {
            if id.is_empty() {
                return Err(Error::invalid(format!("cell {i} has an empty identifier")));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate cell identifier '{id}'")));
            }
        }
        Ok(Self {
            cell_ids,
            geometry: None,
            index,
        })
    }

    /// Builds a grid with geometry. Overlapping boxes are rejected since an
    /// event must bin into at most one cell.
    pub fn with_geometry(cell_ids: Vec<String>, boxes: Vec<CellBox>) -> Result<Self> {
        if boxes.len() != cell_ids.len() {
            return Err(Error::dims(format!(
                "{} cell ids but {} cell boxes",
                cell_ids.len(),
                boxes.len()
            )));
        }
        let mut grid = Self::new(cell_ids)?;
        if let Some((a, b)) = find_overlap(&boxes) {
            return Err(Error::invalid(format!(
                "cells '{}' and '{}' overlap",
                grid.cell_ids[a], grid.cell_ids[b]
            )));
        }
        grid.geometry = Some(boxes);
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.cell_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_ids.is_empty()
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    pub fn geometry(&self) -> Option<&[CellBox]> {
        self.geometry.as_deref()
    }

    pub fn index_of(&self, cell_id: &str) -> Option<usize> {
        self.index.get(cell_id).copied()
    }

    /// Hex SHA-256 over the ordered cell identifiers, used to tie panel files to a grid.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for id in &self.cell_ids {
            hasher.update(id.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

// Sweep over boxes sorted by lon_min; only boxes whose lon ranges intersect are compared.
fn find_overlap(boxes: &[CellBox]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[a].lon_min.total_cmp(&boxes[b].lon_min));
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if boxes[b].lon_min >= boxes[a].lon_max {
                break;
            }
            if boxes[a].overlaps(&boxes[b]) {
                return Some((a.min(b), a.max(b)));
            }
        }
    }
    None
}

/// Daily time axis. Day `t` is `origin + t` and its observation window covers
/// days `[t, t + window_length)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeIndex {
    origin: NaiveDate,
    days: usize,
    window_length: u32,
}

impl TimeIndex {
    pub fn new(origin: NaiveDate, days: usize, window_length: u32) -> Result<Self> {
        if days == 0 {
            return Err(Error::invalid("time index needs at least one day"));
        }
        if window_length == 0 {
            return Err(Error::invalid("window length must be at least one day"));
        }
        Ok(Self {
            origin,
            days,
            window_length,
        })
    }

    pub fn origin(&self) -> NaiveDate {
        self.origin
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn window_length(&self) -> u32 {
        self.window_length
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.origin + Duration::days(t as i64)
    }

    /// Signed day offset of `date` from the origin.
    pub fn offset_of(&self, date: NaiveDate) -> i64 {
        (date - self.origin).num_days()
    }
}

fn check_len(what: &str, cells: usize, days: usize, len: usize) -> Result<()> {
    if cells == 0 || days == 0 {
        return Err(Error::invalid(format!(
            "{what} must have at least one cell and one day"
        )));
    }
    if cells.checked_mul(days) != Some(len) {
        return Err(Error::dims(format!(
            "{what} declares {cells} cells x {days} days but holds {len} values"
        )));
    }
    Ok(())
}

/// A model's expected counts `x[c, t]`, nonnegative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPanel {
    model_id: String,
    cells: usize,
    days: usize,
    values: Vec<f64>,
}

impl ForecastPanel {
    /// `values` is day-major: index `t * cells + c`.
    pub fn new(model_id: impl Into<String>, cells: usize, days: usize, values: Vec<f64>) -> Result<Self> {
        let model_id = model_id.into();
        check_len("forecast panel", cells, days, values.len())?;
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!(
                "forecast '{model_id}' has invalid value {} at cell {} day {}",
                values[i],
                i % cells,
                i / cells
            )));
        }
        Ok(Self {
            model_id,
            cells,
            days,
            values,
        })
    }

    pub fn from_fn(
        model_id: impl Into<String>,
        cells: usize,
        days: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(cells * days);
        for t in 0..days {
            for c in 0..cells {
                values.push(f(c, t));
            }
        }
        Self::new(model_id, cells, days, values)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.cells, self.days)
    }

    pub fn get(&self, cell: usize, day: usize) -> f64 {
        self.values[day * self.cells + cell]
    }

    pub fn day(&self, t: usize) -> &[f64] {
        &self.values[t * self.cells..(t + 1) * self.cells]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    /// Applies `f` to every value; the result is revalidated.
    pub fn map(&self, model_id: impl Into<String>, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            model_id,
            self.cells,
            self.days,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Keeps the listed days, in the given order.
    pub fn select_days(&self, days: &[usize]) -> Self {
        let mut values = Vec::with_capacity(days.len() * self.cells);
        for &t in days {
            values.extend_from_slice(self.day(t));
        }
        Self {
            model_id: self.model_id.clone(),
            cells: self.cells,
            days: days.len(),
            values,
        }
    }
}

/// Observed counts `y[c, t]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationPanel {
    cells: usize,
    days: usize,
    counts: Vec<u32>,
}

impl ObservationPanel {
    pub fn new(cells: usize, days: usize, counts: Vec<u32>) -> Result<Self> {
        check_len("observation panel", cells, days, counts.len())?;
        Ok(Self { cells, days, counts })
    }

    pub fn zeros(cells: usize, days: usize) -> Result<Self> {
        Self::new(cells, days, vec![0; cells * days])
    }

    /// Builds a panel from real-valued counts, rejecting negative, fractional or non-finite entries.
    pub fn from_reals(cells: usize, days: usize, values: &[f64]) -> Result<Self> {
        let counts = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                    Ok(v as u32)
                } else {
                    Err(Error::invalid(format!(
                        "observation {v} at cell {} day {} is not a nonnegative integer",
                        i % cells.max(1),
                        i / cells.max(1)
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cells, days, counts)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.cells, self.days)
    }

    pub fn get(&self, cell: usize, day: usize) -> u32 {
        self.counts[day * self.cells + cell]
    }

    pub fn day(&self, t: usize) -> &[u32] {
        &self.counts[t * self.cells..(t + 1) * self.cells]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn day_total(&self, t: usize) -> u64 {
        self.day(t).iter().map(|&y| y as u64).sum()
    }

    /// `N_T`: the count summed over every cell and day.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&y| y as u64).sum()
    }

    pub fn select_days(&self, days: &[usize]) -> Self {
        let mut counts = Vec::with_capacity(days.len() * self.cells);
        for &t in days {
            counts.extend_from_slice(self.day(t));
        }
        Self {
            cells: self.cells,
            days: days.len(),
            counts,
        }
    }
}

pub(crate) fn ensure_same_dims(forecast: &ForecastPanel, obs: &ObservationPanel) -> Result<()> {
    if forecast.dims() != obs.dims() {
        return Err(Error::dims(format!(
            "forecast '{}' is {:?} (cells, days) but observations are {:?}",
            forecast.model_id(),
            forecast.dims(),
            obs.dims()
        )));
    }
    Ok(())
}

/// A full predictive distribution on `{0, ..., m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    pmf: Vec<f64>,
}

impl CountDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::invalid("probability mass function is empty"));
        }
        if pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probability masses must be finite and nonnegative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("probability masses sum to {total}, not 1")));
        }
        Ok(Self { pmf })
    }

    pub fn point_mass(k: usize) -> Self {
        let mut pmf = vec![0.0; k + 1];
        pmf[k] = 1.0;
        Self { pmf }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Largest count in the support representation.
    pub fn max_count(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    /// `P_k`, clamped to exactly 1 beyond the support.
    pub fn cdf(&self, k: usize) -> f64 {
        if k >= self.max_count() {
            1.0
        } else {
            self.pmf[..=k].iter().sum::<f64>().min(1.0)
        }
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: NaiveDateTime,
    pub lon: f64,
    pub lat: f64,
    pub magnitude: f64,
}

/// An earthquake catalog, sorted by time on construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    events: Vec<Event>,
}

impl Catalog {
    pub fn new(mut events: Vec<Event>) -> Result<Self> {
        if let Some(e) = events
            .iter()
            .find(|e| !(e.lon.is_finite() && e.lat.is_finite() && e.magnitude.is_finite()))
        {
            return Err(Error::invalid(format!(
                "catalog event at {} has non-finite fields",
                e.time
            )));
        }
        events.sort_by(|a, b| {
            a.time
                .cmp(&b.time)
                .then(a.lon.total_cmp(&b.lon))
                .then(a.lat.total_cmp(&b.lat))
                .then(a.magnitude.total_cmp(&b.magnitude))
        });
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_forecast_values() {
        for bad in [-1e-9, f64::NAN, f64::INFINITY] {
            assert!(ForecastPanel::new("m", 2, 1, vec![0.5, bad]).is_err());
        }
        assert!(ForecastPanel::new("m", 2, 1, vec![0.0, 0.5]).is_ok());
    }

    #[test]
    fn rejects_wrong_lengths() {
        assert!(matches!(
            ForecastPanel::new("m", 2, 2, vec![1.0; 3]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(ObservationPanel::new(3, 1, vec![0; 4]).is_err());
    }

    #[test]
    fn observation_reals_must_be_counts() {
        assert!(ObservationPanel::from_reals(1, 2, &[1.0, 0.5]).is_err());
        assert!(ObservationPanel::from_reals(1, 2, &[1.0, -1.0]).is_err());
        assert!(ObservationPanel::from_reals(1, 2, &[1.0, f64::NAN]).is_err());
        let p = ObservationPanel::from_reals(1, 2, &[1.0, 3.0]).unwrap();
        assert_eq!(p.total(), 4);
    }

    #[test]
    fn day_major_layout() {
        let f = ForecastPanel::from_fn("m", 3, 2, |c, t| (10 * t + c) as f64).unwrap();
        assert_eq!(f.day(1), &[10.0, 11.0, 12.0]);
        assert_eq!(f.get(2, 0), 2.0);
        let sub = f.select_days(&[1]);
        assert_eq!(sub.values(), &[10.0, 11.0, 12.0]);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![]).is_err());
        assert!(GridSpec::new(vec!["a".into(), "a".into()]).is_err());
        let ok = GridSpec::new(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(ok.index_of("b"), Some(1));
        assert_ne!(
            ok.checksum(),
            GridSpec::new(vec!["b".into(), "a".into()]).unwrap().checksum()
        );

        assert!(CellBox::new(1.0, 1.0, 0.0, 1.0).is_err());
        let a = CellBox::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let b = CellBox::new(1.0, 2.0, 0.0, 1.0).unwrap();
        let c = CellBox::new(0.5, 1.5, 0.5, 1.5).unwrap();
        assert!(GridSpec::with_geometry(vec!["a".into(), "b".into()], vec![a, b]).is_ok());
        assert!(GridSpec::with_geometry(vec!["a".into(), "c".into()], vec![a, c]).is_err());
    }

    #[test]
    fn count_distribution_cdf() {
        let p = CountDistribution::new(vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(p.cdf(0), 0.25);
        assert_eq!(p.cdf(1), 0.75);
        assert_eq!(p.cdf(7), 1.0);
        assert_eq!(p.mean(), 1.0);
        assert!(CountDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(CountDistribution::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn time_index_dates() {
        let origin = NaiveDate::from_ymd_opt(2005, 4, 16).unwrap();
        let ti = TimeIndex::new(origin, 10, 7).unwrap();
        assert_eq!(ti.date(3), NaiveDate::from_ymd_opt(2005, 4, 19).unwrap());
        assert_eq!(ti.offset_of(NaiveDate::from_ymd_opt(2005, 4, 14).unwrap()), -2);
        assert!(TimeIndex::new(origin, 0, 7).is_err());
        assert!(TimeIndex::new(origin, 1, 0).is_err());
    }
}

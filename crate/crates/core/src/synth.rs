//! Synthetic worlds and the exchangeable-mixture null experiment.
//!
//! Events are generated per cell and calendar day, then counted in
//! overlapping windows of `window_length` days, so every interior event is
//! observed `window_length` times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson};
use rayon::prelude::*;

use crate::aggregate::{daily_scores, DailyScoreSeries};
use crate::error::{Error, Result};
use crate::inference::{csep_t_test, dm_test, TestResult};
use crate::model::{ensure_same_dims, ForecastPanel, ObservationPanel};
use crate::scoring::ScoringFunction;

pub const DEFAULT_NULL_REPLICATES: usize = 400;

/// Log-normal noise level of the spiky base panel in the reference experiment.
pub const REFERENCE_NOISE_SD: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountFamily {
    Poisson,
    /// Gamma-Poisson mixture with variance `mu + mu^2 / dispersion`.
    NegativeBinomial {
        dispersion: f64,
    },
}

/// Day-level clustering: on each calendar day, with probability `probability`,
/// one uniformly chosen cell has its rate multiplied by `factor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub probability: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorldSpec {
    pub days: usize,
    pub window_length: usize,
    /// Expected count per window in each cell.
    pub base_rates: Vec<f64>,
    pub family: CountFamily,
    pub burst: Option<Burst>,
    pub seed: u64,
}

impl SyntheticWorldSpec {
    /// Heterogeneous rates: log-normal spread around a common level, scaled
    /// so the rates sum to `total_rate` per window.
    pub fn heterogeneous(
        cells: usize,
        days: usize,
        window_length: usize,
        total_rate: f64,
        spread: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let ln = LogNormal::new(0.0, spread.max(1e-12)).expect("valid log-normal");
        let raw: Vec<f64> = (0..cells).map(|_| ln.sample(&mut rng)).collect();
        let sum: f64 = raw.iter().sum();
        Self {
            days,
            window_length,
            base_rates: raw.iter().map(|r| r * total_rate / sum).collect(),
            family: CountFamily::Poisson,
            burst: None,
            seed,
        }
    }

    /// Reference null world: 200 cells, 730 days, 7-day windows, ten expected
    /// events per window region-wide with log-normal cell heterogeneity, and
    /// day-level bursts that multiply one cell's rate by 200 on 5% of days.
    pub fn reference(seed: u64) -> Self {
        Self {
            burst: Some(Burst {
                probability: 0.05,
                factor: 200.0,
            }),
            ..Self::heterogeneous(200, 730, 7, 10.0, 1.0, seed)
        }
    }

    pub fn cells(&self) -> usize {
        self.base_rates.len()
    }

    fn validate(&self) -> Result<()> {
        if self.base_rates.is_empty() || self.days == 0 || self.window_length == 0 {
            return Err(Error::invalid(
                "world needs at least one cell, one day and a positive window length",
            ));
        }
        if let Some(r) = self.base_rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::invalid(format!("base rates must be positive, got {r}")));
        }
        if let CountFamily::NegativeBinomial { dispersion } = self.family {
            if !(dispersion.is_finite() && dispersion > 0.0) {
                return Err(Error::invalid(format!("dispersion must be positive, got {dispersion}")));
            }
        }
        if let Some(b) = self.burst {
            if !(0.0..=1.0).contains(&b.probability) || !(b.factor.is_finite() && b.factor > 0.0) {
                return Err(Error::invalid(
                    "burst probability must be in [0, 1] and the factor positive",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub observations: ObservationPanel,
    /// Exact window means given the realized bursts.
    pub mean: ForecastPanel,
    /// Unique events per cell and calendar day, day-major over `days + window_length - 1` days.
    pub daily_events: Vec<u32>,
    pub unique_events: u64,
}

fn draw_count(family: CountFamily, mu: f64, rng: &mut ChaCha8Rng) -> u32 {
    if mu <= 0.0 {
        return 0;
    }
    let lambda = match family {
        CountFamily::Poisson => mu,
        CountFamily::NegativeBinomial { dispersion } => Gamma::new(dispersion, mu / dispersion)
            .expect("valid gamma")
            .sample(rng),
    };
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("valid poisson").sample(rng) as u32
}

pub fn generate_world(spec: &SyntheticWorldSpec) -> Result<SyntheticWorld> {
    spec.validate()?;
    let (cells, days, w) = (spec.cells(), spec.days, spec.window_length);
    let span = days + w - 1;

    let mut rates: Vec<f64> = (0..span)
        .flat_map(|_| spec.base_rates.iter().map(|r| r / w as f64))
        .collect();
    if let Some(b) = spec.burst {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1);
        for d in 0..span {
            if rng.random::<f64>() < b.probability {
                let c = rng.random_range(0..cells);
                rates[d * cells + c] *= b.factor;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let daily_events: Vec<u32> = rates.iter().map(|&mu| draw_count(spec.family, mu, &mut rng)).collect();
    let unique_events = daily_events.iter().map(|&e| e as u64).sum();

    let observations = window_counts(&daily_events, cells, days, w)?;
    let mean = ForecastPanel::from_fn("truth", cells, days, |c, t| {
        (t..t + w).map(|d| rates[d * cells + c]).sum()
    })?;
    Ok(SyntheticWorld {
        observations,
        mean,
        daily_events,
        unique_events,
    })
}

/// Counts of per-day events in the windows `[t, t + window_length)`.
/// `daily` is day-major over at least `days` days; later days may be absent.
pub fn window_counts(daily: &[u32], cells: usize, days: usize, window_length: usize) -> Result<ObservationPanel> {
    if cells == 0 || !daily.len().is_multiple_of(cells) || daily.len() / cells < days {
        return Err(Error::dims(format!(
            "{} daily counts do not cover {cells} cells and {days} days",
            daily.len()
        )));
    }
    let span = daily.len() / cells;
    let mut counts = vec![0u32; cells * days];
    for t in 0..days {
        for d in t..(t + window_length).min(span) {
            for c in 0..cells {
                counts[t * cells + c] += daily[d * cells + c];
            }
        }
    }
    ObservationPanel::new(cells, days, counts)
}

/// A smooth, time-invariant panel (background rates) and a spiky panel that
/// tracks the realized means with multiplicative log-normal noise per cell-day.
pub fn base_pair(
    spec: &SyntheticWorldSpec,
    world: &SyntheticWorld,
    noise_sd: f64,
) -> Result<(ForecastPanel, ForecastPanel)> {
    let smooth = ForecastPanel::from_fn("smooth", spec.cells(), spec.days, |c, _| spec.base_rates[c])?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2);
    let sd = noise_sd.max(0.0);
    let ln = LogNormal::new(-0.5 * sd * sd, sd.max(1e-300)).map_err(|e| Error::invalid(e.to_string()))?;
    let noise: Vec<f64> = (0..world.mean.values().len())
        .map(|_| if sd == 0.0 { 1.0 } else { ln.sample(&mut rng) })
        .collect();
    let spiky = ForecastPanel::new(
        "spiky",
        spec.cells(),
        spec.days,
        world.mean.values().iter().zip(&noise).map(|(m, n)| m * n).collect(),
    )?;
    Ok((smooth, spiky))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureExperimentSpec {
    pub base_a: ForecastPanel,
    pub base_b: ForecastPanel,
    pub replicates: usize,
    pub seed: u64,
    /// Day indices kept for testing (e.g. one weekday); all days when `None`.
    pub days: Option<Vec<usize>>,
}

/// Per-day coins of one replicate: `true` assigns base A's column to Mix_A.
pub fn mixture_coins(seed: u64, replicate: usize, days: usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    (0..days).map(|_| rng.random::<bool>()).collect()
}

fn mix_with_coins(a: &ForecastPanel, b: &ForecastPanel, coins: &[bool]) -> Result<(ForecastPanel, ForecastPanel)> {
    let (mut va, mut vb) = (
        Vec::with_capacity(a.values().len()),
        Vec::with_capacity(a.values().len()),
    );
    for (t, &heads) in coins.iter().enumerate() {
        let (first, second) = if heads { (a, b) } else { (b, a) };
        va.extend_from_slice(first.day(t));
        vb.extend_from_slice(second.day(t));
    }
    Ok((
        ForecastPanel::new("Mix_A", a.cells(), a.days(), va)?,
        ForecastPanel::new("Mix_B", a.cells(), a.days(), vb)?,
    ))
}

pub fn mixture_pair(spec: &MixtureExperimentSpec, replicate: usize) -> Result<(ForecastPanel, ForecastPanel)> {
    if spec.base_a.dims() != spec.base_b.dims() {
        return Err(Error::dims("mixture base panels differ in shape"));
    }
    let coins = mixture_coins(spec.seed, replicate, spec.base_a.days());
    mix_with_coins(&spec.base_a, &spec.base_b, &coins)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullTest {
    DieboldMariano { lag: usize },
    CsepT,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullOutcome {
    pub replicate: usize,
    pub result: std::result::Result<TestResult, String>,
}

impl NullOutcome {
    pub fn p_value(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.p_value)
    }
}

/// Runs the Mix_A versus Mix_B test for every replicate under the Poisson score.
pub fn null_experiment(
    spec: &MixtureExperimentSpec,
    obs: &ObservationPanel,
    test: NullTest,
) -> Result<Vec<NullOutcome>> {
    if spec.replicates == 0 {
        return Err(Error::invalid("at least one replicate is needed"));
    }
    ensure_same_dims(&spec.base_a, obs)?;
    ensure_same_dims(&spec.base_b, obs)?;
    let (a, b, obs) = match &spec.days {
        Some(days) => (
            spec.base_a.select_days(days),
            spec.base_b.select_days(days),
            obs.select_days(days),
        ),
        None => (spec.base_a.clone(), spec.base_b.clone(), obs.clone()),
    };
    let days = obs.days();
    // each mixture day is a base day, so its daily score is reused verbatim
    let (sa, sb) = match test {
        NullTest::DieboldMariano { .. } => (
            Some(daily_scores(&a, &obs, ScoringFunction::Poisson)?),
            Some(daily_scores(&b, &obs, ScoringFunction::Poisson)?),
        ),
        NullTest::CsepT => (None, None),
    };

    let outcomes = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let coins = mixture_coins(spec.seed, r, days);
            let result = match test {
                NullTest::DieboldMariano { lag } => {
                    let (sa, sb) = (sa.as_ref().unwrap().values(), sb.as_ref().unwrap().values());
                    let pick = |first: bool| -> Vec<f64> {
                        coins
                            .iter()
                            .enumerate()
                            .map(|(t, &h)| if h == first { sa[t] } else { sb[t] })
                            .collect()
                    };
                    DailyScoreSeries::new("Mix_A", pick(true))
                        .and_then(|ma| Ok((ma, DailyScoreSeries::new("Mix_B", pick(false))?)))
                        .and_then(|(ma, mb)| dm_test(&ma, &mb, lag))
                }
                NullTest::CsepT => mix_with_coins(&a, &b, &coins).and_then(|(ma, mb)| csep_t_test(&ma, &mb, &obs)),
            };
            NullOutcome {
                replicate: r,
                result: result.map_err(|e| e.to_string()),
            }
        })
        .collect();
    Ok(outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1), with the
/// asymptotic distribution and the Stephens small-sample correction.
pub fn ks_uniformity(p_values: &[f64]) -> Result<KsResult> {
    if p_values.is_empty() {
        return Err(Error::invalid("uniformity test needs at least one p-value"));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {p} outside [0, 1]")));
    }
    let mut s = p_values.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
        n: s.len(),
    })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = sign * (a * kf * kf).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Fraction of p-values below `lo` or above `hi`.
pub fn tail_fraction(p_values: &[f64], lo: f64, hi: f64) -> f64 {
    p_values.iter().filter(|&&p| p < lo || p > hi).count() as f64 / p_values.len() as f64
}

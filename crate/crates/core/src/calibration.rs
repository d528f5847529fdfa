//! Isotonic recalibration, reliability curves, CORP decomposition and
//! consistency bands.
//!
//! Recalibrated values estimate `E[Y | X = x]`: bins pool observations, not
//! forecasts. Cases with tied forecasts are pooled before the sweep, so the
//! fit is unique and independent of input order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ensure_same_dims, CountDistribution, ForecastPanel, ObservationPanel};
use crate::numeric::{compensated_mean, compensated_sum};
use crate::scoring::ScoringFunction;

pub const DEFAULT_LEVEL: f64 = 0.90;
pub const DEFAULT_REPLICATES: usize = 1000;

/// Forecast cases sorted by value and grouped into runs of equal value.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedCases {
    order: Vec<usize>,
    levels: Vec<f64>,
    // group g covers order[starts[g]..starts[g + 1]]
    starts: Vec<usize>,
}

impl SortedCases {
    pub fn new(x: &[f64]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("isotonic regression needs at least one case"));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("forecast value {v}")));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.par_sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        let mut levels = Vec::new();
        let mut starts = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            if levels.last() != Some(&x[i]) {
                levels.push(x[i]);
                starts.push(pos);
            }
        }
        starts.push(order.len());
        Ok(Self { order, levels, starts })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Distinct forecast values, increasing.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn group_size(&self, g: usize) -> usize {
        self.starts[g + 1] - self.starts[g]
    }

    fn group_sums(&self, y: &[f64]) -> Vec<f64> {
        (0..self.levels.len())
            .map(|g| compensated_sum(self.order[self.starts[g]..self.starts[g + 1]].iter().map(|&i| y[i])))
            .collect()
    }
}

/// Isotonic fit over groups with the given sums and sizes. Returns, for each
/// group, the index of its pooled block, and the block values.
fn pav_sweep(sums: &[f64], sizes: impl Iterator<Item = usize>) -> (Vec<usize>, Vec<f64>) {
    // (sum, count, first group)
    let mut stack: Vec<(f64, usize, usize)> = Vec::with_capacity(sums.len());
    for (g, (&s, n)) in sums.iter().zip(sizes).enumerate() {
        let mut cur = (s, n, g);
        while let Some(&(ps, pn, pg)) = stack.last() {
            if ps / pn as f64 >= cur.0 / cur.1 as f64 {
                stack.pop();
                cur = (ps + cur.0, pn + cur.1, pg);
            } else {
                break;
            }
        }
        stack.push(cur);
    }
    let mut block_of = vec![0; sums.len()];
    for (b, w) in stack.iter().enumerate() {
        let end = stack.get(b + 1).map_or(sums.len(), |n| n.2);
        block_of[w.2..end].fill(b);
    }
    (block_of, stack.iter().map(|&(s, n, _)| s / n as f64).collect())
}

/// Result of the pool-adjacent-violators recalibration.
#[derive(Debug, Clone, PartialEq)]
pub struct PavResult {
    cases: SortedCases,
    block_of: Vec<usize>,
    block_values: Vec<f64>,
}

impl PavResult {
    /// Case indices in increasing forecast order (ties by index).
    pub fn order(&self) -> &[usize] {
        &self.cases.order
    }

    /// Distinct forecast values and their recalibrated values.
    pub fn levels(&self) -> &[f64] {
        self.cases.levels()
    }

    pub fn level_values(&self) -> Vec<f64> {
        self.block_of.iter().map(|&b| self.block_values[b]).collect()
    }

    /// Bins as half-open ranges of positions in `order()`.
    pub fn bins(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.block_values.len());
        let mut g = 0;
        while g < self.block_of.len() {
            let b = self.block_of[g];
            let start = self.cases.starts[g];
            while g < self.block_of.len() && self.block_of[g] == b {
                g += 1;
            }
            out.push(start..self.cases.starts[g]);
        }
        out
    }

    pub fn bin_values(&self) -> &[f64] {
        &self.block_values
    }

    /// Recalibrated values in sorted order.
    pub fn fitted_sorted(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cases.len());
        for (g, &b) in self.block_of.iter().enumerate() {
            out.extend(std::iter::repeat_n(self.block_values[b], self.cases.group_size(g)));
        }
        out
    }

    /// Recalibrated values aligned with the input cases.
    pub fn fitted(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cases.len()];
        for (g, &b) in self.block_of.iter().enumerate() {
            for &i in &self.cases.order[self.cases.starts[g]..self.cases.starts[g + 1]] {
                out[i] = self.block_values[b];
            }
        }
        out
    }
}

/// Isotonic least-squares regression of `y` on the ordering of `x`.
pub fn pav_recalibrate(x: &[f64], y: &[f64]) -> Result<PavResult> {
    if x.len() != y.len() {
        return Err(Error::dims(format!(
            "{} forecasts but {} observations",
            x.len(),
            y.len()
        )));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("observation {v}")));
    }
    let cases = SortedCases::new(x)?;
    Ok(pav_with_cases(cases, y))
}

fn pav_with_cases(cases: SortedCases, y: &[f64]) -> PavResult {
    let sums = cases.group_sums(y);
    let (block_of, block_values) = pav_sweep(&sums, (0..cases.levels.len()).map(|g| cases.group_size(g)));
    PavResult {
        cases,
        block_of,
        block_values,
    }
}

/// Mean-reliability curve at the distinct forecast values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityCurve {
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// Empirical-CDF coordinates, when a transform sample was given.
    pub x_ecdf: Option<Vec<f64>>,
    pub x_hat_ecdf: Option<Vec<f64>>,
}

impl ReliabilityCurve {
    /// Linear interpolation between curve points, constant beyond the ends.
    pub fn interpolate(&self, x: f64) -> f64 {
        interpolate(&self.x, &self.x_hat, x)
    }
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v < x);
    if i == 0 {
        ys[0]
    } else if i == xs.len() {
        ys[xs.len() - 1]
    } else if xs[i] == x {
        ys[i]
    } else {
        let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        ys[i - 1] + w * (ys[i] - ys[i - 1])
    }
}

/// Right-continuous empirical CDF of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::invalid("empirical CDF needs a nonempty sample"));
        }
        if sample.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("NaN in transform sample".into()));
        }
        sample.par_sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: sample })
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= v) as f64 / self.sorted.len() as f64
    }
}

pub fn reliability_curve(
    forecast: &ForecastPanel,
    obs: &ObservationPanel,
    transform: Option<&Ecdf>,
) -> Result<ReliabilityCurve> {
    ensure_same_dims(forecast, obs)?;
    let y: Vec<f64> = obs.counts().iter().map(|&v| v as f64).collect();
    reliability_curve_from_pairs(forecast.values(), &y, transform)
}

pub fn reliability_curve_from_pairs(x: &[f64], y: &[f64], transform: Option<&Ecdf>) -> Result<ReliabilityCurve> {
    let pav = pav_recalibrate(x, y)?;
    let xs = pav.levels().to_vec();
    let x_hat = pav.level_values();
    let (x_ecdf, x_hat_ecdf) = match transform {
        Some(e) => (
            Some(xs.iter().map(|&v| e.eval(v)).collect()),
            Some(x_hat.iter().map(|&v| e.eval(v)).collect()),
        ),
        None => (None, None),
    };
    Ok(ReliabilityCurve {
        x: xs,
        x_hat,
        x_ecdf,
        x_hat_ecdf,
    })
}

/// Mean score with its miscalibration, discrimination and uncertainty
/// components: `score = mcb - dsc + unc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreDecomposition {
    pub score: f64,
    pub mcb: f64,
    pub dsc: f64,
    pub unc: f64,
}

/// CORP decomposition over all `C * T` forecast cases.
pub fn corp_decompose(
    forecast: &ForecastPanel,
    obs: &ObservationPanel,
    scoring: ScoringFunction,
) -> Result<ScoreDecomposition> {
    ensure_same_dims(forecast, obs)?;
    let y: Vec<u64> = obs.counts().iter().map(|&v| v as u64).collect();
    corp_decompose_pairs(forecast.values(), &y, scoring)
}

pub fn corp_decompose_pairs(x: &[f64], y: &[u64], scoring: ScoringFunction) -> Result<ScoreDecomposition> {
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let pav = pav_recalibrate(x, &yf)?;
    let x_rc = pav.fitted();
    let x_mg = compensated_mean(&yf);
    let mean_score = |f: &dyn Fn(usize) -> f64| -> f64 {
        compensated_sum((0..y.len()).map(|i| scoring.score_total(f(i), y[i]))) / y.len() as f64
    };
    let score = mean_score(&|i| x[i]);
    let rc = mean_score(&|i| x_rc[i]);
    let mg = mean_score(&|_| x_mg);
    for (name, v) in [("score", score), ("recalibrated score", rc), ("marginal score", mg)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "{name} is {v}; the decomposition is undefined"
            )));
        }
    }
    Ok(ScoreDecomposition {
        score,
        mcb: score - rc,
        dsc: mg - rc,
        unc: mg,
    })
}

/// Empirical pmf of pooled counts.
pub fn empirical_pmf(counts: &[u32]) -> Result<CountDistribution> {
    if counts.is_empty() {
        return Err(Error::invalid("empirical pmf needs at least one count"));
    }
    let m = *counts.iter().max().unwrap() as usize;
    let mut freq = vec![0u64; m + 1];
    for &c in counts {
        freq[c as usize] += 1;
    }
    let n = counts.len() as f64;
    let mut pmf: Vec<f64> = freq.iter().map(|&f| f as f64 / n).collect();
    renormalize(&mut pmf);
    CountDistribution::new(pmf)
}

fn renormalize(pmf: &mut [f64]) {
    let total = compensated_sum(pmf.iter().copied());
    pmf.iter_mut().for_each(|p| *p /= total);
}

/// Largest forecast value the base pmf can be tilted to.
pub fn tilt_bound(base: &CountDistribution) -> f64 {
    let p0 = base.mass(0);
    if p0 >= 1.0 {
        0.0
    } else {
        base.mean() / (1.0 - p0)
    }
}

/// Count distribution with mean `x`, obtained from `base` by moving mass
/// `eps = mean / x - 1` onto zero and renormalizing.
pub fn tilted_distribution(base: &CountDistribution, x: f64) -> Result<CountDistribution> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::NonFinite(format!("forecast value {x}")));
    }
    if x == 0.0 {
        return Ok(CountDistribution::point_mass(0));
    }
    let mu = base.mean();
    if mu <= 0.0 {
        return Err(Error::DegenerateObservations);
    }
    let eps = mu / x - 1.0;
    let mut pmf = base.pmf().to_vec();
    let p0 = pmf[0] + eps;
    if p0 < -1e-12 {
        return Err(Error::TiltBound {
            x,
            bound: tilt_bound(base),
        });
    }
    pmf[0] = p0.max(0.0);
    let scale = 1.0 + eps;
    pmf.iter_mut().for_each(|p| *p /= scale);
    renormalize(&mut pmf);
    CountDistribution::new(pmf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyBand {
    pub abscissae: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub replicates: usize,
}

/// Sampler over the tilted distributions of each distinct forecast value.
struct TiltedSampler {
    cdfs: Vec<Vec<f64>>,
}

impl TiltedSampler {
    fn new(levels: &[f64], base: &CountDistribution) -> Result<Self> {
        let cdfs = levels
            .iter()
            .map(|&x| {
                let d = tilted_distribution(base, x)?;
                let mut acc = 0.0;
                let mut cdf: Vec<f64> = d
                    .pmf()
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                *cdf.last_mut().unwrap() = 1.0;
                Ok(cdf)
            })
            .collect::<Result<_>>()?;
        Ok(Self { cdfs })
    }

    #[inline]
    fn draw(&self, g: usize, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        self.cdfs[g].partition_point(|&c| c <= u) as f64
    }
}

/// Nearest-rank percentile of sorted values, `q` in (0, 1).
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

pub fn consistency_band(
    forecast: &ForecastPanel,
    obs: &ObservationPanel,
    level: f64,
    replicates: usize,
    seed: u64,
) -> Result<ConsistencyBand> {
    ensure_same_dims(forecast, obs)?;
    let base = empirical_pmf(obs.counts())?;
    consistency_band_pairs(forecast.values(), &base, level, replicates, seed)
}

/// Band of reliability curves sampled under calibration, for forecasts `x`
/// and count distributions tilted from `base`.
pub fn consistency_band_pairs(
    x: &[f64],
    base: &CountDistribution,
    level: f64,
    replicates: usize,
    seed: u64,
) -> Result<ConsistencyBand> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("band level must be in (0, 1), got {level}")));
    }
    if replicates < 2 {
        return Err(Error::invalid(format!(
            "at least two replicates are needed, got {replicates}"
        )));
    }
    let cases = SortedCases::new(x)?;
    let sampler = TiltedSampler::new(cases.levels(), base)?;
    let sizes: Vec<usize> = (0..cases.levels.len()).map(|g| cases.group_size(g)).collect();

    let curves: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let sums: Vec<f64> = sizes
                .iter()
                .enumerate()
                .map(|(g, &n)| (0..n).map(|_| sampler.draw(g, &mut rng)).sum())
                .collect();
            let (block_of, values) = pav_sweep(&sums, sizes.iter().copied());
            block_of.iter().map(|&b| values[b]).collect()
        })
        .collect();

    let tail = (1.0 - level) / 2.0;
    let mut lower = Vec::with_capacity(sizes.len());
    let mut upper = Vec::with_capacity(sizes.len());
    let mut column = vec![0.0; replicates];
    for g in 0..sizes.len() {
        for (c, curve) in column.iter_mut().zip(&curves) {
            *c = curve[g];
        }
        column.sort_unstable_by(f64::total_cmp);
        lower.push(nearest_rank(&column, tail));
        upper.push(nearest_rank(&column, 1.0 - tail));
    }
    Ok(ConsistencyBand {
        abscissae: cases.levels,
        lower,
        upper,
        level,
        replicates,
    })
}

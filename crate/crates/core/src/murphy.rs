//! Exact Murphy curves and logarithmic Murphy integrals.
//!
//! For a fixed pair `(x, y)` the elementary score is nonzero only on the open
//! interval between `min(x, y)` and `max(x, y)`, where it is affine in `theta`:
//! `y - theta` when `x < y` and `theta - y` when `y < x`. Summing over pairs
//! gives a curve that is affine between consecutive knots, with integer slope
//! and intercept. Those coefficients are accumulated exactly with difference
//! arrays, so no theta grid is involved.
//!
//! The curve jumps at forecast values (a pair with `x < y` switches from 0 to
//! `y - x` as theta passes `x`), so segment coefficients are stored rather
//! than interpolated from knot values.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ensure_same_dims, ForecastPanel, ObservationPanel};
use crate::numeric::CompensatedSum;

/// Average elementary score as an exact piecewise-affine function of `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct MurphyCurve {
    model_id: String,
    days: usize,
    knots: Vec<f64>,
    values: Vec<f64>,
    // Segment i spans (knots[i-1], knots[i]), with knots[-1] = 0. The curve is
    // zero beyond the last knot.
    slopes: Vec<i64>,
    intercepts: Vec<i64>,
}

impl MurphyCurve {
    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `S̄_theta` at each knot.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn segment_count(&self) -> usize {
        self.slopes.len()
    }

    /// `(lo, hi, slope, intercept)` of segment `i`; the curve on `(lo, hi)` is
    /// `(slope * theta + intercept) / days`.
    pub fn segment(&self, i: usize) -> (f64, f64, i64, i64) {
        let lo = if i == 0 { 0.0 } else { self.knots[i - 1] };
        (lo, self.knots[i], self.slopes[i], self.intercepts[i])
    }

    fn affine(&self, i: usize, theta: f64) -> f64 {
        (self.slopes[i] as f64 * theta + self.intercepts[i] as f64) / self.days as f64
    }

    /// Exact `S̄_theta` for any `theta > 0`.
    pub fn eval(&self, theta: f64) -> f64 {
        assert!(theta > 0.0, "theta must be positive");
        let i = self.knots.partition_point(|&k| k < theta);
        if i == self.knots.len() {
            0.0
        } else if self.knots[i] == theta {
            self.values[i]
        } else {
            self.affine(i, theta)
        }
    }

    /// Limits of the curve from below and above at knot `i`.
    pub fn one_sided_limits(&self, i: usize) -> (f64, f64) {
        let k = self.knots[i];
        let right = if i + 1 < self.slopes.len() {
            self.affine(i + 1, k)
        } else {
            0.0
        };
        (self.affine(i, k), right)
    }

    pub fn is_zero(&self) -> bool {
        self.slopes.iter().all(|&a| a == 0) && self.intercepts.iter().all(|&b| b == 0)
    }
}

/// Builds the Murphy curve of a forecast panel.
pub fn murphy_curve(forecast: &ForecastPanel, obs: &ObservationPanel) -> Result<MurphyCurve> {
    ensure_same_dims(forecast, obs)?;
    let ys: Vec<u64> = obs.counts().iter().map(|&y| y as u64).collect();
    murphy_curve_from_pairs(forecast.model_id(), forecast.values(), &ys, forecast.days())
}

/// Builds a Murphy curve from arbitrary forecast cases; values are scaled by
/// `1 / days`.
pub fn murphy_curve_from_pairs(model_id: &str, xs: &[f64], ys: &[u64], days: usize) -> Result<MurphyCurve> {
    if xs.len() != ys.len() {
        return Err(Error::dims(format!(
            "{} forecasts but {} observations",
            xs.len(),
            ys.len()
        )));
    }
    if days == 0 {
        return Err(Error::invalid("Murphy curve needs at least one day"));
    }
    if let Some(x) = xs.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::NonFinite(format!(
            "forecast value {x} is not a finite nonnegative number"
        )));
    }

    let mut knots: Vec<f64> = xs
        .iter()
        .copied()
        .filter(|&x| x > 0.0)
        .chain(ys.iter().filter(|&&y| y > 0).map(|&y| y as f64))
        .collect();
    knots.par_sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    knots.dedup();

    let n = knots.len();
    // position of an endpoint: -1 for zero, otherwise its knot index
    let locate = |v: f64| -> isize {
        if v == 0.0 {
            -1
        } else {
            knots
                .binary_search_by(|k| k.partial_cmp(&v).unwrap())
                .expect("endpoint is a knot") as isize
        }
    };

    let mut seg_slope = vec![0i64; n + 1];
    let mut seg_icpt = vec![0i64; n + 1];
    let mut knot_slope = vec![0i64; n + 1];
    let mut knot_icpt = vec![0i64; n + 1];
    for (&x, &y) in xs.iter().zip(ys) {
        let yf = y as f64;
        let (a, b) = match x.partial_cmp(&yf).unwrap() {
            Ordering::Less => (-1i64, y as i64),
            Ordering::Greater => (1i64, -(y as i64)),
            Ordering::Equal => continue,
        };
        let s = locate(x.min(yf));
        let e = locate(x.max(yf)) as usize;
        // active on segments s+1..=e and strictly inside at knots s+1..e-1
        let first = (s + 1) as usize;
        seg_slope[first] += a;
        seg_icpt[first] += b;
        seg_slope[e + 1] -= a;
        seg_icpt[e + 1] -= b;
        if first < e {
            knot_slope[first] += a;
            knot_icpt[first] += b;
            knot_slope[e] -= a;
            knot_icpt[e] -= b;
        }
    }

    let prefix = |d: &[i64]| -> Vec<i64> {
        d[..n]
            .iter()
            .scan(0i64, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    };
    let slopes = prefix(&seg_slope);
    let intercepts = prefix(&seg_icpt);
    let ks = prefix(&knot_slope);
    let kb = prefix(&knot_icpt);
    let t = days as f64;
    let values = knots
        .iter()
        .zip(ks.iter().zip(&kb))
        .map(|(&k, (&a, &b))| (a as f64 * k + b as f64) / t)
        .collect();

    Ok(MurphyCurve {
        model_id: model_id.to_string(),
        days,
        knots,
        values,
        slopes,
        intercepts,
    })
}

/// `integral of S̄_theta d(log theta)`, evaluated segment by segment from the
/// antiderivative `a theta + b ln theta`. Infinite when the curve behaves like
/// `b / theta` near zero, which happens exactly when a zero forecast meets a
/// positive count.
pub fn log_murphy_integral(curve: &MurphyCurve) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in 0..curve.segment_count() {
        let (lo, hi, a, b) = curve.segment(i);
        if a == 0 && b == 0 {
            continue;
        }
        if lo == 0.0 {
            if b != 0 {
                return if b > 0 { f64::INFINITY } else { f64::NEG_INFINITY };
            }
            acc.add(a as f64 * hi);
        } else {
            acc.add(a as f64 * (hi - lo));
            acc.add(b as f64 * (hi / lo).ln());
        }
    }
    acc.value() / curve.days as f64
}

/// Poisson score in the Bregman form with `phi(x) = x (ln x - 1)` and no
/// observation-only offset: `x - y ln x + y ln y - y`, with `0 ln 0 = 0`.
/// Its panel average is what the logarithmic Murphy integral reproduces; it
/// differs from `x - y ln x` by `y ln y - y`, which depends on the data only.
pub fn poisson_bregman_score(x: f64, y: u32) -> f64 {
    if y == 0 {
        return x;
    }
    if x <= 0.0 {
        return f64::INFINITY;
    }
    let yf = y as f64;
    x - yf - yf * (x / yf).ln()
}

/// Label of the curve with the lowest value at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    Model(usize),
    Tie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceProfile {
    pub thetas: Vec<f64>,
    /// `values[m][i]` is curve `m` at `thetas[i]`.
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<Dominance>,
}

/// Grid on which a set of curves can be compared: all knots, every crossing
/// of two curves inside a common segment, and the midpoint of each gap. Two
/// piecewise-affine curves cannot change order between grid points.
pub fn evaluation_grid(curves: &[MurphyCurve]) -> Vec<f64> {
    let mut knots: Vec<f64> = curves.iter().flat_map(|c| c.knots.iter().copied()).collect();
    sort_dedup(&mut knots);
    let mut grid = knots.clone();
    let mut lo = 0.0;
    for &hi in &knots {
        let mid = 0.5 * (lo + hi);
        let lines: Vec<(f64, f64)> = curves
            .iter()
            .map(|c| {
                let i = c.knots.partition_point(|&k| k < mid);
                if i == c.knots.len() {
                    (0.0, 0.0)
                } else {
                    let t = c.days as f64;
                    (c.slopes[i] as f64 / t, c.intercepts[i] as f64 / t)
                }
            })
            .collect();
        for (a, &(s1, b1)) in lines.iter().enumerate() {
            for &(s2, b2) in &lines[a + 1..] {
                if s1 != s2 {
                    let cross = (b2 - b1) / (s1 - s2);
                    if cross > lo && cross < hi {
                        grid.push(cross);
                    }
                }
            }
        }
        lo = hi;
    }
    sort_dedup(&mut grid);
    let mids: Vec<f64> = std::iter::once(0.0)
        .chain(grid.iter().copied())
        .zip(grid.iter())
        .map(|(a, &b)| 0.5 * (a + b))
        .collect();
    grid.extend(mids);
    sort_dedup(&mut grid);
    grid
}

/// Index of the lowest curve at every evaluation-grid threshold.
pub fn murphy_dominance(curves: &[MurphyCurve]) -> DominanceProfile {
    let thetas = evaluation_grid(curves);
    let values: Vec<Vec<f64>> = curves
        .par_iter()
        .map(|c| thetas.iter().map(|&t| c.eval(t)).collect())
        .collect();
    let labels = (0..thetas.len())
        .map(|i| dominant(values.iter().map(|v| v[i])))
        .collect();
    DominanceProfile { thetas, values, labels }
}

fn dominant(vals: impl Iterator<Item = f64>) -> Dominance {
    let vals: Vec<f64> = vals.collect();
    let Some(min) = vals.iter().copied().reduce(f64::min) else {
        return Dominance::Tie;
    };
    let tol = 1e-12 * min.abs().max(1.0);
    let mut winners = vals.iter().enumerate().filter(|(_, &v)| v - min <= tol);
    match (winners.next(), winners.next()) {
        (Some((i, _)), None) => Dominance::Model(i),
        _ => Dominance::Tie,
    }
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
}

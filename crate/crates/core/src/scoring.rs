//! Pointwise scoring functions for expected-count forecasts, and proper scoring
//! rules for full count distributions.
//!
//! All scores are negatively oriented. `+inf` is a legitimate value (a zero
//! forecast for a bin that saw events) and propagates through aggregates.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::CountDistribution;

/// A mean-consistent scoring function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoringFunction {
    /// `x - y ln x`.
    Poisson,
    /// `(x - y)^2`.
    Quadratic,
    /// Elementary score with decision threshold `theta > 0`.
    Elementary { theta: f64 },
    /// Extended Patton family with index `b > 0`; `b = 1` is Poisson, `b = 2` half the quadratic score.
    Patton { b: f64 },
}

impl ScoringFunction {
    pub fn elementary(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::invalid(format!(
                "elementary threshold must be positive, got {theta}"
            )));
        }
        Ok(Self::Elementary { theta })
    }

    pub fn patton(b: f64) -> Result<Self> {
        if !b.is_finite() || b <= 0.0 {
            return Err(Error::invalid(format!(
                "Patton index must be positive, got {b}: no consistent extension to count data exists for b <= 0"
            )));
        }
        Ok(Self::Patton { b })
    }

    #[inline]
    pub fn score(&self, x: f64, y: u32) -> f64 {
        match *self {
            Self::Poisson => poisson_score(x, y),
            Self::Quadratic => quadratic_score(x, y),
            Self::Elementary { theta } => elementary_score(theta, x, y as f64),
            Self::Patton { b } => patton_unchecked(b, x, y),
        }
    }

    /// Scores a spatially aggregated pair, where the observed total may exceed `u32`.
    pub fn score_total(&self, x: f64, y: u64) -> f64 {
        match u32::try_from(y) {
            Ok(y) => self.score(x, y),
            Err(_) => f64::NAN,
        }
    }
}

impl fmt::Display for ScoringFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Poisson => write!(f, "poisson"),
            Self::Quadratic => write!(f, "quadratic"),
            Self::Elementary { theta } => write!(f, "elementary:{theta}"),
            Self::Patton { b } => write!(f, "patton:{b}"),
        }
    }
}

impl FromStr for ScoringFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let parse_arg = |what: &str| -> Result<f64> {
            arg.ok_or_else(|| Error::invalid(format!("'{name}' needs a parameter, e.g. {name}:{what}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad parameter in '{s}': {e}")))
        };
        match name.to_ascii_lowercase().as_str() {
            "poisson" | "pois" => Ok(Self::Poisson),
            "quadratic" | "quad" => Ok(Self::Quadratic),
            "patton" => Self::patton(parse_arg("1.5")?),
            "elementary" => Self::elementary(parse_arg("0.01")?),
            _ => Err(Error::invalid(format!("unknown scoring function '{s}'"))),
        }
    }
}

/// Poisson score `x - y ln x`, with `S(0, 0) = 0` and `S(0, y >= 1) = +inf`.
#[inline]
pub fn poisson_score(x: f64, y: u32) -> f64 {
    if x > 0.0 {
        if y == 0 {
            x
        } else {
            x - y as f64 * x.ln()
        }
    } else if y == 0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[inline]
pub fn quadratic_score(x: f64, y: u32) -> f64 {
    let d = x - y as f64;
    d * d
}

/// Elementary score: zero when `x` and `y` fall on the same side of `theta`,
/// otherwise `|y - theta|`. Arguments are reals so the function can be checked
/// for symmetry.
#[inline]
pub fn elementary_score(theta: f64, x: f64, y: f64) -> f64 {
    if (x <= theta && y <= theta) || (x >= theta && y >= theta) {
        0.0
    } else {
        (y - theta).abs()
    }
}

/// Extended Patton score `S_b^0(x, y)` for `b > 0`.
pub fn extended_patton_score(b: f64, x: f64, y: u32) -> Result<f64> {
    ScoringFunction::patton(b)?;
    Ok(patton_unchecked(b, x, y))
}

fn patton_unchecked(b: f64, x: f64, y: u32) -> f64 {
    if b == 1.0 {
        return poisson_score(x, y);
    }
    let yf = y as f64;
    // y^b with the y = 0 branch taken explicitly rather than through 0 * inf.
    let y_pow_b = if y == 0 { 0.0 } else { yf.powf(b) };
    let shift = 0.5 * y_pow_b - 0.5 * b * yf + 0.5 * (3.0 - b);
    if x == 0.0 {
        if b > 1.0 {
            // limit x -> 0: x^b and x^(b-1) (y - x) vanish
            return 1.0 / (b * (b - 1.0)) + (yf - 1.0) / (b - 1.0) + shift;
        }
        return if y == 0 { 0.0 } else { f64::INFINITY };
    }
    // S_b(x, y) - S_b(1, y); the y^b / (b (b - 1)) terms cancel.
    let x_pow_b = x.powf(b);
    let x_pow_bm1 = x_pow_b / x;
    let raw = (1.0 - x_pow_b) / (b * (b - 1.0)) - (x_pow_bm1 * (yf - x) - (yf - 1.0)) / (b - 1.0);
    raw + shift
}

/// Logarithmic score `-ln p_y`; `+inf` when the observed count has zero mass.
pub fn log_score(p: &CountDistribution, y: u32) -> f64 {
    let mass = p.mass(y as usize);
    if mass > 0.0 {
        -mass.ln()
    } else {
        f64::INFINITY
    }
}

/// Ranked probability score in its CDF form. Terms beyond the support vanish
/// since `P_k = 1` there.
pub fn ranked_probability_score(p: &CountDistribution, y: u32) -> f64 {
    let y = y as usize;
    let mut cdf = 0.0;
    let mut total = 0.0;
    let last = p.max_count().max(y);
    for k in 0..=last {
        cdf += p.mass(k);
        let pk = if k >= p.max_count() { 1.0 } else { cdf.min(1.0) };
        total += if k < y { pk * pk } else { (1.0 - pk) * (1.0 - pk) };
    }
    total
}

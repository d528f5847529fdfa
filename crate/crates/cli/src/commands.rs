use anyhow::Result;
use chrono::NaiveDate;
use quakescore::aggregate::{
    aggregated_pairs, cumulative_difference, daily_difference, daily_scores, number_score, number_score_series,
    per_cell_mean_scores, spatial_difference_map,
};
use quakescore::calibration::{
    consistency_band, consistency_band_pairs, corp_decompose, corp_decompose_pairs, empirical_pmf, reliability_curve,
    reliability_curve_from_pairs, ConsistencyBand, Ecdf,
};
use quakescore::inference::{dm_test, information_gain, pairwise_dm, pairwise_t, weekday_indices, PairOutcome};
use quakescore::io::format_optional;
use quakescore::murphy::{log_murphy_integral, murphy_curve, murphy_dominance, Dominance};
use quakescore::synth::{
    base_pair, generate_world, ks_uniformity, null_experiment, tail_fraction, MixtureExperimentSpec, NullOutcome,
    NullTest, SyntheticWorldSpec, REFERENCE_NOISE_SD,
};
use quakescore::{DailyScoreSeries, Error, ScoringFunction, TimeIndex};
use serde_json::{json, Value};

use crate::config::{Command, ObsSource, RunConfig};
use crate::inputs::{self, Inputs};
use crate::output::{f, file_stems, num, obj, Csv, Output};
use crate::{svg, Usage};

/// Origin assigned to synthetic worlds, a Monday.
const SYNTHETIC_ORIGIN: (i32, u32, u32) = (2024, 1, 1);

pub fn run(config: &RunConfig, out: &mut Output) -> Result<()> {
    match config.command {
        Command::Score => score(config, out),
        Command::Murphy => murphy(config, out),
        Command::Dmtest => dmtest(config, out),
        Command::Ttest => ttest(config, out),
        Command::Reliability => reliability(config, out),
        Command::Decompose => decompose(config, out),
        Command::Simulate => simulate(config, out),
        Command::SpatialDiff => spatial_diff(config, out),
    }
}

fn write_binning(inputs: &Inputs, out: &mut Output) -> Result<()> {
    if let Some(r) = &inputs.binning {
        out.write_json(
            "binning.json",
            &json!({
                "binned_events": r.binned_events,
                "below_threshold": r.below_threshold,
                "outside_region": r.outside_region,
                "outside_period": r.outside_period,
                "window_events": r.observations.total(),
            }),
        )?;
    }
    Ok(())
}

fn score(config: &RunConfig, out: &mut Output) -> Result<()> {
    let inputs = inputs::load(config, 1)?;
    write_binning(&inputs, out)?;
    let s = config.score;
    let mut table = Csv::new(&[
        "model_id",
        "score",
        "total_score",
        "number_score",
        "days",
        "cells",
        "events",
    ]);
    let mut series = Vec::new();
    let mut cell_means = Vec::new();
    for fc in &inputs.forecasts {
        let daily = daily_scores(fc, &inputs.obs, s)?;
        let n = number_score(fc, &inputs.obs, s)?;
        table.row([
            fc.model_id().to_string(),
            s.to_string(),
            f(daily.total_score()),
            f(n),
            fc.days().to_string(),
            fc.cells().to_string(),
            inputs.obs.total().to_string(),
        ]);
        println!(
            "{:<24} total {:>14} number {:>14}",
            fc.model_id(),
            f(daily.total_score()),
            f(n)
        );
        series.push(daily);
        cell_means.push(per_cell_mean_scores(fc, &inputs.obs, s)?);
    }
    out.write("scores.csv", &table.finish())?;

    let ids = inputs.model_ids();
    let mut header = vec!["day", "date"];
    header.extend(ids.iter().map(String::as_str));
    let mut daily = Csv::new(&header);
    for t in 0..inputs.obs.days() {
        let mut row = vec![inputs.days[t].to_string(), inputs.date(t).to_string()];
        row.extend(series.iter().map(|s| f(s.values()[t])));
        daily.row(row);
    }
    out.write("daily_scores.csv", &daily.finish())?;

    let mut header = vec!["cell_id"];
    header.extend(ids.iter().map(String::as_str));
    let mut cells = Csv::new(&header);
    for (c, id) in inputs.grid.cell_ids().iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(cell_means.iter().map(|m| f(m[c])));
        cells.row(row);
    }
    out.write("cell_scores.csv", &cells.finish())
}

fn dominance_name(d: Dominance, ids: &[String]) -> String {
    match d {
        Dominance::Model(i) => ids[i].clone(),
        Dominance::Tie => "tie".into(),
    }
}

fn murphy(config: &RunConfig, out: &mut Output) -> Result<()> {
    let inputs = inputs::load(config, 1)?;
    write_binning(&inputs, out)?;
    let ids = inputs.model_ids();
    let curves = inputs
        .forecasts
        .iter()
        .map(|fc| murphy_curve(fc, &inputs.obs))
        .collect::<quakescore::Result<Vec<_>>>()?;
    let profile = murphy_dominance(&curves);

    let mut long = Csv::new(&["theta", "log_theta", "model_id", "value", "dominant_model"]);
    for (i, &theta) in profile.thetas.iter().enumerate() {
        let dom = dominance_name(profile.labels[i], &ids);
        for (m, id) in ids.iter().enumerate() {
            long.row([
                f(theta),
                f(theta.ln()),
                id.clone(),
                f(profile.values[m][i]),
                dom.clone(),
            ]);
        }
    }
    out.write("murphy_curves.csv", &long.finish())?;

    // maximal runs of one label over the grid
    let mut runs: Vec<(f64, f64, Dominance)> = Vec::new();
    for (i, &theta) in profile.thetas.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.2 == profile.labels[i] => r.1 = theta,
            _ => runs.push((theta, theta, profile.labels[i])),
        }
    }
    let mut bar = Csv::new(&["theta_from", "theta_to", "dominant_model"]);
    for &(a, b, d) in &runs {
        bar.row([f(a), f(b), dominance_name(d, &ids)]);
    }
    out.write("murphy_dominance.csv", &bar.finish())?;

    let days = inputs.obs.days() as f64;
    let h_offset = inputs
        .obs
        .counts()
        .iter()
        .filter(|&&y| y > 0)
        .map(|&y| {
            let y = y as f64;
            y * y.ln() - y
        })
        .sum::<f64>()
        / days;
    let mut table = Csv::new(&["model_id", "log_integral", "poisson_score", "h_offset"]);
    for (fc, curve) in inputs.forecasts.iter().zip(&curves) {
        let integral = log_murphy_integral(curve);
        let poisson = daily_scores(fc, &inputs.obs, ScoringFunction::Poisson)?.total_score();
        table.row([fc.model_id().to_string(), f(integral), f(poisson), f(h_offset)]);
        println!("{:<24} log integral {:>14}", fc.model_id(), f(integral));
    }
    out.write("murphy_integrals.csv", &table.finish())?;

    if config.emit_svg {
        let series: Vec<svg::MurphySeries> = ids
            .iter()
            .enumerate()
            .map(|(m, id)| svg::MurphySeries {
                label: id,
                points: profile
                    .thetas
                    .iter()
                    .zip(&profile.values[m])
                    .map(|(&t, &v)| (t.log10(), v))
                    .collect(),
            })
            .collect();
        let bar: Vec<(f64, f64, Option<usize>)> = runs
            .iter()
            .map(|&(a, b, d)| {
                let m = match d {
                    Dominance::Model(i) => Some(i),
                    Dominance::Tie => None,
                };
                (a.log10(), b.log10(), m)
            })
            .collect();
        out.write("murphy.svg", &svg::murphy(&series, &bar))?;
    }
    Ok(())
}

fn result_cell(outcome: &PairOutcome) -> (Value, Value, Value, Value, String) {
    match &outcome.result {
        Ok(r) => (
            num(r.statistic),
            num(r.p_value),
            num(r.two_sided_p()),
            num(r.variance_estimate),
            "ok".into(),
        ),
        Err(e) => (
            Value::Null,
            Value::Null,
            Value::Null,
            Value::Null,
            format!("degenerate: {e}"),
        ),
    }
}

/// Table layout: total scores on the diagonal, the statistic of `(j, k)`
/// above it and the one-sided p-value of the same test below it.
fn pair_matrix(totals: &[f64], outcomes: &[PairOutcome]) -> Value {
    let m = totals.len();
    let mut rows = vec![vec![Value::Null; m]; m];
    for (i, &t) in totals.iter().enumerate() {
        rows[i][i] = num(t);
    }
    for o in outcomes.iter().filter(|o| o.j < o.k) {
        let (stat, p, ..) = result_cell(o);
        rows[o.j][o.k] = stat;
        rows[o.k][o.j] = p;
    }
    Value::Array(rows.into_iter().map(Value::Array).collect())
}

fn weekday_value(config: &RunConfig) -> Value {
    config.weekday.map_or(Value::Null, |w| json!(w))
}

fn dmtest(config: &RunConfig, out: &mut Output) -> Result<()> {
    let inputs = inputs::load(config, 2)?;
    write_binning(&inputs, out)?;
    let ids = inputs.model_ids();
    let series = inputs
        .forecasts
        .iter()
        .map(|fc| daily_scores(fc, &inputs.obs, config.score))
        .collect::<quakescore::Result<Vec<DailyScoreSeries>>>()?;
    let totals: Vec<f64> = series.iter().map(DailyScoreSeries::total_score).collect();
    let outcomes = pairwise_dm(&series, config.lag);
    let pairs: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            let (stat, p, p2, var, status) = result_cell(o);
            obj([
                ("model_j", json!(ids[o.j])),
                ("model_k", json!(ids[o.k])),
                ("statistic", stat),
                ("p_value", p),
                ("two_sided_p", p2),
                ("variance_estimate", var),
                ("total_scores", json!([num(totals[o.j]), num(totals[o.k])])),
                ("status", json!(status)),
            ])
        })
        .collect();
    let doc = obj([
        ("test", json!("diebold_mariano")),
        ("score", json!(config.score.to_string())),
        ("lag", json!(config.lag)),
        ("days", json!(inputs.obs.days())),
        ("weekday", weekday_value(config)),
        ("models", json!(ids)),
        ("total_scores", Value::Array(totals.iter().map(|&t| num(t)).collect())),
        (
            "layout",
            json!("diagonal: total score; above: statistic of (row, column); below: one-sided p of (column, row)"),
        ),
        ("matrix", pair_matrix(&totals, &outcomes)),
        ("pairs", Value::Array(pairs)),
    ]);
    out.write_json("dm_matrix.json", &doc)?;

    let mut cum = Csv::new(&[
        "model_j",
        "model_k",
        "day",
        "date",
        "cumulative",
        "normalized",
        "events",
    ]);
    for j in 0..series.len() {
        for k in j + 1..series.len() {
            let Ok(d) = daily_difference(&series[j], &series[k]) else {
                continue;
            };
            let c = cumulative_difference(&d, &inputs.obs)?;
            for t in 0..d.len() {
                cum.row([
                    ids[j].clone(),
                    ids[k].clone(),
                    inputs.days[t].to_string(),
                    inputs.date(t).to_string(),
                    f(c.cumulative[t]),
                    format_optional(c.normalized[t]),
                    c.event_counts[t].to_string(),
                ]);
            }
        }
    }
    out.write("cumulative_differences.csv", &cum.finish())?;
    print_pairs(&ids, &outcomes);
    Ok(())
}

fn print_pairs(ids: &[String], outcomes: &[PairOutcome]) {
    for o in outcomes.iter().filter(|o| o.j < o.k) {
        match &o.result {
            Ok(r) => println!(
                "{} vs {}: statistic {} p {}",
                ids[o.j],
                ids[o.k],
                f(r.statistic),
                f(r.p_value)
            ),
            Err(e) => println!("{} vs {}: {e}", ids[o.j], ids[o.k]),
        }
    }
}

fn ttest(config: &RunConfig, out: &mut Output) -> Result<()> {
    let inputs = inputs::load(config, 2)?;
    write_binning(&inputs, out)?;
    let ids = inputs.model_ids();
    let series = inputs
        .forecasts
        .iter()
        .map(|fc| daily_scores(fc, &inputs.obs, ScoringFunction::Poisson))
        .collect::<quakescore::Result<Vec<DailyScoreSeries>>>()?;
    let totals: Vec<f64> = series.iter().map(DailyScoreSeries::total_score).collect();
    let outcomes = pairwise_t(&inputs.forecasts, &inputs.obs);
    let pairs: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            let (stat, p, p2, var, status) = result_cell(o);
            let (ig, igpe) = match information_gain(&series[o.j], &series[o.k], &inputs.obs) {
                Ok(g) => (num(g.ig), num(g.igpe)),
                Err(_) => (Value::Null, Value::Null),
            };
            let dof = o.result.as_ref().map_or(Value::Null, |r| json!(r.lag_or_dof));
            obj([
                ("model_j", json!(ids[o.j])),
                ("model_k", json!(ids[o.k])),
                ("statistic", stat),
                ("p_value", p),
                ("two_sided_p", p2),
                ("variance_estimate", var),
                ("degrees_of_freedom", dof),
                ("information_gain", ig),
                ("information_gain_per_event", igpe),
                ("total_scores", json!([num(totals[o.j]), num(totals[o.k])])),
                ("status", json!(status)),
            ])
        })
        .collect();
    let doc = obj([
        ("test", json!("csep_t")),
        ("score", json!("poisson")),
        ("days", json!(inputs.obs.days())),
        ("events", json!(inputs.obs.total())),
        ("weekday", weekday_value(config)),
        ("models", json!(ids)),
        ("total_scores", Value::Array(totals.iter().map(|&t| num(t)).collect())),
        (
            "layout",
            json!("diagonal: total score; above: statistic of (row, column); below: one-sided p of (column, row)"),
        ),
        ("matrix", pair_matrix(&totals, &outcomes)),
        ("pairs", Value::Array(pairs)),
    ]);
    out.write_json("ttest_matrix.json", &doc)?;
    print_pairs(&ids, &outcomes);
    Ok(())
}

fn decomposition_json(model: &str, scoring: ScoringFunction, n: usize, d: &quakescore::ScoreDecomposition) -> Value {
    obj([
        ("model_id", json!(model)),
        ("scoring", json!(scoring.to_string())),
        ("n", json!(n)),
        ("score", num(d.score)),
        ("mcb", num(d.mcb)),
        ("dsc", num(d.dsc)),
        ("unc", num(d.unc)),
    ])
}

/// Case pairs of one model: cell-days, or daily totals when aggregated.
fn cases(config: &RunConfig, inputs: &Inputs, m: usize) -> Result<(Vec<f64>, Vec<u64>)> {
    let fc = &inputs.forecasts[m];
    if config.aggregated {
        Ok(aggregated_pairs(fc, &inputs.obs)?)
    } else {
        Ok((
            fc.values().to_vec(),
            inputs.obs.counts().iter().map(|&v| v as u64).collect(),
        ))
    }
}

fn reliability(config: &RunConfig, out: &mut Output) -> Result<()> {
    let inputs = inputs::load(config, 1)?;
    write_binning(&inputs, out)?;
    let ids = inputs.model_ids();
    let stems = file_stems(&ids);
    for (m, fc) in inputs.forecasts.iter().enumerate() {
        let ecdf = Ecdf::new(cases(config, &inputs, m)?.0)?;
        let (curve, band, dec, n) = if config.aggregated {
            let (x, y) = cases(config, &inputs, m)?;
            let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
            let y32 = y
                .iter()
                .map(|&v| u32::try_from(v).map_err(|_| Error::Invalid(format!("daily total {v} is too large"))))
                .collect::<quakescore::Result<Vec<u32>>>()?;
            let base = empirical_pmf(&y32)?;
            (
                reliability_curve_from_pairs(&x, &yf, Some(&ecdf))?,
                consistency_band_pairs(&x, &base, config.level, config.replicates, config.seed)?,
                corp_decompose_pairs(&x, &y, config.score)?,
                x.len(),
            )
        } else {
            (
                reliability_curve(fc, &inputs.obs, Some(&ecdf))?,
                consistency_band(fc, &inputs.obs, config.level, config.replicates, config.seed)?,
                corp_decompose(fc, &inputs.obs, config.score)?,
                fc.values().len(),
            )
        };
        let x_ecdf = curve.x_ecdf.clone().unwrap_or_default();
        let x_hat_ecdf = curve.x_hat_ecdf.clone().unwrap_or_default();
        let mut csv = Csv::new(&["x", "x_hat", "x_ecdf", "x_hat_ecdf", "band_lo", "band_hi"]);
        for i in 0..curve.x.len() {
            csv.row([
                f(curve.x[i]),
                f(curve.x_hat[i]),
                f(x_ecdf[i]),
                f(x_hat_ecdf[i]),
                f(band.lower[i]),
                f(band.upper[i]),
            ]);
        }
        let stem = &stems[m];
        out.write(&format!("reliability_{stem}.csv"), &csv.finish())?;
        out.write_json(
            &format!("decomposition_{stem}.json"),
            &decomposition_json(&ids[m], config.score, n, &dec),
        )?;
        out.write(
            &format!("histogram_{stem}.csv"),
            &histogram(&cases(config, &inputs, m)?.0),
        )?;
        println!(
            "{:<24} score {} mcb {} dsc {} unc {}",
            ids[m],
            f(dec.score),
            f(dec.mcb),
            f(dec.dsc),
            f(dec.unc)
        );
        if config.emit_svg {
            out.write(
                &format!("reliability_{stem}.svg"),
                &reliability_svg(&ids[m], &curve, &band, &ecdf, &x_ecdf),
            )?;
        }
    }
    Ok(())
}

fn reliability_svg(
    label: &str,
    curve: &quakescore::ReliabilityCurve,
    band: &ConsistencyBand,
    ecdf: &Ecdf,
    x_ecdf: &[f64],
) -> String {
    let pts: Vec<(f64, f64)> = x_ecdf
        .iter()
        .zip(curve.x_hat_ecdf.as_deref().unwrap_or_default())
        .map(|(&a, &b)| (a, b))
        .collect();
    let band_pts: Vec<(f64, f64, f64)> = x_ecdf
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, ecdf.eval(band.lower[i]), ecdf.eval(band.upper[i])))
        .collect();
    let max = curve.x.last().copied().unwrap_or(0.0);
    let mut ticks: Vec<(f64, String)> = [0.0, 1e-7, 1e-6, 1e-5, 1e-4]
        .iter()
        .filter(|&&v| v <= max)
        .map(|&v| {
            (
                ecdf.eval(v),
                if v == 0.0 { "0".to_string() } else { format!("{v:.0e}") },
            )
        })
        .collect();
    ticks.push((1.0, format!("{max:.2e}")));
    svg::reliability(label, &pts, &band_pts, ticks)
}

/// Counts of forecast values per decade, with zeros in their own bin.
fn histogram(x: &[f64]) -> String {
    let zeros = x.iter().filter(|&&v| v == 0.0).count();
    let mut csv = Csv::new(&["lower", "upper", "count"]);
    csv.row([f(0.0), f(0.0), zeros.to_string()]);
    let logs: Vec<i32> = x
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|v| v.log10().floor() as i32)
        .collect();
    if let (Some(&lo), Some(&hi)) = (logs.iter().min(), logs.iter().max()) {
        for e in lo..=hi {
            let count = logs.iter().filter(|&&l| l == e).count();
            csv.row([f(10f64.powi(e)), f(10f64.powi(e + 1)), count.to_string()]);
        }
    }
    csv.finish()
}

fn decompose(config: &RunConfig, out: &mut Output) -> Result<()> {
    let inputs = inputs::load(config, 1)?;
    write_binning(&inputs, out)?;
    let ids = inputs.model_ids();
    let mut table = Csv::new(&["model_id", "scoring", "n", "score", "mcb", "dsc", "unc"]);
    let mut rows = Vec::new();
    for (m, id) in ids.iter().enumerate() {
        let (x, y) = cases(config, &inputs, m)?;
        let d = corp_decompose_pairs(&x, &y, config.score)?;
        table.row([
            id.clone(),
            config.score.to_string(),
            x.len().to_string(),
            f(d.score),
            f(d.mcb),
            f(d.dsc),
            f(d.unc),
        ]);
        rows.push(d);
    }
    out.write("decomposition.csv", &table.finish())?;

    let series = inputs
        .forecasts
        .iter()
        .map(|fc| {
            if config.aggregated {
                number_score_series(fc, &inputs.obs, config.score)
            } else {
                daily_scores(fc, &inputs.obs, config.score)
            }
        })
        .collect::<quakescore::Result<Vec<_>>>()?;
    let mut pairs_csv = Csv::new(&["model_a", "model_b", "two_sided_p"]);
    let mut dotted = Vec::new();
    for j in 0..ids.len() {
        for k in j + 1..ids.len() {
            if let Ok(r) = dm_test(&series[j], &series[k], config.lag) {
                let p2 = r.two_sided_p();
                if p2 >= 0.10 {
                    pairs_csv.row([ids[j].clone(), ids[k].clone(), f(p2)]);
                    dotted.push((j, k));
                }
            }
        }
    }
    out.write("decomposition_pairs.csv", &pairs_csv.finish())?;
    for (id, d) in ids.iter().zip(&rows) {
        println!(
            "{:<24} score {} mcb {} dsc {} unc {}",
            id,
            f(d.score),
            f(d.mcb),
            f(d.dsc),
            f(d.unc)
        );
    }
    if config.emit_svg {
        let points: Vec<svg::McbDscPoint> = ids
            .iter()
            .zip(&rows)
            .map(|(id, d)| svg::McbDscPoint {
                label: id,
                mcb: d.mcb,
                dsc: d.dsc,
            })
            .collect();
        out.write("mcb_dsc.svg", &svg::mcb_dsc(&points, rows[0].unc, &dotted))?;
    }
    Ok(())
}

fn outcomes_csv(outcomes: &[NullOutcome]) -> String {
    let mut csv = Csv::new(&["replicate", "p_value", "statistic", "status"]);
    for o in outcomes {
        match &o.result {
            Ok(r) => csv.row([o.replicate.to_string(), f(r.p_value), f(r.statistic), "ok".to_string()]),
            Err(e) => csv.row([o.replicate.to_string(), String::new(), String::new(), e.clone()]),
        }
    }
    csv.finish()
}

fn null_summary(outcomes: &[NullOutcome]) -> Value {
    let p: Vec<f64> = outcomes.iter().filter_map(NullOutcome::p_value).collect();
    let ks = ks_uniformity(&p).ok();
    obj([
        ("replicates", json!(outcomes.len())),
        ("completed", json!(p.len())),
        ("failed", json!(outcomes.len() - p.len())),
        ("ks_statistic", ks.map_or(Value::Null, |k| num(k.statistic))),
        ("ks_p_value", ks.map_or(Value::Null, |k| num(k.p_value))),
        ("fraction_below_0.05", num(tail_fraction(&p, 0.05, 1.0))),
        ("fraction_above_0.95", num(tail_fraction(&p, 0.0, 0.95))),
        ("fraction_outside_0.05_0.95", num(tail_fraction(&p, 0.05, 0.95))),
    ])
}

fn simulate(config: &RunConfig, out: &mut Output) -> Result<()> {
    let (base_a, base_b, obs, time, world) = match (config.forecasts.len(), &config.obs) {
        (0, ObsSource::None) => {
            let spec = SyntheticWorldSpec::reference(config.seed);
            let world = generate_world(&spec)?;
            let (a, b) = base_pair(&spec, &world, REFERENCE_NOISE_SD)?;
            let (y, m, d) = SYNTHETIC_ORIGIN;
            let origin = NaiveDate::from_ymd_opt(y, m, d).expect("valid date");
            let time = TimeIndex::new(origin, spec.days, spec.window_length as u32)?;
            let info = json!({
                "cells": spec.cells(),
                "days": spec.days,
                "window_length": spec.window_length,
                "unique_events": world.unique_events,
                "window_events": world.observations.total(),
            });
            (a, b, world.observations, time, Some(info))
        }
        (2, ObsSource::Panel(_) | ObsSource::Catalog { .. }) => {
            let no_weekday = RunConfig {
                weekday: None,
                ..config.clone()
            };
            let inputs = inputs::load(&no_weekday, 2)?;
            write_binning(&inputs, out)?;
            let mut f = inputs.forecasts.into_iter();
            (f.next().unwrap(), f.next().unwrap(), inputs.obs, inputs.time, None)
        }
        _ => return Err(Usage(
            "simulate takes either no inputs (synthetic reference world) or two --forecast panels with observations"
                .into(),
        )
        .into()),
    };
    let days = config.weekday.map(|w| weekday_indices(&time, w)).transpose()?;
    let spec = MixtureExperimentSpec {
        base_a,
        base_b,
        replicates: config.replicates,
        seed: config.seed,
        days,
    };
    let dm = null_experiment(&spec, &obs, NullTest::DieboldMariano { lag: config.lag })?;
    let t = null_experiment(&spec, &obs, NullTest::CsepT)?;
    out.write("simulate_dm.csv", &outcomes_csv(&dm))?;
    out.write("simulate_ttest.csv", &outcomes_csv(&t))?;
    let summary = obj([
        ("replicates", json!(config.replicates)),
        ("seed", json!(config.seed)),
        ("lag", json!(config.lag)),
        ("weekday", weekday_value(config)),
        ("world", world.unwrap_or(Value::Null)),
        ("diebold_mariano", null_summary(&dm)),
        ("csep_t", null_summary(&t)),
    ]);
    out.write_json("simulate_summary.json", &summary)?;
    for (name, key) in [("DM", "diebold_mariano"), ("T-test", "csep_t")] {
        println!("{name:<7} {}", summary[key]);
    }
    Ok(())
}

fn spatial_diff(config: &RunConfig, out: &mut Output) -> Result<()> {
    if config.forecasts.len() != 2 {
        return Err(Usage(format!(
            "spatial-diff needs exactly two --forecast panels, got {}",
            config.forecasts.len()
        ))
        .into());
    }
    let inputs = inputs::load(config, 2)?;
    write_binning(&inputs, out)?;
    let map = spatial_difference_map(&inputs.forecasts[0], &inputs.forecasts[1], &inputs.obs, config.score)?;
    let mut csv = Csv::new(&["cell_id", "delta", "defined"]);
    for (id, d) in inputs.grid.cell_ids().iter().zip(&map) {
        csv.row([id.clone(), format_optional(*d), d.is_some().to_string()]);
    }
    out.write("spatial_diff.csv", &csv.finish())?;
    let undefined = map.iter().filter(|d| d.is_none()).count();
    println!("{} cells, {undefined} undefined", map.len());
    Ok(())
}

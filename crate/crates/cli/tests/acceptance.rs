//! Acceptance criteria 1-10. Prints one line per criterion and exits nonzero
//! if any fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use quakescore::aggregate::{daily_scores, number_score_series};
use quakescore::calibration::{
    consistency_band, corp_decompose, pav_recalibrate, reliability_curve, tilt_bound, tilted_distribution,
};
use quakescore::inference::information_gain;
use quakescore::io::{save_forecast, save_observations};
use quakescore::murphy::{log_murphy_integral, murphy_curve};
use quakescore::scoring::{extended_patton_score, poisson_score, quadratic_score};
use quakescore::synth::{
    base_pair, generate_world, ks_uniformity, null_experiment, tail_fraction, CountFamily, NullTest, REFERENCE_NOISE_SD,
};
use quakescore::{
    CountDistribution, ForecastPanel, MixtureExperimentSpec, ObservationPanel, ScoringFunction, SyntheticWorldSpec,
    TimeIndex,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Random panels from Poisson and negative-binomial worlds with positive forecasts.
fn random_panels(n: usize, seed: u64) -> Vec<(Vec<ForecastPanel>, ObservationPanel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let cells = rng.random_range(1..=50);
            let days = rng.random_range(1..=100);
            let window = if rng.random_bool(0.5) { 1 } else { 7 };
            let total = rng.random_range(0.2..30.0);
            let family = if i % 2 == 0 {
                CountFamily::Poisson
            } else {
                CountFamily::NegativeBinomial {
                    dispersion: rng.random_range(0.3..5.0),
                }
            };
            let spec = SyntheticWorldSpec {
                family,
                ..SyntheticWorldSpec::heterogeneous(cells, days, window, total, 1.0, rng.random())
            };
            let world = generate_world(&spec).unwrap();
            let (smooth, spiky) = base_pair(&spec, &world, rng.random_range(0.1..1.5)).unwrap();
            (vec![smooth, spiky, world.mean], world.observations)
        })
        .collect()
}

fn corp_identity() -> Outcome {
    let scorings = [
        ScoringFunction::Poisson,
        ScoringFunction::Quadratic,
        ScoringFunction::Patton { b: 1.5 },
    ];
    let (mut worst, mut min_part, mut cases) = (0.0f64, f64::INFINITY, 0);
    for (forecasts, obs) in random_panels(100, 1) {
        for f in &forecasts {
            for &s in &scorings {
                let d = corp_decompose(f, &obs, s).unwrap();
                worst = worst.max((d.score - (d.mcb - d.dsc + d.unc)).abs());
                min_part = min_part.min(d.mcb).min(d.dsc);
                cases += 1;
            }
        }
    }
    outcome(
        worst < 1e-10 && min_part >= -1e-12,
        format!("{cases} decompositions, max |S - (MCB - DSC + UNC)| = {worst:.2e}, min(MCB, DSC) = {min_part:.2e}"),
    )
}

fn murphy_integral() -> Outcome {
    let mut worst = 0.0f64;
    let panels = random_panels(50, 2);
    for (forecasts, obs) in &panels {
        for f in forecasts {
            let mut oracle = 0.0;
            for (&x, &y) in f.values().iter().zip(obs.counts()) {
                assert!(x > 0.0);
                let y = y as f64;
                let yly = if y > 0.0 { y * y.ln() } else { 0.0 };
                oracle += x - y * x.ln() + yly - y;
            }
            oracle /= f.days() as f64;
            let got = log_murphy_integral(&murphy_curve(f, obs).unwrap());
            worst = worst.max((got - oracle).abs());
        }
    }
    outcome(
        worst < 1e-8,
        format!(
            "{} curves, max |integral - mean Bregman score| = {worst:.2e}",
            panels.len() * 3
        ),
    )
}

/// Isotonic fit through the min-max formula: the value of tie group i is
/// max over a <= i of min over b >= i of the mean of groups a..=b.
/// Returned as exact fractions (sum, count).
fn minmax_isotonic(x: &[f64], y: &[u32]) -> Vec<(i64, i64)> {
    let mut levels: Vec<f64> = x.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut sums = vec![0i64; levels.len()];
    let mut counts = vec![0i64; levels.len()];
    for (&xi, &yi) in x.iter().zip(y) {
        let g = levels.partition_point(|&l| l < xi);
        sums[g] += yi as i64;
        counts[g] += 1;
    }
    let g = levels.len();
    let less = |a: (i64, i64), b: (i64, i64)| a.0 * b.1 < b.0 * a.1;
    let fitted: Vec<(i64, i64)> = (0..g)
        .map(|i| {
            let mut best: Option<(i64, i64)> = None;
            for a in 0..=i {
                let mut inner: Option<(i64, i64)> = None;
                for b in i..g {
                    let m = (sums[a..=b].iter().sum(), counts[a..=b].iter().sum());
                    if inner.is_none_or(|v| less(m, v)) {
                        inner = Some(m);
                    }
                }
                let inner = inner.unwrap();
                if best.is_none_or(|v| less(v, inner)) {
                    best = Some(inner);
                }
            }
            best.unwrap()
        })
        .collect();
    x.iter()
        .map(|&xi| fitted[levels.partition_point(|&l| l < xi)])
        .collect()
}

fn pav_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let instances = 20_000;
    let mut mismatches = 0;
    for i in 0..instances {
        let n = rng.random_range(1..=10);
        let x: Vec<f64> = if i % 2 == 0 {
            (0..n).map(|_| rng.random_range(0..5) as f64 * 0.25).collect()
        } else {
            (0..n).map(|_| rng.random::<f64>()).collect()
        };
        let y: Vec<u32> = (0..n).map(|_| rng.random_range(0..=3)).collect();
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let got = pav_recalibrate(&x, &yf).unwrap().fitted();
        let want: Vec<f64> = minmax_isotonic(&x, &y)
            .iter()
            .map(|&(s, c)| s as f64 / c as f64)
            .collect();
        if got != want {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{instances} instances, {mismatches} mismatches"),
    )
}

fn patton_nesting() -> Outcome {
    let mut worst = 0.0f64;
    let mut cells = 0;
    for i in 0..200 {
        let x = if i == 0 {
            0.0
        } else {
            10f64.powf(-4.0 + 6.0 * i as f64 / 199.0)
        };
        for y in 0..=10u32 {
            let pairs = [
                (extended_patton_score(1.0, x, y).unwrap(), poisson_score(x, y)),
                (extended_patton_score(2.0, x, y).unwrap(), 0.5 * quadratic_score(x, y)),
            ];
            for (a, b) in pairs {
                let dev = if a == b { 0.0 } else { (a - b).abs() };
                worst = worst.max(if dev.is_nan() { f64::INFINITY } else { dev });
            }
            cells += 1;
        }
    }
    outcome(
        worst < 1e-12,
        format!("{cells} grid points, max deviation = {worst:.2e}"),
    )
}

// Reported OEF-Italy rows against LM (T = 5514, N_T = 1834): model, mean score, difference, IG, IGPE.
const REPORTED_IG: [(&str, f64, f64, f64, f64); 5] = [
    ("LM", 2.71, 0.000, 0.000, 0.000),
    ("FCM", 2.80, 0.084, 463.572, 0.253),
    ("LG", 3.02, 0.308, 1697.038, 0.925),
    ("SMA", 2.73, 0.020, 111.393, 0.061),
    ("LRWA", 2.69, -0.018, -96.795, -0.053),
];

fn information_gain_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for (forecasts, obs) in random_panels(50, 5) {
        if obs.total() == 0 {
            continue;
        }
        let series: Vec<_> = forecasts
            .iter()
            .map(|f| daily_scores(f, &obs, ScoringFunction::Poisson).unwrap())
            .collect();
        for j in 0..forecasts.len() {
            for k in 0..forecasts.len() {
                let mut double_sum = 0.0;
                for ((&xj, &xk), &y) in forecasts[j]
                    .values()
                    .iter()
                    .zip(forecasts[k].values())
                    .zip(obs.counts())
                {
                    double_sum += y as f64 * (xk.ln() - xj.ln()) - (xk - xj);
                }
                let t = obs.days() as f64;
                let via_scores = t * (series[j].total_score() - series[k].total_score());
                let ig = information_gain(&series[j], &series[k], &obs).unwrap().ig;
                worst = worst.max((double_sum - via_scores).abs()).max((ig - double_sum).abs());
                pairs += 1;
            }
        }
    }
    let (t, n) = (5514.0, 1834.0);
    let lm = REPORTED_IG[0].1;
    let mut table_ok = true;
    let mut literal = 0.0f64;
    for &(_, s, diff, ig, igpe) in &REPORTED_IG {
        table_ok &= (ig / t - diff).abs() <= 5e-4 && (ig / n - igpe).abs() <= 5e-4 && ((s - lm) - diff).abs() <= 0.01;
        literal = literal.max((ig - t * diff).abs());
    }
    outcome(
        worst < 1e-10 && table_ok,
        format!(
            "{pairs} pairs, max |double sum - T diff| = {worst:.2e}; table rows consistent to half a unit in the last digit: {table_ok} \
             (largest |IG - T diff| from rounded columns = {literal:.3})"
        ),
    )
}

struct NullRun {
    dm: Vec<f64>,
    t: Vec<f64>,
    elapsed: Duration,
}

fn null_run() -> NullRun {
    let start = Instant::now();
    let spec = SyntheticWorldSpec::reference(1);
    let world = generate_world(&spec).unwrap();
    let (smooth, spiky) = base_pair(&spec, &world, REFERENCE_NOISE_SD).unwrap();
    let mix = MixtureExperimentSpec {
        base_a: smooth,
        base_b: spiky,
        replicates: 400,
        seed: 101,
        days: None,
    };
    let p = |test| -> Vec<f64> {
        null_experiment(&mix, &world.observations, test)
            .unwrap()
            .iter()
            .filter_map(|o| o.p_value())
            .collect()
    };
    let dm = p(NullTest::DieboldMariano { lag: 6 });
    let t = p(NullTest::CsepT);
    NullRun {
        dm,
        t,
        elapsed: start.elapsed(),
    }
}

fn dm_null(run: &NullRun) -> Outcome {
    let ks = ks_uniformity(&run.dm).unwrap();
    let low = tail_fraction(&run.dm, 0.05, 1.0);
    outcome(
        run.dm.len() == 400 && ks.p_value > 0.01 && (0.02..=0.09).contains(&low),
        format!(
            "{} p-values, KS D = {:.4}, KS p = {:.3}, fraction p < 0.05 = {low:.4}",
            run.dm.len(),
            ks.statistic,
            ks.p_value
        ),
    )
}

fn t_null(run: &NullRun) -> Outcome {
    let tails = tail_fraction(&run.t, 0.05, 0.95);
    outcome(
        run.t.len() == 400 && tails > 0.20,
        format!(
            "{} p-values, below 0.05 = {:.4}, above 0.95 = {:.4}, combined = {tails:.4}",
            run.t.len(),
            tail_fraction(&run.t, 0.05, 1.0),
            tail_fraction(&run.t, 0.0, 0.95)
        ),
    )
}

/// Forecast levels spread below the tilting bound of `q`, each with the cdf of its tilt.
fn calibrated_levels(q: &CountDistribution, levels: usize) -> Vec<(f64, Vec<f64>)> {
    let bound = tilt_bound(q);
    (0..levels)
        .map(|i| {
            let x = bound * (i as f64 + 1.0) / (levels as f64 + 1.0);
            let tilted = tilted_distribution(q, x).unwrap();
            let mut acc = 0.0;
            let cdf = tilted.pmf().iter().map(|p| {
                acc += p;
                acc
            });
            (x, cdf.collect())
        })
        .collect()
}

fn draw(cdf: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32
}

fn band_coverage() -> Outcome {
    let q = CountDistribution::new(vec![0.7, 0.2, 0.07, 0.03]).unwrap();
    let (levels, per, trials) = (10, 300, 200);
    let table = calibrated_levels(&q, levels);
    let x: Vec<f64> = table.iter().flat_map(|(v, _)| std::iter::repeat_n(*v, per)).collect();
    let f = ForecastPanel::new("calibrated", x.len(), 1, x.clone()).unwrap();
    let mid = levels / 2;
    let (mut below, mut above) = (0, 0);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial as u64);
        let y: Vec<u32> = (0..x.len()).map(|i| draw(&table[i / per].1, &mut rng)).collect();
        let obs = ObservationPanel::new(x.len(), 1, y).unwrap();
        let band = consistency_band(&f, &obs, 0.9, 1000, trial as u64).unwrap();
        let v = reliability_curve(&f, &obs, None).unwrap().x_hat[mid];
        below += usize::from(v < band.lower[mid]);
        above += usize::from(v > band.upper[mid]);
    }
    let rate = (below + above) as f64 / trials as f64;
    outcome(
        (0.06..=0.14).contains(&rate),
        format!(
            "{trials} trials at x = {:.4}: escaped {} times ({below} below, {above} above), rate {rate:.3}",
            table[mid].0,
            below + above
        ),
    )
}

fn no_event_days() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (cells, days) = (37, 1000);
    let ln = LogNormal::new(-4.0, 2.0).unwrap();
    let x: Vec<f64> = (0..cells * days).map(|_| ln.sample(&mut rng)).collect();
    let f = ForecastPanel::new("m", cells, days, x.clone()).unwrap();
    let obs = ObservationPanel::new(cells, days, vec![0; cells * days]).unwrap();
    let daily = daily_scores(&f, &obs, ScoringFunction::Poisson).unwrap();
    let number = number_score_series(&f, &obs, ScoringFunction::Poisson).unwrap();
    let mut worst = 0.0f64;
    for t in 0..days {
        let sum: f64 = x[t * cells..(t + 1) * cells].iter().sum();
        worst = worst
            .max((daily.values()[t] - sum).abs())
            .max((number.values()[t] - sum).abs());
    }
    outcome(
        worst < 1e-10,
        format!("{days} days, max |daily - number|, |daily - sum x| = {worst:.2e}"),
    )
}

/// Two-model calibrated panel for the reliability command, written beside the fixture.
fn write_calibrated(fx: &Fixture) -> (String, String, String) {
    let q = CountDistribution::new(vec![0.8, 0.15, 0.05]).unwrap();
    let table = calibrated_levels(&q, 6);
    let (cells, days) = (12, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let levels: Vec<usize> = (0..cells * days).map(|_| rng.random_range(0..table.len())).collect();
    let x: Vec<f64> = levels.iter().map(|&l| table[l].0).collect();
    let y: Vec<u32> = levels.iter().map(|&l| draw(&table[l].1, &mut rng)).collect();
    let half: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
    let time = TimeIndex::new(fx.time.origin(), days, 1).unwrap();
    let g = grid(cells);
    let paths = ["calibrated.csv", "half.csv", "calibrated_obs.csv"].map(|n| fx.path(n).to_string_lossy().into_owned());
    save_forecast(
        Path::new(&paths[0]),
        &ForecastPanel::new("calibrated", cells, days, x).unwrap(),
        &g,
        &time,
    )
    .unwrap();
    save_forecast(
        Path::new(&paths[1]),
        &ForecastPanel::new("half", cells, days, half).unwrap(),
        &g,
        &time,
    )
    .unwrap();
    save_observations(
        Path::new(&paths[2]),
        &ObservationPanel::new(cells, days, y).unwrap(),
        &g,
        &time,
    )
    .unwrap();
    let [a, b, c] = paths;
    (a, b, c)
}

fn determinism() -> Outcome {
    let fx = fixture(25, 60, 7, 21);
    let (cal, half, cal_obs) = write_calibrated(&fx);
    let catalog = fx.catalog.to_string_lossy().into_owned();
    let grid = fx.grid.to_string_lossy().into_owned();
    let three = [
        "--forecast",
        fx.forecast_str(0),
        "--forecast",
        fx.forecast_str(1),
        "--forecast",
        fx.forecast_str(2),
    ];
    let from_catalog = [
        "--catalog",
        catalog.as_str(),
        "--grid",
        grid.as_str(),
        "--mag-threshold",
        "3.0",
    ];
    let obs = ["--obs", fx.obs_str()];
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("score", [&three[..], &obs].concat()),
        ("murphy", [&three[..], &from_catalog, &["--emit-svg"]].concat()),
        ("dmtest", [&three[..], &obs].concat()),
        ("ttest", [&three[..], &from_catalog].concat()),
        (
            "reliability",
            vec![
                "--forecast",
                &cal,
                "--forecast",
                &half,
                "--obs",
                &cal_obs,
                "--replicates",
                "200",
                "--seed",
                "7",
                "--emit-svg",
            ],
        ),
        ("decompose", [&three[..], &obs, &["--emit-svg"]].concat()),
        (
            "simulate",
            [&three[..2 * 2], &obs, &["--replicates", "60", "--seed", "3"]].concat(),
        ),
        ("spatial-diff", [&three[..4], &obs].concat()),
    ];
    let mut lines = Vec::new();
    let mut pass = true;
    for (cmd, rest) in runs {
        let out = fx.path(&format!("det-{cmd}"));
        let out_str = out.to_string_lossy().into_owned();
        let mut args = vec![cmd];
        args.extend(rest);
        args.extend(["--out", out_str.as_str()]);
        let mut hashes = Vec::new();
        for _ in 0..2 {
            let r = quakescore(&args);
            if code(&r) != 0 {
                pass = false;
                lines.push(format!(
                    "    {cmd}: exit {} {}",
                    code(&r),
                    String::from_utf8_lossy(&r.stderr).trim()
                ));
            }
            hashes.push(hash_dir(&out));
        }
        let same = hashes[0] == hashes[1] && !hashes[0].is_empty();
        pass &= same;
        for (name, h) in &hashes[0] {
            lines.push(format!("    {cmd:<12} {name:<36} {}", &h[..16]));
        }
        if !same {
            lines.push(format!("    {cmd}: outputs differ between runs"));
        }
    }
    outcome(
        pass,
        format!(
            "8 commands run twice, all outputs byte-identical: {pass}\n{}",
            lines.join("\n")
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize,
                      name: &str,
                      limit: Option<Duration>,
                      run: &dyn Fn() -> Outcome,
                      elapsed_override: Option<Duration>| {
        let start = Instant::now();
        let o = run();
        let elapsed = elapsed_override.unwrap_or_else(|| start.elapsed());
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = o.pass && in_time;
        failures += usize::from(!pass);
        let limit_note = limit.map_or(String::new(), |l| format!(" / limit {:.0} s", l.as_secs_f64()));
        let tag = if pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {n:>2}. {name}: {} ({:.2} s{limit_note})",
            o.detail,
            elapsed.as_secs_f64()
        );
        if o.pass && !in_time {
            println!("       runtime limit exceeded");
        }
    };
    let secs = Duration::from_secs;
    report(1, "CORP identity", Some(secs(10)), &corp_identity, None);
    report(2, "Murphy integral identity", Some(secs(10)), &murphy_integral, None);
    report(3, "PAV oracle equivalence", Some(secs(30)), &pav_oracle, None);
    report(4, "Patton nesting", Some(secs(1)), &patton_nesting, None);
    report(5, "IG equivalence", None, &information_gain_equivalence, None);
    let null = null_run();
    report(
        6,
        "DM null calibration",
        Some(secs(300)),
        &|| dm_null(&null),
        Some(null.elapsed),
    );
    report(
        7,
        "T-test miscalibration",
        Some(secs(300)),
        &|| t_null(&null),
        Some(null.elapsed),
    );
    report(8, "Consistency-band coverage", Some(secs(600)), &band_coverage, None);
    report(9, "No-event day identity", None, &no_event_days, None);
    report(10, "Determinism", None, &determinism, None);
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

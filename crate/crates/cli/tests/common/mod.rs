#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use chrono::{Duration, NaiveDate};
use quakescore::io::{save_catalog, save_forecast, save_grid, save_observations};
use quakescore::synth::{base_pair, generate_world, Burst, SyntheticWorldSpec};
use quakescore::{Catalog, CellBox, Event, ForecastPanel, GridSpec, ObservationPanel, TimeIndex};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

pub const ORIGIN: (i32, u32, u32) = (2012, 1, 2);

pub struct Fixture {
    pub dir: TempDir,
    pub grid: PathBuf,
    pub time: TimeIndex,
    /// `smooth`, `spiky` and `truth` panels.
    pub forecasts: Vec<PathBuf>,
    pub panels: Vec<ForecastPanel>,
    pub obs: PathBuf,
    pub observations: ObservationPanel,
    /// Events that bin exactly onto `obs` at threshold 3.0, plus rejects.
    pub catalog: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn forecast_str(&self, i: usize) -> &str {
        self.forecasts[i].to_str().unwrap()
    }

    pub fn obs_str(&self) -> &str {
        self.obs.to_str().unwrap()
    }
}

pub fn grid(cells: usize) -> GridSpec {
    let ids = (0..cells).map(|i| format!("cell{i:03}")).collect();
    let boxes = (0..cells)
        .map(|i| CellBox::new(i as f64, i as f64 + 1.0, 40.0, 41.0).unwrap())
        .collect();
    GridSpec::with_geometry(ids, boxes).unwrap()
}

pub fn fixture(cells: usize, days: usize, window: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticWorldSpec {
        burst: Some(Burst {
            probability: 0.1,
            factor: 20.0,
        }),
        ..SyntheticWorldSpec::heterogeneous(cells, days, window, 0.2 * cells as f64, 1.0, seed)
    };
    let world = generate_world(&spec).unwrap();
    let (smooth, spiky) = base_pair(&spec, &world, 1.0).unwrap();
    let truth = world.mean.clone().with_model_id("truth");
    let (y, m, d) = ORIGIN;
    let time = TimeIndex::new(NaiveDate::from_ymd_opt(y, m, d).unwrap(), days, window as u32).unwrap();
    let g = grid(cells);
    let grid_path = dir.path().join("grid.csv");
    save_grid(&grid_path, &g).unwrap();
    let panels = vec![smooth, spiky, truth];
    let mut forecasts = Vec::new();
    for p in &panels {
        let path = dir.path().join(format!("{}.csv", p.model_id()));
        save_forecast(&path, p, &g, &time).unwrap();
        forecasts.push(path);
    }
    let obs = dir.path().join("obs.csv");
    save_observations(&obs, &world.observations, &g, &time).unwrap();

    let mut events = Vec::new();
    for day in 0..days + window - 1 {
        for c in 0..cells {
            let at = (time.origin() + Duration::days(day as i64))
                .and_hms_opt(12, 0, 0)
                .unwrap();
            for _ in 0..world.daily_events[day * cells + c] {
                events.push(Event {
                    time: at,
                    lon: c as f64 + 0.5,
                    lat: 40.5,
                    magnitude: 4.0,
                });
            }
            if (day + c) % 17 == 0 {
                events.push(Event {
                    time: at,
                    lon: c as f64 + 0.5,
                    lat: 40.5,
                    magnitude: 2.5,
                });
            }
        }
        if day % 5 == 0 {
            let at = (time.origin() + Duration::days(day as i64))
                .and_hms_opt(3, 0, 0)
                .unwrap();
            events.push(Event {
                time: at,
                lon: -3.0,
                lat: 40.5,
                magnitude: 5.0,
            });
        }
    }
    let catalog = dir.path().join("catalog.csv");
    save_catalog(&catalog, &Catalog::new(events).unwrap()).unwrap();

    Fixture {
        dir,
        grid: grid_path,
        time,
        forecasts,
        panels,
        obs,
        observations: world.observations,
        catalog,
    }
}

pub fn quakescore(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_quakescore"))
        .args(args)
        .env("QUAKESCORE_THREADS", "2")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// `(file name, sha256)` of every file in `dir`, sorted by name.
pub fn hash_dir(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let digest = Sha256::digest(std::fs::read(&p).unwrap());
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                hex::encode(digest),
            )
        })
        .collect();
    v.sort();
    v
}

pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

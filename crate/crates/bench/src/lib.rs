//! Seeded fixtures shared by the benchmarks.

use quakescore::{ForecastPanel, ObservationPanel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};

/// A log-normal rate panel and Poisson counts drawn from it.
pub fn fixture(cells: usize, days: usize, seed: u64) -> (ForecastPanel, ObservationPanel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates = LogNormal::new(-6.0, 1.5).unwrap();
    let x: Vec<f64> = (0..cells * days).map(|_| rates.sample(&mut rng)).collect();
    let y: Vec<u32> = x
        .iter()
        .map(|&m| Poisson::new(m * 20.0).unwrap().sample(&mut rng) as u32)
        .collect();
    (
        ForecastPanel::new("bench", cells, days, x).unwrap(),
        ObservationPanel::new(cells, days, y).unwrap(),
    )
}

/// A second forecast for the same panel shape, with independent noise.
pub fn rival(base: &ForecastPanel, seed: u64) -> ForecastPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = LogNormal::new(-0.125, 0.5).unwrap();
    let v = base.values().iter().map(|&x| x * noise.sample(&mut rng)).collect();
    ForecastPanel::new("rival", base.cells(), base.days(), v).unwrap()
}

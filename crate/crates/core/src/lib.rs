//! Consistent scoring, comparative testing and calibration diagnostics for
//! gridded expected-count earthquake forecasts.
//!
//! Forecasts are `C x T` panels of expected counts, observations the matching
//! panels of realized counts. The modules build on each other:
//!
//! - [`scoring`]: pointwise scoring functions and distributional scores
//! - [`aggregate`]: daily, total and number scores, cumulative and spatial differences
//! - [`murphy`]: exact Murphy curves and their logarithmic integrals
//! - [`inference`]: Diebold-Mariano test, information gain, CSEP T-test
//! - [`calibration`]: PAV recalibration, reliability curves, CORP decomposition, consistency bands
//! - [`synth`]: synthetic worlds and the exchangeable-mixture null experiment
//! - [`io`]: panel, grid and catalog files, catalog binning

pub mod aggregate;
pub mod calibration;
pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod murphy;
pub mod numeric;
pub mod scoring;
pub mod synth;

pub use aggregate::{DailyScoreSeries, ScoreSummary};
pub use calibration::{ConsistencyBand, PavResult, ReliabilityCurve, ScoreDecomposition};
pub use error::{Error, Result};
pub use inference::{InformationGain, TestKind, TestResult};
pub use model::{Catalog, CellBox, CountDistribution, Event, ForecastPanel, GridSpec, ObservationPanel, TimeIndex};
pub use murphy::{Dominance, MurphyCurve};
pub use scoring::ScoringFunction;
pub use synth::{MixtureExperimentSpec, SyntheticWorldSpec};

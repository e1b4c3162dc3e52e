//! The ensemble-GPR pipeline: window the history into Monday-aligned weeks,
//! form the ensemble from the N weeks preceding the target, estimate prior
//! statistics, and condition on the target week's observed day.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::{ForecastResult, GpError, JitterPolicy, JointGaussian};
use crate::stats::{ensemble_covariance, ensemble_mean, StatsError, WeeklyEnsemble};
use crate::timeseries::{
    extract_window, slice_weeks, DayOfWeek, HourlyTimeseries, TimeseriesError, WindowLayout,
};

#[derive(Debug, Error)]
pub enum EgprError {
    #[error("ensemble size must be at least 2, got {n}")]
    EnsembleTooSmall { n: usize },
    #[error(
        "insufficient history: target week {target} needs {needed} preceding weeks, \
         history holds {available} aligned weeks"
    )]
    InsufficientHistory {
        target: usize,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    Timeseries(#[from] TimeseriesError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Ensemble size and window layout for one forecast.
#[derive(Debug, Clone, Copy)]
pub struct EgprConfig {
    pub ensemble_size: usize,
    pub layout: WindowLayout,
    pub jitter: JitterPolicy,
}

impl EgprConfig {
    /// Default ensemble size for a layout: 20 when the observation day is
    /// Monday (hours 1..=24), 10 otherwise.
    pub fn default_ensemble_size(layout: &WindowLayout) -> usize {
        if *layout == WindowLayout::monday() {
            20
        } else {
            10
        }
    }

    pub fn new(layout: WindowLayout) -> Self {
        Self {
            ensemble_size: Self::default_ensemble_size(&layout),
            layout,
            jitter: JitterPolicy::default(),
        }
    }

    pub fn with_ensemble_size(mut self, n: usize) -> Self {
        self.ensemble_size = n;
        self
    }
}

/// Monday-aligned week anchor used throughout the pipeline.
pub const WEEK_ANCHOR: DayOfWeek = DayOfWeek::Monday;

/// Forms the ensemble from the `N` aligned weeks immediately preceding
/// `target_week_index`. The target week itself is never included.
pub fn build_ensemble(
    history: &HourlyTimeseries,
    target_week_index: usize,
    cfg: &EgprConfig,
) -> Result<WeeklyEnsemble, EgprError> {
    let n = cfg.ensemble_size;
    if n < 2 {
        return Err(EgprError::EnsembleTooSmall { n });
    }
    let weeks = slice_weeks(history, WEEK_ANCHOR)?;
    if target_week_index < n || target_week_index >= weeks.len() {
        return Err(EgprError::InsufficientHistory {
            target: target_week_index,
            needed: n,
            available: weeks.len(),
        });
    }
    let ensemble_weeks = &weeks[target_week_index - n..target_week_index];
    Ok(WeeklyEnsemble::from_weeks(ensemble_weeks, cfg.layout)?)
}

/// EGPR forecast of the target week's forecast hours, conditioned on the
/// target week's own observed hours.
pub fn forecast(
    history: &HourlyTimeseries,
    target_week_index: usize,
    cfg: &EgprConfig,
) -> Result<ForecastResult, EgprError> {
    let ensemble = build_ensemble(history, target_week_index, cfg)?;
    let prior = ensemble_covariance(&ensemble);
    let model = JointGaussian::new(prior, cfg.jitter)?;
    let weeks = slice_weeks(history, WEEK_ANCHOR)?;
    let (obs, _) = extract_window(&weeks[target_week_index], &cfg.layout)?;
    let obs = nalgebra::DVector::from_column_slice(&obs);
    Ok(model.condition(&obs)?)
}

/// Plot-ready bundle for one forecast: posterior mean with ±2σ band, prior
/// mean, reference truth, and the ensemble rows that produced the prior.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ForecastReport {
    pub target_week_index: usize,
    /// 1-based hour-of-week indices of the forecast grid.
    pub fcst_hours: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub prior_mean: Vec<f64>,
    /// The target week's actual forecast-hour values.
    pub reference: Vec<f64>,
    pub ensemble: Vec<Vec<f64>>,
}

/// Runs [`forecast`] and bundles everything needed for plotting.
pub fn forecast_report(
    history: &HourlyTimeseries,
    target_week_index: usize,
    cfg: &EgprConfig,
) -> Result<ForecastReport, EgprError> {
    let ensemble = build_ensemble(history, target_week_index, cfg)?;
    let (_, prior_mean_fcst) = ensemble_mean(&ensemble);
    let prior = ensemble_covariance(&ensemble);
    let model = JointGaussian::new(prior, cfg.jitter)?;
    let weeks = slice_weeks(history, WEEK_ANCHOR)?;
    let (obs, reference) = extract_window(&weeks[target_week_index], &cfg.layout)?;
    let result = model.condition(&nalgebra::DVector::from_column_slice(&obs))?;

    let mean: Vec<f64> = result.mean.iter().copied().collect();
    let std: Vec<f64> = result.std.iter().copied().collect();
    let lower = mean.iter().zip(&std).map(|(m, s)| m - 2.0 * s).collect();
    let upper = mean.iter().zip(&std).map(|(m, s)| m + 2.0 * s).collect();
    Ok(ForecastReport {
        target_week_index,
        fcst_hours: cfg.layout.fcst_hours(),
        mean,
        std,
        lower,
        upper,
        prior_mean: prior_mean_fcst.iter().copied().collect(),
        reference,
        ensemble: ensemble.rows(),
    })
}

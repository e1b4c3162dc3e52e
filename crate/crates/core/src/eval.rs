//! Error metrics and the three-way comparison harness (EGPR vs standard GPR
//! vs ARI) with each method's default training protocol.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    arima_forecast, fit_arima, gpr_se_forecast, select_order, BaselineError,
};
use crate::egpr::{build_ensemble, EgprConfig, EgprError, WEEK_ANCHOR};
use crate::gp::{JitterPolicy, JointGaussian, KernelForm};
use crate::stats::{ensemble_covariance, ensemble_mean};
use crate::timeseries::{
    extract_window, slice_weeks, week_start_index, HourlyTimeseries, TimeseriesError,
    WindowLayout, DAY_HOURS, WEEK_HOURS,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("vector length mismatch: {expected} vs {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("metric input is empty")]
    Empty,
    #[error("reference value at index {index} is zero; MAPE is undefined")]
    ZeroReference { index: usize },
    #[error(
        "method {method} needs {needed} hours of history before week {week}, only {available} available"
    )]
    InsufficientTraining {
        method: String,
        week: usize,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    Egpr(#[from] EgprError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Timeseries(#[from] TimeseriesError),
}

/// Mean absolute percentage error, in percent.
pub fn mape(forecast: &[f64], reference: &[f64]) -> Result<f64, EvalError> {
    check_pair(forecast, reference)?;
    if let Some(index) = reference.iter().position(|r| *r == 0.0) {
        return Err(EvalError::ZeroReference { index });
    }
    let sum: f64 = forecast
        .iter()
        .zip(reference)
        .map(|(f, r)| (f - r).abs() / r.abs())
        .sum();
    Ok(100.0 * sum / forecast.len() as f64)
}

/// Root mean square error.
pub fn rmse(forecast: &[f64], reference: &[f64]) -> Result<f64, EvalError> {
    check_pair(forecast, reference)?;
    let sum: f64 = forecast
        .iter()
        .zip(reference)
        .map(|(f, r)| (f - r).powi(2))
        .sum();
    Ok((sum / forecast.len() as f64).sqrt())
}

/// Largest absolute forecast error.
pub fn max_abs_error(forecast: &[f64], reference: &[f64]) -> Result<f64, EvalError> {
    check_pair(forecast, reference)?;
    Ok(forecast
        .iter()
        .zip(reference)
        .map(|(f, r)| (f - r).abs())
        .fold(0.0, f64::max))
}

/// `mean |forecast − prior| / mean |reference − prior|`: near 0 means the
/// forecast sits on the prior mean regardless of the truth. 0/0 is 0 (the
/// forecast trivially equals a prior that equals the truth); x/0 is +∞.
pub fn collapse_index(
    forecast: &[f64],
    reference: &[f64],
    prior_mean: &[f64],
) -> Result<f64, EvalError> {
    check_pair(forecast, reference)?;
    check_pair(forecast, prior_mean)?;
    let num: f64 = forecast
        .iter()
        .zip(prior_mean)
        .map(|(f, p)| (f - p).abs())
        .sum::<f64>()
        / forecast.len() as f64;
    let den: f64 = reference
        .iter()
        .zip(prior_mean)
        .map(|(r, p)| (r - p).abs())
        .sum::<f64>()
        / reference.len() as f64;
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(), EvalError> {
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// The three comparison methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodKind {
    Egpr,
    GprSe,
    Arima,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::Egpr, MethodKind::GprSe, MethodKind::Arima];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Egpr => "egpr",
            MethodKind::GprSe => "gpr-se",
            MethodKind::Arima => "arima",
        }
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "egpr" => Ok(MethodKind::Egpr),
            "gpr-se" | "gpr" => Ok(MethodKind::GprSe),
            "arima" => Ok(MethodKind::Arima),
            other => Err(format!("unknown method `{other}` (expected egpr, gpr-se or arima)")),
        }
    }
}

/// One method's forecast and error metrics on a target week.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MethodRecord {
    pub mean: Vec<f64>,
    /// Per-hour forecast standard deviation; `None` for methods without an
    /// uncertainty contract.
    pub std: Option<Vec<f64>>,
    pub prior_mean: Vec<f64>,
    pub mape: f64,
    pub rmse: f64,
    pub max_abs_error: f64,
    pub collapse_index: f64,
}

/// Per-method result slot: a failed method is recorded, not fatal to the
/// batch.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MethodOutcome {
    Success { record: MethodRecord },
    Failed { message: String },
}

/// Comparison of all requested methods on one (week, layout) cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComparisonReport {
    /// 0-based Monday-aligned week index.
    pub target_week: usize,
    pub layout: WindowLayout,
    /// 1-based hour-of-week indices of the forecast grid.
    pub fcst_hours: Vec<usize>,
    pub reference: Vec<f64>,
    /// Keyed by method name, so iteration order is deterministic.
    pub methods: BTreeMap<String, MethodOutcome>,
}

/// Maximum AR order offered to `select_order` in the default protocol.
pub const ARIMA_P_MAX: usize = 24;
/// Differencing depth in the default protocol.
pub const ARIMA_D: usize = 1;

/// Runs one method with its default protocol on one target week.
///
/// `ensemble_size` applies to EGPR only; `None` selects the layout default
/// (20 for the Monday layout, 10 otherwise). Standard GPR trains on the 168
/// hours preceding the target week; ARI trains on `fcst_days + 1` days
/// ending at the forecast start.
pub fn method_forecast(
    history: &HourlyTimeseries,
    target_week: usize,
    layout: WindowLayout,
    ensemble_size: Option<usize>,
    method: MethodKind,
) -> Result<MethodRecord, EvalError> {
    let weeks = slice_weeks(history, WEEK_ANCHOR)?;
    if target_week >= weeks.len() {
        return Err(EvalError::Egpr(EgprError::InsufficientHistory {
            target: target_week,
            needed: 1,
            available: weeks.len(),
        }));
    }
    let (_, reference) = extract_window(&weeks[target_week], &layout)?;
    let week_start = week_start_index(history, WEEK_ANCHOR, target_week);
    let vals = history.values();

    let (mean, std, prior_mean) = match method {
        MethodKind::Egpr => {
            let mut cfg = EgprConfig::new(layout);
            if let Some(n) = ensemble_size {
                cfg = cfg.with_ensemble_size(n);
            }
            let ensemble = build_ensemble(history, target_week, &cfg)?;
            let (_, prior_fcst) = ensemble_mean(&ensemble);
            let prior = ensemble_covariance(&ensemble);
            let model = JointGaussian::new(prior, cfg.jitter).map_err(EgprError::from)?;
            let (obs, _) = extract_window(&weeks[target_week], &layout)?;
            let result = model
                .condition(&nalgebra::DVector::from_column_slice(&obs))
                .map_err(EgprError::from)?;
            (
                result.mean.iter().copied().collect::<Vec<_>>(),
                Some(result.std.iter().copied().collect::<Vec<_>>()),
                prior_fcst.iter().copied().collect::<Vec<_>>(),
            )
        }
        MethodKind::GprSe => {
            if week_start < WEEK_HOURS {
                return Err(EvalError::InsufficientTraining {
                    method: method.name().to_string(),
                    week: target_week,
                    needed: WEEK_HOURS,
                    available: week_start,
                });
            }
            let train = &vals[week_start - WEEK_HOURS..week_start];
            let train_grid: Vec<f64> = (week_start - WEEK_HOURS..week_start)
                .map(|i| i as f64)
                .collect();
            let fcst_grid: Vec<f64> = layout
                .fcst_range()
                .map(|h| (week_start + h) as f64)
                .collect();
            let (result, fit) = gpr_se_forecast(
                train,
                &train_grid,
                &fcst_grid,
                KernelForm::default(),
                JitterPolicy::default(),
            )?;
            (
                result.mean.iter().copied().collect::<Vec<_>>(),
                Some(result.std.iter().copied().collect::<Vec<_>>()),
                vec![fit.const_mean; fcst_grid.len()],
            )
        }
        MethodKind::Arima => {
            let horizon = layout.fcst_len();
            let fcst_start = week_start + layout.fcst_range().start;
            let train_len = (horizon / DAY_HOURS + 1) * DAY_HOURS;
            if fcst_start < train_len {
                return Err(EvalError::InsufficientTraining {
                    method: method.name().to_string(),
                    week: target_week,
                    needed: train_len,
                    available: fcst_start,
                });
            }
            let train = &vals[fcst_start - train_len..fcst_start];
            let p = select_order(train, ARIMA_P_MAX, ARIMA_D)?;
            let model = fit_arima(train, p, ARIMA_D)?;
            let (mean, std) = arima_forecast(&model, train, horizon)?;
            let train_mean = train.iter().sum::<f64>() / train.len() as f64;
            (mean, Some(std), vec![train_mean; horizon])
        }
    };

    Ok(MethodRecord {
        mape: mape(&mean, &reference)?,
        rmse: rmse(&mean, &reference)?,
        max_abs_error: max_abs_error(&mean, &reference)?,
        collapse_index: collapse_index(&mean, &reference, &prior_mean)?,
        mean,
        std,
        prior_mean,
    })
}

/// Runs every requested method on every (week, layout) cell. Reports come
/// back sorted by week, then by the layouts' given order; methods are keyed
/// by name inside each report. Method failures are captured per record.
pub fn run_comparison(
    history: &HourlyTimeseries,
    target_weeks: &[usize],
    layouts: &[WindowLayout],
    methods: &[MethodKind],
    ensemble_size: Option<usize>,
) -> Result<Vec<ComparisonReport>, EvalError> {
    let weeks = slice_weeks(history, WEEK_ANCHOR)?;
    let mut sorted_weeks = target_weeks.to_vec();
    sorted_weeks.sort_unstable();
    sorted_weeks.dedup();

    let mut reports = Vec::new();
    for &tw in &sorted_weeks {
        for layout in layouts {
            if tw >= weeks.len() {
                return Err(EvalError::Egpr(EgprError::InsufficientHistory {
                    target: tw,
                    needed: 1,
                    available: weeks.len(),
                }));
            }
            let (_, reference) = extract_window(&weeks[tw], layout)?;
            let mut records = BTreeMap::new();
            for &method in methods {
                let outcome = match method_forecast(history, tw, *layout, ensemble_size, method)
                {
                    Ok(record) => MethodOutcome::Success { record },
                    Err(e) => MethodOutcome::Failed {
                        message: e.to_string(),
                    },
                };
                records.insert(method.name().to_string(), outcome);
            }
            reports.push(ComparisonReport {
                target_week: tw,
                layout: *layout,
                fcst_hours: layout.fcst_hours(),
                reference: reference.clone(),
                methods: records,
            });
        }
    }
    Ok(reports)
}

//! Week-ahead electric load and generator-schedule forecasting.
//!
//! The centerpiece is ensemble Gaussian process regression: the prior mean
//! and covariance of a week-long load window are estimated from an ensemble
//! of preceding weekly realizations, and the remaining hours of the target
//! week are forecast by conditioning that joint Gaussian on the target
//! week's observed day. Standard SE-kernel GPR and an ARI model are included
//! as baselines, together with a seeded synthetic dataset generator and a
//! comparison harness.

pub use nalgebra;

pub mod baselines;
pub mod egpr;
pub mod eval;
pub mod gp;
pub mod linalg;
pub mod stats;
pub mod synth;
pub mod timeseries;

pub use baselines::{ArimaModel, BaselineError};
pub use egpr::{EgprConfig, EgprError, ForecastReport};
pub use eval::{ComparisonReport, EvalError, MethodKind, MethodOutcome, MethodRecord};
pub use gp::{ForecastResult, GpError, JitterPolicy, JointGaussian, KernelForm, SEKernelParams};
pub use stats::{PriorStatistics, StatsError, WeeklyEnsemble};
pub use synth::{SynthConfig, SynthError};
pub use timeseries::{
    DayOfWeek, HourlyTimeseries, TimeseriesError, WindowLayout, DAY_HOURS, WEEK_HOURS,
};

//! Comparison methods: standard GPR with a fitted SE kernel, and a
//! nonseasonal autoregressive integrated (ARI) model fitted by conditional
//! least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::{
    fit_se_hyperparameters, se_kernel_matrix, ForecastResult, GpError, JitterPolicy,
    JointGaussian, KernelForm, SeFit,
};
use crate::linalg::Cholesky;
use crate::stats::PriorStatistics;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("insufficient training data: {len} samples, need more than {min}")]
    InsufficientData { len: usize, min: usize },
    #[error("regression matrix is singular at order p={p} (leading minor {minor})")]
    SingularRegression { p: usize, minor: usize },
    #[error("p_max {p_max} must satisfy p_max >= 1 and p_max < train length / 3 ({limit})")]
    BadOrderBound { p_max: usize, limit: usize },
    #[error("forecast needs a training tail of at least p + d = {min} values, got {len}")]
    TailTooShort { len: usize, min: usize },
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Standard-GPR forecast: SE hyperparameters fitted on the training window by
/// marginal-likelihood maximization, then Gaussian conditioning over the
/// train/forecast grids.
pub fn gpr_se_forecast(
    train: &[f64],
    train_grid: &[f64],
    fcst_grid: &[f64],
    form: KernelForm,
    jitter: JitterPolicy,
) -> Result<(ForecastResult, SeFit), BaselineError> {
    let fit = fit_se_hyperparameters(train, train_grid, form)?;
    let k_oo = se_kernel_matrix(train_grid, train_grid, &fit.params, form);
    let k_of = se_kernel_matrix(train_grid, fcst_grid, &fit.params, form);
    let k_ff = se_kernel_matrix(fcst_grid, fcst_grid, &fit.params, form);
    let prior = PriorStatistics {
        mean_obs: DVector::from_element(train_grid.len(), fit.const_mean),
        mean_fcst: DVector::from_element(fcst_grid.len(), fit.const_mean),
        k_oo,
        k_of,
        k_ff,
        layout: None,
    };
    let model = JointGaussian::new(prior, jitter)?;
    let result = model.condition(&DVector::from_column_slice(train))?;
    Ok((result, fit))
}

/// Fitted ARI model: AR order p on the d-times differenced series, q fixed
/// at 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArimaModel {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub intercept: f64,
    pub residual_variance: f64,
}

/// Applies `d` rounds of first differencing. Returns the differenced series
/// and the head value dropped at each level, in application order.
pub fn difference(series: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut w = series.to_vec();
    let mut heads = Vec::with_capacity(d);
    for _ in 0..d {
        heads.push(w[0]);
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    (w, heads)
}

/// Inverse of [`difference`]: reintegrates using the stored head values.
pub fn integrate(diffed: &[f64], heads: &[f64]) -> Vec<f64> {
    let mut w = diffed.to_vec();
    for head in heads.iter().rev() {
        let mut out = Vec::with_capacity(w.len() + 1);
        out.push(*head);
        for v in &w {
            let next = out.last().unwrap() + v;
            out.push(next);
        }
        w = out;
    }
    w
}

fn sample_stats(w: &[f64]) -> (f64, f64) {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = if w.len() > 1 {
        w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Fits AR(p) with intercept on the d-times differenced series by conditional
/// least squares (regression of x_t on x_{t−1..t−p}).
pub fn fit_arima(train: &[f64], p: usize, d: usize) -> Result<ArimaModel, BaselineError> {
    if train.len() <= p + d + 1 {
        return Err(BaselineError::InsufficientData {
            len: train.len(),
            min: p + d + 1,
        });
    }
    let (w, _) = difference(train, d);
    let (mean, var) = sample_stats(&w);

    // Zero-variance differenced series (e.g. a ramp after d=1): the
    // regression is exactly collinear; the mean model is the fit.
    if p == 0 || var <= 1e-24 * (1.0 + mean * mean) {
        return Ok(ArimaModel {
            p,
            d,
            q: 0,
            ar_coeffs: vec![0.0; p],
            ma_coeffs: vec![],
            intercept: mean,
            residual_variance: var,
        });
    }

    let rows = w.len() - p;
    let cols = p + 1;
    let mut x = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    for t in 0..rows {
        x[(t, 0)] = 1.0;
        for j in 0..p {
            x[(t, j + 1)] = w[p + t - 1 - j];
        }
        y[t] = w[p + t];
    }
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let chol = Cholesky::new(&xtx)
        .map_err(|minor| BaselineError::SingularRegression { p, minor })?;
    let beta = chol.solve_vec(&xty);
    let resid = &y - &x * &beta;
    let dof = rows.saturating_sub(cols).max(1) as f64;
    Ok(ArimaModel {
        p,
        d,
        q: 0,
        ar_coeffs: beta.iter().skip(1).copied().collect(),
        ma_coeffs: vec![],
        intercept: beta[0],
        residual_variance: resid.dot(&resid) / dof,
    })
}

/// Iterates the AR recursion on the differenced scale, reintegrates, and
/// accumulates forecast variance through the psi weights of
/// `φ(B)·(1−B)^d`.
pub fn arima_forecast(
    model: &ArimaModel,
    train_tail: &[f64],
    horizon: usize,
) -> Result<(Vec<f64>, Vec<f64>), BaselineError> {
    let min = model.p + model.d;
    if train_tail.len() < min.max(1) {
        return Err(BaselineError::TailTooShort {
            len: train_tail.len(),
            min,
        });
    }
    if horizon == 0 {
        return Ok((vec![], vec![]));
    }

    // difference the tail, remembering the last value at each level for
    // reintegration
    let mut w = train_tail.to_vec();
    let mut lasts = Vec::with_capacity(model.d);
    for _ in 0..model.d {
        lasts.push(*w.last().unwrap());
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }

    let mut seq = w;
    let mut diffed_fcst = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut v = model.intercept;
        for (j, phi) in model.ar_coeffs.iter().enumerate() {
            let idx = seq.len() as i64 - 1 - j as i64;
            if idx >= 0 {
                v += phi * seq[idx as usize];
            }
        }
        seq.push(v);
        diffed_fcst.push(v);
    }

    let mut mean = diffed_fcst;
    for last in lasts.iter().rev() {
        let mut acc = *last;
        for v in &mut mean {
            acc += *v;
            *v = acc;
        }
    }

    // psi weights of the integrated model: phi*(B) = phi(B) (1-B)^d
    let mut ar_poly = vec![1.0];
    ar_poly.extend(model.ar_coeffs.iter().map(|c| -c));
    let mut full = ar_poly;
    for _ in 0..model.d {
        full = poly_mul(&full, &[1.0, -1.0]);
    }
    let phistar: Vec<f64> = full.iter().skip(1).map(|c| -c).collect();
    let mut psi = vec![1.0];
    for j in 1..horizon {
        let mut s = 0.0;
        for i in 1..=j.min(phistar.len()) {
            s += phistar[i - 1] * psi[j - i];
        }
        psi.push(s);
    }
    let mut acc = 0.0;
    let std = psi
        .iter()
        .map(|p| {
            acc += p * p;
            (model.residual_variance * acc).sqrt()
        })
        .collect();
    Ok((mean, std))
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Selects the AR order p in [1, p_max] minimizing
/// `AIC = n·log(residual variance) + 2p` on the differenced series.
pub fn select_order(train: &[f64], p_max: usize, d: usize) -> Result<usize, BaselineError> {
    let limit = train.len() / 3;
    if p_max == 0 || p_max >= limit {
        return Err(BaselineError::BadOrderBound { p_max, limit });
    }
    let mut best: Option<(f64, usize)> = None;
    for p in 1..=p_max {
        let model = fit_arima(train, p, d)?;
        let n = (train.len() - d - p) as f64;
        let aic = n * model.residual_variance.max(1e-300).ln() + 2.0 * p as f64;
        if best.map_or(true, |(b, _)| aic < b) {
            best = Some((aic, p));
        }
    }
    Ok(best.unwrap().1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn ramp_with_d1_reduces_to_mean_model() {
        let train: Vec<f64> = (0..50).map(|t| 2.5 * t as f64 + 7.0).collect();
        let model = fit_arima(&train, 3, 1).unwrap();
        assert_relative_eq!(model.intercept, 2.5, max_relative = 1e-9);
        for c in &model.ar_coeffs {
            assert!(c.abs() < 1e-9);
        }
        assert!(model.residual_variance < 1e-12);
    }

    #[test]
    fn degenerate_order_is_sample_stats() {
        let train = vec![1.0, 2.0, 4.0, 3.0, 5.0, 2.0];
        let model = fit_arima(&train, 0, 0).unwrap();
        let (mean, var) = sample_stats(&train);
        assert_relative_eq!(model.intercept, mean);
        assert_relative_eq!(model.residual_variance, var);
    }

    #[test]
    fn ar2_recovery_single_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (phi1, phi2) = (0.5, -0.3);
        let mut x = vec![0.0, 0.0];
        for _ in 0..1000 {
            let e: f64 = rng.sample(StandardNormal);
            let v = phi1 * x[x.len() - 1] + phi2 * x[x.len() - 2] + e;
            x.push(v);
        }
        let model = fit_arima(&x[2..], 2, 0).unwrap();
        assert!((model.ar_coeffs[0] - phi1).abs() < 0.1);
        assert!((model.ar_coeffs[1] - phi2).abs() < 0.1);
    }

    #[test]
    fn ar1_forecast_decays_geometrically() {
        let model = ArimaModel {
            p: 1,
            d: 0,
            q: 0,
            ar_coeffs: vec![0.5],
            ma_coeffs: vec![],
            intercept: 0.0,
            residual_variance: 1.0,
        };
        let (mean, std) = arima_forecast(&model, &[8.0], 4).unwrap();
        assert_eq!(mean, vec![4.0, 2.0, 1.0, 0.5]);
        // psi = (1, 0.5, 0.25, ...): variance accumulates
        assert_relative_eq!(std[0], 1.0);
        assert_relative_eq!(std[1], (1.0 + 0.25f64).sqrt());
    }

    #[test]
    fn random_walk_forecast_is_flat() {
        let model = ArimaModel {
            p: 0,
            d: 1,
            q: 0,
            ar_coeffs: vec![],
            ma_coeffs: vec![],
            intercept: 0.0,
            residual_variance: 4.0,
        };
        let (mean, std) = arima_forecast(&model, &[3.0, 5.0, 4.5], 3).unwrap();
        assert_eq!(mean, vec![4.5, 4.5, 4.5]);
        // random-walk std grows like sqrt(h)
        assert_relative_eq!(std[0], 2.0);
        assert_relative_eq!(std[2], 2.0 * 3.0f64.sqrt());
        assert!(std[0] <= std[1] && std[1] <= std[2]);
    }

    #[test]
    fn horizon_zero_returns_empty() {
        let model = fit_arima(&[1.0, 2.0, 1.5, 2.5, 1.0, 3.0], 1, 0).unwrap();
        let (mean, std) = arima_forecast(&model, &[3.0], 0).unwrap();
        assert!(mean.is_empty() && std.is_empty());
    }

    #[test]
    fn stationary_forecast_converges_to_process_mean() {
        // AR(1) with phi=0.6, intercept 2: long-run mean 2/(1-0.6) = 5
        let model = ArimaModel {
            p: 1,
            d: 0,
            q: 0,
            ar_coeffs: vec![0.6],
            ma_coeffs: vec![],
            intercept: 2.0,
            residual_variance: 1.0,
        };
        let (mean, _) = arima_forecast(&model, &[20.0], 500).unwrap();
        assert!((mean[499] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn select_order_forced_to_one() {
        let train: Vec<f64> = (0..30).map(|t| ((t * 7) % 13) as f64).collect();
        assert_eq!(select_order(&train, 1, 0).unwrap(), 1);
    }

    #[test]
    fn select_order_bound_validated() {
        let train = vec![1.0; 30];
        assert!(select_order(&train, 10, 0).is_err()); // 10 >= 30/3
        assert!(select_order(&train, 0, 0).is_err());
    }

    #[test]
    fn difference_integrate_identity() {
        let series: Vec<f64> = (0..200)
            .map(|t| 9000.0 + 2000.0 * (t as f64 * 0.26).sin())
            .collect();
        for d in [0, 1, 2] {
            let (w, heads) = difference(&series, d);
            assert_eq!(integrate(&w, &heads), series, "d={d}");
        }
    }

    #[test]
    fn gpr_se_interpolates_training_points() {
        let grid: Vec<f64> = (0..24).map(|t| t as f64).collect();
        let train: Vec<f64> = grid.iter().map(|t| 5.0 + (t * 0.9).sin()).collect();
        let (result, _) = gpr_se_forecast(
            &train,
            &grid,
            &[10.0],
            KernelForm::AbsoluteLag,
            JitterPolicy::default(),
        )
        .unwrap();
        assert_relative_eq!(result.mean[0], train[10], max_relative = 1e-6);
    }

    #[test]
    fn gpr_se_collapses_far_from_training() {
        let grid: Vec<f64> = (0..48).map(|t| t as f64).collect();
        let train: Vec<f64> = grid.iter().map(|t| 100.0 + 10.0 * (t * 0.7).sin()).collect();
        let fit = fit_se_hyperparameters(&train, &grid, KernelForm::AbsoluteLag).unwrap();
        // place the query far enough that the kernel is numerically zero
        let far = 47.0 + 60.0 * fit.params.gamma() * fit.params.gamma();
        let (result, fit) = gpr_se_forecast(
            &train,
            &grid,
            &[far],
            KernelForm::AbsoluteLag,
            JitterPolicy::default(),
        )
        .unwrap();
        let sigma = fit.params.sigma();
        assert!((result.mean[0] - fit.const_mean).abs() < 1e-6 * sigma);
        // posterior std approaches the prior amplitude
        assert!((result.std[0] - sigma).abs() < 1e-3 * sigma);
    }

    #[test]
    fn train_too_short_rejected() {
        assert!(matches!(
            fit_arima(&[1.0, 2.0], 3, 1),
            Err(BaselineError::InsufficientData { .. })
        ));
    }
}

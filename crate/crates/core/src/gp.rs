//! Gaussian conditioning core: posterior mean/covariance, the SE kernel,
//! log marginal likelihood and hyperparameter fitting.
//!
//! Solves go through a cached Cholesky factor of `K_oo + jitter·I`; the
//! observation covariance is never inverted explicitly. Ensemble covariances
//! are rank-deficient by construction (rank ≤ N−1), so a small diagonal
//! jitter is applied by default and doubled on factorization failure.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Cholesky;
use crate::stats::PriorStatistics;
use crate::timeseries::WindowLayout;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("Cholesky factorization failed at leading minor {minor} (jitter {jitter:e})")]
    Factorization { minor: usize, jitter: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("training series too short: {len} samples, need at least {min}")]
    TrainTooShort { len: usize, min: usize },
}

/// Diagonal jitter added to `K_oo` before factorization.
///
/// `initial = None` means `1e-8 · trace(K_oo) / n`; on factorization failure
/// the jitter is doubled up to `max_doublings` times.
#[derive(Debug, Clone, Copy)]
pub struct JitterPolicy {
    pub initial: Option<f64>,
    pub max_doublings: u32,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            initial: None,
            max_doublings: 6,
        }
    }
}

impl JitterPolicy {
    /// A fixed jitter with no escalation.
    pub fn fixed(jitter: f64) -> Self {
        Self {
            initial: Some(jitter),
            max_doublings: 0,
        }
    }

    fn base_for(&self, k_oo: &DMatrix<f64>) -> f64 {
        self.initial
            .unwrap_or_else(|| 1e-8 * k_oo.trace() / k_oo.nrows() as f64)
    }
}

/// Joint Gaussian prior with a cached factorization of `K_oo + jitter·I`.
#[derive(Debug, Clone)]
pub struct JointGaussian {
    prior: PriorStatistics,
    chol: Cholesky,
    jitter: f64,
}

impl JointGaussian {
    pub fn new(prior: PriorStatistics, policy: JitterPolicy) -> Result<Self, GpError> {
        let base = policy.base_for(&prior.k_oo);
        let n = prior.k_oo.nrows();
        let mut jitter = base;
        let mut last_err = 0;
        for attempt in 0..=policy.max_doublings {
            let mut k = prior.k_oo.clone();
            for i in 0..n {
                k[(i, i)] += jitter;
            }
            match Cholesky::new(&k) {
                Ok(chol) => {
                    return Ok(Self {
                        prior,
                        chol,
                        jitter,
                    })
                }
                Err(minor) => last_err = minor,
            }
            if attempt < policy.max_doublings {
                jitter = if jitter == 0.0 { base.max(f64::MIN_POSITIVE) } else { jitter * 2.0 };
            }
        }
        Err(GpError::Factorization {
            minor: last_err,
            jitter,
        })
    }

    pub fn prior(&self) -> &PriorStatistics {
        &self.prior
    }

    /// Jitter actually applied to the diagonal of `K_oo`.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Conditions the joint prior on observed values (posterior mean and
    /// covariance of the forecast block).
    pub fn condition(&self, obs: &DVector<f64>) -> Result<ForecastResult, GpError> {
        let no = self.prior.obs_len();
        if obs.len() != no {
            return Err(GpError::DimensionMismatch {
                expected: no,
                found: obs.len(),
            });
        }
        let innovation = obs - &self.prior.mean_obs;
        let alpha = self.chol.solve_vec(&innovation);
        let mean = &self.prior.mean_fcst + self.prior.k_of.transpose() * &alpha;

        let w = self.chol.solve_mat(&self.prior.k_of);
        let mut cov = &self.prior.k_ff - self.prior.k_of.transpose() * w;
        // strip round-off asymmetry
        let sym = (&cov + cov.transpose()) * 0.5;
        cov = sym;
        let std = DVector::from_iterator(
            cov.nrows(),
            (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()),
        );
        Ok(ForecastResult {
            mean,
            covariance: cov,
            std,
            layout: self.prior.layout,
        })
    }
}

/// Posterior mean, covariance and per-hour standard deviation of a forecast.
#[derive(Debug, Clone)]
pub struct ForecastResult {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub std: DVector<f64>,
    pub layout: Option<WindowLayout>,
}

/// Functional form of the stationary kernel.
///
/// `AbsoluteLag` is `σ² exp(−|Δt| / (2γ²))`; `SquaredLag` is the conventional
/// squared-exponential `σ² exp(−Δt² / (2γ²))`, available as a sensitivity
/// switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KernelForm {
    #[default]
    AbsoluteLag,
    SquaredLag,
}

/// SE kernel parameters: amplitude σ (data units) and correlation time γ
/// (hours).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SEKernelParams {
    sigma: f64,
    gamma: f64,
}

impl SEKernelParams {
    pub fn new(sigma: f64, gamma: f64) -> Result<Self, GpError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(GpError::InvalidParams(format!("sigma must be > 0, got {sigma}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(GpError::InvalidParams(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(Self { sigma, gamma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Kernel matrix between two time grids: entry (i,j) = k(t1[i], t2[j]).
pub fn se_kernel_matrix(
    t1: &[f64],
    t2: &[f64],
    p: &SEKernelParams,
    form: KernelForm,
) -> DMatrix<f64> {
    let s2 = p.sigma * p.sigma;
    let denom = 2.0 * p.gamma * p.gamma;
    DMatrix::from_fn(t1.len(), t2.len(), |i, j| {
        let lag = (t1[i] - t2[j]).abs();
        let arg = match form {
            KernelForm::AbsoluteLag => lag / denom,
            KernelForm::SquaredLag => lag * lag / denom,
        };
        s2 * (-arg).exp()
    })
}

/// Log marginal likelihood of `obs` under N(mean, K), via Cholesky:
/// `−½ rᵀK⁻¹r − ½ log det K − (n/2) log 2π`.
pub fn log_marginal_likelihood(
    obs: &DVector<f64>,
    mean: &DVector<f64>,
    k: &DMatrix<f64>,
) -> Result<f64, GpError> {
    let n = obs.len();
    if mean.len() != n || k.nrows() != n || k.ncols() != n {
        return Err(GpError::DimensionMismatch {
            expected: n,
            found: mean.len().max(k.nrows()),
        });
    }
    let chol = Cholesky::new(k).map_err(|minor| GpError::Factorization { minor, jitter: 0.0 })?;
    let r = obs - mean;
    let alpha = chol.solve_vec(&r);
    let quad = r.dot(&alpha);
    Ok(-0.5 * quad - 0.5 * chol.log_det() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Result of SE hyperparameter fitting.
#[derive(Debug, Clone)]
pub struct SeFit {
    pub params: SEKernelParams,
    pub const_mean: f64,
    /// Set when the training data has zero variance; σ is pinned at a floor.
    pub degenerate: bool,
    pub log_likelihood: f64,
}

const GAMMA_LO: f64 = 1.0;
const GAMMA_HI: f64 = 336.0;
const SIGMA_GRID: usize = 10;
const GAMMA_GRID: usize = 12;

/// Maximizes the marginal likelihood of `train` over (σ, γ, constant mean).
///
/// Coarse log-scale grid over σ ∈ [0.01·sd, 10·sd] and γ ∈ [1, 336] hours,
/// then Nelder–Mead refinement from the best grid point. The likelihood uses
/// the default jitter `1e-8·trace(K)/n` on the kernel diagonal.
pub fn fit_se_hyperparameters(
    train: &[f64],
    grid: &[f64],
    form: KernelForm,
) -> Result<SeFit, GpError> {
    let n = train.len();
    if n < 8 {
        return Err(GpError::TrainTooShort { len: n, min: 8 });
    }
    if grid.len() != n {
        return Err(GpError::DimensionMismatch {
            expected: n,
            found: grid.len(),
        });
    }
    let mean = train.iter().sum::<f64>() / n as f64;
    let var = train.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        let params = SEKernelParams::new(f64::MIN_POSITIVE.sqrt(), GAMMA_LO)?;
        return Ok(SeFit {
            params,
            const_mean: mean,
            degenerate: true,
            log_likelihood: f64::NEG_INFINITY,
        });
    }

    let obs = DVector::from_column_slice(train);
    let eval = |sigma: f64, gamma: f64, mu: f64| -> f64 {
        let params = match SEKernelParams::new(sigma, gamma) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let mut k = se_kernel_matrix(grid, grid, &params, form);
        let jitter = 1e-8 * k.trace() / n as f64;
        for i in 0..n {
            k[(i, i)] += jitter;
        }
        let mean_vec = DVector::from_element(n, mu);
        log_marginal_likelihood(&obs, &mean_vec, &k).unwrap_or(f64::NEG_INFINITY)
    };

    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..SIGMA_GRID {
        let f = i as f64 / (SIGMA_GRID - 1) as f64;
        let sigma = (0.01 * sd) * (1000.0f64).powf(f); // up to 10·sd
        for j in 0..GAMMA_GRID {
            let g = j as f64 / (GAMMA_GRID - 1) as f64;
            let gamma = GAMMA_LO * (GAMMA_HI / GAMMA_LO).powf(g);
            let ll = eval(sigma, gamma, mean);
            if ll > best.0 {
                best = (ll, sigma, gamma);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(GpError::InvalidParams(
            "no factorizable kernel found on the hyperparameter grid".to_string(),
        ));
    }

    // refine in (ln σ, ln γ, mean) space
    let objective = |x: &[f64]| -eval(x[0].exp(), x[1].exp(), x[2]);
    let x0 = [best.1.ln(), best.2.ln(), mean];
    let (x, fval) = nelder_mead(objective, &x0, 500, 1e-6);
    let (ll, sigma, gamma, mu) = if -fval >= best.0 {
        (-fval, x[0].exp(), x[1].exp(), x[2])
    } else {
        (best.0, best.1, best.2, mean)
    };
    Ok(SeFit {
        params: SEKernelParams::new(sigma, gamma)?,
        const_mean: mu,
        degenerate: false,
        log_likelihood: ll,
    })
}

/// Nelder–Mead minimizer: reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5, stopping on relative simplex size.
pub(crate) fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    max_iter: usize,
    rel_tol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i] == 0.0 { 0.1 } else { 0.1 * x[i].abs() };
        simplex.push(x);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fvals = order.iter().map(|&i| fvals[i]).collect();

        let spread = simplex[1..]
            .iter()
            .map(|x| {
                norm(&x
                    .iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>())
            })
            .fold(0.0f64, f64::max);
        if spread / norm(&simplex[0]).max(1.0) < rel_tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst)
            .map(|(c, w)| c + (c - w))
            .collect();
        let fr = f(&reflect);
        if fr < fvals[0] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[n] = expand;
                fvals[n] = fe;
            } else {
                simplex[n] = reflect;
                fvals[n] = fr;
            }
        } else if fr < fvals[n - 1] {
            simplex[n] = reflect;
            fvals[n] = fr;
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + 0.5 * (w - c))
                .collect();
            let fc = f(&contract);
            if fc < fvals[n] {
                simplex[n] = contract;
                fvals[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    fvals[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap();
    (simplex[best].clone(), fvals[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn prior_1x1(k_oo: f64, k_of: f64, k_ff: f64) -> PriorStatistics {
        PriorStatistics {
            mean_obs: DVector::zeros(1),
            mean_fcst: DVector::zeros(1),
            k_oo: DMatrix::from_element(1, 1, k_oo),
            k_of: DMatrix::from_element(1, 1, k_of),
            k_ff: DMatrix::from_element(1, 1, k_ff),
            layout: None,
        }
    }

    #[test]
    fn uncorrelated_blocks_return_prior() {
        let mut prior = prior_1x1(1.0, 0.0, 2.0);
        prior.mean_fcst = DVector::from_element(1, 7.0);
        let model = JointGaussian::new(prior, JitterPolicy::fixed(0.0)).unwrap();
        let r = model.condition(&DVector::from_element(1, 123.0)).unwrap();
        assert_eq!(r.mean[0], 7.0);
        assert_eq!(r.covariance[(0, 0)], 2.0);
    }

    #[test]
    fn perfect_correlation_transfers_observation() {
        let prior = prior_1x1(1.0, 1.0, 1.0);
        let model = JointGaussian::new(prior, JitterPolicy::fixed(0.0)).unwrap();
        let r = model.condition(&DVector::from_element(1, 0.7)).unwrap();
        assert_relative_eq!(r.mean[0], 0.7, max_relative = 1e-14);
        assert!(r.covariance[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = JointGaussian::new(prior_1x1(1.0, 0.5, 1.0), JitterPolicy::default()).unwrap();
        assert!(matches!(
            model.condition(&DVector::zeros(2)),
            Err(GpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn factorization_failure_reports_minor() {
        // K_oo indefinite even after 6 doublings of the (zero-trace) jitter
        let mut prior = prior_1x1(-1.0, 0.0, 1.0);
        prior.k_oo = DMatrix::from_element(1, 1, -1.0);
        match JointGaussian::new(prior, JitterPolicy::fixed(0.0)) {
            Err(GpError::Factorization { minor, .. }) => assert_eq!(minor, 1),
            other => panic!("expected factorization failure, got {other:?}"),
        }
    }

    #[test]
    fn jitter_escalation_recovers_rank_deficiency() {
        // rank-1 2x2 block fails at jitter 0 but succeeds with the default policy
        let mut prior = prior_1x1(0.0, 0.0, 1.0);
        prior.mean_obs = DVector::zeros(2);
        prior.k_oo = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        prior.k_of = DMatrix::zeros(2, 1);
        let model = JointGaussian::new(prior, JitterPolicy::default()).unwrap();
        assert!(model.jitter() > 0.0);
    }

    #[test]
    fn se_kernel_zero_lag_and_closed_form() {
        let p = SEKernelParams::new(3.0, 2.0).unwrap();
        let k = se_kernel_matrix(&[5.0], &[5.0], &p, KernelForm::AbsoluteLag);
        assert_eq!(k[(0, 0)], 9.0);
        // sigma=1, gamma=1, |dt|=2: exp(-2/2) = exp(-1)
        let p1 = SEKernelParams::new(1.0, 1.0).unwrap();
        let k = se_kernel_matrix(&[0.0], &[2.0], &p1, KernelForm::AbsoluteLag);
        assert_relative_eq!(k[(0, 0)], (-1.0f64).exp(), max_relative = 1e-15);
        // squared form: exp(-4/2) = exp(-2)
        let k = se_kernel_matrix(&[0.0], &[2.0], &p1, KernelForm::SquaredLag);
        assert_relative_eq!(k[(0, 0)], (-2.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn se_kernel_symmetric_on_shared_grid() {
        let grid: Vec<f64> = (0..20).map(|i| (i as f64 * 1.37).sin() * 10.0).collect();
        let p = SEKernelParams::new(2.0, 5.0).unwrap();
        for form in [KernelForm::AbsoluteLag, KernelForm::SquaredLag] {
            let k = se_kernel_matrix(&grid, &grid, &p, form);
            assert_eq!(k, k.transpose());
        }
    }

    #[test]
    fn lml_standard_normal_closed_form() {
        let k = DMatrix::identity(1, 1);
        let ll = log_marginal_likelihood(&DVector::zeros(1), &DVector::zeros(1), &k).unwrap();
        assert_relative_eq!(ll, -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);
        let ll1 =
            log_marginal_likelihood(&DVector::from_element(1, 1.0), &DVector::zeros(1), &k).unwrap();
        assert_relative_eq!(ll1, -0.5 - 0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);
    }

    #[test]
    fn degenerate_training_flagged() {
        let train = vec![42.0; 24];
        let grid: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let fit = fit_se_hyperparameters(&train, &grid, KernelForm::AbsoluteLag).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.const_mean, 42.0);
    }

    #[test]
    fn refinement_never_below_grid_best() {
        // objective with a narrow optimum; check the invariant directly by
        // fitting noisy data and re-evaluating the reported likelihood
        let grid: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let train: Vec<f64> = grid.iter().map(|t| (t * 0.3).sin() * 2.0 + 5.0).collect();
        let fit = fit_se_hyperparameters(&train, &grid, KernelForm::AbsoluteLag).unwrap();
        assert!(fit.log_likelihood.is_finite());
        // recompute LML at the returned point; must match the reported value
        let mut k = se_kernel_matrix(&grid, &grid, &fit.params, KernelForm::AbsoluteLag);
        let jit = 1e-8 * k.trace() / 40.0;
        for i in 0..40 {
            k[(i, i)] += jit;
        }
        let ll = log_marginal_likelihood(
            &DVector::from_column_slice(&train),
            &DVector::from_element(40, fit.const_mean),
            &k,
        )
        .unwrap();
        assert_relative_eq!(ll, fit.log_likelihood, max_relative = 1e-9);
    }

    #[test]
    fn nelder_mead_minimizes_quadratic() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2);
        let (x, fv) = nelder_mead(f, &[0.0, 0.0], 500, 1e-10);
        assert!(fv < 1e-8);
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-4);
        assert_relative_eq!(x[1], -1.0, epsilon = 1e-4);
    }
}

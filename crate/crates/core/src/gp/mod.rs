//! Gaussian-process surrogate and Bayesian optimization over hyperparameter
//! distributions.

mod bo;
mod kernel;
mod model;

pub use bo::{bo_loop, random_search, trace_csv, BoResult, BoSettings, KernelDistance, TraceRow};
pub use kernel::{bessel_k, matern, matern_general, MaternParams};
pub use model::{argmax, expected_improvement, gp_fit, gram_matrix, normal_cdf, normal_pdf, GpModel, Metric};

use crate::lif::GammaSpec;
use crate::{Error, Result};

/// Method-of-moments gamma fit: `shape = mean^2 / var`, `scale = var / mean`,
/// with the unbiased sample variance.
pub fn fit_gamma_init(samples: &[f64]) -> Result<GammaSpec> {
    if samples.len() < 2 {
        return Err(Error::Fit("need at least two samples".into()));
    }
    if samples.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Fit("samples must be positive and finite".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::Fit("samples have zero variance".into()));
    }
    GammaSpec::new(mean * mean / var, var / mean)
}

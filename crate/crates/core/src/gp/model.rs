use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use super::kernel::{matern, MaternParams};
use crate::{Error, Result};

/// Distance between two points of a GP input space.
pub trait Metric<P>: Sync {
    fn distance(&self, a: &P, b: &P) -> f64;
}

impl<P, F: Fn(&P, &P) -> f64 + Sync> Metric<P> for F {
    fn distance(&self, a: &P, b: &P) -> f64 {
        self(a, b)
    }
}

const MAX_JITTER: f64 = 1e-6;

/// GP regression with a Matérn kernel on a metric space.
#[derive(Clone, Debug)]
pub struct GpModel<P> {
    points: Vec<P>,
    scores: Vec<f64>,
    kernel: MaternParams,
    noise: f64,
    /// Prior mean.
    mean_offset: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    /// Diagonal jitter that was needed on top of `noise`.
    jitter: f64,
    best: usize,
}

pub fn gp_fit<P: Clone + Sync>(
    metric: &impl Metric<P>,
    points: &[P],
    scores: &[f64],
    kernel: MaternParams,
    noise: f64,
    mean_offset: f64,
) -> Result<GpModel<P>> {
    kernel.validate()?;
    if points.is_empty() {
        return Err(Error::Fit("need at least one observation".into()));
    }
    if points.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: scores.len(),
        });
    }
    if !(noise >= 0.0) {
        return Err(Error::ParameterDomain(format!("noise must be >= 0, got {noise}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Fit("scores must be finite".into()));
    }
    let n = points.len();
    let gram = gram_matrix(metric, points, &kernel);
    let mut jitter = 0.0;
    let chol = loop {
        let mut k = gram.clone();
        for i in 0..n {
            k[(i, i)] += noise + jitter;
        }
        if let Some(c) = Cholesky::new(k) {
            break c;
        }
        jitter = if jitter == 0.0 {
            1e-12 * kernel.variance
        } else {
            jitter * 10.0
        };
        if jitter > MAX_JITTER * kernel.variance.max(1.0) {
            return Err(Error::IllConditioned { jitter });
        }
    };
    let y = DVector::from_iterator(n, scores.iter().map(|s| s - mean_offset));
    let alpha = chol.solve(&y);
    let best = (0..n).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
    Ok(GpModel {
        points: points.to_vec(),
        scores: scores.to_vec(),
        kernel,
        noise,
        mean_offset,
        chol,
        alpha,
        jitter,
        best,
    })
}

/// Symmetric Gram matrix of the Matérn kernel.
pub fn gram_matrix<P: Sync>(metric: &impl Metric<P>, points: &[P], kernel: &MaternParams) -> DMatrix<f64> {
    let n = points.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| matern(metric.distance(&points[i], &points[j]), kernel))
                .collect()
        })
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for (off, v) in upper[i].iter().enumerate() {
            k[(i, i + off)] = *v;
            k[(i + off, i)] = *v;
        }
    }
    k
}

impl<P: Sync> GpModel<P> {
    pub fn kernel(&self) -> &MaternParams {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and value of the best observed score.
    pub fn incumbent(&self) -> (usize, f64) {
        (self.best, self.scores[self.best])
    }

    /// Posterior mean and variance (clamped at zero).
    pub fn posterior(&self, metric: &impl Metric<P>, query: &P) -> (f64, f64) {
        let k_star = DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .map(|p| matern(metric.distance(p, query), &self.kernel)),
        );
        let mean = self.mean_offset + k_star.dot(&self.alpha);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&k_star)
            .expect("Cholesky factor is invertible");
        let var = (self.kernel.variance - v.dot(&v)).max(0.0);
        (mean, var)
    }

    pub fn expected_improvement(&self, metric: &impl Metric<P>, query: &P) -> f64 {
        let (mu, var) = self.posterior(metric, query);
        expected_improvement(mu, var.sqrt(), self.scores[self.best])
    }

    /// Pool index with the largest expected improvement (lowest index on
    /// ties). `None` for an empty pool.
    pub fn suggest_next(&self, metric: &impl Metric<P>, pool: &[P]) -> Option<usize> {
        let ei: Vec<f64> = pool.par_iter().map(|q| self.expected_improvement(metric, q)).collect();
        argmax(&ei)
    }
}

/// First index of the maximum; NaNs never win.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            None if !v.is_nan() => best = Some(i),
            Some(b) if *v > values[b] => best = Some(i),
            _ => {}
        }
    }
    best
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// EI for maximization: `(mu - f_best) Phi(Z) + sigma phi(Z)`.
pub fn expected_improvement(mu: f64, sigma: f64, f_best: f64) -> f64 {
    let diff = mu - f_best;
    if !(sigma > 0.0) {
        return diff.max(0.0);
    }
    let z = diff / sigma;
    (diff * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }

    #[test]
    fn ei_table_values() {
        assert_eq!(expected_improvement(0.3, 0.0, 0.5), 0.0);
        assert!((expected_improvement(0.5, 1.0, 0.5) - 0.398942).abs() < 1e-6);
        assert!((expected_improvement(1.5, 1.0, 0.5) - 1.083316).abs() < 1e-6);
    }

    #[test]
    fn interpolates_single_observation() {
        let m = gp_fit(&line, &[2.0], &[0.7], MaternParams::default(), 0.0, 0.0).unwrap();
        let (mu, var) = m.posterior(&line, &2.0);
        assert!((mu - 0.7).abs() < 1e-12);
        assert!(var <= 1e-9);
        let (mu, var) = m.posterior(&line, &1e6);
        assert!(mu.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suggest_prefers_the_unexplored_better_point() {
        let m = gp_fit(&line, &[0.0, 5.0], &[1.0, 0.0], MaternParams::default(), 0.0, 0.0).unwrap();
        // 0.0 is the incumbent (EI = 0); 0.8 is close to it with high mean
        assert_eq!(m.suggest_next(&line, &[0.0, 0.8]), Some(1));
        assert_eq!(m.suggest_next(&line, &[3.0]), Some(0));
        assert_eq!(m.suggest_next(&line, &[]), None);
    }

    #[test]
    fn duplicate_points_need_jitter() {
        let m = gp_fit(
            &line,
            &[1.0, 1.0, 2.0],
            &[0.5, 0.5, 0.1],
            MaternParams::default(),
            0.0,
            0.0,
        )
        .unwrap();
        assert!(m.jitter() > 0.0 && m.jitter() <= 1e-6);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax(&[f64::NAN, 0.0]), Some(1));
    }
}

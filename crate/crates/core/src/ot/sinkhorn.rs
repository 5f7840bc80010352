use super::EmpiricalDistribution;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornOutput {
    /// Transport cost `<P, C>` of the regularized plan.
    pub cost: f64,
    /// `sqrt(cost)`; a W2 estimate when the cost is squared Euclidean.
    pub distance: f64,
    pub iterations: usize,
    /// L1 violation of the row marginals at exit.
    pub marginal_error: f64,
}

/// Entropic OT by Sinkhorn iterations on dual potentials in the log domain,
/// which stays stable for small `reg`.
pub fn sinkhorn(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    cost: impl Fn(&[f64], &[f64]) -> f64,
    reg: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SinkhornOutput> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::ParameterDomain(format!("reg must be > 0, got {reg}")));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let (n, m) = (p.len(), q.len());
    let c: Vec<f64> = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| cost(p.point(i), q.point(j)))
        .collect();
    let log_a: Vec<f64> = p.weights().iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = q.weights().iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut buf = vec![0.0; n.max(m)];
    let mut err = f64::INFINITY;
    let mut iters = 0;
    // Anneal the regularization from the cost scale down to `reg`, warm
    // starting the potentials; plain iterations at small `reg` crawl.
    let c_max = c.iter().copied().fold(0.0, f64::max);
    let mut eps = c_max.max(reg);
    loop {
        let last = eps <= reg;
        let eps_now = eps.max(reg);
        let budget = if last { max_iters.saturating_sub(iters) } else { 50 };
        for _ in 0..budget {
            iters += 1;
            for i in 0..n {
                for j in 0..m {
                    buf[j] = (g[j] - c[i * m + j]) / eps_now + log_b[j];
                }
                f[i] = -eps_now * log_sum_exp(&buf[..m]);
            }
            for j in 0..m {
                for i in 0..n {
                    buf[i] = (f[i] - c[i * m + j]) / eps_now + log_a[i];
                }
                g[j] = -eps_now * log_sum_exp(&buf[..n]);
            }
            // columns are exact after the g update, so only rows can be off
            err = (0..n)
                .map(|i| {
                    let row: f64 = (0..m)
                        .map(|j| (log_a[i] + log_b[j] + (f[i] + g[j] - c[i * m + j]) / eps_now).exp())
                        .sum();
                    (row - p.weights()[i]).abs()
                })
                .sum();
            if err < tol || iters >= max_iters {
                break;
            }
        }
        if last || iters >= max_iters {
            break;
        }
        eps *= 0.5;
    }
    if !(err < tol) || eps > reg {
        return Err(Error::NotConverged {
            iterations: iters,
            marginal_error: err,
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let pij = (log_a[i] + log_b[j] + (f[i] + g[j] - c[i * m + j]) / reg).exp();
            total += pij * c[i * m + j];
        }
    }
    Ok(SinkhornOutput {
        cost: total,
        distance: total.max(0.0).sqrt(),
        iterations: iters,
        marginal_error: err,
    })
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let mx = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + x.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{sq_euclidean, w2_1d};

    #[test]
    fn diracs_have_a_single_plan() {
        let a = EmpiricalDistribution::dirac(vec![1.5]).unwrap();
        let b = EmpiricalDistribution::dirac(vec![-2.0]).unwrap();
        let out = sinkhorn(&a, &b, sq_euclidean, 0.1, 100, 1e-9).unwrap();
        assert!((out.distance - 3.5).abs() < 1e-12);
        let same = sinkhorn(&a, &a, sq_euclidean, 1e-3, 100, 1e-9).unwrap();
        assert_eq!(same.distance, 0.0);
    }

    #[test]
    fn small_reg_approaches_exact() {
        let p = EmpiricalDistribution::from_values(&[0.0, 0.4, 1.1, 2.0, 3.3]).unwrap();
        let q = EmpiricalDistribution::from_values(&[0.2, 1.0, 1.7, 2.5, 4.0]).unwrap();
        let out = sinkhorn(&p, &q, sq_euclidean, 1e-3, 100_000, 1e-10).unwrap();
        let exact = w2_1d(&p, &q).unwrap();
        assert!((out.distance - exact).abs() / exact < 0.02);
    }

    #[test]
    fn reports_non_convergence() {
        let p = EmpiricalDistribution::from_values(&[0.0, 1.0, 2.0]).unwrap();
        let q = EmpiricalDistribution::from_values(&[5.0, 0.5, 9.0]).unwrap();
        match sinkhorn(&p, &q, sq_euclidean, 1e-3, 1, 1e-14) {
            Err(Error::NotConverged { iterations, .. }) => assert_eq!(iterations, 1),
            other => panic!("{other:?}"),
        }
        assert!(sinkhorn(&p, &q, sq_euclidean, 0.0, 10, 1e-9).is_err());
    }
}

//! Wasserstein distances between weighted empirical distributions.

mod exact;
mod sinkhorn;

pub use exact::exact_transport;
pub use sinkhorn::{sinkhorn, SinkhornOutput};

use rand_distr::{Distribution, StandardNormal};

use crate::seeds;
use crate::{Error, Result};

/// Weighted point cloud in `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    dim: usize,
    /// Row-major `len x dim`.
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Weights are normalized to sum to one.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("distribution support must be nonempty".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Validation("points must have at least one coordinate".into()));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Validation("points have mixed dimensions".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("support has non-finite coordinates".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Validation("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Validation("weights must have positive mass".into()));
        }
        Ok(Self {
            dim,
            points: points.concat(),
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::uniform(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sorted `(value, weight)` pairs of the projection onto `dir`.
    fn projected(&self, dir: &[f64]) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = (0..self.len())
            .map(|i| (dot(self.point(i), dir), self.weights[i]))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared 1-D W2 between two sorted weighted samples, by merging their
/// quantile functions.
pub fn w2_sq_sorted(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut rp, mut rq) = (p[0].1, q[0].1);
    let mut acc = 0.0;
    loop {
        let m = rp.min(rq);
        let d = p[i].0 - q[j].0;
        acc += m * d * d;
        rp -= m;
        rq -= m;
        // Whichever side hit zero moves on; leftovers at the end are rounding.
        if rp <= rq {
            i += 1;
            if i == p.len() {
                break;
            }
            rp = p[i].1;
        } else {
            j += 1;
            if j == q.len() {
                break;
            }
            rq = q[j].1;
        }
    }
    acc
}

/// Exact W2 between one-dimensional distributions.
pub fn w2_1d(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Result<f64> {
    if p.dim != 1 || q.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: if p.dim != 1 { p.dim } else { q.dim },
        });
    }
    Ok(w2_sq_sorted(&p.projected(&[1.0]), &q.projected(&[1.0])).max(0.0).sqrt())
}

/// Unit directions on the sphere, fixed for the lifetime of a metric so that
/// repeated distance evaluations agree exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Projections {
    dim: usize,
    dirs: Vec<Vec<f64>>,
}

impl Projections {
    /// In one dimension a single direction is exact, so `n` is ignored.
    pub fn new(dim: usize, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ParameterDomain("need at least one projection".into()));
        }
        if dim == 0 {
            return Err(Error::ParameterDomain("dimension must be >= 1".into()));
        }
        if dim == 1 {
            return Ok(Self {
                dim,
                dirs: vec![vec![1.0]],
            });
        }
        let mut rng = seeds::rng(seed, "projections");
        let mut dirs = Vec::with_capacity(n);
        while dirs.len() < n {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-12 {
                dirs.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        Ok(Self { dim, dirs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.dirs
    }

    /// Sorted projections of `p` onto every direction.
    pub fn signature(&self, p: &EmpiricalDistribution) -> Result<Signature> {
        if p.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim,
            });
        }
        let w0 = p.weights[0];
        Ok(Signature {
            slices: self.dirs.iter().map(|d| p.projected(d)).collect(),
            uniform: p.weights.iter().all(|&w| w == w0),
        })
    }

    pub fn sliced_w2(&self, p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Result<f64> {
        Ok(self.signature(p)?.distance(&self.signature(q)?))
    }
}

/// A distribution as seen through a fixed [`Projections`] set.
#[derive(Clone, Debug, PartialEq)]
pub struct Signature {
    slices: Vec<Vec<(f64, f64)>>,
    /// All weights equal, which allows an index-aligned comparison.
    uniform: bool,
}

impl Signature {
    /// Sliced W2; both signatures must come from the same projections.
    pub fn distance(&self, other: &Signature) -> f64 {
        let n = self.slices.len();
        let aligned = self.uniform && other.uniform && self.slices[0].len() == other.slices[0].len();
        let total: f64 = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| {
                if aligned {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| {
                            let d = x.0 - y.0;
                            x.1 * d * d
                        })
                        .sum::<f64>()
                } else {
                    w2_sq_sorted(a, b)
                }
            })
            .sum();
        (total / n as f64).max(0.0).sqrt()
    }
}

/// Monte-Carlo sliced W2 with `n_projections` seeded directions.
pub fn sliced_w2(p: &EmpiricalDistribution, q: &EmpiricalDistribution, n_projections: usize, seed: u64) -> Result<f64> {
    if p.dim != q.dim {
        return Err(Error::DimensionMismatch {
            expected: p.dim,
            found: q.dim,
        });
    }
    Projections::new(p.dim, n_projections, seed)?.sliced_w2(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_values(v).unwrap()
    }

    #[test]
    fn one_dimensional_examples() {
        let a = EmpiricalDistribution::dirac(vec![0.0]).unwrap();
        let b = EmpiricalDistribution::dirac(vec![3.0]).unwrap();
        assert!((w2_1d(&a, &b).unwrap() - 3.0).abs() < 1e-15);
        let p = d1(&[0.3, -1.0, 2.0]);
        assert_eq!(w2_1d(&p, &p).unwrap(), 0.0);
        assert!((w2_1d(&d1(&[0.0, 1.0]), &d1(&[1.0, 2.0])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unequal_weights_and_sizes() {
        // 0.5 mass stays at 0, 0.5 mass moves from 0 to 1
        let p = EmpiricalDistribution::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let q = EmpiricalDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert!((w2_1d(&p, &q).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dimension_checks() {
        let p = EmpiricalDistribution::uniform(vec![vec![0.0, 1.0]]).unwrap();
        assert!(w2_1d(&p, &p).is_err());
        assert!(sliced_w2(&p, &d1(&[0.0]), 8, 0).is_err());
        assert!(sliced_w2(&p, &p, 0, 0).is_err());
        assert!(EmpiricalDistribution::uniform(vec![]).is_err());
    }

    #[test]
    fn sliced_reduces_to_exact_in_one_dimension() {
        let p = d1(&[0.1, 0.7, 3.0, -2.0]);
        let q = d1(&[1.0, 1.5]);
        assert_eq!(sliced_w2(&p, &q, 64, 5).unwrap(), w2_1d(&p, &q).unwrap());
    }

    #[test]
    fn sliced_self_distance_is_zero() {
        let p = EmpiricalDistribution::uniform(vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(sliced_w2(&p, &p, 32, 1).unwrap(), 0.0);
    }

    #[test]
    fn sliced_translation_of_dirac() {
        // Projecting a shift v onto a random unit direction gives E[(v.u)^2] = |v|^2 / d.
        let a = EmpiricalDistribution::dirac(vec![0.0, 0.0, 0.0]).unwrap();
        let b = EmpiricalDistribution::dirac(vec![3.0, 0.0, 4.0]).unwrap();
        let s = sliced_w2(&a, &b, 20_000, 2).unwrap();
        assert!((s * 3f64.sqrt() - 5.0).abs() < 0.1, "{s}");
    }
}

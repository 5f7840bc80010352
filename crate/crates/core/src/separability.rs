//! Effective rank of reservoir state matrices.
//!
//! The effective rank at threshold `q` is the smallest `k` such that the
//! leading `k` singular values carry a fraction `q` of the singular-value sum.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::sim::StateMatrix;
use crate::{Error, Result};

pub const DEFAULT_ENERGY: f64 = 0.99;

#[derive(Clone, Debug, PartialEq)]
pub struct RankReport {
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub effective_rank: usize,
    pub energy_threshold: f64,
}

pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("matrix has non-finite entries".into()));
    }
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericDomain("SVD did not converge".into()))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().map(|s| s.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Smallest `k` whose leading singular values reach `threshold` of the total.
pub fn rank_from_singular_values(sv: &[f64], threshold: f64) -> usize {
    let total: f64 = sv.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (k, s) in sv.iter().enumerate() {
        acc += s;
        if acc / total >= threshold {
            return k + 1;
        }
    }
    sv.len()
}

pub fn effective_rank(f: &StateMatrix, threshold: f64) -> Result<RankReport> {
    effective_rank_of(&f.0, threshold)
}

pub fn effective_rank_of(m: &DMatrix<f64>, threshold: f64) -> Result<RankReport> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::ParameterDomain(format!(
            "threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let singular_values = singular_values(m)?;
    Ok(RankReport {
        effective_rank: rank_from_singular_values(&singular_values, threshold),
        singular_values,
        energy_threshold: threshold,
    })
}

/// Rank of the matrix whose columns are the given final circuit states.
pub fn linear_separation_rank(states: &[Vec<f64>], threshold: f64) -> Result<usize> {
    let m = states.len();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = states[0].len();
    if let Some(bad) = states.iter().find(|s| s.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let mat = DMatrix::from_fn(n, m, |i, j| states[j][i]);
    Ok(effective_rank_of(&mat, threshold)?.effective_rank)
}

/// What one reservoir contributes to a sweep cell.
#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub states: StateMatrix,
    pub active_neurons: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub lambda: f64,
    pub w_scale: f64,
    pub mean_rank: f64,
    pub sd_rank: f64,
    pub mean_active: f64,
}

/// Evaluates `probe(lambda, w_scale, rep)` for every grid cell and repetition
/// (in parallel) and summarizes each cell. Cells come back in row-major order
/// (lambda outer).
pub fn rank_sweep<F>(lambdas: &[f64], w_scales: &[f64], reps: usize, threshold: f64, probe: F) -> Result<Vec<SweepCell>>
where
    F: Fn(f64, f64, usize) -> Result<ProbeResult> + Sync,
{
    if lambdas.is_empty() || w_scales.is_empty() {
        return Err(Error::Validation("sweep grids must be nonempty".into()));
    }
    if reps == 0 {
        return Err(Error::ParameterDomain("reps must be >= 1".into()));
    }
    let jobs: Vec<(f64, f64, usize)> = lambdas
        .iter()
        .flat_map(|&l| w_scales.iter().flat_map(move |&w| (0..reps).map(move |r| (l, w, r))))
        .collect();
    let results: Vec<(usize, usize)> = jobs
        .par_iter()
        .map(|&(l, w, r)| {
            let p = probe(l, w, r)?;
            Ok((effective_rank(&p.states, threshold)?.effective_rank, p.active_neurons))
        })
        .collect::<Result<_>>()?;
    Ok(results
        .chunks(reps)
        .zip(jobs.chunks(reps))
        .map(|(res, job)| {
            let ranks: Vec<f64> = res.iter().map(|r| r.0 as f64).collect();
            let mean = ranks.iter().sum::<f64>() / reps as f64;
            let sd = if reps > 1 {
                (ranks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
            } else {
                0.0
            };
            SweepCell {
                lambda: job[0].0,
                w_scale: job[0].1,
                mean_rank: mean,
                sd_rank: sd,
                mean_active: res.iter().map(|r| r.1 as f64).sum::<f64>() / reps as f64,
            }
        })
        .collect())
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from("lambda,w_scale,mean_rank,sd_rank,mean_active\n");
    for c in cells {
        s.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?}\n",
            c.lambda, c.w_scale, c.mean_rank, c.sd_rank, c.mean_active
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(rank_from_singular_values(&[99.0, 1.0], 0.99), 1);
        let id = StateMatrix(DMatrix::identity(4, 4));
        assert_eq!(effective_rank(&id, 0.99).unwrap().effective_rank, 4);
        let zero = StateMatrix(DMatrix::zeros(3, 5));
        assert_eq!(effective_rank(&zero, 0.99).unwrap().effective_rank, 0);
    }

    #[test]
    fn rejects_bad_input() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(effective_rank_of(&m, 0.99).is_err());
        assert!(effective_rank_of(&DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn separation_rank_examples() {
        let v = vec![1.0, -2.0, 0.5];
        assert_eq!(linear_separation_rank(&[v.clone(), v.clone(), v], 0.99).unwrap(), 1);
        let basis: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        assert_eq!(linear_separation_rank(&basis, 0.99).unwrap(), 3);
    }

    #[test]
    fn single_cell_sweep_is_a_direct_call() {
        let states = StateMatrix(DMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64));
        let direct = effective_rank(&states, 0.99).unwrap().effective_rank;
        let cells = rank_sweep(&[1.0], &[1.0], 1, 0.99, |_, _, _| {
            Ok(ProbeResult {
                states: states.clone(),
                active_neurons: 9,
            })
        })
        .unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].mean_rank, direct as f64);
        assert_eq!(cells[0].mean_active, 9.0);
        assert!(sweep_csv(&cells).starts_with("lambda,w_scale,mean_rank,sd_rank,mean_active\n"));
    }
}

use nalgebra::{DMatrix, DVector};

use super::StateMatrix;
use crate::{Error, Result};

/// One-vs-rest ridge regression on z-scored state rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutModel {
    classes: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// (features + 1) x classes; the last row is the bias.
    coef: DMatrix<f64>,
}

/// Fits the linear readout. Labels may be any `usize` values; predictions
/// break score ties toward the smallest label.
pub fn fit_readout(states: &StateMatrix, labels: &[usize], ridge: f64) -> Result<ReadoutModel> {
    let x = &states.0;
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: labels.len(),
        });
    }
    if !(ridge >= 0.0) {
        return Err(Error::ParameterDomain(format!("ridge must be >= 0, got {ridge}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("state matrix has non-finite entries".into()));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let (n, d) = x.shape();
    let mut mean = vec![0.0; d];
    let mut scale = vec![1.0; d];
    for j in 0..d {
        let col = x.column(j);
        let m = col.mean();
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        mean[j] = m;
        if var > 1e-24 {
            scale[j] = var.sqrt();
        }
    }
    let design = DMatrix::from_fn(
        n,
        d + 1,
        |i, j| {
            if j == d {
                1.0
            } else {
                (x[(i, j)] - mean[j]) / scale[j]
            }
        },
    );
    let targets = DMatrix::from_fn(n, classes.len(), |i, c| f64::from(u8::from(labels[i] == classes[c])));

    let mut gram = design.transpose() * &design;
    // The bias is not penalized; a tiny floor keeps the system definite.
    for j in 0..d {
        gram[(j, j)] += ridge.max(1e-10);
    }
    gram[(d, d)] += 1e-12;
    let rhs = design.transpose() * targets;
    let coef = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Fit(e.to_string()))?,
    };
    Ok(ReadoutModel {
        classes,
        mean,
        scale,
        coef,
    })
}

impl ReadoutModel {
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    /// Score per class for one state vector.
    pub fn scores(&self, state: &[f64]) -> Result<Vec<f64>> {
        let d = self.mean.len();
        if state.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: state.len(),
            });
        }
        let z = DVector::from_fn(d + 1, |j, _| {
            if j == d {
                1.0
            } else {
                (state[j] - self.mean[j]) / self.scale[j]
            }
        });
        Ok((self.coef.transpose() * z).iter().copied().collect())
    }

    pub fn predict(&self, state: &[f64]) -> Result<usize> {
        let scores = self.scores(state)?;
        let mut best = 0;
        for (c, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = c;
            }
        }
        Ok(self.classes[best])
    }

    /// Fraction of rows classified correctly.
    pub fn accuracy(&self, states: &StateMatrix, labels: &[usize]) -> Result<f64> {
        if labels.len() != states.nrows() {
            return Err(Error::DimensionMismatch {
                expected: states.nrows(),
                found: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut hits = 0usize;
        for (i, &l) in labels.iter().enumerate() {
            if self.predict(&states.row(i))? == l {
                hits += 1;
            }
        }
        Ok(hits as f64 / labels.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_states_fit_exactly() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let c = i % 3;
                vec![c as f64 + 0.01 * i as f64, (c == 1) as u8 as f64, -(c as f64)]
            })
            .collect();
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let states = StateMatrix::from_rows(&rows).unwrap();
        let model = fit_readout(&states, &labels, 1e-3).unwrap();
        assert_eq!(model.accuracy(&states, &labels).unwrap(), 1.0);
    }

    #[test]
    fn single_class_always_predicted() {
        let states = StateMatrix::from_rows(&[vec![0.3, 1.0], vec![-2.0, 4.0], vec![0.0, 0.0]]).unwrap();
        let model = fit_readout(&states, &[7, 7, 7], 1e-3).unwrap();
        for probe in [[0.0, 0.0], [100.0, -3.0], [-1.0, 1e6]] {
            assert_eq!(model.predict(&probe).unwrap(), 7);
        }
    }

    #[test]
    fn constant_features_are_harmless() {
        let states = StateMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.1], vec![1.0, 0.9]]).unwrap();
        let labels = [0, 1, 0, 1];
        let model = fit_readout(&states, &labels, 1e-3).unwrap();
        assert_eq!(model.accuracy(&states, &labels).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        let states = StateMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(fit_readout(&states, &[0], 1e-3).is_err());
        let bad = StateMatrix::from_rows(&[vec![f64::NAN], vec![2.0]]).unwrap();
        assert!(fit_readout(&bad, &[0, 1], 1e-3).is_err());
    }
}

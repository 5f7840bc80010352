//! Hyperparameter search space and the Wasserstein geometry on it.
//!
//! A candidate is an ordered list of values, each either a fixed scalar or a
//! gamma distribution. For distances a candidate is materialized as a point
//! cloud in `R^d` with one coordinate per parameter: fixed scalars give a
//! constant (Dirac) coordinate, gamma parameters a coordinate whose marginal
//! is a stratified quantile discretization of that gamma.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use statrs::distribution::{ContinuousCDF, Gamma as StatGamma};

use crate::lif::GammaSpec;
use crate::ot::{EmpiricalDistribution, Projections, Signature};
use crate::seeds::{self, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamKind {
    Scalar,
    /// Gamma with a fixed shape; the range and initial value refer to the mean.
    Gamma {
        shape: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub initial: f64,
    pub lo: f64,
    pub hi: f64,
    pub kind: ParamKind,
    /// Frozen parameters keep their initial value in every candidate.
    pub tunable: bool,
}

impl ParamSpec {
    pub fn scalar(name: &str, initial: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            initial,
            lo,
            hi,
            kind: ParamKind::Scalar,
            tunable: true,
        }
    }

    pub fn gamma(name: &str, shape: f64, initial_mean: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            initial: initial_mean,
            lo,
            hi,
            kind: ParamKind::Gamma { shape },
            tunable: true,
        }
    }

    pub fn frozen(mut self) -> Self {
        self.tunable = false;
        self
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn value_at(&self, x: f64) -> Result<ParamValue> {
        match self.kind {
            ParamKind::Scalar => Ok(ParamValue::Fixed(x)),
            ParamKind::Gamma { shape } => Ok(ParamValue::Gamma(GammaSpec::from_mean(shape, x)?)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamValue {
    Fixed(f64),
    Gamma(GammaSpec),
}

impl ParamValue {
    /// The scalar itself, or the gamma mean.
    pub fn center(&self) -> f64 {
        match self {
            ParamValue::Fixed(v) => *v,
            ParamValue::Gamma(g) => g.mean(),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Fixed(v) => write!(f, "{v:?}"),
            ParamValue::Gamma(g) => write!(f, "gamma({:?},{:?})", g.shape, g.scale),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateConfig {
    names: Arc<[String]>,
    values: Vec<ParamValue>,
}

impl CandidateConfig {
    pub fn new(names: Arc<[String]>, values: Vec<ParamValue>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} names for {} values",
                names.len(),
                values.len()
            )));
        }
        Ok(Self { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[ParamValue] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<ParamValue> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        match self.get(name) {
            Some(ParamValue::Fixed(v)) => Ok(v),
            Some(ParamValue::Gamma(_)) => Err(Error::SchemaMismatch(format!("`{name}` is a distribution"))),
            None => Err(Error::SchemaMismatch(format!("no parameter `{name}`"))),
        }
    }

    pub fn gamma(&self, name: &str) -> Result<GammaSpec> {
        match self.get(name) {
            Some(ParamValue::Gamma(g)) => Ok(g),
            Some(ParamValue::Fixed(_)) => Err(Error::SchemaMismatch(format!("`{name}` is a scalar"))),
            None => Err(Error::SchemaMismatch(format!("no parameter `{name}`"))),
        }
    }

    pub fn same_schema(&self, other: &Self) -> bool {
        self.names == other.names
            && self.values.iter().zip(&other.values).all(|(a, b)| {
                matches!(
                    (a, b),
                    (ParamValue::Fixed(_), ParamValue::Fixed(_)) | (ParamValue::Gamma(_), ParamValue::Gamma(_))
                )
            })
    }

    /// Compact JSON object, e.g. `{"lambda":1.0,"tau_e":{"shape":3.0,"scale":16.6}}`.
    pub fn to_blob(&self) -> String {
        let mut map = serde_json::Map::new();
        for (n, v) in self.names.iter().zip(&self.values) {
            let value = match v {
                ParamValue::Fixed(x) => serde_json::json!(x),
                ParamValue::Gamma(g) => serde_json::json!({"shape": g.shape, "scale": g.scale}),
            };
            map.insert(n.clone(), value);
        }
        serde_json::Value::Object(map).to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
    names: Arc<[String]>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for p in &params {
            if seen.insert(p.name.clone(), ()).is_some() {
                return Err(Error::Validation(format!("duplicate parameter `{}`", p.name)));
            }
            if !(p.lo < p.hi) || !(p.lo..=p.hi).contains(&p.initial) {
                return Err(Error::Validation(format!(
                    "parameter `{}`: initial {} outside ({}, {})",
                    p.name, p.initial, p.lo, p.hi
                )));
            }
            if let ParamKind::Gamma { shape } = p.kind {
                if !(shape > 0.0) || !(p.lo >= 0.0) || !(p.initial > 0.0) {
                    return Err(Error::Validation(format!(
                        "gamma parameter `{}` needs positive shape and mean",
                        p.name
                    )));
                }
            }
        }
        let names: Arc<[String]> = params.iter().map(|p| p.name.clone()).collect();
        Ok(Self { params, names })
    }

    /// The HRSNN table: opaque scalars frozen at their initial values,
    /// tunable lambda, P_IR, membrane time-constant distributions (shape
    /// `tau_shape`) and the five weight-amplitude constants.
    pub fn table_defaults(tau_shape: f64) -> Self {
        let params = vec![
            ParamSpec::scalar("eta", 10.0, 0.0, 50.0).frozen(),
            ParamSpec::scalar("gamma", 5.0, 0.0, 10.0).frozen(),
            ParamSpec::scalar("zeta", 2.5, 0.0, 10.0).frozen(),
            ParamSpec::scalar("eta_star", 1.0, 0.0, 3.0).frozen(),
            ParamSpec::scalar("g", 2.0, 0.0, 10.0).frozen(),
            ParamSpec::scalar("omega", 0.5, 0.0, 1.0).frozen(),
            ParamSpec::scalar("k", 50.0, 0.0, 100.0).frozen(),
            ParamSpec::scalar("lambda", 1.0, 0.0, 2.0),
            ParamSpec::scalar("p_ir", 0.05, 0.0, 0.1),
            ParamSpec::gamma("tau_e", tau_shape, 50.0, 0.0, 100.0),
            ParamSpec::gamma("tau_i", tau_shape, 50.0, 0.0, 100.0),
            ParamSpec::scalar("a_in", 30.0, 0.0, 60.0),
            ParamSpec::scalar("a_ee", 30.0, 0.0, 60.0),
            ParamSpec::scalar("a_ei", 30.0, 0.0, 60.0),
            ParamSpec::scalar("a_ie", 30.0, 0.0, 60.0),
            ParamSpec::scalar("a_ii", 30.0, 0.0, 60.0),
        ];
        Self::new(params).expect("table defaults are valid")
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn names(&self) -> Arc<[String]> {
        self.names.clone()
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut ParamSpec> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn initial(&self) -> CandidateConfig {
        self.at(&self.params.iter().map(|p| p.initial).collect::<Vec<_>>())
            .expect("initial values are valid")
    }

    /// Candidate from one raw value per parameter (the mean for gammas).
    pub fn at(&self, raw: &[f64]) -> Result<CandidateConfig> {
        if raw.len() != self.params.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} values for {} parameters",
                raw.len(),
                self.params.len()
            )));
        }
        let values = self
            .params
            .iter()
            .zip(raw)
            .map(|(p, &x)| p.value_at(if p.tunable { x } else { p.initial }))
            .collect::<Result<_>>()?;
        CandidateConfig::new(self.names.clone(), values)
    }

    /// Raw value of a point strictly inside `(lo, hi)` at unit position `u`.
    fn interior(p: &ParamSpec, u: f64) -> f64 {
        let w = p.width();
        (p.lo + u * w).clamp(p.lo + 1e-9 * w, p.hi - 1e-9 * w)
    }

    /// Latin hypercube over the tunable parameters.
    pub fn latin_hypercube(&self, n: usize, rng: &mut Rng) -> Result<Vec<CandidateConfig>> {
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(self.params.len());
        for p in &self.params {
            let mut col: Vec<f64> = (0..n)
                .map(|k| Self::interior(p, (k as f64 + rng.random::<f64>()) / n as f64))
                .collect();
            col.shuffle(rng);
            columns.push(col);
        }
        (0..n)
            .map(|i| self.at(&columns.iter().map(|c| c[i]).collect::<Vec<_>>()))
            .collect()
    }

    pub fn random(&self, n: usize, rng: &mut Rng) -> Result<Vec<CandidateConfig>> {
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = self.params.iter().map(|p| Self::interior(p, rng.random())).collect();
                self.at(&raw)
            })
            .collect()
    }

    pub fn contains(&self, c: &CandidateConfig) -> bool {
        c.names == self.names
            && self.params.iter().zip(&c.values).all(|(p, v)| {
                let x = v.center();
                x >= p.lo && x <= p.hi
            })
    }
}

/// Turns candidates into point clouds and compares them with sliced W2.
///
/// Every coordinate uses a fixed stratified quantile grid, permuted by its own
/// seeded stream, so two candidates are always compared with common random
/// numbers and the distance is a deterministic function of the pair.
#[derive(Clone, Debug)]
pub struct DistributionMetric {
    samples: usize,
    projections: Projections,
    perms: Vec<Vec<usize>>,
    /// Per-coordinate divisor.
    scale: Vec<f64>,
    names: Arc<[String]>,
}

impl DistributionMetric {
    pub fn new(space: &SearchSpace, samples: usize, n_projections: usize, normalize: bool, seed: u64) -> Result<Self> {
        let scale = space
            .params
            .iter()
            .map(|p| if normalize { p.width() } else { 1.0 })
            .collect();
        Self::with_scale(space.names(), scale, samples, n_projections, seed)
    }

    fn with_scale(
        names: Arc<[String]>,
        scale: Vec<f64>,
        samples: usize,
        n_projections: usize,
        seed: u64,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::ParameterDomain("samples per distribution must be >= 1".into()));
        }
        let d = names.len();
        let perms = (0..d)
            .map(|j| {
                let mut rng = seeds::rng_from(seeds::derive_indexed(seed, "coordinates", j as u64));
                let mut perm: Vec<usize> = (0..samples).collect();
                perm.shuffle(&mut rng);
                perm
            })
            .collect();
        Ok(Self {
            samples,
            projections: Projections::new(d, n_projections, seed)?,
            perms,
            scale,
            names,
        })
    }

    pub fn materialize(&self, c: &CandidateConfig) -> Result<EmpiricalDistribution> {
        if c.names != self.names {
            return Err(Error::SchemaMismatch(
                "candidate does not match the metric's parameters".into(),
            ));
        }
        let s = self.samples;
        let columns: Vec<Vec<f64>> = c
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| match v {
                ParamValue::Fixed(x) => Ok(vec![x / self.scale[j]; s]),
                ParamValue::Gamma(g) => {
                    let unit = StatGamma::new(g.shape, 1.0).map_err(|e| Error::ParameterDomain(e.to_string()))?;
                    Ok((0..s)
                        .map(|i| {
                            let u = (self.perms[j][i] as f64 + 0.5) / s as f64;
                            g.scale * unit.inverse_cdf(u) / self.scale[j]
                        })
                        .collect())
                }
            })
            .collect::<Result<_>>()?;
        EmpiricalDistribution::uniform((0..s).map(|i| columns.iter().map(|c| c[i]).collect()).collect())
    }

    pub fn signature(&self, c: &CandidateConfig) -> Result<Signature> {
        self.projections.signature(&self.materialize(c)?)
    }

    /// `sqrt(d) * SW2`, which equals `|v|` on average for a translation by `v`.
    pub fn distance_between(&self, a: &Signature, b: &Signature) -> f64 {
        (self.names.len() as f64).sqrt() * a.distance(b)
    }

    pub fn distance(&self, a: &CandidateConfig, b: &CandidateConfig) -> Result<f64> {
        if !a.same_schema(b) {
            return Err(Error::SchemaMismatch("candidates have different parameters".into()));
        }
        Ok(self.distance_between(&self.signature(a)?, &self.signature(b)?))
    }
}

/// Distance between the joint hyperparameter distributions of two candidates
/// (unnormalized coordinates, 128 projections).
pub fn param_distribution_distance(
    a: &CandidateConfig,
    b: &CandidateConfig,
    samples_per_dist: usize,
    seed: u64,
) -> Result<f64> {
    if !a.same_schema(b) {
        return Err(Error::SchemaMismatch("candidates have different parameters".into()));
    }
    let metric =
        DistributionMetric::with_scale(a.names.clone(), vec![1.0; a.names.len()], samples_per_dist, 128, seed)?;
    metric.distance(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::w2_1d;

    fn one_gamma(shape: f64) -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::gamma("tau", shape, 20.0, 0.0, 100.0)]).unwrap()
    }

    #[test]
    fn table_defaults() {
        let s = SearchSpace::table_defaults(3.0);
        let init = s.initial();
        assert_eq!(init.scalar("p_ir").unwrap(), 0.05);
        assert_eq!(init.scalar("lambda").unwrap(), 1.0);
        assert_eq!(init.gamma("tau_e").unwrap().mean(), 50.0);
        assert_eq!(init.scalar("a_ii").unwrap(), 30.0);
        assert!(s.contains(&init));
    }

    #[test]
    fn lhs_respects_ranges_and_strata() {
        let s = SearchSpace::table_defaults(3.0);
        let mut rng = seeds::rng_from(4);
        let design = s.latin_hypercube(10, &mut rng).unwrap();
        assert!(design.iter().all(|c| s.contains(c)));
        let mut strata: Vec<usize> = design
            .iter()
            .map(|c| (c.scalar("lambda").unwrap() / 2.0 * 10.0) as usize)
            .collect();
        strata.sort_unstable();
        assert_eq!(strata, (0..10).collect::<Vec<_>>());
        // frozen parameters never move
        assert!(design.iter().all(|c| c.scalar("eta").unwrap() == 10.0));
    }

    #[test]
    fn identical_configs_are_at_zero_distance() {
        let s = SearchSpace::table_defaults(3.0);
        let c = s.initial();
        assert_eq!(param_distribution_distance(&c, &c, 64, 1).unwrap(), 0.0);
    }

    #[test]
    fn scalar_shift_is_a_translation() {
        let s = SearchSpace::new(vec![
            ParamSpec::scalar("x", 1.0, 0.0, 10.0),
            ParamSpec::gamma("tau", 2.0, 20.0, 0.0, 100.0),
        ])
        .unwrap();
        let a = s.at(&[1.0, 20.0]).unwrap();
        let b = s.at(&[4.0, 20.0]).unwrap();
        let d = param_distribution_distance(&a, &b, 256, 3).unwrap();
        assert!((d - 3.0).abs() < 0.3, "{d}");
    }

    #[test]
    fn one_dimensional_gamma_matches_quantile_reference() {
        let s = one_gamma(2.0);
        let a = s.at(&[20.0]).unwrap();
        let b = s.at(&[24.0]).unwrap();
        let d = param_distribution_distance(&a, &b, 512, 9).unwrap();
        // Dense independent draws of gamma(2, 10) and gamma(2, 12).
        let mut rng = seeds::rng_from(77);
        let ga = GammaSpec::new(2.0, 10.0).unwrap();
        let gb = GammaSpec::new(2.0, 12.0).unwrap();
        let xs: Vec<f64> = (0..200_000).map(|_| ga.sample(&mut rng)).collect();
        let ys: Vec<f64> = (0..200_000).map(|_| gb.sample(&mut rng)).collect();
        let reference = w2_1d(
            &EmpiricalDistribution::from_values(&xs).unwrap(),
            &EmpiricalDistribution::from_values(&ys).unwrap(),
        )
        .unwrap();
        // Same shape, so the exact value is |scale difference| * sqrt(E[X^2]) = 2 * sqrt(6).
        assert!((reference - 2.0 * 6f64.sqrt()).abs() / reference < 0.03);
        assert!((d - reference).abs() / reference < 0.03, "{d} vs {reference}");
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let a = one_gamma(2.0).initial();
        let b = SearchSpace::table_defaults(3.0).initial();
        assert!(param_distribution_distance(&a, &b, 16, 0).is_err());
    }

    #[test]
    fn blob_is_json() {
        let c = one_gamma(2.0).initial();
        let v: serde_json::Value = serde_json::from_str(&c.to_blob()).unwrap();
        assert_eq!(v["tau"]["shape"], 2.0);
    }
}

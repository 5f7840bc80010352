use rayon::prelude::*;

use super::kernel::MaternParams;
use super::model::{gp_fit, Metric};
use crate::ot::{sinkhorn, sq_euclidean, EmpiricalDistribution, Signature};
use crate::seeds;
use crate::space::{CandidateConfig, DistributionMetric, SearchSpace};
use crate::{Error, Result};

/// Distance between candidate distributions fed to the kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelDistance {
    /// Sliced W2 over shared projections.
    Sliced,
    /// Entropic W2 between the materialized point clouds. Cost grows with the
    /// square of `samples_per_dist`. Pairs where Sinkhorn fails to converge
    /// fall back to the sliced value.
    Sinkhorn { reg: f64 },
}

const SINKHORN_ITERS: usize = 2000;
const SINKHORN_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct BoSettings {
    pub n_init: usize,
    pub budget: usize,
    pub pool_size: usize,
    pub smoothness: f64,
    pub samples_per_dist: usize,
    pub n_projections: usize,
    /// Divide each coordinate by its range width before comparing.
    pub normalize: bool,
    /// Observation noise as a fraction of the kernel variance.
    pub noise_ratio: f64,
    pub distance: KernelDistance,
    pub seed: u64,
}

impl Default for BoSettings {
    fn default() -> Self {
        Self {
            n_init: 5,
            budget: 25,
            pool_size: 256,
            smoothness: 1.5,
            samples_per_dist: 256,
            n_projections: 128,
            normalize: true,
            noise_ratio: 1e-6,
            distance: KernelDistance::Sliced,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub score: f64,
    /// Best score after this evaluation.
    pub incumbent: f64,
    /// Distance from this candidate to the incumbent after this evaluation.
    pub distance_to_incumbent: f64,
    pub config: CandidateConfig,
    /// The objective failed; `score` is the worst score seen so far.
    pub failed: bool,
}

#[derive(Clone, Debug)]
pub struct BoResult {
    pub best: CandidateConfig,
    pub best_score: f64,
    pub trace: Vec<TraceRow>,
}

/// A candidate as the kernel sees it.
#[derive(Clone, Debug)]
struct Embedded {
    sig: Signature,
    cloud: Option<EmpiricalDistribution>,
}

struct Embedding<'a> {
    metric: &'a DistributionMetric,
    distance: KernelDistance,
}

impl Embedding<'_> {
    fn embed(&self, c: &CandidateConfig) -> Result<Embedded> {
        let cloud = match self.distance {
            KernelDistance::Sliced => None,
            KernelDistance::Sinkhorn { .. } => Some(self.metric.materialize(c)?),
        };
        Ok(Embedded {
            sig: self.metric.signature(c)?,
            cloud,
        })
    }
}

impl Metric<Embedded> for Embedding<'_> {
    fn distance(&self, a: &Embedded, b: &Embedded) -> f64 {
        let sliced = || self.metric.distance_between(&a.sig, &b.sig);
        match (self.distance, &a.cloud, &b.cloud) {
            (KernelDistance::Sinkhorn { reg }, Some(p), Some(q)) => {
                if a.sig == b.sig {
                    return 0.0;
                }
                sinkhorn(p, q, sq_euclidean, reg, SINKHORN_ITERS, SINKHORN_TOL)
                    .map_or_else(|_| sliced(), |o| o.distance)
            }
            _ => sliced(),
        }
    }
}

struct Observations {
    configs: Vec<CandidateConfig>,
    points: Vec<Embedded>,
    scores: Vec<f64>,
    failed: Vec<bool>,
}

impl Observations {
    fn worst(&self) -> f64 {
        self.scores
            .iter()
            .zip(&self.failed)
            .filter(|(_, f)| !**f)
            .map(|(s, _)| *s)
            .fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, config: CandidateConfig, point: Embedded, score: Option<f64>) {
        let s = match score {
            Some(s) => s,
            None => {
                let w = self.worst();
                if w.is_finite() {
                    w
                } else {
                    0.0
                }
            }
        };
        self.configs.push(config);
        self.points.push(point);
        self.scores.push(s);
        self.failed.push(score.is_none());
    }

    fn best(&self) -> usize {
        (0..self.scores.len()).fold(0, |b, i| if self.scores[i] > self.scores[b] { i } else { b })
    }
}

fn check(settings: &BoSettings) -> Result<()> {
    if settings.n_init == 0 || settings.budget < settings.n_init {
        return Err(Error::ParameterDomain(format!(
            "need budget ({}) >= n_init ({}) >= 1",
            settings.budget, settings.n_init
        )));
    }
    if settings.pool_size == 0 {
        return Err(Error::ParameterDomain("pool size must be >= 1".into()));
    }
    if let KernelDistance::Sinkhorn { reg } = settings.distance {
        if !(reg > 0.0 && reg.is_finite()) {
            return Err(Error::ParameterDomain(format!("sinkhorn reg must be > 0, got {reg}")));
        }
    }
    Ok(())
}

fn evaluate<F>(objective: &F, configs: &[CandidateConfig]) -> Vec<Option<f64>>
where
    F: Fn(&CandidateConfig) -> Result<f64> + Sync,
{
    configs
        .par_iter()
        .map(|c| objective(c).ok().filter(|s| s.is_finite()))
        .collect()
}

fn initial_design<F>(
    space: &SearchSpace,
    objective: &F,
    settings: &BoSettings,
    embedding: &Embedding,
) -> Result<Observations>
where
    F: Fn(&CandidateConfig) -> Result<f64> + Sync,
{
    let mut rng = seeds::rng(settings.seed, "bo-design");
    let design = space.latin_hypercube(settings.n_init, &mut rng)?;
    let points = design.iter().map(|c| embedding.embed(c)).collect::<Result<Vec<_>>>()?;
    let scores = evaluate(objective, &design);
    let mut obs = Observations {
        configs: Vec::new(),
        points: Vec::new(),
        scores: Vec::new(),
        failed: Vec::new(),
    };
    // Successful points first define "worst"; failures then take it.
    let worst = scores.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    for ((c, e), score) in design.into_iter().zip(points).zip(scores) {
        obs.configs.push(c);
        obs.points.push(e);
        obs.failed.push(score.is_none());
        obs.scores
            .push(score.unwrap_or(if worst.is_finite() { worst } else { 0.0 }));
    }
    Ok(obs)
}

fn median_length_scale(embedding: &Embedding, points: &[Embedded]) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(embedding.distance(&points[i], &points[j]));
        }
    }
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

fn finish(obs: Observations, embedding: &Embedding) -> BoResult {
    let mut trace = Vec::with_capacity(obs.scores.len());
    let mut best = 0;
    for i in 0..obs.scores.len() {
        if obs.scores[i] > obs.scores[best] {
            best = i;
        }
        trace.push(TraceRow {
            iter: i,
            score: obs.scores[i],
            incumbent: obs.scores[best],
            distance_to_incumbent: embedding.distance(&obs.points[i], &obs.points[best]),
            config: obs.configs[i].clone(),
            failed: obs.failed[i],
        });
    }
    let b = obs.best();
    BoResult {
        best: obs.configs[b].clone(),
        best_score: obs.scores[b],
        trace,
    }
}

/// Maximizes `objective` over `space`: a Latin-hypercube initial design, then
/// one expected-improvement pick from a fresh random pool per iteration.
pub fn bo_loop<F>(space: &SearchSpace, objective: F, settings: &BoSettings) -> Result<BoResult>
where
    F: Fn(&CandidateConfig) -> Result<f64> + Sync,
{
    check(settings)?;
    let metric = DistributionMetric::new(
        space,
        settings.samples_per_dist,
        settings.n_projections,
        settings.normalize,
        settings.seed,
    )?;
    let embedding = Embedding {
        metric: &metric,
        distance: settings.distance,
    };
    let mut obs = initial_design(space, &objective, settings, &embedding)?;
    let length_scale = median_length_scale(&embedding, &obs.points);
    let mut pool_rng = seeds::rng(settings.seed, seeds::BO);
    for _ in settings.n_init..settings.budget {
        let n = obs.scores.len() as f64;
        let mean = obs.scores.iter().sum::<f64>() / n;
        let var = obs.scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let variance = if var > 1e-12 { var } else { 1.0 };
        let kernel = MaternParams {
            variance,
            length_scale,
            smoothness: settings.smoothness,
        };
        let model = gp_fit(
            &embedding,
            &obs.points,
            &obs.scores,
            kernel,
            settings.noise_ratio * variance,
            mean,
        )?;
        let pool = space.random(settings.pool_size, &mut pool_rng)?;
        let pool_points = pool
            .par_iter()
            .map(|c| embedding.embed(c))
            .collect::<Result<Vec<_>>>()?;
        let pick = model.suggest_next(&embedding, &pool_points).unwrap_or(0);
        let config = pool[pick].clone();
        let score = evaluate(&objective, std::slice::from_ref(&config))[0];
        obs.push(config, pool_points[pick].clone(), score);
    }
    Ok(finish(obs, &embedding))
}

/// Baseline with the same initial design as [`bo_loop`] followed by uniform
/// random candidates.
pub fn random_search<F>(space: &SearchSpace, objective: F, settings: &BoSettings) -> Result<BoResult>
where
    F: Fn(&CandidateConfig) -> Result<f64> + Sync,
{
    check(settings)?;
    let metric = DistributionMetric::new(
        space,
        settings.samples_per_dist,
        settings.n_projections,
        settings.normalize,
        settings.seed,
    )?;
    let embedding = Embedding {
        metric: &metric,
        distance: settings.distance,
    };
    let mut obs = initial_design(space, &objective, settings, &embedding)?;
    let mut rng = seeds::rng(settings.seed, "random-search");
    let rest = space.random(settings.budget - settings.n_init, &mut rng)?;
    let scores = evaluate(&objective, &rest);
    for (c, s) in rest.into_iter().zip(scores) {
        let e = embedding.embed(&c)?;
        obs.push(c, e, s);
    }
    Ok(finish(obs, &embedding))
}

pub fn trace_csv(trace: &[TraceRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "iter",
        "score",
        "incumbent",
        "distance_to_incumbent",
        "failed",
        "config",
    ])?;
    for r in trace {
        w.write_record([
            r.iter.to_string(),
            format!("{:?}", r.score),
            format!("{:?}", r.incumbent),
            format!("{:?}", r.distance_to_incumbent),
            u8::from(r.failed).to_string(),
            r.config.to_blob(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

//! Data -> encoding -> STDP training -> state extraction -> readout.

use super::{ExperimentConfig, Variant};
use crate::data::{gen_synthetic, Dataset};
use crate::lif::{sample_population, NeuronParams, Polarity, PopulationSpec};
use crate::plasticity::sample_stdp_population;
use crate::separability::effective_rank;
use crate::sim::{fit_readout, Network, SpikeTrain};
use crate::space::{CandidateConfig, SearchSpace};
use crate::topology::{ClassMap, NetworkSpec, NetworkTopology, WeightInit};
use crate::{seeds, Error, Result};

/// Scale of the A-constants: `A = 60` maps to a mean weight of `w_max`.
pub const A_FULL_SCALE: f64 = 60.0;

/// A generated, optionally cropped and encoded dataset.
#[derive(Clone, Debug)]
pub struct PipelineData {
    pub dataset: Dataset,
    pub trains: Vec<SpikeTrain>,
    pub n_inputs: usize,
}

impl PipelineData {
    pub fn generate(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let raw = gen_synthetic(&cfg.synthetic_spec(), seeds::derive(seed, seeds::DATA))?;
        let dataset = if cfg.sim.crop_h > 0 {
            raw.filtered(cfg.sim.crop_h, cfg.sim.crop_w)?
        } else {
            raw
        };
        let trains = dataset.encode(cfg.sim.encode_threshold)?;
        let n_inputs = dataset.samples[0].height * dataset.samples[0].width;
        Ok(Self {
            dataset,
            trains,
            n_inputs,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunMetrics {
    /// Held-out accuracy.
    pub accuracy: f64,
    pub train_accuracy: f64,
    /// Mean over stimuli of the per-trial average activation.
    pub mean_activation: f64,
    pub active_neurons: usize,
    pub ac_ops: u64,
    /// Effective rank of the state matrix over all stimuli.
    pub effective_rank: usize,
}

pub fn network_spec(cfg: &ExperimentConfig, n_inputs: usize) -> NetworkSpec {
    let nw = &cfg.network;
    NetworkSpec {
        n: nw.n,
        dims: None,
        lambda: nw.lambda,
        c_map: ClassMap {
            ee: nw.c_ee,
            ei: nw.c_ei,
            ie: nw.c_ie,
            ii: nw.c_ii,
            input: nw.p_ir,
        },
        ei_ratio: nw.ei_ratio,
        weights: WeightInit {
            means: ClassMap {
                ee: nw.mean_ee,
                ei: nw.mean_ei,
                ie: nw.mean_ie,
                ii: nw.mean_ii,
                input: nw.mean_in,
            },
            w_scale: nw.w_scale,
            w_max: nw.w_max,
        },
        n_inputs,
        p_ir: nw.p_ir,
        input_fraction: nw.input_fraction,
        n_readout: nw.n_readout,
        readout_taps: (nw.readout_taps > 0).then_some(nw.readout_taps),
    }
}

/// Builds the reservoir for one seed. Topology, neuron draws and STDP draws
/// come from separate seed streams, so variants of the same seed share their
/// wiring exactly.
pub fn build_network(cfg: &ExperimentConfig, variant: Variant, seed: u64, n_inputs: usize) -> Result<Network> {
    let topology = NetworkTopology::generate(&network_spec(cfg, n_inputs), seeds::derive(seed, seeds::TOPOLOGY))?;
    let ne = &cfg.neuron;
    let template = NeuronParams {
        tau_m: ne.tau_e.mean(),
        v_th: ne.v_th,
        v_reset: ne.v_reset,
        a: ne.a,
        r_m: ne.r_m,
        refrac: ne.refrac,
        polarity: Polarity::Excitatory,
    };
    let neurons = sample_population(
        &PopulationSpec {
            n: cfg.network.n,
            excitatory: ne.tau_e,
            inhibitory: ne.tau_i,
            ei_ratio: cfg.network.ei_ratio,
            template,
            heterogeneous: variant.heterogeneous_neurons(),
            capacitance: (ne.capacitance > 0.0).then_some(ne.capacitance),
        },
        seeds::derive(seed, seeds::NEURONS),
    )?;
    let n_syn = topology.recurrent.len() + topology.inputs.len();
    let stdp = sample_stdp_population(
        n_syn,
        &cfg.stdp_specs(),
        variant.heterogeneous_stdp(),
        seeds::derive(seed, seeds::STDP),
    );
    let readout = NeuronParams {
        tau_m: ne.readout_tau,
        v_th: f64::INFINITY,
        v_reset: 0.0,
        a: 0.0,
        r_m: 1.0,
        refrac: 0.0,
        polarity: Polarity::Excitatory,
    };
    Network::new(topology, neurons, &stdp, readout, cfg.network.w_max)
}

/// Training indices after keeping the first `ceil(fraction * k)` (at least
/// one) of each class's `k` training samples.
pub fn subsample_train(dataset: &Dataset, train: &[usize], fraction: f64) -> Vec<usize> {
    let mut keep = Vec::new();
    for c in 0..dataset.n_classes {
        let idx: Vec<usize> = train.iter().copied().filter(|&i| dataset.labels[i] == c).collect();
        let k = ((fraction * idx.len() as f64).ceil() as usize).clamp(1.min(idx.len()), idx.len());
        keep.extend_from_slice(&idx[..k]);
    }
    keep.sort_unstable();
    keep
}

/// Full pipeline on pre-generated data.
pub fn run_on(
    cfg: &ExperimentConfig,
    variant: Variant,
    seed: u64,
    data: &PipelineData,
    train_fraction: f64,
) -> Result<RunMetrics> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::ParameterDomain(format!(
            "train fraction must lie in (0, 1], got {train_fraction}"
        )));
    }
    let mut net = build_network(cfg, variant, seed, data.n_inputs)?;
    let (train, test) = data.dataset.stratified_split();
    let train = subsample_train(&data.dataset, &train, train_fraction);
    let train_trains: Vec<SpikeTrain> = train.iter().map(|&i| data.trains[i].clone()).collect();
    net.train_unsupervised(&train_trains, cfg.sim.epochs, cfg.sim.dt)?;
    let ex = net.extract_states(&data.trains, cfg.sim.dt)?;
    let labels = &data.dataset.labels;
    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    let train_states = ex.states.select_rows(&train);
    let model = fit_readout(&train_states, &pick(&train), cfg.sim.ridge)?;
    let accuracy = if test.is_empty() {
        f64::NAN
    } else {
        model.accuracy(&ex.states.select_rows(&test), &pick(&test))?
    };
    let train_accuracy = model.accuracy(&train_states, &pick(&train))?;
    let rank = effective_rank(&ex.states, cfg.sim.rank_threshold)?;
    Ok(RunMetrics {
        accuracy,
        train_accuracy,
        mean_activation: ex.mean_activation(),
        active_neurons: ex.active_neurons(),
        ac_ops: ex.total_ac_ops(),
        effective_rank: rank.effective_rank,
    })
}

pub fn run_pipeline(cfg: &ExperimentConfig, variant: Variant, seed: u64, train_fraction: f64) -> Result<RunMetrics> {
    let data = PipelineData::generate(cfg, seed)?;
    run_on(cfg, variant, seed, &data, train_fraction)
}

/// The tunable search space with time constants of gamma shape `tau_shape`.
pub fn search_space(cfg: &ExperimentConfig) -> SearchSpace {
    SearchSpace::table_defaults(cfg.bo.tau_shape)
}

/// Copy of `cfg` with the candidate's values bound to the pipeline knobs:
/// `lambda`, `p_ir`, the two membrane time-constant gammas, and the
/// A-constants as mean weights `A / 60 * w_max`. Parameters without a knob
/// are carried but unused.
pub fn apply_candidate(cfg: &ExperimentConfig, c: &CandidateConfig) -> Result<ExperimentConfig> {
    let mut out = cfg.clone();
    out.network.lambda = c.scalar("lambda")?;
    out.network.p_ir = c.scalar("p_ir")?;
    out.neuron.tau_e = c.gamma("tau_e")?;
    out.neuron.tau_i = c.gamma("tau_i")?;
    let w = cfg.network.w_max / A_FULL_SCALE;
    out.network.mean_in = c.scalar("a_in")? * w;
    out.network.mean_ee = c.scalar("a_ee")? * w;
    out.network.mean_ei = c.scalar("a_ei")? * w;
    out.network.mean_ie = c.scalar("a_ie")? * w;
    out.network.mean_ii = c.scalar("a_ii")? * w;
    out.validate()?;
    Ok(out)
}

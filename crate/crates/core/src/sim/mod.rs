//! Time-stepped reservoir simulation.
//!
//! Within step `k` (time `t = k * dt`):
//!
//! 1. synaptic traces decay by one step (plasticity on);
//! 2. input spikes binned to step `k` inject their weights into this step's
//!    current and fire their presynaptic STDP hook;
//! 3. recurrent spikes from step `k - 1` inject their weights (one-step
//!    transmission delay), and likewise into the readout neurons;
//! 4. every recurrent neuron integrates its current and may spike;
//! 5. for this step's recurrent spikes, depression (outgoing synapses) and
//!    then potentiation (incoming synapses) are applied with traces as they
//!    stood before this step's spikes, after which the traces are bumped.
//!
//! Readout neurons are non-spiking leaky integrators; their potentials at the
//! end of the train form the reservoir state. Every trial starts from reset
//! potentials and zero traces.

mod readout;
mod spikes;

pub use readout::{fit_readout, ReadoutModel};
pub use spikes::{SpikeEvent, SpikeTrain};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::lif::{step_with_decay, NeuronParams, NeuronState, Polarity};
use crate::plasticity::{StdpParams, SynapseState};
use crate::topology::NetworkTopology;
use crate::{Error, Result};

/// Readout potentials sampled at the end of a stimulus.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirState {
    pub readout_potentials: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActivationReport {
    /// Recurrent spikes per recurrent neuron over the trial.
    pub avg_activation: f64,
    /// Recurrent neurons with at least one spike.
    pub active_neuron_count: usize,
    /// Accumulate operations: each spike costs its synaptic fan-out.
    pub ac_ops: u64,
    pub total_spikes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpikeRecord {
    pub neuron: u32,
    pub step: u32,
}

#[derive(Clone, Debug)]
pub struct TrialOutput {
    pub state: ReservoirState,
    pub report: ActivationReport,
    /// Recurrent spikes in emission order.
    pub spike_log: Vec<SpikeRecord>,
}

/// N_stimuli x N_readout matrix of final readout potentials.
#[derive(Clone, Debug, PartialEq)]
pub struct StateMatrix(pub DMatrix<f64>);

impl StateMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Validation("state rows have different lengths".into()));
        }
        Ok(Self(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self(self.0.select_rows(idx))
    }

    /// CSV with a `s0,s1,...` header row.
    pub fn to_csv(&self) -> String {
        let mut out = (0..self.ncols()).map(|j| format!("s{j}")).collect::<Vec<_>>().join(",");
        out.push('\n');
        for i in 0..self.nrows() {
            let row: Vec<String> = (0..self.ncols()).map(|j| format!("{:?}", self.0[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Validation(format!("bad value `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

/// Spike count per recurrent neuron divided by the population size.
pub fn average_activation(spike_log: &[SpikeRecord], n_recurrent: usize, duration: f64) -> Result<f64> {
    if !(duration > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "trial duration must be > 0, got {duration}"
        )));
    }
    if n_recurrent == 0 {
        return Err(Error::EmptyPopulation);
    }
    Ok(spike_log.len() as f64 / n_recurrent as f64)
}

/// Static part of a network: parameters and adjacency.
#[derive(Clone, Debug)]
struct Wiring {
    neurons: Vec<NeuronParams>,
    readout: NeuronParams,
    /// Recurrent edge ids by presynaptic neuron.
    out_edges: Vec<Vec<u32>>,
    /// Recurrent edge ids by postsynaptic neuron.
    in_edges: Vec<Vec<u32>>,
    /// Input edge ids by input neuron.
    input_out: Vec<Vec<u32>>,
    /// Input edge ids by recurrent target.
    input_in: Vec<Vec<u32>>,
    /// (output, weight) taps by recurrent source.
    readout_taps: Vec<Vec<(u32, f64)>>,
    recurrent_post: Vec<u32>,
    input_target: Vec<u32>,
    recurrent_fan_out: Vec<u64>,
    input_fan_out: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct Network {
    pub topology: NetworkTopology,
    /// Plastic state of each recurrent edge, parallel to `topology.recurrent`.
    pub synapses: Vec<SynapseState>,
    /// Plastic state of each input edge, parallel to `topology.inputs`.
    pub input_synapses: Vec<SynapseState>,
    wiring: Wiring,
}

impl Network {
    /// `stdp` holds one parameter set per recurrent edge followed by one per
    /// input edge.
    pub fn new(
        topology: NetworkTopology,
        neurons: Vec<NeuronParams>,
        stdp: &[StdpParams],
        readout: NeuronParams,
        w_max: f64,
    ) -> Result<Self> {
        if neurons.len() != topology.n {
            return Err(Error::DimensionMismatch {
                expected: topology.n,
                found: neurons.len(),
            });
        }
        let n_syn = topology.recurrent.len() + topology.inputs.len();
        if stdp.len() != n_syn {
            return Err(Error::DimensionMismatch {
                expected: n_syn,
                found: stdp.len(),
            });
        }
        for p in &neurons {
            p.validate()?;
        }
        readout.validate()?;
        for p in stdp {
            p.validate()?;
        }
        let n = topology.n;
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (id, e) in topology.recurrent.iter().enumerate() {
            out_edges[e.pre].push(id as u32);
            in_edges[e.post].push(id as u32);
        }
        let mut input_out = vec![Vec::new(); topology.n_inputs];
        let mut input_in = vec![Vec::new(); n];
        for (id, e) in topology.inputs.iter().enumerate() {
            if e.input >= topology.n_inputs || e.target >= n {
                return Err(Error::Validation(format!("input edge {id} is out of range")));
            }
            input_out[e.input].push(id as u32);
            input_in[e.target].push(id as u32);
        }
        let mut readout_taps = vec![Vec::new(); n];
        for t in &topology.readout {
            if t.output >= topology.n_readout || t.source >= n {
                return Err(Error::Validation("readout tap is out of range".into()));
            }
            readout_taps[t.source].push((t.output as u32, t.weight));
        }
        let synapses = topology
            .recurrent
            .iter()
            .zip(stdp)
            .map(|(e, p)| SynapseState::new(e.weight, *p, topology.polarity[e.pre], w_max))
            .collect();
        let input_synapses = topology
            .inputs
            .iter()
            .zip(&stdp[topology.recurrent.len()..])
            .map(|(e, p)| SynapseState::new(e.weight, *p, Polarity::Excitatory, w_max))
            .collect();
        let wiring = Wiring {
            recurrent_post: topology.recurrent.iter().map(|e| e.post as u32).collect(),
            input_target: topology.inputs.iter().map(|e| e.target as u32).collect(),
            recurrent_fan_out: topology.recurrent_fan_out(),
            input_fan_out: topology.input_fan_out(),
            neurons,
            readout,
            out_edges,
            in_edges,
            input_out,
            input_in,
            readout_taps,
        };
        Ok(Self {
            topology,
            synapses,
            input_synapses,
            wiring,
        })
    }

    pub fn neurons(&self) -> &[NeuronParams] {
        &self.wiring.neurons
    }

    pub fn n_recurrent(&self) -> usize {
        self.topology.n
    }

    /// Current recurrent weights, parallel to `topology.recurrent`.
    pub fn weights(&self) -> Vec<f64> {
        self.synapses.iter().map(|s| s.weight).collect()
    }

    pub fn input_weights(&self) -> Vec<f64> {
        self.input_synapses.iter().map(|s| s.weight).collect()
    }

    /// Fan-out charged per spike of recurrent neuron `i` (recurrent edges plus
    /// readout taps).
    pub fn recurrent_fan_out(&self) -> &[u64] {
        &self.wiring.recurrent_fan_out
    }

    pub fn input_fan_out(&self) -> &[u64] {
        &self.wiring.input_fan_out
    }

    /// Runs one stimulus. With plasticity on, synaptic weights are updated in
    /// place.
    pub fn run_trial(&mut self, input: &SpikeTrain, dt: f64, plasticity_on: bool) -> Result<TrialOutput> {
        simulate(
            &self.wiring,
            self.topology.n_readout,
            &mut self.synapses,
            &mut self.input_synapses,
            input,
            dt,
            plasticity_on,
        )
    }

    /// Runs one stimulus with frozen weights.
    pub fn run_frozen(&self, input: &SpikeTrain, dt: f64) -> Result<TrialOutput> {
        let mut rec = self.synapses.clone();
        let mut inp = self.input_synapses.clone();
        simulate(
            &self.wiring,
            self.topology.n_readout,
            &mut rec,
            &mut inp,
            input,
            dt,
            false,
        )
    }

    /// Presents the dataset `epochs` times in order with STDP on.
    pub fn train_unsupervised(&mut self, dataset: &[SpikeTrain], epochs: usize, dt: f64) -> Result<()> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if epochs == 0 {
            return Err(Error::ParameterDomain("epochs must be >= 1".into()));
        }
        for _ in 0..epochs {
            for train in dataset {
                self.run_trial(train, dt, true)?;
            }
        }
        Ok(())
    }

    /// Frozen-weight states for every stimulus, evaluated in parallel.
    pub fn extract_states(&self, dataset: &[SpikeTrain], dt: f64) -> Result<Extraction> {
        let outputs: Vec<TrialOutput> = dataset
            .par_iter()
            .map(|train| self.run_frozen(train, dt))
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<f64>> = outputs.iter().map(|o| o.state.readout_potentials.clone()).collect();
        let mut spike_totals = vec![0u64; self.topology.n];
        for o in &outputs {
            for s in &o.spike_log {
                spike_totals[s.neuron as usize] += 1;
            }
        }
        let states = if rows.is_empty() {
            StateMatrix(DMatrix::zeros(0, self.topology.n_readout))
        } else {
            StateMatrix::from_rows(&rows)?
        };
        Ok(Extraction {
            states,
            reports: outputs.iter().map(|o| o.report).collect(),
            spike_totals,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub states: StateMatrix,
    pub reports: Vec<ActivationReport>,
    /// Recurrent spikes per neuron summed over the dataset.
    pub spike_totals: Vec<u64>,
}

impl Extraction {
    /// Neurons that fired at least once anywhere in the dataset.
    pub fn active_neurons(&self) -> usize {
        self.spike_totals.iter().filter(|&&c| c > 0).count()
    }

    pub fn mean_activation(&self) -> f64 {
        if self.reports.is_empty() {
            return 0.0;
        }
        self.reports.iter().map(|r| r.avg_activation).sum::<f64>() / self.reports.len() as f64
    }

    pub fn total_ac_ops(&self) -> u64 {
        self.reports.iter().map(|r| r.ac_ops).sum()
    }
}

fn simulate(
    w: &Wiring,
    n_readout: usize,
    rec: &mut [SynapseState],
    inp: &mut [SynapseState],
    train: &SpikeTrain,
    dt: f64,
    plastic: bool,
) -> Result<TrialOutput> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::ParameterDomain(format!("dt must be > 0, got {dt}")));
    }
    let n_inputs = w.input_out.len();
    if let Some(bad) = train.events().iter().find(|e| e.neuron >= n_inputs) {
        return Err(Error::Validation(format!(
            "spike train references input neuron {} but the network has {n_inputs}",
            bad.neuron
        )));
    }
    let n = w.neurons.len();
    let last_step = (train.duration() / dt + 1e-9).floor() as usize;

    let decay: Vec<f64> = w.neurons.iter().map(|p| p.decay(dt)).collect();
    let readout_decay = w.readout.decay(dt);
    let (rec_decay, inp_decay) = if plastic {
        for s in rec.iter_mut().chain(inp.iter_mut()) {
            s.t_pre = 0.0;
            s.t_post = 0.0;
        }
        (
            rec.iter().map(|s| s.decay_factors(dt)).collect::<Vec<_>>(),
            inp.iter().map(|s| s.decay_factors(dt)).collect::<Vec<_>>(),
        )
    } else {
        (Vec::new(), Vec::new())
    };

    let mut states: Vec<NeuronState> = w.neurons.iter().map(NeuronState::initial).collect();
    let mut readout: Vec<NeuronState> = vec![NeuronState::initial(&w.readout); n_readout];
    let mut current = vec![0.0f64; n];
    let mut readout_current = vec![0.0f64; n_readout];
    let mut prev_spikes: Vec<usize> = Vec::new();
    let mut spikes: Vec<usize> = Vec::new();
    let mut log = Vec::new();
    let mut ac_ops = 0u64;
    let events = train.events();
    let mut next_event = 0usize;

    for k in 0..=last_step {
        let t = k as f64 * dt;
        if plastic {
            for (s, &(fp, fm)) in rec.iter_mut().zip(&rec_decay) {
                s.decay_by(fp, fm);
            }
            for (s, &(fp, fm)) in inp.iter_mut().zip(&inp_decay) {
                s.decay_by(fp, fm);
            }
        }
        current.iter_mut().for_each(|c| *c = 0.0);
        readout_current.iter_mut().for_each(|c| *c = 0.0);

        while next_event < events.len() && step_of(events[next_event].time, dt).min(last_step) <= k {
            let input = events[next_event].neuron;
            next_event += 1;
            ac_ops += w.input_fan_out[input];
            for &id in &w.input_out[input] {
                let id = id as usize;
                current[w.input_target[id] as usize] += inp[id].weight;
                if plastic {
                    inp[id].on_pre_spike();
                }
            }
        }

        for &pre in &prev_spikes {
            for &id in &w.out_edges[pre] {
                current[w.recurrent_post[id as usize] as usize] += rec[id as usize].weight;
            }
            for &(out, weight) in &w.readout_taps[pre] {
                readout_current[out as usize] += weight;
            }
        }

        spikes.clear();
        for j in 0..n {
            let (s, fired) = step_with_decay(states[j], &w.neurons[j], current[j], t, decay[j]);
            states[j] = s;
            if fired {
                spikes.push(j);
            }
        }
        for (o, s) in readout.iter_mut().enumerate() {
            *s = step_with_decay(*s, &w.readout, readout_current[o], t, readout_decay).0;
        }

        for &j in &spikes {
            ac_ops += w.recurrent_fan_out[j];
            log.push(SpikeRecord {
                neuron: j as u32,
                step: k as u32,
            });
        }

        if plastic && !spikes.is_empty() {
            for &j in &spikes {
                for &id in &w.out_edges[j] {
                    rec[id as usize].depress();
                }
            }
            for &j in &spikes {
                for &id in &w.in_edges[j] {
                    rec[id as usize].potentiate();
                }
                for &id in &w.input_in[j] {
                    inp[id as usize].potentiate();
                }
            }
            for &j in &spikes {
                for &id in &w.out_edges[j] {
                    rec[id as usize].bump_pre();
                }
                for &id in &w.in_edges[j] {
                    rec[id as usize].bump_post();
                }
                for &id in &w.input_in[j] {
                    inp[id as usize].bump_post();
                }
            }
        }

        std::mem::swap(&mut prev_spikes, &mut spikes);
    }

    let active = states.iter().filter(|s| s.spike_count > 0).count();
    let report = ActivationReport {
        avg_activation: average_activation(&log, n, train.duration())?,
        active_neuron_count: active,
        ac_ops,
        total_spikes: log.len() as u64,
    };
    let readout_potentials: Vec<f64> = readout.iter().map(|s| s.v).collect();
    if readout_potentials.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericDomain("readout potential is not finite".into()));
    }
    Ok(TrialOutput {
        state: ReservoirState { readout_potentials },
        report,
        spike_log: log,
    })
}

#[inline]
fn step_of(time: f64, dt: f64) -> usize {
    (time / dt).round() as usize
}

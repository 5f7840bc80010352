//! Trace-based STDP with per-synapse constants.
//!
//! Each synapse keeps its own presynaptic trace `t_pre` (decay `tau_plus`,
//! increment `a_plus_incr`) and postsynaptic trace `t_post` (decay
//! `tau_minus`, increment `a_minus_incr`). A postsynaptic spike potentiates
//! by `A+ * t_pre`; a presynaptic spike depresses by `A- * t_post`. The
//! weight change always reads the opposite trace before the spiking side
//! increments its own.
//!
//! Weight changes act on the synapse's magnitude: for inhibitory-origin
//! synapses potentiation makes the weight more negative. Weights stay in
//! `[0, w_max]` (excitatory origin) or `[-w_max, 0]` (inhibitory origin).

use crate::lif::{GammaSpec, Polarity};
use crate::seeds;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StdpParams {
    /// Potentiation learning rate `A+`.
    pub a_plus_rate: f64,
    /// Depression learning rate `A-`.
    pub a_minus_rate: f64,
    /// Presynaptic trace increment `a+`.
    pub a_plus_incr: f64,
    /// Postsynaptic trace increment `a-`.
    pub a_minus_incr: f64,
    /// Presynaptic trace decay (ms).
    pub tau_plus: f64,
    /// Postsynaptic trace decay (ms).
    pub tau_minus: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        Self {
            a_plus_rate: 0.01,
            a_minus_rate: 0.012,
            a_plus_incr: 1.0,
            a_minus_incr: 1.0,
            tau_plus: 20.0,
            tau_minus: 20.0,
        }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.a_plus_rate, self.a_minus_rate, self.a_plus_incr, self.a_minus_incr];
        if rates.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::ParameterDomain("STDP rates must be >= 0".into()));
        }
        if !(self.tau_plus > 0.0 && self.tau_minus > 0.0) {
            return Err(Error::ParameterDomain("STDP time constants must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynapseState {
    pub weight: f64,
    pub t_pre: f64,
    pub t_post: f64,
    pub params: StdpParams,
    pub origin: Polarity,
    pub w_max: f64,
}

impl SynapseState {
    pub fn new(weight: f64, params: StdpParams, origin: Polarity, w_max: f64) -> Self {
        let mut s = Self {
            weight,
            t_pre: 0.0,
            t_post: 0.0,
            params,
            origin,
            w_max,
        };
        s.weight = s.clamp(weight);
        s
    }

    /// Clamp interval for this synapse's origin.
    pub fn bounds(&self) -> (f64, f64) {
        match self.origin {
            Polarity::Excitatory => (0.0, self.w_max),
            Polarity::Inhibitory => (-self.w_max, 0.0),
        }
    }

    fn clamp(&self, w: f64) -> f64 {
        let (lo, hi) = self.bounds();
        w.clamp(lo, hi)
    }

    /// `(exp(-dt/tau_plus), exp(-dt/tau_minus))`.
    pub fn decay_factors(&self, dt: f64) -> (f64, f64) {
        ((-dt / self.params.tau_plus).exp(), (-dt / self.params.tau_minus).exp())
    }

    pub fn decay_traces(&mut self, dt: f64) {
        let (fp, fm) = self.decay_factors(dt);
        self.decay_by(fp, fm);
    }

    #[inline]
    pub fn decay_by(&mut self, pre_factor: f64, post_factor: f64) {
        self.t_pre *= pre_factor;
        self.t_post *= post_factor;
    }

    /// Depression half of a presynaptic spike (reads `t_post`).
    #[inline]
    pub fn depress(&mut self) {
        let dw = self.params.a_minus_rate * self.t_post;
        self.weight = self.clamp(self.weight - self.origin.sign() * dw);
    }

    /// Potentiation half of a postsynaptic spike (reads `t_pre`).
    #[inline]
    pub fn potentiate(&mut self) {
        let dw = self.params.a_plus_rate * self.t_pre;
        self.weight = self.clamp(self.weight + self.origin.sign() * dw);
    }

    #[inline]
    pub fn bump_pre(&mut self) {
        self.t_pre += self.params.a_plus_incr;
    }

    #[inline]
    pub fn bump_post(&mut self) {
        self.t_post += self.params.a_minus_incr;
    }

    pub fn on_pre_spike(&mut self) {
        self.depress();
        self.bump_pre();
    }

    pub fn on_post_spike(&mut self) {
        self.potentiate();
        self.bump_post();
    }
}

/// Gamma specs for the heterogeneous STDP constants. Trace increments are
/// shared scalars.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StdpSpecs {
    pub a_plus_rate: GammaSpec,
    pub a_minus_rate: GammaSpec,
    pub tau_plus: GammaSpec,
    pub tau_minus: GammaSpec,
    pub a_plus_incr: f64,
    pub a_minus_incr: f64,
}

impl Default for StdpSpecs {
    fn default() -> Self {
        Self {
            a_plus_rate: GammaSpec {
                shape: 2.0,
                scale: 0.005,
            },
            a_minus_rate: GammaSpec {
                shape: 2.0,
                scale: 0.006,
            },
            tau_plus: GammaSpec {
                shape: 2.0,
                scale: 10.0,
            },
            tau_minus: GammaSpec {
                shape: 2.0,
                scale: 10.0,
            },
            a_plus_incr: 1.0,
            a_minus_incr: 1.0,
        }
    }
}

impl StdpSpecs {
    /// Parameters every synapse gets in the homogeneous case.
    pub fn means(&self) -> StdpParams {
        StdpParams {
            a_plus_rate: self.a_plus_rate.mean(),
            a_minus_rate: self.a_minus_rate.mean(),
            a_plus_incr: self.a_plus_incr,
            a_minus_incr: self.a_minus_incr,
            tau_plus: self.tau_plus.mean(),
            tau_minus: self.tau_minus.mean(),
        }
    }
}

pub fn sample_stdp_population(n_synapses: usize, specs: &StdpSpecs, heterogeneous: bool, seed: u64) -> Vec<StdpParams> {
    if !heterogeneous {
        return vec![specs.means(); n_synapses];
    }
    let mut rng = seeds::rng_from(seed);
    (0..n_synapses)
        .map(|_| StdpParams {
            a_plus_rate: specs.a_plus_rate.sample(&mut rng),
            a_minus_rate: specs.a_minus_rate.sample(&mut rng),
            a_plus_incr: specs.a_plus_incr,
            a_minus_incr: specs.a_minus_incr,
            tau_plus: specs.tau_plus.sample(&mut rng),
            tau_minus: specs.tau_minus.sample(&mut rng),
        })
        .collect()
}

//! Leaky integrate-and-fire neurons with gamma-distributed membrane time
//! constants.
//!
//! Dynamics: `tau_m dv/dt = a + r_m I - v`, integrated with exponential Euler
//! (exact for input held constant over a step). After a spike the potential is
//! held at `v_reset` until the refractory window has elapsed.

use rand_distr::{Distribution, Gamma};

use crate::seeds::{self, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Excitatory,
    Inhibitory,
}

impl Polarity {
    /// Sign of the postsynaptic potential this neuron produces.
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Excitatory => 1.0,
            Polarity::Inhibitory => -1.0,
        }
    }

    pub fn is_excitatory(self) -> bool {
        self == Polarity::Excitatory
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronParams {
    /// Membrane time constant (ms).
    pub tau_m: f64,
    pub v_th: f64,
    pub v_reset: f64,
    /// Resting potential.
    pub a: f64,
    /// Membrane resistance.
    pub r_m: f64,
    /// Refractory period (ms).
    pub refrac: f64,
    pub polarity: Polarity,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            tau_m: 50.0,
            v_th: 1.0,
            v_reset: 0.0,
            a: 0.0,
            r_m: 1.0,
            refrac: 2.0,
            polarity: Polarity::Excitatory,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > 0.0) || !self.tau_m.is_finite() {
            return Err(Error::ParameterDomain(format!("tau_m must be > 0, got {}", self.tau_m)));
        }
        if !(self.refrac >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "refrac must be >= 0, got {}",
                self.refrac
            )));
        }
        if !(self.v_th > self.v_reset) {
            return Err(Error::ParameterDomain(format!(
                "v_th ({}) must exceed v_reset ({})",
                self.v_th, self.v_reset
            )));
        }
        Ok(())
    }

    /// Per-step decay factor `exp(-dt / tau_m)`.
    pub fn decay(&self, dt: f64) -> f64 {
        (-dt / self.tau_m).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    /// Time before which the neuron is silenced.
    pub refrac_until: f64,
    pub spike_count: u32,
}

impl NeuronState {
    /// State at the start of a trial: potential at `v_reset`, not refractory.
    pub fn initial(params: &NeuronParams) -> Self {
        Self {
            v: params.v_reset,
            refrac_until: f64::NEG_INFINITY,
            spike_count: 0,
        }
    }
}

/// Advances one neuron by `dt` ending at time `t`. Returns the new state and
/// whether it spiked.
pub fn step_neuron(
    state: NeuronState,
    params: &NeuronParams,
    input_current: f64,
    t: f64,
    dt: f64,
) -> Result<(NeuronState, bool)> {
    if !(dt > 0.0) {
        return Err(Error::ParameterDomain(format!("dt must be > 0, got {dt}")));
    }
    if !input_current.is_finite() {
        return Err(Error::NumericDomain(format!("input current is {input_current}")));
    }
    Ok(step_with_decay(state, params, input_current, t, params.decay(dt)))
}

/// [`step_neuron`] with a precomputed decay factor; no argument checking.
#[inline]
pub(crate) fn step_with_decay(
    mut state: NeuronState,
    params: &NeuronParams,
    input_current: f64,
    t: f64,
    decay: f64,
) -> (NeuronState, bool) {
    if t < state.refrac_until {
        state.v = params.v_reset;
        return (state, false);
    }
    let target = params.a + params.r_m * input_current;
    state.v = target + (state.v - target) * decay;
    if state.v >= params.v_th {
        state.v = params.v_reset;
        state.refrac_until = t + params.refrac;
        state.spike_count += 1;
        (state, true)
    } else {
        (state, false)
    }
}

/// Fixed point of the membrane equation under constant input.
pub fn steady_state_potential(params: &NeuronParams, input_current: f64) -> f64 {
    params.a + params.r_m * input_current
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSpec {
    pub shape: f64,
    pub scale: f64,
}

impl GammaSpec {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "gamma shape and scale must be positive, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn from_mean(shape: f64, mean: f64) -> Result<Self> {
        Self::new(shape, mean / shape)
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        // The constructor already validated the parameters.
        let g = Gamma::new(self.shape, self.scale).expect("validated gamma");
        loop {
            let x = g.sample(rng);
            if x > 0.0 {
                return x;
            }
        }
    }

    /// Either a draw (heterogeneous) or the mean (homogeneous, Dirac case).
    pub fn draw(&self, heterogeneous: bool, rng: &mut Rng) -> f64 {
        if heterogeneous {
            self.sample(rng)
        } else {
            self.mean()
        }
    }
}

/// Polarity of each index for an `E:I = ei_ratio:1` population.
///
/// Exactly `round(n * r / (r + 1))` neurons are excitatory; inhibitory
/// neurons are spread evenly over the index range so that they are spread
/// over the lattice too.
pub fn polarity_layout(n: usize, ei_ratio: f64) -> Vec<Polarity> {
    let n_exc = ((n as f64) * ei_ratio / (ei_ratio + 1.0)).round() as usize;
    let n_exc = n_exc.min(n);
    let n_inh = n - n_exc;
    (0..n)
        .map(|i| {
            let before = i * n_inh / n.max(1);
            let after = (i + 1) * n_inh / n.max(1);
            if after > before {
                Polarity::Inhibitory
            } else {
                Polarity::Excitatory
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PopulationSpec {
    pub n: usize,
    pub excitatory: GammaSpec,
    pub inhibitory: GammaSpec,
    /// Ratio `N_E / N_I`.
    pub ei_ratio: f64,
    pub template: NeuronParams,
    pub heterogeneous: bool,
    /// When set, `r_m = tau_m / c_m` per neuron (`tau_m = R_m C_m` with a
    /// shared capacitance); otherwise the template's `r_m` is used.
    pub capacitance: Option<f64>,
}

/// Samples the recurrent population. Only the membrane time constant varies
/// between neurons; every other field comes from the template.
pub fn sample_population(spec: &PopulationSpec, seed: u64) -> Result<Vec<NeuronParams>> {
    if spec.n == 0 {
        return Err(Error::EmptyPopulation);
    }
    if !(spec.ei_ratio > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "ei_ratio must be > 0, got {}",
            spec.ei_ratio
        )));
    }
    if let Some(c) = spec.capacitance {
        if !(c > 0.0) {
            return Err(Error::ParameterDomain(format!("capacitance must be > 0, got {c}")));
        }
    }
    spec.template.validate()?;
    let mut rng = seeds::rng_from(seed);
    let params = polarity_layout(spec.n, spec.ei_ratio)
        .into_iter()
        .map(|polarity| {
            let gamma = match polarity {
                Polarity::Excitatory => &spec.excitatory,
                Polarity::Inhibitory => &spec.inhibitory,
            };
            let tau_m = gamma.draw(spec.heterogeneous, &mut rng);
            let r_m = spec.capacitance.map_or(spec.template.r_m, |c| tau_m / c);
            NeuronParams {
                tau_m,
                r_m,
                polarity,
                ..spec.template
            }
        })
        .collect();
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(tau_m: f64) -> NeuronParams {
        NeuronParams {
            tau_m,
            ..NeuronParams::default()
        }
    }

    #[test]
    fn free_decay_matches_exponential() {
        let p = params(10.0);
        let s = NeuronState {
            v: 1.0,
            ..NeuronState::initial(&p)
        };
        let (s, spiked) = step_neuron(s, &p, 0.0, 10.0, 10.0).unwrap();
        assert!(!spiked);
        assert!((s.v - (-1.0f64).exp()).abs() < 1e-12);
        assert!((s.v - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn rest_is_a_fixed_point() {
        for tau in [1.0, 7.5, 120.0] {
            let p = params(tau);
            let s = NeuronState {
                v: 0.0,
                ..NeuronState::initial(&p)
            };
            let (s, spiked) = step_neuron(s, &p, 0.0, 3.0, 0.25).unwrap();
            assert_eq!(s.v, 0.0);
            assert!(!spiked);
        }
    }

    #[test]
    fn strong_drive_spikes_and_resets() {
        let p = params(10.0);
        let s = NeuronState {
            v: 0.99,
            ..NeuronState::initial(&p)
        };
        let (s, spiked) = step_neuron(s, &p, 10.0, 1.0, 1.0).unwrap();
        assert!(spiked);
        assert_eq!(s.v, p.v_reset);
        assert_eq!(s.refrac_until, 1.0 + p.refrac);
        assert_eq!(s.spike_count, 1);
    }

    #[test]
    fn refractory_holds_reset() {
        let p = params(10.0);
        let s = NeuronState {
            v: 0.3,
            refrac_until: 5.0,
            spike_count: 1,
        };
        let (s, spiked) = step_neuron(s, &p, 100.0, 4.0, 1.0).unwrap();
        assert!(!spiked);
        assert_eq!(s.v, p.v_reset);
    }

    #[test]
    fn rejects_non_finite_current() {
        let p = params(10.0);
        let s = NeuronState::initial(&p);
        assert!(matches!(
            step_neuron(s, &p, f64::NAN, 0.0, 1.0),
            Err(Error::NumericDomain(_))
        ));
        assert!(step_neuron(s, &p, f64::INFINITY, 0.0, 1.0).is_err());
    }

    #[test]
    fn steady_state_values() {
        let p = NeuronParams {
            a: 0.0,
            r_m: 1.0,
            ..NeuronParams::default()
        };
        assert_eq!(steady_state_potential(&p, 0.0), 0.0);
        let p = NeuronParams {
            a: 0.2,
            r_m: 2.0,
            ..NeuronParams::default()
        };
        assert!((steady_state_potential(&p, 0.3) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn long_run_converges_to_steady_state() {
        let p = NeuronParams {
            tau_m: 12.0,
            a: 0.1,
            r_m: 1.5,
            v_th: f64::INFINITY,
            ..NeuronParams::default()
        };
        let mut s = NeuronState::initial(&p);
        let dt = 1.0;
        let steps = (20.0 * p.tau_m / dt) as usize;
        for k in 1..=steps {
            s = step_neuron(s, &p, 0.4, k as f64 * dt, dt).unwrap().0;
        }
        assert!((s.v - steady_state_potential(&p, 0.4)).abs() < 1e-6);
    }

    #[test]
    fn population_counts_follow_ratio() {
        let spec = PopulationSpec {
            n: 5,
            excitatory: GammaSpec::from_mean(2.0, 50.0).unwrap(),
            inhibitory: GammaSpec::from_mean(2.0, 30.0).unwrap(),
            ei_ratio: 4.0,
            template: NeuronParams::default(),
            heterogeneous: true,
            capacitance: None,
        };
        let pop = sample_population(&spec, 1).unwrap();
        let n_exc = pop.iter().filter(|p| p.polarity.is_excitatory()).count();
        assert_eq!((n_exc, pop.len() - n_exc), (4, 1));
        for n in [1usize, 7, 100, 333] {
            let layout = polarity_layout(n, 4.0);
            let exc = layout.iter().filter(|p| p.is_excitatory()).count();
            assert_eq!(exc, ((n as f64) * 0.8).round() as usize);
        }
    }

    #[test]
    fn homogeneous_population_uses_means() {
        let spec = PopulationSpec {
            n: 40,
            excitatory: GammaSpec::from_mean(3.0, 50.0).unwrap(),
            inhibitory: GammaSpec::from_mean(3.0, 20.0).unwrap(),
            ei_ratio: 4.0,
            template: NeuronParams::default(),
            heterogeneous: false,
            capacitance: Some(1.0),
        };
        let pop = sample_population(&spec, 9).unwrap();
        for p in &pop {
            let expected = if p.polarity.is_excitatory() { 50.0 } else { 20.0 };
            assert!((p.tau_m - expected).abs() < 1e-12);
            assert!((p.r_m - p.tau_m).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_population_is_an_error() {
        let spec = PopulationSpec {
            n: 0,
            excitatory: GammaSpec::new(2.0, 25.0).unwrap(),
            inhibitory: GammaSpec::new(2.0, 25.0).unwrap(),
            ei_ratio: 4.0,
            template: NeuronParams::default(),
            heterogeneous: true,
            capacitance: None,
        };
        assert!(matches!(sample_population(&spec, 0), Err(Error::EmptyPopulation)));
    }

    #[test]
    fn gamma_draw_moments() {
        let g = GammaSpec::new(2.0, 25.0).unwrap();
        let mut rng = seeds::rng_from(42);
        let xs: Vec<f64> = (0..10_000).map(|_| g.sample(&mut rng)).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 50.0).abs() / 50.0 < 0.05, "mean {mean}");
        assert!((var - 1250.0).abs() / 1250.0 < 0.10, "var {var}");
    }

    #[test]
    fn gamma_spec_rejects_nonpositive() {
        assert!(GammaSpec::new(0.0, 1.0).is_err());
        assert!(GammaSpec::new(1.0, -1.0).is_err());
    }
}

//! Experiment configuration.
//!
//! The text form is one `section.key = value` per line. Blank lines and lines
//! starting with `#` are ignored, keys may appear in any order and missing
//! keys keep their defaults. Unknown keys are errors.
//!
//! Value syntax: numbers in any Rust float/integer form, lists as
//! comma-separated values, gamma distributions as `gamma(shape, scale)`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::Variant;
use crate::data::{SyntheticSpec, Task};
use crate::lif::GammaSpec;
use crate::plasticity::StdpSpecs;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    /// Seeds per variant in ablations and sweeps.
    pub repeats: usize,
    pub out_dir: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSection {
    pub n: usize,
    pub ei_ratio: f64,
    pub lambda: f64,
    pub c_ee: f64,
    pub c_ei: f64,
    pub c_ie: f64,
    pub c_ii: f64,
    pub w_scale: f64,
    pub w_max: f64,
    pub mean_ee: f64,
    pub mean_ei: f64,
    pub mean_ie: f64,
    pub mean_ii: f64,
    pub mean_in: f64,
    pub p_ir: f64,
    pub input_fraction: f64,
    pub n_readout: usize,
    /// 0 = every recurrent neuron.
    pub readout_taps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuronSection {
    pub tau_e: GammaSpec,
    pub tau_i: GammaSpec,
    pub v_th: f64,
    pub v_reset: f64,
    pub a: f64,
    pub refrac: f64,
    /// 0 = use `r_m` for every neuron.
    pub capacitance: f64,
    pub r_m: f64,
    pub readout_tau: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StdpSection {
    pub a_plus: GammaSpec,
    pub a_minus: GammaSpec,
    pub tau_plus: GammaSpec,
    pub tau_minus: GammaSpec,
    pub a_plus_incr: f64,
    pub a_minus_incr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSection {
    pub dt: f64,
    pub epochs: usize,
    pub ridge: f64,
    pub encode_threshold: f64,
    /// 0 = no crop.
    pub crop_h: usize,
    pub crop_w: usize,
    pub rank_threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSection {
    pub task: Task,
    pub n_classes: usize,
    pub n_per_class: usize,
    pub height: usize,
    pub width: usize,
    pub n_frames: usize,
    pub frame_period: f64,
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationSection {
    pub variants: Vec<Variant>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSection {
    pub neurons: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub w_scales: Vec<f64>,
    pub reps: usize,
    pub train_fractions: Vec<f64>,
    pub variants: Vec<Variant>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoSection {
    pub n_init: usize,
    pub budget: usize,
    pub pool_size: usize,
    pub samples: usize,
    pub projections: usize,
    /// Kernel distance: `sliced` or `sinkhorn`.
    pub metric: String,
    /// Entropic regularization when `metric = sinkhorn`.
    pub sinkhorn_reg: f64,
    pub smoothness: f64,
    pub noise_ratio: f64,
    pub normalize: bool,
    /// Gamma shape of the tunable time-constant distributions.
    pub tau_shape: f64,
    pub variant: Variant,
    /// Also run random search with the same budget.
    pub baseline: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub network: NetworkSection,
    pub neuron: NeuronSection,
    pub stdp: StdpSection,
    pub sim: SimSection,
    pub data: DataSection,
    pub ablation: AblationSection,
    pub sweep: SweepSection,
    pub bo: BoSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let stdp = StdpSpecs::default();
        let data = SyntheticSpec::default();
        Self {
            run: RunSection {
                seed: 1,
                repeats: 5,
                out_dir: "runs".into(),
            },
            network: NetworkSection {
                n: 200,
                ei_ratio: 4.0,
                lambda: 1.0,
                c_ee: 0.3,
                c_ei: 0.2,
                c_ie: 0.4,
                c_ii: 0.1,
                w_scale: 1.0,
                w_max: 1.0,
                mean_ee: 0.5,
                mean_ei: 0.5,
                mean_ie: 0.5,
                mean_ii: 0.5,
                mean_in: 0.5,
                p_ir: 0.05,
                input_fraction: 0.3,
                n_readout: 32,
                readout_taps: 0,
            },
            neuron: NeuronSection {
                tau_e: GammaSpec {
                    shape: 3.0,
                    scale: 50.0 / 3.0,
                },
                tau_i: GammaSpec {
                    shape: 3.0,
                    scale: 50.0 / 3.0,
                },
                v_th: 1.0,
                v_reset: 0.0,
                a: 0.0,
                refrac: 2.0,
                capacitance: 1.0,
                r_m: 1.0,
                readout_tau: 20.0,
            },
            stdp: StdpSection {
                a_plus: stdp.a_plus_rate,
                a_minus: stdp.a_minus_rate,
                tau_plus: stdp.tau_plus,
                tau_minus: stdp.tau_minus,
                a_plus_incr: stdp.a_plus_incr,
                a_minus_incr: stdp.a_minus_incr,
            },
            sim: SimSection {
                dt: 1.0,
                epochs: 1,
                ridge: 1e-3,
                encode_threshold: 0.5,
                crop_h: 0,
                crop_w: 0,
                rank_threshold: crate::separability::DEFAULT_ENERGY,
            },
            data: DataSection {
                task: data.task,
                n_classes: data.n_classes,
                n_per_class: 50,
                height: data.height,
                width: data.width,
                n_frames: data.n_frames,
                frame_period: data.frame_period,
                noise: data.noise,
            },
            ablation: AblationSection {
                variants: Variant::ALL.to_vec(),
            },
            sweep: SweepSection {
                neurons: vec![50, 100, 200, 400],
                lambdas: vec![0.5, 1.0, 1.5, 2.0],
                w_scales: vec![0.25, 0.5, 1.0, 2.0],
                reps: 3,
                train_fractions: vec![0.1, 0.25, 0.5, 1.0],
                variants: vec![Variant::HoNHoS, Variant::HeNHeS],
            },
            bo: BoSection {
                n_init: 5,
                budget: 25,
                pool_size: 256,
                samples: 256,
                projections: 128,
                metric: "sliced".into(),
                sinkhorn_reg: 1e-2,
                smoothness: 1.5,
                noise_ratio: 1e-6,
                normalize: true,
                tau_shape: 3.0,
                variant: Variant::HeNHeS,
                baseline: false,
            },
        }
    }
}

/// A config value with a text form.
trait Field {
    fn show(&self) -> String;
    fn parse_into(&mut self, s: &str) -> std::result::Result<(), String>;
}

macro_rules! from_str_field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn show(&self) -> String {
                self.to_string()
            }
            fn parse_into(&mut self, s: &str) -> std::result::Result<(), String> {
                *self = s.parse().map_err(|e| format!("{e}"))?;
                Ok(())
            }
        }
    )*};
}

from_str_field!(u64, usize, bool, String, Task, Variant);

impl Field for f64 {
    fn show(&self) -> String {
        format!("{self:?}")
    }
    fn parse_into(&mut self, s: &str) -> std::result::Result<(), String> {
        let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
        if !v.is_finite() {
            return Err("must be finite".into());
        }
        *self = v;
        Ok(())
    }
}

impl Field for GammaSpec {
    fn show(&self) -> String {
        format!("gamma({:?}, {:?})", self.shape, self.scale)
    }
    fn parse_into(&mut self, s: &str) -> std::result::Result<(), String> {
        let inner = s
            .strip_prefix("gamma(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or("expected gamma(shape, scale)")?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err("expected gamma(shape, scale)".into());
        }
        let shape: f64 = parts[0].parse().map_err(|e| format!("shape: {e}"))?;
        let scale: f64 = parts[1].parse().map_err(|e| format!("scale: {e}"))?;
        *self = GammaSpec::new(shape, scale).map_err(|e| e.to_string())?;
        Ok(())
    }
}

impl<T: Field + Default> Field for Vec<T> {
    fn show(&self) -> String {
        self.iter().map(Field::show).collect::<Vec<_>>().join(", ")
    }
    fn parse_into(&mut self, s: &str) -> std::result::Result<(), String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let mut v = T::default();
            v.parse_into(part)?;
            out.push(v);
        }
        *self = out;
        Ok(())
    }
}

impl ExperimentConfig {
    /// Every key with a mutable handle on its value, in serialization order.
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn Field)> {
        let Self {
            run,
            network: nw,
            neuron: ne,
            stdp: st,
            sim,
            data,
            ablation,
            sweep,
            bo,
        } = self;
        vec![
            ("run.seed", &mut run.seed),
            ("run.repeats", &mut run.repeats),
            ("run.out_dir", &mut run.out_dir),
            ("network.n", &mut nw.n),
            ("network.ei_ratio", &mut nw.ei_ratio),
            ("network.lambda", &mut nw.lambda),
            ("network.c_ee", &mut nw.c_ee),
            ("network.c_ei", &mut nw.c_ei),
            ("network.c_ie", &mut nw.c_ie),
            ("network.c_ii", &mut nw.c_ii),
            ("network.w_scale", &mut nw.w_scale),
            ("network.w_max", &mut nw.w_max),
            ("network.mean_ee", &mut nw.mean_ee),
            ("network.mean_ei", &mut nw.mean_ei),
            ("network.mean_ie", &mut nw.mean_ie),
            ("network.mean_ii", &mut nw.mean_ii),
            ("network.mean_in", &mut nw.mean_in),
            ("network.p_ir", &mut nw.p_ir),
            ("network.input_fraction", &mut nw.input_fraction),
            ("network.n_readout", &mut nw.n_readout),
            ("network.readout_taps", &mut nw.readout_taps),
            ("neuron.tau_e", &mut ne.tau_e),
            ("neuron.tau_i", &mut ne.tau_i),
            ("neuron.v_th", &mut ne.v_th),
            ("neuron.v_reset", &mut ne.v_reset),
            ("neuron.a", &mut ne.a),
            ("neuron.refrac", &mut ne.refrac),
            ("neuron.capacitance", &mut ne.capacitance),
            ("neuron.r_m", &mut ne.r_m),
            ("neuron.readout_tau", &mut ne.readout_tau),
            ("stdp.a_plus", &mut st.a_plus),
            ("stdp.a_minus", &mut st.a_minus),
            ("stdp.tau_plus", &mut st.tau_plus),
            ("stdp.tau_minus", &mut st.tau_minus),
            ("stdp.a_plus_incr", &mut st.a_plus_incr),
            ("stdp.a_minus_incr", &mut st.a_minus_incr),
            ("sim.dt", &mut sim.dt),
            ("sim.epochs", &mut sim.epochs),
            ("sim.ridge", &mut sim.ridge),
            ("sim.encode_threshold", &mut sim.encode_threshold),
            ("sim.crop_h", &mut sim.crop_h),
            ("sim.crop_w", &mut sim.crop_w),
            ("sim.rank_threshold", &mut sim.rank_threshold),
            ("data.task", &mut data.task),
            ("data.n_classes", &mut data.n_classes),
            ("data.n_per_class", &mut data.n_per_class),
            ("data.height", &mut data.height),
            ("data.width", &mut data.width),
            ("data.n_frames", &mut data.n_frames),
            ("data.frame_period", &mut data.frame_period),
            ("data.noise", &mut data.noise),
            ("ablation.variants", &mut ablation.variants),
            ("sweep.neurons", &mut sweep.neurons),
            ("sweep.lambdas", &mut sweep.lambdas),
            ("sweep.w_scales", &mut sweep.w_scales),
            ("sweep.reps", &mut sweep.reps),
            ("sweep.train_fractions", &mut sweep.train_fractions),
            ("sweep.variants", &mut sweep.variants),
            ("bo.n_init", &mut bo.n_init),
            ("bo.budget", &mut bo.budget),
            ("bo.pool_size", &mut bo.pool_size),
            ("bo.samples", &mut bo.samples),
            ("bo.projections", &mut bo.projections),
            ("bo.metric", &mut bo.metric),
            ("bo.sinkhorn_reg", &mut bo.sinkhorn_reg),
            ("bo.smoothness", &mut bo.smoothness),
            ("bo.noise_ratio", &mut bo.noise_ratio),
            ("bo.normalize", &mut bo.normalize),
            ("bo.tau_shape", &mut bo.tau_shape),
            ("bo.variant", &mut bo.variant),
            ("bo.baseline", &mut bo.baseline),
        ]
    }

    pub fn keys() -> Vec<&'static str> {
        Self::default().fields().into_iter().map(|(k, _)| k).collect()
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut fields = self.fields();
        let (_, field) = fields
            .iter_mut()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| Error::config(key, "unknown key"))?;
        field.parse_into(value).map_err(|m| Error::config(key, m))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let mut copy = self.clone();
        let fields = copy.fields();
        fields.iter().find(|(k, _)| *k == key).map(|(_, f)| f.show())
    }

    /// Parses the text form on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `section.key = value`"))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        let mut section = "";
        for (key, field) in copy.fields() {
            let sec = key.split('.').next().unwrap_or("");
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = sec;
            }
            let _ = writeln!(out, "{key} = {}", field.show());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let nw = &self.network;
        let positive = [
            ("network.ei_ratio", nw.ei_ratio),
            ("network.lambda", nw.lambda),
            ("network.w_max", nw.w_max),
            ("neuron.refrac", self.neuron.refrac + 1.0),
            ("neuron.r_m", self.neuron.r_m),
            ("neuron.readout_tau", self.neuron.readout_tau),
            ("sim.dt", self.sim.dt),
            ("sim.ridge", self.sim.ridge + 1.0),
            ("data.frame_period", self.data.frame_period),
            ("bo.smoothness", self.bo.smoothness),
            ("bo.tau_shape", self.bo.tau_shape),
            ("bo.sinkhorn_reg", self.bo.sinkhorn_reg),
        ];
        for (key, v) in positive {
            if !(v > 0.0) {
                return Err(Error::config(key, "must be > 0"));
            }
        }
        let unit = [
            ("network.c_ee", nw.c_ee),
            ("network.c_ei", nw.c_ei),
            ("network.c_ie", nw.c_ie),
            ("network.c_ii", nw.c_ii),
            ("network.p_ir", nw.p_ir),
            ("network.input_fraction", nw.input_fraction),
            ("data.noise", self.data.noise),
            ("sim.encode_threshold", self.sim.encode_threshold),
        ];
        for (key, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, "must lie in [0, 1]"));
            }
        }
        let nonneg = [
            ("network.w_scale", nw.w_scale),
            ("network.mean_ee", nw.mean_ee),
            ("network.mean_ei", nw.mean_ei),
            ("network.mean_ie", nw.mean_ie),
            ("network.mean_ii", nw.mean_ii),
            ("network.mean_in", nw.mean_in),
            ("neuron.capacitance", self.neuron.capacitance),
        ];
        for (key, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::config(key, "must be >= 0"));
            }
        }
        if !(self.sim.rank_threshold > 0.0 && self.sim.rank_threshold <= 1.0) {
            return Err(Error::config("sim.rank_threshold", "must lie in (0, 1]"));
        }
        if !(self.neuron.v_th > self.neuron.v_reset) {
            return Err(Error::config("neuron.v_th", "must exceed neuron.v_reset"));
        }
        let counts = [
            ("run.repeats", self.run.repeats),
            ("network.n", nw.n),
            ("network.n_readout", nw.n_readout),
            ("sim.epochs", self.sim.epochs),
            ("data.n_per_class", self.data.n_per_class),
            ("data.height", self.data.height),
            ("data.width", self.data.width),
            ("sweep.reps", self.sweep.reps),
            ("bo.n_init", self.bo.n_init),
            ("bo.pool_size", self.bo.pool_size),
            ("bo.samples", self.bo.samples),
            ("bo.projections", self.bo.projections),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(Error::config(key, "must be >= 1"));
            }
        }
        if self.data.n_classes < 2 {
            return Err(Error::config("data.n_classes", "must be >= 2"));
        }
        if self.data.n_frames < 2 {
            return Err(Error::config("data.n_frames", "must be >= 2"));
        }
        if (self.sim.crop_h == 0) != (self.sim.crop_w == 0) {
            return Err(Error::config(
                "sim.crop_h",
                "crop_h and crop_w must both be 0 or both be set",
            ));
        }
        if self.sim.crop_h > self.data.height || self.sim.crop_w > self.data.width {
            return Err(Error::config("sim.crop_h", "crop box exceeds the frame"));
        }
        if !matches!(self.bo.metric.as_str(), "sliced" | "sinkhorn") {
            return Err(Error::config("bo.metric", "must be `sliced` or `sinkhorn`"));
        }
        if self.bo.budget < self.bo.n_init {
            return Err(Error::config("bo.budget", "must be >= bo.n_init"));
        }
        if let Some(f) = self.sweep.train_fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::config("sweep.train_fractions", format!("{f} is outside (0, 1]")));
        }
        if self.sweep.neurons.contains(&0) {
            return Err(Error::config("sweep.neurons", "sizes must be >= 1"));
        }
        if self.ablation.variants.is_empty() {
            return Err(Error::config("ablation.variants", "need at least one variant"));
        }
        if self.sweep.variants.is_empty() {
            return Err(Error::config("sweep.variants", "need at least one variant"));
        }
        Ok(())
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            task: self.data.task,
            n_classes: self.data.n_classes,
            n_per_class: self.data.n_per_class,
            height: self.data.height,
            width: self.data.width,
            n_frames: self.data.n_frames,
            frame_period: self.data.frame_period,
            noise: self.data.noise,
        }
    }

    pub fn stdp_specs(&self) -> StdpSpecs {
        StdpSpecs {
            a_plus_rate: self.stdp.a_plus,
            a_minus_rate: self.stdp.a_minus,
            tau_plus: self.stdp.tau_plus,
            tau_minus: self.stdp.tau_minus,
            a_plus_incr: self.stdp.a_plus_incr,
            a_minus_incr: self.stdp.a_minus_incr,
        }
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_text();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
        assert_eq!(ExperimentConfig::parse(&text).unwrap().to_text(), text);
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# small run\nnetwork.n = 50\n\nneuron.tau_e = gamma(2, 12.5)\nablation.variants = HoNHoS, HeNHeS\n",
        )
        .unwrap();
        assert_eq!(cfg.network.n, 50);
        assert_eq!(
            cfg.neuron.tau_e,
            GammaSpec {
                shape: 2.0,
                scale: 12.5
            }
        );
        assert_eq!(cfg.ablation.variants, vec![Variant::HoNHoS, Variant::HeNHeS]);
        assert_eq!(cfg.get("network.n").as_deref(), Some("50"));
    }

    #[test]
    fn errors_name_the_key() {
        let err = |text: &str| match ExperimentConfig::parse(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("{other:?}"),
        };
        assert_eq!(err("network.nn = 3"), "network.nn");
        assert_eq!(err("network.lambda = fast"), "network.lambda");
        assert_eq!(err("network.p_ir = 1.5"), "network.p_ir");
        assert_eq!(err("neuron.tau_e = gamma(0, 1)"), "neuron.tau_e");
        assert_eq!(err("data.task = spiral"), "data.task");
        assert_eq!(err("just words"), "line 1");
        assert_eq!(err("bo.n_init = 9\nbo.budget = 4"), "bo.budget");
    }

    #[test]
    fn keys_are_unique() {
        let keys = ExperimentConfig::keys();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), keys.len());
    }
}

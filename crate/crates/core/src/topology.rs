//! Three-layer wiring: input -> recurrent -> readout.
//!
//! Recurrent neurons sit on a 3-D integer lattice (row-major fill) and each
//! ordered pair `(i, j)` is connected with probability
//! `C_class * exp(-(D(i, j) / lambda)^2)`. Input neurons project onto a
//! random subset of recurrent targets with a uniform probability, and every
//! readout neuron receives taps from a random subset of the recurrent layer.
//!
//! Edge decisions consume one uniform per ordered pair from their own stream,
//! and weights come from a separate stream, so for a fixed seed the edge set
//! is monotone in `lambda` and in every class amplitude.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;

use crate::lif::{polarity_layout, Polarity};
use crate::seeds;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SynapseClass {
    EE,
    EI,
    IE,
    II,
    /// Input layer to recurrent layer.
    IR,
    /// Recurrent layer to readout.
    RO,
}

impl SynapseClass {
    pub fn recurrent(pre: Polarity, post: Polarity) -> Self {
        match (pre, post) {
            (Polarity::Excitatory, Polarity::Excitatory) => SynapseClass::EE,
            (Polarity::Excitatory, Polarity::Inhibitory) => SynapseClass::EI,
            (Polarity::Inhibitory, Polarity::Excitatory) => SynapseClass::IE,
            (Polarity::Inhibitory, Polarity::Inhibitory) => SynapseClass::II,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SynapseClass::EE => "EE",
            SynapseClass::EI => "EI",
            SynapseClass::IE => "IE",
            SynapseClass::II => "II",
            SynapseClass::IR => "IR",
            SynapseClass::RO => "RO",
        }
    }
}

impl FromStr for SynapseClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "EE" => SynapseClass::EE,
            "EI" => SynapseClass::EI,
            "IE" => SynapseClass::IE,
            "II" => SynapseClass::II,
            "IR" => SynapseClass::IR,
            "RO" => SynapseClass::RO,
            other => return Err(Error::Validation(format!("unknown synapse class `{other}`"))),
        })
    }
}

/// One value per synapse class (connection amplitudes, weight means, ...).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMap {
    pub ee: f64,
    pub ei: f64,
    pub ie: f64,
    pub ii: f64,
    pub input: f64,
}

impl ClassMap {
    pub fn uniform(value: f64) -> Self {
        Self {
            ee: value,
            ei: value,
            ie: value,
            ii: value,
            input: value,
        }
    }

    pub fn get(&self, class: SynapseClass) -> f64 {
        match class {
            SynapseClass::EE => self.ee,
            SynapseClass::EI => self.ei,
            SynapseClass::IE => self.ie,
            SynapseClass::II => self.ii,
            SynapseClass::IR | SynapseClass::RO => self.input,
        }
    }
}

/// `c * exp(-(d / lambda)^2)`, clamped to `[0, 1]`.
pub fn connection_probability(d: f64, c: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::ParameterDomain(format!("lambda must be > 0, got {lambda}")));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::ParameterDomain(format!(
            "amplitude C must lie in [0, 1], got {c}"
        )));
    }
    let r = d / lambda;
    Ok((c * (-r * r).exp()).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub dims: [usize; 3],
}

impl Lattice {
    /// Smallest near-cubic lattice holding `n` sites.
    pub fn for_count(n: usize) -> Self {
        let side = (n as f64).cbrt().ceil().max(1.0) as usize;
        let side = if side.pow(3) < n { side + 1 } else { side };
        let layers = n.div_ceil(side * side).max(1);
        Self {
            dims: [side, side, layers],
        }
    }

    pub fn capacity(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major position of site `i` (x fastest).
    pub fn position(&self, i: usize) -> [i64; 3] {
        let [nx, ny, _] = self.dims;
        [(i % nx) as i64, ((i / nx) % ny) as i64, (i / (nx * ny)) as i64]
    }

    pub fn distance(a: [i64; 3], b: [i64; 3]) -> f64 {
        let sq: i64 = (0..3).map(|k| (a[k] - b[k]).pow(2)).sum();
        (sq as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub pre: usize,
    pub post: usize,
    pub weight: f64,
    pub class: SynapseClass,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputEdge {
    pub input: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutTap {
    pub source: usize,
    pub output: usize,
    pub weight: f64,
}

/// Initial weight magnitudes: `|w| ~ U(0, 2 * w_scale * mean_class)`, capped
/// at `w_max`, signed by the presynaptic polarity. `w_scale` applies to the
/// recurrent classes only; input weights use their mean unscaled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightInit {
    pub means: ClassMap,
    pub w_scale: f64,
    pub w_max: f64,
}

impl Default for WeightInit {
    fn default() -> Self {
        Self {
            means: ClassMap::uniform(0.5),
            w_scale: 1.0,
            w_max: 1.0,
        }
    }
}

impl WeightInit {
    fn draw(&self, class: SynapseClass, rng: &mut seeds::Rng) -> f64 {
        let scale = if class == SynapseClass::IR { 1.0 } else { self.w_scale };
        let hi = 2.0 * scale * self.means.get(class);
        (rng.random::<f64>() * hi).min(self.w_max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub n: usize,
    /// Lattice dimensions; `None` picks the smallest near-cube.
    pub dims: Option<[usize; 3]>,
    pub lambda: f64,
    pub c_map: ClassMap,
    pub ei_ratio: f64,
    pub weights: WeightInit,
    pub n_inputs: usize,
    pub p_ir: f64,
    pub input_fraction: f64,
    pub n_readout: usize,
    /// Recurrent sources per readout neuron; `None` means all of them.
    pub readout_taps: Option<usize>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            n: 100,
            dims: None,
            lambda: 1.0,
            c_map: ClassMap::uniform(0.3),
            ei_ratio: 4.0,
            weights: WeightInit::default(),
            n_inputs: 64,
            p_ir: 0.05,
            input_fraction: 0.3,
            n_readout: 32,
            readout_taps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    pub n: usize,
    pub lambda: f64,
    pub seed: u64,
    pub ei_ratio: f64,
    pub lattice: Lattice,
    pub polarity: Vec<Polarity>,
    pub recurrent: Vec<Edge>,
    pub n_inputs: usize,
    pub inputs: Vec<InputEdge>,
    pub n_readout: usize,
    pub readout: Vec<ReadoutTap>,
}

/// Samples the recurrent edge set for `n` neurons.
pub fn build_recurrent(
    n: usize,
    lambda: f64,
    c_map: &ClassMap,
    lattice: Lattice,
    polarity: &[Polarity],
    weights: &WeightInit,
    seed: u64,
) -> Result<Vec<Edge>> {
    if n > lattice.capacity() {
        return Err(Error::Capacity {
            requested: n,
            capacity: lattice.capacity(),
        });
    }
    if polarity.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: polarity.len(),
        });
    }
    // Validate once so the pair loop can stay infallible.
    connection_probability(0.0, 0.0, lambda)?;
    for class in [SynapseClass::EE, SynapseClass::EI, SynapseClass::IE, SynapseClass::II] {
        connection_probability(0.0, c_map.get(class), lambda)?;
    }
    let mut edge_rng = seeds::rng(seed, seeds::TOPOLOGY);
    let mut weight_rng = seeds::rng(seed, seeds::WEIGHTS);
    let positions: Vec<[i64; 3]> = (0..n).map(|i| lattice.position(i)).collect();
    let mut edges = Vec::new();
    for pre in 0..n {
        for post in 0..n {
            if pre == post {
                continue;
            }
            let u: f64 = edge_rng.random();
            let class = SynapseClass::recurrent(polarity[pre], polarity[post]);
            let d = Lattice::distance(positions[pre], positions[post]);
            let r = d / lambda;
            let p = (c_map.get(class) * (-r * r).exp()).clamp(0.0, 1.0);
            if u < p {
                let magnitude = weights.draw(class, &mut weight_rng);
                edges.push(Edge {
                    pre,
                    post,
                    weight: polarity[pre].sign() * magnitude,
                    class,
                });
            }
        }
    }
    Ok(edges)
}

/// Input fan-in: `round(target_fraction * n_recurrent)` eligible targets, each
/// (input, target) pair connected with probability `p_ir`.
pub fn connect_inputs(
    n_inputs: usize,
    n_recurrent: usize,
    p_ir: f64,
    target_fraction: f64,
    weights: &WeightInit,
    seed: u64,
) -> Result<Vec<InputEdge>> {
    if !(0.0..=1.0).contains(&p_ir) {
        return Err(Error::ParameterDomain(format!("p_ir must lie in [0, 1], got {p_ir}")));
    }
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return Err(Error::ParameterDomain(format!(
            "target fraction must lie in (0, 1], got {target_fraction}"
        )));
    }
    let mut rng = seeds::rng(seed, seeds::INPUTS);
    let mut weight_rng = seeds::rng(seed, seeds::INPUT_WEIGHTS);
    let k = ((target_fraction * n_recurrent as f64).round() as usize).min(n_recurrent);
    let mut targets = index::sample(&mut rng, n_recurrent, k).into_vec();
    targets.sort_unstable();
    let mut edges = Vec::new();
    for input in 0..n_inputs {
        for &target in &targets {
            let u: f64 = rng.random();
            if u < p_ir {
                edges.push(InputEdge {
                    input,
                    target,
                    weight: weights.draw(SynapseClass::IR, &mut weight_rng),
                });
            }
        }
    }
    Ok(edges)
}

/// The eligible input-target subset used by [`connect_inputs`] for a seed.
pub fn input_targets(n_recurrent: usize, target_fraction: f64, seed: u64) -> Vec<usize> {
    let mut rng = seeds::rng(seed, seeds::INPUTS);
    let k = ((target_fraction * n_recurrent as f64).round() as usize).min(n_recurrent);
    let mut targets = index::sample(&mut rng, n_recurrent, k).into_vec();
    targets.sort_unstable();
    targets
}

/// Readout taps with weights `sign(pre) * U(0, 1)`.
pub fn connect_readout(polarity: &[Polarity], n_readout: usize, taps: Option<usize>, seed: u64) -> Vec<ReadoutTap> {
    let n = polarity.len();
    let per_output = taps.unwrap_or(n).min(n);
    let mut rng = seeds::rng(seed, seeds::READOUT);
    let mut out = Vec::with_capacity(n_readout * per_output);
    for output in 0..n_readout {
        let mut sources = if per_output == n {
            (0..n).collect::<Vec<_>>()
        } else {
            index::sample(&mut rng, n, per_output).into_vec()
        };
        sources.sort_unstable();
        for source in sources {
            let w: f64 = rng.random();
            out.push(ReadoutTap {
                source,
                output,
                weight: polarity[source].sign() * w,
            });
        }
    }
    out
}

impl NetworkTopology {
    pub fn generate(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        if spec.n == 0 {
            return Err(Error::EmptyPopulation);
        }
        let lattice = spec
            .dims
            .map_or_else(|| Lattice::for_count(spec.n), |dims| Lattice { dims });
        let polarity = polarity_layout(spec.n, spec.ei_ratio);
        let recurrent = build_recurrent(
            spec.n,
            spec.lambda,
            &spec.c_map,
            lattice,
            &polarity,
            &spec.weights,
            seed,
        )?;
        let inputs = connect_inputs(
            spec.n_inputs,
            spec.n,
            spec.p_ir,
            spec.input_fraction,
            &spec.weights,
            seed,
        )?;
        let readout = connect_readout(&polarity, spec.n_readout, spec.readout_taps, seed);
        Ok(Self {
            n: spec.n,
            lambda: spec.lambda,
            seed,
            ei_ratio: spec.ei_ratio,
            lattice,
            polarity,
            recurrent,
            n_inputs: spec.n_inputs,
            inputs,
            n_readout: spec.n_readout,
            readout,
        })
    }

    /// Number of outgoing synapses (recurrent and readout) of each recurrent neuron.
    pub fn recurrent_fan_out(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.n];
        for e in &self.recurrent {
            out[e.pre] += 1;
        }
        for t in &self.readout {
            out[t.source] += 1;
        }
        out
    }

    /// Number of outgoing synapses of each input neuron.
    pub fn input_fan_out(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.n_inputs];
        for e in &self.inputs {
            out[e.input] += 1;
        }
        out
    }

    /// Multiplies every recurrent weight by `factor`.
    pub fn scale_recurrent(&mut self, factor: f64) {
        for e in &mut self.recurrent {
            e.weight *= factor;
        }
    }

    /// Line-oriented text form.
    ///
    /// ```text
    /// hrsnn-topology n=<n> lambda=<l> seed=<s> ei_ratio=<r> dims=<x>x<y>x<z> inputs=<k> readout=<m>
    /// <pre> <post> <weight> <class>
    /// ```
    ///
    /// Recurrent edges use classes `EE|EI|IE|II`; input edges use `IR` with
    /// `pre` = input index; readout taps use `RO` with `post` = output index.
    /// Weights are written in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let [x, y, z] = self.lattice.dims;
        let _ = writeln!(
            s,
            "hrsnn-topology n={} lambda={:?} seed={} ei_ratio={:?} dims={}x{}x{} inputs={} readout={}",
            self.n, self.lambda, self.seed, self.ei_ratio, x, y, z, self.n_inputs, self.n_readout
        );
        for e in &self.recurrent {
            let _ = writeln!(s, "{} {} {:?} {}", e.pre, e.post, e.weight, e.class.as_str());
        }
        for e in &self.inputs {
            let _ = writeln!(s, "{} {} {:?} IR", e.input, e.target, e.weight);
        }
        for t in &self.readout {
            let _ = writeln!(s, "{} {} {:?} RO", t.source, t.output, t.weight);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Validation("empty topology file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("hrsnn-topology") {
            return Err(Error::Validation("missing `hrsnn-topology` header".into()));
        }
        let mut get = std::collections::HashMap::new();
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("malformed header field `{f}`")))?;
            get.insert(k, v);
        }
        let field = |k: &str| {
            get.get(k)
                .copied()
                .ok_or_else(|| Error::Validation(format!("header is missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            field(k)?
                .parse()
                .map_err(|_| Error::Validation(format!("header field `{k}` is not a number")))
        };
        let int = |k: &str| -> Result<u64> {
            field(k)?
                .parse()
                .map_err(|_| Error::Validation(format!("header field `{k}` is not an integer")))
        };
        let n = int("n")? as usize;
        let dims: Vec<usize> = field("dims")?
            .split('x')
            .map(|d| d.parse().map_err(|_| Error::Validation("bad dims".into())))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Validation("dims must have three components".into()));
        }
        let ei_ratio = num("ei_ratio")?;
        let mut topo = Self {
            n,
            lambda: num("lambda")?,
            seed: int("seed")?,
            ei_ratio,
            lattice: Lattice {
                dims: [dims[0], dims[1], dims[2]],
            },
            polarity: polarity_layout(n, ei_ratio),
            recurrent: Vec::new(),
            n_inputs: int("inputs")? as usize,
            inputs: Vec::new(),
            n_readout: int("readout")? as usize,
            readout: Vec::new(),
        };
        for (lineno, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Validation(format!("malformed edge on line {}", lineno + 2));
            if parts.len() != 4 {
                return Err(bad());
            }
            let pre: usize = parts[0].parse().map_err(|_| bad())?;
            let post: usize = parts[1].parse().map_err(|_| bad())?;
            let weight: f64 = parts[2].parse().map_err(|_| bad())?;
            match parts[3].parse::<SynapseClass>()? {
                SynapseClass::IR => topo.inputs.push(InputEdge {
                    input: pre,
                    target: post,
                    weight,
                }),
                SynapseClass::RO => topo.readout.push(ReadoutTap {
                    source: pre,
                    output: post,
                    weight,
                }),
                class => topo.recurrent.push(Edge {
                    pre,
                    post,
                    weight,
                    class,
                }),
            }
        }
        Ok(topo)
    }
}

impl fmt::Display for NetworkTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

use proptest::prelude::*;

use hrsnn::data::{encode_frames, FrameSequence};
use hrsnn::experiment::pipeline::{build_network, PipelineData};
use hrsnn::experiment::{ExperimentConfig, Variant};
use hrsnn::gp::{expected_improvement, gp_fit, MaternParams};
use hrsnn::lif::{
    polarity_layout, sample_population, step_neuron, GammaSpec, NeuronParams, NeuronState, Polarity, PopulationSpec,
};
use hrsnn::ot::{exact_transport, sliced_w2, sq_euclidean, w2_1d, EmpiricalDistribution};
use hrsnn::plasticity::{StdpParams, SynapseState};
use hrsnn::separability::effective_rank_of;
use hrsnn::sim::{Network, SpikeEvent, SpikeTrain};
use hrsnn::space::{DistributionMetric, SearchSpace};
use hrsnn::topology::{ClassMap, Edge, InputEdge, Lattice, NetworkSpec, NetworkTopology, ReadoutTap, SynapseClass};
use nalgebra::DMatrix;

fn small_cfg() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.network.n = 30;
    cfg.network.n_readout = 6;
    cfg.data.n_per_class = 2;
    cfg.data.n_classes = 2;
    cfg
}

fn lif() -> impl Strategy<Value = NeuronParams> {
    (1.0..100.0f64, 0.5..2.0f64, -0.5..0.3f64, 0.1..5.0f64, 0.0..6.0f64).prop_map(|(tau_m, v_th, a, r_m, refrac)| {
        NeuronParams {
            tau_m,
            v_th,
            v_reset: 0.0,
            a,
            r_m,
            refrac,
            polarity: Polarity::Excitatory,
        }
    })
}

fn values(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..max)
}

fn cloud(dim: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, dim), 1..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refractory_silence(p in lif(), drive in prop::collection::vec(0.0..3.0f64, 50..200), dt in 0.1..1.0f64) {
        let mut s = NeuronState::initial(&p);
        let mut last: Option<f64> = None;
        for (k, &i) in drive.iter().enumerate() {
            let t = (k + 1) as f64 * dt;
            let (next, spiked) = step_neuron(s, &p, i, t, dt).unwrap();
            s = next;
            if spiked {
                if let Some(t0) = last {
                    prop_assert!(t - t0 >= p.refrac - 1e-9, "spikes at {t0} and {t}");
                }
                last = Some(t);
            }
        }
    }

    #[test]
    fn constant_input_matches_closed_form(p in lif(), i in -1.0..1.0f64, v0 in -1.0..0.4f64, dt in 0.05..2.0f64) {
        let p = NeuronParams { v_th: f64::INFINITY, ..p };
        let mut s = NeuronState { v: v0, ..NeuronState::initial(&p) };
        let target = p.a + p.r_m * i;
        for k in 1..=200 {
            let t = k as f64 * dt;
            s = step_neuron(s, &p, i, t, dt).unwrap().0;
            let exact = target + (v0 - target) * (-t / p.tau_m).exp();
            prop_assert!((s.v - exact).abs() <= 1e-9);
        }
    }

    #[test]
    fn population_polarity_counts(n in 1usize..300, ratio in 0.5..8.0f64, het in any::<bool>(), seed in any::<u64>()) {
        let spec = PopulationSpec {
            n,
            excitatory: GammaSpec::new(3.0, 50.0 / 3.0).unwrap(),
            inhibitory: GammaSpec::new(2.0, 10.0).unwrap(),
            ei_ratio: ratio,
            template: NeuronParams::default(),
            heterogeneous: het,
            capacitance: Some(1.0),
        };
        let pop = sample_population(&spec, seed).unwrap();
        let n_exc = pop.iter().filter(|p| p.polarity.is_excitatory()).count();
        let expected = ((n as f64 * ratio / (ratio + 1.0)).round() as usize).min(n);
        prop_assert_eq!(n_exc, expected);
        prop_assert_eq!(polarity_layout(n, ratio).iter().filter(|p| p.is_excitatory()).count(), expected);
        prop_assert!(pop.iter().all(|p| p.tau_m > 0.0 && p.tau_m.is_finite()));
    }

    #[test]
    fn edge_count_monotone(seed in any::<u64>(), l1 in 0.3..3.0f64, dl in 0.0..2.0f64, c in 0.0..0.6f64, dc in 0.0..0.4f64) {
        let count = |lambda: f64, cc: f64| {
            let spec = NetworkSpec { n: 60, lambda, c_map: ClassMap::uniform(cc), ..NetworkSpec::default() };
            NetworkTopology::generate(&spec, seed).unwrap().recurrent.len()
        };
        let base = count(l1, c);
        prop_assert!(count(l1 + dl, c) >= base);
        prop_assert!(count(l1, c + dc) >= base);
    }

    #[test]
    fn topology_is_deterministic(seed in any::<u64>(), n in 5usize..80, lambda in 0.5..2.5f64) {
        let spec = NetworkSpec { n, lambda, ..NetworkSpec::default() };
        let a = NetworkTopology::generate(&spec, seed).unwrap();
        let b = NetworkTopology::generate(&spec, seed).unwrap();
        prop_assert_eq!(a.to_text(), b.to_text());
        prop_assert_eq!(NetworkTopology::from_text(&a.to_text()).unwrap().to_text(), a.to_text());
    }

    #[test]
    fn synapse_weights_stay_bounded(
        w0 in -2.0..2.0f64,
        exc in any::<bool>(),
        events in prop::collection::vec((0u8..3, 0.0..5.0f64), 1..200),
        rate in 0.0..0.5f64,
    ) {
        let params = StdpParams { a_plus_rate: rate, a_minus_rate: rate * 1.2, ..StdpParams::default() };
        let origin = if exc { Polarity::Excitatory } else { Polarity::Inhibitory };
        let mut s = SynapseState::new(w0, params, origin, 1.0);
        let (lo, hi) = s.bounds();
        for (kind, dt) in events {
            match kind {
                0 => s.on_pre_spike(),
                1 => s.on_post_spike(),
                _ => s.decay_traces(dt),
            }
            prop_assert!(s.weight >= lo && s.weight <= hi);
            prop_assert!(s.t_pre >= 0.0 && s.t_post >= 0.0);
        }
    }

    #[test]
    fn encoding_threshold_monotone(
        frames in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 9), 2..8),
        t1 in 0.0..1.0f64,
        t2 in 0.0..1.0f64,
        period in 1.0..10.0f64,
    ) {
        let seq = FrameSequence::new(3, 3, period, frames.clone()).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let low = encode_frames(&seq, lo).unwrap();
        let high = encode_frames(&seq, hi).unwrap();
        for e in high.events() {
            prop_assert!(low.events().contains(e));
        }
        let last = (frames.len() - 1) as f64 * period;
        for e in low.events() {
            let k = e.time / period;
            prop_assert!((k - k.round()).abs() < 1e-9);
            prop_assert!(e.time >= period - 1e-9 && e.time <= last + 1e-9);
        }
    }

    #[test]
    fn rank_scale_invariant(rows in 2usize..12, cols in 2usize..8, data in prop::collection::vec(-3.0..3.0f64, 96), k in prop::sample::select(vec![-7.5, -1.0, 1e-3, 0.5, 2.0, 1e4]), t in 0.5..0.999f64) {
        let m = DMatrix::from_fn(rows, cols, |i, j| data[i * 8 + j]);
        let a = effective_rank_of(&m, t).unwrap().effective_rank;
        let b = effective_rank_of(&(m * k), t).unwrap().effective_rank;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rank_threshold_monotone(rows in 2usize..12, cols in 2usize..8, data in prop::collection::vec(-3.0..3.0f64, 96), t1 in 0.1..0.999f64, t2 in 0.1..0.999f64) {
        let m = DMatrix::from_fn(rows, cols, |i, j| data[i * 8 + j]);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(effective_rank_of(&m, lo).unwrap().effective_rank <= effective_rank_of(&m, hi).unwrap().effective_rank);
    }

    #[test]
    fn rank_near_one_is_exact_rank(u in prop::collection::vec(-2.0..2.0f64, 30), v in prop::collection::vec(-2.0..2.0f64, 30), r in 1usize..4) {
        // sum of r outer products of generic vectors has rank r
        let m = DMatrix::from_fn(10, 6, |i, j| (0..r).map(|k| u[(i + 3 * k) % 30] * v[(j + 7 * k) % 30] + if i == j + k { 1.0 } else { 0.0 } * (k as f64 + 1.0)).sum::<f64>());
        let exact = m.clone().rank(1e-9 * m.norm());
        prop_assert_eq!(effective_rank_of(&m, 1.0 - 1e-12).unwrap().effective_rank, exact);
    }

    #[test]
    fn w2_metric_axioms(a in values(20), b in values(20), c in values(20)) {
        let (p, q, r) = (
            EmpiricalDistribution::from_values(&a).unwrap(),
            EmpiricalDistribution::from_values(&b).unwrap(),
            EmpiricalDistribution::from_values(&c).unwrap(),
        );
        let pq = w2_1d(&p, &q).unwrap();
        prop_assert!((pq - w2_1d(&q, &p).unwrap()).abs() <= 1e-12);
        prop_assert!(w2_1d(&p, &p).unwrap() <= 1e-12);
        prop_assert!(pq <= w2_1d(&p, &r).unwrap() + w2_1d(&r, &q).unwrap() + 1e-9);
    }

    #[test]
    fn w2_translation(a in values(20), b in values(20), s in -5.0..5.0f64, v in -5.0..5.0f64) {
        let shift = |x: &[f64], by: f64| EmpiricalDistribution::from_values(&x.iter().map(|y| y + by).collect::<Vec<_>>()).unwrap();
        let base = w2_1d(&shift(&a, 0.0), &shift(&b, 0.0)).unwrap();
        prop_assert!((w2_1d(&shift(&a, s), &shift(&b, s)).unwrap() - base).abs() <= 1e-9);
        prop_assert!((w2_1d(&shift(&a, 0.0), &shift(&a, v)).unwrap() - v.abs()).abs() <= 1e-9);
    }

    #[test]
    fn sliced_bounded_by_exact(x in cloud(3, 6), y in cloud(3, 6), seed in any::<u64>()) {
        let p = EmpiricalDistribution::uniform(x).unwrap();
        let q = EmpiricalDistribution::uniform(y).unwrap();
        let exact = exact_transport(&p, &q, sq_euclidean).unwrap().sqrt();
        let sliced = sliced_w2(&p, &q, 64, seed).unwrap();
        prop_assert!(sliced <= exact + 1e-9);
        let v = [1.0, -2.0, 0.5];
        let shifted = |d: &EmpiricalDistribution| EmpiricalDistribution::new(
            (0..d.len()).map(|i| d.point(i).iter().zip(v).map(|(a, b)| a + b).collect()).collect(),
            d.weights().to_vec(),
        ).unwrap();
        prop_assert!((sliced_w2(&shifted(&p), &shifted(&q), 64, seed).unwrap() - sliced).abs() <= 1e-9);
    }

    #[test]
    fn ei_nonnegative_and_increasing(mu in -5.0..5.0f64, s1 in 0.0..5.0f64, ds in 0.0..5.0f64, best in -5.0..5.0f64) {
        prop_assert!(expected_improvement(mu, s1, best) >= 0.0);
        if mu < best {
            prop_assert!(expected_improvement(mu, s1 + ds, best) >= expected_improvement(mu, s1, best) - 1e-12);
        }
    }

    #[test]
    fn posterior_variance_vanishes_at_data(xs in prop::collection::btree_set(-50i32..50, 1..10), nu in prop::sample::select(vec![0.5, 1.5, 2.5])) {
        let pts: Vec<f64> = xs.iter().map(|&x| x as f64 * 0.2).collect();
        let ys: Vec<f64> = pts.iter().map(|x| x.sin()).collect();
        let metric = |a: &f64, b: &f64| (a - b).abs();
        let kernel = MaternParams { variance: 1.0, length_scale: 1.0, smoothness: nu };
        let gp = gp_fit(&metric, &pts, &ys, kernel, 0.0, 0.0).unwrap();
        for x in &pts {
            prop_assert!(gp.posterior(&metric, x).1 <= 1e-9 + gp.jitter());
        }
    }

    #[test]
    fn config_round_trip(
        seed in any::<u64>(),
        n in 1usize..1000,
        lambda in 0.01..10.0f64,
        shape in 0.5..10.0f64,
        scale in 0.1..100.0f64,
        ridge in 1e-9..1.0f64,
        vs in prop::sample::subsequence(Variant::ALL.to_vec(), 1..=4),
    ) {
        let mut cfg = ExperimentConfig::default();
        cfg.run.seed = seed;
        cfg.network.n = n;
        cfg.network.lambda = lambda;
        cfg.neuron.tau_e = GammaSpec::new(shape, scale).unwrap();
        cfg.sim.ridge = ridge;
        cfg.ablation.variants = vs;
        let text = cfg.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_distance_symmetric(seed in any::<u64>(), draw in any::<u64>()) {
        let space = SearchSpace::table_defaults(3.0);
        let metric = DistributionMetric::new(&space, 64, 32, true, seed).unwrap();
        let mut rng = hrsnn::seeds::rng_from(draw);
        let c = space.random(2, &mut rng).unwrap();
        let ab = metric.distance(&c[0], &c[1]).unwrap();
        let ba = metric.distance(&c[1], &c[0]).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(metric.distance(&c[0], &c[0]).unwrap() == 0.0);
    }

    #[test]
    fn variants_never_perturb_topology(seed in any::<u64>()) {
        let cfg = small_cfg();
        let wiring = Variant::ALL.map(|v| build_network(&cfg, v, seed, 16).unwrap().topology);
        prop_assert!(wiring.iter().all(|t| *t == wiring[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn stdp_preserves_sign(seed in 0u64..1000, variant in prop::sample::select(Variant::ALL.to_vec())) {
        let mut cfg = small_cfg();
        cfg.stdp.a_plus = GammaSpec::new(2.0, 0.2).unwrap();
        cfg.stdp.a_minus = GammaSpec::new(2.0, 0.2).unwrap();
        let data = PipelineData::generate(&cfg, seed).unwrap();
        let mut net = build_network(&cfg, variant, seed, data.n_inputs).unwrap();
        net.train_unsupervised(&data.trains, 2, 1.0).unwrap();
        let w = net.weights();
        for (e, w) in net.topology.recurrent.iter().zip(&w) {
            match e.class {
                SynapseClass::EE | SynapseClass::EI => prop_assert!(*w >= 0.0 && *w <= cfg.network.w_max),
                _ => prop_assert!(*w <= 0.0 && *w >= -cfg.network.w_max),
            }
        }
    }

    #[test]
    fn training_is_deterministic(seed in 0u64..1000) {
        let cfg = small_cfg();
        let data = PipelineData::generate(&cfg, seed).unwrap();
        let run = || {
            let mut net = build_network(&cfg, Variant::HeNHeS, seed, data.n_inputs).unwrap();
            let logs: Vec<_> = data.trains.iter().map(|t| net.run_trial(t, 1.0, true).unwrap().spike_log).collect();
            let states = net.extract_states(&data.trains, 1.0).unwrap().states;
            (logs, states, net.weights())
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.0, b.0);
        prop_assert_eq!(a.1, b.1);
        prop_assert_eq!(a.2, b.2);
    }

    #[test]
    fn no_leakage_between_trials(seed in 0u64..1000) {
        let cfg = small_cfg();
        let data = PipelineData::generate(&cfg, seed).unwrap();
        let mut net = build_network(&cfg, Variant::HeNHeS, seed, data.n_inputs).unwrap();
        let first = net.run_trial(&data.trains[0], 1.0, false).unwrap();
        net.run_trial(&data.trains[1], 1.0, false).unwrap();
        let again = net.run_trial(&data.trains[0], 1.0, false).unwrap();
        let twice = net.run_trial(&data.trains[0], 1.0, false).unwrap();
        prop_assert_eq!(&first.state, &again.state);
        prop_assert_eq!(&again.state, &twice.state);
        prop_assert_eq!(first.spike_log, twice.spike_log);
    }

    #[test]
    fn ac_ops_match_event_log(seed in 0u64..1000) {
        let cfg = small_cfg();
        let data = PipelineData::generate(&cfg, seed).unwrap();
        let net = build_network(&cfg, Variant::HeNHeS, seed, data.n_inputs).unwrap();
        let fan_out = net.recurrent_fan_out().to_vec();
        let input_fan = net.input_fan_out().to_vec();
        for t in &data.trains {
            let out = net.run_frozen(t, 1.0).unwrap();
            let recurrent: u64 = out.spike_log.iter().map(|s| fan_out[s.neuron as usize]).sum();
            let inputs: u64 = t.events().iter().map(|e| input_fan.get(e.neuron).copied().unwrap_or(0)).sum();
            prop_assert_eq!(out.report.ac_ops, recurrent + inputs);
        }
    }
}

/// Inputs drive two excitatory and one inhibitory neuron; the inhibitory one
/// projects onto both excitatory ones and nothing feeds back into it.
fn inhibition_network(inhibition: f64) -> Network {
    let polarity = vec![Polarity::Excitatory, Polarity::Excitatory, Polarity::Inhibitory];
    let edge = |pre: usize, post: usize, weight: f64| Edge {
        pre,
        post,
        weight,
        class: SynapseClass::recurrent(polarity[pre], polarity[post]),
    };
    let topo = NetworkTopology {
        n: 3,
        lambda: 1.0,
        seed: 0,
        ei_ratio: 2.0,
        lattice: Lattice::for_count(3),
        recurrent: vec![edge(2, 0, -inhibition), edge(2, 1, -inhibition)],
        n_inputs: 3,
        inputs: (0..3)
            .map(|i| InputEdge {
                input: i,
                target: i,
                weight: 0.08,
            })
            .collect(),
        n_readout: 1,
        readout: (0..3)
            .map(|source| ReadoutTap {
                source,
                output: 0,
                weight: 0.5,
            })
            .collect(),
        polarity: polarity.clone(),
    };
    let neurons = polarity
        .iter()
        .map(|&polarity| NeuronParams {
            tau_m: 10.0,
            r_m: 10.0,
            polarity,
            ..NeuronParams::default()
        })
        .collect();
    let readout = NeuronParams {
        v_th: f64::INFINITY,
        ..NeuronParams::default()
    };
    Network::new(topo, neurons, &vec![StdpParams::default(); 5], readout, 10.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inhibition_suppresses(times in prop::collection::vec((0usize..3, 1u32..100), 1..80), w in 0.0..5.0f64, dw in 0.0..5.0f64) {
        let train = SpikeTrain::new(
            times.iter().map(|&(neuron, t)| SpikeEvent { neuron, time: t as f64 }).collect(),
            100.0,
        )
        .unwrap();
        let spikes = |inh: f64| inhibition_network(inh).run_frozen(&train, 1.0).unwrap().report.total_spikes;
        prop_assert!(spikes(w + dw) <= spikes(w));
    }
}

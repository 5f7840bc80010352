//! The experiment commands. Each writes CSV artifacts into an output
//! directory and then renders plots for everything in it; CSV files are the
//! authoritative record, SVGs and `summary.txt` are derived from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use super::pipeline::{
    apply_candidate, build_network, run_on, search_space, subsample_train, PipelineData, RunMetrics,
};
use super::{svg, ExperimentConfig, Variant};
use crate::gp::{bo_loop, expected_improvement, random_search, trace_csv, BoResult, BoSettings, KernelDistance};
use crate::lif::{step_neuron, NeuronParams, NeuronState, Polarity};
use crate::ot::{exact_transport, sq_euclidean, w2_1d, EmpiricalDistribution};
use crate::plasticity::{StdpParams, SynapseState};
use crate::separability::{effective_rank_of, rank_sweep, ProbeResult, SweepCell};
use crate::{seeds, Error, Result};

pub const ABLATION_RUNS: &str = "ablation_runs.csv";
pub const ABLATION: &str = "ablation.csv";
pub const SWEEP_NEURONS: &str = "sweep_neurons.csv";
pub const SWEEP_TRAIN_FRACTION: &str = "sweep_train_fraction.csv";
pub const SWEEP_LAMBDA_WSCALE: &str = "sweep_lambda_wscale.csv";
pub const BO_TRACE: &str = "bo_trace.csv";
pub const RANDOM_TRACE: &str = "random_trace.csv";
pub const SELFTEST: &str = "selftest.csv";
pub const SUMMARY: &str = "summary.txt";

/// Seed of repetition `r` of a run.
pub fn repeat_seed(base: u64, r: usize) -> u64 {
    seeds::derive_indexed(base, "repeat", r as u64)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Aggregate of several runs of one variant.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub acc_mean: f64,
    pub acc_sd: f64,
    pub nu_mean: f64,
    pub nu_sd: f64,
    pub active_mean: f64,
    pub ac_ops_mean: f64,
    pub rank_mean: f64,
}

impl VariantSummary {
    pub fn of(variant: Variant, runs: &[RunMetrics]) -> Self {
        let col = |f: fn(&RunMetrics) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        let (acc_mean, acc_sd) = mean_sd(&col(|r| r.accuracy));
        let (nu_mean, nu_sd) = mean_sd(&col(|r| r.mean_activation));
        Self {
            variant,
            runs: runs.len(),
            acc_mean,
            acc_sd,
            nu_mean,
            nu_sd,
            active_mean: mean_sd(&col(|r| r.active_neurons as f64)).0,
            ac_ops_mean: mean_sd(&col(|r| r.ac_ops as f64)).0,
            rank_mean: mean_sd(&col(|r| r.effective_rank as f64)).0,
        }
    }

    const HEADER: &'static str = "variant,runs,acc_mean,acc_sd,nu_mean,nu_sd,active_mean,ac_ops_mean,rank_mean";

    fn csv_fields(&self) -> String {
        format!(
            "{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            self.variant,
            self.runs,
            self.acc_mean,
            self.acc_sd,
            self.nu_mean,
            self.nu_sd,
            self.active_mean,
            self.ac_ops_mean,
            self.rank_mean
        )
    }
}

/// Runs `variants` x `repeats` seeds; data is generated once per seed and
/// shared by the variants. Results are grouped by variant, in seed order.
pub fn run_grid(
    cfg: &ExperimentConfig,
    variants: &[Variant],
    repeats: usize,
    train_fraction: f64,
) -> Result<Vec<(Variant, Vec<RunMetrics>)>> {
    let data: Vec<PipelineData> = (0..repeats)
        .into_par_iter()
        .map(|r| PipelineData::generate(cfg, repeat_seed(cfg.run.seed, r)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..repeats).map(move |r| (v, r)))
        .collect();
    let results: Vec<RunMetrics> = jobs
        .par_iter()
        .map(|&(v, r)| run_on(cfg, variants[v], repeat_seed(cfg.run.seed, r), &data[r], train_fraction))
        .collect::<Result<_>>()?;
    Ok(variants
        .iter()
        .zip(results.chunks(repeats.max(1)))
        .map(|(v, rs)| (*v, rs.to_vec()))
        .collect())
}

pub fn cmd_gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let data = PipelineData::generate(cfg, cfg.run.seed)?;
    let dir = out.join("data");
    fs::create_dir_all(&dir)?;
    let mut labels = String::from("sample,label,spikes\n");
    for (i, (seq, train)) in data.dataset.samples.iter().zip(&data.trains).enumerate() {
        let mut bytes = Vec::new();
        seq.write_binary(&mut bytes)?;
        fs::write(dir.join(format!("sample_{i:04}.hrsf")), bytes)?;
        fs::write(dir.join(format!("spikes_{i:04}.csv")), train.to_csv())?;
        let _ = writeln!(labels, "{i},{},{}", data.dataset.labels[i], train.len());
    }
    fs::write(dir.join("labels.csv"), &labels)?;
    Ok(format!(
        "wrote {} samples ({} classes, {} inputs) to {}",
        data.dataset.len(),
        data.dataset.n_classes,
        data.n_inputs,
        dir.display()
    ))
}

pub fn cmd_ablation(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<VariantSummary>> {
    let grid = run_grid(cfg, &cfg.ablation.variants, cfg.run.repeats, 1.0)?;
    let mut runs = String::from(
        "variant,repeat,seed,accuracy,train_accuracy,mean_activation,active_neurons,ac_ops,effective_rank\n",
    );
    let mut summary = format!("{}\n", VariantSummary::HEADER);
    let mut out_rows = Vec::new();
    for (variant, rs) in &grid {
        for (r, m) in rs.iter().enumerate() {
            let _ = writeln!(
                runs,
                "{variant},{r},{},{:?},{:?},{:?},{},{},{}",
                repeat_seed(cfg.run.seed, r),
                m.accuracy,
                m.train_accuracy,
                m.mean_activation,
                m.active_neurons,
                m.ac_ops,
                m.effective_rank
            );
        }
        let s = VariantSummary::of(*variant, rs);
        let _ = writeln!(summary, "{}", s.csv_fields());
        out_rows.push(s);
    }
    write(out, ABLATION_RUNS, &runs)?;
    write(out, ABLATION, &summary)?;
    cmd_report(out)?;
    Ok(out_rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Neurons,
    LambdaWscale,
    TrainFraction,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neurons" => Ok(SweepAxis::Neurons),
            "lambda_wscale" => Ok(SweepAxis::LambdaWscale),
            "train_fraction" => Ok(SweepAxis::TrainFraction),
            other => Err(Error::Validation(format!(
                "unknown sweep axis `{other}` (expected neurons, lambda_wscale or train_fraction)"
            ))),
        }
    }
}

/// One summarized point of a one-dimensional sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    pub summary: VariantSummary,
}

fn line_sweep_csv(x_name: &str, points: &[SweepPoint]) -> String {
    let mut s = format!("{x_name},{}\n", VariantSummary::HEADER);
    for p in points {
        let _ = writeln!(s, "{:?},{}", p.x, p.summary.csv_fields());
    }
    s
}

/// Neuron-count sweep.
pub fn sweep_neurons(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::new();
    for &n in &cfg.sweep.neurons {
        let mut c = cfg.clone();
        c.network.n = n;
        for (variant, rs) in run_grid(&c, &cfg.sweep.variants, cfg.run.repeats, 1.0)? {
            points.push(SweepPoint {
                x: n as f64,
                summary: VariantSummary::of(variant, &rs),
            });
        }
    }
    Ok(points)
}

pub fn sweep_train_fraction(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::new();
    for &f in &cfg.sweep.train_fractions {
        for (variant, rs) in run_grid(cfg, &cfg.sweep.variants, cfg.run.repeats, f)? {
            points.push(SweepPoint {
                x: f,
                summary: VariantSummary::of(variant, &rs),
            });
        }
    }
    Ok(points)
}

/// lambda x w_scale effective-rank grid for one variant; each repetition
/// uses its own seed for data, wiring and parameter draws.
pub fn sweep_lambda_wscale(cfg: &ExperimentConfig, variant: Variant) -> Result<Vec<SweepCell>> {
    let s = &cfg.sweep;
    let data: Vec<PipelineData> = (0..s.reps)
        .into_par_iter()
        .map(|r| PipelineData::generate(cfg, repeat_seed(cfg.run.seed, r)))
        .collect::<Result<_>>()?;
    rank_sweep(
        &s.lambdas,
        &s.w_scales,
        s.reps,
        cfg.sim.rank_threshold,
        |lambda, w_scale, rep| {
            let mut c = cfg.clone();
            c.network.lambda = lambda;
            c.network.w_scale = w_scale;
            let d = &data[rep];
            let mut net = build_network(&c, variant, repeat_seed(cfg.run.seed, rep), d.n_inputs)?;
            let (train, _) = d.dataset.stratified_split();
            let train = subsample_train(&d.dataset, &train, 1.0);
            let trains: Vec<_> = train.iter().map(|&i| d.trains[i].clone()).collect();
            net.train_unsupervised(&trains, c.sim.epochs, c.sim.dt)?;
            let ex = net.extract_states(&d.trains, c.sim.dt)?;
            Ok(ProbeResult {
                active_neurons: ex.active_neurons(),
                states: ex.states,
            })
        },
    )
}

pub fn cmd_sweep(cfg: &ExperimentConfig, axis: SweepAxis, out: &Path) -> Result<String> {
    match axis {
        SweepAxis::Neurons => {
            let pts = sweep_neurons(cfg)?;
            write(out, SWEEP_NEURONS, &line_sweep_csv("n", &pts))?;
        }
        SweepAxis::TrainFraction => {
            let pts = sweep_train_fraction(cfg)?;
            write(out, SWEEP_TRAIN_FRACTION, &line_sweep_csv("train_fraction", &pts))?;
        }
        SweepAxis::LambdaWscale => {
            let mut csv = String::from("variant,lambda,w_scale,mean_rank,sd_rank,mean_active\n");
            for &v in &cfg.sweep.variants {
                for c in sweep_lambda_wscale(cfg, v)? {
                    let _ = writeln!(
                        csv,
                        "{v},{:?},{:?},{:?},{:?},{:?}",
                        c.lambda, c.w_scale, c.mean_rank, c.sd_rank, c.mean_active
                    );
                }
            }
            write(out, SWEEP_LAMBDA_WSCALE, &csv)?;
        }
    }
    cmd_report(out)
}

pub fn bo_settings(cfg: &ExperimentConfig) -> BoSettings {
    BoSettings {
        n_init: cfg.bo.n_init,
        budget: cfg.bo.budget,
        pool_size: cfg.bo.pool_size,
        smoothness: cfg.bo.smoothness,
        samples_per_dist: cfg.bo.samples,
        n_projections: cfg.bo.projections,
        normalize: cfg.bo.normalize,
        noise_ratio: cfg.bo.noise_ratio,
        distance: match cfg.bo.metric.as_str() {
            "sinkhorn" => KernelDistance::Sinkhorn {
                reg: cfg.bo.sinkhorn_reg,
            },
            _ => KernelDistance::Sliced,
        },
        seed: seeds::derive(cfg.run.seed, seeds::BO),
    }
}

/// Accuracy of the pipeline with a candidate bound to `cfg`, on data and
/// wiring drawn from `cfg.run.seed`.
pub fn pipeline_objective<'a>(
    cfg: &'a ExperimentConfig,
    data: &'a PipelineData,
) -> impl Fn(&crate::space::CandidateConfig) -> Result<f64> + Sync + 'a {
    move |c| {
        let bound = apply_candidate(cfg, c)?;
        let m = run_on(&bound, cfg.bo.variant, cfg.run.seed, data, 1.0)?;
        if m.accuracy.is_finite() {
            Ok(m.accuracy)
        } else {
            Err(Error::Objective("no held-out samples".into()))
        }
    }
}

/// BO (and optionally random search) over the pipeline hyperparameters.
pub fn run_optimize(cfg: &ExperimentConfig) -> Result<(BoResult, Option<BoResult>)> {
    let data = PipelineData::generate(cfg, cfg.run.seed)?;
    let space = search_space(cfg);
    let settings = bo_settings(cfg);
    let objective = pipeline_objective(cfg, &data);
    let bo = bo_loop(&space, &objective, &settings)?;
    let baseline = if cfg.bo.baseline {
        Some(random_search(&space, &objective, &settings)?)
    } else {
        None
    };
    Ok((bo, baseline))
}

pub fn cmd_optimize(cfg: &ExperimentConfig, out: &Path) -> Result<BoResult> {
    let (bo, baseline) = run_optimize(cfg)?;
    write(out, BO_TRACE, &trace_csv(&bo.trace)?)?;
    if let Some(r) = &baseline {
        write(out, RANDOM_TRACE, &trace_csv(&r.trace)?)?;
    }
    write(out, "incumbent.json", &format!("{}\n", bo.best.to_blob()))?;
    write(out, "incumbent.cfg", &apply_candidate(cfg, &bo.best)?.to_text())?;
    cmd_report(out)?;
    Ok(bo)
}

/// Reads a CSV into rows of named string fields.
fn read_table(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(
            headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect(),
        );
    }
    Ok(rows)
}

fn num(row: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    row.get(key)
        .ok_or_else(|| Error::Validation(format!("missing column `{key}`")))?
        .parse()
        .map_err(|_| Error::Validation(format!("column `{key}` is not numeric")))
}

fn text<'a>(row: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    row.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Validation(format!("missing column `{key}`")))
}

fn render_ablation(dir: &Path, summary: &mut String) -> Result<()> {
    let rows = read_table(&dir.join(ABLATION))?;
    let mut bars = Vec::new();
    let mut nu = Vec::new();
    let _ = writeln!(summary, "ablation:");
    for r in &rows {
        let v = text(r, "variant")?.to_string();
        let (acc, sd, nu_m) = (num(r, "acc_mean")?, num(r, "acc_sd")?, num(r, "nu_mean")?);
        let _ = writeln!(
            summary,
            "  {v}: accuracy {acc:.4} +- {sd:.4}, activation {nu_m:.4}, rank {:.2}",
            num(r, "rank_mean")?
        );
        bars.push((v.clone(), acc, sd));
        nu.push((v, nu_m, num(r, "nu_sd")?));
    }
    write(
        dir,
        "ablation_accuracy.svg",
        &svg::bar_chart("Ablation accuracy", "accuracy", &bars),
    )?;
    write(
        dir,
        "ablation_activation.svg",
        &svg::bar_chart("Average activation", "spikes per neuron", &nu),
    )?;
    Ok(())
}

fn render_line_sweep(dir: &Path, file: &str, x_name: &str, title: &str, summary: &mut String) -> Result<()> {
    let rows = read_table(&dir.join(file))?;
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let _ = writeln!(summary, "{title}:");
    for r in &rows {
        let (x, acc) = (num(r, x_name)?, num(r, "acc_mean")?);
        let v = text(r, "variant")?;
        let _ = writeln!(
            summary,
            "  {x_name}={x} {v}: accuracy {acc:.4} +- {:.4}",
            num(r, "acc_sd")?
        );
        series.entry(v.to_string()).or_default().push((x, acc));
    }
    let series: Vec<(String, Vec<(f64, f64)>)> = series.into_iter().collect();
    let svg_name = file.replace(".csv", ".svg");
    write(dir, &svg_name, &svg::line_plot(title, x_name, "accuracy", &series))
}

fn render_rank_grid(dir: &Path, summary: &mut String) -> Result<()> {
    let rows = read_table(&dir.join(SWEEP_LAMBDA_WSCALE))?;
    let mut by_variant: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for r in &rows {
        by_variant.entry(text(r, "variant")?.to_string()).or_default().push((
            num(r, "lambda")?,
            num(r, "w_scale")?,
            num(r, "mean_rank")?,
        ));
    }
    let _ = writeln!(summary, "lambda x w_scale effective rank:");
    for (v, cells) in &by_variant {
        let mut lambdas: Vec<f64> = cells.iter().map(|c| c.0).collect();
        let mut scales: Vec<f64> = cells.iter().map(|c| c.1).collect();
        for xs in [&mut lambdas, &mut scales] {
            xs.sort_by(f64::total_cmp);
            xs.dedup();
        }
        let grid: Vec<Vec<f64>> = lambdas
            .iter()
            .map(|l| {
                scales
                    .iter()
                    .map(|w| cells.iter().find(|c| c.0 == *l && c.1 == *w).map_or(f64::NAN, |c| c.2))
                    .collect()
            })
            .collect();
        let best = cells.iter().fold(
            (f64::NAN, f64::NAN, f64::NEG_INFINITY),
            |b, c| if c.2 > b.2 { *c } else { b },
        );
        let _ = writeln!(
            summary,
            "  {v}: max rank {:.2} at lambda={} w_scale={}",
            best.2, best.0, best.1
        );
        write(
            dir,
            &format!("sweep_lambda_wscale_{v}.svg"),
            &svg::heatmap(
                &format!("Effective rank ({v})"),
                "w_scale",
                "lambda",
                &scales,
                &lambdas,
                &grid,
            ),
        )?;
    }
    Ok(())
}

fn render_traces(dir: &Path, summary: &mut String) -> Result<()> {
    let mut series = Vec::new();
    for (name, file) in [("BO", BO_TRACE), ("random", RANDOM_TRACE)] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let rows = read_table(&path)?;
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| Ok((num(r, "iter")? + 1.0, num(r, "incumbent")?)))
            .collect::<Result<_>>()?;
        let failed = rows
            .iter()
            .filter(|r| r.get("failed").map(String::as_str) == Some("1"))
            .count();
        if let Some(last) = pts.last() {
            let _ = writeln!(
                summary,
                "{name} search: best score {:.4} after {} evaluations ({failed} failed)",
                last.1,
                pts.len()
            );
        }
        series.push((name.to_string(), pts));
    }
    write(
        dir,
        "bo_convergence.svg",
        &svg::line_plot("Incumbent score", "evaluations", "score", &series),
    )
}

/// Renders plots and `summary.txt` for every known artifact in `dir` and
/// returns the summary text. Rendering is deterministic, so rerunning over
/// the same CSVs reproduces the same files.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let mut summary = String::new();
    let mut found = 0;
    let mut problems = Vec::new();
    let mut section = |file: &str, summary: &mut String, f: &dyn Fn(&mut String) -> Result<()>| {
        if dir.join(file).exists() {
            found += 1;
            if let Err(e) = f(summary) {
                problems.push(format!("{file}: {e}"));
            }
        }
    };
    section(ABLATION, &mut summary, &|s| render_ablation(dir, s));
    section(SWEEP_NEURONS, &mut summary, &|s| {
        render_line_sweep(dir, SWEEP_NEURONS, "n", "Accuracy vs. reservoir size", s)
    });
    section(SWEEP_TRAIN_FRACTION, &mut summary, &|s| {
        render_line_sweep(
            dir,
            SWEEP_TRAIN_FRACTION,
            "train_fraction",
            "Accuracy vs. training data",
            s,
        )
    });
    section(SWEEP_LAMBDA_WSCALE, &mut summary, &|s| render_rank_grid(dir, s));
    section(BO_TRACE, &mut summary, &|s| render_traces(dir, s));
    section(SELFTEST, &mut summary, &|s| {
        let rows = read_table(&dir.join(SELFTEST))?;
        let passed = rows
            .iter()
            .filter(|r| r.get("passed").map(String::as_str) == Some("1"))
            .count();
        let _ = writeln!(s, "selftest: {passed}/{} checks passed", rows.len());
        Ok(())
    });
    if found == 0 {
        summary.push_str("no artifacts\n");
    }
    for p in &problems {
        let _ = writeln!(summary, "error: {p}");
    }
    if dir.exists() {
        fs::write(dir.join(SUMMARY), &summary)?;
    }
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(Error::Validation(problems.join("; ")))
    }
}

/// Quick numerical checks of the core building blocks.
pub fn selftest() -> Vec<(&'static str, bool)> {
    let mut checks = Vec::new();

    checks.push((
        "ei_closed_form",
        (expected_improvement(0.5, 1.0, 0.5) - 0.398942).abs() < 1e-6,
    ));

    let lif_ok = (|| -> Result<bool> {
        let p = NeuronParams {
            tau_m: 20.0,
            v_th: 10.0,
            ..NeuronParams::default()
        };
        let mut s = NeuronState::initial(&p);
        let mut worst: f64 = 0.0;
        for k in 1..=50 {
            s = step_neuron(s, &p, 0.5, k as f64, 1.0)?.0;
            let exact = 0.5 * (1.0 - (-(k as f64) / 20.0).exp());
            worst = worst.max((s.v - exact).abs());
        }
        Ok(worst < 1e-9)
    })()
    .unwrap_or(false);
    checks.push(("lif_closed_form", lif_ok));

    let stdp_ok = {
        let params = StdpParams {
            a_plus_rate: 0.01,
            tau_plus: 15.0,
            ..StdpParams::default()
        };
        let mut s = SynapseState::new(0.5, params, Polarity::Excitatory, 1.0);
        s.on_pre_spike();
        s.decay_traces(7.0);
        s.on_post_spike();
        (s.weight - 0.5 - 0.01 * (-7.0f64 / 15.0).exp()).abs() < 1e-12
    };
    checks.push(("stdp_pair", stdp_ok));

    let ot_ok = (|| -> Result<bool> {
        let p = EmpiricalDistribution::new(vec![vec![0.0], vec![1.0], vec![3.0]], vec![0.2, 0.5, 0.3])?;
        let q = EmpiricalDistribution::new(vec![vec![0.5], vec![2.5]], vec![0.6, 0.4])?;
        let exact = exact_transport(&p, &q, sq_euclidean)?.sqrt();
        Ok((w2_1d(&p, &q)? - exact).abs() < 1e-9)
    })()
    .unwrap_or(false);
    checks.push(("w2_matches_exact", ot_ok));

    let rank_ok = {
        let u = nalgebra::DMatrix::from_fn(8, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + j as f64 * 0.1);
        let v = nalgebra::DMatrix::from_fn(3, 6, |i, j| ((i * 2 + j * 5) % 7) as f64 - 3.0);
        effective_rank_of(&(u * v), 1.0 - 1e-12)
            .map(|r| r.effective_rank == 3)
            .unwrap_or(false)
    };
    checks.push(("effective_rank", rank_ok));

    let cfg = ExperimentConfig::default();
    checks.push((
        "config_round_trip",
        ExperimentConfig::parse(&cfg.to_text())
            .map(|c| c == cfg)
            .unwrap_or(false),
    ));
    checks
}

pub fn cmd_selftest(out: &Path) -> Result<Vec<(&'static str, bool)>> {
    let checks = selftest();
    let mut csv = String::from("check,passed\n");
    for (name, ok) in &checks {
        let _ = writeln!(csv, "{name},{}", u8::from(*ok));
    }
    write(out, SELFTEST, &csv)?;
    cmd_report(out)?;
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for (name, ok) in selftest() {
            assert!(ok, "{name}");
        }
    }

    #[test]
    fn report_on_empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(cmd_report(dir.path()).unwrap(), "no artifacts\n");
    }

    #[test]
    fn axis_names() {
        assert_eq!("lambda_wscale".parse::<SweepAxis>().unwrap(), SweepAxis::LambdaWscale);
        assert!("x".parse::<SweepAxis>().is_err());
    }
}

//! Synthetic spatio-temporal datasets and frame-difference spike encoding.
//!
//! Input neuron `r * width + c` fires at `t * frame_period` whenever pixel
//! `(r, c)` changes by more than the threshold between frames `t - 1` and `t`.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::seeds;
use crate::sim::{SpikeEvent, SpikeTrain};
use crate::{Error, Result};

/// Row-major intensity frames sharing one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub height: usize,
    pub width: usize,
    /// ms between frames.
    pub frame_period: f64,
    pub frames: Vec<Vec<f64>>,
}

impl FrameSequence {
    pub fn new(height: usize, width: usize, frame_period: f64, frames: Vec<Vec<f64>>) -> Result<Self> {
        if !(frame_period > 0.0 && frame_period.is_finite()) {
            return Err(Error::Validation(format!(
                "frame period must be > 0, got {frame_period}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::Validation("frames must have nonzero dimensions".into()));
        }
        for (t, f) in frames.iter().enumerate() {
            if f.len() != height * width {
                return Err(Error::Validation(format!(
                    "frame {t} has {} pixels, expected {height}x{width}",
                    f.len()
                )));
            }
        }
        Ok(Self {
            height,
            width,
            frame_period,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn pixel(&self, t: usize, r: usize, c: usize) -> f64 {
        self.frames[t][r * self.width + c]
    }

    /// Trial length covering every frame: `len * frame_period`.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 * self.frame_period
    }

    /// Writes the binary form.
    ///
    /// Layout (little endian): magic `HRSF`, `u32` version (1), `u32` frame
    /// count, `u32` height, `u32` width, `f32` frame period, then every frame
    /// as row-major `f32`.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(b"HRSF")?;
        for v in [1u32, self.frames.len() as u32, self.height as u32, self.width as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.frame_period as f32).to_le_bytes())?;
        for f in &self.frames {
            for &p in f {
                w.write_all(&(p as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"HRSF" {
            return Err(Error::Validation("not an HRSF frame file".into()));
        }
        let mut word = [0u8; 4];
        let mut header = [0u32; 4];
        for h in &mut header {
            r.read_exact(&mut word)?;
            *h = u32::from_le_bytes(word);
        }
        let [version, n_frames, height, width] = header;
        if version != 1 {
            return Err(Error::Validation(format!("unsupported HRSF version {version}")));
        }
        r.read_exact(&mut word)?;
        let frame_period = f64::from(f32::from_le_bytes(word));
        let (n_frames, height, width) = (n_frames as usize, height as usize, width as usize);
        let mut frames = Vec::with_capacity(n_frames);
        for _ in 0..n_frames {
            let mut f = Vec::with_capacity(height * width);
            for _ in 0..height * width {
                r.read_exact(&mut word)?;
                f.push(f64::from(f32::from_le_bytes(word)));
            }
            frames.push(f);
        }
        Self::new(height, width, frame_period, frames)
    }

    /// Loads every `*.csv` file in `dir` (sorted by name) as one frame; each
    /// file is a headerless grid of numbers.
    pub fn load_csv_dir(dir: &Path, frame_period: f64) -> Result<Self> {
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::Validation(format!("no CSV frames in {}", dir.display())));
        }
        let mut frames = Vec::new();
        let (mut height, mut width) = (0, 0);
        for p in &paths {
            let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(p)?;
            let mut rows = 0;
            let mut data = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                let before = data.len();
                for v in rec.iter() {
                    data.push(
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Validation(format!("bad value `{v}` in {}", p.display())))?,
                    );
                }
                let w = data.len() - before;
                if rows == 0 {
                    width = w;
                } else if w != width {
                    return Err(Error::Validation(format!("ragged rows in {}", p.display())));
                }
                rows += 1;
            }
            if frames.is_empty() {
                height = rows;
            } else if rows != height {
                return Err(Error::Validation(format!(
                    "{} does not match the first frame's shape",
                    p.display()
                )));
            }
            frames.push(data);
        }
        Self::new(height, width, frame_period, frames)
    }

    pub fn save_csv_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (t, f) in self.frames.iter().enumerate() {
            let mut s = String::new();
            for row in f.chunks(self.width) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            fs::write(dir.join(format!("frame_{t:05}.csv")), s)?;
        }
        Ok(())
    }
}

/// Frame-difference encoding.
pub fn encode_frames(seq: &FrameSequence, threshold: f64) -> Result<SpikeTrain> {
    if seq.len() < 2 {
        return Err(Error::Validation("encoding needs at least two frames".into()));
    }
    let n_pix = seq.height * seq.width;
    if seq.frames.iter().any(|f| f.len() != n_pix) {
        return Err(Error::Validation("frames have mismatched shapes".into()));
    }
    let mut events = Vec::new();
    for t in 1..seq.len() {
        let time = t as f64 * seq.frame_period;
        let (prev, cur) = (&seq.frames[t - 1], &seq.frames[t]);
        for p in 0..n_pix {
            if (cur[p] - prev[p]).abs() > threshold {
                events.push(SpikeEvent { neuron: p, time });
            }
        }
    }
    SpikeTrain::new(events, seq.duration())
}

/// Crops every frame to `box_h x box_w` around its intensity center of
/// gravity, clamped to the frame. Empty frames use the geometric center.
pub fn filter_frames(seq: &FrameSequence, box_h: usize, box_w: usize) -> Result<FrameSequence> {
    if box_h == 0 || box_w == 0 || box_h > seq.height || box_w > seq.width {
        return Err(Error::Validation(format!(
            "crop {box_h}x{box_w} does not fit in {}x{}",
            seq.height, seq.width
        )));
    }
    let frames = seq
        .frames
        .iter()
        .map(|f| {
            let (mut mass, mut sr, mut sc) = (0.0, 0.0, 0.0);
            for (i, &v) in f.iter().enumerate() {
                mass += v;
                sr += v * (i / seq.width) as f64;
                sc += v * (i % seq.width) as f64;
            }
            let (cr, cc) = if mass > 0.0 {
                (sr / mass, sc / mass)
            } else {
                ((seq.height as f64 - 1.0) / 2.0, (seq.width as f64 - 1.0) / 2.0)
            };
            let top = window_start(cr, box_h, seq.height);
            let left = window_start(cc, box_w, seq.width);
            let mut out = Vec::with_capacity(box_h * box_w);
            for r in top..top + box_h {
                out.extend_from_slice(&f[r * seq.width + left..r * seq.width + left + box_w]);
            }
            out
        })
        .collect();
    FrameSequence::new(box_h, box_w, seq.frame_period, frames)
}

fn window_start(center: f64, size: usize, limit: usize) -> usize {
    let start = (center - (size as f64 - 1.0) / 2.0).round();
    start.clamp(0.0, (limit - size) as f64) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// A bar sweeping across the frame; classes differ by direction.
    MovingBar,
    /// Fixed per-class spatio-temporal pixel patterns with timing jitter.
    JitterPattern,
    /// Per-class spatial firing-rate maps sampled frame by frame.
    RatePattern,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::MovingBar => "moving_bar",
            Task::JitterPattern => "jitter_pattern",
            Task::RatePattern => "rate_pattern",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moving_bar" => Ok(Task::MovingBar),
            "jitter_pattern" => Ok(Task::JitterPattern),
            "rate_pattern" => Ok(Task::RatePattern),
            other => Err(Error::Validation(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub task: Task,
    pub n_classes: usize,
    pub n_per_class: usize,
    pub height: usize,
    pub width: usize,
    pub n_frames: usize,
    pub frame_period: f64,
    /// Per-pixel flip probability.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            task: Task::MovingBar,
            n_classes: 4,
            n_per_class: 5,
            height: 8,
            width: 8,
            n_frames: 12,
            frame_period: 5.0,
            noise: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<FrameSequence>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn encode(&self, threshold: f64) -> Result<Vec<SpikeTrain>> {
        self.samples.iter().map(|s| encode_frames(s, threshold)).collect()
    }

    pub fn filtered(&self, box_h: usize, box_w: usize) -> Result<Self> {
        Ok(Self {
            samples: self
                .samples
                .iter()
                .map(|s| filter_frames(s, box_h, box_w))
                .collect::<Result<_>>()?,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
        })
    }

    /// Stratified split: within each class the first half (rounded down, at
    /// least one) of its samples go to training and the rest to testing.
    /// Returns index lists.
    pub fn stratified_split(&self) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for c in 0..self.n_classes {
            let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == c).collect();
            let k = (idx.len() / 2).max(1).min(idx.len());
            train.extend_from_slice(&idx[..k]);
            test.extend_from_slice(&idx[k..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        (train, test)
    }
}

/// Generates `n_classes * n_per_class` labeled sequences; sample `i` has
/// label `i % n_classes`.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    if spec.n_classes < 2 {
        return Err(Error::ParameterDomain(format!(
            "need at least 2 classes, got {}",
            spec.n_classes
        )));
    }
    if spec.n_frames < 2 {
        return Err(Error::ParameterDomain("need at least 2 frames".into()));
    }
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::ParameterDomain(format!(
            "noise must lie in [0, 1], got {}",
            spec.noise
        )));
    }
    let n = spec.n_classes * spec.n_per_class;
    let templates = match spec.task {
        Task::MovingBar => Vec::new(),
        _ => class_templates(spec, seeds::derive(seed, "data-templates")),
    };
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % spec.n_classes;
        let mut rng = seeds::rng_from(seeds::derive_indexed(seed, seeds::DATA, i as u64));
        let mut frames = match spec.task {
            Task::MovingBar => moving_bar(spec, class, &mut rng),
            Task::JitterPattern => jitter_pattern(spec, &templates[class], &mut rng),
            Task::RatePattern => rate_pattern(spec, &templates[class], &mut rng),
        };
        if spec.noise > 0.0 {
            for f in &mut frames {
                for p in f.iter_mut() {
                    if rng.random::<f64>() < spec.noise {
                        *p = 1.0 - *p;
                    }
                }
            }
        }
        samples.push(FrameSequence::new(spec.height, spec.width, spec.frame_period, frames)?);
        labels.push(class);
    }
    Ok(Dataset {
        samples,
        labels,
        n_classes: spec.n_classes,
    })
}

fn moving_bar(spec: &SyntheticSpec, class: usize, rng: &mut seeds::Rng) -> Vec<Vec<f64>> {
    let (h, w) = (spec.height as f64, spec.width as f64);
    let theta = std::f64::consts::TAU * class as f64 / spec.n_classes as f64;
    let (dy, dx) = (theta.sin(), theta.cos());
    let cy = (h - 1.0) / 2.0 + rng.random_range(-1.0..=1.0);
    let cx = (w - 1.0) / 2.0 + rng.random_range(-1.0..=1.0);
    // Sweep the whole frame along the direction.
    let extent = (h * h + w * w).sqrt();
    let speed = extent / (spec.n_frames - 1) as f64 * rng.random_range(0.8..=1.2);
    let start = -extent / 2.0 + rng.random_range(-0.5..=0.5);
    (0..spec.n_frames)
        .map(|t| {
            let pos = start + speed * t as f64;
            (0..spec.height * spec.width)
                .map(|p| {
                    let r = (p / spec.width) as f64 - cy;
                    let c = (p % spec.width) as f64 - cx;
                    let along = r * dy + c * dx;
                    f64::from(u8::from((along - pos).abs() < 0.75))
                })
                .collect()
        })
        .collect()
}

fn class_templates(spec: &SyntheticSpec, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = seeds::rng_from(seed);
    let n_pix = spec.height * spec.width;
    (0..spec.n_classes)
        .map(|_| match spec.task {
            Task::JitterPattern => {
                // Each active pixel turns on for one frame.
                let mut pix: Vec<usize> = (0..n_pix).collect();
                pix.shuffle(&mut rng);
                let active = (n_pix / 4).max(1);
                let mut frames = vec![vec![0.0; n_pix]; spec.n_frames];
                for &p in &pix[..active] {
                    let t = rng.random_range(1..spec.n_frames);
                    frames[t][p] = 1.0;
                }
                frames
            }
            _ => vec![(0..n_pix).map(|_| rng.random::<f64>().powi(2) * 0.6).collect()],
        })
        .collect()
}

fn jitter_pattern(spec: &SyntheticSpec, template: &[Vec<f64>], rng: &mut seeds::Rng) -> Vec<Vec<f64>> {
    let n_pix = spec.height * spec.width;
    let mut frames = vec![vec![0.0; n_pix]; spec.n_frames];
    for (t, f) in template.iter().enumerate() {
        for (p, &v) in f.iter().enumerate() {
            if v > 0.0 {
                let shift: i64 = rng.random_range(-1..=1);
                let tt = (t as i64 + shift).clamp(1, spec.n_frames as i64 - 1) as usize;
                frames[tt][p] = 1.0;
            }
        }
    }
    frames
}

fn rate_pattern(spec: &SyntheticSpec, template: &[Vec<f64>], rng: &mut seeds::Rng) -> Vec<Vec<f64>> {
    let rates = &template[0];
    let mut frames = vec![vec![0.0; rates.len()]; spec.n_frames];
    for f in frames.iter_mut().skip(1) {
        for (p, &r) in rates.iter().enumerate() {
            if rng.random::<f64>() < r {
                f[p] = 1.0;
            }
        }
    }
    frames
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(frames: Vec<Vec<f64>>, h: usize, w: usize) -> FrameSequence {
        FrameSequence::new(h, w, 5.0, frames).unwrap()
    }

    #[test]
    fn constant_sequence_is_silent() {
        let s = seq(vec![vec![0.3; 6]; 5], 2, 3);
        assert!(encode_frames(&s, 0.1).unwrap().is_empty());
    }

    #[test]
    fn single_step_gives_single_spike() {
        let mut frames = vec![vec![0.0; 4]; 6];
        for f in frames.iter_mut().skip(3) {
            f[2] = 1.0;
        }
        let t = encode_frames(&seq(frames, 2, 2), 0.5).unwrap();
        assert_eq!(t.events(), &[SpikeEvent { neuron: 2, time: 15.0 }]);
    }

    #[test]
    fn moving_bar_spikes_equal_changed_pixels() {
        let (h, w) = (4, 6);
        let frames: Vec<Vec<f64>> = (0..w)
            .map(|x| (0..h * w).map(|p| f64::from(u8::from(p % w == x))).collect())
            .collect();
        let s = seq(frames.clone(), h, w);
        let train = encode_frames(&s, 0.5).unwrap();
        for t in 1..w {
            let changed = (0..h * w).filter(|&p| frames[t][p] != frames[t - 1][p]).count();
            let spikes = train.events().iter().filter(|e| e.time == t as f64 * 5.0).count();
            assert_eq!(spikes, changed);
        }
    }

    #[test]
    fn encoding_rejects_short_or_ragged_input() {
        assert!(encode_frames(&seq(vec![vec![0.0; 4]], 2, 2), 0.5).is_err());
        assert!(FrameSequence::new(2, 2, 5.0, vec![vec![0.0; 4], vec![0.0; 3]]).is_err());
    }

    #[test]
    fn crop_follows_mass() {
        let mut f = vec![0.0; 81];
        f[2 * 9 + 6] = 1.0;
        let c = filter_frames(&seq(vec![f], 9, 9), 3, 3).unwrap();
        assert_eq!(c.frames[0][4], 1.0);

        let mut corner = vec![0.0; 81];
        corner[0] = 1.0;
        let c = filter_frames(&seq(vec![corner], 9, 9), 3, 3).unwrap();
        assert_eq!(c.frames[0][0], 1.0);
    }

    #[test]
    fn uniform_and_empty_frames_crop_the_center() {
        // A uniform frame has its centre of gravity at the geometric centre,
        // so a marker placed there must land in the middle of the crop.
        let mut uniform = vec![1.0; 49];
        uniform[3 * 7 + 3] = 1.0;
        let c = filter_frames(&seq(vec![uniform], 7, 7), 3, 3).unwrap();
        assert_eq!(c.frames[0], vec![1.0; 9]);

        let mut marked = vec![0.0; 49];
        marked[3 * 7 + 3] = 1.0;
        let c = filter_frames(&seq(vec![marked], 7, 7), 3, 3).unwrap();
        assert_eq!(c.frames[0][4], 1.0);

        let empty = filter_frames(&seq(vec![vec![0.0; 49]], 7, 7), 3, 3).unwrap();
        assert_eq!(empty.frames[0], vec![0.0; 9]);
        assert_eq!(window_start(3.0, 3, 7), 2);
    }

    #[test]
    fn crop_is_translation_invariant() {
        let blob = |dr: usize, dc: usize| {
            let mut f = vec![0.0; 144];
            for (r, c, v) in [(0, 0, 1.0), (0, 1, 0.5), (1, 1, 2.0), (2, 0, 0.25)] {
                f[(r + 3 + dr) * 12 + c + 3 + dc] = v;
            }
            f
        };
        let a = filter_frames(&seq(vec![blob(0, 0)], 12, 12), 5, 5).unwrap();
        let b = filter_frames(&seq(vec![blob(2, 3)], 12, 12), 5, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_is_deterministic_and_balanced() {
        let spec = SyntheticSpec {
            noise: 0.0,
            ..SyntheticSpec::default()
        };
        let a = gen_synthetic(&spec, 9).unwrap();
        assert_eq!(a, gen_synthetic(&spec, 9).unwrap());
        let mut counts = [0; 4];
        for &l in &a.labels {
            counts[l] += 1;
        }
        assert_eq!(counts, [5; 4]);
        assert!(gen_synthetic(&SyntheticSpec { n_classes: 1, ..spec }, 0).is_err());
    }

    fn correlation(a: &FrameSequence, b: &FrameSequence) -> f64 {
        let x: Vec<f64> = a.frames.concat();
        let y: Vec<f64> = b.frames.concat();
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let cov: f64 = x.iter().zip(&y).map(|(p, q)| (p - mx) * (q - my)).sum();
        let vx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn classes_correlate_more_within_than_between() {
        for task in [Task::MovingBar, Task::JitterPattern, Task::RatePattern] {
            let spec = SyntheticSpec {
                task,
                noise: 0.0,
                n_per_class: 6,
                height: 10,
                width: 10,
                n_frames: 16,
                ..SyntheticSpec::default()
            };
            let d = gen_synthetic(&spec, 4).unwrap();
            let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
            for i in 0..d.len() {
                for j in i + 1..d.len() {
                    let r = correlation(&d.samples[i], &d.samples[j]);
                    if d.labels[i] == d.labels[j] {
                        within += r;
                        nw += 1;
                    } else {
                        between += r;
                        nb += 1;
                    }
                }
            }
            assert!(within / nw as f64 > between / nb as f64, "{task:?}");
        }
    }

    #[test]
    fn binary_and_csv_round_trips() {
        let d = gen_synthetic(&SyntheticSpec::default(), 1).unwrap();
        let s = &d.samples[0];
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"HRSF");
        assert_eq!(&FrameSequence::read_binary(buf.as_slice()).unwrap(), s);
        assert!(FrameSequence::read_binary(&b"NOPE"[..]).is_err());

        let dir = tempfile::tempdir().unwrap();
        s.save_csv_dir(dir.path()).unwrap();
        assert_eq!(&FrameSequence::load_csv_dir(dir.path(), s.frame_period).unwrap(), s);
    }

    #[test]
    fn stratified_split_covers_every_class() {
        let d = gen_synthetic(&SyntheticSpec::default(), 2).unwrap();
        let (train, test) = d.stratified_split();
        assert_eq!(train.len() + test.len(), d.len());
        for c in 0..4 {
            assert!(train.iter().any(|&i| d.labels[i] == c));
            assert!(test.iter().any(|&i| d.labels[i] == c));
        }
    }
}

use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeEvent {
    pub neuron: usize,
    /// Time in ms.
    pub time: f64,
}

/// Time-sorted spike events over `[0, duration]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeTrain {
    events: Vec<SpikeEvent>,
    duration: f64,
}

impl SpikeTrain {
    /// Builds a train, sorting events by time (stable, so simultaneous events
    /// keep their given order).
    pub fn new(mut events: Vec<SpikeEvent>, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::Validation(format!(
                "spike train duration must be > 0, got {duration}"
            )));
        }
        for e in &events {
            if !(e.time >= 0.0 && e.time <= duration) {
                return Err(Error::Validation(format!(
                    "spike at {} ms lies outside [0, {duration}]",
                    e.time
                )));
            }
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self { events, duration })
    }

    pub fn empty(duration: f64) -> Result<Self> {
        Self::new(Vec::new(), duration)
    }

    pub fn events(&self) -> &[SpikeEvent] {
        &self.events
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn max_neuron(&self) -> Option<usize> {
        self.events.iter().map(|e| e.neuron).max()
    }

    /// CSV form: a `# duration_ms=<d>` line, a `neuron_id,time_ms` header,
    /// then one event per line.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# duration_ms={:?}\nneuron_id,time_ms\n", self.duration);
        for e in &self.events {
            let _ = writeln!(s, "{},{:?}", e.neuron, e.time);
        }
        s
    }

    /// Parses [`SpikeTrain::to_csv`] output. Without a duration comment the
    /// duration defaults to the last event time (or `fallback_duration`).
    pub fn from_csv(text: &str, fallback_duration: Option<f64>) -> Result<Self> {
        let mut duration = fallback_duration;
        let mut events = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("duration_ms=") {
                    duration = Some(
                        v.trim()
                            .parse()
                            .map_err(|_| Error::Validation(format!("bad duration on line {}", i + 1)))?,
                    );
                }
                continue;
            }
            if line.starts_with("neuron_id") {
                continue;
            }
            let (n, t) = line
                .split_once(',')
                .ok_or_else(|| Error::Validation(format!("expected `neuron_id,time_ms` on line {}", i + 1)))?;
            let neuron = n
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("bad neuron id on line {}", i + 1)))?;
            let time = t
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("bad time on line {}", i + 1)))?;
            events.push(SpikeEvent { neuron, time });
        }
        let last = events.iter().map(|e| e.time).fold(0.0, f64::max);
        let duration = duration.unwrap_or(last).max(last);
        Self::new(events, if duration > 0.0 { duration } else { 1.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_validates() {
        let t = SpikeTrain::new(
            vec![SpikeEvent { neuron: 1, time: 5.0 }, SpikeEvent { neuron: 0, time: 2.0 }],
            10.0,
        )
        .unwrap();
        assert_eq!(t.events()[0].time, 2.0);
        assert!(SpikeTrain::new(vec![SpikeEvent { neuron: 0, time: 11.0 }], 10.0).is_err());
        assert!(SpikeTrain::empty(0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = SpikeTrain::new(
            vec![
                SpikeEvent { neuron: 3, time: 0.5 },
                SpikeEvent { neuron: 12, time: 7.25 },
            ],
            9.0,
        )
        .unwrap();
        assert_eq!(SpikeTrain::from_csv(&t.to_csv(), None).unwrap(), t);
        assert!(SpikeTrain::from_csv("neuron_id,time_ms\nx,1\n", None).is_err());
    }
}

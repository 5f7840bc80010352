//! Experiment orchestration: configuration, the end-to-end pipeline and the
//! commands behind the `hrsnn` binary.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod svg;

use std::fmt;
use std::str::FromStr;

pub use config::ExperimentConfig;
pub use pipeline::{apply_candidate, run_pipeline, PipelineData, RunMetrics};

use crate::Error;

/// Which parts of the reservoir are heterogeneous: neurons (`N`) and/or
/// STDP (`S`), each homogeneous (`Ho`) or heterogeneous (`He`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    HoNHoS,
    HeNHoS,
    HoNHeS,
    #[default]
    HeNHeS,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::HoNHoS, Variant::HeNHoS, Variant::HoNHeS, Variant::HeNHeS];

    pub fn heterogeneous_neurons(self) -> bool {
        matches!(self, Variant::HeNHoS | Variant::HeNHeS)
    }

    pub fn heterogeneous_stdp(self) -> bool {
        matches!(self, Variant::HoNHeS | Variant::HeNHeS)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::HoNHoS => "HoNHoS",
            Variant::HeNHoS => "HeNHoS",
            Variant::HoNHeS => "HoNHeS",
            Variant::HeNHeS => "HeNHeS",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| {
            Error::Validation(format!(
                "unknown variant `{s}` (expected HoNHoS, HeNHoS, HoNHeS or HeNHeS)"
            ))
        })
    }
}

//! Target platform description: core counts, I/O capacities and optional
//! background load.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::profile::{Mode, ProcessorClass};
use crate::scalar::Scalar;

/// A schedulable execution resource.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoreId {
    BigCluster,
    Gpu,
    /// 1-based little core (queue `Q_j`).
    Little(usize),
}

impl CoreId {
    pub fn class(self) -> ProcessorClass {
        match self {
            CoreId::BigCluster => ProcessorClass::BigCluster,
            CoreId::Gpu => ProcessorClass::Gpu,
            CoreId::Little(_) => ProcessorClass::LittleCore,
        }
    }

    /// Executor of queue `Q_0` for a mode.
    pub fn primary(mode: Mode) -> Self {
        match mode {
            Mode::Cpu => CoreId::BigCluster,
            Mode::Gpu => CoreId::Gpu,
        }
    }
}

impl fmt::Display for CoreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreId::BigCluster => f.write_str("big"),
            CoreId::Gpu => f.write_str("gpu"),
            CoreId::Little(j) => write!(f, "little{j}"),
        }
    }
}

impl FromStr for CoreId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "big" => Ok(CoreId::BigCluster),
            "gpu" => Ok(CoreId::Gpu),
            _ => s
                .strip_prefix("little")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&j| j >= 1)
                .map(CoreId::Little)
                .ok_or_else(|| Error::validation(format!("unknown core id '{s}'"))),
        }
    }
}

impl Serialize for CoreId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CoreId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct LoadInterval<T> {
    pub start_ms: T,
    pub end_ms: T,
    /// Fraction of the core taken by other work, in `[0, 1]`.
    pub utilization: T,
}

/// Background load per core. JSON form: `{"little1": [{"start_ms": 0,
/// "end_ms": 500, "utilization": 0.5}], ...}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", transparent)]
pub struct LoadTrace<T> {
    pub cores: BTreeMap<CoreId, Vec<LoadInterval<T>>>,
}

impl<T: Scalar> LoadTrace<T> {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("load trace: {e}")))
    }

    pub fn constant(core: CoreId, utilization: T, until_ms: T) -> Self {
        let mut cores = BTreeMap::new();
        cores.insert(
            core,
            vec![LoadInterval {
                start_ms: T::zero(),
                end_ms: until_ms,
                utilization,
            }],
        );
        LoadTrace { cores }
    }

    pub fn is_idle(&self) -> bool {
        self.cores
            .values()
            .flatten()
            .all(|iv| iv.utilization <= T::zero())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlatformConfig<T> {
    pub little_cores: usize,
    pub big_cores: usize,
    /// Parallel-read effectiveness of storage; concurrent reads share it.
    pub disk_capacity: T,
    pub mem_capacity: T,
    pub background_load: Option<LoadTrace<T>>,
}

impl<T: Scalar> Default for PlatformConfig<T> {
    fn default() -> Self {
        PlatformConfig {
            little_cores: 4,
            big_cores: 4,
            disk_capacity: T::lit(1.5),
            mem_capacity: T::lit(3.0),
            background_load: None,
        }
    }
}

impl<T: Scalar> PlatformConfig<T> {
    pub fn new(little_cores: usize, big_cores: usize) -> Self {
        PlatformConfig {
            little_cores,
            big_cores,
            ..Default::default()
        }
    }

    /// Contention-free platform.
    pub fn unbounded(little_cores: usize) -> Self {
        PlatformConfig {
            little_cores,
            big_cores: 1,
            disk_capacity: T::infinity(),
            mem_capacity: T::infinity(),
            background_load: None,
        }
    }

    pub fn with_capacities(mut self, disk: T, mem: T) -> Self {
        self.disk_capacity = disk;
        self.mem_capacity = mem;
        self
    }

    pub fn with_load(mut self, trace: LoadTrace<T>) -> Self {
        self.background_load = Some(trace);
        self
    }

    pub fn without_load(&self) -> Self {
        PlatformConfig {
            background_load: None,
            ..self.clone()
        }
    }

    pub fn with_little_cores(&self, little_cores: usize) -> Self {
        PlatformConfig {
            little_cores,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.big_cores < 1 {
            return Err(Error::validation("at least one big core is required"));
        }
        for (name, cap) in [("disk", self.disk_capacity), ("memory", self.mem_capacity)] {
            if cap.is_nan() || cap <= T::zero() {
                return Err(Error::validation(format!(
                    "{name} capacity must be positive"
                )));
            }
        }
        if let Some(trace) = &self.background_load {
            for (core, intervals) in &trace.cores {
                if let CoreId::Little(j) = core {
                    if *j > self.little_cores {
                        return Err(Error::validation(format!(
                            "load trace names {core}, which does not exist"
                        )));
                    }
                }
                let mut sorted = intervals.clone();
                sorted.sort_by(|a, b| {
                    a.start_ms
                        .partial_cmp(&b.start_ms)
                        .expect("finite load bounds")
                });
                for iv in &sorted {
                    let finite = iv.start_ms.is_finite() && iv.end_ms.is_finite();
                    if !finite || iv.start_ms < T::zero() || iv.end_ms < iv.start_ms {
                        return Err(Error::validation(format!("bad load interval on {core}")));
                    }
                    if !(T::zero()..=T::one()).contains(&iv.utilization) {
                        return Err(Error::validation(format!(
                            "utilization on {core} outside [0, 1]"
                        )));
                    }
                }
                if sorted.windows(2).any(|w| w[1].start_ms < w[0].end_ms) {
                    return Err(Error::validation(format!(
                        "overlapping load intervals on {core}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Background utilization of `core` at `t` (intervals are half-open).
    pub fn utilization(&self, core: CoreId, t: T) -> T {
        self.background_load
            .as_ref()
            .and_then(|tr| tr.cores.get(&core))
            .and_then(|ivs| ivs.iter().find(|iv| iv.start_ms <= t && t < iv.end_ms))
            .map_or(T::zero(), |iv| iv.utilization)
    }

    /// Rate factor left to the inference on `core` at `t`.
    pub fn availability(&self, core: CoreId, t: T) -> T {
        T::one() - self.utilization(core, t)
    }

    /// Earliest load-interval boundary strictly after `t`.
    pub fn next_load_boundary(&self, t: T) -> Option<T> {
        self.background_load
            .as_ref()?
            .cores
            .values()
            .flatten()
            .flat_map(|iv| [iv.start_ms, iv.end_ms])
            .filter(|&b| b > t + T::tolerance())
            .fold(None, |acc: Option<T>, b| Some(acc.map_or(b, |a| a.min(b))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_id_text_round_trip() {
        for c in [CoreId::BigCluster, CoreId::Gpu, CoreId::Little(3)] {
            assert_eq!(c.to_string().parse::<CoreId>().unwrap(), c);
        }
        assert!("little0".parse::<CoreId>().is_err());
        assert!("medium".parse::<CoreId>().is_err());
    }

    #[test]
    fn load_trace_parses_and_queries() {
        let tr: LoadTrace<f64> = LoadTrace::from_json(
            r#"{"little2": [{"start_ms": 5, "end_ms": 10, "utilization": 0.5}]}"#,
        )
        .unwrap();
        let p = PlatformConfig::new(2, 4).with_load(tr);
        p.validate().unwrap();
        assert_eq!(p.availability(CoreId::Little(2), 4.0), 1.0);
        assert_eq!(p.availability(CoreId::Little(2), 5.0), 0.5);
        assert_eq!(p.availability(CoreId::Little(2), 10.0), 1.0);
        assert_eq!(p.next_load_boundary(0.0), Some(5.0));
        assert_eq!(p.next_load_boundary(5.0), Some(10.0));
        assert_eq!(p.next_load_boundary(10.0), None);
    }

    #[test]
    fn rejects_overlap_and_bad_utilization() {
        let bad = r#"{"little1": [{"start_ms": 0, "end_ms": 10, "utilization": 0.5},
                                  {"start_ms": 5, "end_ms": 12, "utilization": 0.5}]}"#;
        let p = PlatformConfig::<f64>::new(1, 1).with_load(LoadTrace::from_json(bad).unwrap());
        assert!(p.validate().is_err());
        let p = PlatformConfig::<f64>::new(1, 1).with_load(LoadTrace::constant(
            CoreId::Little(1),
            1.5,
            10.0,
        ));
        assert!(p.validate().is_err());
        let p = PlatformConfig::<f64>::new(1, 1).with_load(LoadTrace::constant(
            CoreId::Little(3),
            0.5,
            10.0,
        ));
        assert!(p.validate().is_err());
        assert!(PlatformConfig::<f64>::new(1, 1)
            .with_capacities(0.0, 1.0)
            .validate()
            .is_err());
    }
}

//! Scheduling plan: kernel combination plus per-core operation queues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{OpId, OperationGraph};
use crate::platform::CoreId;
use crate::profile::{Choice, Mode, ModelProfile};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComboEntry {
    pub layer: usize,
    #[serde(rename = "kernel")]
    pub kernel_id: String,
    pub cached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanQueues {
    pub big: Vec<OpId>,
    pub little: Vec<Vec<OpId>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan<T> {
    pub mode: Mode,
    pub combo: Vec<Choice>,
    pub kernel_ids: Vec<String>,
    /// `Q_0`: runs on the big cluster (CPU mode) or the GPU.
    pub big_queue: Vec<OpId>,
    /// `Q_1..Q_{M_l}`.
    pub little_queues: Vec<Vec<OpId>>,
    pub predicted_makespan_ms: T,
    pub storage_overhead_bytes: u64,
    /// Set when a balancing loop stopped on its iteration guard.
    pub balance_guard_hit: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct PlanDoc<T> {
    combo: Vec<ComboEntry>,
    queues: PlanQueues,
    predicted_makespan_ms: T,
    storage_overhead_bytes: u64,
}

impl<T: Scalar> Plan<T> {
    /// Plan with empty queues for the given combination.
    pub fn empty(
        profile: &ModelProfile<T>,
        combo: Vec<Choice>,
        little_cores: usize,
    ) -> Result<Self> {
        let kernel_ids = combo
            .iter()
            .enumerate()
            .map(|(i, c)| profile.variant(i + 1, *c).map(|v| v.kernel_id))
            .collect::<Result<Vec<_>>>()?;
        let storage_overhead_bytes = profile.storage_overhead_bytes(&combo)?;
        Ok(Plan {
            mode: profile.mode,
            combo,
            kernel_ids,
            big_queue: Vec::new(),
            little_queues: vec![Vec::new(); little_cores],
            predicted_makespan_ms: T::zero(),
            storage_overhead_bytes,
            balance_guard_hit: false,
        })
    }

    pub fn combo_entries(&self) -> Vec<ComboEntry> {
        self.combo
            .iter()
            .zip(&self.kernel_ids)
            .enumerate()
            .map(|(i, (c, id))| ComboEntry {
                layer: i + 1,
                kernel_id: id.clone(),
                cached: c.cached,
            })
            .collect()
    }

    /// Queues paired with the core that runs them.
    pub fn queues(&self) -> impl Iterator<Item = (CoreId, &[OpId])> {
        std::iter::once((CoreId::primary(self.mode), self.big_queue.as_slice())).chain(
            self.little_queues
                .iter()
                .enumerate()
                .map(|(j, q)| (CoreId::Little(j + 1), q.as_slice())),
        )
    }

    pub fn queue_of(&self, core: CoreId) -> Option<&[OpId]> {
        match core {
            CoreId::Little(j) => self.little_queues.get(j.wrapping_sub(1)).map(Vec::as_slice),
            c if c == CoreId::primary(self.mode) => Some(&self.big_queue),
            _ => None,
        }
    }

    /// Checks that the queues partition the graph's operations.
    pub fn check_partition(&self, graph: &OperationGraph<T>) -> Result<()> {
        let mut seen = vec![false; graph.len()];
        for (core, q) in self.queues() {
            for &op in q {
                let slot = seen.get_mut(op).ok_or_else(|| {
                    Error::validation(format!("plan references unknown op {op} on {core}"))
                })?;
                if std::mem::replace(slot, true) {
                    return Err(Error::validation(format!(
                        "op {op} appears in more than one queue slot"
                    )));
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(op) => Err(Error::validation(format!(
                "op {op} is not assigned to any queue"
            ))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        let doc = PlanDoc {
            combo: self.combo_entries(),
            queues: PlanQueues {
                big: self.big_queue.clone(),
                little: self.little_queues.clone(),
            },
            predicted_makespan_ms: self.predicted_makespan_ms,
            storage_overhead_bytes: self.storage_overhead_bytes,
        };
        serde_json::to_string_pretty(&doc).expect("plans always serialize")
    }

    /// Parses a plan document, resolving kernel ids against `profile`.
    pub fn from_json(s: &str, profile: &ModelProfile<T>) -> Result<Self> {
        let doc: PlanDoc<T> =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("plan: {e}")))?;
        if doc.combo.len() != profile.n_layers() {
            return Err(Error::validation(
                "plan combination does not cover every layer",
            ));
        }
        let mut combo = Vec::with_capacity(doc.combo.len());
        for (i, e) in doc.combo.iter().enumerate() {
            if e.layer != i + 1 {
                return Err(Error::validation(format!(
                    "plan combo entry {i} names layer {}",
                    e.layer
                )));
            }
            let kernel = profile
                .layer(e.layer)
                .kernel_index(&e.kernel_id)
                .ok_or_else(|| {
                    Error::validation(format!("layer {} has no kernel '{}'", e.layer, e.kernel_id))
                })?;
            combo.push(Choice {
                kernel,
                cached: e.cached,
            });
        }
        let mut plan = Plan::empty(profile, combo, doc.queues.little.len())?;
        plan.big_queue = doc.queues.big;
        plan.little_queues = doc.queues.little;
        plan.predicted_makespan_ms = doc.predicted_makespan_ms;
        Ok(plan)
    }
}

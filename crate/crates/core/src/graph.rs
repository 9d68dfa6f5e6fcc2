//! Expansion of a profile plus a kernel combination into the operation DAG.
//!
//! Every layer contributes a Read, an optional Transform (absent when the
//! weights are cached), a PipelineCreate in GPU mode, and an Execute. Setup
//! work (memory allocation, GPU driver init) becomes standalone nodes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::profile::{Choice, Mode, ModelProfile, ProcessorClass};
use crate::scalar::Scalar;

pub type OpId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupStage {
    MemoryAlloc,
    GpuDriverInit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Setup(SetupStage),
    Read,
    Transform,
    PipelineCreate,
    Execute,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Setup(_) => "setup",
            OpKind::Read => "read",
            OpKind::Transform => "transform",
            OpKind::PipelineCreate => "pipeline_create",
            OpKind::Execute => "execute",
        }
    }

    pub fn is_prep(self) -> bool {
        matches!(
            self,
            OpKind::Read | OpKind::Transform | OpKind::PipelineCreate
        )
    }

    pub fn resource_class(self) -> ResourceClass {
        match self {
            OpKind::Read => ResourceClass::DiskIo,
            OpKind::Transform => ResourceClass::MemBandwidth,
            OpKind::PipelineCreate | OpKind::Execute | OpKind::Setup(_) => ResourceClass::Compute,
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceClass {
    DiskIo,
    MemBandwidth,
    Compute,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OpDurations<T> {
    pub little: Option<T>,
    pub big: Option<T>,
    pub gpu: Option<T>,
}

impl<T: Scalar> OpDurations<T> {
    fn cpu(little: T, big: T) -> Self {
        OpDurations {
            little: Some(little),
            big: Some(big),
            gpu: None,
        }
    }

    pub fn on(&self, class: ProcessorClass) -> Option<T> {
        match class {
            ProcessorClass::LittleCore => self.little,
            ProcessorClass::BigCluster => self.big,
            ProcessorClass::Gpu => self.gpu,
        }
    }

    fn map(self, f: impl Fn(T) -> T) -> Self {
        OpDurations {
            little: self.little.map(&f),
            big: self.big.map(&f),
            gpu: self.gpu.map(&f),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperationNode<T> {
    pub op_id: OpId,
    /// 1-based layer, 0 for setup nodes.
    pub layer: usize,
    pub kind: OpKind,
    pub resource: ResourceClass,
    pub duration: OpDurations<T>,
    /// PipelineCreate cost when the compiled shader is cached.
    pub hit_duration: Option<T>,
    /// Sorted precursor set.
    pub precursors: Vec<OpId>,
}

impl<T: Scalar> OperationNode<T> {
    pub fn duration_on(&self, class: ProcessorClass, shader_cache: bool) -> Option<T> {
        if shader_cache {
            if let Some(hit) = self.hit_duration {
                return self.duration.on(class).map(|_| hit);
            }
        }
        self.duration.on(class)
    }
}

/// Operation ids of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerOps {
    pub read: OpId,
    pub transform: Option<OpId>,
    pub pipeline: Option<OpId>,
    pub execute: OpId,
}

impl LayerOps {
    /// The prep bundle in run order: read, transform, pipeline creation.
    pub fn bundle(&self) -> Vec<OpId> {
        std::iter::once(self.read)
            .chain(self.transform)
            .chain(self.pipeline)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperationGraph<T> {
    pub nodes: Vec<OperationNode<T>>,
    pub n_layers: usize,
    pub mode: Mode,
    layers: Vec<LayerOps>,
    successor_layers: Vec<Vec<usize>>,
}

/// Expands `profile` under `combo` into the operation DAG.
pub fn build_operation_graph<T: Scalar>(
    profile: &ModelProfile<T>,
    combo: &[Choice],
) -> Result<OperationGraph<T>> {
    let variants = profile.resolve(combo)?;
    let mode = profile.mode;
    let mut nodes: Vec<OperationNode<T>> = Vec::new();
    let mut push = |layer, kind: OpKind, duration, hit_duration, precursors: Vec<OpId>| {
        let op_id = nodes.len();
        nodes.push(OperationNode {
            op_id,
            layer,
            kind,
            resource: kind.resource_class(),
            duration,
            hit_duration,
            precursors,
        });
        op_id
    };

    let alloc = profile.setup.memory_alloc_ms;
    let alloc_op = (alloc > T::tolerance()).then(|| {
        push(
            0,
            OpKind::Setup(SetupStage::MemoryAlloc),
            OpDurations::cpu(alloc, alloc),
            None,
            vec![],
        )
    });
    let driver_op = profile
        .setup
        .gpu_driver_init_ms
        .filter(|_| mode == Mode::Gpu)
        .map(|d| {
            push(
                0,
                OpKind::Setup(SetupStage::GpuDriverInit),
                OpDurations::cpu(d, d),
                None,
                vec![],
            )
        });

    let mut layers: Vec<LayerOps> = Vec::with_capacity(variants.len());
    for (spec, v) in profile.layers.iter().zip(&variants) {
        let read_d = OpDurations::cpu(
            v.read_ms(ProcessorClass::LittleCore).unwrap_or_default(),
            v.read_ms(ProcessorClass::BigCluster).unwrap_or_default(),
        );
        let read = push(
            spec.index,
            OpKind::Read,
            read_d,
            None,
            alloc_op.into_iter().collect(),
        );
        let transform = (!v.cached).then(|| {
            let d = OpDurations::cpu(v.transform_ms.little, v.transform_ms.big);
            push(spec.index, OpKind::Transform, d, None, vec![read])
        });
        let pipeline = match (mode, v.pipeline_create_ms) {
            (Mode::Gpu, Some(pc)) => {
                let d = OpDurations::cpu(pc.miss, pc.miss);
                Some(push(
                    spec.index,
                    OpKind::PipelineCreate,
                    d,
                    Some(pc.hit),
                    driver_op.into_iter().collect(),
                ))
            }
            _ => None,
        };
        let mut pre: Vec<OpId> = vec![transform.unwrap_or(read)];
        pre.extend(pipeline);
        pre.extend(spec.predecessors.iter().map(|&p| layers[p - 1].execute));
        pre.sort_unstable();
        let exec_d = match mode {
            Mode::Cpu => OpDurations {
                big: v.execute_ms.big,
                ..Default::default()
            },
            Mode::Gpu => OpDurations {
                gpu: v.execute_ms.gpu,
                ..Default::default()
            },
        };
        let execute = push(spec.index, OpKind::Execute, exec_d, None, pre);
        layers.push(LayerOps {
            read,
            transform,
            pipeline,
            execute,
        });
    }

    Ok(OperationGraph {
        nodes,
        n_layers: profile.n_layers(),
        mode,
        layers,
        successor_layers: profile.successors(),
    })
}

impl<T: Scalar> OperationGraph<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: OpId) -> &OperationNode<T> {
        &self.nodes[id]
    }

    /// Ops of the 1-based `layer`.
    pub fn layer_ops(&self, layer: usize) -> &LayerOps {
        &self.layers[layer - 1]
    }

    pub fn setup_ops(&self) -> impl Iterator<Item = &OperationNode<T>> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, OpKind::Setup(_)))
    }

    pub fn setup_op(&self, stage: SetupStage) -> Option<OpId> {
        self.setup_ops()
            .find(|n| n.kind == OpKind::Setup(stage))
            .map(|n| n.op_id)
    }

    pub fn executes(&self) -> impl Iterator<Item = OpId> + '_ {
        self.layers.iter().map(|l| l.execute)
    }

    /// Execute ops of layers without successors.
    pub fn sinks(&self) -> Vec<OpId> {
        self.layers
            .iter()
            .zip(&self.successor_layers)
            .filter(|(_, s)| s.is_empty())
            .map(|(l, _)| l.execute)
            .collect()
    }

    /// Class that runs Execute ops.
    pub fn execute_class(&self) -> ProcessorClass {
        self.mode.execute_class()
    }

    pub fn exec_ms(&self, layer: usize) -> T {
        self.node(self.layer_ops(layer).execute)
            .duration_on(self.execute_class(), false)
            .unwrap_or_default()
    }

    pub fn total_exec_ms(&self) -> T {
        (1..=self.n_layers).map(|l| self.exec_ms(l)).sum()
    }

    /// Summed bundle duration of a layer on a CPU class.
    pub fn prep_ms(&self, layer: usize, class: ProcessorClass, shader_cache: bool) -> T {
        self.layer_ops(layer)
            .bundle()
            .into_iter()
            .map(|id| {
                self.node(id)
                    .duration_on(class, shader_cache)
                    .unwrap_or_default()
            })
            .sum()
    }

    /// Duration of `op` on `class`; missing durations count as zero.
    pub fn op_ms(&self, op: OpId, class: ProcessorClass, shader_cache: bool) -> T {
        self.node(op)
            .duration_on(class, shader_cache)
            .unwrap_or_default()
    }

    /// Longest setup stage; every Execute transitively waits for each setup node.
    pub fn critical_setup_ms(&self) -> T {
        self.setup_ops()
            .map(|n| n.duration.big.unwrap_or_default())
            .fold(T::zero(), T::max)
    }

    /// Kahn's algorithm; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<OpId>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for node in &self.nodes {
            for &p in &node.precursors {
                indeg[node.op_id] += 1;
                succ[p].push(node.op_id);
            }
        }
        let mut ready: std::collections::BTreeSet<OpId> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(id) = ready.pop_first() {
            order.push(id);
            for &s in &succ[id] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Copy of the graph where the given ops take no time on any class.
    pub fn with_zeroed(&self, ops: &[OpId]) -> Self {
        let mut g = self.clone();
        for &id in ops {
            let node = &mut g.nodes[id];
            node.duration = node.duration.map(|_| T::zero());
            node.hit_duration = node.hit_duration.map(|_| T::zero());
        }
        g
    }
}

//! Cost-profile data model.
//!
//! A [`ModelProfile`] describes a network as a topologically ordered list of
//! layers. Every layer carries the kernels that can implement it together with
//! their measured read, transform and execute costs.

mod doc;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use doc::{load_profile, load_profile_str, to_json};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessorClass {
    LittleCore,
    /// All big cores acting as one resource.
    BigCluster,
    Gpu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cpu,
    Gpu,
}

impl Mode {
    /// The class that runs every Execute operation.
    pub fn execute_class(self) -> ProcessorClass {
        match self {
            Mode::Cpu => ProcessorClass::BigCluster,
            Mode::Gpu => ProcessorClass::Gpu,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cpu => "cpu",
            Mode::Gpu => "gpu",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A duration measured on each CPU core class, plus an optional GPU value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassDurations<T> {
    pub little: T,
    pub big: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpu: Option<T>,
}

impl<T: Scalar> ClassDurations<T> {
    pub fn uniform(v: T) -> Self {
        ClassDurations {
            little: v,
            big: v,
            gpu: None,
        }
    }

    pub fn new(little: T, big: T) -> Self {
        ClassDurations {
            little,
            big,
            gpu: None,
        }
    }

    pub fn on(&self, class: ProcessorClass) -> Option<T> {
        match class {
            ProcessorClass::LittleCore => Some(self.little),
            ProcessorClass::BigCluster => Some(self.big),
            ProcessorClass::Gpu => self.gpu,
        }
    }

    fn values(&self) -> impl Iterator<Item = T> + '_ {
        [Some(self.little), Some(self.big), self.gpu]
            .into_iter()
            .flatten()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExecuteCost<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpu: Option<T>,
}

/// Per-layer GPU pipeline creation cost, with and without a shader cache hit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PipelineCost<T> {
    pub hit: T,
    pub miss: T,
}

/// One kernel implementing a layer, with the cache decision applied.
///
/// Profiles declare kernels with `cached = false`; the cached twin is
/// obtained with [`KernelVariant::with_cache`].
#[derive(Clone, Debug, PartialEq)]
pub struct KernelVariant<T> {
    pub kernel_id: String,
    pub cached: bool,
    pub read_raw_ms: ClassDurations<T>,
    pub read_cached_ms: ClassDurations<T>,
    pub transform_ms: ClassDurations<T>,
    pub execute_ms: ExecuteCost<T>,
    pub pipeline_create_ms: Option<PipelineCost<T>>,
    pub raw_bytes: u64,
    pub cached_bytes: u64,
}

impl<T: Scalar> KernelVariant<T> {
    /// CPU kernel whose preparation costs are identical on little and big cores.
    pub fn symmetric(
        id: impl Into<String>,
        read_raw: T,
        transform: T,
        read_cached: T,
        execute: T,
    ) -> Self {
        KernelVariant {
            kernel_id: id.into(),
            cached: false,
            read_raw_ms: ClassDurations::uniform(read_raw),
            read_cached_ms: ClassDurations::uniform(read_cached),
            transform_ms: ClassDurations::uniform(transform),
            execute_ms: ExecuteCost {
                big: Some(execute),
                gpu: None,
            },
            pipeline_create_ms: None,
            raw_bytes: 0,
            cached_bytes: 0,
        }
    }

    /// Overrides the big-cluster preparation costs.
    pub fn with_big_prep(mut self, read_raw: T, transform: T, read_cached: T) -> Self {
        self.read_raw_ms.big = read_raw;
        self.transform_ms.big = transform;
        self.read_cached_ms.big = read_cached;
        self
    }

    /// Turns the kernel into a GPU kernel.
    pub fn with_gpu(mut self, execute: T, pipeline: PipelineCost<T>) -> Self {
        self.execute_ms = ExecuteCost {
            big: None,
            gpu: Some(execute),
        };
        self.pipeline_create_ms = Some(pipeline);
        self
    }

    pub fn with_bytes(mut self, raw: u64, cached: u64) -> Self {
        self.raw_bytes = raw;
        self.cached_bytes = cached;
        self
    }

    pub fn with_cache(&self, cached: bool) -> Self {
        KernelVariant {
            cached,
            ..self.clone()
        }
    }

    /// True when some class spends time transforming the weights.
    pub fn has_transform(&self) -> bool {
        self.transform_ms.values().any(|v| v > T::tolerance())
    }

    pub fn read_ms(&self, class: ProcessorClass) -> Option<T> {
        if self.cached {
            self.read_cached_ms.on(class)
        } else {
            self.read_raw_ms.on(class)
        }
    }

    /// Transform time with cache semantics applied (zero when cached).
    pub fn effective_transform_ms(&self, class: ProcessorClass) -> Option<T> {
        if self.cached {
            Some(T::zero())
        } else {
            self.transform_ms.on(class)
        }
    }

    /// Read plus transform, or the cached read alone.
    pub fn prep_ms(&self, class: ProcessorClass) -> Option<T> {
        Some(self.read_ms(class)? + self.effective_transform_ms(class)?)
    }

    pub fn exec_ms(&self, mode: Mode) -> Option<T> {
        match mode {
            Mode::Cpu => self.execute_ms.big,
            Mode::Gpu => self.execute_ms.gpu,
        }
    }

    pub fn pipeline_ms(&self, shader_cache: bool) -> T {
        match self.pipeline_create_ms {
            Some(p) if shader_cache => p.hit,
            Some(p) => p.miss,
            None => T::zero(),
        }
    }

    pub fn storage_overhead_bytes(&self) -> u64 {
        if self.cached {
            self.cached_bytes
        } else {
            0
        }
    }

    fn durations(&self) -> impl Iterator<Item = T> + '_ {
        self.read_raw_ms
            .values()
            .chain(self.read_cached_ms.values())
            .chain(self.transform_ms.values())
            .chain(
                [self.execute_ms.big, self.execute_ms.gpu]
                    .into_iter()
                    .flatten(),
            )
            .chain(self.pipeline_create_ms.iter().flat_map(|p| [p.hit, p.miss]))
    }
}

/// Selected kernel (by declaration index) and cache decision for one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Choice {
    pub kernel: usize,
    pub cached: bool,
}

impl Choice {
    pub fn raw(kernel: usize) -> Self {
        Choice {
            kernel,
            cached: false,
        }
    }

    pub fn cached(kernel: usize) -> Self {
        Choice {
            kernel,
            cached: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec<T> {
    /// 1-based position in the topological order.
    pub index: usize,
    pub operator_name: String,
    /// Sorted, deduplicated 1-based indices of predecessor layers.
    pub predecessors: Vec<usize>,
    pub candidates: Vec<KernelVariant<T>>,
}

impl<T: Scalar> LayerSpec<T> {
    pub fn new(
        index: usize,
        operator_name: impl Into<String>,
        predecessors: impl IntoIterator<Item = usize>,
        candidates: Vec<KernelVariant<T>>,
    ) -> Self {
        let predecessors: BTreeSet<usize> = predecessors.into_iter().collect();
        LayerSpec {
            index,
            operator_name: operator_name.into(),
            predecessors: predecessors.into_iter().collect(),
            candidates,
        }
    }

    pub fn kernel_index(&self, kernel_id: &str) -> Option<usize> {
        self.candidates
            .iter()
            .position(|k| k.kernel_id == kernel_id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetupCosts<T> {
    pub memory_alloc_ms: T,
    /// Present only in GPU mode.
    pub gpu_driver_init_ms: Option<T>,
}

impl<T: Scalar> SetupCosts<T> {
    pub fn cpu(memory_alloc_ms: T) -> Self {
        SetupCosts {
            memory_alloc_ms,
            gpu_driver_init_ms: None,
        }
    }

    pub fn gpu(memory_alloc_ms: T, gpu_driver_init_ms: T) -> Self {
        SetupCosts {
            memory_alloc_ms,
            gpu_driver_init_ms: Some(gpu_driver_init_ms),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelProfile<T> {
    pub model_name: String,
    pub mode: Mode,
    pub setup: SetupCosts<T>,
    pub layers: Vec<LayerSpec<T>>,
}

impl<T: Scalar> ModelProfile<T> {
    /// Builds and validates a profile.
    pub fn new(
        model_name: impl Into<String>,
        mode: Mode,
        setup: SetupCosts<T>,
        layers: Vec<LayerSpec<T>>,
    ) -> Result<Self> {
        let profile = ModelProfile {
            model_name: model_name.into(),
            mode,
            setup,
            layers,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Layer by 1-based index.
    pub fn layer(&self, index: usize) -> &LayerSpec<T> {
        &self.layers[index - 1]
    }

    /// Resolves a choice for the 1-based `layer` into a concrete variant.
    pub fn variant(&self, layer: usize, choice: Choice) -> Result<KernelVariant<T>> {
        let spec = self
            .layers
            .get(layer.wrapping_sub(1))
            .ok_or_else(|| Error::validation(format!("layer {layer} does not exist")))?;
        let kernel = spec.candidates.get(choice.kernel).ok_or_else(|| {
            Error::validation(format!("layer {layer} has no kernel #{}", choice.kernel))
        })?;
        Ok(kernel.with_cache(choice.cached))
    }

    /// Resolves a whole combination, checking that it covers every layer.
    pub fn resolve(&self, combo: &[Choice]) -> Result<Vec<KernelVariant<T>>> {
        if combo.len() != self.n_layers() {
            return Err(Error::validation(format!(
                "combination covers {} layers, profile has {}",
                combo.len(),
                self.n_layers()
            )));
        }
        combo
            .iter()
            .enumerate()
            .map(|(i, &c)| self.variant(i + 1, c))
            .collect()
    }

    /// First-declared kernel per layer, uncached: the engine's stock choice.
    pub fn default_combo(&self) -> Vec<Choice> {
        vec![Choice::raw(0); self.n_layers()]
    }

    /// 1-based successor lists, indexed by `layer - 1`.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.n_layers()];
        for layer in &self.layers {
            for &p in &layer.predecessors {
                succ[p - 1].push(layer.index);
            }
        }
        succ
    }

    pub fn storage_overhead_bytes(&self, combo: &[Choice]) -> Result<u64> {
        Ok(self
            .resolve(combo)?
            .iter()
            .map(KernelVariant::storage_overhead_bytes)
            .sum())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.layers.is_empty() {
            return bad("profile has no layers".into());
        }
        let setup = [
            Some(self.setup.memory_alloc_ms),
            self.setup.gpu_driver_init_ms,
        ];
        for v in setup.into_iter().flatten() {
            if !is_duration(v) {
                return bad(format!("setup duration {v} is negative or not finite"));
            }
        }
        match (self.mode, self.setup.gpu_driver_init_ms) {
            (Mode::Cpu, Some(_)) => {
                return bad("gpu_driver_init_ms is only valid in gpu mode".into())
            }
            (Mode::Gpu, None) => return bad("gpu mode requires setup.gpu_driver_init_ms".into()),
            _ => {}
        }
        for (pos, layer) in self.layers.iter().enumerate() {
            let idx = layer.index;
            if idx != pos + 1 {
                return bad(format!(
                    "layer at position {} has index {idx}; indices must be 1..N in order",
                    pos + 1
                ));
            }
            for &p in &layer.predecessors {
                if p == 0 || p >= idx {
                    return bad(format!(
                        "layer {idx} references predecessor {p}, which is not an earlier layer"
                    ));
                }
            }
            if layer.candidates.is_empty() {
                return bad(format!("layer {idx} has no kernel candidates"));
            }
            let mut ids = BTreeSet::new();
            for k in &layer.candidates {
                if !ids.insert(k.kernel_id.as_str()) {
                    return bad(format!(
                        "layer {idx} declares kernel '{}' twice",
                        k.kernel_id
                    ));
                }
                self.validate_kernel(idx, k)?;
            }
        }
        Ok(())
    }

    fn validate_kernel(&self, idx: usize, k: &KernelVariant<T>) -> Result<()> {
        let ctx = || format!("layer {idx} kernel '{}'", k.kernel_id);
        if let Some(v) = k.durations().find(|&v| !is_duration(v)) {
            return Err(Error::validation(format!(
                "{}: duration {v} is negative or not finite",
                ctx()
            )));
        }
        if !k.has_transform() {
            let same = k
                .read_raw_ms
                .values()
                .zip(k.read_cached_ms.values())
                .all(|(a, b)| a.approx_eq(b))
                && k.read_raw_ms.gpu.is_some() == k.read_cached_ms.gpu.is_some();
            if !same {
                return Err(Error::validation(format!(
                    "{}: without a transform the cached read must equal the raw read",
                    ctx()
                )));
            }
        }
        let gpu_fields = k.read_raw_ms.gpu.is_some()
            || k.read_cached_ms.gpu.is_some()
            || k.transform_ms.gpu.is_some()
            || k.execute_ms.gpu.is_some()
            || k.pipeline_create_ms.is_some();
        match self.mode {
            Mode::Cpu => {
                if k.execute_ms.big.is_none() {
                    return Err(Error::validation(format!(
                        "{}: execute_ms.big is required in cpu mode",
                        ctx()
                    )));
                }
                if gpu_fields {
                    return Err(Error::validation(format!(
                        "{}: gpu costs are only valid in gpu mode",
                        ctx()
                    )));
                }
            }
            Mode::Gpu => {
                if k.execute_ms.gpu.is_none() {
                    return Err(Error::validation(format!(
                        "{}: execute_ms.gpu is required in gpu mode",
                        ctx()
                    )));
                }
                if k.pipeline_create_ms.is_none() {
                    return Err(Error::validation(format!(
                        "{}: pipeline_create_ms is required in gpu mode",
                        ctx()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn is_duration<T: Scalar>(v: T) -> bool {
    v.is_finite() && v >= T::zero()
}

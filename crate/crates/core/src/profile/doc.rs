//! JSON profile document.
//!
//! ```json
//! {"model": "...", "mode": "cpu",
//!  "setup": {"memory_alloc_ms": 1.34},
//!  "layers": [{"index": 1, "op": "conv", "preds": [],
//!              "kernels": [{"id": "sgemm-pack4",
//!                           "costs": {"read_raw_ms": {"little": 0.7, "big": 0.7},
//!                                     "read_cached_ms": {...}, "transform_ms": {...},
//!                                     "execute_ms": {"big": 8.14}},
//!                           "bytes": {"raw": 442368, "cached": 442368}}]}]}
//! ```
//!
//! Unknown fields are rejected unless the caller asks for lenient parsing.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{
    ClassDurations, ExecuteCost, KernelVariant, LayerSpec, Mode, ModelProfile, PipelineCost,
    SetupCosts,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ProfileDoc<T> {
    model: String,
    mode: Mode,
    setup: SetupDoc<T>,
    layers: Vec<LayerDoc<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct SetupDoc<T> {
    memory_alloc_ms: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gpu_driver_init_ms: Option<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct LayerDoc<T> {
    index: usize,
    op: String,
    #[serde(default)]
    preds: Vec<usize>,
    kernels: Vec<KernelDoc<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct KernelDoc<T> {
    id: String,
    costs: CostsDoc<T>,
    bytes: BytesDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct CostsDoc<T> {
    read_raw_ms: ClassDurations<T>,
    read_cached_ms: ClassDurations<T>,
    transform_ms: ClassDurations<T>,
    execute_ms: ExecuteCost<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pipeline_create_ms: Option<PipelineCost<T>>,
}

#[derive(Serialize, Deserialize)]
struct BytesDoc {
    raw: u64,
    cached: u64,
}

/// Parses and validates a profile document.
pub fn load_profile<T: Scalar, R: Read>(source: R, lenient: bool) -> Result<ModelProfile<T>> {
    let mut de = serde_json::Deserializer::from_reader(source);
    let mut unknown = Vec::new();
    let doc: ProfileDoc<T> =
        serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string()))
            .map_err(|e| Error::Parse(e.to_string()))?;
    de.end().map_err(|e| Error::Parse(e.to_string()))?;
    if !lenient && !unknown.is_empty() {
        return Err(Error::Parse(format!(
            "unknown field(s): {}",
            unknown.join(", ")
        )));
    }
    doc.into_profile()
}

pub fn load_profile_str<T: Scalar>(source: &str, lenient: bool) -> Result<ModelProfile<T>> {
    load_profile(source.as_bytes(), lenient)
}

/// Serializes a profile back into the document format.
pub fn to_json<T: Scalar>(profile: &ModelProfile<T>) -> String {
    let doc = ProfileDoc::from_profile(profile);
    serde_json::to_string_pretty(&doc).expect("profile documents always serialize")
}

impl<T: Scalar> ProfileDoc<T> {
    fn into_profile(self) -> Result<ModelProfile<T>> {
        let layers = self
            .layers
            .into_iter()
            .map(|l| {
                let kernels = l
                    .kernels
                    .into_iter()
                    .map(|k| KernelVariant {
                        kernel_id: k.id,
                        cached: false,
                        read_raw_ms: k.costs.read_raw_ms,
                        read_cached_ms: k.costs.read_cached_ms,
                        transform_ms: k.costs.transform_ms,
                        execute_ms: k.costs.execute_ms,
                        pipeline_create_ms: k.costs.pipeline_create_ms,
                        raw_bytes: k.bytes.raw,
                        cached_bytes: k.bytes.cached,
                    })
                    .collect();
                LayerSpec::new(l.index, l.op, l.preds, kernels)
            })
            .collect();
        let setup = SetupCosts {
            memory_alloc_ms: self.setup.memory_alloc_ms,
            gpu_driver_init_ms: self.setup.gpu_driver_init_ms,
        };
        ModelProfile::new(self.model, self.mode, setup, layers)
    }

    fn from_profile(p: &ModelProfile<T>) -> Self {
        ProfileDoc {
            model: p.model_name.clone(),
            mode: p.mode,
            setup: SetupDoc {
                memory_alloc_ms: p.setup.memory_alloc_ms,
                gpu_driver_init_ms: p.setup.gpu_driver_init_ms,
            },
            layers: p
                .layers
                .iter()
                .map(|l| LayerDoc {
                    index: l.index,
                    op: l.operator_name.clone(),
                    preds: l.predecessors.clone(),
                    kernels: l
                        .candidates
                        .iter()
                        .map(|k| KernelDoc {
                            id: k.kernel_id.clone(),
                            costs: CostsDoc {
                                read_raw_ms: k.read_raw_ms,
                                read_cached_ms: k.read_cached_ms,
                                transform_ms: k.transform_ms,
                                execute_ms: k.execute_ms,
                                pipeline_create_ms: k.pipeline_create_ms,
                            },
                            bytes: BytesDoc {
                                raw: k.raw_bytes,
                                cached: k.cached_bytes,
                            },
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

//! Profiles bundled with the crate.

use crate::error::Result;
use crate::profile::{load_profile_str, ModelProfile};
use crate::scalar::Scalar;

/// ResNet-50 on a Pixel 5 CPU, compressed to five stages whose costs add up
/// to the measured per-stage totals.
pub const PIXEL5_RESNET50: &str = include_str!("../fixtures/pixel5_resnet50.json");
/// ResNet-50 on a Jetson TX2 GPU as a single aggregated layer.
pub const TX2_RESNET50_GPU: &str = include_str!("../fixtures/tx2_resnet50_gpu.json");
/// One 3x3 stride-1 convolution (64 in, 192 out) with six kernel variants.
pub const CONV_KERNELS: &str = include_str!("../fixtures/conv_kernels.json");
/// Six convolution layers of varying size drawn from the same kernel family.
pub const SYNTHETIC_RESNET50: &str = include_str!("../fixtures/synthetic_resnet50.json");
/// Six identical layers: little prep 2 ms, big prep 1 ms, execute 1 ms.
pub const UNIFORM_CHAIN6: &str = include_str!("../fixtures/uniform_chain6.json");
/// Four layers where only the last one has a faster-executing kernel with a
/// slow preparation.
pub const WARM_SWITCH4: &str = include_str!("../fixtures/warm_switch4.json");

pub const ALL: &[(&str, &str)] = &[
    ("pixel5_resnet50", PIXEL5_RESNET50),
    ("tx2_resnet50_gpu", TX2_RESNET50_GPU),
    ("conv_kernels", CONV_KERNELS),
    ("synthetic_resnet50", SYNTHETIC_RESNET50),
    ("uniform_chain6", UNIFORM_CHAIN6),
    ("warm_switch4", WARM_SWITCH4),
];

pub fn load<T: Scalar>(doc: &str) -> Result<ModelProfile<T>> {
    load_profile_str(doc, false)
}

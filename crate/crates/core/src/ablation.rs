//! Contribution of each technique: kernel selection (K), weight and shader
//! caching (C) and the cross-core pipeline (P), added one at a time.

use serde::Serialize;

use crate::error::Result;
use crate::filter::{enumerate_variants, VariantOptions};
use crate::oracle::sequential_baseline;
use crate::platform::PlatformConfig;
use crate::profile::{Choice, Mode, ModelProfile, ProcessorClass};
use crate::scalar::Scalar;
use crate::scheduler::{generate_plan, SchedulerConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct AblationRow<T> {
    pub stage: &'static str,
    pub combo: Vec<Choice>,
    pub makespan_ms: T,
}

/// Per layer, the variant with the lowest sequential cost (preparation on
/// the core that runs it in the sequential schedule, plus execution).
pub fn sequential_combo<T: Scalar>(profile: &ModelProfile<T>, opts: VariantOptions) -> Vec<Choice> {
    let class = match profile.mode {
        Mode::Cpu => ProcessorClass::BigCluster,
        Mode::Gpu => ProcessorClass::LittleCore,
    };
    profile
        .layers
        .iter()
        .map(|layer| {
            let variants = enumerate_variants(layer, profile.mode, opts);
            let cost = |v: &crate::filter::VariantScore<T>| {
                let prep = if class == ProcessorClass::BigCluster {
                    v.prep_big_ms
                } else {
                    v.prep_little_ms
                };
                prep + v.exec_ms
            };
            variants
                .iter()
                .fold(&variants[0], |best, v| {
                    if cost(v).definitely_lt(cost(best)) {
                        v
                    } else {
                        best
                    }
                })
                .choice
        })
        .collect()
}

/// Rows in order: baseline (first-declared kernels, nothing cached, no
/// overlap), K, K+C, K+C+P.
pub fn run_ablation<T: Scalar>(
    profile: &ModelProfile<T>,
    platform: &PlatformConfig<T>,
    cfg: &SchedulerConfig,
) -> Result<Vec<AblationRow<T>>> {
    let none = VariantOptions {
        allow_weight_cache: false,
        shader_cache: false,
    };
    let all = VariantOptions {
        allow_weight_cache: true,
        shader_cache: true,
    };
    let default = profile.default_combo();
    let k = sequential_combo(profile, none);
    let kc = sequential_combo(profile, all);
    let full = generate_plan(
        profile,
        platform,
        &SchedulerConfig {
            variants: all,
            ..cfg.clone()
        },
    )?;
    Ok(vec![
        AblationRow {
            stage: "baseline",
            makespan_ms: sequential_baseline(profile, &default, false)?,
            combo: default,
        },
        AblationRow {
            stage: "K",
            makespan_ms: sequential_baseline(profile, &k, false)?,
            combo: k,
        },
        AblationRow {
            stage: "K+C",
            makespan_ms: sequential_baseline(profile, &kc, true)?,
            combo: kc,
        },
        AblationRow {
            stage: "K+C+P",
            makespan_ms: full.predicted_makespan_ms,
            combo: full.combo,
        },
    ])
}

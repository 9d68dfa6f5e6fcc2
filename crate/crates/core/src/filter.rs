//! Kernel × cache variant enumeration and Pareto pruning.

use crate::profile::{Choice, LayerSpec, Mode, ProcessorClass};
use crate::scalar::Scalar;

/// Which preparation shortcuts the planner may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariantOptions {
    pub allow_weight_cache: bool,
    pub shader_cache: bool,
}

impl Default for VariantOptions {
    fn default() -> Self {
        VariantOptions {
            allow_weight_cache: true,
            shader_cache: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantScore<T> {
    /// 1-based layer index.
    pub layer: usize,
    pub choice: Choice,
    pub kernel_id: String,
    pub prep_little_ms: T,
    pub prep_big_ms: T,
    /// Execution time on the big cluster (CPU) or the GPU.
    pub exec_ms: T,
}

/// Lists each kernel raw, followed by its cached twin when caching changes anything.
pub fn enumerate_variants<T: Scalar>(
    layer: &LayerSpec<T>,
    mode: Mode,
    opts: VariantOptions,
) -> Vec<VariantScore<T>> {
    let mut out = Vec::with_capacity(layer.candidates.len() * 2);
    for (kernel, k) in layer.candidates.iter().enumerate() {
        let twins: &[bool] = if opts.allow_weight_cache && k.has_transform() {
            &[false, true]
        } else {
            &[false]
        };
        for &cached in twins {
            let v = k.with_cache(cached);
            let pipeline = v.pipeline_ms(opts.shader_cache);
            out.push(VariantScore {
                layer: layer.index,
                choice: Choice { kernel, cached },
                kernel_id: k.kernel_id.clone(),
                prep_little_ms: v.prep_ms(ProcessorClass::LittleCore).unwrap_or_default()
                    + pipeline,
                prep_big_ms: v.prep_ms(ProcessorClass::BigCluster).unwrap_or_default() + pipeline,
                exec_ms: v.exec_ms(mode).unwrap_or_default(),
            });
        }
    }
    out
}

/// Keeps the Pareto front over (little-core prep, exec).
///
/// A variant is dropped when another is no worse on both axes and strictly
/// better on one; of two equal variants the earlier one survives. Input
/// order is preserved.
pub fn prune_dominated<T: Scalar>(variants: &[VariantScore<T>]) -> Vec<VariantScore<T>> {
    variants
        .iter()
        .enumerate()
        .filter(|&(i, a)| {
            !variants.iter().enumerate().any(|(j, b)| {
                let no_worse = !a.prep_little_ms.definitely_lt(b.prep_little_ms)
                    && !a.exec_ms.definitely_lt(b.exec_ms);
                let strictly = b.prep_little_ms.definitely_lt(a.prep_little_ms)
                    || b.exec_ms.definitely_lt(a.exec_ms);
                no_worse && (strictly || j < i)
            })
        })
        .map(|(_, v)| v.clone())
        .collect()
}

/// Per-layer fronts for a whole profile.
pub fn layer_fronts<T: Scalar>(
    layers: &[LayerSpec<T>],
    mode: Mode,
    opts: VariantOptions,
) -> Vec<Vec<VariantScore<T>>> {
    layers
        .iter()
        .map(|l| prune_dominated(&enumerate_variants(l, mode, opts)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::KernelVariant;

    fn score(prep: f64, exec: f64, kernel: usize) -> VariantScore<f64> {
        VariantScore {
            layer: 1,
            choice: Choice::raw(kernel),
            kernel_id: format!("k{kernel}"),
            prep_little_ms: prep,
            prep_big_ms: prep,
            exec_ms: exec,
        }
    }

    #[test]
    fn zero_transform_kernel_has_no_twin() {
        let l = LayerSpec::new(
            1,
            "c",
            [],
            vec![KernelVariant::symmetric("a", 0.7, 0.0, 0.7, 8.0)],
        );
        assert_eq!(
            enumerate_variants(&l, Mode::Cpu, VariantOptions::default()).len(),
            1
        );
    }

    #[test]
    fn transform_kernel_gets_cached_twin() {
        let l: LayerSpec<f64> = LayerSpec::new(
            1,
            "c",
            [],
            vec![KernelVariant::symmetric("a", 0.7, 2.0, 1.1, 8.0)],
        );
        let v = enumerate_variants(&l, Mode::Cpu, VariantOptions::default());
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].choice, Choice::cached(0));
        assert!((v[0].prep_little_ms - 2.7).abs() < 1e-12);
        assert_eq!(v[1].prep_little_ms, 1.1);
        let no_cache = VariantOptions {
            allow_weight_cache: false,
            ..Default::default()
        };
        assert_eq!(enumerate_variants(&l, Mode::Cpu, no_cache).len(), 1);
    }

    #[test]
    fn single_variant_survives() {
        let v = vec![score(1.0, 2.0, 0)];
        assert_eq!(prune_dominated(&v), v);
    }

    #[test]
    fn identical_variants_keep_first() {
        let v = vec![score(1.0, 2.0, 0), score(1.0, 2.0, 1)];
        assert_eq!(prune_dominated(&v), vec![v[0].clone()]);
    }

    #[test]
    fn weak_dominance_removes() {
        let v = vec![score(1.0, 3.0, 0), score(1.0, 2.0, 1), score(0.5, 5.0, 2)];
        let front = prune_dominated(&v);
        assert_eq!(
            front.iter().map(|s| s.choice.kernel).collect::<Vec<_>>(),
            vec![1, 2]
        );
    }
}

//! Kernel switching for continuous inference.
//!
//! The cold plan picks kernels that are cheap to prepare. Later inferences
//! want the kernels that execute fastest, so their preparation is slotted
//! into little-core idle time of the cold run; whatever does not fit is
//! pipelined into the second inference.

use serde::Serialize;

use crate::error::Result;
use crate::filter::VariantOptions;
use crate::graph::{build_operation_graph, OpDurations, OpId, OpKind, OperationGraph};
use crate::plan::{ComboEntry, Plan};
use crate::platform::{CoreId, PlatformConfig};
use crate::profile::{Choice, ModelProfile, ProcessorClass};
use crate::scalar::Scalar;
use crate::scheduler::{
    best_plan_for_combo, schedule_combination, sequential_plan, SchedulerConfig,
};
use crate::sim::{self, ExtraBundle, SimOptions, SimReport};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ExtraPrep<T> {
    pub layer: usize,
    pub kernel_id: String,
    pub cached: bool,
    pub core: CoreId,
    pub start_ms: T,
    pub end_ms: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarmSwitchPlan<T> {
    pub k_cold: Vec<Choice>,
    pub k_warm: Vec<Choice>,
    pub extra_preps: Vec<ExtraPrep<T>>,
    /// Layers whose warm preparation is left for the second inference.
    pub residual: Vec<usize>,
}

#[derive(Serialize)]
#[serde(bound = "T: Scalar")]
struct WarmDoc<'a, T> {
    k_cold: Vec<ComboEntry>,
    k_warm: Vec<ComboEntry>,
    extra_preps: &'a [ExtraPrep<T>],
    residual: &'a [usize],
}

impl<T: Scalar> WarmSwitchPlan<T> {
    /// Layers whose warm kernel differs from the cold one.
    pub fn switched_layers(&self, profile: &ModelProfile<T>) -> Vec<usize> {
        (1..=self.k_cold.len())
            .filter(|&l| {
                kernel_id(profile, l, self.k_cold[l - 1])
                    != kernel_id(profile, l, self.k_warm[l - 1])
            })
            .collect()
    }

    pub fn to_json_value(&self, profile: &ModelProfile<T>) -> serde_json::Value {
        let entries = |combo: &[Choice]| {
            combo
                .iter()
                .enumerate()
                .map(|(i, c)| ComboEntry {
                    layer: i + 1,
                    kernel_id: kernel_id(profile, i + 1, *c),
                    cached: c.cached,
                })
                .collect()
        };
        let doc = WarmDoc {
            k_cold: entries(&self.k_cold),
            k_warm: entries(&self.k_warm),
            extra_preps: &self.extra_preps,
            residual: &self.residual,
        };
        serde_json::to_value(doc).expect("warm plan serializes")
    }
}

fn kernel_id<T: Scalar>(profile: &ModelProfile<T>, layer: usize, c: Choice) -> String {
    profile.layer(layer).candidates[c.kernel].kernel_id.clone()
}

/// Per layer, the kernel with the smallest execute time (the cold kernel
/// wins ties), prepared in whichever allowed form is cheaper on a little core.
pub fn warm_combo<T: Scalar>(
    profile: &ModelProfile<T>,
    k_cold: &[Choice],
    opts: VariantOptions,
) -> Vec<Choice> {
    profile
        .layers
        .iter()
        .zip(k_cold)
        .map(|(layer, &cold)| {
            let exec = |k: usize| {
                layer.candidates[k]
                    .exec_ms(profile.mode)
                    .unwrap_or_else(T::infinity)
            };
            let mut best = cold.kernel;
            for k in 0..layer.candidates.len() {
                if exec(k).definitely_lt(exec(best)) {
                    best = k;
                }
            }
            if best == cold.kernel {
                return cold;
            }
            let v = &layer.candidates[best];
            let raw = v.prep_ms(ProcessorClass::LittleCore).unwrap_or_default();
            let cached = v
                .with_cache(true)
                .prep_ms(ProcessorClass::LittleCore)
                .unwrap_or_default();
            let use_cache =
                opts.allow_weight_cache && v.has_transform() && cached.definitely_lt(raw);
            Choice {
                kernel: best,
                cached: use_cache,
            }
        })
        .collect()
}

struct Window<T> {
    core: CoreId,
    /// Next free instant inside the window.
    cursor: T,
    end: T,
}

fn idle_windows<T: Scalar>(
    report: &SimReport<T>,
    graph_len: usize,
    little_cores: usize,
) -> Vec<Window<T>> {
    let tol = T::tolerance();
    let mut windows = Vec::new();
    for j in 1..=little_cores {
        let core = CoreId::Little(j);
        let mut busy: Vec<(T, T)> = report.timeline[..graph_len]
            .iter()
            .filter(|e| e.core == core)
            .map(|e| (e.start_ms, e.end_ms))
            .collect();
        busy.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        let mut free_from = T::zero();
        for (s, e) in busy
            .into_iter()
            .chain(std::iter::once((report.makespan_ms, report.makespan_ms)))
        {
            if s - free_from > tol {
                windows.push(Window {
                    core,
                    cursor: free_from,
                    end: s,
                });
            }
            free_from = free_from.max(e);
        }
    }
    windows.sort_by(|a, b| {
        a.cursor
            .partial_cmp(&b.cursor)
            .expect("finite times")
            .then(a.core.cmp(&b.core))
    });
    windows
}

/// Packs the warm preparation bundles first-fit-decreasing into little-core
/// idle windows of the cold run. A placement is kept only if re-simulating
/// the cold plan with it leaves every cold operation's timing unchanged and
/// the bundle finishes inside its window.
pub fn plan_warm_switch<T: Scalar>(
    cold_plan: &Plan<T>,
    cold_report: &SimReport<T>,
    profile: &ModelProfile<T>,
    platform: &PlatformConfig<T>,
    opts: VariantOptions,
) -> Result<WarmSwitchPlan<T>> {
    let k_cold = cold_plan.combo.clone();
    let k_warm = warm_combo(profile, &k_cold, opts);
    let mut wsp = WarmSwitchPlan {
        k_cold,
        k_warm,
        extra_preps: Vec::new(),
        residual: Vec::new(),
    };
    let switched = wsp.switched_layers(profile);
    if switched.is_empty() {
        return Ok(wsp);
    }

    let cold_graph = build_operation_graph(profile, &cold_plan.combo)?;
    let warm_graph = build_operation_graph(profile, &wsp.k_warm)?;
    let sim_opts = SimOptions {
        stealing: false,
        shader_cache: opts.shader_cache,
    };
    let baseline = sim::run(cold_plan, &cold_graph, platform, sim_opts)?;
    let setup_done = cold_graph
        .setup_ops()
        .map(|s| baseline.timeline[s.op_id].end_ms)
        .fold(T::zero(), T::max);

    let mut order = switched;
    let prep = |l: usize| warm_graph.prep_ms(l, ProcessorClass::LittleCore, opts.shader_cache);
    order.sort_by(|&a, &b| {
        prep(b)
            .partial_cmp(&prep(a))
            .expect("finite")
            .then(a.cmp(&b))
    });

    let mut windows = idle_windows(cold_report, cold_graph.len(), platform.little_cores);
    let mut accepted: Vec<ExtraBundle<T>> = Vec::new();
    let mut window_ends: Vec<T> = Vec::new();
    let tol = T::tolerance() * T::lit(1e3);
    for layer in order {
        let ops = bundle_ops(&warm_graph, layer, opts.shader_cache);
        let mut placed = false;
        for w in windows.iter_mut() {
            let start = w.cursor.max(setup_done);
            if start + prep(layer) > w.end + tol {
                continue;
            }
            let after_ops = baseline.timeline[..cold_graph.len()]
                .iter()
                .filter(|e| e.core == w.core && e.end_ms <= start + tol)
                .count();
            let candidate = ExtraBundle {
                layer,
                core: w.core,
                release_ms: start,
                after_ops,
                ops: ops.clone(),
            };
            let mut trial = accepted.clone();
            trial.push(candidate.clone());
            let report =
                sim::simulate_with_extras(cold_plan, &cold_graph, platform, sim_opts, &trial)?;
            let undisturbed = report.timeline[..cold_graph.len()]
                .iter()
                .zip(&baseline.timeline)
                .all(|(a, b)| {
                    (a.start_ms - b.start_ms).abs() <= tol
                        && (a.end_ms - b.end_ms).abs() <= tol
                        && a.core == b.core
                });
            // Extras may slow each other down, so every one is re-checked.
            let spans = extra_spans(&report, cold_graph.len(), &trial);
            let ends = window_ends.iter().copied().chain(std::iter::once(w.end));
            let inside = spans
                .iter()
                .zip(ends)
                .all(|(&(_, e), limit)| e <= limit + tol);
            if undisturbed && inside {
                let choice = wsp.k_warm[layer - 1];
                wsp.extra_preps.push(ExtraPrep {
                    layer,
                    kernel_id: kernel_id(profile, layer, choice),
                    cached: choice.cached,
                    core: w.core,
                    start_ms: T::zero(),
                    end_ms: T::zero(),
                });
                for (x, &(s, e)) in wsp.extra_preps.iter_mut().zip(&spans) {
                    x.start_ms = s;
                    x.end_ms = e;
                }
                w.cursor = spans[spans.len() - 1].1;
                accepted.push(candidate);
                window_ends.push(w.end);
                placed = true;
                break;
            }
        }
        if !placed {
            wsp.residual.push(layer);
        }
    }
    wsp.residual.sort_unstable();
    Ok(wsp)
}

/// (start, end) of each injected bundle, in injection order.
fn extra_spans<T: Scalar>(
    report: &SimReport<T>,
    graph_len: usize,
    extras: &[ExtraBundle<T>],
) -> Vec<(T, T)> {
    let mut first = graph_len;
    extras
        .iter()
        .map(|x| {
            let entries = &report.timeline[first..first + x.ops.len()];
            first += x.ops.len();
            let start = entries
                .iter()
                .map(|e| e.start_ms)
                .fold(T::infinity(), T::min);
            (
                start,
                entries.iter().map(|e| e.end_ms).fold(T::zero(), T::max),
            )
        })
        .collect()
}

/// Re-simulates the cold plan with each placed warm prep queued on its
/// core, for checking that the preps leave the cold run untouched.
pub fn simulate_with_warm_preps<T: Scalar>(
    cold_plan: &Plan<T>,
    wsp: &WarmSwitchPlan<T>,
    profile: &ModelProfile<T>,
    platform: &PlatformConfig<T>,
    shader_cache: bool,
) -> Result<SimReport<T>> {
    let cold_graph = build_operation_graph(profile, &cold_plan.combo)?;
    let warm_graph = build_operation_graph(profile, &wsp.k_warm)?;
    let opts = SimOptions {
        stealing: false,
        shader_cache,
    };
    let baseline = sim::run(cold_plan, &cold_graph, platform, opts)?;
    let tol = T::tolerance() * T::lit(1e3);
    let extras: Vec<ExtraBundle<T>> = wsp
        .extra_preps
        .iter()
        .map(|x| ExtraBundle {
            layer: x.layer,
            core: x.core,
            release_ms: x.start_ms,
            after_ops: baseline.timeline[..cold_graph.len()]
                .iter()
                .filter(|e| e.core == x.core && e.end_ms <= x.start_ms + tol)
                .count(),
            ops: bundle_ops(&warm_graph, x.layer, shader_cache),
        })
        .collect();
    sim::simulate_with_extras(cold_plan, &cold_graph, platform, opts, &extras)
}

fn bundle_ops<T: Scalar>(
    graph: &OperationGraph<T>,
    layer: usize,
    shader_cache: bool,
) -> Vec<(OpKind, OpDurations<T>)> {
    graph
        .layer_ops(layer)
        .bundle()
        .into_iter()
        .map(|id| {
            let node = graph.node(id);
            let mut d = node.duration;
            if shader_cache {
                if let Some(hit) = node.hit_duration {
                    d = OpDurations {
                        little: d.little.map(|_| hit),
                        big: d.big.map(|_| hit),
                        gpu: d.gpu.map(|_| hit),
                    };
                }
            }
            (node.kind, d)
        })
        .collect()
}

/// Latency of the second inference. Setup and every prepared warm kernel
/// are already in place, so only residual layers still carry preparation.
pub fn second_inference_latency<T: Scalar>(
    wsp: &WarmSwitchPlan<T>,
    profile: &ModelProfile<T>,
    platform: &PlatformConfig<T>,
    cfg: &SchedulerConfig,
) -> Result<T> {
    let graph = build_operation_graph(profile, &wsp.k_warm)?;
    if wsp.residual.is_empty() {
        return Ok(graph.total_exec_ms());
    }
    let mut done: Vec<OpId> = graph.setup_ops().map(|s| s.op_id).collect();
    for l in (1..=graph.n_layers).filter(|l| !wsp.residual.contains(l)) {
        done.extend(graph.layer_ops(l).bundle());
    }
    let reduced = graph.with_zeroed(&done);
    let platform = platform.without_load();
    let opts = SimOptions {
        stealing: false,
        shader_cache: cfg.variants.shader_cache,
    };
    let (full, _) = best_plan_for_combo(profile, &wsp.k_warm, &platform, cfg)?;
    let candidates = [
        schedule_combination(profile, &reduced, &wsp.k_warm, &platform, cfg)?,
        sequential_plan(profile, &reduced, &wsp.k_warm, &platform)?,
        full,
    ];
    let mut best = T::infinity();
    for plan in &candidates {
        best = best.min(sim::run(plan, &reduced, &platform, opts)?.makespan_ms);
    }
    Ok(best)
}

/// From the third inference on every warm kernel is ready.
pub fn third_inference_latency<T: Scalar>(
    wsp: &WarmSwitchPlan<T>,
    profile: &ModelProfile<T>,
) -> Result<T> {
    Ok(build_operation_graph(profile, &wsp.k_warm)?.total_exec_ms())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{KernelVariant, LayerSpec, Mode, SetupCosts};

    fn four_layers(warm_exec: f64) -> ModelProfile<f64> {
        let cold = KernelVariant::symmetric("fast-prep", 1.0, 0.0, 1.0, 5.0);
        let warm = KernelVariant::symmetric("fast-exec", 6.0, 0.0, 6.0, warm_exec);
        let layers = (1..=4)
            .map(|i| {
                let ks = if i == 4 {
                    vec![cold.clone(), warm.clone()]
                } else {
                    vec![cold.clone()]
                };
                LayerSpec::new(i, "conv", (i > 1).then_some(i - 1), ks)
            })
            .collect();
        ModelProfile::new("four", Mode::Cpu, SetupCosts::cpu(0.0), layers).unwrap()
    }

    fn cold_run(
        p: &ModelProfile<f64>,
        platform: &PlatformConfig<f64>,
    ) -> (Plan<f64>, SimReport<f64>) {
        let combo = p.default_combo();
        let (plan, g) =
            best_plan_for_combo(p, &combo, platform, &SchedulerConfig::default()).unwrap();
        let report = sim::simulate(&plan, &g, platform).unwrap();
        (plan, report)
    }

    #[test]
    fn nothing_to_switch() {
        let p = four_layers(5.0);
        let platform = PlatformConfig::new(1, 4);
        let (plan, report) = cold_run(&p, &platform);
        let wsp =
            plan_warm_switch(&plan, &report, &p, &platform, VariantOptions::default()).unwrap();
        assert_eq!(wsp.k_warm, wsp.k_cold);
        assert!(wsp.extra_preps.is_empty() && wsp.residual.is_empty());
    }

    #[test]
    fn warm_prep_fits_idle_window() {
        // Cold: big runs prep 1 then four 5 ms executes (ends 21); the
        // little core prepares layers 2-4 by 3 ms and then idles for 18 ms,
        // room for the 6 ms warm bundle of layer 4.
        let p = four_layers(3.0);
        let platform = PlatformConfig::unbounded(1);
        let (plan, report) = cold_run(&p, &platform);
        assert!((report.makespan_ms - 21.0).abs() < 1e-9);
        let wsp =
            plan_warm_switch(&plan, &report, &p, &platform, VariantOptions::default()).unwrap();
        assert_eq!(wsp.k_warm[3], Choice::raw(1));
        assert!(wsp.residual.is_empty());
        let x = &wsp.extra_preps[0];
        assert_eq!((x.layer, x.core), (4, CoreId::Little(1)));
        assert!(x.start_ms >= 3.0 - 1e-9 && x.end_ms <= 21.0 + 1e-9);
        let cfg = SchedulerConfig::default();
        assert!((second_inference_latency(&wsp, &p, &platform, &cfg).unwrap() - 18.0).abs() < 1e-9);
        assert!((third_inference_latency(&wsp, &p).unwrap() - 18.0).abs() < 1e-9);
        let json = wsp.to_json_value(&p);
        assert_eq!(json["k_warm"][3]["kernel"], "fast-exec");
    }

    #[test]
    fn no_room_means_residual() {
        let p = four_layers(3.0);
        let platform = PlatformConfig::new(0, 4);
        let (plan, report) = cold_run(&p, &platform);
        let wsp =
            plan_warm_switch(&plan, &report, &p, &platform, VariantOptions::default()).unwrap();
        assert_eq!(wsp.residual, vec![4]);
        let cfg = SchedulerConfig::default();
        let second = second_inference_latency(&wsp, &p, &platform, &cfg).unwrap();
        // Only layer 4 still needs its 6 ms bundle; on the big cluster it
        // runs before the first Execute: 6 + 5 + 5 + 5 + 3.
        assert!((second - 24.0).abs() < 1e-9);
    }
}

//! Heuristic kernel scheduler.
//!
//! For every candidate kernel combination the scheduler starts from a plan
//! where the big cluster runs the first layer's preparation and every
//! Execute, then alternates two balancing loops: pulling preparation bundles
//! onto the big cluster while the little cores finish later, and evening
//! out the little-core queues by moving bundles from the most to the least
//! loaded core. Each combination is scored by simulation and the fastest
//! plan wins.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{layer_fronts, VariantOptions, VariantScore};
use crate::graph::{build_operation_graph, OpId, OperationGraph, SetupStage};
use crate::plan::Plan;
use crate::platform::PlatformConfig;
use crate::profile::{Choice, Mode, ModelProfile, ProcessorClass};
use crate::scalar::Scalar;
use crate::sim::{self, SimOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComboStrategy {
    Exhaustive,
    /// Per layer, the variant minimizing `prep_little / M_l + exec`.
    Greedy,
    /// Layer-by-layer beam search keeping the best `width` prefixes.
    Beam(usize),
}

/// Test used when deciding whether a bundle moves onto the big cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BigInsertRule {
    /// `t_big + t_little < max_little - T_0`.
    CombinedPrep,
    /// `T_0 + t_big < max_little`.
    BigPrepOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerConfig {
    /// Floor of the balance tolerance.
    pub epsilon_ms: f64,
    /// Tolerance as a fraction of the longest queue; the larger value wins.
    pub epsilon_rel: f64,
    /// Iteration guard for each balancing loop; `None` means `16 * N`.
    pub max_balance_iters: Option<usize>,
    pub combo_strategy: ComboStrategy,
    pub combo_cap: u64,
    pub variants: VariantOptions,
    pub big_insert_rule: BigInsertRule,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            epsilon_ms: 0.1,
            epsilon_rel: 0.01,
            max_balance_iters: None,
            combo_strategy: ComboStrategy::Exhaustive,
            combo_cap: 4096,
            variants: VariantOptions::default(),
            big_insert_rule: BigInsertRule::CombinedPrep,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon_ms.is_nan() || self.epsilon_ms <= 0.0 || self.epsilon_rel < 0.0 {
            return Err(Error::validation("epsilon must be positive"));
        }
        if self.combo_cap < 1 {
            return Err(Error::validation("combo_cap must be at least 1"));
        }
        if let ComboStrategy::Beam(0) = self.combo_strategy {
            return Err(Error::validation("beam width must be at least 1"));
        }
        Ok(())
    }

    fn guard(&self, n_layers: usize) -> usize {
        self.max_balance_iters.unwrap_or(16 * n_layers).max(1)
    }

    fn sim_options(&self) -> SimOptions {
        SimOptions {
            stealing: false,
            shader_cache: self.variants.shader_cache,
        }
    }
}

/// Sum of op durations on `class`; dependency stalls are ignored.
pub fn compute_queue_time<T: Scalar>(
    queue: &[OpId],
    class: ProcessorClass,
    graph: &OperationGraph<T>,
    shader_cache: bool,
) -> T {
    queue
        .iter()
        .map(|&op| graph.op_ms(op, class, shader_cache))
        .sum()
}

struct Balancer<T> {
    prep_little: Vec<T>,
    prep_big: Vec<T>,
    eps_floor: T,
    eps_rel: T,
    guard: usize,
    guard_hit: bool,
}

impl<T: Scalar> Balancer<T> {
    fn eps(&self, longest: T) -> T {
        self.eps_floor.max(self.eps_rel * longest)
    }

    /// Round-robin the layers over the little queues, then move bundles from
    /// the busiest to the idlest queue while that narrows the spread.
    fn little_queues(&mut self, layers: &[usize], setup: &[T], other_max: T) -> Vec<Vec<usize>> {
        let m = setup.len();
        let mut queues = vec![Vec::new(); m];
        for (k, &l) in layers.iter().enumerate() {
            queues[k % m].push(l);
        }
        let times = |qs: &[Vec<usize>]| -> Vec<T> {
            qs.iter()
                .zip(setup)
                .map(|(q, &s)| s + q.iter().map(|&l| self.prep_little[l - 1]).sum::<T>())
                .collect()
        };
        let mut iters = 0;
        loop {
            let t = times(&queues);
            let (jmax, tmax) = arg_extreme(&t, |a, b| a > b);
            let (jmin, tmin) = arg_extreme(&t, |a, b| a < b);
            if tmax - tmin <= self.eps(tmax.max(other_max)) {
                break;
            }
            if iters >= self.guard {
                self.guard_hit = true;
                break;
            }
            let mut sorted = queues[jmax].clone();
            sorted.sort_by(|&a, &b| {
                self.prep_little[b - 1]
                    .partial_cmp(&self.prep_little[a - 1])
                    .expect("finite")
                    .then(a.cmp(&b))
            });
            let half_gap = (tmax - tmin) / T::lit(2.0);
            let Some(&mv) = sorted.iter().find(|&&l| self.prep_little[l - 1] < half_gap) else {
                break;
            };
            queues[jmax].retain(|&l| l != mv);
            queues[jmin].push(mv);
            iters += 1;
        }
        for q in &mut queues {
            q.sort_unstable();
        }
        queues
    }
}

/// First index of the extreme value under `better`.
fn arg_extreme<T: Scalar>(v: &[T], better: impl Fn(T, T) -> bool) -> (usize, T) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if better(x, best.1) {
            best = (i, x);
        }
    }
    best
}

fn expand<T: Scalar>(graph: &OperationGraph<T>, layers: &[usize]) -> Vec<OpId> {
    layers
        .iter()
        .flat_map(|&l| graph.layer_ops(l).bundle())
        .collect()
}

/// Builds the pipelined plan for one fixed combination.
pub fn schedule_combination<T: Scalar>(
    profile: &ModelProfile<T>,
    graph: &OperationGraph<T>,
    combo: &[Choice],
    platform: &PlatformConfig<T>,
    cfg: &SchedulerConfig,
) -> Result<Plan<T>> {
    let n = graph.n_layers;
    let m = platform.little_cores;
    let shader_cache = cfg.variants.shader_cache;
    let mut plan = Plan::empty(profile, combo.to_vec(), m)?;
    let mut bal = Balancer {
        prep_little: (1..=n)
            .map(|l| graph.prep_ms(l, ProcessorClass::LittleCore, shader_cache))
            .collect(),
        prep_big: (1..=n)
            .map(|l| graph.prep_ms(l, ProcessorClass::BigCluster, shader_cache))
            .collect(),
        eps_floor: T::lit(cfg.epsilon_ms),
        eps_rel: T::lit(cfg.epsilon_rel),
        guard: cfg.guard(n),
        guard_hit: false,
    };
    let executes: Vec<OpId> = graph.executes().collect();
    let exec_total = graph.total_exec_ms();

    match graph.mode {
        Mode::Cpu => {
            let setups: Vec<OpId> = graph.setup_ops().map(|s| s.op_id).collect();
            let setup_total =
                compute_queue_time(&setups, ProcessorClass::BigCluster, graph, shader_cache);
            if m == 0 {
                let all: Vec<usize> = (1..=n).collect();
                plan.big_queue = [setups, expand(graph, &all), executes].concat();
                return Ok(plan);
            }
            let mut on_big = vec![1usize];
            let mut next = 2usize;
            let mut insertions = 0;
            let littles = loop {
                let rest: Vec<usize> = (1..=n).filter(|l| !on_big.contains(l)).collect();
                let littles = bal.little_queues(&rest, &vec![T::zero(); m], T::zero());
                let t0 = setup_total
                    + on_big.iter().map(|&l| bal.prep_big[l - 1]).sum::<T>()
                    + exec_total;
                let max_l = littles
                    .iter()
                    .map(|q| q.iter().map(|&l| bal.prep_little[l - 1]).sum::<T>())
                    .fold(T::zero(), T::max);
                if (max_l - t0).abs() <= bal.eps(max_l.max(t0)) || max_l <= t0 {
                    break littles;
                }
                if insertions >= bal.guard {
                    bal.guard_hit = true;
                    break littles;
                }
                let gap = max_l - t0;
                let fits = |l: usize| match cfg.big_insert_rule {
                    BigInsertRule::CombinedPrep => {
                        bal.prep_big[l - 1] + bal.prep_little[l - 1] < gap
                    }
                    BigInsertRule::BigPrepOnly => bal.prep_big[l - 1] < gap,
                };
                match (next..=n).find(|&l| !on_big.contains(&l) && fits(l)) {
                    Some(l) => {
                        on_big.push(l);
                        next = l + 1;
                        insertions += 1;
                    }
                    None => break littles,
                }
            };
            plan.big_queue = [setups, expand(graph, &on_big), executes].concat();
            plan.little_queues = littles.iter().map(|q| expand(graph, q)).collect();
        }
        Mode::Gpu => {
            if m == 0 {
                return Err(Error::validation(
                    "gpu mode needs at least one CPU core for preparation",
                ));
            }
            let (heads, setup_times) = gpu_setup_heads(graph, m, shader_cache);
            let all: Vec<usize> = (1..=n).collect();
            let littles = bal.little_queues(&all, &setup_times, exec_total);
            plan.big_queue = executes;
            plan.little_queues = heads
                .into_iter()
                .zip(&littles)
                .map(|(h, q)| [h, expand(graph, q)].concat())
                .collect();
        }
    }
    plan.balance_guard_hit = bal.guard_hit;
    Ok(plan)
}

/// GPU mode places memory allocation at the head of the first CPU queue and
/// driver initialization at the head of the last one.
fn gpu_setup_heads<T: Scalar>(
    graph: &OperationGraph<T>,
    m: usize,
    shader_cache: bool,
) -> (Vec<Vec<OpId>>, Vec<T>) {
    let mut heads = vec![Vec::new(); m];
    if let Some(a) = graph.setup_op(SetupStage::MemoryAlloc) {
        heads[0].push(a);
    }
    if let Some(d) = graph.setup_op(SetupStage::GpuDriverInit) {
        heads[m - 1].push(d);
    }
    let times = heads
        .iter()
        .map(|h| compute_queue_time(h, ProcessorClass::LittleCore, graph, shader_cache))
        .collect();
    (heads, times)
}

/// Plan without cross-core pipelining of preparation: on CPU everything runs
/// on the big cluster in order; on GPU one CPU core prepares every layer.
pub fn sequential_plan<T: Scalar>(
    profile: &ModelProfile<T>,
    graph: &OperationGraph<T>,
    combo: &[Choice],
    platform: &PlatformConfig<T>,
) -> Result<Plan<T>> {
    let n = graph.n_layers;
    let all: Vec<usize> = (1..=n).collect();
    let setups: Vec<OpId> = graph.setup_ops().map(|s| s.op_id).collect();
    let executes: Vec<OpId> = graph.executes().collect();
    match graph.mode {
        Mode::Cpu => {
            let mut plan = Plan::empty(profile, combo.to_vec(), platform.little_cores)?;
            plan.big_queue = [setups, expand(graph, &all), executes].concat();
            Ok(plan)
        }
        Mode::Gpu => {
            let mut plan = Plan::empty(profile, combo.to_vec(), platform.little_cores.max(1))?;
            plan.big_queue = executes;
            plan.little_queues[0] = [setups, expand(graph, &all)].concat();
            Ok(plan)
        }
    }
}

/// Schedules one combination and scores it by simulation. The sequential
/// plan is kept when the pipelined one does not beat it.
pub fn best_plan_for_combo<T: Scalar>(
    profile: &ModelProfile<T>,
    combo: &[Choice],
    platform: &PlatformConfig<T>,
    cfg: &SchedulerConfig,
) -> Result<(Plan<T>, OperationGraph<T>)> {
    let graph = build_operation_graph(profile, combo)?;
    let plan_platform = platform.without_load();
    let mut pipelined = schedule_combination(profile, &graph, combo, &plan_platform, cfg)?;
    pipelined.predicted_makespan_ms =
        sim::run(&pipelined, &graph, &plan_platform, cfg.sim_options())?.makespan_ms;
    let mut fallback = sequential_plan(profile, &graph, combo, &plan_platform)?;
    fallback.predicted_makespan_ms =
        sim::run(&fallback, &graph, &plan_platform, cfg.sim_options())?.makespan_ms;
    let plan = if fallback
        .predicted_makespan_ms
        .definitely_lt(pipelined.predicted_makespan_ms)
    {
        fallback
    } else {
        pipelined
    };
    Ok((plan, graph))
}

/// Searches the kernel combinations and returns the fastest plan.
pub fn generate_plan<T: Scalar>(
    profile: &ModelProfile<T>,
    platform: &PlatformConfig<T>,
    cfg: &SchedulerConfig,
) -> Result<Plan<T>> {
    cfg.validate()?;
    platform.validate()?;
    let fronts = layer_fronts(&profile.layers, profile.mode, cfg.variants);
    let combos: Vec<Vec<Choice>> = match cfg.combo_strategy {
        ComboStrategy::Exhaustive => {
            let size = fronts
                .iter()
                .fold(1u128, |acc, f| acc.saturating_mul(f.len() as u128));
            if size > cfg.combo_cap as u128 {
                return Err(Error::ComboSpaceExceeded {
                    size,
                    cap: cfg.combo_cap,
                });
            }
            cartesian(&fronts)
        }
        ComboStrategy::Greedy => vec![greedy_combo(&fronts, platform.little_cores)],
        ComboStrategy::Beam(width) => return beam_search(profile, &fronts, platform, cfg, width),
    };
    pick_best(profile, &combos, platform, cfg)
}

fn pick_best<T: Scalar>(
    profile: &ModelProfile<T>,
    combos: &[Vec<Choice>],
    platform: &PlatformConfig<T>,
    cfg: &SchedulerConfig,
) -> Result<Plan<T>> {
    let plans: Vec<Plan<T>> = combos
        .par_iter()
        .map(|c| best_plan_for_combo(profile, c, platform, cfg).map(|(p, _)| p))
        .collect::<Result<_>>()?;
    Ok(plans
        .into_iter()
        .reduce(|best, p| if better(&p, &best) { p } else { best })
        .expect("at least one combination"))
}

/// Lower makespan, then lower storage; earlier candidates win exact ties.
fn better<T: Scalar>(a: &Plan<T>, b: &Plan<T>) -> bool {
    if a.predicted_makespan_ms.approx_eq(b.predicted_makespan_ms) {
        a.storage_overhead_bytes < b.storage_overhead_bytes
    } else {
        a.predicted_makespan_ms < b.predicted_makespan_ms
    }
}

fn cartesian<T>(fronts: &[Vec<VariantScore<T>>]) -> Vec<Vec<Choice>> {
    fronts.iter().fold(vec![Vec::new()], |acc, front| {
        acc.iter()
            .flat_map(|prefix| {
                front.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(v.choice);
                    c
                })
            })
            .collect()
    })
}

fn greedy_combo<T: Scalar>(fronts: &[Vec<VariantScore<T>>], little_cores: usize) -> Vec<Choice> {
    let m = T::from_usize(little_cores.max(1)).expect("core count fits scalar");
    fronts
        .iter()
        .map(|front| {
            let cost = |v: &VariantScore<T>| v.prep_little_ms / m + v.exec_ms;
            front
                .iter()
                .fold(&front[0], |best, v| {
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

fn beam_search<T: Scalar>(
    profile: &ModelProfile<T>,
    fronts: &[Vec<VariantScore<T>>],
    platform: &PlatformConfig<T>,
    cfg: &SchedulerConfig,
    width: usize,
) -> Result<Plan<T>> {
    let mut beam: Vec<Vec<Choice>> = vec![Vec::new()];
    for (i, front) in fronts.iter().enumerate() {
        let prefix = ModelProfile {
            layers: profile.layers[..=i].to_vec(),
            ..profile.clone()
        };
        let candidates: Vec<Vec<Choice>> = beam
            .iter()
            .flat_map(|c| {
                front.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push(v.choice);
                    c
                })
            })
            .collect();
        let scored: Vec<Plan<T>> = candidates
            .par_iter()
            .map(|c| best_plan_for_combo(&prefix, c, platform, cfg).map(|(p, _)| p))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| {
            if better(&scored[a], &scored[b]) {
                std::cmp::Ordering::Less
            } else if better(&scored[b], &scored[a]) {
                std::cmp::Ordering::Greater
            } else {
                a.cmp(&b)
            }
        });
        beam = order
            .into_iter()
            .take(width)
            .map(|k| candidates[k].clone())
            .collect();
    }
    pick_best(profile, &beam, platform, cfg)
}

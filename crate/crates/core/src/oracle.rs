//! Reference schedules: the no-overlap sequential baseline and an exact
//! branch-and-bound search over queue assignments for tiny instances.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{build_operation_graph, OpId, OperationGraph, SetupStage};
use crate::plan::Plan;
use crate::platform::PlatformConfig;
use crate::profile::{
    Choice, KernelVariant, LayerSpec, Mode, ModelProfile, PipelineCost, ProcessorClass, SetupCosts,
};
use crate::scalar::Scalar;
use crate::scheduler::sequential_plan;
use crate::sim::{self, SimOptions};

/// Cold latency of running every stage back to back: setup, then each
/// layer's preparation, then every Execute. CPU work is charged at big-core
/// cost; in GPU mode preparation runs on a little core and the pipeline is
/// created from scratch unless `shader_cache` is set.
pub fn sequential_baseline<T: Scalar>(
    profile: &ModelProfile<T>,
    combo: &[Choice],
    shader_cache: bool,
) -> Result<T> {
    let graph = build_operation_graph(profile, combo)?;
    let prep_class = match profile.mode {
        Mode::Cpu => ProcessorClass::BigCluster,
        Mode::Gpu => ProcessorClass::LittleCore,
    };
    let setup: T = graph
        .setup_ops()
        .map(|s| s.duration.on(prep_class).unwrap_or_default())
        .sum();
    let prep: T = (1..=graph.n_layers)
        .map(|l| graph.prep_ms(l, prep_class, shader_cache))
        .sum();
    Ok(setup + prep + graph.total_exec_ms())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    /// Non-setup operations in the graph.
    pub max_ops: usize,
    /// Queues, counting the execute queue.
    pub max_cores: usize,
    pub time_budget_ms: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_ops: 12,
            max_cores: 3,
            time_budget_ms: 60_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleOutcome<T> {
    pub plan: Plan<T>,
    pub makespan_ms: T,
    /// False when the time budget ran out before the search finished.
    pub optimal: bool,
    /// Complete schedules simulated.
    pub explored: usize,
}

/// Minimum-makespan plan for a fixed combination. Executes stay on the
/// execute queue in layer order and setups sit where the heuristic puts
/// them; every placement and ordering of prep bundles is searched.
pub fn optimal_schedule<T: Scalar>(
    profile: &ModelProfile<T>,
    combo: &[Choice],
    platform: &PlatformConfig<T>,
    limits: &OracleLimits,
    shader_cache: bool,
) -> Result<OracleOutcome<T>> {
    search(profile, combo, platform, limits, shader_cache, true)
}

/// Same search space as [`optimal_schedule`] without bounds or pruning.
pub fn enumerate_schedules<T: Scalar>(
    profile: &ModelProfile<T>,
    combo: &[Choice],
    platform: &PlatformConfig<T>,
    limits: &OracleLimits,
    shader_cache: bool,
) -> Result<OracleOutcome<T>> {
    search(profile, combo, platform, limits, shader_cache, false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Item {
    Bundle(usize),
    Exec(usize),
}

struct Search<T> {
    graph: OperationGraph<T>,
    base: Plan<T>,
    platform: PlatformConfig<T>,
    opts: SimOptions,
    pruning: bool,
    m: usize,
    exec_floor: T,
    setup_heads: Vec<Vec<OpId>>,
    head_ms: Vec<T>,
    big_setup: Vec<OpId>,
    big_setup_ms: T,
    prep_big: Vec<T>,
    prep_little: Vec<T>,
    deadline: Instant,
    timed_out: bool,
    best: Option<(T, Plan<T>)>,
    explored: usize,
}

fn search<T: Scalar>(
    profile: &ModelProfile<T>,
    combo: &[Choice],
    platform: &PlatformConfig<T>,
    limits: &OracleLimits,
    shader_cache: bool,
    pruning: bool,
) -> Result<OracleOutcome<T>> {
    if limits.max_ops < 1 {
        return Err(Error::validation("max_ops must be at least 1"));
    }
    let graph = build_operation_graph(profile, combo)?;
    let platform = platform.without_load();
    platform.validate()?;
    let m = platform.little_cores;
    let ops = graph.nodes.iter().filter(|n| n.layer > 0).count();
    if ops > limits.max_ops {
        return Err(Error::LimitsExceeded(format!(
            "{ops} operations, limit {}",
            limits.max_ops
        )));
    }
    if m + 1 > limits.max_cores {
        return Err(Error::LimitsExceeded(format!(
            "{} queues, limit {}",
            m + 1,
            limits.max_cores
        )));
    }
    if graph.mode == Mode::Gpu && m == 0 {
        return Err(Error::validation(
            "gpu mode needs at least one CPU core for preparation",
        ));
    }

    let n = graph.n_layers;
    let mut setup_heads = vec![Vec::new(); m];
    let mut big_setup = Vec::new();
    match graph.mode {
        Mode::Cpu => big_setup.extend(graph.setup_ops().map(|s| s.op_id)),
        Mode::Gpu => {
            if let Some(a) = graph.setup_op(SetupStage::MemoryAlloc) {
                setup_heads[0].push(a);
            }
            if let Some(d) = graph.setup_op(SetupStage::GpuDriverInit) {
                setup_heads[m - 1].push(d);
            }
        }
    }
    let head_ms = setup_heads
        .iter()
        .map(|h| {
            h.iter()
                .map(|&o| graph.op_ms(o, ProcessorClass::LittleCore, shader_cache))
                .sum()
        })
        .collect();
    let big_setup_ms = big_setup
        .iter()
        .map(|&o| graph.op_ms(o, ProcessorClass::BigCluster, shader_cache))
        .sum();
    let mut s = Search {
        base: Plan::empty(profile, combo.to_vec(), m)?,
        platform,
        opts: SimOptions {
            stealing: false,
            shader_cache,
        },
        pruning,
        m,
        exec_floor: graph.critical_setup_ms() + graph.total_exec_ms(),
        setup_heads,
        head_ms,
        big_setup,
        big_setup_ms,
        prep_big: (1..=n)
            .map(|l| graph.prep_ms(l, ProcessorClass::BigCluster, shader_cache))
            .collect(),
        prep_little: (1..=n)
            .map(|l| graph.prep_ms(l, ProcessorClass::LittleCore, shader_cache))
            .collect(),
        deadline: Instant::now() + Duration::from_millis(limits.time_budget_ms),
        timed_out: false,
        best: None,
        explored: 0,
        graph,
    };
    if pruning {
        // The sequential plan lies inside the search space, so it is a
        // valid starting incumbent.
        let mut seq = sequential_plan(profile, &s.graph, combo, &s.platform)?;
        let ms = sim::run(&seq, &s.graph, &s.platform, s.opts)?.makespan_ms;
        seq.predicted_makespan_ms = ms;
        s.best = Some((ms, seq));
    }

    let mut used = vec![false; n];
    let mut q0 = Vec::new();
    match s.graph.mode {
        Mode::Cpu => s.fill_q0(&mut q0, &mut used, 1)?,
        Mode::Gpu => {
            q0.extend((1..=n).map(Item::Exec));
            let mut littles = vec![Vec::new(); m];
            s.fill_little(&q0, &mut littles, &mut used, 0)?;
        }
    }
    let (makespan_ms, plan) = s.best.expect("search space is never empty");
    Ok(OracleOutcome {
        plan,
        makespan_ms,
        optimal: !s.timed_out,
        explored: s.explored,
    })
}

impl<T: Scalar> Search<T> {
    fn pruned(&self, bound: T) -> bool {
        self.pruning
            && self
                .best
                .as_ref()
                .is_some_and(|(b, _)| !bound.definitely_lt(*b))
    }

    fn q0_ms(&self, q0: &[Item]) -> T {
        let body: T = q0
            .iter()
            .map(|it| match *it {
                Item::Bundle(l) => self.prep_big[l - 1],
                Item::Exec(l) => self.graph.exec_ms(l),
            })
            .sum();
        self.big_setup_ms + body
    }

    /// Builds `Q_0` one item at a time: the next Execute in layer order, or
    /// an unplaced bundle whose Execute has not been placed yet.
    fn fill_q0(&mut self, q0: &mut Vec<Item>, used: &mut [bool], next_exec: usize) -> Result<()> {
        if self.timed_out {
            return Ok(());
        }
        let n = self.graph.n_layers;
        if next_exec > n {
            let mut littles = vec![Vec::new(); self.m];
            return self.fill_little(q0, &mut littles, used, 0);
        }
        if self.pruned(self.exec_floor.max(self.q0_ms(q0))) {
            return Ok(());
        }
        // An Execute may precede its own bundle only if a little core can
        // take the bundle.
        if used[next_exec - 1] || self.m > 0 {
            q0.push(Item::Exec(next_exec));
            self.fill_q0(q0, used, next_exec + 1)?;
            q0.pop();
        }
        for l in next_exec..=n {
            if !used[l - 1] {
                used[l - 1] = true;
                q0.push(Item::Bundle(l));
                self.fill_q0(q0, used, next_exec)?;
                q0.pop();
                used[l - 1] = false;
            }
        }
        Ok(())
    }

    /// Fills little queue `j`: append any unplaced bundle, or close the
    /// queue and move on. The last queue must take everything left.
    fn fill_little(
        &mut self,
        q0: &[Item],
        littles: &mut Vec<Vec<usize>>,
        used: &mut [bool],
        j: usize,
    ) -> Result<()> {
        if self.timed_out {
            return Ok(());
        }
        let n = self.graph.n_layers;
        let remaining = used.iter().filter(|u| !**u).count();
        if remaining == 0 {
            return self.evaluate(q0, littles);
        }
        if j >= self.m {
            return Ok(());
        }
        let queue_ms = self.head_ms[j]
            + littles[j]
                .iter()
                .map(|&l| self.prep_little[l - 1])
                .sum::<T>();
        if self.pruned(self.exec_floor.max(queue_ms)) {
            return Ok(());
        }
        for l in 1..=n {
            if !used[l - 1] {
                used[l - 1] = true;
                littles[j].push(l);
                self.fill_little(q0, littles, used, j)?;
                littles[j].pop();
                used[l - 1] = false;
            }
        }
        if j + 1 < self.m {
            self.fill_little(q0, littles, used, j + 1)?;
        }
        Ok(())
    }

    fn evaluate(&mut self, q0: &[Item], littles: &[Vec<usize>]) -> Result<()> {
        if self.best.is_some() && Instant::now() > self.deadline {
            self.timed_out = true;
            return Ok(());
        }
        let mut plan = self.base.clone();
        plan.big_queue = self.big_setup.clone();
        for it in q0 {
            match *it {
                Item::Bundle(l) => plan.big_queue.extend(self.graph.layer_ops(l).bundle()),
                Item::Exec(l) => plan.big_queue.push(self.graph.layer_ops(l).execute),
            }
        }
        plan.little_queues = littles
            .iter()
            .zip(&self.setup_heads)
            .map(|(q, head)| {
                let mut ops = head.clone();
                ops.extend(q.iter().flat_map(|&l| self.graph.layer_ops(l).bundle()));
                ops
            })
            .collect();
        self.explored += 1;
        let ms = sim::run(&plan, &self.graph, &self.platform, self.opts)?.makespan_ms;
        if self.best.as_ref().is_none_or(|(b, _)| ms.definitely_lt(*b)) {
            plan.predicted_makespan_ms = ms;
            self.best = Some((ms, plan));
        }
        Ok(())
    }
}

/// Small random profile for oracle comparisons. CPU instances get 1..=4
/// layers, GPU instances 1..=3 so the graph stays within the default
/// operation limit. Durations are multiples of 0.5 ms so ties occur.
pub fn random_instance<T: Scalar>(seed: u64, mode: Mode) -> ModelProfile<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half =
        |rng: &mut ChaCha8Rng, lo: u32, hi: u32| T::lit(f64::from(rng.random_range(lo..=hi)) * 0.5);
    let n = rng.random_range(1..=if mode == Mode::Gpu { 3 } else { 4 });
    let mut layers = Vec::with_capacity(n);
    for i in 1..=n {
        let read = half(&mut rng, 1, 12);
        let transform = if rng.random_bool(0.25) {
            T::zero()
        } else {
            half(&mut rng, 1, 16)
        };
        let exec = half(&mut rng, 1, 10);
        let big_scale = half(&mut rng, 1, 2);
        let mut k = KernelVariant::symmetric("k", read, transform, read, exec).with_big_prep(
            read * big_scale,
            transform * big_scale,
            read * big_scale,
        );
        if mode == Mode::Gpu {
            let miss = half(&mut rng, 0, 8);
            k = k.with_gpu(
                exec,
                PipelineCost {
                    hit: miss / T::lit(4.0),
                    miss,
                },
            );
        }
        let preds = match i {
            1 => Vec::new(),
            _ if rng.random_bool(0.75) => vec![i - 1],
            _ => vec![rng.random_range(1..i)],
        };
        layers.push(LayerSpec::new(i, "op", preds, vec![k]));
    }
    let setup = match mode {
        Mode::Cpu => SetupCosts::cpu(half(&mut rng, 0, 4)),
        Mode::Gpu => SetupCosts::gpu(half(&mut rng, 0, 4), half(&mut rng, 1, 20)),
    };
    ModelProfile::new(format!("random-{seed}"), mode, setup, layers)
        .expect("generated profile is valid")
}

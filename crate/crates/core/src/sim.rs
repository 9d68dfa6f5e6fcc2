//! Fluid-rate discrete-event simulation of a plan.
//!
//! Each core drains its queue in order. An operation starts once it is at
//! the head of its core's queue and every precursor has finished. Running
//! disk reads share `disk_capacity` (rate `min(1, cap / n)`), transforms
//! share `mem_capacity`, compute runs at rate 1; background load scales a
//! core's rate by `1 - u`. Rates are piecewise constant between events, so
//! end times are exact under this model.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{OpDurations, OpId, OpKind, OperationGraph, ResourceClass};
use crate::plan::Plan;
use crate::platform::{CoreId, PlatformConfig};
use crate::profile::Mode;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub stealing: bool,
    pub shader_cache: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TimelineEntry<T> {
    pub op_id: OpId,
    pub layer: usize,
    pub kind: OpKind,
    pub core: CoreId,
    pub start_ms: T,
    pub end_ms: T,
    /// Time spent at the head of the queue waiting for precursors or load.
    pub stalled_ms: T,
    /// Actual over nominal duration; 1 when uncontended.
    pub slowdown_factor: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Steal<T> {
    pub op_id: OpId,
    pub from_core: CoreId,
    pub to_core: CoreId,
    pub time_ms: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimReport<T> {
    pub makespan_ms: T,
    /// One entry per operation, ordered by op id.
    pub timeline: Vec<TimelineEntry<T>>,
    pub per_core_idle_ms: BTreeMap<CoreId, T>,
    pub steals: Vec<Steal<T>>,
    pub storage_overhead_bytes: u64,
}

/// A prep bundle injected into an idle window of a core's queue.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtraBundle<T> {
    pub layer: usize,
    pub core: CoreId,
    /// Earliest start.
    pub release_ms: T,
    /// Number of planned ops on `core` that run before the bundle.
    pub after_ops: usize,
    pub ops: Vec<(OpKind, OpDurations<T>)>,
}

/// Simulates `plan`, applying any background load but without stealing.
pub fn simulate<T: Scalar>(
    plan: &Plan<T>,
    graph: &OperationGraph<T>,
    platform: &PlatformConfig<T>,
) -> Result<SimReport<T>> {
    run(plan, graph, platform, SimOptions::default())
}

/// Simulates under the platform's background load, optionally with stealing.
pub fn simulate_with_load<T: Scalar>(
    plan: &Plan<T>,
    graph: &OperationGraph<T>,
    platform: &PlatformConfig<T>,
    stealing: bool,
) -> Result<SimReport<T>> {
    run(
        plan,
        graph,
        platform,
        SimOptions {
            stealing,
            ..Default::default()
        },
    )
}

/// Simulates a GPU-mode plan; `shader_cache` swaps pipeline creation to its hit cost.
pub fn simulate_gpu<T: Scalar>(
    plan: &Plan<T>,
    graph: &OperationGraph<T>,
    platform: &PlatformConfig<T>,
    shader_cache: bool,
) -> Result<SimReport<T>> {
    if graph.mode != Mode::Gpu {
        return Err(Error::ModeMismatch { expected: "gpu" });
    }
    run(
        plan,
        graph,
        platform,
        SimOptions {
            shader_cache,
            ..Default::default()
        },
    )
}

pub fn run<T: Scalar>(
    plan: &Plan<T>,
    graph: &OperationGraph<T>,
    platform: &PlatformConfig<T>,
    opts: SimOptions,
) -> Result<SimReport<T>> {
    simulate_with_extras(plan, graph, platform, opts, &[])
}

/// Simulates `plan` with additional prep bundles placed in core queues.
/// Extra ops get ids after the graph's ops and appear in the timeline.
pub fn simulate_with_extras<T: Scalar>(
    plan: &Plan<T>,
    graph: &OperationGraph<T>,
    platform: &PlatformConfig<T>,
    opts: SimOptions,
    extras: &[ExtraBundle<T>],
) -> Result<SimReport<T>> {
    platform.validate()?;
    plan.check_partition(graph)?;
    if plan.mode != graph.mode {
        return Err(Error::ModeMismatch {
            expected: graph.mode.as_str(),
        });
    }
    if plan.little_queues.len() > platform.little_cores {
        return Err(Error::validation(format!(
            "plan uses {} little queues but the platform has {} little cores",
            plan.little_queues.len(),
            platform.little_cores
        )));
    }
    let mut engine = Engine::new(plan, graph, platform, opts, extras)?;
    engine.run()?;
    Ok(engine.report(graph, plan.storage_overhead_bytes))
}

struct Task<T> {
    layer: usize,
    kind: OpKind,
    resource: ResourceClass,
    duration: OpDurations<T>,
    precursors: Vec<usize>,
    release: T,
    /// Ops sharing a key form one prep bundle; stealing moves whole bundles.
    bundle: Option<usize>,
}

struct Running<T> {
    task: usize,
    remaining: T,
}

struct Core<T> {
    id: CoreId,
    queue: VecDeque<usize>,
    running: Option<Running<T>>,
    free_since: T,
}

struct Done<T> {
    core: CoreId,
    start: T,
    end: T,
    stalled: T,
    nominal: T,
}

struct Engine<'a, T> {
    tasks: Vec<Task<T>>,
    cores: Vec<Core<T>>,
    platform: &'a PlatformConfig<T>,
    opts: SimOptions,
    now: T,
    started: Vec<Option<(CoreId, T, T, T)>>,
    done: Vec<Option<Done<T>>>,
    n_done: usize,
    steals: Vec<Steal<T>>,
    bundle_len: BTreeMap<usize, usize>,
}

impl<'a, T: Scalar> Engine<'a, T> {
    fn new(
        plan: &Plan<T>,
        graph: &OperationGraph<T>,
        platform: &'a PlatformConfig<T>,
        opts: SimOptions,
        extras: &[ExtraBundle<T>],
    ) -> Result<Self> {
        let mut tasks: Vec<Task<T>> = graph
            .nodes
            .iter()
            .map(|n| {
                let mut duration = n.duration;
                if opts.shader_cache {
                    if let Some(hit) = n.hit_duration {
                        duration = OpDurations {
                            little: duration.little.map(|_| hit),
                            big: duration.big.map(|_| hit),
                            gpu: duration.gpu.map(|_| hit),
                        };
                    }
                }
                Task {
                    layer: n.layer,
                    kind: n.kind,
                    resource: n.resource,
                    duration,
                    precursors: n.precursors.clone(),
                    release: T::zero(),
                    bundle: n.kind.is_prep().then_some(n.layer),
                }
            })
            .collect();

        let mut queues: Vec<(CoreId, Vec<usize>)> =
            plan.queues().map(|(c, q)| (c, q.to_vec())).collect();
        for j in plan.little_queues.len() + 1..=platform.little_cores {
            queues.push((CoreId::Little(j), Vec::new()));
        }

        // Extras are inserted back to front so earlier positions stay valid.
        let mut order: Vec<usize> = (0..extras.len()).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (&extras[a], &extras[b]);
            eb.after_ops.cmp(&ea.after_ops).then(
                eb.release_ms
                    .partial_cmp(&ea.release_ms)
                    .expect("finite release"),
            )
        });
        let mut extra_ids = vec![Vec::new(); extras.len()];
        for (k, e) in extras.iter().enumerate() {
            let key = graph.n_layers + 1 + k;
            let mut prev: Option<usize> = None;
            for &(kind, duration) in &e.ops {
                let id = tasks.len();
                tasks.push(Task {
                    layer: e.layer,
                    kind,
                    resource: kind.resource_class(),
                    duration,
                    precursors: prev.into_iter().collect(),
                    release: e.release_ms,
                    bundle: Some(key),
                });
                extra_ids[k].push(id);
                prev = Some(id);
            }
        }
        for k in order {
            let e = &extras[k];
            let q = queues
                .iter_mut()
                .find(|(c, _)| *c == e.core)
                .ok_or_else(|| {
                    Error::validation(format!("extra bundle targets unknown core {}", e.core))
                })?;
            let at = e.after_ops.min(q.1.len());
            q.1.splice(at..at, extra_ids[k].iter().copied());
        }

        for (core, q) in &queues {
            for &id in q {
                if tasks[id].duration.on(core.class()).is_none() {
                    return Err(Error::validation(format!(
                        "op {id} ({}) cannot run on {core}",
                        tasks[id].kind
                    )));
                }
            }
        }

        let cores = queues
            .into_iter()
            .map(|(id, q)| Core {
                id,
                queue: q.into(),
                running: None,
                free_since: T::zero(),
            })
            .collect();
        let n = tasks.len();
        let mut bundle_len = BTreeMap::new();
        for key in tasks.iter().filter_map(|t| t.bundle) {
            *bundle_len.entry(key).or_insert(0) += 1;
        }
        Ok(Engine {
            tasks,
            cores,
            platform,
            opts,
            now: T::zero(),
            started: (0..n).map(|_| None).collect(),
            done: (0..n).map(|_| None).collect(),
            n_done: 0,
            steals: Vec::new(),
            bundle_len,
        })
    }

    fn ready(&self, task: usize) -> bool {
        let t = &self.tasks[task];
        t.release <= self.now + T::tolerance()
            && t.precursors.iter().all(|&p| self.done[p].is_some())
    }

    fn availability(&self, core: CoreId) -> T {
        self.platform.availability(core, self.now)
    }

    fn nominal(&self, task: usize, core: CoreId) -> T {
        self.tasks[task]
            .duration
            .on(core.class())
            .unwrap_or_default()
    }

    fn start(&mut self, c: usize) {
        let core = &mut self.cores[c];
        let task = core
            .queue
            .pop_front()
            .expect("start called with a queued head");
        let remaining = self.tasks[task]
            .duration
            .on(core.id.class())
            .unwrap_or_default();
        let stalled = (self.now - core.free_since).max(T::zero());
        self.started[task] = Some((core.id, self.now, stalled, remaining));
        core.running = Some(Running { task, remaining });
    }

    /// Starts every runnable head and performs steals until nothing changes.
    fn dispatch(&mut self) {
        loop {
            let mut changed = false;
            for c in 0..self.cores.len() {
                let core = &self.cores[c];
                if core.running.is_some() || self.availability(core.id) <= T::zero() {
                    continue;
                }
                if let Some(&head) = core.queue.front() {
                    if self.ready(head) {
                        self.start(c);
                        changed = true;
                    }
                }
            }
            if self.opts.stealing {
                for c in 0..self.cores.len() {
                    if self.try_steal(c) {
                        self.start(c);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Leading ops of `c`'s queue when they form a whole, unstarted bundle.
    fn head_bundle(&self, c: usize) -> Option<Vec<usize>> {
        let q = &self.cores[c].queue;
        let key = self.tasks[*q.front()?].bundle?;
        let ops: Vec<usize> = q
            .iter()
            .copied()
            .take_while(|&t| self.tasks[t].bundle == Some(key))
            .collect();
        (ops.len() == self.bundle_len[&key]).then_some(ops)
    }

    fn remaining_time(&self, c: usize) -> T {
        let core = &self.cores[c];
        let work = core.running.as_ref().map_or(T::zero(), |r| r.remaining)
            + core
                .queue
                .iter()
                .map(|&t| self.nominal(t, core.id))
                .sum::<T>();
        self.finish_at(core.id, work)
    }

    /// When `core` would finish `work` ms of nominal work started now,
    /// following its background load but ignoring contention.
    fn finish_at(&self, core: CoreId, work: T) -> T {
        let mut t = self.now;
        let mut left = work;
        loop {
            let avail = self.platform.availability(core, t);
            let boundary = self.platform.next_load_boundary(t);
            if avail > T::zero() && boundary.is_none_or(|b| left / avail <= b - t) {
                return t + left / avail;
            }
            let Some(b) = boundary else {
                return T::infinity();
            };
            left = left - avail * (b - t);
            t = b;
        }
    }

    /// An idle core takes the head bundle of a loaded core when that
    /// finishes the bundle sooner than its owner would.
    fn try_steal(&mut self, thief: usize) -> bool {
        let thief_core = &self.cores[thief];
        let thief_avail = self.availability(thief_core.id);
        if thief_core.running.is_some() || thief_avail <= T::zero() {
            return false;
        }
        let own_head = thief_core.queue.front().copied();
        if own_head.is_some_and(|h| self.ready(h)) {
            return false;
        }
        // A little core steals only once its own queue is drained, so the
        // steal cannot delay its own work. The big cluster only takes the
        // bundle its next Execute waits for; the GPU never runs preparation.
        let wanted_layer = match thief_core.id {
            CoreId::Gpu => return false,
            CoreId::BigCluster => match own_head {
                Some(h) if self.tasks[h].kind == OpKind::Execute => Some(self.tasks[h].layer),
                _ => return false,
            },
            CoreId::Little(_) if own_head.is_some() => return false,
            CoreId::Little(_) => None,
        };

        let mut best: Option<(usize, Vec<usize>, T)> = None;
        for victim in 0..self.cores.len() {
            if victim == thief
                || self.platform.utilization(self.cores[victim].id, self.now) <= T::zero()
            {
                continue;
            }
            let Some(bundle) = self.head_bundle(victim) else {
                continue;
            };
            if !self.ready(bundle[0]) {
                continue;
            }
            if wanted_layer.is_some_and(|l| self.tasks[bundle[0]].layer != l) {
                continue;
            }
            let victim_id = self.cores[victim].id;
            let thief_id = self.cores[thief].id;
            if bundle
                .iter()
                .any(|&t| self.tasks[t].duration.on(thief_id.class()).is_none())
            {
                continue;
            }
            let thief_finish = self.finish_at(
                thief_id,
                bundle.iter().map(|&t| self.nominal(t, thief_id)).sum(),
            );
            let victim_finish = self.finish_at(
                victim_id,
                self.cores[victim]
                    .running
                    .as_ref()
                    .map_or(T::zero(), |r| r.remaining)
                    + bundle
                        .iter()
                        .map(|&t| self.nominal(t, victim_id))
                        .sum::<T>(),
            );
            if !thief_finish.definitely_lt(victim_finish) {
                continue;
            }
            let load = self.remaining_time(victim);
            if best.as_ref().is_none_or(|(_, _, b)| load > *b) {
                best = Some((victim, bundle, load));
            }
        }
        let Some((victim, bundle, _)) = best else {
            return false;
        };
        let from = self.cores[victim].id;
        let to = self.cores[thief].id;
        for _ in &bundle {
            self.cores[victim].queue.pop_front();
        }
        for &t in bundle.iter().rev() {
            self.cores[thief].queue.push_front(t);
        }
        for &t in &bundle {
            self.steals.push(Steal {
                op_id: t,
                from_core: from,
                to_core: to,
                time_ms: self.now,
            });
        }
        true
    }

    fn rate(&self, core: &Core<T>, task: usize, n_disk: usize, n_mem: usize) -> T {
        let share = |cap: T, n: usize| {
            let n = T::from_usize(n.max(1)).expect("core count fits scalar");
            (cap / n).min(T::one())
        };
        let contention = match self.tasks[task].resource {
            ResourceClass::DiskIo => share(self.platform.disk_capacity, n_disk),
            ResourceClass::MemBandwidth => share(self.platform.mem_capacity, n_mem),
            ResourceClass::Compute => T::one(),
        };
        contention * self.availability(core.id)
    }

    fn run(&mut self) -> Result<()> {
        let n = self.tasks.len();
        loop {
            self.dispatch();
            if self.n_done == n {
                return Ok(());
            }

            let active = |res: ResourceClass| {
                self.cores
                    .iter()
                    .filter(|c| self.availability(c.id) > T::zero())
                    .filter_map(|c| c.running.as_ref())
                    .filter(|r| self.tasks[r.task].resource == res)
                    .count()
            };
            let (n_disk, n_mem) = (
                active(ResourceClass::DiskIo),
                active(ResourceClass::MemBandwidth),
            );
            let rates: Vec<Option<T>> = self
                .cores
                .iter()
                .map(|c| {
                    c.running
                        .as_ref()
                        .map(|r| self.rate(c, r.task, n_disk, n_mem))
                })
                .collect();

            let mut dt = T::infinity();
            for (core, rate) in self.cores.iter().zip(&rates) {
                if let (Some(r), Some(rate)) = (&core.running, rate) {
                    if r.remaining <= T::tolerance() {
                        dt = T::zero();
                    } else if *rate > T::zero() {
                        dt = dt.min(r.remaining / *rate);
                    }
                }
            }
            if let Some(b) = self.platform.next_load_boundary(self.now) {
                dt = dt.min(b - self.now);
            }
            for core in &self.cores {
                if let Some(&h) = core.queue.front() {
                    let rel = self.tasks[h].release;
                    if rel > self.now + T::tolerance() {
                        dt = dt.min(rel - self.now);
                    }
                }
            }
            if !dt.is_finite() {
                return Err(Error::DeadlockDetected {
                    time_ms: self.now.to_f64_lossy(),
                    pending: n - self.n_done,
                });
            }

            self.now = self.now + dt;
            let mut finished = Vec::new();
            for (c, rate) in rates.iter().enumerate() {
                let Some(rate) = *rate else { continue };
                let running = self.cores[c]
                    .running
                    .as_mut()
                    .expect("rate implies running");
                running.remaining = running.remaining - rate * dt;
                let tol = T::tolerance() * (T::one() + rate);
                if running.remaining <= tol {
                    finished.push((running.task, c));
                }
            }
            finished.sort_unstable();
            for (task, c) in finished {
                let (core, start, stalled, nominal) =
                    self.started[task].expect("finished ops were started");
                self.done[task] = Some(Done {
                    core,
                    start,
                    end: self.now,
                    stalled,
                    nominal,
                });
                self.n_done += 1;
                self.cores[c].running = None;
                self.cores[c].free_since = self.now;
            }
        }
    }

    fn report(self, graph: &OperationGraph<T>, storage_overhead_bytes: u64) -> SimReport<T> {
        let timeline: Vec<TimelineEntry<T>> = self
            .done
            .iter()
            .enumerate()
            .map(|(id, d)| {
                let d = d.as_ref().expect("all ops finished");
                let span = d.end - d.start;
                let slowdown = if d.nominal > T::tolerance() {
                    (span / d.nominal).max(T::one())
                } else {
                    T::one()
                };
                TimelineEntry {
                    op_id: id,
                    layer: self.tasks[id].layer,
                    kind: self.tasks[id].kind,
                    core: d.core,
                    start_ms: d.start,
                    end_ms: d.end,
                    stalled_ms: d.stalled,
                    slowdown_factor: slowdown,
                }
            })
            .collect();
        let makespan_ms = graph
            .sinks()
            .iter()
            .map(|&s| timeline[s].end_ms)
            .fold(T::zero(), T::max);
        let mut per_core_idle_ms = BTreeMap::new();
        for core in &self.cores {
            let busy: T = timeline
                .iter()
                .filter(|e| e.core == core.id)
                .map(|e| e.end_ms - e.start_ms)
                .sum();
            per_core_idle_ms.insert(core.id, (makespan_ms - busy).max(T::zero()));
        }
        SimReport {
            makespan_ms,
            timeline,
            per_core_idle_ms,
            steals: self.steals,
            storage_overhead_bytes,
        }
    }
}

/// Which scheduling constraint a timeline breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// An op started before one of its precursors finished.
    Precedence,
    /// Two ops overlapped on one core.
    CoreCapacity,
    /// More cores busy than the platform has.
    TotalCores,
    /// An op is missing from or duplicated in the timeline.
    Coverage,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Violation<T> {
    pub constraint: Constraint,
    pub ops: Vec<OpId>,
    pub at_ms: T,
}

/// Independent checker for a simulated (or hand-built) timeline.
pub fn validate_feasibility<T: Scalar>(
    report: &SimReport<T>,
    graph: &OperationGraph<T>,
    platform: &PlatformConfig<T>,
) -> Vec<Violation<T>> {
    let tol = T::tolerance() * T::lit(1e3);
    let mut out = Vec::new();
    let mut by_op: Vec<Vec<&TimelineEntry<T>>> = vec![Vec::new(); graph.len()];
    for e in &report.timeline {
        if let Some(slot) = by_op.get_mut(e.op_id) {
            slot.push(e);
        }
    }
    for (op, entries) in by_op.iter().enumerate() {
        if entries.len() != 1 {
            out.push(Violation {
                constraint: Constraint::Coverage,
                ops: vec![op],
                at_ms: T::zero(),
            });
        }
    }
    for node in &graph.nodes {
        let Some(e) = by_op[node.op_id].first() else {
            continue;
        };
        for &p in &node.precursors {
            if let Some(pe) = by_op[p].first() {
                if e.start_ms < pe.end_ms - tol {
                    out.push(Violation {
                        constraint: Constraint::Precedence,
                        ops: vec![p, node.op_id],
                        at_ms: e.start_ms,
                    });
                }
            }
        }
    }

    let mut per_core: BTreeMap<CoreId, Vec<&TimelineEntry<T>>> = BTreeMap::new();
    for e in report
        .timeline
        .iter()
        .filter(|e| e.end_ms - e.start_ms > tol)
    {
        per_core.entry(e.core).or_default().push(e);
    }
    for entries in per_core.values_mut() {
        entries.sort_by(|a, b| {
            a.start_ms
                .partial_cmp(&b.start_ms)
                .expect("finite times")
                .then(a.op_id.cmp(&b.op_id))
        });
        for w in entries.windows(2) {
            if w[1].start_ms < w[0].end_ms - tol {
                out.push(Violation {
                    constraint: Constraint::CoreCapacity,
                    ops: vec![w[0].op_id, w[1].op_id],
                    at_ms: w[1].start_ms,
                });
            }
        }
    }

    let limit = platform.little_cores + platform.big_cores;
    for e in &report.timeline {
        if e.end_ms - e.start_ms <= tol {
            continue;
        }
        let t = e.start_ms;
        let active: Vec<OpId> = report
            .timeline
            .iter()
            .filter(|o| o.start_ms <= t + tol && t < o.end_ms - tol && o.end_ms - o.start_ms > tol)
            .map(|o| o.op_id)
            .collect();
        if active.len() > limit {
            out.push(Violation {
                constraint: Constraint::TotalCores,
                ops: active,
                at_ms: t,
            });
        }
    }
    out
}

/// Lower bound every makespan must respect: serialized executes after the
/// longest setup stage.
pub fn makespan_lower_bound<T: Scalar>(graph: &OperationGraph<T>) -> T {
    graph.critical_setup_ms() + graph.total_exec_ms()
}

pub const GANTT_HEADER: &str = "op_id,layer,kind,core,start_ms,end_ms,stalled_ms,slowdown";

/// Gantt rows ordered by start time, then op id.
pub fn gantt_csv<T: Scalar>(report: &SimReport<T>) -> String {
    let mut rows: Vec<&TimelineEntry<T>> = report.timeline.iter().collect();
    rows.sort_by(|a, b| {
        a.start_ms
            .partial_cmp(&b.start_ms)
            .expect("finite times")
            .then(a.op_id.cmp(&b.op_id))
    });
    let mut out = String::from(GANTT_HEADER);
    out.push('\n');
    for e in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            e.op_id,
            e.layer,
            e.kind,
            e.core,
            e.start_ms.to_f64_lossy(),
            e.end_ms.to_f64_lossy(),
            e.stalled_ms.to_f64_lossy(),
            e.slowdown_factor.to_f64_lossy()
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct StageTotals<T> {
    pub setup: T,
    pub read: T,
    pub transform: T,
    pub pipeline: T,
    pub execute: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Summary<T> {
    pub makespan_ms: T,
    pub stage_totals_ms: StageTotals<T>,
    pub idle_ms: BTreeMap<CoreId, T>,
    pub steals: Vec<Steal<T>>,
    pub storage_overhead_bytes: u64,
}

pub fn summarize<T: Scalar>(report: &SimReport<T>) -> Summary<T> {
    let total = |pred: fn(OpKind) -> bool| -> T {
        report
            .timeline
            .iter()
            .filter(|e| pred(e.kind))
            .fold(T::zero(), |acc, e| acc + (e.end_ms - e.start_ms))
    };
    Summary {
        makespan_ms: report.makespan_ms,
        stage_totals_ms: StageTotals {
            setup: total(|k| matches!(k, OpKind::Setup(_))),
            read: total(|k| k == OpKind::Read),
            transform: total(|k| k == OpKind::Transform),
            pipeline: total(|k| k == OpKind::PipelineCreate),
            execute: total(|k| k == OpKind::Execute),
        },
        idle_ms: report.per_core_idle_ms.clone(),
        steals: report.steals.clone(),
        storage_overhead_bytes: report.storage_overhead_bytes,
    }
}

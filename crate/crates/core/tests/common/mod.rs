#![allow(dead_code)]

use coldsched::graph::{OpId, OperationGraph, SetupStage};
use coldsched::platform::CoreId;
use coldsched::{Mode, Plan, ProcessorClass, Profile};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random deadlock-free plan: each bundle goes to a random queue; the
/// execute queue holds its bundles in layer order ahead of every Execute,
/// little queues hold theirs in random order.
pub fn random_plan(
    profile: &Profile,
    graph: &OperationGraph<f64>,
    m: usize,
    seed: u64,
) -> Plan<f64> {
    let mut rng = rng(seed);
    let combo = profile.default_combo();
    let mut plan = Plan::empty(profile, combo, m).unwrap();
    let mut littles: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut big_bundles = Vec::new();
    for l in 1..=graph.n_layers {
        let on_big = graph.mode == Mode::Cpu && (m == 0 || rng.random_bool(0.3));
        if on_big {
            big_bundles.push(l);
        } else {
            littles[rng.random_range(0..m)].push(l);
        }
    }
    for q in &mut littles {
        q.shuffle(&mut rng);
    }
    let setups: Vec<OpId> = graph.setup_ops().map(|s| s.op_id).collect();
    let executes: Vec<OpId> = graph.executes().collect();
    let bundles = |ls: &[usize]| {
        ls.iter()
            .flat_map(|&l| graph.layer_ops(l).bundle())
            .collect::<Vec<_>>()
    };
    match graph.mode {
        Mode::Cpu => {
            plan.big_queue = [setups, bundles(&big_bundles), executes].concat();
            plan.little_queues = littles.iter().map(|q| bundles(q)).collect();
        }
        Mode::Gpu => {
            plan.big_queue = executes;
            plan.little_queues = littles.iter().map(|q| bundles(q)).collect();
            if let Some(a) = graph.setup_op(SetupStage::MemoryAlloc) {
                plan.little_queues[0].insert(0, a);
            }
            if let Some(d) = graph.setup_op(SetupStage::GpuDriverInit) {
                plan.little_queues[m - 1].insert(0, d);
            }
        }
    }
    plan
}

/// Straightforward replay without contention or load: each queue runs its
/// ops back to back, each op starting once its core is free and its
/// precursors are done. Returns per-op (start, end).
pub fn replay(
    plan: &Plan<f64>,
    graph: &OperationGraph<f64>,
    shader_cache: bool,
) -> Vec<(f64, f64)> {
    let queues: Vec<(CoreId, Vec<OpId>)> = plan.queues().map(|(c, q)| (c, q.to_vec())).collect();
    let mut times: Vec<Option<(f64, f64)>> = vec![None; graph.len()];
    let mut pos = vec![0usize; queues.len()];
    let mut free = vec![0.0f64; queues.len()];
    loop {
        let mut progressed = false;
        for (k, (core, q)) in queues.iter().enumerate() {
            while pos[k] < q.len() {
                let op = q[pos[k]];
                let node = graph.node(op);
                let preds: Option<Vec<f64>> = node
                    .precursors
                    .iter()
                    .map(|&p| times[p].map(|t| t.1))
                    .collect();
                let Some(preds) = preds else { break };
                let start = preds.into_iter().fold(free[k], f64::max);
                let d = node.duration_on(core.class(), shader_cache).unwrap();
                times[op] = Some((start, start + d));
                free[k] = start + d;
                pos[k] += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    times
        .into_iter()
        .map(|t| t.expect("replay finished every op"))
        .collect()
}

pub fn makespan(graph: &OperationGraph<f64>, times: &[(f64, f64)]) -> f64 {
    graph
        .sinks()
        .iter()
        .map(|&s| times[s].1)
        .fold(0.0, f64::max)
}

pub fn prep_class(mode: Mode) -> ProcessorClass {
    match mode {
        Mode::Cpu => ProcessorClass::BigCluster,
        Mode::Gpu => ProcessorClass::LittleCore,
    }
}

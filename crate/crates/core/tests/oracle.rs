use coldsched::oracle::{
    enumerate_schedules, optimal_schedule, random_instance, sequential_baseline, OracleLimits,
};
use coldsched::sim::{self, SimOptions};
use coldsched::{
    best_plan_for_combo, build_operation_graph, sequential_plan, validate_feasibility, Mode, Plan,
    Platform, Profile, SchedulerConfig,
};

const SEEDS: u64 = 240;

fn feasible(plan: &Plan<f64>, p: &Profile, platform: &Platform) -> f64 {
    let g = build_operation_graph(p, &plan.combo).unwrap();
    let report = sim::run(
        plan,
        &g,
        platform,
        SimOptions {
            stealing: false,
            shader_cache: true,
        },
    )
    .unwrap();
    let v = validate_feasibility(&report, &g, platform);
    assert!(v.is_empty(), "{}: {v:?}", p.model_name);
    report.makespan_ms
}

#[test]
fn optimal_heuristic_sequential_sandwich() {
    let limits = OracleLimits::default();
    for seed in 0..SEEDS {
        let mode = if seed % 3 == 2 { Mode::Gpu } else { Mode::Cpu };
        let p: Profile = random_instance(seed, mode);
        let platform = Platform::new(1 + (seed as usize / 3) % 2, 4);
        let combo = p.default_combo();
        let opt = optimal_schedule(&p, &combo, &platform, &limits, true).unwrap();
        assert!(opt.optimal, "seed {seed} timed out");
        let (heur, g) =
            best_plan_for_combo(&p, &combo, &platform, &SchedulerConfig::default()).unwrap();
        let seq_plan = sequential_plan(&p, &g, &combo, &platform).unwrap();
        let seq = sequential_baseline(&p, &combo, true).unwrap();

        let o = feasible(&opt.plan, &p, &platform);
        let h = feasible(&heur, &p, &platform);
        let s = feasible(&seq_plan, &p, &platform);
        assert!((o - opt.makespan_ms).abs() < 1e-9);
        assert!(o <= h + 1e-9, "seed {seed}: optimal {o} > heuristic {h}");
        assert!(
            h <= seq + 1e-9,
            "seed {seed}: heuristic {h} > sequential {seq}"
        );
        assert!(
            s <= seq + 1e-9,
            "seed {seed}: sequential plan {s} > baseline {seq}"
        );
    }
}

#[test]
fn pruning_does_not_change_the_optimum() {
    let limits = OracleLimits::default();
    for seed in 0..60u64 {
        let mode = if seed % 2 == 0 { Mode::Cpu } else { Mode::Gpu };
        let p: Profile = random_instance(seed, mode);
        let platform = Platform::new(1 + (seed as usize / 2) % 2, 4);
        let combo = p.default_combo();
        let pruned = optimal_schedule(&p, &combo, &platform, &limits, true).unwrap();
        let full = enumerate_schedules(&p, &combo, &platform, &limits, true).unwrap();
        assert!(
            (pruned.makespan_ms - full.makespan_ms).abs() < 1e-9,
            "seed {seed}"
        );
        assert!(pruned.explored <= full.explored);
    }
}

#[test]
fn random_instances_stay_within_limits() {
    for seed in 0..SEEDS {
        for mode in [Mode::Cpu, Mode::Gpu] {
            let p: Profile = random_instance(seed, mode);
            let g = build_operation_graph(&p, &p.default_combo()).unwrap();
            let non_setup = g.len() - g.setup_ops().count();
            assert!(p.n_layers() <= 4 && non_setup <= 12);
        }
    }
}

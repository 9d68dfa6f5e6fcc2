use coldsched::fixtures::{self, CONV_KERNELS, WARM_SWITCH4};
use coldsched::oracle::random_instance;
use coldsched::platform::CoreId;
use coldsched::profile::PipelineCost;
use coldsched::warm::{
    plan_warm_switch, second_inference_latency, simulate_with_warm_preps, third_inference_latency,
    WarmSwitchPlan,
};
use coldsched::{
    best_plan_for_combo, build_operation_graph, generate_plan, simulate, Choice, KernelVariant,
    Mode, Platform, Profile, Report, SchedulerConfig,
};
use proptest::prelude::*;

fn cold(p: &Profile, platform: &Platform) -> (coldsched::Plan64, Report) {
    let cfg = SchedulerConfig::default();
    let plan = generate_plan(p, platform, &cfg).unwrap();
    let g = build_operation_graph(p, &plan.combo).unwrap();
    let opts = coldsched::SimOptions {
        stealing: false,
        shader_cache: true,
    };
    let report = coldsched::sim::run(&plan, &g, platform, opts).unwrap();
    (plan, report)
}

/// Every extra prep lies in a gap of its core's cold timeline.
fn assert_in_idle_gaps(wsp: &WarmSwitchPlan<f64>, report: &Report) {
    for x in &wsp.extra_preps {
        assert!(x.start_ms >= -1e-9 && x.end_ms <= report.makespan_ms + 1e-9);
        assert!(matches!(x.core, CoreId::Little(_)));
        for e in report
            .timeline
            .iter()
            .filter(|e| e.core == x.core && e.end_ms > e.start_ms)
        {
            assert!(
                e.end_ms <= x.start_ms + 1e-9 || e.start_ms >= x.end_ms - 1e-9,
                "{x:?} overlaps {e:?}"
            );
        }
    }
}

fn warm_exec_sum(p: &Profile, combo: &[Choice]) -> f64 {
    p.layers
        .iter()
        .zip(combo)
        .map(|(l, c)| l.candidates[c.kernel].exec_ms(p.mode).unwrap())
        .sum()
}

#[test]
fn fixture_switch_fits_and_settles_at_warm_execute_sum() {
    let p: Profile = fixtures::load(WARM_SWITCH4).unwrap();
    let platform = Platform::new(4, 4);
    let cfg = SchedulerConfig::default();
    let (plan, report) = cold(&p, &platform);
    let wsp = plan_warm_switch(&plan, &report, &p, &platform, cfg.variants).unwrap();
    assert_eq!(wsp.switched_layers(&p), vec![4]);
    assert!(wsp.residual.is_empty());
    assert_eq!(wsp.extra_preps.len(), 1);
    assert_in_idle_gaps(&wsp, &report);
    // 5 + 5 + 5 + 4.5
    let expected = 19.5;
    assert!((warm_exec_sum(&p, &wsp.k_warm) - expected).abs() < 1e-9);
    assert!((second_inference_latency(&wsp, &p, &platform, &cfg).unwrap() - expected).abs() < 1e-9);
    assert!((third_inference_latency(&wsp, &p).unwrap() - expected).abs() < 1e-9);
    let again = simulate(
        &plan,
        &build_operation_graph(&p, &plan.combo).unwrap(),
        &platform,
    )
    .unwrap();
    assert!((again.makespan_ms - report.makespan_ms).abs() < 1e-9);
}

#[test]
fn conv_layer_switches_to_fastest_executing_kernel() {
    let p: Profile = fixtures::load(CONV_KERNELS).unwrap();
    let platform = Platform::new(4, 4);
    let cfg = SchedulerConfig::default();
    let (plan, report) = cold(&p, &platform);
    let wsp = plan_warm_switch(&plan, &report, &p, &platform, cfg.variants).unwrap();
    let entries = wsp.to_json_value(&p);
    assert_eq!(entries["k_cold"][0]["kernel"], "3x3s1-winograd");
    assert_eq!(entries["k_warm"][0]["kernel"], "3x3s1-winograd-pack4");
    assert_in_idle_gaps(&wsp, &report);
    assert!((third_inference_latency(&wsp, &p).unwrap() - 2.98).abs() < 1e-9);
    // The cold read (4.12) and execute (3.37) leave 7.49 ms; the warm read
    // alone needs 5.23 and would share the disk with the cold read, so the
    // warm kernel is prepared during the second run: 5.23 + 2.98.
    assert_eq!(wsp.residual, vec![1]);
    let second = second_inference_latency(&wsp, &p, &platform, &cfg).unwrap();
    assert!((second - 8.21).abs() < 1e-9, "{second}");
}

#[test]
fn no_little_cores_leaves_everything_residual() {
    let p: Profile = fixtures::load(WARM_SWITCH4).unwrap();
    let platform = Platform::new(0, 4);
    let cfg = SchedulerConfig::default();
    let (plan, report) = cold(&p, &platform);
    let wsp = plan_warm_switch(&plan, &report, &p, &platform, cfg.variants).unwrap();
    assert_eq!(wsp.residual, vec![4]);
    assert!(wsp.extra_preps.is_empty());
    // One queue: layer 4's 17 ms read, then all four executes.
    let second = second_inference_latency(&wsp, &p, &platform, &cfg).unwrap();
    assert!((second - (17.0 + 19.5)).abs() < 1e-9, "{second}");
}

/// Random chain where every layer also offers a faster-executing kernel
/// with a heavier preparation.
fn two_kernel_instance(seed: u64, gpu: bool) -> Profile {
    let mode = if gpu { Mode::Gpu } else { Mode::Cpu };
    let mut p: Profile = random_instance(seed, mode);
    for l in &mut p.layers {
        let base = l.candidates[0].clone();
        let exec = base.exec_ms(mode).unwrap();
        let read = base.read_raw_ms.little * 3.0;
        let mut k = KernelVariant::symmetric("fast-exec", read, 0.0, read, exec * 0.5);
        if gpu {
            k = k.with_gpu(
                exec * 0.5,
                PipelineCost {
                    hit: 0.0,
                    miss: 1.0,
                },
            );
        }
        l.candidates.push(k);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn warm_switch_invariants(seed in any::<u64>(), gpu: bool, m in 0usize..=2) {
        let p = two_kernel_instance(seed, gpu);
        let m = if gpu { m.max(1) } else { m };
        let platform = Platform::new(m, 4);
        let cfg = SchedulerConfig::default();
        let combo = p.default_combo();
        let (plan, g) = best_plan_for_combo(&p, &combo, &platform, &cfg).unwrap();
        let report = coldsched::sim::run(&plan, &g, &platform, coldsched::SimOptions { stealing: false, shader_cache: true }).unwrap();
        let wsp = plan_warm_switch(&plan, &report, &p, &platform, cfg.variants).unwrap();

        let switched = wsp.switched_layers(&p);
        let mut covered: Vec<usize> = wsp.extra_preps.iter().map(|x| x.layer).chain(wsp.residual.iter().copied()).collect();
        covered.sort_unstable();
        prop_assert_eq!(covered, switched);
        assert_in_idle_gaps(&wsp, &report);
        let injected = simulate_with_warm_preps(&plan, &wsp, &p, &platform, true).unwrap();
        for (a, b) in injected.timeline.iter().zip(&report.timeline) {
            prop_assert!(a.core == b.core && (a.start_ms - b.start_ms).abs() < 1e-9 && (a.end_ms - b.end_ms).abs() < 1e-9);
        }
        prop_assert!((injected.makespan_ms - report.makespan_ms).abs() < 1e-9);
        for (x, e) in wsp.extra_preps.iter().zip(injected.timeline[g.len()..].chunk_by(|a, b| a.layer == b.layer)) {
            prop_assert!((e[0].start_ms - x.start_ms).abs() < 1e-9);
            prop_assert!((e.iter().map(|o| o.end_ms).fold(0.0, f64::max) - x.end_ms).abs() < 1e-9);
        }

        let third = third_inference_latency(&wsp, &p).unwrap();
        prop_assert!((third - warm_exec_sum(&p, &wsp.k_warm)).abs() < 1e-9);
        let second = second_inference_latency(&wsp, &p, &platform, &cfg).unwrap();
        prop_assert!(second >= third - 1e-9);
        if wsp.residual.is_empty() {
            prop_assert!((second - third).abs() < 1e-9);
        }
    }
}

//! Kernel scheduling and pipeline simulation for cold-start DNN inference on
//! heterogeneous mobile processors.
//!
//! The core is generic over the scalar type ([`Scalar`], implemented for
//! `f32` and `f64`); the aliases at the bottom fix it to `f64`.

pub mod ablation;
pub mod error;
pub mod filter;
pub mod fixtures;
pub mod graph;
pub mod oracle;
pub mod plan;
pub mod platform;
pub mod profile;
pub mod scalar;
pub mod scheduler;
pub mod sim;
pub mod warm;

pub use error::{Error, Result};
pub use filter::{enumerate_variants, layer_fronts, prune_dominated, VariantOptions, VariantScore};
pub use graph::{
    build_operation_graph, OpId, OpKind, OperationGraph, OperationNode, ResourceClass, SetupStage,
};
pub use plan::Plan;
pub use platform::{CoreId, LoadInterval, LoadTrace, PlatformConfig};
pub use profile::{
    load_profile, load_profile_str, Choice, KernelVariant, LayerSpec, Mode, ModelProfile,
    ProcessorClass,
};
pub use scalar::Scalar;
pub use scheduler::{
    best_plan_for_combo, compute_queue_time, generate_plan, schedule_combination, sequential_plan,
    BigInsertRule, ComboStrategy, SchedulerConfig,
};
pub use sim::{
    gantt_csv, makespan_lower_bound, simulate, simulate_gpu, simulate_with_load, summarize,
    validate_feasibility, SimOptions, SimReport, Summary, Violation,
};

pub type Profile = ModelProfile<f64>;
pub type Graph = OperationGraph<f64>;
pub type Plan64 = Plan<f64>;
pub type Platform = PlatformConfig<f64>;
pub type Report = SimReport<f64>;

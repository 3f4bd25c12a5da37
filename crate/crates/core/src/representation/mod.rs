//! Constructive representation `xi = int_0^1 psi dB^H` with an adapted step
//! integrand built level by level on `t_n = 1 - exp(-kappa^{n/a})`.

mod build;
mod causal;
mod partition;
mod steps;
mod target;

pub use build::{
    build_representation, is_non_increasing, tail_weighted_norm_diagnostic, LevelRecord, RepresentationSummary,
    RepresentationTrace, StepIntegrand, TailNorm,
};
pub use causal::{CausalView, CausalityAudit};
pub use partition::{
    build_partition, construction_grid, mu_window, ConstructionGrid, GridLayout, Level, PartitionScheme, DEFAULT_LAG_FLOOR,
};
pub use steps::{case1_coefficient, case1_step, case2_step, run_blocks, BlockRun, Case, StepBlock, StepOutcome};
pub use target::{target_constant, target_lipschitz, target_log_holder, LipschitzMap, TargetKind, TargetProcess};

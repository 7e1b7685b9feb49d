//! Collatz-like residue-rule maps on the positive integers.
//!
//! A [`Program`] is an ordered list of guarded affine rules. On top of the
//! single-step map the crate provides trajectory iteration with cycle
//! detection, loop censuses and exit-basin scans, the picket-fence exit
//! census of the original map, closed-form null models, exponential-family
//! length scans with island detection, and exit/reverse trees.

pub mod census;
pub mod decimal;
pub mod dsl;
pub mod error;
pub mod family;
pub mod factor;
pub mod nullmodel;
pub mod num;
pub mod picket;
pub mod program;
pub mod shard;
pub mod trajectory;
pub mod tree;

pub use census::{
    basin_scan, canonicalize_loop, find_loops, interestingness_report, lowest_root_node, BasinReport,
    Interestingness, Loop, LoopRegistry,
};
pub use dsl::{parse_program_dsl, print_program};
pub use error::{Error, Result};
pub use factor::{small_factorization, Factorization};
pub use family::{family_lengths, find_islands, verify_common_branch, FamilyPoint, FamilySpec, IslandReport};
pub use nullmodel::{
    persistence_rate, predict_length, predicted_length_from_factor, residue_enrichment, stability_boundary,
    window_factor, DecayProfile, LengthModel, MFamily,
};
pub use picket::{exit_census, exit_point, first_to_exit, is_picket_fence, picket_fence_value, ExitCensus};
pub use program::{canonical_program, program_from_id, validate_program, Guard, Program, SignOrder, StepRule};
pub use shard::StartSet;
pub use trajectory::{
    detect_cycle, iterate, leading_up_steps, merge_point, sequence_length, Caps, CycleSearch, Outcome, RunState, StopPolicy,
    Trajectory,
};
pub use tree::{build_exit_tree, build_reverse_tree, export_graph, predecessors, GraphFormat, OrbitForest};

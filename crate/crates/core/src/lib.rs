//! Rewriting select-project-join plans into well-behaved plans of minimum
//! intermediate degree under unary key constraints.

pub mod colorwidth;
pub mod hom;
pub mod keys;
pub mod pipeline;
pub mod plan;
pub mod represent;
pub mod simplex;
pub mod structure;
pub mod synthesis;
pub mod treedec;
pub mod witness;

pub use hom::{check_isomorphic, compute_core, find_homomorphism, homs_maps, homs_relation};
pub use keys::{chase, satisfies_keys, ChaseResult, Key, KeySet};
pub use simplex::Rational;
pub use structure::{hypergraph_of, Elem, Hypergraph, OpenStructure, Signature, Structure};
pub use plan::{
    evaluate_naive, evaluate_well_behaved, is_well_behaved, parse_plan, print_plan, EvalTrace,
    SpjPlan, ThetaReading,
};
pub use represent::{build_representation, check_containment_property, PDecomposition, PRepresentation};
pub use treedec::{check_tree_decomposition, TreeDecomposition};
pub use pipeline::{
    check_equivalence, intermediate_degree_bound, optimize, output_degree, Caps, PipelineError,
};
pub use synthesis::{eliminate_fds, synthesize_plan, FdElimination, SynthesisResult};
pub use witness::{bag_witness, product_witness, WitnessFamily};
pub use colorwidth::{color_number, cwidth_of_decomposition, optimal_cwidth, ColorSolution, WidthReport};

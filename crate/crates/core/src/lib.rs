//! coarseforge — desk-scale computational coarse geometry.
//!
//! Builds finite metric graphs (Cayley balls, fixtures, explicit JSON),
//! measures their hyperbolicity constants, runs cone-off / de-electrification
//! constructions with quasigeodesic surgery, detects and promotes factor
//! systems, closes families of quasiconvex subgroups under coarse
//! intersection, and checks the hierarchically-hyperbolic axioms empirically
//! on the resulting structures. Everything is exact integer/half-integer
//! arithmetic on finite graphs, deterministic across runs and thread counts.

pub mod closure;
pub mod coning;
pub mod deelect;
pub mod error;
pub mod factors;
pub mod generators;
pub mod graph;
pub mod hhs;
pub mod hyperbolicity;
pub mod path;
pub mod report;
pub mod rng;
pub mod subspace;

pub use closure::{
    closure_family, coset_family, height_probe, intersection_approx, prox_closure,
    proximal_pairs, ClosureTrace, CosetFamily, CosetRef, SubgroupRep,
};
pub use coning::{
    check_polygon, cone_off, coqc_gauge, de_electrify, interrupt, nineteen_pieces_check,
    pigeonhole_check, ConedGraph, DeElectMode, DeElectSpec, NineteenPiecesReport,
    MAX_ALTERNATE_GEODESICS,
};
pub use deelect::{
    algo_constants, good_quasigeodesic, good_quasigeodesic_embedded, good_quasigeodesic_with,
    measure_qg, measure_qg_coned, AlgoConstants, GoodQuasiGeodesic, QGMeasure, C_GRID,
};
pub use error::{Error, Result};
pub use factors::{
    approx_r, build_p, check_factor_system, check_weak_factor_system, equivalence_classes,
    promote, sub_family, EquivClasses, FactorConstants, FactorFamily, FactorReport, FamilyKind,
    Promotion,
};
pub use generators::{
    approximation_graph, cayley_ball, free_group, invert_word, star_fixture, CayleyBall, NetSpec,
    PresentationSpec,
};
pub use graph::{MetricGraph, MAX_VERTICES};
pub use hhs::{
    build_hhs, verify_axioms, AxiomReport, CuStats, HhsStructure, LllRecord, UniquenessRow,
    LLL_LAMBDA_GRID, UNIQUENESS_GRID,
};
pub use hyperbolicity::{delta_four_point, delta_thin, hyperbolicity, HypReport, ThinWitness};
pub use path::{Host, PathBuilder, Piece, PieceKind, VPath};
pub use report::{CheckReport, Violation};
pub use rng::XorShift64Star;
pub use subspace::{
    behrstock_first, behrstock_second, check_quadrilateral, coarse_inclusion, project,
    project_set, projection_lipschitz_defect, projection_neighborhood_inclusion,
    quasiconvexity_gauge, Inclusion, ProjectionResult, SubspaceRef,
};

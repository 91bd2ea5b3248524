//! Numerically verifiable toolkit for finite-dimensional JB*-triples.
//!
//! The library models Cartan factors of types 1-4 and their finite
//! l-infinity sums: rectangular complex matrices, antisymmetric and
//! symmetric square matrices, and spin factors. On top of the triple
//! product it provides
//!
//! - tripotent verification, Peirce decomposition, and the relations
//!   between tripotents (orthogonality, order, collinearity, governing),
//! - pure atoms, triple transition pseudo-probabilities, and the gap metric
//!   both as a norm distance and through its closed formula,
//! - quadrangle / trangle configurations and the relative-position
//!   decomposition of minimal tripotent pairs,
//! - candidate preserver maps assembled from structured primitives with
//!   property checks (TTP, orthogonality, isometry, collinearity), socle
//!   extension fitting, linearity classification, and the hardcoded
//!   two-by-two counterexample family.
//!
//! All randomized routines take explicit seeds and are deterministic.
//! Everything is plain immutable data, safe to share across threads.
//!
//! ```
//! use triple_lab::{AtomicTriple, FactorDescriptor, Tolerance, Tripotent};
//! use triple_lab::kernel::{cr, CMat};
//!
//! // The 2x2 matrix factor and two minimal tripotents in it.
//! let t = AtomicTriple::factor(FactorDescriptor::Type1 { p: 2, q: 2 })?;
//! let tol = Tolerance::default();
//! let mut e11 = CMat::zeros(2, 2);
//! e11[(0, 0)] = cr(1.0);
//! let e = Tripotent::new(&t, triple_lab::Element::from_blocks(vec![e11]), &tol)?;
//! assert!(e.is_minimal());
//!
//! let s = (7.0_f64 / 18.0).sqrt();
//! let v = CMat::from_row_slice(2, 2, &[cr(1.0 / 3.0), cr(1.0 / 3.0), cr(s), cr(s)]);
//! let v = Tripotent::new(&t, triple_lab::Element::from_blocks(vec![v]), &tol)?;
//!
//! // Its transition pseudo-probability to e, and the gap by both routes.
//! let p = triple_lab::ttp(&t, &v, &e)?.0;
//! assert!((p - cr(1.0 / 3.0)).norm() < 1e-12);
//! let d = triple_lab::gap_distance(&t, e.element(), v.element())?;
//! let f = triple_lab::gap_formula(&t, &e, &v, &tol)?;
//! assert!((d - f).abs() < 1e-9);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod configurations;
pub mod factors;
pub mod kernel;
pub mod preserver;
pub mod tripotents;
pub mod ttp;

pub use configurations::{
    collinear_superposition, is_quadrangle, is_trangle, relative_position, ConfigError,
    RelativePosition,
};
pub use factors::{
    random_element, triple_norm, triple_product, verify_jbstar_axioms, AtomicTriple, AxiomReport,
    Element, FactorDescriptor, FactorError,
};
pub use kernel::{
    hermitian_eigensystem, least_squares_solve, operator_norm, CMat, CVec, Eigensystem,
    KernelError, Tolerance,
};
pub use preserver::{
    apply_map, check_isometry_on_minimals, check_orthogonality_preservation,
    check_ttp_preservation, classify_real_linear_isometry, extend_to_socle,
    verify_remark_counterexamples, MapSpec, MapStep, PreserverError, PreserverReport,
    Remark35Report, SummandLinearity,
};
pub use tripotents::{
    classify_relation, is_tripotent, peirce_decompose, sample_minimal_tripotent, tripotent_rank,
    PeirceSystem, RelationFlags, Tripotent, TripotentError,
};
pub use ttp::{
    gap_distance, gap_formula, pure_atom_value, ttp, wigner_transition_probability, TTPValue,
    TtpError,
};

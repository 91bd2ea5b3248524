//! Boundary dimensions: one-dimensional factors, the per-factor dimension
//! cap, and sums mixing rank-one Hilbert factors with matrix factors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use triple_lab::configurations::{relative_position, RelativePosition};
use triple_lab::factors::{AtomicTriple, FactorDescriptor};
use triple_lab::kernel::Tolerance;
use triple_lab::preserver::{
    check_orthogonality_preservation, check_ttp_preservation, random_ttp_preserving_spec,
    spec_map,
};
use triple_lab::tripotents::sample_minimal_tripotent_with;
use triple_lab::ttp::{gap_distance, gap_formula, ttp};

#[test]
fn one_dimensional_factors_degenerate_gracefully() {
    let tol = Tolerance::default();
    for desc in [
        FactorDescriptor::Type1 { p: 1, q: 1 },
        FactorDescriptor::Type3 { n: 1 },
        FactorDescriptor::Type2 { n: 2 },
    ] {
        let t = AtomicTriple::factor(desc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
        let v = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
        assert!(e.is_minimal() && e.is_complete());
        // v = alpha e with a unimodular alpha; the frame part vanishes.
        match relative_position(&t, &e, &v, &tol).unwrap() {
            RelativePosition::CollinearFrame { alpha, beta, .. } => {
                assert!((alpha.norm() - 1.0).abs() < 1e-10);
                assert!(beta.norm() < 1e-10);
            }
            other => panic!("expected a collinear frame in {desc:?}, got {other:?}"),
        }
        let z = ttp(&t, &e, &v).unwrap().0;
        assert!((z.norm() - 1.0).abs() < 1e-10);
        let d = gap_distance(&t, e.element(), v.element()).unwrap();
        let f = gap_formula(&t, &e, &v, &tol).unwrap();
        assert!((d - f).abs() < 1e-7);
    }
}

#[test]
fn dimension_cap_is_enforced_and_reachable() {
    // 64 complex dimensions per factor is the documented ceiling.
    assert!(FactorDescriptor::Type1 { p: 8, q: 8 }.validate().is_ok());
    assert!(FactorDescriptor::Type1 { p: 8, q: 9 }.validate().is_err());
    assert!(FactorDescriptor::Type4 { n: 64 }.validate().is_ok());
    assert!(FactorDescriptor::Type4 { n: 65 }.validate().is_err());

    let tol = Tolerance::default();
    let t = AtomicTriple::factor(FactorDescriptor::Type1 { p: 8, q: 8 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let e = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
        let v = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
        assert_eq!(e.peirce().dim(2), 1);
        assert_eq!(e.peirce().dim(1), 14);
        assert_eq!(e.peirce().dim(0), 49);
        let pos = relative_position(&t, &e, &v, &tol).unwrap();
        assert!(pos.residual(e.element(), v.element()) <= 1e-7);
        let d = gap_distance(&t, e.element(), v.element()).unwrap();
        let f = gap_formula(&t, &e, &v, &tol).unwrap();
        assert!((d - f).abs() <= 1e-7);
    }
}

#[test]
fn mixed_sum_with_rank_one_summand_supports_preserver_checks() {
    let t = AtomicTriple::new(vec![
        FactorDescriptor::Type1 { p: 1, q: 3 },
        FactorDescriptor::Type3 { n: 2 },
    ])
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = random_ttp_preserving_spec(&t, &mut rng);
    let map = spec_map(&spec, &t, &t);
    let r = check_ttp_preservation(&map, &t, &t, 120, 4, 1e-8).unwrap();
    assert!(r.passed(), "{r:?}");
    // Orthogonal pairs for the rank-one summand come from the other
    // summand; the relation must survive the map.
    let r = check_orthogonality_preservation(&map, &t, &t, 120, 4, 1e-8).unwrap();
    assert!(r.passed(), "{r:?}");
}

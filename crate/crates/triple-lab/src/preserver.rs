//! Candidate preserver maps on minimal tripotents and their property
//! checks: TTP preservation, orthogonality preservation in both directions,
//! isometry on minimals, collinearity preservation, socle extensions by
//! least squares, linearity classification, and the hardcoded two-by-two
//! counterexample data.
//!
//! Maps are compositions of structured primitives (unitary multiplications,
//! transposition, entrywise conjugation, phases, real-orthogonal spin maps,
//! summand permutations, and coordinatewise conjugations on Hilbert
//! factors). Arbitrary set bijections are not representable; the checks
//! accept any closure, so tests can feed deliberately broken maps as
//! negative controls.

use crate::factors::{
    element_from_coords, element_to_coords, element_to_json, random_element, triple_product,
    AtomicTriple, Element, FactorDescriptor, FactorError,
};
use crate::kernel::{c, cr, least_squares_solve, CMat, CVec, KernelError, Tolerance};
use crate::tripotents::{
    rel_eps, sample_collinear_minimal_with, sample_minimal_tripotent_with,
    sample_orthogonal_minimal_with, Tripotent, TripotentError,
};
use crate::ttp::{gap_distance, ttp, TtpError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reports keep at most this many offending witnesses.
pub const WITNESS_CAP: usize = 10;

#[derive(Debug, Error)]
pub enum PreserverError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Tripotent(#[from] TripotentError),
    #[error(transparent)]
    Ttp(#[from] TtpError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("map step {step}: shapes incompatible: {detail}")]
    ShapeMismatch { step: usize, detail: String },
    #[error("map step {step}: invalid primitive: {detail}")]
    InvalidPrimitive { step: usize, detail: String },
    #[error("trial {trial}: image is not a minimal tripotent ({detail})")]
    NotTripotentImage { trial: u64, detail: String },
    #[error("samples do not span the socle (rank deficient)")]
    RankDeficient,
    #[error("no linear extension fits the samples: max residual {residual:.3e}")]
    InconsistentSamples { residual: f64 },
    #[error("summand {summand}: linearity tag is inconsistent across samples")]
    InconsistentTag { summand: usize },
    #[error("the triple has no pairs of the requested kind: {0}")]
    NoSuchPairs(String),
}

// ---------------------------------------------------------------------------
// Map specifications
// ---------------------------------------------------------------------------

mod cmat_json {
    use super::*;
    use serde::de::Error;

    pub fn serialize<S: serde::Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let r = rows.len();
        if r == 0 {
            return Err(D::Error::custom("matrix needs at least one row"));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|row| row.len() != cols) {
            return Err(D::Error::custom("matrix rows must be nonempty and equal"));
        }
        Ok(CMat::from_fn(r, cols, |i, j| c(rows[i][j][0], rows[i][j][1])))
    }
}

mod rmat_json {
    use super::*;
    use serde::de::Error;

    pub fn serialize<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let r = rows.len();
        if r == 0 {
            return Err(D::Error::custom("matrix needs at least one row"));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|row| row.len() != cols) {
            return Err(D::Error::custom("matrix rows must be nonempty and equal"));
        }
        Ok(DMatrix::from_fn(r, cols, |i, j| rows[i][j]))
    }
}

mod complex_json {
    use super::*;

    pub fn serialize<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let pair: [f64; 2] = <[f64; 2]>::deserialize(d)?;
        Ok(c(pair[0], pair[1]))
    }
}

/// One primitive transformation. `summand: None` applies the primitive to
/// every summand whose shape admits it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapStep {
    UnitaryLeft {
        #[serde(with = "cmat_json")]
        matrix: CMat,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summand: Option<usize>,
    },
    UnitaryRight {
        #[serde(with = "cmat_json")]
        matrix: CMat,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summand: Option<usize>,
    },
    Transpose {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summand: Option<usize>,
    },
    EntrywiseConjugate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summand: Option<usize>,
    },
    Phase {
        #[serde(with = "complex_json")]
        value: Complex64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summand: Option<usize>,
    },
    RealOrthogonalSpin {
        #[serde(with = "rmat_json")]
        matrix: DMatrix<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summand: Option<usize>,
    },
    SummandPermutation { perm: Vec<usize> },
    HilbertMixedConjugation {
        coords: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summand: Option<usize>,
    },
}

/// Composition of primitives, applied left to right.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MapSpec {
    pub steps: Vec<MapStep>,
}

impl MapSpec {
    pub fn new(steps: Vec<MapStep>) -> Self {
        MapSpec { steps }
    }

    /// Descriptors after applying all shape-changing steps.
    pub fn output_triple(&self, t_in: &AtomicTriple) -> Result<AtomicTriple, PreserverError> {
        let zero = t_in.zero();
        let mut state: Vec<(FactorDescriptor, CMat)> = t_in
            .summands()
            .iter()
            .zip(zero.blocks())
            .map(|(d, b)| (*d, b.clone()))
            .collect();
        for (idx, step) in self.steps.iter().enumerate() {
            apply_step(step, idx, &mut state, true)?;
        }
        Ok(AtomicTriple::new(state.into_iter().map(|(d, _)| d).collect())?)
    }
}

fn targets(summand: Option<usize>, count: usize, step: usize) -> Result<Vec<usize>, PreserverError> {
    match summand {
        Some(i) if i >= count => Err(PreserverError::ShapeMismatch {
            step,
            detail: format!("summand {i} out of range ({count} summands)"),
        }),
        Some(i) => Ok(vec![i]),
        None => Ok((0..count).collect()),
    }
}

fn check_unitary(m: &CMat, step: usize) -> Result<(), PreserverError> {
    if m.nrows() != m.ncols() {
        return Err(PreserverError::InvalidPrimitive {
            step,
            detail: "unitary block must be square".into(),
        });
    }
    let defect = (m.adjoint() * m - CMat::identity(m.nrows(), m.ncols())).norm();
    if defect > 1e-8 * (m.nrows() as f64).sqrt().max(1.0) {
        return Err(PreserverError::InvalidPrimitive {
            step,
            detail: format!("unitarity defect {defect:.3e}"),
        });
    }
    Ok(())
}

/// `shape_only` runs the same dispatch over zero blocks to track shapes.
fn apply_step(
    step: &MapStep,
    idx: usize,
    state: &mut [(FactorDescriptor, CMat)],
    shape_only: bool,
) -> Result<(), PreserverError> {
    match step {
        MapStep::UnitaryLeft { matrix, summand } => {
            if !shape_only {
                check_unitary(matrix, idx)?;
            }
            for i in targets(*summand, state.len(), idx)? {
                let (_, block) = &state[i];
                if matrix.ncols() != block.nrows() {
                    return Err(PreserverError::ShapeMismatch {
                        step: idx,
                        detail: format!(
                            "left factor is {}x{}, block has {} rows",
                            matrix.nrows(),
                            matrix.ncols(),
                            block.nrows()
                        ),
                    });
                }
                state[i].1 = matrix * &state[i].1;
            }
        }
        MapStep::UnitaryRight { matrix, summand } => {
            if !shape_only {
                check_unitary(matrix, idx)?;
            }
            for i in targets(*summand, state.len(), idx)? {
                let (desc, block) = &state[i];
                if matches!(desc, FactorDescriptor::Type4 { .. }) {
                    return Err(PreserverError::InvalidPrimitive {
                        step: idx,
                        detail: "unitary_right does not act on spin factors".into(),
                    });
                }
                if matrix.nrows() != block.ncols() {
                    return Err(PreserverError::ShapeMismatch {
                        step: idx,
                        detail: format!(
                            "right factor is {}x{}, block has {} columns",
                            matrix.nrows(),
                            matrix.ncols(),
                            block.ncols()
                        ),
                    });
                }
                state[i].1 = &state[i].1 * matrix;
            }
        }
        MapStep::Transpose { summand } => {
            for i in targets(*summand, state.len(), idx)? {
                let (desc, block) = &mut state[i];
                match desc {
                    FactorDescriptor::Type1 { p, q } => {
                        *desc = FactorDescriptor::Type1 { p: *q, q: *p };
                        *block = block.transpose();
                    }
                    FactorDescriptor::Type2 { .. } | FactorDescriptor::Type3 { .. } => {
                        *block = block.transpose();
                    }
                    FactorDescriptor::Type4 { .. } => {
                        return Err(PreserverError::InvalidPrimitive {
                            step: idx,
                            detail: "transpose does not act on spin factors".into(),
                        });
                    }
                }
            }
        }
        MapStep::EntrywiseConjugate { summand } => {
            for i in targets(*summand, state.len(), idx)? {
                state[i].1 = state[i].1.conjugate();
            }
        }
        MapStep::Phase { value, summand } => {
            if !shape_only && (value.norm() - 1.0).abs() > 1e-10 {
                return Err(PreserverError::InvalidPrimitive {
                    step: idx,
                    detail: format!("phase must be unimodular, |value| = {}", value.norm()),
                });
            }
            for i in targets(*summand, state.len(), idx)? {
                state[i].1 = state[i].1.map(|z| z * value);
            }
        }
        MapStep::RealOrthogonalSpin { matrix, summand } => {
            let o = matrix.map(cr);
            if !shape_only {
                check_unitary(&o, idx)?;
            }
            for i in targets(*summand, state.len(), idx)? {
                let (desc, block) = &state[i];
                match desc {
                    FactorDescriptor::Type4 { n } if *n == matrix.nrows() => {}
                    _ => {
                        return Err(PreserverError::InvalidPrimitive {
                            step: idx,
                            detail: "real_orthogonal_spin needs a spin summand of matching size"
                                .into(),
                        });
                    }
                }
                let _ = block;
                state[i].1 = &o * &state[i].1;
            }
        }
        MapStep::SummandPermutation { perm } => {
            let k = state.len();
            let mut seen = vec![false; k];
            if perm.len() != k || perm.iter().any(|&j| j >= k || std::mem::replace(&mut seen[j], true)) {
                return Err(PreserverError::InvalidPrimitive {
                    step: idx,
                    detail: format!("not a permutation of 0..{k}: {perm:?}"),
                });
            }
            let old = state.to_vec();
            for (j, &src) in perm.iter().enumerate() {
                state[j] = old[src].clone();
            }
        }
        MapStep::HilbertMixedConjugation { coords, summand } => {
            for i in targets(*summand, state.len(), idx)? {
                let (desc, block) = &mut state[i];
                let ok = matches!(desc, FactorDescriptor::Type1 { p: 1, .. })
                    || matches!(desc, FactorDescriptor::Type1 { q: 1, .. });
                if !ok {
                    return Err(PreserverError::InvalidPrimitive {
                        step: idx,
                        detail: "hilbert_mixed_conjugation needs a rank-one type-1 factor".into(),
                    });
                }
                let len = block.len();
                for &k in coords {
                    if k >= len {
                        return Err(PreserverError::InvalidPrimitive {
                            step: idx,
                            detail: format!("coordinate {k} out of range ({len})"),
                        });
                    }
                    let z = block[k];
                    block[k] = z.conj();
                }
            }
        }
    }
    Ok(())
}

/// Applies the composition of primitives to an element of `t_in`; the result
/// must land in `t_out`, which is also checked.
pub fn apply_map(
    spec: &MapSpec,
    t_in: &AtomicTriple,
    t_out: &AtomicTriple,
    x: &Element,
) -> Result<Element, PreserverError> {
    t_in.check_shapes(x)?;
    let mut state: Vec<(FactorDescriptor, CMat)> = t_in
        .summands()
        .iter()
        .zip(x.blocks())
        .map(|(d, b)| (*d, b.clone()))
        .collect();
    for (idx, step) in spec.steps.iter().enumerate() {
        apply_step(step, idx, &mut state, false)?;
    }
    let descriptors: Vec<FactorDescriptor> = state.iter().map(|(d, _)| *d).collect();
    if descriptors != t_out.summands() {
        return Err(PreserverError::ShapeMismatch {
            step: spec.steps.len(),
            detail: format!(
                "output summands {descriptors:?} differ from the target {:?}",
                t_out.summands()
            ),
        });
    }
    let out = Element::from_blocks(state.into_iter().map(|(_, b)| b).collect());
    t_out.check_member(&out, &Tolerance::default())?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Structured map generators
// ---------------------------------------------------------------------------

/// Haar-like random unitary from the QR factorization of a Ginibre sample.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| crate::factors::gaussian_complex(rng));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix column phases so the distribution is Haar and deterministic.
    let mut out = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 1e-12 { d / cr(d.norm()) } else { cr(1.0) };
        for i in 0..n {
            out[(i, j)] *= phase;
        }
    }
    out
}

/// Random real orthogonal matrix.
pub fn random_real_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    use rand_distr::StandardNormal;
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q;
    for j in 0..n {
        let s = if r[(j, j)] >= 0.0 { 1.0 } else { -1.0 };
        for i in 0..n {
            out[(i, j)] *= s;
        }
    }
    out
}

fn random_phase_unit<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    c(theta.cos(), theta.sin())
}

/// A random TTP-preserving map: per-summand triple automorphisms, plus an
/// occasional permutation of identical summands.
pub fn random_ttp_preserving_spec<R: Rng + ?Sized>(t: &AtomicTriple, rng: &mut R) -> MapSpec {
    let mut steps = Vec::new();
    for (i, desc) in t.summands().iter().enumerate() {
        match *desc {
            FactorDescriptor::Type1 { p, q } => {
                steps.push(MapStep::UnitaryLeft {
                    matrix: random_unitary(p, rng),
                    summand: Some(i),
                });
                steps.push(MapStep::UnitaryRight {
                    matrix: random_unitary(q, rng),
                    summand: Some(i),
                });
            }
            FactorDescriptor::Type2 { n } | FactorDescriptor::Type3 { n } => {
                let u = random_unitary(n, rng);
                steps.push(MapStep::UnitaryLeft {
                    matrix: u.clone(),
                    summand: Some(i),
                });
                steps.push(MapStep::UnitaryRight {
                    matrix: u.transpose(),
                    summand: Some(i),
                });
            }
            FactorDescriptor::Type4 { n } => {
                steps.push(MapStep::RealOrthogonalSpin {
                    matrix: random_real_orthogonal(n, rng),
                    summand: Some(i),
                });
                steps.push(MapStep::Phase {
                    value: random_phase_unit(rng),
                    summand: Some(i),
                });
            }
        }
    }
    // Swap a random pair of identical summands now and then.
    let k = t.summands().len();
    if k > 1 && rng.gen::<bool>() {
        let a = rng.gen_range(0..k);
        let b = rng.gen_range(0..k);
        if a != b && t.summands()[a] == t.summands()[b] {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.swap(a, b);
            steps.push(MapStep::SummandPermutation { perm });
        }
    }
    MapSpec::new(steps)
}

/// The adjoint map x -> x* on matrix summands (entrywise conjugation on
/// spin summands): a conjugate-linear triple automorphism.
pub fn adjoint_spec(t: &AtomicTriple) -> MapSpec {
    let mut steps = Vec::new();
    for (i, desc) in t.summands().iter().enumerate() {
        match desc {
            FactorDescriptor::Type4 { .. } => {
                steps.push(MapStep::EntrywiseConjugate { summand: Some(i) });
            }
            _ => {
                steps.push(MapStep::Transpose { summand: Some(i) });
                steps.push(MapStep::EntrywiseConjugate { summand: Some(i) });
            }
        }
    }
    MapSpec::new(steps)
}

// ---------------------------------------------------------------------------
// Reports and property checks
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreserverReport {
    pub property: String,
    pub trials: u64,
    pub max_violation: f64,
    pub verdict: Verdict,
    pub witnesses: Vec<serde_json::Value>,
}

impl PreserverReport {
    fn finish(property: &str, trials: u64, max_violation: f64, tol: f64, witnesses: Vec<serde_json::Value>) -> Self {
        PreserverReport {
            property: property.to_string(),
            trials,
            max_violation,
            verdict: if max_violation <= tol {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            witnesses,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Any map from elements to elements; `MapSpec` closures are the structured
/// case, tests may pass hand-rolled negative controls.
pub type ElementMap<'a> = dyn Fn(&Element) -> Result<Element, PreserverError> + 'a;

pub fn spec_map<'a>(
    spec: &'a MapSpec,
    t_in: &'a AtomicTriple,
    t_out: &'a AtomicTriple,
) -> impl Fn(&Element) -> Result<Element, PreserverError> + 'a {
    move |x| apply_map(spec, t_in, t_out, x)
}

fn image_tripotent(
    t_out: &AtomicTriple,
    map: &ElementMap,
    x: &Tripotent,
    trial: u64,
    tol: &Tolerance,
) -> Result<Tripotent, PreserverError> {
    let image = map(x.element())?;
    let trip = Tripotent::new(t_out, image, tol).map_err(|e| PreserverError::NotTripotentImage {
        trial,
        detail: e.to_string(),
    })?;
    if !trip.is_minimal() {
        return Err(PreserverError::NotTripotentImage {
            trial,
            detail: format!("image has Peirce-2 dimension {}", trip.peirce().dim(2)),
        });
    }
    Ok(trip)
}

fn witness_value(
    t: &AtomicTriple,
    trial: u64,
    violation: f64,
    e: &Tripotent,
    v: &Tripotent,
) -> serde_json::Value {
    serde_json::json!({
        "trial": trial,
        "violation": violation,
        "e": element_to_json(t, e.element()),
        "v": element_to_json(t, v.element()),
    })
}

fn sample_generic_pair<R: Rng + ?Sized>(
    t: &AtomicTriple,
    rng: &mut R,
) -> Result<(Tripotent, Tripotent), PreserverError> {
    let k = t.summands().len();
    let se = rng.gen_range(0..k);
    let sv = rng.gen_range(0..k);
    let e = sample_minimal_tripotent_with(t, se, rng)?;
    let v = sample_minimal_tripotent_with(t, sv, rng)?;
    Ok((e, v))
}

/// Compares TTP before and after the map on sampled minimal pairs.
pub fn check_ttp_preservation(
    map: &ElementMap,
    t_in: &AtomicTriple,
    t_out: &AtomicTriple,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<PreserverReport, PreserverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let work_tol = Tolerance::default();
    let mut max_violation = 0.0_f64;
    let mut witnesses = Vec::new();
    for trial in 0..trials {
        let (e, v) = sample_generic_pair(t_in, &mut rng)?;
        let before = ttp(t_in, &e, &v)?.0;
        let fe = image_tripotent(t_out, map, &e, trial, &work_tol)?;
        let fv = image_tripotent(t_out, map, &v, trial, &work_tol)?;
        let after = ttp(t_out, &fe, &fv)?.0;
        let violation = (after - before).norm();
        if violation > tol && witnesses.len() < WITNESS_CAP {
            witnesses.push(witness_value(t_in, trial, violation, &e, &v));
        }
        max_violation = max_violation.max(violation);
    }
    Ok(PreserverReport::finish(
        "ttp-preservation",
        trials,
        max_violation,
        tol,
        witnesses,
    ))
}

/// Verifies that orthogonality is preserved in both directions: sampled
/// orthogonal pairs stay orthogonal and generic non-orthogonal pairs stay
/// non-orthogonal.
pub fn check_orthogonality_preservation(
    map: &ElementMap,
    t_in: &AtomicTriple,
    t_out: &AtomicTriple,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<PreserverReport, PreserverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let work_tol = Tolerance::default();
    let mut max_violation = 0.0_f64;
    let mut witnesses = Vec::new();
    let k = t_in.summands().len();
    for trial in 0..trials {
        let want_orthogonal = trial % 2 == 0;
        let (e, v) = if want_orthogonal {
            let se = rng.gen_range(0..k);
            let e = sample_minimal_tripotent_with(t_in, se, &mut rng)?;
            match sample_orthogonal_minimal_with(t_in, se, &e, &mut rng)? {
                Some(v) => (e, v),
                None if k > 1 => {
                    let sv = (se + 1 + rng.gen_range(0..k - 1)) % k;
                    let v = sample_minimal_tripotent_with(t_in, sv, &mut rng)?;
                    (e, v)
                }
                None => continue,
            }
        } else {
            // Resample until comfortably non-orthogonal.
            loop {
                let (e, v) = sample_generic_pair(t_in, &mut rng)?;
                let o = triple_product(t_in, e.element(), e.element(), v.element())?.coord_norm();
                if o > 1e-3 {
                    break (e, v);
                }
            }
        };
        let fe = image_tripotent(t_out, map, &e, trial, &work_tol)?;
        let fv = image_tripotent(t_out, map, &v, trial, &work_tol)?;
        let o_out = triple_product(t_out, fe.element(), fe.element(), fv.element())?.coord_norm();
        let violation = if want_orthogonal {
            o_out
        } else if o_out <= rel_eps(&work_tol) {
            1.0
        } else {
            0.0
        };
        if violation > tol && witnesses.len() < WITNESS_CAP {
            witnesses.push(witness_value(t_in, trial, violation, &e, &v));
        }
        max_violation = max_violation.max(violation);
    }
    Ok(PreserverReport::finish(
        "orthogonality-preservation",
        trials,
        max_violation,
        tol,
        witnesses,
    ))
}

/// Compares gap distances before and after the map on sampled minimal pairs.
pub fn check_isometry_on_minimals(
    map: &ElementMap,
    t_in: &AtomicTriple,
    t_out: &AtomicTriple,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<PreserverReport, PreserverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let work_tol = Tolerance::default();
    let mut max_violation = 0.0_f64;
    let mut witnesses = Vec::new();
    for trial in 0..trials {
        let (e, v) = sample_generic_pair(t_in, &mut rng)?;
        let before = gap_distance(t_in, e.element(), v.element())?;
        let fe = image_tripotent(t_out, map, &e, trial, &work_tol)?;
        let fv = image_tripotent(t_out, map, &v, trial, &work_tol)?;
        let after = gap_distance(t_out, fe.element(), fv.element())?;
        let violation = (after - before).abs();
        if violation > tol && witnesses.len() < WITNESS_CAP {
            witnesses.push(witness_value(t_in, trial, violation, &e, &v));
        }
        max_violation = max_violation.max(violation);
    }
    Ok(PreserverReport::finish(
        "isometry-on-minimals",
        trials,
        max_violation,
        tol,
        witnesses,
    ))
}

/// Verifies that collinear minimal pairs map to collinear pairs.
pub fn check_collinearity_preservation(
    map: &ElementMap,
    t_in: &AtomicTriple,
    t_out: &AtomicTriple,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<PreserverReport, PreserverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let work_tol = Tolerance::default();
    let mut max_violation = 0.0_f64;
    let mut witnesses = Vec::new();
    let k = t_in.summands().len();
    let mut ran = 0u64;
    for trial in 0..trials {
        let se = rng.gen_range(0..k);
        let e = sample_minimal_tripotent_with(t_in, se, &mut rng)?;
        let Some(v) = sample_collinear_minimal_with(t_in, se, &e, &mut rng)? else {
            continue;
        };
        ran += 1;
        let fe = image_tripotent(t_out, map, &e, trial, &work_tol)?;
        let fv = image_tripotent(t_out, map, &v, trial, &work_tol)?;
        let d1 = fe
            .peirce()
            .project(t_out, 1, fv.element())
            .sub(fv.element())
            .coord_norm();
        let d2 = fv
            .peirce()
            .project(t_out, 1, fe.element())
            .sub(fe.element())
            .coord_norm();
        let violation = d1.max(d2);
        if violation > tol && witnesses.len() < WITNESS_CAP {
            witnesses.push(witness_value(t_in, trial, violation, &e, &v));
        }
        max_violation = max_violation.max(violation);
    }
    Ok(PreserverReport::finish(
        "collinearity-preservation",
        ran,
        max_violation,
        tol,
        witnesses,
    ))
}

// ---------------------------------------------------------------------------
// Socle extension fitting
// ---------------------------------------------------------------------------

/// A complex-linear map on coordinates fitted from samples by least squares.
#[derive(Clone, Debug)]
pub struct SocleExtension {
    pub matrix: CMat,
    /// Largest per-sample residual of the fit.
    pub max_residual: f64,
    /// Largest relative triple-product defect of the fitted map on random
    /// triples; small values certify a triple homomorphism.
    pub triple_product_defect: f64,
}

impl SocleExtension {
    pub fn apply(&self, t_in: &AtomicTriple, t_out: &AtomicTriple, x: &Element) -> Element {
        element_from_coords(t_out, &(&self.matrix * element_to_coords(t_in, x)))
    }
}

/// Fits the unique complex-linear map sending each sample to its image and
/// checks that it preserves triple products. Sample inputs must span the
/// socle, which is the whole space at these dimensions.
pub fn extend_to_socle(
    t_in: &AtomicTriple,
    t_out: &AtomicTriple,
    samples: &[(Element, Element)],
    tol: f64,
) -> Result<SocleExtension, PreserverError> {
    let d_in = t_in.dim();
    let d_out = t_out.dim();
    let n = samples.len();
    if n < d_in {
        return Err(PreserverError::RankDeficient);
    }
    let mut xt = CMat::zeros(n, d_in);
    let mut yt = CMat::zeros(n, d_out);
    for (row, (x, y)) in samples.iter().enumerate() {
        let xc = element_to_coords(t_in, x);
        let yc = element_to_coords(t_out, y);
        for j in 0..d_in {
            xt[(row, j)] = xc[j];
        }
        for j in 0..d_out {
            yt[(row, j)] = yc[j];
        }
    }
    let ls = least_squares_solve(&xt, &yt, &Tolerance::default()).map_err(|e| match e {
        KernelError::RankDeficient { .. } => PreserverError::RankDeficient,
        other => PreserverError::Kernel(other),
    })?;
    let matrix = ls.solution.transpose();

    let mut max_residual = 0.0_f64;
    for (x, y) in samples {
        let image = element_from_coords(t_out, &(&matrix * element_to_coords(t_in, x)));
        max_residual = max_residual.max(image.sub(y).coord_norm());
    }
    if max_residual > tol {
        return Err(PreserverError::InconsistentSamples {
            residual: max_residual,
        });
    }
    let triple_product_defect = triple_homomorphism_defect(t_in, t_out, &matrix, 50, 0xfeed);
    Ok(SocleExtension {
        matrix,
        max_residual,
        triple_product_defect,
    })
}

/// Largest relative defect of `m` as a triple homomorphism on random
/// triples.
pub fn triple_homomorphism_defect(
    t_in: &AtomicTriple,
    t_out: &AtomicTriple,
    m: &CMat,
    trials: u64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let apply = |x: &Element| element_from_coords(t_out, &(m * element_to_coords(t_in, x)));
    for _ in 0..trials {
        let x = random_element(t_in, &mut rng);
        let y = random_element(t_in, &mut rng);
        let z = random_element(t_in, &mut rng);
        let lhs = apply(&triple_product(t_in, &x, &y, &z).expect("valid shapes"));
        let rhs = triple_product(t_out, &apply(&x), &apply(&y), &apply(&z)).expect("valid shapes");
        let scale = x.coord_norm() * y.coord_norm() * z.coord_norm();
        if scale > 1e-9 {
            worst = worst.max(lhs.sub(&rhs).coord_norm() / scale);
        }
    }
    worst
}

/// Real-linear least-squares fit on the realified coordinates.
#[derive(Clone, Debug)]
pub struct RealSocleExtension {
    pub matrix: DMatrix<f64>,
    pub max_residual: f64,
}

pub fn extend_to_socle_real(
    t_in: &AtomicTriple,
    t_out: &AtomicTriple,
    samples: &[(Element, Element)],
    tol: f64,
) -> Result<RealSocleExtension, PreserverError> {
    let d_in = 2 * t_in.dim();
    let d_out = 2 * t_out.dim();
    let n = samples.len();
    if n < d_in {
        return Err(PreserverError::RankDeficient);
    }
    let realify = |v: &CVec| -> Vec<f64> {
        v.iter()
            .map(|z| z.re)
            .chain(v.iter().map(|z| z.im))
            .collect()
    };
    let mut xt = DMatrix::<f64>::zeros(n, d_in);
    let mut yt = DMatrix::<f64>::zeros(n, d_out);
    for (row, (x, y)) in samples.iter().enumerate() {
        for (j, val) in realify(&element_to_coords(t_in, x)).into_iter().enumerate() {
            xt[(row, j)] = val;
        }
        for (j, val) in realify(&element_to_coords(t_out, y)).into_iter().enumerate() {
            yt[(row, j)] = val;
        }
    }
    let (solution, _) = crate::kernel::least_squares_solve_real(&xt, &yt, &Tolerance::default())
        .map_err(|e| match e {
            KernelError::RankDeficient { .. } => PreserverError::RankDeficient,
            other => PreserverError::Kernel(other),
        })?;
    let matrix = solution.transpose();
    let mut max_residual = 0.0_f64;
    for (row, _) in samples.iter().enumerate() {
        let xrow = xt.row(row).transpose();
        let yrow = yt.row(row).transpose();
        max_residual = max_residual.max((&matrix * xrow - yrow).norm());
    }
    if max_residual > tol {
        return Err(PreserverError::InconsistentSamples {
            residual: max_residual,
        });
    }
    Ok(RealSocleExtension {
        matrix,
        max_residual,
    })
}

/// Samples minimal tripotents spanning the socle together with their images.
pub fn socle_samples(
    map: &ElementMap,
    t_in: &AtomicTriple,
    per_dim: usize,
    seed: u64,
) -> Result<Vec<(Element, Element)>, PreserverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (s, desc) in t_in.summands().iter().enumerate() {
        for _ in 0..(desc.dim() * per_dim) {
            let e = sample_minimal_tripotent_with(t_in, s, &mut rng)?;
            let image = map(e.element())?;
            out.push((e.element().clone(), image));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Linearity classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummandLinearity {
    ComplexLinear,
    ConjugateLinear,
    HilbertMixed,
}

/// Tags each summand of a real-linear isometry by comparing the image of
/// i*e against +/- i times the image of e on sampled minimal tripotents.
/// Rank >= 2 summands must be consistently one or the other; rank-one
/// summands may mix (the Hilbert-space phenomenon).
pub fn classify_real_linear_isometry(
    map: &ElementMap,
    t_in: &AtomicTriple,
    t_out: &AtomicTriple,
    trials: u64,
    seed: u64,
) -> Result<Vec<SummandLinearity>, PreserverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let work_tol = Tolerance::default();
    let eps = rel_eps(&work_tol);
    let mut tags = Vec::new();
    for (s, desc) in t_in.summands().iter().enumerate() {
        let mut saw_linear = false;
        let mut saw_conjugate = false;
        let mut saw_mixed = false;
        for trial in 0..trials {
            let e = sample_minimal_tripotent_with(t_in, s, &mut rng)?;
            let fe = image_tripotent(t_out, map, &e, trial, &work_tol)?;
            let fie = map(&e.element().scale(c(0.0, 1.0)))?;
            let d_lin = fie.sub(&fe.element().scale(c(0.0, 1.0))).coord_norm();
            let d_conj = fie.add(&fe.element().scale(c(0.0, 1.0))).coord_norm();
            if d_lin <= eps {
                saw_linear = true;
            } else if d_conj <= eps {
                saw_conjugate = true;
            } else {
                saw_mixed = true;
            }
        }
        let tag = match (saw_linear, saw_conjugate, saw_mixed) {
            (true, false, false) => SummandLinearity::ComplexLinear,
            (false, true, false) => SummandLinearity::ConjugateLinear,
            _ => {
                if desc.rank() >= 2 {
                    return Err(PreserverError::InconsistentTag { summand: s });
                }
                SummandLinearity::HilbertMixed
            }
        };
        tags.push(tag);
    }
    Ok(tags)
}

// ---------------------------------------------------------------------------
// The two-by-two counterexample data
// ---------------------------------------------------------------------------

/// Measured values of the hardcoded counterexample family in the 2x2 matrix
/// factor: three minimal tripotents against e = E11 with equal TTP but
/// different distances, and equal distances but different TTP.
#[derive(Clone, Debug, Serialize)]
pub struct Remark35Report {
    pub all_minimal: bool,
    /// TTP(v, e) and TTP(vt, e); both equal 1/3.
    pub ttp_v: [f64; 2],
    pub ttp_vt: [f64; 2],
    /// TTP(u, e) = 1/2.
    pub ttp_u: [f64; 2],
    /// Squared gaps ||e - v||^2 = ||e - u||^2 = (1 + 2 sqrt 2)/(3 sqrt 2).
    pub gap_sq_v: f64,
    pub gap_sq_u: f64,
    /// ||e - vt||^2 = 21/20.
    pub gap_sq_vt: f64,
    pub expected_gap_sq: f64,
    pub expected_gap_sq_vt: f64,
    /// Off-diagonal entries of u solved from its two constraints.
    pub beta: f64,
    pub gamma: f64,
    /// Largest disagreement between the gap formula and the norm distance
    /// over the three pairs.
    pub formula_agreement: f64,
    pub pass: bool,
}

/// The four tripotents of the counterexample: (e, v, vt, u).
pub fn remark35_tripotents() -> (AtomicTriple, [Element; 4]) {
    let t = AtomicTriple::factor(FactorDescriptor::Type1 { p: 2, q: 2 })
        .expect("2x2 factor is valid");
    let e = {
        let mut m = CMat::zeros(2, 2);
        m[(0, 0)] = cr(1.0);
        Element::from_blocks(vec![m])
    };
    let s718 = (7.0_f64 / 18.0).sqrt();
    let v = Element::from_blocks(vec![CMat::from_row_slice(
        2,
        2,
        &[cr(1.0 / 3.0), cr(1.0 / 3.0), cr(s718), cr(s718)],
    )]);
    let s119 = 119.0_f64.sqrt();
    let vt = Element::from_blocks(vec![CMat::from_row_slice(
        2,
        2,
        &[cr(1.0 / 3.0), cr(1.0 / 4.0), cr(s119 / 15.0), cr(s119 / 20.0)],
    )]);
    // u = [[1/2, beta], [gamma, sqrt(3 - sqrt 2)/(3 sqrt 2)]] with
    // beta gamma = (1/2) sqrt(3 - sqrt 2)/(3 sqrt 2) (so that det u = 0)
    // and 1/4 + beta^2 + gamma^2 + (3 - sqrt 2)/18 = 1 (unit Frobenius
    // norm). beta^2 and gamma^2 are the roots of a quadratic.
    let (beta, gamma) = remark35_beta_gamma();
    let u22 = (3.0 - 2.0_f64.sqrt()).sqrt() / (3.0 * 2.0_f64.sqrt());
    let u = Element::from_blocks(vec![CMat::from_row_slice(
        2,
        2,
        &[cr(0.5), cr(beta), cr(gamma), cr(u22)],
    )]);
    (t, [e, v, vt, u])
}

/// Solves beta gamma = (1/2) sqrt(3 - sqrt 2)/(3 sqrt 2) together with
/// beta^2 + gamma^2 = 3/4 - (3 - sqrt 2)/18 for real beta >= gamma > 0.
pub fn remark35_beta_gamma() -> (f64, f64) {
    let product = 0.5 * (3.0 - 2.0_f64.sqrt()).sqrt() / (3.0 * 2.0_f64.sqrt());
    let sum_sq = 0.75 - (3.0 - 2.0_f64.sqrt()) / 18.0;
    let disc = (sum_sq * sum_sq - 4.0 * product * product).sqrt();
    let beta = ((sum_sq + disc) / 2.0).sqrt();
    let gamma = product / beta;
    (beta, gamma)
}

/// Builds the counterexample tripotents and measures all their invariants.
pub fn verify_remark_counterexamples() -> Result<Remark35Report, PreserverError> {
    let (t, [e, v, vt, u]) = remark35_tripotents();
    let tol = Tolerance::default();
    let e = Tripotent::new(&t, e, &tol)?;
    let v = Tripotent::new(&t, v, &tol)?;
    let vt = Tripotent::new(&t, vt, &tol)?;
    let u = Tripotent::new(&t, u, &tol)?;
    let all_minimal =
        e.is_minimal() && v.is_minimal() && vt.is_minimal() && u.is_minimal();

    let ttp_v = ttp(&t, &v, &e)?.0;
    let ttp_vt = ttp(&t, &vt, &e)?.0;
    let ttp_u = ttp(&t, &u, &e)?.0;

    let gap = |a: &Tripotent, b: &Tripotent| -> Result<(f64, f64), PreserverError> {
        let d = gap_distance(&t, a.element(), b.element())?;
        let f = crate::ttp::gap_formula(&t, a, b, &tol)?;
        Ok((d, (d - f).abs()))
    };
    let (d_v, agree_v) = gap(&e, &v)?;
    let (d_vt, agree_vt) = gap(&e, &vt)?;
    let (d_u, agree_u) = gap(&e, &u)?;

    let expected_gap_sq = (1.0 + 2.0 * 2.0_f64.sqrt()) / (3.0 * 2.0_f64.sqrt());
    let expected_gap_sq_vt = 21.0 / 20.0;
    let (beta, gamma) = remark35_beta_gamma();

    let pass = all_minimal
        && (ttp_v - cr(1.0 / 3.0)).norm() <= 1e-12
        && (ttp_vt - cr(1.0 / 3.0)).norm() <= 1e-12
        && (ttp_u - cr(0.5)).norm() <= 1e-12
        && (d_v * d_v - expected_gap_sq).abs() <= 1e-9
        && (d_u * d_u - expected_gap_sq).abs() <= 1e-9
        && (d_vt * d_vt - expected_gap_sq_vt).abs() <= 1e-9
        && (d_v - d_vt).abs() > 1e-3
        && agree_v.max(agree_vt).max(agree_u) <= 1e-7;

    Ok(Remark35Report {
        all_minimal,
        ttp_v: [ttp_v.re, ttp_v.im],
        ttp_vt: [ttp_vt.re, ttp_vt.im],
        ttp_u: [ttp_u.re, ttp_u.im],
        gap_sq_v: d_v * d_v,
        gap_sq_u: d_u * d_u,
        gap_sq_vt: d_vt * d_vt,
        expected_gap_sq,
        expected_gap_sq_vt,
        beta,
        gamma,
        formula_agreement: agree_v.max(agree_vt).max(agree_u),
        pass,
    })
}

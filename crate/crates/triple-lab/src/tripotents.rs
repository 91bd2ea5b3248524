//! Tripotent calculus: verification, Peirce decomposition, the relations
//! between tripotents (orthogonality, order, collinearity, governing), rank,
//! and seeded sampling of minimal tripotents per factor type.
//!
//! Peirce data is computed from the spectral decomposition of L(e,e) in the
//! orthonormal coordinates of each summand, so for types 2 and 3 all
//! dimensions are relative to the subtriple, not the ambient matrix algebra.

use crate::factors::{
    triple_norm, triple_product, triple_product_block, AtomicTriple, Element, FactorDescriptor,
    FactorError,
};
use crate::kernel::{
    c, cr, hermitian_eigensystem, svd_robust, CMat, CVec, KernelError, Tolerance,
    EIGENVALUE_CLUSTER_WIDTH,
};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TripotentError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("element is not a tripotent: ||{{x,x,x}} - x|| = {residual:.3e}")]
    NotATripotent { residual: f64 },
    #[error(
        "L(e,e) eigenvalue {eigenvalue} in summand {summand} is farther than {width:.1e} from {{0, 1/2, 1}}"
    )]
    SpectrumViolation {
        summand: usize,
        eigenvalue: f64,
        width: f64,
    },
    #[error("factor dimension too small: {0}")]
    DimensionTooSmall(String),
    #[error("greedy rank decomposition failed: residual {residual:.3e} after {steps} steps")]
    DecompositionFailed { residual: f64, steps: usize },
}

/// Working threshold for relation decisions and decomposition checks: wide
/// enough to absorb accumulated rounding, far below any structural gap.
pub(crate) fn rel_eps(tol: &Tolerance) -> f64 {
    100.0 * tol.slack(1.0)
}

/// True iff ||{x,x,x} - x|| <= tol * max(1, ||x||^3) in the triple norm.
pub fn is_tripotent(t: &AtomicTriple, x: &Element, tol: &Tolerance) -> Result<bool, FactorError> {
    let cube = triple_product(t, x, x, x)?;
    let residual = triple_norm(t, &cube.sub(x))?;
    let norm = triple_norm(t, x)?;
    Ok(residual <= tol.slack(1.0f64.max(norm.powi(3))))
}

/// Peirce projections and eigenspace bases of one tripotent.
#[derive(Clone, Debug)]
pub struct PeirceSystem {
    /// `projectors[k][s]`: matrix of P_k on summand `s` in coordinates.
    projectors: [Vec<CMat>; 3],
    dims: [usize; 3],
    bases: [Vec<Element>; 3],
}

impl PeirceSystem {
    pub fn dim(&self, k: usize) -> usize {
        self.dims[k]
    }

    /// Orthonormal basis of the Peirce-k space, as elements of the triple.
    pub fn basis(&self, k: usize) -> &[Element] {
        &self.bases[k]
    }

    /// Applies the Peirce-k projection.
    pub fn project(&self, t: &AtomicTriple, k: usize, x: &Element) -> Element {
        let mut out = t.zero();
        for (s, desc) in t.summands().iter().enumerate() {
            let coords = crate::factors::block_to_coords(desc, x.block(s));
            let projected = &self.projectors[k][s] * coords;
            *out.block_mut(s) = crate::factors::block_from_coords(desc, &projected);
        }
        out
    }

    /// Whether x lies in the Peirce-k space up to the working threshold.
    pub fn contains(&self, t: &AtomicTriple, k: usize, x: &Element, tol: &Tolerance) -> bool {
        let px = self.project(t, k, x);
        px.sub(x).coord_norm() <= rel_eps(tol) * x.coord_norm().max(1.0)
    }
}

/// Spectral Peirce decomposition of a tripotent.
///
/// Builds the matrix of L(e,e) on each summand, eigendecomposes, and groups
/// the spectrum at {0, 1/2, 1}. Any eigenvalue farther than the cluster
/// width from those three values signals that the input is not a tripotent
/// to working precision.
pub fn peirce_decompose(
    t: &AtomicTriple,
    e: &Element,
    tol: &Tolerance,
) -> Result<PeirceSystem, TripotentError> {
    t.check_shapes(e)?;
    let mut projectors: [Vec<CMat>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut dims = [0usize; 3];
    let mut bases: [Vec<Element>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    for (s, desc) in t.summands().iter().enumerate() {
        let d = desc.dim();
        let basis = desc.basis();
        let mut l = CMat::zeros(d, d);
        for (j, bj) in basis.iter().enumerate() {
            let image = triple_product_block(desc, e.block(s), e.block(s), bj);
            l.set_column(j, &crate::factors::block_to_coords(desc, &image));
        }
        let eig = hermitian_eigensystem(&l, tol)?;
        let mut summand_projectors = [CMat::zeros(d, d), CMat::zeros(d, d), CMat::zeros(d, d)];
        for (i, lambda) in eig.eigenvalues.iter().enumerate() {
            let k = if (lambda - 1.0).abs() <= EIGENVALUE_CLUSTER_WIDTH {
                2
            } else if (lambda - 0.5).abs() <= EIGENVALUE_CLUSTER_WIDTH {
                1
            } else if lambda.abs() <= EIGENVALUE_CLUSTER_WIDTH {
                0
            } else {
                return Err(TripotentError::SpectrumViolation {
                    summand: s,
                    eigenvalue: *lambda,
                    width: EIGENVALUE_CLUSTER_WIDTH,
                });
            };
            summand_projectors[k] += &eig.projectors[i];
            dims[k] += eig.multiplicity(i);
            for col in 0..eig.basis[i].ncols() {
                let coords = eig.basis[i].column(col).into_owned();
                let mut elem = t.zero();
                *elem.block_mut(s) = crate::factors::block_from_coords(desc, &coords);
                bases[k].push(elem);
            }
        }
        for (k, p) in summand_projectors.into_iter().enumerate() {
            projectors[k].push(p);
        }
    }

    Ok(PeirceSystem {
        projectors,
        dims,
        bases,
    })
}

/// A validated tripotent with cached Peirce data and rank/minimality flags.
#[derive(Clone, Debug)]
pub struct Tripotent {
    element: Element,
    peirce: PeirceSystem,
    home_summand: Option<usize>,
    minimal: bool,
    complete: bool,
    rank: usize,
}

impl Tripotent {
    pub fn new(t: &AtomicTriple, element: Element, tol: &Tolerance) -> Result<Self, TripotentError> {
        t.check_member(&element, tol)?;
        let cube = triple_product(t, &element, &element, &element)?;
        let residual = triple_norm(t, &cube.sub(&element))?;
        let norm = triple_norm(t, &element)?;
        if residual > tol.slack(1.0f64.max(norm.powi(3))) {
            return Err(TripotentError::NotATripotent { residual });
        }
        let peirce = peirce_decompose(t, &element, tol)?;
        let minimal = peirce.dim(2) == 1;
        let complete = peirce.dim(0) == 0;
        let home_summand = element.support_summand(rel_eps(tol));
        let rank = greedy_rank(t, &element, tol)?;
        Ok(Tripotent {
            element,
            peirce,
            home_summand,
            minimal,
            complete,
            rank,
        })
    }

    pub fn element(&self) -> &Element {
        &self.element
    }

    pub fn peirce(&self) -> &PeirceSystem {
        &self.peirce
    }

    /// The single summand carrying the tripotent, when there is exactly one.
    pub fn home_summand(&self) -> Option<usize> {
        self.home_summand
    }

    pub fn is_minimal(&self) -> bool {
        self.minimal
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Rank of a tripotent as the number of orthogonal minimal pieces obtained
/// by greedy extraction, blockwise over summands.
pub fn tripotent_rank(
    t: &AtomicTriple,
    e: &Tripotent,
    tol: &Tolerance,
) -> Result<usize, TripotentError> {
    greedy_rank(t, e.element(), tol)
}

fn greedy_rank(t: &AtomicTriple, e: &Element, tol: &Tolerance) -> Result<usize, TripotentError> {
    let eps = rel_eps(tol);
    let mut total = 0;
    for (s, desc) in t.summands().iter().enumerate() {
        let mut rem = e.block(s).clone();
        let mut steps = 0;
        while rem.norm() > eps {
            if steps >= desc.rank() {
                return Err(TripotentError::DecompositionFailed {
                    residual: rem.norm(),
                    steps,
                });
            }
            let piece = extract_minimal_block(desc, &rem, tol)?;
            let next = &rem - &piece;
            // The extracted piece must sit below the remainder: the
            // difference stays a tripotent and is orthogonal to the piece.
            let cube_next = triple_product_block(desc, &next, &next, &next);
            let orth = triple_product_block(desc, &piece, &piece, &next);
            if (cube_next - &next).norm() > eps || orth.norm() > eps {
                return Err(TripotentError::DecompositionFailed {
                    residual: rem.norm(),
                    steps,
                });
            }
            rem = next;
            steps += 1;
            total += 1;
        }
    }
    Ok(total)
}

/// One minimal tripotent below a nonzero tripotent block.
fn extract_minimal_block(
    desc: &FactorDescriptor,
    block: &CMat,
    tol: &Tolerance,
) -> Result<CMat, TripotentError> {
    match desc {
        FactorDescriptor::Type1 { .. } => {
            // Largest singular value first; it is 1 for a partial isometry.
            let (u, _svals, v) = svd_robust(block);
            Ok(u.column(0) * v.column(0).adjoint())
        }
        FactorDescriptor::Type3 { .. } => {
            let xi = conjugation_fixed_vector(block, tol)?;
            Ok(&xi * xi.transpose())
        }
        FactorDescriptor::Type2 { .. } => {
            let range = block * block.adjoint();
            let x = leading_range_vector(&range, tol)?;
            let y = block * x.conjugate();
            let ynorm = y.norm();
            if ynorm < 0.5 {
                return Err(TripotentError::DecompositionFailed {
                    residual: ynorm,
                    steps: 0,
                });
            }
            let y = y.scale(1.0 / ynorm);
            Ok(&y * x.transpose() - &x * y.transpose())
        }
        FactorDescriptor::Type4 { n } => {
            let h = crate::factors::spin_inner(block, block).re;
            let cc = crate::factors::spin_inner(block, &block.conjugate());
            if cc.norm() < 0.25 {
                // Already minimal: <b, conj b> = 0 and <b,b> = 1/2.
                return Ok(block.clone());
            }
            // Unitary-type tripotent lambda * a with a real unit vector.
            let lambda = cc.sqrt();
            let a_mat = block.map(|z| z / lambda);
            let a = CVec::from_fn(*n, |i, _| a_mat[(i, 0)]);
            let real_a = a.map(|z| cr(z.re));
            let b = deterministic_real_perp(std::slice::from_ref(&real_a), *n).ok_or_else(|| {
                TripotentError::DimensionTooSmall(
                    "spin factor of dimension < 2 has no rank-two split".into(),
                )
            })?;
            let _ = h;
            let half = CVec::from_fn(*n, |i, _| (real_a[i] + c(0.0, 1.0) * b[i]) * lambda / cr(2.0));
            Ok(CMat::from_fn(*n, 1, |i, _| half[i]))
        }
    }
}

/// Deterministic unit vector in the range of a Hermitian projection-like
/// matrix: leading spectral basis vector.
fn leading_range_vector(range: &CMat, tol: &Tolerance) -> Result<CVec, TripotentError> {
    let eig = hermitian_eigensystem(range, tol)?;
    if eig.eigenvalues.is_empty() || eig.eigenvalues[0] < 0.5 {
        return Err(TripotentError::DecompositionFailed {
            residual: eig.eigenvalues.first().copied().unwrap_or(0.0),
            steps: 0,
        });
    }
    Ok(eig.basis[0].column(0).into_owned())
}

/// Fixed vector of the conjugate-linear map x -> b * conj(x) on the range of
/// a symmetric partial isometry b; it satisfies b = u u^t + rest.
fn conjugation_fixed_vector(block: &CMat, tol: &Tolerance) -> Result<CVec, TripotentError> {
    let range = block * block.adjoint();
    let xi = leading_range_vector(&range, tol)?;
    let cxi = block * xi.conjugate();
    let mut w = &xi + &cxi;
    if w.norm() < 0.5 {
        let ixi = xi.map(|z| z * c(0.0, 1.0));
        w = &ixi + block * ixi.conjugate();
    }
    if w.norm() < 1e-8 {
        return Err(TripotentError::DecompositionFailed {
            residual: w.norm(),
            steps: 0,
        });
    }
    Ok(w.normalize())
}

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

/// Classification of an ordered pair of tripotents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RelationFlags {
    /// {e,e,v} = 0.
    pub orthogonal: bool,
    /// e <= v: v - e is a tripotent orthogonal to e.
    pub leq: bool,
    /// e and v lie in each other's Peirce-1 space.
    pub collinear: bool,
    /// e governs v: v in E_2(e) and e in E_1(v).
    pub governs_ev: bool,
    /// v governs e.
    pub governs_ve: bool,
}

pub fn classify_relation(
    t: &AtomicTriple,
    e: &Tripotent,
    v: &Tripotent,
    tol: &Tolerance,
) -> Result<RelationFlags, TripotentError> {
    let eps = rel_eps(tol);
    let ee_v = triple_product(t, e.element(), e.element(), v.element())?;
    let orthogonal = ee_v.coord_norm() <= eps * v.element().coord_norm().max(1.0);

    let diff = v.element().sub(e.element());
    let leq = is_tripotent(t, &diff, tol)?
        && triple_product(t, &diff, &diff, e.element())?.coord_norm() <= eps;

    let collinear = e.peirce().contains(t, 1, v.element(), tol)
        && v.peirce().contains(t, 1, e.element(), tol);
    let governs_ev = e.peirce().contains(t, 2, v.element(), tol)
        && v.peirce().contains(t, 1, e.element(), tol);
    let governs_ve = v.peirce().contains(t, 2, e.element(), tol)
        && e.peirce().contains(t, 1, v.element(), tol);

    Ok(RelationFlags {
        orthogonal,
        leq,
        collinear,
        governs_ev,
        governs_ve,
    })
}

// ---------------------------------------------------------------------------
// Random vectors and minimal tripotent sampling
// ---------------------------------------------------------------------------

pub(crate) fn random_complex_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    loop {
        let v = CVec::from_fn(n, |_, _| crate::factors::gaussian_complex(rng));
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

pub(crate) fn random_real_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    loop {
        let v = CVec::from_fn(n, |_, _| cr(rng.sample::<f64, _>(StandardNormal)));
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

/// Projects `v` off the span of `others` and normalizes; None if v lies in
/// the span numerically.
pub(crate) fn orthonormalize_against(v: &CVec, others: &[CVec]) -> Option<CVec> {
    let mut w = v.clone();
    for _ in 0..2 {
        for o in others {
            let coeff = o.dotc(&w);
            w -= o.map(|z| z * coeff);
        }
    }
    if w.norm() > 1e-8 {
        Some(w.normalize())
    } else {
        None
    }
}

/// First standard basis vector with a usable component off the span; keeps
/// frame completions deterministic.
pub(crate) fn deterministic_perp(others: &[CVec], n: usize) -> Option<CVec> {
    for i in 0..n {
        let mut e = CVec::zeros(n);
        e[i] = cr(1.0);
        if let Some(w) = orthonormalize_against(&e, others) {
            return Some(w);
        }
    }
    None
}

/// Real unit vector orthogonal to the given real vectors.
pub(crate) fn deterministic_real_perp(others: &[CVec], n: usize) -> Option<CVec> {
    for i in 0..n {
        let mut e = CVec::zeros(n);
        e[i] = cr(1.0);
        if let Some(w) = orthonormalize_against(&e, others) {
            let re = w.map(|z| cr(z.re));
            if re.norm() > 1e-8 {
                return Some(re.normalize());
            }
        }
    }
    None
}

fn random_real_orthonormal_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (CVec, CVec) {
    loop {
        let a = random_real_unit(n, rng);
        let b0 = random_real_unit(n, rng);
        if let Some(b) = orthonormalize_against(&b0, std::slice::from_ref(&a)) {
            let b = b.map(|z| cr(z.re));
            if b.norm() > 1e-8 {
                return (a, b.normalize());
            }
        }
    }
}

/// Minimal type-4 tripotent (a + i b)/2 from real orthonormal a, b.
pub fn spin_minimal_from_frame(a: &CVec, b: &CVec) -> CMat {
    let n = a.len();
    CMat::from_fn(n, 1, |i, _| (a[i] + c(0.0, 1.0) * b[i]) * cr(0.5))
}

/// Random minimal tripotent block of one factor.
pub fn random_minimal_block<R: Rng + ?Sized>(
    desc: &FactorDescriptor,
    rng: &mut R,
) -> Result<CMat, TripotentError> {
    match *desc {
        FactorDescriptor::Type1 { p, q } => {
            let xi = random_complex_unit(p, rng);
            let eta = random_complex_unit(q, rng);
            Ok(&xi * eta.adjoint())
        }
        FactorDescriptor::Type3 { n, .. } => {
            let xi = random_complex_unit(n, rng);
            Ok(&xi * xi.transpose())
        }
        FactorDescriptor::Type2 { n } => {
            if n < 2 {
                return Err(TripotentError::DimensionTooSmall(
                    "type 2 needs n >= 2".into(),
                ));
            }
            let a = random_complex_unit(n, rng);
            let b = loop {
                let b0 = random_complex_unit(n, rng);
                if let Some(b) = orthonormalize_against(&b0, std::slice::from_ref(&a)) {
                    break b;
                }
            };
            Ok(&a * b.transpose() - &b * a.transpose())
        }
        FactorDescriptor::Type4 { n } => {
            let (a, b) = random_real_orthonormal_pair(n, rng);
            Ok(spin_minimal_from_frame(&a, &b))
        }
    }
}

/// Seeded sampling of a minimal tripotent supported on one summand.
pub fn sample_minimal_tripotent(
    t: &AtomicTriple,
    summand: usize,
    seed: u64,
) -> Result<Tripotent, TripotentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_minimal_tripotent_with(t, summand, &mut rng)
}

pub fn sample_minimal_tripotent_with<R: Rng + ?Sized>(
    t: &AtomicTriple,
    summand: usize,
    rng: &mut R,
) -> Result<Tripotent, TripotentError> {
    let desc = t.summand(summand)?;
    let tol = Tolerance::default();
    let block = random_minimal_block(&desc, rng)?;
    let mut element = t.zero();
    *element.block_mut(summand) = block;
    let trip = Tripotent::new(t, element, &tol)?;
    debug_assert!(trip.is_minimal());
    Ok(trip)
}

/// Random minimal tripotent orthogonal to `e` in the same summand; None for
/// factors of rank one, where no such partner exists.
pub fn sample_orthogonal_minimal_with<R: Rng + ?Sized>(
    t: &AtomicTriple,
    summand: usize,
    e: &Tripotent,
    rng: &mut R,
) -> Result<Option<Tripotent>, TripotentError> {
    let desc = t.summand(summand)?;
    if desc.rank() < 2 {
        return Ok(None);
    }
    let tol = Tolerance::default();
    let block = e.element().block(summand);
    let out = match desc {
        FactorDescriptor::Type1 { p, q } => {
            let (xi, eta) = type1_rank_one_vectors(block).ok_or({
                TripotentError::DecompositionFailed {
                    residual: 0.0,
                    steps: 0,
                }
            })?;
            let xi2 = loop {
                if let Some(v) = orthonormalize_against(&random_complex_unit(p, rng), std::slice::from_ref(&xi))
                {
                    break v;
                }
            };
            let eta2 = loop {
                if let Some(v) =
                    orthonormalize_against(&random_complex_unit(q, rng), std::slice::from_ref(&eta))
                {
                    break v;
                }
            };
            &xi2 * eta2.adjoint()
        }
        FactorDescriptor::Type2 { n } => {
            let (xi, eta) = type2_support_pair(block).ok_or({
                TripotentError::DecompositionFailed {
                    residual: 0.0,
                    steps: 0,
                }
            })?;
            let a = loop {
                if let Some(v) = orthonormalize_against(
                    &random_complex_unit(n, rng),
                    &[xi.clone(), eta.clone()],
                ) {
                    break v;
                }
            };
            let b = loop {
                if let Some(v) = orthonormalize_against(
                    &random_complex_unit(n, rng),
                    &[xi.clone(), eta.clone(), a.clone()],
                ) {
                    break v;
                }
            };
            &a * b.transpose() - &b * a.transpose()
        }
        FactorDescriptor::Type3 { n } => {
            let xi = type3_rank_one_vector(block).ok_or({
                TripotentError::DecompositionFailed {
                    residual: 0.0,
                    steps: 0,
                }
            })?;
            let xi2 = loop {
                if let Some(v) = orthonormalize_against(&random_complex_unit(n, rng), std::slice::from_ref(&xi))
                {
                    break v;
                }
            };
            &xi2 * xi2.transpose()
        }
        FactorDescriptor::Type4 { .. } => {
            // E_0(e) = C conj(e): the orthogonal minimals are its phases.
            let phase = random_phase(rng);
            block.conjugate().map(|z| z * phase)
        }
    };
    let mut element = t.zero();
    *element.block_mut(summand) = out;
    let trip = Tripotent::new(t, element, &tol)?;
    Ok(Some(trip))
}

/// Random minimal tripotent collinear to `e` in the same summand; None when
/// the factor has no collinear pairs (type 3, small spin factors).
pub fn sample_collinear_minimal_with<R: Rng + ?Sized>(
    t: &AtomicTriple,
    summand: usize,
    e: &Tripotent,
    rng: &mut R,
) -> Result<Option<Tripotent>, TripotentError> {
    let desc = t.summand(summand)?;
    let tol = Tolerance::default();
    let block = e.element().block(summand);
    let out = match desc {
        FactorDescriptor::Type1 { p, q } => {
            if p < 2 && q < 2 {
                return Ok(None);
            }
            let (xi, eta) = type1_rank_one_vectors(block).ok_or({
                TripotentError::DecompositionFailed {
                    residual: 0.0,
                    steps: 0,
                }
            })?;
            // Share the row space or the column space, at random.
            let share_row = q >= 2 && (p < 2 || rng.gen::<bool>());
            if share_row {
                let eta2 = loop {
                    if let Some(v) =
                        orthonormalize_against(&random_complex_unit(q, rng), std::slice::from_ref(&eta))
                    {
                        break v;
                    }
                };
                &xi * eta2.adjoint()
            } else {
                let xi2 = loop {
                    if let Some(v) =
                        orthonormalize_against(&random_complex_unit(p, rng), std::slice::from_ref(&xi))
                    {
                        break v;
                    }
                };
                &xi2 * eta.adjoint()
            }
        }
        FactorDescriptor::Type2 { n } => {
            if n < 3 {
                return Ok(None);
            }
            let (xi, eta) = type2_support_pair(block).ok_or({
                TripotentError::DecompositionFailed {
                    residual: 0.0,
                    steps: 0,
                }
            })?;
            let cvec = loop {
                if let Some(v) = orthonormalize_against(
                    &random_complex_unit(n, rng),
                    &[xi.clone(), eta.clone()],
                ) {
                    break v;
                }
            };
            // Share one leg of the wedge.
            if rng.gen::<bool>() {
                &xi * cvec.transpose() - &cvec * xi.transpose()
            } else {
                &eta * cvec.transpose() - &cvec * eta.transpose()
            }
        }
        FactorDescriptor::Type3 { .. } => return Ok(None),
        FactorDescriptor::Type4 { n } => {
            if n < 4 {
                return Ok(None);
            }
            let a = CVec::from_fn(n, |i, _| cr(2.0 * block[(i, 0)].re));
            let b = CVec::from_fn(n, |i, _| cr(2.0 * block[(i, 0)].im));
            let (cvec, d) = loop {
                let c0 = random_real_unit(n, rng);
                let Some(cv) = orthonormalize_against(&c0, &[a.clone(), b.clone()]) else {
                    continue;
                };
                let cv = cv.map(|z| cr(z.re)).normalize();
                let d0 = random_real_unit(n, rng);
                if let Some(dv) =
                    orthonormalize_against(&d0, &[a.clone(), b.clone(), cv.clone()])
                {
                    let dv = dv.map(|z| cr(z.re));
                    if dv.norm() > 1e-8 {
                        break (cv, dv.normalize());
                    }
                }
            };
            spin_minimal_from_frame(&cvec, &d)
        }
    };
    let mut element = t.zero();
    *element.block_mut(summand) = out;
    Ok(Some(Tripotent::new(t, element, &tol)?))
}

fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    c(theta.cos(), theta.sin())
}

// ---------------------------------------------------------------------------
// Frame-vector recovery for minimal tripotents
// ---------------------------------------------------------------------------

/// Unit vectors (xi, eta) with block = xi eta* for a rank-one block.
pub fn type1_rank_one_vectors(block: &CMat) -> Option<(CVec, CVec)> {
    let (u, svals, v) = svd_robust(block);
    if (svals[0] - 1.0).abs() > 1e-6 {
        return None;
    }
    let xi = u.column(0).into_owned();
    let eta = v.column(0).into_owned();
    let rebuilt = &xi * eta.adjoint();
    if (block - rebuilt).norm() > 1e-6 {
        return None;
    }
    Some((xi, eta))
}

/// Unit vector xi with block = xi xi^t for a minimal symmetric block.
pub fn type3_rank_one_vector(block: &CMat) -> Option<CVec> {
    let tol = Tolerance::default();
    let xi = conjugation_fixed_vector(block, &tol).ok()?;
    let rebuilt = &xi * xi.transpose();
    if (block - rebuilt).norm() > 1e-6 {
        return None;
    }
    Some(xi)
}

/// Orthonormal (xi, eta) with block = xi eta^t - eta xi^t for a minimal
/// antisymmetric block.
pub fn type2_support_pair(block: &CMat) -> Option<(CVec, CVec)> {
    let tol = Tolerance::default();
    let range = block * block.adjoint();
    let eta = leading_range_vector(&range, &tol).ok()?;
    let xi = block * eta.conjugate();
    if (xi.norm() - 1.0).abs() > 1e-6 {
        return None;
    }
    let xi = xi.normalize();
    let rebuilt = &xi * eta.transpose() - &eta * xi.transpose();
    if (block - rebuilt).norm() > 1e-6 {
        return None;
    }
    Some((xi, eta))
}

/// Real orthonormal (a, b) with block = (a + i b)/2 for a minimal spin block.
pub fn type4_real_frame(block: &CMat) -> Option<(CVec, CVec)> {
    let n = block.nrows();
    let a = CVec::from_fn(n, |i, _| cr(2.0 * block[(i, 0)].re));
    let b = CVec::from_fn(n, |i, _| cr(2.0 * block[(i, 0)].im));
    if (a.norm() - 1.0).abs() > 1e-6 || (b.norm() - 1.0).abs() > 1e-6 {
        return None;
    }
    if a.dotc(&b).norm() > 1e-6 {
        return None;
    }
    Some((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::{element_to_coords, random_element, spin_inner};
    use proptest::prelude::*;

    fn m2() -> AtomicTriple {
        AtomicTriple::factor(FactorDescriptor::Type1 { p: 2, q: 2 }).unwrap()
    }

    fn unit_elem(t: &AtomicTriple, i: usize, j: usize) -> Element {
        let (rows, cols) = t.summands()[0].block_shape();
        let mut m = CMat::zeros(rows, cols);
        m[(i, j)] = cr(1.0);
        Element::from_blocks(vec![m])
    }

    /// The rank-one tripotent from the two-by-two counterexample family.
    pub fn remark_v() -> CMat {
        let s = (7.0f64 / 18.0).sqrt();
        CMat::from_row_slice(
            2,
            2,
            &[cr(1.0 / 3.0), cr(1.0 / 3.0), cr(s), cr(s)],
        )
    }

    #[test]
    fn matrix_unit_is_tripotent_and_scaled_one_is_not() {
        let t = m2();
        let tol = Tolerance::default();
        let e = unit_elem(&t, 0, 0);
        assert!(is_tripotent(&t, &e, &tol).unwrap());
        assert!(!is_tripotent(&t, &e.scale(cr(0.9)), &tol).unwrap());
        let v = Element::from_blocks(vec![remark_v()]);
        assert!(is_tripotent(&t, &v, &tol).unwrap());
    }

    #[test]
    fn peirce_dims_for_matrix_unit() {
        let t = m2();
        let tol = Tolerance::default();
        let e = Tripotent::new(&t, unit_elem(&t, 0, 0), &tol).unwrap();
        assert_eq!(e.peirce().dim(2), 1);
        assert_eq!(e.peirce().dim(1), 2);
        assert_eq!(e.peirce().dim(0), 1);
        assert!(e.is_minimal());
        assert!(!e.is_complete());
        assert_eq!(e.rank(), 1);
        assert_eq!(e.home_summand(), Some(0));
    }

    #[test]
    fn complete_diagonal_tripotent() {
        let t = m2();
        let tol = Tolerance::default();
        let e = unit_elem(&t, 0, 0).add(&unit_elem(&t, 1, 1));
        let e = Tripotent::new(&t, e, &tol).unwrap();
        assert_eq!(e.peirce().dim(0), 0);
        assert!(e.is_complete());
        assert!(!e.is_minimal());
        assert_eq!(e.rank(), 2);
    }

    #[test]
    fn spin_minimal_has_one_dimensional_peirce_two() {
        let t = AtomicTriple::factor(FactorDescriptor::Type4 { n: 2 }).unwrap();
        let tol = Tolerance::default();
        let x = Element::from_blocks(vec![CMat::from_fn(2, 1, |i, _| {
            if i == 0 {
                cr(0.5)
            } else {
                c(0.0, 0.5)
            }
        })]);
        let x = Tripotent::new(&t, x, &tol).unwrap();
        assert_eq!(x.peirce().dim(2), 1);
        assert!(x.is_minimal());
        assert_eq!(x.rank(), 1);
    }

    #[test]
    fn spin_real_direction_is_complete_rank_two() {
        let t = AtomicTriple::factor(FactorDescriptor::Type4 { n: 2 }).unwrap();
        let tol = Tolerance::default();
        let mut e = t.zero();
        e.block_mut(0)[(0, 0)] = cr(1.0);
        let e = Tripotent::new(&t, e, &tol).unwrap();
        assert!(e.is_complete());
        assert!(!e.is_minimal());
        assert_eq!(e.rank(), 2);
    }

    #[test]
    fn antisymmetric_wedge_is_minimal_in_its_subtriple() {
        let t = AtomicTriple::factor(FactorDescriptor::Type2 { n: 3 }).unwrap();
        let tol = Tolerance::default();
        let mut b = CMat::zeros(3, 3);
        b[(0, 1)] = cr(1.0);
        b[(1, 0)] = cr(-1.0);
        let e = Tripotent::new(&t, Element::from_blocks(vec![b]), &tol).unwrap();
        assert_eq!(e.peirce().dim(2), 1);
        assert!(e.is_minimal());
        assert_eq!(e.rank(), 1);
    }

    #[test]
    fn relation_classification_on_matrix_units() {
        let t = m2();
        let tol = Tolerance::default();
        let e11 = Tripotent::new(&t, unit_elem(&t, 0, 0), &tol).unwrap();
        let e22 = Tripotent::new(&t, unit_elem(&t, 1, 1), &tol).unwrap();
        let e12 = Tripotent::new(&t, unit_elem(&t, 0, 1), &tol).unwrap();
        let diag = Tripotent::new(
            &t,
            unit_elem(&t, 0, 0).add(&unit_elem(&t, 1, 1)),
            &tol,
        )
        .unwrap();

        let r = classify_relation(&t, &e11, &e22, &tol).unwrap();
        assert!(r.orthogonal && !r.collinear && !r.leq);

        let r = classify_relation(&t, &e11, &e12, &tol).unwrap();
        assert!(r.collinear && !r.orthogonal);

        let r = classify_relation(&t, &e11, &diag, &tol).unwrap();
        assert!(r.leq && !r.orthogonal && !r.collinear);

        // E11 governs nothing here, but the diagonal governs no minimal
        // either; check a genuine governing pair in the symmetric factor.
        let t3 = AtomicTriple::factor(FactorDescriptor::Type3 { n: 2 }).unwrap();
        let v = Tripotent::new(&t3, unit_elem(&t3, 0, 0), &tol).unwrap();
        let mut ub = CMat::zeros(2, 2);
        ub[(0, 1)] = cr(1.0);
        ub[(1, 0)] = cr(1.0);
        let u = Tripotent::new(&t3, Element::from_blocks(vec![ub]), &tol).unwrap();
        let r = classify_relation(&t3, &u, &v, &tol).unwrap();
        assert!(r.governs_ev && !r.governs_ve);
        assert_eq!(u.rank(), 2);
    }

    #[test]
    fn sampled_minimal_tripotents_are_minimal_across_types() {
        let tol = Tolerance::default();
        for desc in [
            FactorDescriptor::Type1 { p: 2, q: 3 },
            FactorDescriptor::Type2 { n: 4 },
            FactorDescriptor::Type3 { n: 3 },
            FactorDescriptor::Type4 { n: 4 },
        ] {
            let t = AtomicTriple::factor(desc).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2024);
            for _ in 0..1000 {
                let e = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
                assert!(e.is_minimal(), "non-minimal sample in {desc:?}");
                assert!(is_tripotent(&t, e.element(), &tol).unwrap());
            }
        }
    }

    #[test]
    fn type1_sample_is_rank_one_with_unit_singular_value() {
        let t = AtomicTriple::factor(FactorDescriptor::Type1 { p: 2, q: 3 }).unwrap();
        let e = sample_minimal_tripotent(&t, 0, 99).unwrap();
        let svd = e.element().block(0).clone().svd(false, false);
        let mut svs: Vec<f64> = svd.singular_values.iter().cloned().collect();
        svs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((svs[0] - 1.0).abs() < 1e-10);
        assert!(svs[1].abs() < 1e-10);
    }

    #[test]
    fn spin_frame_construction_matches_reference_point() {
        let a = CVec::from_vec(vec![cr(1.0), cr(0.0)]);
        let b = CVec::from_vec(vec![cr(0.0), cr(1.0)]);
        let x = spin_minimal_from_frame(&a, &b);
        assert!((x[(0, 0)] - cr(0.5)).norm() < 1e-15);
        assert!((x[(1, 0)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((spin_inner(&x, &x).re - 0.5).abs() < 1e-15);
        assert!(spin_inner(&x, &x.conjugate()).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_and_collinear_samplers_deliver_the_relation() {
        let tol = Tolerance::default();
        for desc in [
            FactorDescriptor::Type1 { p: 2, q: 3 },
            FactorDescriptor::Type2 { n: 4 },
            FactorDescriptor::Type3 { n: 3 },
            FactorDescriptor::Type4 { n: 4 },
        ] {
            let t = AtomicTriple::factor(desc).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            for _ in 0..25 {
                let e = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
                if let Some(v) = sample_orthogonal_minimal_with(&t, 0, &e, &mut rng).unwrap() {
                    let r = classify_relation(&t, &e, &v, &tol).unwrap();
                    assert!(r.orthogonal, "{desc:?} orthogonal sampler failed");
                    // M-orthogonality of orthogonal tripotents. The spin
                    // norm evaluates a square root at a vanishing radicand
                    // here, so its noise floor is sqrt(eps) ~ 1e-8.
                    let plus = triple_norm(&t, &e.element().add(v.element())).unwrap();
                    let minus = triple_norm(&t, &e.element().sub(v.element())).unwrap();
                    assert!(
                        (plus - 1.0).abs() < 1e-7 && (minus - 1.0).abs() < 1e-7,
                        "{desc:?}: plus={plus} minus={minus}"
                    );
                }
                if let Some(v) = sample_collinear_minimal_with(&t, 0, &e, &mut rng).unwrap() {
                    let r = classify_relation(&t, &e, &v, &tol).unwrap();
                    assert!(r.collinear, "{desc:?} collinear sampler failed");
                }
            }
        }
    }

    /// cp-characterization: minimal e, v are orthogonal exactly when both
    /// perturbations stay inside the unit ball.
    #[test]
    fn contractive_perturbation_characterizes_orthogonality() {
        let tol = Tolerance::default();
        let t = AtomicTriple::factor(FactorDescriptor::Type1 { p: 2, q: 3 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let e = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
            let v = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
            let r = classify_relation(&t, &e, &v, &tol).unwrap();
            let plus = triple_norm(&t, &e.element().add(v.element())).unwrap();
            let minus = triple_norm(&t, &e.element().sub(v.element())).unwrap();
            let inside = plus.max(minus) <= 1.0 + 1e-9;
            assert_eq!(r.orthogonal, inside);
        }
        let e = sample_minimal_tripotent(&t, 0, 8).unwrap();
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        let v = sample_orthogonal_minimal_with(&t, 0, &e, &mut rng2)
            .unwrap()
            .unwrap();
        let plus = triple_norm(&t, &e.element().add(v.element())).unwrap();
        let minus = triple_norm(&t, &e.element().sub(v.element())).unwrap();
        assert!(plus.max(minus) <= 1.0 + 1e-9);
    }

    #[test]
    fn spectrum_violation_reported_for_near_tripotent_garbage() {
        let t = m2();
        let tol = Tolerance::default();
        let x = unit_elem(&t, 0, 0).scale(cr(0.7));
        match peirce_decompose(&t, &x, &tol) {
            Err(TripotentError::SpectrumViolation { .. }) => {}
            other => panic!("expected SpectrumViolation, got {other:?}"),
        }
    }

    #[test]
    fn frame_recovery_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let d1 = FactorDescriptor::Type1 { p: 3, q: 2 };
            let b = random_minimal_block(&d1, &mut rng).unwrap();
            let (xi, eta) = type1_rank_one_vectors(&b).unwrap();
            assert!((&xi * eta.adjoint() - &b).norm() < 1e-9);

            let d3 = FactorDescriptor::Type3 { n: 3 };
            let b = random_minimal_block(&d3, &mut rng).unwrap();
            let xi = type3_rank_one_vector(&b).unwrap();
            assert!((&xi * xi.transpose() - &b).norm() < 1e-9);

            let d2 = FactorDescriptor::Type2 { n: 4 };
            let b = random_minimal_block(&d2, &mut rng).unwrap();
            let (xi, eta) = type2_support_pair(&b).unwrap();
            assert!((&xi * eta.transpose() - &eta * xi.transpose() - &b).norm() < 1e-9);

            let d4 = FactorDescriptor::Type4 { n: 5 };
            let b = random_minimal_block(&d4, &mut rng).unwrap();
            let (a, bb) = type4_real_frame(&b).unwrap();
            assert!((spin_minimal_from_frame(&a, &bb) - &b).norm() < 1e-9);
        }
    }

    proptest! {
        /// Peirce arithmetic: {E_k, E_l, E_m} lands in E_{k-l+m} and the
        /// mixed products {E_2, E_0, .} vanish.
        #[test]
        fn peirce_arithmetic(seed in 0u64..60) {
            let descs = [
                FactorDescriptor::Type1 { p: 2, q: 3 },
                FactorDescriptor::Type2 { n: 4 },
                FactorDescriptor::Type3 { n: 3 },
                FactorDescriptor::Type4 { n: 4 },
            ];
            let t = AtomicTriple::factor(descs[(seed % 4) as usize]).unwrap();
            let tol = Tolerance::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
            let x = random_element(&t, &mut rng);
            let y = random_element(&t, &mut rng);
            let z = random_element(&t, &mut rng);
            let parts = |w: &Element| {
                [
                    e.peirce().project(&t, 0, w),
                    e.peirce().project(&t, 1, w),
                    e.peirce().project(&t, 2, w),
                ]
            };
            let xs = parts(&x);
            let ys = parts(&y);
            let zs = parts(&z);
            for k in 0..3usize {
                for l in 0..3usize {
                    for m in 0..3usize {
                        let p = triple_product(&t, &xs[k], &ys[l], &zs[m]).unwrap();
                        let target = k as i64 - l as i64 + m as i64;
                        if (0..=2).contains(&target) {
                            let projected = e.peirce().project(&t, target as usize, &p);
                            prop_assert!(projected.sub(&p).coord_norm() <= 1e-8 * p.coord_norm().max(1.0));
                        } else {
                            prop_assert!(p.coord_norm() <= 1e-8);
                        }
                    }
                }
            }
            // {E2, E0, E} = {E0, E2, E} = 0.
            let whole = random_element(&t, &mut rng);
            let p20 = triple_product(&t, &xs[2], &ys[0], &whole).unwrap();
            let p02 = triple_product(&t, &xs[0], &ys[2], &whole).unwrap();
            prop_assert!(p20.coord_norm() <= 1e-8);
            prop_assert!(p02.coord_norm() <= 1e-8);
            // Projectors resolve the identity.
            let resum = xs[0].add(&xs[1]).add(&xs[2]);
            prop_assert!(resum.sub(&x).coord_norm() <= 1e-9 * x.coord_norm().max(1.0));
            let coords = element_to_coords(&t, &x);
            prop_assert!(coords.len() == t.dim());
            let _ = tol;
        }

        /// Independent algebraic route to the Peirce projections: for a
        /// tripotent e, P_2 = Q(e)^2, P_1 = 2(L(e,e) - Q(e)^2), and
        /// P_0 = Id - 2 L(e,e) + Q(e)^2, where Q(e)x = {e,x,e}. The
        /// spectral projectors must agree with all three.
        #[test]
        fn algebraic_peirce_identities_match_spectral_projectors(seed in 0u64..60) {
            let descs = [
                FactorDescriptor::Type1 { p: 2, q: 3 },
                FactorDescriptor::Type2 { n: 4 },
                FactorDescriptor::Type3 { n: 3 },
                FactorDescriptor::Type4 { n: 4 },
            ];
            let t = AtomicTriple::factor(descs[(seed % 4) as usize]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 31);
            let e = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
            let x = random_element(&t, &mut rng);
            let q = |w: &Element| triple_product(&t, e.element(), w, e.element()).unwrap();
            let l = |w: &Element| triple_product(&t, e.element(), e.element(), w).unwrap();

            let p2_alg = q(&q(&x));
            let p1_alg = l(&x).sub(&p2_alg).scale(cr(2.0));
            let p0_alg = x.sub(&l(&x).scale(cr(2.0))).add(&p2_alg);

            let scale = x.coord_norm().max(1.0);
            let p2 = e.peirce().project(&t, 2, &x);
            let p1 = e.peirce().project(&t, 1, &x);
            let p0 = e.peirce().project(&t, 0, &x);
            prop_assert!(p2_alg.sub(&p2).coord_norm() <= 1e-9 * scale);
            prop_assert!(p1_alg.sub(&p1).coord_norm() <= 1e-9 * scale);
            prop_assert!(p0_alg.sub(&p0).coord_norm() <= 1e-9 * scale);
        }

        /// For minimal e the spectrum of L(e,e) lies in {0, 1/2, 1} and the
        /// Peirce-2 space is one dimensional.
        #[test]
        fn minimal_spectrum_and_peirce_two(seed in 0u64..60) {
            let descs = [
                FactorDescriptor::Type1 { p: 2, q: 2 },
                FactorDescriptor::Type2 { n: 5 },
                FactorDescriptor::Type3 { n: 4 },
                FactorDescriptor::Type4 { n: 3 },
            ];
            let t = AtomicTriple::factor(descs[(seed % 4) as usize]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let e = sample_minimal_tripotent_with(&t, 0, &mut rng).unwrap();
            prop_assert_eq!(e.peirce().dim(2), 1);
            prop_assert_eq!(
                e.peirce().dim(0) + e.peirce().dim(1) + e.peirce().dim(2),
                t.dim()
            );
        }
    }
}

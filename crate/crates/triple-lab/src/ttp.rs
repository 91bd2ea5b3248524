//! Pure atoms, the triple transition pseudo-probability, and the gap metric
//! computed both as a norm distance and through its closed formula.
//!
//! For a minimal tripotent e the Peirce-2 projection collapses to a pure
//! atom: P_2(e) x = phi_e(x) e. The triple transition pseudo-probability
//! from e to v is TTP(e,v) = phi_v(e); for minimal projections in a square
//! type-1 factor it reduces to the Wigner transition probability tr(pq).

use crate::factors::{triple_norm, AtomicTriple, Element, FactorDescriptor, FactorError};
use crate::kernel::Tolerance;
use crate::tripotents::{rel_eps, Tripotent, TripotentError};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TtpError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Tripotent(#[from] TripotentError),
    #[error("tripotent is not minimal: dim E_2 = {dim_e2}")]
    NotMinimal { dim_e2: usize },
    #[error("gap formula radicand {radicand:.3e} is negative beyond tolerance")]
    NegativeRadicand { radicand: f64 },
    #[error("not a minimal projection in a square type-1 factor: {0}")]
    NotAProjection(String),
}

/// A triple transition pseudo-probability value; lies in the closed complex
/// unit disc for minimal tripotent arguments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTPValue(pub Complex64);

fn require_minimal(e: &Tripotent) -> Result<(), TtpError> {
    if !e.is_minimal() {
        return Err(TtpError::NotMinimal {
            dim_e2: e.peirce().dim(2),
        });
    }
    Ok(())
}

/// The pure atom phi_e applied to x: the coefficient of P_2(e) x along e.
///
/// For minimal tripotents in matrix factors this equals tr(e* x) divided by
/// the squared coordinate length of e (which is 1 for types 1 and 3).
pub fn pure_atom_value(
    t: &AtomicTriple,
    e: &Tripotent,
    x: &Element,
) -> Result<Complex64, TtpError> {
    require_minimal(e)?;
    t.check_shapes(x)?;
    let p2x = e.peirce().project(t, 2, x);
    // P_2(e) x = phi e with E_2(e) = C e, so read the coefficient off the
    // coordinate inner product.
    let ee = e.element().inner(e.element());
    Ok(p2x.inner(e.element()) / ee)
}

/// Triple transition pseudo-probability from e to v: phi_v(e).
///
/// Minimal tripotents in different summands are orthogonal, so their TTP is
/// zero by convention.
pub fn ttp(t: &AtomicTriple, e: &Tripotent, v: &Tripotent) -> Result<TTPValue, TtpError> {
    require_minimal(e)?;
    require_minimal(v)?;
    if let (Some(a), Some(b)) = (e.home_summand(), v.home_summand()) {
        if a != b {
            return Ok(TTPValue(Complex64::default()));
        }
    }
    Ok(TTPValue(pure_atom_value(t, v, e.element())?))
}

/// Norm distance between two elements (the gap metric on tripotents).
pub fn gap_distance(t: &AtomicTriple, e: &Element, v: &Element) -> Result<f64, FactorError> {
    triple_norm(t, &e.sub(v))
}

/// Gap distance between minimal tripotents from the closed formula
/// sqrt((1 - Re TTP(v,e)) + sqrt((1 - Re TTP(v,e))^2 - ||P_0(e) v||^2)).
pub fn gap_formula(
    t: &AtomicTriple,
    e: &Tripotent,
    v: &Tripotent,
    tol: &Tolerance,
) -> Result<f64, TtpError> {
    require_minimal(e)?;
    require_minimal(v)?;
    let alpha = ttp(t, v, e)?.0;
    let p0v = e.peirce().project(t, 0, v.element());
    let p0_norm = triple_norm(t, &p0v)?;
    let one_minus = 1.0 - alpha.re;
    let radicand = one_minus * one_minus - p0_norm * p0_norm;
    if radicand < -rel_eps(tol) {
        return Err(TtpError::NegativeRadicand { radicand });
    }
    Ok((one_minus + radicand.max(0.0).sqrt()).max(0.0).sqrt())
}

/// Wigner transition probability tr(pq) between minimal projections in a
/// square type-1 factor; satisfies ||p - q|| = sqrt(1 - tr(pq)).
pub fn wigner_transition_probability(
    t: &AtomicTriple,
    p: &Tripotent,
    q: &Tripotent,
    tol: &Tolerance,
) -> Result<f64, TtpError> {
    require_minimal(p)?;
    require_minimal(q)?;
    let summand = match (p.home_summand(), q.home_summand()) {
        (Some(a), Some(b)) if a == b => a,
        _ => {
            return Err(TtpError::NotAProjection(
                "projections live in different summands".into(),
            ))
        }
    };
    match t.summand(summand).map_err(TripotentError::from)? {
        FactorDescriptor::Type1 { p: rows, q: cols } if rows == cols => {}
        other => {
            return Err(TtpError::NotAProjection(format!(
                "summand is {other:?}, need a square type-1 factor"
            )))
        }
    }
    let eps = rel_eps(tol);
    for (name, trip) in [("p", p), ("q", q)] {
        let b = trip.element().block(summand);
        if (b - b.adjoint()).norm() > eps {
            return Err(TtpError::NotAProjection(format!("{name} is not Hermitian")));
        }
        if (b * b - b).norm() > eps {
            return Err(TtpError::NotAProjection(format!("{name} is not idempotent")));
        }
    }
    let product = p.element().block(summand) * q.element().block(summand);
    let trace: Complex64 = (0..product.nrows()).map(|i| product[(i, i)]).sum();
    debug_assert!(trace.im.abs() < eps);
    Ok(trace.re.clamp(0.0, 1.0))
}

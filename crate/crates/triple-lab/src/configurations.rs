//! Quadrangles, trangles, collinear superpositions, and the relative
//! position of two minimal tripotents in the same Cartan factor.
//!
//! A pair of minimal tripotents in a rank >= 2 factor decomposes against a
//! quadrangle frame (v = alpha e + beta v2 + gamma v4 + delta v3 with
//! alpha delta = beta gamma) or a trangle frame (v = alpha e + beta u +
//! delta vt with alpha delta = beta^2). Rank-one factors use the simpler
//! two-term form v = alpha e + beta v1 with e and v1 collinear. The frames
//! here are built explicitly from the factor geometry: singular vectors for
//! type 1, principal subspace angles for type 2, the symmetric square root
//! for type 3, and the conjugation split for spin factors.

use crate::factors::{
    element_to_json, triple_norm, triple_product, AtomicTriple, Element, FactorDescriptor,
    FactorError,
};
use crate::kernel::{c, cr, svd_robust, CMat, CVec, Tolerance};
use crate::tripotents::{
    classify_relation, deterministic_perp, deterministic_real_perp, rel_eps,
    spin_minimal_from_frame, type1_rank_one_vectors, type2_support_pair, type3_rank_one_vector,
    type4_real_frame, Tripotent, TripotentError,
};
use crate::ttp::{pure_atom_value, TtpError};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Tripotent(#[from] TripotentError),
    #[error(transparent)]
    Ttp(#[from] TtpError),
    #[error("tripotent is not minimal")]
    NotMinimal,
    #[error("the pair is not collinear")]
    NotCollinear,
    #[error("superposition coefficients must satisfy |l1|^2 + |l2|^2 = 1, got {0}")]
    NotUnitCoefficients(f64),
    #[error("minimal tripotents live in different summands")]
    NotSameSummand,
    #[error("no frame variant reconstructs the input: residual {residual:.3e}")]
    DecompositionFailed { residual: f64 },
    #[error("frame recovery failed for a minimal tripotent block")]
    FrameRecovery,
}

/// Relative position of an ordered pair (e, v) of minimal tripotents.
///
/// Frame elements with vanishing coefficients may be zero when the factor is
/// too small to host a full frame (tiny spin factors).
#[derive(Clone, Debug)]
pub enum RelativePosition {
    Orthogonal,
    /// Rank-one factors: v = alpha e + beta v1 with e and v1 collinear.
    CollinearFrame {
        alpha: Complex64,
        beta: Complex64,
        v1: Element,
    },
    /// v = alpha e + beta v2 + gamma v4 + delta v3 against the quadrangle
    /// (e, v2, v3, v4).
    Quadrangle {
        alpha: Complex64,
        beta: Complex64,
        gamma: Complex64,
        delta: Complex64,
        v2: Element,
        v3: Element,
        v4: Element,
    },
    /// v = alpha e + beta u + delta vt against the trangle (e, u, vt).
    Trangle {
        alpha: Complex64,
        beta: Complex64,
        delta: Complex64,
        u: Element,
        vt: Element,
    },
}

impl RelativePosition {
    pub fn kind_name(&self) -> &'static str {
        match self {
            RelativePosition::Orthogonal => "orthogonal",
            RelativePosition::CollinearFrame { .. } => "collinear_frame",
            RelativePosition::Quadrangle { .. } => "quadrangle",
            RelativePosition::Trangle { .. } => "trangle",
        }
    }

    /// The coefficient along e, which equals TTP(v, e).
    pub fn alpha(&self) -> Complex64 {
        match self {
            RelativePosition::Orthogonal => Complex64::default(),
            RelativePosition::CollinearFrame { alpha, .. }
            | RelativePosition::Quadrangle { alpha, .. }
            | RelativePosition::Trangle { alpha, .. } => *alpha,
        }
    }

    /// Rebuilds v from e and the stored frame.
    pub fn reconstruct(&self, e: &Element, v: &Element) -> Element {
        match self {
            RelativePosition::Orthogonal => {
                // Orthogonal means v itself is the Peirce-0 part of v.
                v.clone()
            }
            RelativePosition::CollinearFrame { alpha, beta, v1 } => {
                e.scale(*alpha).add(&v1.scale(*beta))
            }
            RelativePosition::Quadrangle {
                alpha,
                beta,
                gamma,
                delta,
                v2,
                v3,
                v4,
            } => e
                .scale(*alpha)
                .add(&v2.scale(*beta))
                .add(&v4.scale(*gamma))
                .add(&v3.scale(*delta)),
            RelativePosition::Trangle {
                alpha,
                beta,
                delta,
                u,
                vt,
            } => e.scale(*alpha).add(&u.scale(*beta)).add(&vt.scale(*delta)),
        }
    }

    /// Reconstruction residual in the coordinate norm.
    pub fn residual(&self, e: &Element, v: &Element) -> f64 {
        self.reconstruct(e, v).sub(v).coord_norm()
    }

    /// Coefficient-constraint defect: |alpha delta - beta gamma| together
    /// with the unit-norm defect of the coefficient vector.
    pub fn constraint_defect(&self) -> f64 {
        match self {
            RelativePosition::Orthogonal => 0.0,
            RelativePosition::CollinearFrame { alpha, beta, .. } => {
                (alpha.norm_sqr() + beta.norm_sqr() - 1.0).abs()
            }
            RelativePosition::Quadrangle {
                alpha,
                beta,
                gamma,
                delta,
                ..
            } => {
                let product = (alpha * delta - beta * gamma).norm();
                let norm = (alpha.norm_sqr()
                    + beta.norm_sqr()
                    + gamma.norm_sqr()
                    + delta.norm_sqr()
                    - 1.0)
                    .abs();
                product.max(norm)
            }
            RelativePosition::Trangle {
                alpha, beta, delta, ..
            } => {
                let product = (alpha * delta - beta * beta).norm();
                let norm =
                    (alpha.norm_sqr() + 2.0 * beta.norm_sqr() + delta.norm_sqr() - 1.0).abs();
                product.max(norm)
            }
        }
    }

    pub fn to_json(&self, t: &AtomicTriple) -> serde_json::Value {
        let cx = |z: &Complex64| serde_json::json!([z.re, z.im]);
        match self {
            RelativePosition::Orthogonal => serde_json::json!({ "kind": "orthogonal" }),
            RelativePosition::CollinearFrame { alpha, beta, v1 } => serde_json::json!({
                "kind": "collinear_frame",
                "alpha": cx(alpha),
                "beta": cx(beta),
                "v1": element_to_json(t, v1),
            }),
            RelativePosition::Quadrangle {
                alpha,
                beta,
                gamma,
                delta,
                v2,
                v3,
                v4,
            } => serde_json::json!({
                "kind": "quadrangle",
                "alpha": cx(alpha),
                "beta": cx(beta),
                "gamma": cx(gamma),
                "delta": cx(delta),
                "v2": element_to_json(t, v2),
                "v3": element_to_json(t, v3),
                "v4": element_to_json(t, v4),
            }),
            RelativePosition::Trangle {
                alpha,
                beta,
                delta,
                u,
                vt,
            } => serde_json::json!({
                "kind": "trangle",
                "alpha": cx(alpha),
                "beta": cx(beta),
                "delta": cx(delta),
                "u": element_to_json(t, u),
                "vt": element_to_json(t, vt),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Quadrangle / trangle predicates and collinear superpositions
// ---------------------------------------------------------------------------

/// All quadrangle relations: u1 orthogonal to u3, u2 to u4, the collinearity
/// cycle, and u4 = 2 {u1, u2, u3}.
pub fn is_quadrangle(
    t: &AtomicTriple,
    u1: &Tripotent,
    u2: &Tripotent,
    u3: &Tripotent,
    u4: &Tripotent,
    tol: &Tolerance,
) -> Result<bool, ConfigError> {
    if ![u1, u2, u3, u4].iter().all(|u| u.is_minimal()) {
        return Ok(false);
    }
    let eps = rel_eps(tol);
    let r13 = classify_relation(t, u1, u3, tol)?;
    let r24 = classify_relation(t, u2, u4, tol)?;
    if !r13.orthogonal || !r24.orthogonal {
        return Ok(false);
    }
    for (a, b) in [(u1, u2), (u2, u3), (u3, u4), (u4, u1)] {
        if !classify_relation(t, a, b, tol)?.collinear {
            return Ok(false);
        }
    }
    let prod = triple_product(t, u1.element(), u2.element(), u3.element())?;
    Ok(prod.scale(cr(2.0)).sub(u4.element()).coord_norm() <= eps)
}

/// Trangle relations for the ordered triplet (v, u, vt): v and vt are
/// orthogonal minimals, the rank-two tripotent u governs both, and
/// v = Q(u) vt.
pub fn is_trangle(
    t: &AtomicTriple,
    v: &Tripotent,
    u: &Tripotent,
    vt: &Tripotent,
    tol: &Tolerance,
) -> Result<bool, ConfigError> {
    if !v.is_minimal() || !vt.is_minimal() || u.rank() != 2 {
        return Ok(false);
    }
    let eps = rel_eps(tol);
    if !classify_relation(t, v, vt, tol)?.orthogonal {
        return Ok(false);
    }
    if !classify_relation(t, u, v, tol)?.governs_ev {
        return Ok(false);
    }
    if !classify_relation(t, u, vt, tol)?.governs_ev {
        return Ok(false);
    }
    let q = triple_product(t, u.element(), vt.element(), u.element())?;
    Ok(q.sub(v.element()).coord_norm() <= eps)
}

/// Unit-coefficient superposition of a collinear minimal pair, which is
/// again a minimal tripotent.
pub fn collinear_superposition(
    t: &AtomicTriple,
    e: &Tripotent,
    v1: &Tripotent,
    lambda1: Complex64,
    lambda2: Complex64,
    tol: &Tolerance,
) -> Result<Tripotent, ConfigError> {
    if !e.is_minimal() || !v1.is_minimal() {
        return Err(ConfigError::NotMinimal);
    }
    if !classify_relation(t, e, v1, tol)?.collinear {
        return Err(ConfigError::NotCollinear);
    }
    let norm = lambda1.norm_sqr() + lambda2.norm_sqr();
    if (norm - 1.0).abs() > rel_eps(tol) {
        return Err(ConfigError::NotUnitCoefficients(norm));
    }
    let combo = e.element().scale(lambda1).add(&v1.element().scale(lambda2));
    let trip = Tripotent::new(t, combo, tol)?;
    debug_assert!(trip.is_minimal());
    Ok(trip)
}

// ---------------------------------------------------------------------------
// Relative position
// ---------------------------------------------------------------------------

/// Decomposes the minimal tripotent v against a frame adapted to e, with
/// both in the same summand. Orthogonal pairs (including pairs in distinct
/// summands) report the orthogonal variant.
pub fn relative_position(
    t: &AtomicTriple,
    e: &Tripotent,
    v: &Tripotent,
    tol: &Tolerance,
) -> Result<RelativePosition, ConfigError> {
    if !e.is_minimal() || !v.is_minimal() {
        return Err(ConfigError::NotMinimal);
    }
    let (se, sv) = (
        e.home_summand().ok_or(ConfigError::NotSameSummand)?,
        v.home_summand().ok_or(ConfigError::NotSameSummand)?,
    );
    if se != sv {
        return Ok(RelativePosition::Orthogonal);
    }
    let eps = rel_eps(tol);
    let ee_v = triple_product(t, e.element(), e.element(), v.element())?;
    if ee_v.coord_norm() <= eps {
        return Ok(RelativePosition::Orthogonal);
    }

    let desc = t.summand(se)?;
    let position = if desc.rank() < 2 {
        collinear_frame_position(t, e, v)?
    } else {
        match desc {
            FactorDescriptor::Type1 { .. } => type1_position(t, se, &desc, e, v)?,
            FactorDescriptor::Type2 { .. } => type2_position(t, se, &desc, e, v)?,
            FactorDescriptor::Type3 { .. } => type3_position(t, se, &desc, e, v)?,
            FactorDescriptor::Type4 { .. } => type4_position(t, se, &desc, e, v, tol)?,
        }
    };

    let residual = position.residual(e.element(), v.element());
    if residual > 100.0 * tol.slack(1.0) {
        return Err(ConfigError::DecompositionFailed { residual });
    }
    let defect = position.constraint_defect();
    if defect > eps {
        return Err(ConfigError::DecompositionFailed { residual: defect });
    }
    // Cross-module consistency: the e-coefficient is the pure atom value.
    debug_assert!(
        (position.alpha() - pure_atom_value(t, e, v.element())?).norm() <= eps,
        "alpha disagrees with the pure atom value"
    );
    Ok(position)
}

fn single_block(t: &AtomicTriple, summand: usize, block: CMat) -> Element {
    let mut x = t.zero();
    *x.block_mut(summand) = block;
    x
}

fn phase_or_one(z: Complex64, cut: f64) -> Complex64 {
    if z.norm() > cut {
        z / cr(z.norm())
    } else {
        cr(1.0)
    }
}

/// Rank-one factors: v = alpha e + beta v1 (Hilbert-space geometry).
fn collinear_frame_position(
    t: &AtomicTriple,
    e: &Tripotent,
    v: &Tripotent,
) -> Result<RelativePosition, ConfigError> {
    let cut = 1e-9;
    let ee = e.element().inner(e.element());
    let alpha = v.element().inner(e.element()) / ee;
    let rest = v.element().sub(&e.element().scale(alpha));
    let beta_mag = triple_norm(t, &rest)?;
    let (beta, v1) = if beta_mag > cut {
        (cr(beta_mag), rest.scale(cr(1.0 / beta_mag)))
    } else {
        (Complex64::default(), t.zero())
    };
    Ok(RelativePosition::CollinearFrame { alpha, beta, v1 })
}

/// Type 1: expand v = a b* in the frame (xi, xi_perp) x (eta, eta_perp)
/// spanned by e = xi eta*.
fn type1_position(
    t: &AtomicTriple,
    summand: usize,
    desc: &FactorDescriptor,
    e: &Tripotent,
    v: &Tripotent,
) -> Result<RelativePosition, ConfigError> {
    let cut = 1e-9;
    let (p, q) = match desc {
        FactorDescriptor::Type1 { p, q } => (*p, *q),
        _ => unreachable!(),
    };
    let (xi, eta) =
        type1_rank_one_vectors(e.element().block(summand)).ok_or(ConfigError::FrameRecovery)?;
    let (a, b) =
        type1_rank_one_vectors(v.element().block(summand)).ok_or(ConfigError::FrameRecovery)?;

    let a1 = xi.dotc(&a);
    let a_perp = &a - xi.map(|z| z * a1);
    let big_a = a_perp.norm();
    let xi_p = if big_a > cut {
        a_perp.scale(1.0 / big_a)
    } else {
        deterministic_perp(std::slice::from_ref(&xi), p).ok_or(ConfigError::FrameRecovery)?
    };

    let b1 = eta.dotc(&b);
    let b_perp = &b - eta.map(|z| z * b1);
    let big_b = b_perp.norm();
    let eta_p = if big_b > cut {
        b_perp.scale(1.0 / big_b)
    } else {
        deterministic_perp(std::slice::from_ref(&eta), q).ok_or(ConfigError::FrameRecovery)?
    };

    // Rotate the perpendicular frame so beta lands on the nonnegative axis
    // while delta stays nonnegative.
    let theta = phase_or_one(a1, cut).conj();
    let xi_p = xi_p.map(|z| z * theta);
    let eta_p = eta_p.map(|z| z * theta);

    let alpha = a1 * b1.conj();
    let beta = a1 * cr(big_b) * theta;
    let gamma = cr(big_a) * b1.conj() * theta.conj();
    let delta = cr(big_a * big_b);

    let v2 = single_block(t, summand, &xi * eta_p.adjoint());
    let v3 = single_block(t, summand, &xi_p * eta_p.adjoint());
    let v4 = single_block(t, summand, &xi_p * eta.adjoint());

    Ok(RelativePosition::Quadrangle {
        alpha,
        beta,
        gamma,
        delta,
        v2,
        v3,
        v4,
    })
}

fn wedge(x: &CVec, y: &CVec) -> CMat {
    x * y.transpose() - y * x.transpose()
}

/// Type 2: principal angles between the two-dimensional supports give the
/// quadrangle coefficients directly.
fn type2_position(
    t: &AtomicTriple,
    summand: usize,
    desc: &FactorDescriptor,
    e: &Tripotent,
    v: &Tripotent,
) -> Result<RelativePosition, ConfigError> {
    let cut = 1e-9;
    let n = match desc {
        FactorDescriptor::Type2 { n } => *n,
        _ => unreachable!(),
    };
    let (xi, eta) =
        type2_support_pair(e.element().block(summand)).ok_or(ConfigError::FrameRecovery)?;
    let (av, bv) =
        type2_support_pair(v.element().block(summand)).ok_or(ConfigError::FrameRecovery)?;

    // Cross Gram matrix between the supports and its principal vectors.
    let mut bvmat = CMat::zeros(n, 2);
    bvmat.set_column(0, &xi);
    bvmat.set_column(1, &eta);
    let mut bxmat = CMat::zeros(n, 2);
    bxmat.set_column(0, &av);
    bxmat.set_column(1, &bv);
    let m = bvmat.adjoint() * &bxmat;
    let (u2, svals, w2) = svd_robust(&m);
    let y_frame = &bvmat * &u2;
    let x_frame = &bxmat * &w2;
    let det = |m: &CMat| m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let mu_e = det(&u2).conj();
    let mu_v = det(&w2).conj();

    let y1 = y_frame.column(0).into_owned();
    let y2 = y_frame.column(1).into_owned();
    let x1 = x_frame.column(0).into_owned();
    let x2 = x_frame.column(1).into_owned();
    let c1 = svals[0].clamp(0.0, 1.0);
    let c2 = svals[1].clamp(0.0, 1.0);

    let mut perp_pool: Vec<CVec> = vec![y1.clone(), y2.clone()];
    let off_vector = |x: &CVec, y: &CVec, cos: f64, pool: &mut Vec<CVec>| {
        let perp = x - y.map(|z| z * cr(cos));
        let s = perp.norm();
        let z = if s > cut {
            perp.scale(1.0 / s)
        } else {
            match deterministic_perp(pool, n) {
                Some(w) => w,
                None => return Err(ConfigError::FrameRecovery),
            }
        };
        pool.push(z.clone());
        Ok((s, z))
    };
    let (s1, z1) = off_vector(&x1, &y1, c1, &mut perp_pool)?;
    let (s2, z2) = off_vector(&x2, &y2, c2, &mut perp_pool)?;

    // v = mu_v [c1 c2 w(y1,y2) + c1 s2 w(y1,z2) + s1 c2 w(z1,y2)
    //           + s1 s2 w(z1,z2)], and e = mu_e w(y1,y2).
    let alpha = mu_v * cr(c1 * c2) * mu_e.conj();
    let beta = cr(c1 * s2);
    let delta = cr(s1 * s2);
    let gamma = mu_v * cr(s1 * c2) * mu_e.conj();

    let v2 = single_block(t, summand, wedge(&y1, &z2).map(|z| z * mu_v));
    let v3 = single_block(t, summand, wedge(&z1, &z2).map(|z| z * mu_v));
    // The closing frame element is pinned by the quadrangle identity.
    let v4 = triple_product(t, e.element(), &v2, &v3)?.scale(cr(2.0));
    // Read gamma back off the frame so its phase stays consistent.
    let gamma = {
        let denom = v4.inner(&v4);
        if denom.norm() > cut {
            v.element().inner(&v4) / denom
        } else {
            gamma
        }
    };

    Ok(RelativePosition::Quadrangle {
        alpha,
        beta,
        gamma,
        delta,
        v2,
        v3,
        v4,
    })
}

/// Type 3: v = (c1 xi + c2 xi')(c1 xi + c2 xi')^t expands against the
/// trangle (e, xi xi'^t + xi' xi^t, xi' xi'^t).
fn type3_position(
    t: &AtomicTriple,
    summand: usize,
    desc: &FactorDescriptor,
    e: &Tripotent,
    v: &Tripotent,
) -> Result<RelativePosition, ConfigError> {
    let cut = 1e-9;
    let n = match desc {
        FactorDescriptor::Type3 { n } => *n,
        _ => unreachable!(),
    };
    let xi = type3_rank_one_vector(e.element().block(summand)).ok_or(ConfigError::FrameRecovery)?;
    let zeta =
        type3_rank_one_vector(v.element().block(summand)).ok_or(ConfigError::FrameRecovery)?;
    let c1 = xi.dotc(&zeta);
    let perp = &zeta - xi.map(|z| z * c1);
    let c2 = perp.norm();
    let xi_p = if c2 > cut {
        perp.scale(1.0 / c2)
    } else {
        deterministic_perp(std::slice::from_ref(&xi), n).ok_or(ConfigError::FrameRecovery)?
    };

    // Rotate xi' so beta = c1 c2 becomes |c1| c2 >= 0.
    let theta = phase_or_one(c1, cut);
    let xi_p = xi_p.map(|z| z * theta);

    let alpha = c1 * c1;
    let beta = cr(c1.norm() * c2);
    // delta carries the phase conj(theta)^2 = e^{-2i arg c1}.
    let delta = cr(c2 * c2) * theta.conj() * theta.conj();

    let u = single_block(
        t,
        summand,
        &xi * xi_p.transpose() + &xi_p * xi.transpose(),
    );
    let vt = single_block(t, summand, &xi_p * xi_p.transpose());

    Ok(RelativePosition::Trangle {
        alpha,
        beta,
        delta,
        u,
        vt,
    })
}

/// Spin factors: split the Peirce-1 part of v along a minimal u and its
/// conjugate (quadrangle) or along a real direction (trangle).
fn type4_position(
    t: &AtomicTriple,
    summand: usize,
    desc: &FactorDescriptor,
    e: &Tripotent,
    v: &Tripotent,
    tol: &Tolerance,
) -> Result<RelativePosition, ConfigError> {
    let cut = rel_eps(tol);
    let n = match desc {
        FactorDescriptor::Type4 { n } => *n,
        _ => unreachable!(),
    };
    let eb = e.element().block(summand);
    let vb = v.element().block(summand);
    let e_vec = CVec::from_fn(n, |i, _| eb[(i, 0)]);
    let v_vec = CVec::from_fn(n, |i, _| vb[(i, 0)]);
    let e_bar = e_vec.conjugate();

    let inner = |x: &CVec, y: &CVec| -> Complex64 { y.dotc(x) };
    // <e,e> = 1/2, so the Peirce-2 and Peirce-0 coefficients are doubled
    // inner products.
    let alpha = inner(&v_vec, &e_vec) * cr(2.0);
    let delta_tilde = inner(&v_vec, &e_bar) * cr(2.0);
    let w1 = &v_vec - e_vec.map(|z| z * alpha) - e_bar.map(|z| z * delta_tilde);

    let mu = phase_or_one(delta_tilde, cut);
    let w1_norm_sq = inner(&w1, &w1).re;

    if w1_norm_sq.sqrt() <= cut {
        // No Peirce-1 mass: by minimality alpha * delta = 0.
        if n >= 4 {
            let (a, b) = type4_real_frame(eb).ok_or(ConfigError::FrameRecovery)?;
            let cvec = deterministic_real_perp(&[a.clone(), b.clone()], n)
                .ok_or(ConfigError::FrameRecovery)?;
            let d = deterministic_real_perp(&[a, b, cvec.clone()], n)
                .ok_or(ConfigError::FrameRecovery)?;
            let u_min = spin_minimal_from_frame(&cvec, &d);
            let u_vec = CVec::from_fn(n, |i, _| u_min[(i, 0)]);
            let v2 = single_block(t, summand, u_min);
            let v3 = single_block(
                t,
                summand,
                CMat::from_fn(n, 1, |i, _| e_bar[i] * mu),
            );
            let v4 = single_block(
                t,
                summand,
                CMat::from_fn(n, 1, |i, _| -(u_vec[i].conj()) * mu),
            );
            return Ok(RelativePosition::Quadrangle {
                alpha,
                beta: Complex64::default(),
                gamma: Complex64::default(),
                delta: delta_tilde * mu.conj(),
                v2,
                v3,
                v4,
            });
        }
        // Spin factors too small for a quadrangle frame: report a trangle
        // when a governing direction exists, else leave the frame empty.
        if n >= 3 {
            let (a, b) = type4_real_frame(eb).ok_or(ConfigError::FrameRecovery)?;
            let cvec = deterministic_real_perp(&[a, b], n).ok_or(ConfigError::FrameRecovery)?;
            let lambda = cr(1.0);
            let u = single_block(t, summand, CMat::from_fn(n, 1, |i, _| cvec[i] * lambda));
            let vt = single_block(
                t,
                summand,
                CMat::from_fn(n, 1, |i, _| -e_bar[i] * lambda * lambda),
            );
            return Ok(RelativePosition::Trangle {
                alpha,
                beta: Complex64::default(),
                delta: -delta_tilde * (lambda * lambda).conj(),
                u,
                vt,
            });
        }
        return Ok(RelativePosition::Quadrangle {
            alpha,
            beta: Complex64::default(),
            gamma: Complex64::default(),
            delta: delta_tilde * mu.conj(),
            v2: t.zero(),
            v3: single_block(t, summand, CMat::from_fn(n, 1, |i, _| e_bar[i] * mu)),
            v4: t.zero(),
        });
    }

    let p_raw = inner(&w1, &w1.conjugate());
    let s2 = 2.0 * w1_norm_sq;
    let disc = s2 * s2 - 4.0 * p_raw.norm_sqr();

    if disc <= (cut * s2.max(cut)).powi(2).max(1e-14 * s2 * s2) {
        // Conjugate-proportional Peirce-1 part: trangle position along a
        // real direction.
        let kappa = inner(&w1.conjugate(), &w1) / inner(&w1, &w1);
        let theta = kappa.arg() / 2.0;
        let rot = c(theta.cos(), theta.sin());
        let zeta_c = w1.map(|z| z * rot);
        let zeta = zeta_c.map(|z| cr(z.re));
        let znorm = zeta.norm();
        if znorm < cut {
            return Err(ConfigError::DecompositionFailed { residual: znorm });
        }
        let chat = zeta.scale(1.0 / znorm);
        let lambda = rot.conj();
        let u = single_block(t, summand, CMat::from_fn(n, 1, |i, _| chat[i] * lambda));
        let vt = single_block(
            t,
            summand,
            CMat::from_fn(n, 1, |i, _| -e_bar[i] * lambda * lambda),
        );
        let beta = cr(znorm);
        let delta = -delta_tilde * (lambda * lambda).conj();
        return Ok(RelativePosition::Trangle {
            alpha,
            beta,
            delta,
            u,
            vt,
        });
    }

    // Quadrangle split: w1 = beta u - gamma mu conj(u).
    let beta_sq = (s2 + disc.sqrt()) / 2.0;
    let beta = beta_sq.sqrt();
    let gamma = -p_raw * mu.conj() / cr(beta);
    let u_raw = (w1.map(|z| z * cr(beta)) + w1.conjugate().map(|z| z * gamma * mu))
        .scale(1.0 / (beta_sq - gamma.norm_sqr()));
    let u_norm = u_raw.norm();
    if u_norm < cut {
        return Err(ConfigError::DecompositionFailed { residual: u_norm });
    }
    // Minimal spin tripotents have Hilbert norm 1/sqrt(2).
    let u_vec = u_raw.scale(1.0 / (u_norm * 2.0f64.sqrt()));
    let v2 = single_block(t, summand, CMat::from_fn(n, 1, |i, _| u_vec[i]));
    let v3 = single_block(t, summand, CMat::from_fn(n, 1, |i, _| e_bar[i] * mu));
    let v4 = single_block(
        t,
        summand,
        CMat::from_fn(n, 1, |i, _| -(u_vec[i].conj()) * mu),
    );

    // Re-read the coefficients from the frame for numerical consistency.
    let coeff = |frame: &Element| -> Complex64 {
        let denom = frame.inner(frame);
        if denom.norm() > cut {
            v.element().inner(frame) / denom
        } else {
            Complex64::default()
        }
    };
    let beta = coeff(&v2);
    let gamma = coeff(&v4);
    let delta = coeff(&v3);

    Ok(RelativePosition::Quadrangle {
        alpha,
        beta,
        gamma,
        delta,
        v2,
        v3,
        v4,
    })
}

//! Cartan factors of types 1-4 and their finite l-infinity sums.
//!
//! A factor of type 1 is the space of p x q complex matrices, types 2 and 3
//! are the antisymmetric and symmetric n x n matrices, and type 4 is the spin
//! factor: complex n-space with the entrywise conjugation in the canonical
//! basis. Elements of a sum carry one coefficient block per summand (type-4
//! blocks are stored as n x 1 columns) and the norm is the maximum over
//! summands.

use crate::kernel::{c, cr, operator_norm, CMat, CVec, Tolerance};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on the complex dimension of a single factor, keeping brute-force
/// oracles and dense Peirce computations cheap.
pub const MAX_FACTOR_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("block {index} has shape {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    ShapeMismatch {
        index: usize,
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("element has {got} blocks, the triple has {want} summands")]
    BlockCountMismatch { got: usize, want: usize },
    #[error("block {index} violates the type-{factor_type} symmetry by {deviation:.3e}")]
    SymmetryViolation {
        index: usize,
        factor_type: u8,
        deviation: f64,
    },
    #[error("invalid factor descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("summand index {index} out of range ({count} summands)")]
    SummandOutOfRange { index: usize, count: usize },
    #[error("malformed element data: {0}")]
    MalformedElement(String),
}

/// One Cartan factor. Types 5 and 6 (octonionic) are intentionally absent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorDescriptor {
    /// p x q complex matrices.
    Type1 { p: usize, q: usize },
    /// Antisymmetric n x n complex matrices (x^t = -x), n >= 2.
    Type2 { n: usize },
    /// Symmetric n x n complex matrices (x^t = x).
    Type3 { n: usize },
    /// Spin factor: complex n-space with entrywise conjugation, n >= 2.
    Type4 { n: usize },
}

impl FactorDescriptor {
    pub fn validate(&self) -> Result<(), FactorError> {
        let err = |msg: String| Err(FactorError::InvalidDescriptor(msg));
        match *self {
            FactorDescriptor::Type1 { p, q } => {
                if p < 1 || q < 1 {
                    return err(format!("type 1 needs p, q >= 1, got {p}x{q}"));
                }
            }
            FactorDescriptor::Type2 { n } => {
                if n < 2 {
                    return err(format!("type 2 needs n >= 2, got {n}"));
                }
            }
            FactorDescriptor::Type3 { n } => {
                if n < 1 {
                    return err(format!("type 3 needs n >= 1, got {n}"));
                }
            }
            FactorDescriptor::Type4 { n } => {
                if n < 2 {
                    return err(format!("type 4 needs n >= 2, got {n}"));
                }
            }
        }
        if self.dim() > MAX_FACTOR_DIM {
            return err(format!(
                "factor dimension {} exceeds the supported cap {}",
                self.dim(),
                MAX_FACTOR_DIM
            ));
        }
        Ok(())
    }

    /// Complex dimension of the factor as a vector space.
    pub fn dim(&self) -> usize {
        match *self {
            FactorDescriptor::Type1 { p, q } => p * q,
            FactorDescriptor::Type2 { n } => n * (n - 1) / 2,
            FactorDescriptor::Type3 { n } => n * (n + 1) / 2,
            FactorDescriptor::Type4 { n } => n,
        }
    }

    /// Triple rank: the maximal size of an orthogonal family of tripotents.
    pub fn rank(&self) -> usize {
        match *self {
            FactorDescriptor::Type1 { p, q } => p.min(q),
            FactorDescriptor::Type2 { n } => n / 2,
            FactorDescriptor::Type3 { n } => n,
            FactorDescriptor::Type4 { .. } => 2,
        }
    }

    /// Storage shape of a coefficient block (type 4 uses a column vector).
    pub fn block_shape(&self) -> (usize, usize) {
        match *self {
            FactorDescriptor::Type1 { p, q } => (p, q),
            FactorDescriptor::Type2 { n } | FactorDescriptor::Type3 { n } => (n, n),
            FactorDescriptor::Type4 { n } => (n, 1),
        }
    }

    pub fn type_tag(&self) -> u8 {
        match self {
            FactorDescriptor::Type1 { .. } => 1,
            FactorDescriptor::Type2 { .. } => 2,
            FactorDescriptor::Type3 { .. } => 3,
            FactorDescriptor::Type4 { .. } => 4,
        }
    }

    /// Orthonormal basis of the factor under the trace / Hilbert inner
    /// product, in a fixed deterministic order.
    pub fn basis(&self) -> Vec<CMat> {
        let (rows, cols) = self.block_shape();
        let mut out = Vec::with_capacity(self.dim());
        let unit = |i: usize, j: usize| {
            let mut m = CMat::zeros(rows, cols);
            m[(i, j)] = cr(1.0);
            m
        };
        match *self {
            FactorDescriptor::Type1 { p, q } => {
                for i in 0..p {
                    for j in 0..q {
                        out.push(unit(i, j));
                    }
                }
            }
            FactorDescriptor::Type2 { n } => {
                let s = 1.0 / 2.0_f64.sqrt();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let mut m = CMat::zeros(n, n);
                        m[(i, j)] = cr(s);
                        m[(j, i)] = cr(-s);
                        out.push(m);
                    }
                }
            }
            FactorDescriptor::Type3 { n } => {
                let s = 1.0 / 2.0_f64.sqrt();
                for i in 0..n {
                    for j in i..n {
                        if i == j {
                            out.push(unit(i, i));
                        } else {
                            let mut m = CMat::zeros(n, n);
                            m[(i, j)] = cr(s);
                            m[(j, i)] = cr(s);
                            out.push(m);
                        }
                    }
                }
            }
            FactorDescriptor::Type4 { n } => {
                for i in 0..n {
                    out.push(unit(i, 0));
                }
            }
        }
        out
    }

    fn check_block(&self, index: usize, block: &CMat, tol: &Tolerance) -> Result<(), FactorError> {
        let (rows, cols) = self.block_shape();
        if block.nrows() != rows || block.ncols() != cols {
            return Err(FactorError::ShapeMismatch {
                index,
                got_rows: block.nrows(),
                got_cols: block.ncols(),
                want_rows: rows,
                want_cols: cols,
            });
        }
        let sym_dev = match self {
            FactorDescriptor::Type2 { .. } => Some((block.transpose() + block).norm()),
            FactorDescriptor::Type3 { .. } => Some((block.transpose() - block).norm()),
            _ => None,
        };
        if let Some(dev) = sym_dev {
            if dev > tol.slack(block.norm()) {
                return Err(FactorError::SymmetryViolation {
                    index,
                    factor_type: self.type_tag(),
                    deviation: dev,
                });
            }
        }
        Ok(())
    }
}

/// A finite l-infinity sum of Cartan factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomicTriple {
    summands: Vec<FactorDescriptor>,
}

impl AtomicTriple {
    pub fn new(summands: Vec<FactorDescriptor>) -> Result<Self, FactorError> {
        if summands.is_empty() {
            return Err(FactorError::InvalidDescriptor(
                "an atomic triple needs at least one summand".into(),
            ));
        }
        for d in &summands {
            d.validate()?;
        }
        Ok(AtomicTriple { summands })
    }

    /// Single-factor triple.
    pub fn factor(desc: FactorDescriptor) -> Result<Self, FactorError> {
        AtomicTriple::new(vec![desc])
    }

    pub fn summands(&self) -> &[FactorDescriptor] {
        &self.summands
    }

    pub fn summand(&self, index: usize) -> Result<FactorDescriptor, FactorError> {
        self.summands
            .get(index)
            .copied()
            .ok_or(FactorError::SummandOutOfRange {
                index,
                count: self.summands.len(),
            })
    }

    /// Total complex dimension.
    pub fn dim(&self) -> usize {
        self.summands.iter().map(|d| d.dim()).sum()
    }

    pub fn zero(&self) -> Element {
        Element {
            blocks: self
                .summands
                .iter()
                .map(|d| {
                    let (r, co) = d.block_shape();
                    CMat::zeros(r, co)
                })
                .collect(),
        }
    }

    /// Shape check only; symmetry of blocks is not inspected.
    pub fn check_shapes(&self, x: &Element) -> Result<(), FactorError> {
        if x.blocks.len() != self.summands.len() {
            return Err(FactorError::BlockCountMismatch {
                got: x.blocks.len(),
                want: self.summands.len(),
            });
        }
        for (i, (d, b)) in self.summands.iter().zip(&x.blocks).enumerate() {
            let (rows, cols) = d.block_shape();
            if b.nrows() != rows || b.ncols() != cols {
                return Err(FactorError::ShapeMismatch {
                    index: i,
                    got_rows: b.nrows(),
                    got_cols: b.ncols(),
                    want_rows: rows,
                    want_cols: cols,
                });
            }
        }
        Ok(())
    }

    /// Full membership check: shapes plus the type-2/3 symmetry constraints.
    pub fn check_member(&self, x: &Element, tol: &Tolerance) -> Result<(), FactorError> {
        if x.blocks.len() != self.summands.len() {
            return Err(FactorError::BlockCountMismatch {
                got: x.blocks.len(),
                want: self.summands.len(),
            });
        }
        for (i, (d, b)) in self.summands.iter().zip(&x.blocks).enumerate() {
            d.check_block(i, b, tol)?;
        }
        Ok(())
    }

    /// Builds an element after validating membership.
    pub fn element(&self, blocks: Vec<CMat>, tol: &Tolerance) -> Result<Element, FactorError> {
        let x = Element { blocks };
        self.check_member(&x, tol)?;
        Ok(x)
    }

    /// Element supported on a single summand, zero elsewhere.
    pub fn single_block_element(
        &self,
        index: usize,
        block: CMat,
        tol: &Tolerance,
    ) -> Result<Element, FactorError> {
        self.summand(index)?;
        let mut x = self.zero();
        x.blocks[index] = block;
        self.check_member(&x, tol)?;
        Ok(x)
    }
}

/// Member of an atomic triple: one coefficient block per summand.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    blocks: Vec<CMat>,
}

impl Element {
    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMat {
        &self.blocks[i]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut CMat {
        &mut self.blocks[i]
    }

    pub fn from_blocks(blocks: Vec<CMat>) -> Element {
        Element { blocks }
    }

    pub fn add(&self, other: &Element) -> Element {
        Element {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Element) -> Element {
        Element {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, lambda: Complex64) -> Element {
        Element {
            blocks: self.blocks.iter().map(|b| b.map(|z| z * lambda)).collect(),
        }
    }

    pub fn neg(&self) -> Element {
        self.scale(cr(-1.0))
    }

    /// Entrywise conjugation of every block.
    pub fn conj(&self) -> Element {
        Element {
            blocks: self.blocks.iter().map(|b| b.conjugate()).collect(),
        }
    }

    /// Coordinate (trace / Hilbert) inner product, linear in `self`.
    pub fn inner(&self, other: &Element) -> Complex64 {
        let mut acc = Complex64::default();
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            for (x, y) in a.iter().zip(b.iter()) {
                acc += x * y.conj();
            }
        }
        acc
    }

    /// Coordinate (Frobenius) norm; this is not the triple norm.
    pub fn coord_norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn is_zero(&self, eps: f64) -> bool {
        self.coord_norm() <= eps
    }

    /// Index of the only summand carrying mass, if there is exactly one.
    pub fn support_summand(&self, eps: f64) -> Option<usize> {
        let mut found = None;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.norm() > eps {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }
}

/// Spin inner product of two type-4 blocks (n x 1 columns), linear in `x`.
pub fn spin_inner(x: &CMat, y: &CMat) -> Complex64 {
    let mut acc = Complex64::default();
    for (a, b) in x.iter().zip(y.iter()) {
        acc += a * b.conj();
    }
    acc
}

/// Triple product of raw coefficient blocks of a single factor.
pub fn triple_product_block(desc: &FactorDescriptor, x: &CMat, y: &CMat, z: &CMat) -> CMat {
    match desc {
        FactorDescriptor::Type1 { .. }
        | FactorDescriptor::Type2 { .. }
        | FactorDescriptor::Type3 { .. } => {
            let ya = y.adjoint();
            ((x * &ya * z) + (z * &ya * x)).scale(0.5)
        }
        FactorDescriptor::Type4 { .. } => {
            let xy = spin_inner(x, y);
            let zy = spin_inner(z, y);
            let xz_bar = spin_inner(x, &z.conjugate());
            z.map(|w| w * xy) + x.map(|w| w * zy) - y.conjugate().map(|w| w * xz_bar)
        }
    }
}

/// The triple product {x, y, z}: blockwise (x y* z + z y* x)/2 on matrix
/// factors and the spin product on type-4 summands.
pub fn triple_product(
    t: &AtomicTriple,
    x: &Element,
    y: &Element,
    z: &Element,
) -> Result<Element, FactorError> {
    t.check_shapes(x)?;
    t.check_shapes(y)?;
    t.check_shapes(z)?;
    let blocks = t
        .summands
        .iter()
        .enumerate()
        .map(|(i, d)| triple_product_block(d, &x.blocks[i], &y.blocks[i], &z.blocks[i]))
        .collect();
    Ok(Element { blocks })
}

/// Convenience for L(a,b) x = {a, b, x}.
pub fn l_apply(
    t: &AtomicTriple,
    a: &Element,
    b: &Element,
    x: &Element,
) -> Result<Element, FactorError> {
    triple_product(t, a, b, x)
}

fn triple_norm_block(desc: &FactorDescriptor, b: &CMat) -> f64 {
    match desc {
        FactorDescriptor::Type4 { .. } => {
            let h = spin_inner(b, b).re;
            let cbar = spin_inner(b, &b.conjugate()).norm();
            let radicand = (h * h - cbar * cbar).max(0.0);
            (h + radicand.sqrt()).max(0.0).sqrt()
        }
        _ => operator_norm(b),
    }
}

/// The triple (spectral) norm: operator norm on matrix factors, the spin
/// norm on type-4 summands, and the maximum over summands.
pub fn triple_norm(t: &AtomicTriple, x: &Element) -> Result<f64, FactorError> {
    t.check_shapes(x)?;
    Ok(t
        .summands
        .iter()
        .zip(&x.blocks)
        .map(|(d, b)| triple_norm_block(d, b))
        .fold(0.0, f64::max))
}

/// Complex standard Gaussian.
pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) / cr(2.0_f64.sqrt())
}

/// Random element with i.i.d. standard complex Gaussian coefficients in the
/// orthonormal coordinate basis of every summand.
pub fn random_element<R: Rng + ?Sized>(t: &AtomicTriple, rng: &mut R) -> Element {
    let blocks = t
        .summands
        .iter()
        .map(|d| {
            let (rows, cols) = d.block_shape();
            let mut b = CMat::zeros(rows, cols);
            for basis in d.basis() {
                let g = gaussian_complex(rng);
                b += basis.map(|z| z * g);
            }
            b
        })
        .collect();
    Element { blocks }
}

/// Random element scaled to unit triple norm.
pub fn random_unit_element<R: Rng + ?Sized>(t: &AtomicTriple, rng: &mut R) -> Element {
    loop {
        let x = random_element(t, rng);
        let n = triple_norm(t, &x).expect("random element has valid shape");
        if n > 1e-6 {
            return x.scale(cr(1.0 / n));
        }
    }
}

// ---------------------------------------------------------------------------
// Coordinates
// ---------------------------------------------------------------------------

/// Coordinates of one block in the deterministic orthonormal basis.
pub fn block_to_coords(desc: &FactorDescriptor, block: &CMat) -> CVec {
    let basis = desc.basis();
    CVec::from_fn(basis.len(), |k, _| {
        let mut acc = Complex64::default();
        for (x, b) in block.iter().zip(basis[k].iter()) {
            acc += x * b.conj();
        }
        acc
    })
}

pub fn block_from_coords(desc: &FactorDescriptor, coords: &CVec) -> CMat {
    let (rows, cols) = desc.block_shape();
    let mut out = CMat::zeros(rows, cols);
    for (k, b) in desc.basis().iter().enumerate() {
        out += b.map(|z| z * coords[k]);
    }
    out
}

/// Concatenated coordinates of an element across all summands.
pub fn element_to_coords(t: &AtomicTriple, x: &Element) -> CVec {
    let mut out = CVec::zeros(t.dim());
    let mut offset = 0;
    for (d, b) in t.summands.iter().zip(&x.blocks) {
        let coords = block_to_coords(d, b);
        out.rows_mut(offset, d.dim()).copy_from(&coords);
        offset += d.dim();
    }
    out
}

pub fn element_from_coords(t: &AtomicTriple, coords: &CVec) -> Element {
    let mut blocks = Vec::with_capacity(t.summands.len());
    let mut offset = 0;
    for d in &t.summands {
        let slice = coords.rows(offset, d.dim()).into_owned();
        blocks.push(block_from_coords(d, &slice));
        offset += d.dim();
    }
    Element { blocks }
}

/// Matrix of the complex-linear operator L(a,b): x -> {a,b,x} in the
/// coordinate basis of the whole triple.
pub fn l_operator_matrix(t: &AtomicTriple, a: &Element, b: &Element) -> CMat {
    let dim = t.dim();
    let mut m = CMat::zeros(dim, dim);
    for j in 0..dim {
        let mut coords = CVec::zeros(dim);
        coords[j] = cr(1.0);
        let ej = element_from_coords(t, &coords);
        let image = triple_product(t, a, b, &ej).expect("basis elements have valid shapes");
        m.set_column(j, &element_to_coords(t, &image));
    }
    m
}

// ---------------------------------------------------------------------------
// JB*-axiom verification
// ---------------------------------------------------------------------------

/// Residuals observed while sampling the JB*-triple axioms.
#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub trials: u64,
    /// Relative residual of the Jordan identity on random five-tuples.
    pub jordan_max_residual: f64,
    /// Relative deviation of L(a,a) from its adjoint.
    pub hermiticity_max_deviation: f64,
    /// Smallest eigenvalue of L(a,a) over all trials (unit-norm a).
    pub min_l_spectrum: f64,
    /// Relative residual of | ||{a,a,a}|| - ||a||^3 |.
    pub cube_norm_max_residual: f64,
    pub pass: bool,
}

/// Thresholds for declaring the axiom suite passed.
#[derive(Clone, Copy, Debug)]
pub struct AxiomThresholds {
    pub jordan: f64,
    pub hermiticity: f64,
    pub spectrum_floor: f64,
    pub cube_relative: f64,
}

impl Default for AxiomThresholds {
    fn default() -> Self {
        AxiomThresholds {
            jordan: 1e-8,
            hermiticity: 1e-8,
            spectrum_floor: -1e-8,
            cube_relative: 1e-7,
        }
    }
}

pub type TripleProductFn = dyn Fn(&AtomicTriple, &Element, &Element, &Element) -> Element;

/// Axiom check against an injectable product, so tests can feed a corrupted
/// product as a negative control.
pub fn verify_axioms_with_product(
    t: &AtomicTriple,
    product: &TripleProductFn,
    trials: u64,
    seed: u64,
    thresholds: &AxiomThresholds,
) -> AxiomReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mut jordan_max = 0.0_f64;
    let mut herm_max = 0.0_f64;
    let mut min_spectrum = f64::INFINITY;
    let mut cube_max = 0.0_f64;

    let l_matrix = |a: &Element, b: &Element| -> CMat {
        let dim = t.dim();
        let mut m = CMat::zeros(dim, dim);
        for j in 0..dim {
            let mut coords = CVec::zeros(dim);
            coords[j] = cr(1.0);
            let ej = element_from_coords(t, &coords);
            m.set_column(j, &element_to_coords(t, &product(t, a, b, &ej)));
        }
        m
    };

    for _ in 0..trials {
        let a = random_unit_element(t, &mut rng);
        let b = random_unit_element(t, &mut rng);
        let x = random_unit_element(t, &mut rng);
        let y = random_unit_element(t, &mut rng);
        let z = random_unit_element(t, &mut rng);

        // Jordan identity evaluated at z.
        let lhs = product(t, &a, &b, &product(t, &x, &y, &z));
        let t1 = product(t, &x, &y, &product(t, &a, &b, &z));
        let t2 = product(t, &product(t, &a, &b, &x), &y, &z);
        let t3 = product(t, &x, &product(t, &b, &a, &y), &z);
        let residual = lhs.sub(&t1).sub(&t2).add(&t3).coord_norm();
        jordan_max = jordan_max.max(residual);

        // Hermiticity and positivity of L(a,a).
        let m = l_matrix(&a, &a);
        let scale = m.norm().max(1.0);
        herm_max = herm_max.max((&m - m.adjoint()).norm() / scale);
        let h = (&m + m.adjoint()).scale(0.5);
        for lambda in h.symmetric_eigen().eigenvalues.iter() {
            min_spectrum = min_spectrum.min(*lambda);
        }

        // Cube norm identity on a non-normalized sample.
        let w = random_element(t, &mut rng);
        let norm_w = triple_norm(t, &w).expect("valid shape");
        if norm_w > 1e-3 {
            let cube = product(t, &w, &w, &w);
            let cube_norm = triple_norm(t, &cube).expect("valid shape");
            cube_max = cube_max.max((cube_norm - norm_w.powi(3)).abs() / norm_w.powi(3));
        }
    }

    let pass = jordan_max <= thresholds.jordan
        && herm_max <= thresholds.hermiticity
        && min_spectrum >= thresholds.spectrum_floor
        && cube_max <= thresholds.cube_relative;
    AxiomReport {
        trials,
        jordan_max_residual: jordan_max,
        hermiticity_max_deviation: herm_max,
        min_l_spectrum: min_spectrum,
        cube_norm_max_residual: cube_max,
        pass,
    }
}

/// Samples random elements and checks the three JB*-triple axioms: the
/// Jordan identity, Hermitian positivity of L(a,a), and the cube-norm law.
pub fn verify_jbstar_axioms(t: &AtomicTriple, trials: u64, seed: u64) -> AxiomReport {
    let product: Box<TripleProductFn> = Box::new(|t, x, y, z| {
        triple_product(t, x, y, z).expect("sampled elements have valid shapes")
    });
    verify_axioms_with_product(t, &product, trials, seed, &AxiomThresholds::default())
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DescriptorJson {
    #[serde(rename = "type")]
    type_tag: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
}

impl Serialize for FactorDescriptor {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let json = match *self {
            FactorDescriptor::Type1 { p, q } => DescriptorJson {
                type_tag: 1,
                p: Some(p),
                q: Some(q),
                n: None,
            },
            FactorDescriptor::Type2 { n } => DescriptorJson {
                type_tag: 2,
                p: None,
                q: None,
                n: Some(n),
            },
            FactorDescriptor::Type3 { n } => DescriptorJson {
                type_tag: 3,
                p: None,
                q: None,
                n: Some(n),
            },
            FactorDescriptor::Type4 { n } => DescriptorJson {
                type_tag: 4,
                p: None,
                q: None,
                n: Some(n),
            },
        };
        json.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FactorDescriptor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let json = DescriptorJson::deserialize(deserializer)?;
        let desc = match json.type_tag {
            1 => FactorDescriptor::Type1 {
                p: json.p.ok_or_else(|| D::Error::missing_field("p"))?,
                q: json.q.ok_or_else(|| D::Error::missing_field("q"))?,
            },
            2 => FactorDescriptor::Type2 {
                n: json.n.ok_or_else(|| D::Error::missing_field("n"))?,
            },
            3 => FactorDescriptor::Type3 {
                n: json.n.ok_or_else(|| D::Error::missing_field("n"))?,
            },
            4 => FactorDescriptor::Type4 {
                n: json.n.ok_or_else(|| D::Error::missing_field("n"))?,
            },
            other => {
                return Err(D::Error::custom(format!(
                    "unsupported factor type {other} (types 1-4 only)"
                )))
            }
        };
        desc.validate().map_err(D::Error::custom)?;
        Ok(desc)
    }
}

impl Serialize for AtomicTriple {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            summands: &'a [FactorDescriptor],
        }
        Wrapper {
            summands: &self.summands,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AtomicTriple {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        struct Wrapper {
            summands: Vec<FactorDescriptor>,
        }
        let w = Wrapper::deserialize(deserializer)?;
        AtomicTriple::new(w.summands).map_err(D::Error::custom)
    }
}

/// JSON value of one block: nested rows of [re, im] pairs for matrix
/// factors, a flat list of [re, im] pairs for spin factors.
fn block_to_json(desc: &FactorDescriptor, block: &CMat) -> serde_json::Value {
    match desc {
        FactorDescriptor::Type4 { .. } => {
            let pairs: Vec<[f64; 2]> = block.iter().map(|z| [z.re, z.im]).collect();
            serde_json::to_value(pairs).expect("numbers serialize")
        }
        _ => {
            let rows: Vec<Vec<[f64; 2]>> = (0..block.nrows())
                .map(|i| (0..block.ncols()).map(|j| [block[(i, j)].re, block[(i, j)].im]).collect())
                .collect();
            serde_json::to_value(rows).expect("numbers serialize")
        }
    }
}

fn block_from_json(
    desc: &FactorDescriptor,
    value: &serde_json::Value,
) -> Result<CMat, FactorError> {
    let bad = |msg: &str| FactorError::MalformedElement(msg.to_string());
    let (rows, cols) = desc.block_shape();
    match desc {
        FactorDescriptor::Type4 { .. } => {
            let pairs: Vec<[f64; 2]> = serde_json::from_value(value.clone())
                .map_err(|e| FactorError::MalformedElement(e.to_string()))?;
            if pairs.len() != rows {
                return Err(bad("spin block has the wrong length"));
            }
            Ok(CMat::from_fn(rows, 1, |i, _| c(pairs[i][0], pairs[i][1])))
        }
        _ => {
            let grid: Vec<Vec<[f64; 2]>> = serde_json::from_value(value.clone())
                .map_err(|e| FactorError::MalformedElement(e.to_string()))?;
            if grid.len() != rows || grid.iter().any(|r| r.len() != cols) {
                return Err(bad("matrix block has the wrong shape"));
            }
            Ok(CMat::from_fn(rows, cols, |i, j| {
                c(grid[i][j][0], grid[i][j][1])
            }))
        }
    }
}

/// Serializes an element as an array with one block entry per summand.
pub fn element_to_json(t: &AtomicTriple, x: &Element) -> serde_json::Value {
    let blocks: Vec<serde_json::Value> = t
        .summands
        .iter()
        .zip(&x.blocks)
        .map(|(d, b)| block_to_json(d, b))
        .collect();
    serde_json::Value::Array(blocks)
}

pub fn element_from_json(
    t: &AtomicTriple,
    value: &serde_json::Value,
    tol: &Tolerance,
) -> Result<Element, FactorError> {
    let arr = value
        .as_array()
        .ok_or_else(|| FactorError::MalformedElement("expected an array of blocks".into()))?;
    if arr.len() != t.summands.len() {
        return Err(FactorError::BlockCountMismatch {
            got: arr.len(),
            want: t.summands.len(),
        });
    }
    let mut blocks = Vec::with_capacity(arr.len());
    for (d, v) in t.summands.iter().zip(arr) {
        blocks.push(block_from_json(d, v)?);
    }
    t.element(blocks, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn m2() -> AtomicTriple {
        AtomicTriple::factor(FactorDescriptor::Type1 { p: 2, q: 2 }).unwrap()
    }

    fn matrix_unit(t: &AtomicTriple, i: usize, j: usize) -> Element {
        let (rows, cols) = t.summands()[0].block_shape();
        let mut m = CMat::zeros(rows, cols);
        m[(i, j)] = cr(1.0);
        Element::from_blocks(vec![m])
    }

    #[test]
    fn descriptor_validation() {
        assert!(FactorDescriptor::Type1 { p: 0, q: 2 }.validate().is_err());
        assert!(FactorDescriptor::Type2 { n: 1 }.validate().is_err());
        assert!(FactorDescriptor::Type4 { n: 1 }.validate().is_err());
        assert!(FactorDescriptor::Type1 { p: 9, q: 9 }.validate().is_err());
        assert!(FactorDescriptor::Type1 { p: 8, q: 8 }.validate().is_ok());
        assert_eq!(FactorDescriptor::Type1 { p: 2, q: 3 }.rank(), 2);
        assert_eq!(FactorDescriptor::Type4 { n: 7 }.rank(), 2);
        assert_eq!(FactorDescriptor::Type2 { n: 5 }.rank(), 2);
    }

    #[test]
    fn projection_is_fixed_by_triple_product() {
        let t = m2();
        let e = matrix_unit(&t, 0, 0);
        let p = triple_product(&t, &e, &e, &e).unwrap();
        assert!(p.sub(&e).coord_norm() < 1e-15);
    }

    #[test]
    fn spin_minimal_tripotent_is_fixed() {
        let t = AtomicTriple::factor(FactorDescriptor::Type4 { n: 2 }).unwrap();
        let x = Element::from_blocks(vec![CMat::from_fn(2, 1, |i, _| {
            if i == 0 {
                cr(0.5)
            } else {
                c(0.0, 0.5)
            }
        })]);
        // <x,x> = 1/2 and <x, conj x> = 0, so {x,x,x} = x and the norm is 1.
        assert!((spin_inner(x.block(0), x.block(0)).re - 0.5).abs() < 1e-15);
        assert!(spin_inner(x.block(0), &x.block(0).conjugate()).norm() < 1e-15);
        let cube = triple_product(&t, &x, &x, &x).unwrap();
        assert!(cube.sub(&x).coord_norm() < 1e-15);
        assert!((triple_norm(&t, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    /// {E11, E12, E22} = E21 / 2 by brute-force matrix arithmetic, which is
    /// also the quadrangle identity u4 = 2 {u1, u2, u3} for matrix units.
    #[test]
    fn matrix_unit_triple_product() {
        let t = m2();
        let e11 = matrix_unit(&t, 0, 0);
        let e12 = matrix_unit(&t, 0, 1);
        let e22 = matrix_unit(&t, 1, 1);
        let e21 = matrix_unit(&t, 1, 0);
        let prod = triple_product(&t, &e11, &e12, &e22).unwrap();
        assert!(prod.sub(&e21.scale(cr(0.5))).coord_norm() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let t = m2();
        let bad = Element::from_blocks(vec![CMat::zeros(3, 2)]);
        assert!(matches!(
            triple_product(&t, &bad, &bad, &bad),
            Err(FactorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn symmetry_membership_checks() {
        let tol = Tolerance::default();
        let t2 = AtomicTriple::factor(FactorDescriptor::Type2 { n: 2 }).unwrap();
        let anti = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(-1.0), cr(0.0)]);
        let sym = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
        assert!(t2.element(vec![anti.clone()], &tol).is_ok());
        assert!(matches!(
            t2.element(vec![sym.clone()], &tol),
            Err(FactorError::SymmetryViolation { .. })
        ));
        let t3 = AtomicTriple::factor(FactorDescriptor::Type3 { n: 2 }).unwrap();
        assert!(t3.element(vec![sym], &tol).is_ok());
        assert!(t3.element(vec![anti], &tol).is_err());
    }

    #[test]
    fn norm_is_linf_over_summands() {
        let t = AtomicTriple::new(vec![
            FactorDescriptor::Type1 { p: 2, q: 2 },
            FactorDescriptor::Type1 { p: 2, q: 2 },
        ])
        .unwrap();
        let mut x = t.zero();
        x.block_mut(0)[(0, 0)] = cr(1.0);
        assert!((triple_norm(&t, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn type23_products_stay_in_the_subtriple() {
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for desc in [FactorDescriptor::Type2 { n: 4 }, FactorDescriptor::Type3 { n: 3 }] {
            let t = AtomicTriple::factor(desc).unwrap();
            for _ in 0..50 {
                let x = random_element(&t, &mut rng);
                let y = random_element(&t, &mut rng);
                let z = random_element(&t, &mut rng);
                let p = triple_product(&t, &x, &y, &z).unwrap();
                assert!(t.check_member(&p, &Tolerance::uniform(1e-8).unwrap()).is_ok());
                let _ = tol;
            }
        }
    }

    #[test]
    fn coordinates_round_trip_and_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = AtomicTriple::new(vec![
            FactorDescriptor::Type2 { n: 4 },
            FactorDescriptor::Type4 { n: 3 },
            FactorDescriptor::Type3 { n: 3 },
        ])
        .unwrap();
        for _ in 0..20 {
            let x = random_element(&t, &mut rng);
            let coords = element_to_coords(&t, &x);
            let back = element_from_coords(&t, &coords);
            assert!(back.sub(&x).coord_norm() < 1e-12);
            assert!((coords.norm() - x.coord_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn axioms_hold_per_factor_type() {
        for desc in [
            FactorDescriptor::Type1 { p: 2, q: 2 },
            FactorDescriptor::Type2 { n: 4 },
            FactorDescriptor::Type3 { n: 2 },
            FactorDescriptor::Type4 { n: 3 },
        ] {
            let t = AtomicTriple::factor(desc).unwrap();
            let report = verify_jbstar_axioms(&t, 100, 7);
            assert!(
                report.pass,
                "axioms failed for {desc:?}: {report:?}"
            );
            assert!(report.jordan_max_residual <= 1e-8);
        }
    }

    #[test]
    fn corrupted_product_fails_jordan_identity() {
        let t = AtomicTriple::factor(FactorDescriptor::Type4 { n: 3 }).unwrap();
        // Sign flip on the conjugation term of the spin product.
        let broken: Box<TripleProductFn> = Box::new(|_, x, y, z| {
            let xy = spin_inner(x.block(0), y.block(0));
            let zy = spin_inner(z.block(0), y.block(0));
            let xz_bar = spin_inner(x.block(0), &z.block(0).conjugate());
            let block = z.block(0).map(|w| w * xy)
                + x.block(0).map(|w| w * zy)
                + y.block(0).conjugate().map(|w| w * xz_bar);
            Element::from_blocks(vec![block])
        });
        let report =
            verify_axioms_with_product(&t, &broken, 50, 3, &AxiomThresholds::default());
        assert!(!report.pass);
        assert!(report.jordan_max_residual > 1e-3);
    }

    #[test]
    fn factor_spec_json_round_trip() {
        let text = r#"{"summands":[{"type":1,"p":2,"q":2},{"type":4,"n":3}]}"#;
        let t: AtomicTriple = serde_json::from_str(text).unwrap();
        assert_eq!(
            t.summands(),
            &[
                FactorDescriptor::Type1 { p: 2, q: 2 },
                FactorDescriptor::Type4 { n: 3 }
            ]
        );
        let back = serde_json::to_string(&t).unwrap();
        let t2: AtomicTriple = serde_json::from_str(&back).unwrap();
        assert_eq!(t, t2);
        assert!(serde_json::from_str::<AtomicTriple>(r#"{"summands":[{"type":5,"n":3}]}"#).is_err());
        assert!(serde_json::from_str::<AtomicTriple>(r#"{"summands":[]}"#).is_err());
    }

    proptest! {
        /// Element files round-trip bit-exactly through their JSON form.
        #[test]
        fn element_json_round_trip_is_bit_exact(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = AtomicTriple::new(vec![
                FactorDescriptor::Type1 { p: 2, q: 3 },
                FactorDescriptor::Type2 { n: 4 },
                FactorDescriptor::Type3 { n: 2 },
                FactorDescriptor::Type4 { n: 3 },
            ])
            .unwrap();
            let x = random_element(&t, &mut rng);
            let text = serde_json::to_string(&element_to_json(&t, &x)).unwrap();
            let value: serde_json::Value = serde_json::from_str(&text).unwrap();
            let back = element_from_json(&t, &value, &Tolerance::default()).unwrap();
            for (a, b) in x.blocks().iter().zip(back.blocks()) {
                for (za, zb) in a.iter().zip(b.iter()) {
                    prop_assert!(za.re.to_bits() == zb.re.to_bits());
                    prop_assert!(za.im.to_bits() == zb.im.to_bits());
                }
            }
        }

        /// Sesquilinearity of the triple product: additive in every slot,
        /// linear in the outer slots, conjugate-linear in the middle slot,
        /// and symmetric in the outer variables.
        #[test]
        fn triple_product_sesquilinearity(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let descs = [
                FactorDescriptor::Type1 { p: 2, q: 3 },
                FactorDescriptor::Type2 { n: 4 },
                FactorDescriptor::Type3 { n: 3 },
                FactorDescriptor::Type4 { n: 4 },
            ];
            let t = AtomicTriple::factor(descs[(seed % 4) as usize]).unwrap();
            let x = random_element(&t, &mut rng);
            let x2 = random_element(&t, &mut rng);
            let y = random_element(&t, &mut rng);
            let z = random_element(&t, &mut rng);
            let lambda = c(0.83, -1.21);
            let tol = Tolerance::uniform(1e-9).unwrap();

            let close = |a: &Element, b: &Element| {
                a.sub(b).coord_norm() <= tol.slack(a.coord_norm().max(b.coord_norm()))
            };

            // Additivity in the first slot.
            let left = triple_product(&t, &x.add(&x2), &y, &z).unwrap();
            let right = triple_product(&t, &x, &y, &z).unwrap()
                .add(&triple_product(&t, &x2, &y, &z).unwrap());
            prop_assert!(close(&left, &right));

            // Outer homogeneity.
            let left = triple_product(&t, &x.scale(lambda), &y, &z).unwrap();
            let right = triple_product(&t, &x, &y, &z).unwrap().scale(lambda);
            prop_assert!(close(&left, &right));

            // Middle slot is conjugate-linear.
            let left = triple_product(&t, &x, &y.scale(lambda), &z).unwrap();
            let right = triple_product(&t, &x, &y, &z).unwrap().scale(lambda.conj());
            prop_assert!(close(&left, &right));

            // Symmetry in the outer variables.
            let left = triple_product(&t, &x, &y, &z).unwrap();
            let right = triple_product(&t, &z, &y, &x).unwrap();
            prop_assert!(close(&left, &right));
        }

        /// Cube identity ||{a,a,a}|| = ||a||^3 across all supported types.
        #[test]
        fn cube_norm_identity(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let descs = [
                FactorDescriptor::Type1 { p: 2, q: 3 },
                FactorDescriptor::Type2 { n: 5 },
                FactorDescriptor::Type3 { n: 3 },
                FactorDescriptor::Type4 { n: 4 },
            ];
            let t = AtomicTriple::factor(descs[(seed % 4) as usize]).unwrap();
            let a = random_element(&t, &mut rng);
            let norm = triple_norm(&t, &a).unwrap();
            prop_assume!(norm > 1e-3);
            let cube = triple_product(&t, &a, &a, &a).unwrap();
            let cube_norm = triple_norm(&t, &cube).unwrap();
            prop_assert!((cube_norm - norm.powi(3)).abs() <= 1e-7 * norm.powi(3));
        }
    }
}


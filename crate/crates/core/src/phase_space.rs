//! Phase-space linear algebra: the symplectic form, symplectic matrices and
//! the Weyl-Heisenberg composition law.
//!
//! Coordinates are always ordered `(q_1..q_n, p_1..p_n)`, which fixes the
//! block layout of the standard symplectic matrix `J = [[0, 1], [-1, 0]]`.
//! Planck's constant is never stored in points or matrices; every routine
//! that needs it takes it as an explicit argument.

use std::ops::{Add, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default tolerance on `||M^T J M - J||_max`.
pub const DEFAULT_SYMPLECTIC_TOL: f64 = 1e-9;

/// A point `z = (q, p)` of the 2n-dimensional phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint(DVector<f64>);

impl PhasePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(Error::OddDimension(coords.len()));
        }
        Ok(PhasePoint(DVector::from_vec(coords)))
    }

    /// One degree of freedom.
    pub fn new1(q: f64, p: f64) -> Self {
        PhasePoint(DVector::from_vec(vec![q, p]))
    }

    pub fn zeros(n: usize) -> Self {
        PhasePoint(DVector::zeros(2 * n))
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() || v.len() % 2 != 0 {
            return Err(Error::OddDimension(v.len()));
        }
        Ok(PhasePoint(v))
    }

    /// Number of degrees of freedom `n`.
    pub fn dof(&self) -> usize {
        self.0.len() / 2
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn q(&self) -> &[f64] {
        &self.0.as_slice()[..self.dof()]
    }

    pub fn p(&self) -> &[f64] {
        &self.0.as_slice()[self.dof()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    fn check_same(&self, other: &PhasePoint) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }
}

impl Add for &PhasePoint {
    type Output = PhasePoint;
    fn add(self, rhs: &PhasePoint) -> PhasePoint {
        assert_eq!(self.len(), rhs.len(), "phase point dimension mismatch");
        PhasePoint(&self.0 + &rhs.0)
    }
}

impl Sub for &PhasePoint {
    type Output = PhasePoint;
    fn sub(self, rhs: &PhasePoint) -> PhasePoint {
        assert_eq!(self.len(), rhs.len(), "phase point dimension mismatch");
        PhasePoint(&self.0 - &rhs.0)
    }
}

impl Neg for &PhasePoint {
    type Output = PhasePoint;
    fn neg(self) -> PhasePoint {
        PhasePoint(-&self.0)
    }
}

/// The standard symplectic matrix `J` for `n` degrees of freedom.
pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = 1.0;
        j[(n + k, k)] = -1.0;
    }
    j
}

/// `sigma(z, w) = z . J w`.
pub fn symplectic_form(z: &PhasePoint, w: &PhasePoint) -> Result<f64> {
    z.check_same(w)?;
    let n = z.dof();
    let (zs, ws) = (z.as_slice(), w.as_slice());
    // z.Jw = sum_k q_k w_{p_k} - p_k w_{q_k}
    Ok((0..n).map(|k| zs[k] * ws[n + k] - zs[n + k] * ws[k]).sum())
}

/// `||M^T J M - J||_max`.
pub fn symplecticity_residual(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 || m.nrows() % 2 != 0 {
        return Err(Error::OddDimension(m.nrows()));
    }
    let j = standard_j(m.nrows() / 2);
    Ok((m.transpose() * &j * m - &j).amax())
}

pub fn is_symplectic(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(symplecticity_residual(m)? <= tol)
}

/// A real `2n x 2n` matrix satisfying `M^T J M = J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    m: DMatrix<f64>,
}

impl SymplecticMatrix {
    /// Validates at [`DEFAULT_SYMPLECTIC_TOL`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, DEFAULT_SYMPLECTIC_TOL)
    }

    pub fn with_tolerance(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        let residual = symplecticity_residual(&m)?;
        if residual > tol {
            return Err(Error::InvalidArgument(format!(
                "matrix is not symplectic: residual {residual:e} > {tol:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > tol.max(1e-8) * (1.0 + m.amax().powi(m.nrows() as i32)) {
            return Err(Error::InvalidArgument(format!(
                "symplectic matrix has determinant {det}"
            )));
        }
        Ok(SymplecticMatrix { m })
    }

    /// Wraps a matrix known to be symplectic by construction (e.g. the output
    /// of an integrator whose drift is checked separately).
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square() && m.nrows() % 2 == 0);
        SymplecticMatrix { m }
    }

    pub fn identity(n: usize) -> Self {
        SymplecticMatrix {
            m: DMatrix::identity(2 * n, 2 * n),
        }
    }

    /// `1 cos(theta) + J sin(theta)`.
    pub fn rotation(n: usize, theta: f64) -> Self {
        let m = DMatrix::identity(2 * n, 2 * n) * theta.cos() + standard_j(n) * theta.sin();
        SymplecticMatrix { m }
    }

    /// `diag(e^r, e^-r)` for each degree of freedom.
    pub fn squeeze(r: &[f64]) -> Self {
        let n = r.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (k, rk) in r.iter().enumerate() {
            m[(k, k)] = rk.exp();
            m[(n + k, n + k)] = (-rk).exp();
        }
        SymplecticMatrix { m }
    }

    /// The flow `exp(t J S)` of the quadratic Hamiltonian `z.Sz/2`.
    pub fn quadratic_flow(s: &DMatrix<f64>, t: f64) -> Result<Self> {
        if !s.is_square() || s.nrows() % 2 != 0 {
            return Err(Error::OddDimension(s.nrows()));
        }
        let sym = (s - s.transpose()).amax();
        if sym > 1e-12 * (1.0 + s.amax()) {
            return Err(Error::InvalidArgument("generator is not symmetric".into()));
        }
        let j = standard_j(s.nrows() / 2);
        Ok(SymplecticMatrix::from_trusted((j * s * t).exp()))
    }

    pub fn dof(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn residual(&self) -> f64 {
        symplecticity_residual(&self.m).expect("validated at construction")
    }

    pub fn apply(&self, z: &PhasePoint) -> Result<PhasePoint> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: z.len(),
            });
        }
        Ok(PhasePoint(&self.m * z.as_vector()))
    }

    /// `M^{-1} = -J M^T J`.
    pub fn inverse(&self) -> SymplecticMatrix {
        let j = standard_j(self.dof());
        SymplecticMatrix {
            m: -(&j * self.m.transpose() * &j),
        }
    }

    pub fn compose(&self, other: &SymplecticMatrix) -> SymplecticMatrix {
        SymplecticMatrix {
            m: &self.m * &other.m,
        }
    }

    /// `det(1 - M)`.
    pub fn det_one_minus(&self) -> f64 {
        (DMatrix::identity(self.dim(), self.dim()) - &self.m).determinant()
    }
}

/// `exp(J S)` for a seeded random symmetric `S` with entries in
/// `[-spread, spread]`.
pub fn random_symplectic(n: usize, seed: u64, spread: f64) -> Result<SymplecticMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "spread must be positive, got {spread}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 2 * n;
    let mut s = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = rng.random_range(-spread..=spread);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    SymplecticMatrix::quadratic_flow(&s, 1.0)
}

/// Phase and displacement of a product of Weyl-Heisenberg translations,
/// `T(z) T(w) = exp(i phase) T(z + w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylPhase {
    pub phase: f64,
    pub displacement: PhasePoint,
}

impl WeylPhase {
    /// Multiplies by `T(u)` on the right.
    pub fn then(&self, u: &PhasePoint, hbar: f64) -> Result<WeylPhase> {
        let step = weyl_compose(&self.displacement, u, hbar)?;
        Ok(WeylPhase {
            phase: self.phase + step.phase,
            displacement: step.displacement,
        })
    }
}

/// `T(z) T(w) = exp(-i sigma(z, w) / 2 hbar) T(z + w)`.
pub fn weyl_compose(z: &PhasePoint, w: &PhasePoint, hbar: f64) -> Result<WeylPhase> {
    if !(hbar > 0.0) {
        return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
    }
    let sigma = symplectic_form(z, w)?;
    Ok(WeylPhase {
        phase: -sigma / (2.0 * hbar),
        displacement: z + w,
    })
}

//! Mehlig-Wilkinson covariant symbols of metaplectic operators and the
//! auxiliary matrices `N`, `K`, `B` used by the return-probability formulas.
//!
//! Only moduli are computed. The unimodular constant in front of the
//! covariant symbol is never tracked.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phase_space::{standard_j, PhasePoint, SymplecticMatrix};

pub type CMatrix = DMatrix<Complex64>;

/// Threshold on `|det(1 - M)|` below which `1` counts as an eigenvalue.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub(crate) fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

fn cmax(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn invert(m: &CMatrix, what: &str) -> Result<CMatrix> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::InternalInvariantViolated(format!("{what} is singular")))
}

/// Covariant symbol of `R(M)`: `Omega(z) = gamma |det(1-M)|^{-1/2} exp(i z.Az / 2 hbar)`
/// with `|gamma| = 1` left unspecified.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSymbol {
    pub prefactor_modulus: f64,
    pub a: DMatrix<f64>,
    pub hbar: f64,
}

impl GaussianSymbol {
    /// `|Omega(z)|`, which does not depend on `z` because `A` is real.
    pub fn modulus(&self, z: &PhasePoint) -> Result<f64> {
        if z.len() != self.a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.a.nrows(),
                found: z.len(),
            });
        }
        Ok(self.value_without_constant(z)?.norm())
    }

    /// `Omega(z) / gamma`.
    pub fn value_without_constant(&self, z: &PhasePoint) -> Result<Complex64> {
        if z.len() != self.a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.a.nrows(),
                found: z.len(),
            });
        }
        let v = z.as_vector();
        let quad = v.dot(&(&self.a * v));
        Ok(Complex64::from_polar(
            self.prefactor_modulus,
            quad / (2.0 * self.hbar),
        ))
    }
}

fn check_not_eigenvalue_one(m: &SymplecticMatrix, tol: f64) -> Result<f64> {
    let det = m.det_one_minus();
    if !(det.abs() > tol) {
        return Err(Error::EigenvalueOne { det: det.abs() });
    }
    Ok(det)
}

/// `A = (J/2)(M-1)^{-1}(1+M)`, cross-checked against `(1/2) J (M+1)(M-1)^{-1}`.
pub fn cayley_a(m: &SymplecticMatrix) -> Result<DMatrix<f64>> {
    cayley_a_with_tol(m, DEFAULT_SINGULAR_TOL)
}

pub fn cayley_a_with_tol(m: &SymplecticMatrix, tol_sing: f64) -> Result<DMatrix<f64>> {
    check_not_eigenvalue_one(m, tol_sing)?;
    let dim = m.dim();
    let one = DMatrix::<f64>::identity(dim, dim);
    let j = standard_j(m.dof());
    let mm = m.matrix();
    let inv = (mm - &one)
        .lu()
        .try_inverse()
        .ok_or(Error::EigenvalueOne { det: 0.0 })?;
    let plus = mm + &one;
    let a1 = &j * &inv * &plus * 0.5;
    let a2 = &j * &plus * &inv * 0.5;
    let scale = 1.0 + a1.amax();
    let asym = (&a1 - a1.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::InternalInvariantViolated(format!(
            "A is not symmetric (residual {asym:e})"
        )));
    }
    let diff = (&a1 - &a2).amax();
    if diff > 1e-10 * scale {
        return Err(Error::InternalInvariantViolated(format!(
            "the two forms of A disagree by {diff:e}"
        )));
    }
    Ok((&a1 + a1.transpose()) * 0.5)
}

pub fn mw_symbol(m: &SymplecticMatrix, hbar: f64) -> Result<GaussianSymbol> {
    if !(hbar > 0.0) {
        return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
    }
    let det = check_not_eigenvalue_one(m, DEFAULT_SINGULAR_TOL)?;
    let a = cayley_a(m)?;
    Ok(GaussianSymbol {
        prefactor_modulus: det.abs().powf(-0.5),
        a,
        hbar,
    })
}

/// The matrices `N`, `K`, `B` and the prefactor `ct = |det N|^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MWMatrices {
    pub n: CMatrix,
    pub k: CMatrix,
    pub b: CMatrix,
    pub ct: f64,
    pub det_n_abs: f64,
    /// Present when `1` is not an eigenvalue of `F`.
    pub a: Option<DMatrix<f64>>,
}

impl MWMatrices {
    /// `Re(z.(1+K)z)` for real `z`.
    pub fn one_plus_k_form(&self, z: &PhasePoint) -> f64 {
        bilinear_re(&self.k, z) + z.norm_squared()
    }

    /// `Re(z.Kz)`.
    pub fn k_form(&self, z: &PhasePoint) -> f64 {
        bilinear_re(&self.k, z)
    }
}

fn bilinear_re(m: &CMatrix, z: &PhasePoint) -> f64 {
    let v = z.as_slice();
    let mut acc = 0.0;
    for (r, vr) in v.iter().enumerate() {
        for (c, vc) in v.iter().enumerate() {
            acc += vr * m[(r, c)].re * vc;
        }
    }
    acc
}

/// `N = -(iJ/2)((1 - iJ)F + 1 + iJ)`.
pub fn n_matrix(f: &SymplecticMatrix) -> CMatrix {
    let dim = f.dim();
    let one = CMatrix::identity(dim, dim);
    let ij = complexify(&standard_j(f.dof())) * I;
    let ff = complexify(f.matrix());
    (&ij * Complex64::new(-0.5, 0.0)) * ((&one - &ij) * ff + &one + &ij)
}

pub fn mw_matrices(f: &SymplecticMatrix) -> Result<MWMatrices> {
    let dim = f.dim();
    let one = CMatrix::identity(dim, dim);
    let j = complexify(&standard_j(f.dof()));
    let n = n_matrix(f);
    let det_n_abs = n.clone().lu().determinant().norm();
    if !(det_n_abs > 0.0) || !det_n_abs.is_finite() {
        return Err(Error::InternalInvariantViolated(format!(
            "|det N| = {det_n_abs}"
        )));
    }
    let n_inv = invert(&n, "N")?;
    let f_minus = complexify(f.matrix()) - &one;
    let b = &f_minus * &n_inv;
    // (-J + i)(B/2)(J + i) = -(1+iJ)(1-2iA)^{-1}(1-iJ)
    let k = (&one * I - &j) * (&b * Complex64::new(0.5, 0.0)) * (&j + &one * I);

    let a = match cayley_a(f) {
        Ok(a) => {
            let ac = complexify(&a);
            let half_minus_ia = &one * Complex64::new(0.5, 0.0) - &ac * I;
            let scale = (1.0 + a.amax()) * (1.0 + cmax(&b));
            let resid = cmax(&(&half_minus_ia * &b - &one));
            if resid > 1e-9 * scale {
                return Err(Error::InternalInvariantViolated(format!(
                    "(1/2 - iA) B differs from 1 by {resid:e}"
                )));
            }
            let inv = invert(&(&one - &ac * (I * 2.0)), "1 - 2iA")?;
            let ij = &j * I;
            let bracket = &one - (&one + &ij) * inv * (&one - &ij);
            let resid = cmax(&(&bracket - (&one + &k)));
            if resid > 1e-9 * scale {
                return Err(Error::InternalInvariantViolated(format!(
                    "1 + K differs from its A-form by {resid:e}"
                )));
            }
            Some(a)
        }
        Err(Error::EigenvalueOne { .. }) => None,
        Err(e) => return Err(e),
    };

    Ok(MWMatrices {
        n,
        k,
        b,
        ct: det_n_abs.powf(-0.5),
        det_n_abs,
        a,
    })
}

/// `||F^T F - 1||_max`.
pub fn orthogonality_residual(f: &SymplecticMatrix) -> f64 {
    let m = f.matrix();
    (m.transpose() * m - DMatrix::<f64>::identity(f.dim(), f.dim())).amax()
}

pub fn is_unitary_symplectic(f: &SymplecticMatrix, tol: f64) -> bool {
    orthogonality_residual(f) <= tol
}

/// Polar factors `F = P O` with `P = exp([[Re E, Im E], [Im E, -Re E]])`
/// and `O` the orthogonal symplectic matrix of the unitary `exp(i Gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezeRotation {
    /// Complex symmetric `n x n` squeeze parameters.
    pub e: CMatrix,
    /// Hermitian `n x n` rotation generator.
    pub gamma: CMatrix,
}

impl SqueezeRotation {
    /// `(1/2) tr Gamma`.
    pub fn rotation_phase(&self) -> f64 {
        0.5 * self.gamma.trace().re
    }

    pub fn squeeze_matrix(&self) -> DMatrix<f64> {
        let n = self.e.nrows();
        let mut x = DMatrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                let e = self.e[(r, c)];
                x[(r, c)] = e.re;
                x[(r, n + c)] = e.im;
                x[(n + r, c)] = e.im;
                x[(n + r, n + c)] = -e.re;
            }
        }
        let eig = SymmetricEigen::new((&x + x.transpose()) * 0.5);
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    }

    pub fn rotation_matrix(&self) -> DMatrix<f64> {
        let n = self.gamma.nrows();
        let schur = nalgebra::Schur::new(self.gamma.clone());
        let (q, t) = schur.unpack();
        let phases = CMatrix::from_diagonal(&t.diagonal().map(|l| (I * l.re).exp()));
        let u = &q * phases * q.adjoint();
        let mut o = DMatrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                o[(r, c)] = u[(r, c)].re;
                o[(r, n + c)] = u[(r, c)].im;
                o[(n + r, c)] = -u[(r, c)].im;
                o[(n + r, n + c)] = u[(r, c)].re;
            }
        }
        o
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.squeeze_matrix() * self.rotation_matrix()
    }
}

pub fn squeeze_rotation_decompose(f: &SymplecticMatrix) -> Result<SqueezeRotation> {
    let n = f.dof();
    let m = f.matrix();
    let eig = SymmetricEigen::new(m * m.transpose());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InternalInvariantViolated(
            "F F^T is not positive definite".into(),
        ));
    }
    let v = &eig.eigenvectors;
    let inv_sqrt_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let log_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 0.5 * l.ln()));
    let p_inv = v * inv_sqrt_d * v.transpose();
    let log_p = v * log_d * v.transpose();
    let o = p_inv * m;

    let mut e = CMatrix::zeros(n, n);
    let mut u = CMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            e[(r, c)] = Complex64::new(log_p[(r, c)], log_p[(r, n + c)]);
            u[(r, c)] = Complex64::new(o[(r, c)], o[(r, n + c)]);
        }
    }
    let schur = nalgebra::Schur::try_new(u, f64::EPSILON, 0).ok_or_else(|| {
        Error::InternalInvariantViolated("Schur factorisation did not converge".into())
    })?;
    let (q, t) = schur.unpack();
    let angles = CMatrix::from_diagonal(&t.diagonal().map(|l| Complex64::new(l.arg(), 0.0)));
    let gamma = &q * angles * q.adjoint();
    let gamma = (&gamma + gamma.adjoint()) * Complex64::new(0.5, 0.0);
    let e = (&e + e.transpose()) * Complex64::new(0.5, 0.0);
    Ok(SqueezeRotation { e, gamma })
}

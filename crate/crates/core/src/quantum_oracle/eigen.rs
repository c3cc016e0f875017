use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{Grid1D, WavepacketGrid};
use crate::error::{Error, Result};

/// Boundary amplitude of a normalised eigenstate that counts as leaking.
const CONFINEMENT_TAIL: f64 = 1e-8;

/// Lowest eigenpairs of `H = P^2/2 + V(Q)` on a grid, plus optional matrix
/// elements of a perturbation `V'` in that basis.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub energies: Vec<f64>,
    /// Real, normalised, with the first significant sample positive.
    pub states: Vec<Vec<f64>>,
    pub grid: Grid1D,
    pub hbar: f64,
    /// `<n|V'|m>`.
    pub v_matrix: Option<DMatrix<f64>>,
    /// `<n|V'^2|n>` computed on the grid, for completeness checks.
    pub v2_diag: Option<Vec<f64>>,
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn state(&self, n: usize) -> WavepacketGrid {
        WavepacketGrid {
            values: self.states[n].iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            grid: self.grid.clone(),
            hbar: self.hbar,
        }
    }

    pub fn attach_perturbation<F: Fn(f64) -> f64 + Sync>(&mut self, v: F) {
        let dx = self.grid.dx();
        let vx: Vec<f64> = self.grid.points().iter().map(|&x| v(x)).collect();
        let k = self.len();
        let weighted: Vec<Vec<f64>> =
            self.states.iter().map(|s| s.iter().zip(&vx).map(|(a, b)| a * b).collect()).collect();
        let rows: Vec<Vec<f64>> = (0..k)
            .into_par_iter()
            .map(|n| {
                (0..k)
                    .map(|m| dx * weighted[n].iter().zip(&self.states[m]).map(|(a, b)| a * b).sum::<f64>())
                    .collect()
            })
            .collect();
        let mut mat = DMatrix::zeros(k, k);
        for n in 0..k {
            for m in 0..k {
                mat[(n, m)] = 0.5 * (rows[n][m] + rows[m][n]);
            }
        }
        self.v2_diag = Some(weighted.iter().map(|w| dx * w.iter().map(|a| a * a).sum::<f64>()).collect());
        self.v_matrix = Some(mat);
    }

    /// Fails with [`Error::BasisTooSmall`] when `sum_m |V'_nm|^2` misses more
    /// than `rel_tol` of `<n|V'^2|n>`.
    pub fn check_completeness(&self, n: usize, rel_tol: f64) -> Result<()> {
        let (Some(v), Some(v2)) = (&self.v_matrix, &self.v2_diag) else {
            return Err(Error::MissingVMatrix);
        };
        let captured: f64 = v.row(n).iter().map(|a| a * a).sum();
        let defect = (v2[n] - captured) / v2[n].max(f64::MIN_POSITIVE);
        if defect > rel_tol {
            return Err(Error::BasisTooSmall { index: n, defect });
        }
        Ok(())
    }

    /// Coefficients `<n|psi>`.
    pub fn expand(&self, psi: &WavepacketGrid) -> Result<Vec<Complex64>> {
        if psi.grid != self.grid || psi.hbar != self.hbar {
            return Err(Error::GridMismatch);
        }
        let dx = self.grid.dx();
        Ok(self
            .states
            .iter()
            .map(|s| s.iter().zip(&psi.values).map(|(a, b)| b * *a).sum::<Complex64>() * dx)
            .collect())
    }

    pub fn synthesize(&self, coeffs: &[Complex64]) -> WavepacketGrid {
        let mut values = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (c, s) in coeffs.iter().zip(&self.states) {
            for (v, a) in values.iter_mut().zip(s) {
                *v += c * *a;
            }
        }
        WavepacketGrid { values, grid: self.grid.clone(), hbar: self.hbar }
    }

    /// `c_n exp(-i E_n t / hbar)`.
    pub fn evolve(&self, coeffs: &[Complex64], t: f64) -> Vec<Complex64> {
        coeffs
            .iter()
            .zip(&self.energies)
            .map(|(c, e)| c * Complex64::from_polar(1.0, -e * t / self.hbar))
            .collect()
    }
}

/// `V'(t)_nm = exp(i (E_n - E_m) t / hbar) V'_nm`.
pub fn heisenberg_matrix(basis: &EigenBasis, t: f64) -> Result<DMatrix<Complex64>> {
    let v = basis.v_matrix.as_ref().ok_or(Error::MissingVMatrix)?;
    let k = basis.len();
    Ok(DMatrix::from_fn(k, k, |n, m| {
        v[(n, m)] * Complex64::from_polar(1.0, (basis.energies[n] - basis.energies[m]) * t / basis.hbar)
    }))
}

struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `lambda` (Sturm sequence).
    fn count_below(&self, lambda: f64) -> usize {
        let b2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (i, &a) in self.diag.iter().enumerate() {
            q = if i == 0 { a - lambda } else { a - lambda - b2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (a.abs() + self.off.abs()).max(1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bounds(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().cloned().fold(f64::INFINITY, f64::min) - r;
        let hi = self.diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + r;
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue by bisection.
    fn eigenvalue(&self, k: usize, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T - shift) x = rhs` by Gaussian elimination with partial
    /// pivoting.
    fn solve_shifted(&self, shift: f64, rhs: &mut [f64]) {
        let n = self.diag.len();
        let b = self.off;
        let tiny = f64::EPSILON * (self.diag.iter().fold(0.0f64, |m, a| m.max(a.abs())) + b.abs());
        // rows: (l, d, u1, u2) after elimination; upper band has two entries
        let mut d: Vec<f64> = self.diag.iter().map(|a| a - shift).collect();
        let mut u1 = vec![b; n];
        let mut u2 = vec![0.0; n];
        let mut lower = vec![b; n];
        for i in 0..n - 1 {
            if lower[i].abs() > d[i].abs() {
                // swap rows i and i+1
                let (di, u1i, u2i) = (d[i], u1[i], u2[i]);
                d[i] = lower[i];
                u1[i] = d[i + 1];
                u2[i] = if i + 1 < n - 1 { u1[i + 1] } else { 0.0 };
                rhs.swap(i, i + 1);
                let m = di / d[i];
                d[i + 1] = u1i - m * u1[i];
                if i + 1 < n - 1 {
                    u1[i + 1] = u2i - m * u2[i];
                }
                rhs[i + 1] -= m * rhs[i];
            } else {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let m = lower[i] / d[i];
                d[i + 1] -= m * u1[i];
                rhs[i + 1] -= m * rhs[i];
                u2[i] = 0.0;
            }
            lower[i] = 0.0;
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        rhs[n - 1] /= d[n - 1];
        if n >= 2 {
            rhs[n - 2] = (rhs[n - 2] - u1[n - 2] * rhs[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            rhs[i] = (rhs[i] - u1[i] * rhs[i + 1] - u2[i] * rhs[i + 2]) / d[i];
        }
    }
}

/// The `k` lowest eigenpairs of the second-order finite-difference
/// Hamiltonian with Dirichlet walls just outside the grid.
pub fn eigensolve<F: Fn(f64) -> f64 + Sync>(
    v: F,
    grid: &Grid1D,
    k: usize,
    hbar: f64,
) -> Result<EigenBasis> {
    if !(hbar > 0.0) {
        return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
    }
    if k == 0 || k >= grid.len() / 4 {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenstates from a grid of {}",
            grid.len()
        )));
    }
    let dx = grid.dx();
    let kin = hbar * hbar / (dx * dx);
    let xs = grid.points();
    let tri = Tridiagonal { diag: xs.iter().map(|&x| kin + v(x)).collect(), off: -0.5 * kin };
    if tri.diag.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidArgument("potential is not finite on the grid".into()));
    }
    let (lo, hi) = tri.bounds();
    let energies: Vec<f64> = (0..k).into_par_iter().map(|j| tri.eigenvalue(j, lo, hi)).collect();

    let n = grid.len();
    let mut states: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|j| {
            let gap = if j + 1 < k {
                energies[j + 1] - energies[j]
            } else {
                (energies[j] - if j > 0 { energies[j - 1] } else { lo }).abs()
            };
            let shift = energies[j] + 1e-10 * gap.max(f64::EPSILON);
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i * 7919 + j * 104729) % 1013) as f64 / 1013.0).collect();
            for _ in 0..3 {
                tri.solve_shifted(shift, &mut x);
                let nrm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                x.iter_mut().for_each(|a| *a /= nrm);
            }
            x
        })
        .collect();

    // close near-degenerate pairs
    for j in 0..k {
        for i in 0..j {
            let (head, tail) = states.split_at_mut(j);
            let proj: f64 = head[i].iter().zip(&tail[0]).map(|(a, b)| a * b).sum();
            for (b, a) in tail[0].iter_mut().zip(&head[i]) {
                *b -= proj * a;
            }
        }
        let s = &mut states[j];
        let nrm = (dx * s.iter().map(|a| a * a).sum::<f64>()).sqrt();
        s.iter_mut().for_each(|a| *a /= nrm);
        let peak = s.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let first = s.iter().find(|a| a.abs() > 1e-3 * peak).copied().unwrap_or(1.0);
        if first < 0.0 {
            s.iter_mut().for_each(|a| *a = -*a);
        }
        let edge = 4.min(n);
        let right = s[n - edge..].iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let tail = if grid.is_half_line() {
            right
        } else {
            s[..edge].iter().fold(right, |m, a| m.max(a.abs()))
        };
        if tail > CONFINEMENT_TAIL {
            return Err(Error::NotConfining { index: j, tail });
        }
    }

    Ok(EigenBasis { energies, states, grid: grid.clone(), hbar, v_matrix: None, v2_diag: None })
}

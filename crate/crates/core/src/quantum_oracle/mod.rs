//! Brute-force one-dimensional quantum mechanics used as the reference for
//! every semiclassical prediction: grid wavefunctions, split-step
//! propagation, exact Gaussian evolution, a finite-difference eigensolver,
//! Wigner transforms and phase-space trace integrals.

mod dump;
mod eigen;
mod gaussian;
mod split_step;
mod wigner;

pub use dump::{
    read_dump, read_wavepacket, write_wavepacket, write_wavepacket_csv, write_wigner, Dump,
    DUMP_MAGIC, DUMP_VERSION,
};
pub use eigen::{eigensolve, heisenberg_matrix, EigenBasis};
pub use gaussian::{
    gaussian_overlap, metaplectic_trace, overlap_sq_integral, propagate_quadratic_exact,
    GaussianParams, PhaseSpaceQuadrature, TraceResult,
};
pub use split_step::{
    propagate_splitstep, propagate_splitstep_sampled, Potential, SplitStep, NORM_DRIFT_LIMIT,
};
pub use wigner::{wigner, WignerGrid, WignerOptions};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phase_space::PhasePoint;

/// Boundary amplitude above which a sampled Gaussian counts as clipped.
pub const TAIL_LIMIT: f64 = 1e-12;

/// Uniform 1D grid.
///
/// On the full line the samples are `x_min + j dx`, `j = 0..N`, with
/// `dx = (x_max - x_min)/N` and periodic spectral operators. On the half line
/// the samples are `j dx`, `j = 1..=N`, with `dx = x_max/(N+1)` and Dirichlet
/// walls at `0` and `x_max`.
#[derive(Debug, Clone)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
    half_line: bool,
}

/// Grids are equal when they produce the same samples; `x_max` is derived.
impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.x_min == other.x_min
            && self.n == other.n
            && self.dx == other.dx
            && self.half_line == other.half_line
    }
}

impl Grid1D {
    pub const MIN_POINTS: usize = 256;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < Self::MIN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} points, got {n}",
                Self::MIN_POINTS
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidArgument(format!("bad grid interval [{x_min}, {x_max}]")));
        }
        Ok(Grid1D { x_min, x_max, n, dx: (x_max - x_min) / n as f64, half_line: false })
    }

    pub fn half_line(x_max: f64, n: usize) -> Result<Self> {
        if n < Self::MIN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} points, got {n}",
                Self::MIN_POINTS
            )));
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(Error::InvalidArgument(format!("bad half-line extent {x_max}")));
        }
        Ok(Grid1D { x_min: 0.0, x_max, n, dx: x_max / (n + 1) as f64, half_line: true })
    }

    /// Rebuilds a grid from its stored sample layout.
    pub(crate) fn from_parts(x_min: f64, dx: f64, n: usize, half_line: bool) -> Result<Self> {
        if n < Self::MIN_POINTS || !(dx > 0.0) || !x_min.is_finite() {
            return Err(Error::MalformedDump(format!("bad grid layout ({x_min}, {dx}, {n})")));
        }
        let x_max = if half_line { dx * (n + 1) as f64 } else { x_min + dx * n as f64 };
        Ok(Grid1D { x_min, x_max, n, dx, half_line })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn is_half_line(&self) -> bool {
        self.half_line
    }

    pub fn x(&self, j: usize) -> f64 {
        if self.half_line {
            (j + 1) as f64 * self.dx
        } else {
            self.x_min + j as f64 * self.dx
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Largest momentum resolved with a safety factor of four:
    /// `pi hbar / (4 dx)`.
    pub fn max_momentum(&self, hbar: f64) -> f64 {
        std::f64::consts::PI * hbar / (4.0 * self.dx)
    }

    pub fn check_resolution(&self, p_max: f64, hbar: f64) -> Result<()> {
        let limit = self.max_momentum(hbar);
        if p_max > limit {
            return Err(Error::Underresolved(format!(
                "momentum {p_max} exceeds the resolved limit {limit} (dx = {})",
                self.dx
            )));
        }
        Ok(())
    }
}

/// A wavefunction sampled on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketGrid {
    pub values: Vec<Complex64>,
    pub grid: Grid1D,
    pub hbar: f64,
}

impl WavepacketGrid {
    pub fn new(values: Vec<Complex64>, grid: Grid1D, hbar: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        Ok(WavepacketGrid { values, grid, hbar })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: &Grid1D, hbar: f64, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Self::new(values, grid.clone(), hbar)
    }

    pub fn norm_squared(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for v in self.values.iter_mut() {
                *v /= n;
            }
        }
    }

    /// `<psi, f(Q) psi>`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let dx = self.grid.dx();
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| v.norm_sqr() * f(self.grid.x(j)))
            .sum::<f64>()
            * dx
    }

    /// Largest modulus among the outermost samples.
    pub fn boundary_amplitude(&self) -> f64 {
        let n = self.values.len();
        let k = 4.min(n);
        let right = self.values[n - k..].iter().map(|v| v.norm()).fold(0.0, f64::max);
        if self.grid.is_half_line() {
            right
        } else {
            self.values[..k].iter().map(|v| v.norm()).fold(right, f64::max)
        }
    }
}

/// `<psi, phi>`, conjugate-linear in the first slot.
pub fn overlap(psi: &WavepacketGrid, phi: &WavepacketGrid) -> Result<Complex64> {
    if psi.grid != phi.grid || psi.hbar != phi.hbar {
        return Err(Error::GridMismatch);
    }
    let s: Complex64 = psi.values.iter().zip(&phi.values).map(|(a, b)| a.conj() * b).sum();
    Ok(s * psi.grid.dx())
}

/// `phi_alpha(x) = (pi hbar)^{-1/4} exp(ip(x - q/2)/hbar) exp(-(x-q)^2/2hbar)`.
pub fn coherent_state(alpha: &PhasePoint, hbar: f64, grid: &Grid1D) -> Result<WavepacketGrid> {
    if alpha.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: alpha.len() });
    }
    let p = alpha.p()[0];
    grid.check_resolution(p.abs() + 6.0 * hbar.sqrt(), hbar)?;
    let params = GaussianParams::coherent(alpha.clone(), hbar)?;
    let psi = WavepacketGrid::from_fn(grid, hbar, |x| params.evaluate(x))?;
    let tail = psi.boundary_amplitude();
    if tail > TAIL_LIMIT {
        return Err(Error::TailClipped { tail });
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid1D {
        Grid1D::new(-12.0, 12.0, 1024).unwrap()
    }

    #[test]
    fn coherent_state_basics() {
        let g = grid();
        let psi = coherent_state(&PhasePoint::new1(0.0, 0.0), 1.0, &g).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-10);
        assert!(psi.values.iter().all(|v| v.re >= 0.0 && v.im == 0.0));
        let psi = coherent_state(&PhasePoint::new1(1.5, -0.7), 0.5, &g).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-10);
        assert!(matches!(
            coherent_state(&PhasePoint::new1(11.0, 0.0), 1.0, &g),
            Err(Error::TailClipped { .. })
        ));
        assert!(matches!(
            coherent_state(&PhasePoint::new1(0.0, 30.0), 1.0, &g),
            Err(Error::Underresolved(_))
        ));
    }

    #[test]
    fn translation_overlap_closed_form() {
        let g = grid();
        let hbar = 0.7;
        let phi0 = coherent_state(&PhasePoint::new1(0.0, 0.0), hbar, &g).unwrap();
        for (q, p) in [(1.0, 0.0), (0.3, -1.1), (-2.0, 0.5)] {
            let z = PhasePoint::new1(q, p);
            let phiz = coherent_state(&z, hbar, &g).unwrap();
            let ov = overlap(&phi0, &phiz).unwrap();
            let expect = (-(q * q + p * p) / (4.0 * hbar)).exp();
            assert_abs_diff_eq!(ov.re, expect, epsilon = 1e-8);
            assert_abs_diff_eq!(ov.im, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn coherent_pair_overlap() {
        let g = grid();
        let hbar = 0.4;
        let z = PhasePoint::new1(0.5, 1.0);
        let w = PhasePoint::new1(-0.4, 0.2);
        let a = coherent_state(&z, hbar, &g).unwrap();
        let b = coherent_state(&w, hbar, &g).unwrap();
        let ov = overlap(&a, &b).unwrap();
        let d = &z - &w;
        assert_abs_diff_eq!(ov.norm(), (-d.norm_squared() / (4.0 * hbar)).exp(), epsilon = 1e-8);
        // <phi_z, phi_w> = <phi_0, T(-z)T(w) phi_0> = exp(i sigma(z,w)/2hbar) exp(-|w-z|^2/4hbar)
        let sigma = crate::phase_space::symplectic_form(&z, &w).unwrap();
        let expect = Complex64::from_polar((-d.norm_squared() / (4.0 * hbar)).exp(), sigma / (2.0 * hbar));
        assert!((ov - expect).norm() < 1e-8);
        let back = overlap(&b, &a).unwrap();
        assert!((back - ov.conj()).norm() < 1e-14);
        assert!((overlap(&a, &a).unwrap() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = coherent_state(&PhasePoint::new1(0.0, 0.0), 1.0, &grid()).unwrap();
        let b = coherent_state(&PhasePoint::new1(0.0, 0.0), 1.0, &Grid1D::new(-12.0, 12.0, 2048).unwrap()).unwrap();
        assert!(matches!(overlap(&a, &b), Err(Error::GridMismatch)));
    }
}

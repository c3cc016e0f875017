//! Return probabilities `R(alpha, t) = |<phi_alpha, U(t) phi_alpha>|` and
//! revival detection: the semiclassical thawed-Gaussian prediction, the exact
//! formulas for quadratic Hamiltonians, the Mathieu overlap built from Floquet
//! data and the exact states of the time-dependent singular oscillator.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::classical_dynamics::{integrate_full, FloquetData, Hamiltonian, HillComplexSolution};
use crate::error::{Error, Result};
use crate::metaplectic::{
    mw_matrices, squeeze_rotation_decompose, SqueezeRotation, DEFAULT_SINGULAR_TOL,
};
use crate::phase_space::{standard_j, PhasePoint, SymplecticMatrix};
use crate::quantum_oracle::{propagate_quadratic_exact, GaussianParams};

pub const DEFAULT_REVIVAL_EPSILON: f64 = 0.01;

/// Radicand modulus below which the Mathieu square root is ambiguous.
const BRANCH_GUARD: f64 = 1e-10;

/// The semiclassical propagated coherent state: center `z_t`, stability
/// `F_t` and action phase `delta_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThawedGaussian {
    pub center: PhasePoint,
    pub stability: SymplecticMatrix,
    pub action: f64,
    pub hbar: f64,
    pub origin: PhasePoint,
}

impl ThawedGaussian {
    pub fn squeeze_rotation(&self) -> Result<SqueezeRotation> {
        squeeze_rotation_decompose(&self.stability)
    }

    /// `gamma_t = (1/2) tr Gamma_t`.
    pub fn rotation_phase(&self) -> Result<f64> {
        Ok(self.squeeze_rotation()?.rotation_phase())
    }

    /// Explicit wavefunction parameters (one degree of freedom).
    pub fn gaussian(&self) -> Result<GaussianParams> {
        let start = GaussianParams::coherent(self.origin.clone(), self.hbar)?;
        propagate_quadratic_exact(&start, &self.stability, &self.center, self.action)
    }
}

pub fn propagate_coherent(
    h: &dyn Hamiltonian,
    alpha: &PhasePoint,
    t: f64,
    hbar: f64,
    dt: f64,
) -> Result<ThawedGaussian> {
    if !(hbar > 0.0) {
        return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
    }
    let traj = integrate_full(h, alpha, t, dt)?;
    Ok(ThawedGaussian {
        center: traj.final_point().clone(),
        stability: traj.final_stability().expect("stability column").clone(),
        action: traj.final_action().expect("action column"),
        hbar,
        origin: alpha.clone(),
    })
}

/// `ct exp(-Re(z.(1+K)z)/4hbar)` with `z = alpha - alpha_t`. Defined for
/// every `F`, including those with eigenvalue 1.
fn semiclassical_from(g: &ThawedGaussian) -> Result<(f64, f64)> {
    let mw = mw_matrices(&g.stability)?;
    let z = &g.origin - &g.center;
    let form = mw.one_plus_k_form(&z);
    if form < -1e-9 * (1.0 + z.norm_squared()) {
        return Err(Error::InternalInvariantViolated(format!(
            "Re z.(1+K)z = {form:e} is negative"
        )));
    }
    Ok((mw.ct * (-form.max(0.0) / (4.0 * g.hbar)).exp(), mw.ct))
}

/// Semiclassical `(R, ct)` at time `t`. Fails with [`Error::EigenvalueOne`]
/// when `F_t` has eigenvalue 1.
pub fn return_probability(
    h: &dyn Hamiltonian,
    alpha: &PhasePoint,
    t: f64,
    hbar: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    let g = propagate_coherent(h, alpha, t, hbar, dt)?;
    let det = g.stability.det_one_minus().abs();
    if det <= DEFAULT_SINGULAR_TOL {
        return Err(Error::EigenvalueOne { det });
    }
    semiclassical_from(&g)
}

/// [`return_probability`] without the eigenvalue-1 restriction: the matrix `K`
/// comes from `B = (F - 1) N^{-1}`, which stays finite at `det(1 - F) = 0`.
pub fn return_probability_continuous(
    h: &dyn Hamiltonian,
    alpha: &PhasePoint,
    t: f64,
    hbar: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    semiclassical_from(&propagate_coherent(h, alpha, t, hbar, dt)?)
}

/// Exact return probability for a homogeneous quadratic Hamiltonian with flow
/// `F`: `|det N|^{-1/2} exp(-Re(J alpha . B J alpha)/2hbar)`.
pub fn quadratic_return_exact(f: &SymplecticMatrix, alpha: &PhasePoint, hbar: f64) -> Result<f64> {
    if alpha.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: alpha.len() });
    }
    let mw = mw_matrices(f)?;
    let ja = standard_j(f.dof()) * alpha.as_vector();
    let mut form = 0.0;
    for r in 0..ja.len() {
        for c in 0..ja.len() {
            form += ja[r] * mw.b[(r, c)].re * ja[c];
        }
    }
    Ok(mw.ct * (-form / (2.0 * hbar)).exp())
}

/// `<phi_alpha, exp(-iGH_osc/hbar) phi_alpha>` for `H_osc = (p^2 + q^2)/2`:
/// `exp(-iG/2 - i|alpha|^2 sin G/2hbar - |alpha|^2 sin^2(G/2)/hbar)`.
pub fn rotation_overlap_exact(g: f64, alpha: &PhasePoint, hbar: f64) -> Result<Complex64> {
    if alpha.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: alpha.len() });
    }
    let r2 = alpha.norm_squared();
    let s = (0.5 * g).sin();
    let expo = Complex64::new(-r2 * s * s / hbar, -0.5 * g - r2 * g.sin() / (2.0 * hbar));
    Ok(expo.exp())
}

fn mathieu_radicand(fd: &FloquetData, t: f64) -> Complex64 {
    let nn = fd.n_modes as i64;
    let c_inv = 0.5 / fd.c;
    let d_inv = 0.5 / fd.d;
    (-nn..=nn)
        .map(|n| {
            let k = (2 * n) as f64 + fd.rho;
            fd.coefficient(n) * (c_inv + d_inv * k) * Complex64::from_polar(1.0, n as f64 * fd.omega * t)
        })
        .sum()
}

/// `exp(-i rho omega t/4) (sum_n c_n (1/2C + (2n + rho)/2D) e^{in omega t})^{-1/2}`
/// at each of the non-decreasing `times`, with the square root continued
/// from the principal branch at `t = 0`.
pub fn mathieu_overlap_series(fd: &FloquetData, times: &[f64]) -> Result<Vec<Complex64>> {
    if !fd.stable {
        return Err(Error::Unstable { trace_abs: fd.trace.abs() });
    }
    if fd.c.norm() == 0.0 || fd.d.norm() == 0.0 {
        return Err(Error::InvalidArgument("Floquet constants C and D must be nonzero".into()));
    }
    let sub = 512.0 / fd.period();
    let mut t = 0.0;
    let mut prev = mathieu_radicand(fd, 0.0).sqrt();
    if prev.norm() < BRANCH_GUARD.sqrt() {
        return Err(Error::BranchAmbiguity { t: 0.0, modulus: prev.norm_sqr() });
    }
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(Error::InvalidArgument("times must be non-decreasing from 0".into()));
        }
        let steps = ((target - t) * sub).ceil().max(1.0) as usize;
        let h = (target - t) / steps as f64;
        for k in 1..=steps {
            let s = if k == steps { target } else { t + k as f64 * h };
            let r = mathieu_radicand(fd, s);
            if r.norm() < BRANCH_GUARD {
                return Err(Error::BranchAmbiguity { t: s, modulus: r.norm() });
            }
            let mut root = r.sqrt();
            if (root - prev).norm() > (root + prev).norm() {
                root = -root;
            }
            prev = root;
        }
        t = target;
        out.push(Complex64::from_polar(1.0, -fd.rho * fd.omega * target / 4.0) / prev);
    }
    Ok(out)
}

pub fn mathieu_overlap(fd: &FloquetData, t: f64) -> Result<Complex64> {
    Ok(mathieu_overlap_series(fd, &[t])?[0])
}

/// Width `a = Re(omega D / 2C)` of the reference Gaussian
/// `(a/pi hbar)^{1/4} exp(-a x^2/2hbar)`, and the Gaussian itself.
pub fn mathieu_reference_state(fd: &FloquetData, hbar: f64) -> Result<(f64, GaussianParams)> {
    if !fd.stable || fd.c.norm() == 0.0 {
        return Err(Error::Unstable { trace_abs: fd.trace.abs() });
    }
    let a_c = fd.omega * fd.d / (2.0 * fd.c);
    let a = a_c.re;
    if !(a > 0.0) {
        return Err(Error::NonPositiveWidth(a));
    }
    if a_c.im.abs() > 1e-6 * a {
        log::warn!("omega D / 2C has imaginary part {:e}; using the real part", a_c.im);
    }
    let g = GaussianParams::new(PhasePoint::new1(0.0, 0.0), Complex64::new(0.0, a), 0.0, hbar)?;
    Ok((a, g))
}

/// `a = sqrt(1 + 8 g^2)/2` of the singular oscillator.
pub fn singular_index(g: f64) -> f64 {
    0.5 * (1.0 + 8.0 * g * g).sqrt()
}

/// Generalized Laguerre `L_n^a(y)` by the three-term recurrence.
pub fn laguerre(n: usize, a: f64, y: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - y;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - y) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Eigenfunction `phi_n` of `-(1/2) d^2/dx^2 + x^2/2 + g^2/x^2` on `x > 0`
/// (`hbar = 1`) at the sample points, with its energy `E_n = 2n + a + 1`.
pub fn singular_eigenstate(n: usize, g: f64, xs: &[f64]) -> Result<(Vec<f64>, f64)> {
    if !(g > 0.0) {
        return Err(Error::InvalidArgument(format!("g must be positive, got {g}")));
    }
    let a = singular_index(g);
    let log_norm = 0.5 * (2f64.ln() + ln_gamma(n as f64 + 1.0) - ln_gamma(a + n as f64 + 1.0));
    let values = xs
        .iter()
        .map(|&x| {
            if x <= 0.0 {
                return 0.0;
            }
            let y = x * x;
            (log_norm + (a + 0.5) * x.ln() - 0.5 * y).exp() * laguerre(n, a, y)
        })
        .collect();
    Ok((values, 2.0 * n as f64 + a + 1.0))
}

/// `psi_n(x, t) = exp(-i theta E_n + (-u + i u' x^2)/2) phi_n(x e^{-u})` at
/// sample `index` of the complex Hill solution.
pub fn singular_time_state(
    n: usize,
    g: f64,
    hcs: &HillComplexSolution,
    index: usize,
    xs: &[f64],
) -> Result<Vec<Complex64>> {
    if index >= hcs.times.len() {
        return Err(Error::InvalidArgument(format!(
            "sample {index} is outside the solution ({} samples)",
            hcs.times.len()
        )));
    }
    let (u, udot, theta) = (hcs.u[index], hcs.udot[index], hcs.theta[index]);
    let scale = (-u).exp();
    let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
    let (phi, e_n) = singular_eigenstate(n, g, &scaled)?;
    Ok(xs
        .iter()
        .zip(phi)
        .map(|(&x, p)| Complex64::new(-0.5 * u, -theta * e_n + 0.5 * udot * x * x).exp() * p)
        .collect())
}

/// `theta` in `[0, 2 pi)` with `||F - (cos theta + J sin theta)||_max <= tol`.
pub fn rotation_form_angle(f: &SymplecticMatrix, tol: f64) -> Option<f64> {
    let n = f.dof();
    let m = f.matrix();
    let j = standard_j(n);
    let c = m.trace() / (2 * n) as f64;
    let s = (j.transpose() * m).trace() / (2 * n) as f64;
    let theta = s.atan2(c).rem_euclid(2.0 * PI);
    let theta = if theta >= 2.0 * PI { 0.0 } else { theta };
    let ideal = SymplecticMatrix::rotation(n, theta);
    if (m - ideal.matrix()).amax() <= tol {
        Some(theta)
    } else {
        None
    }
}

/// How the return probability at a scan point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnRoute {
    Semiclassical,
    /// Exact quadratic formula, used when `F_t` has eigenvalue 1.
    ExactQuadratic,
    /// Eigenvalue-1 point of a non-quadratic model with the extension disabled.
    Undefined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevivalReport {
    pub times: Vec<f64>,
    /// `None` where no route applies.
    pub r: Vec<Option<f64>>,
    /// Exact quadratic value, for quadratic models.
    pub r_exact: Vec<Option<f64>>,
    pub ct: Vec<f64>,
    pub route: Vec<ReturnRoute>,
    pub rotation_angle: Vec<Option<f64>>,
    pub revival_times: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub dt: f64,
    /// Use the `B`-based extension of the semiclassical formula at
    /// eigenvalue-1 points instead of reporting them undefined.
    pub continuous: bool,
    pub rotation_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { dt: crate::classical_dynamics::DEFAULT_DT, continuous: false, rotation_tol: 1e-6 }
    }
}

/// Grid-local maxima of `r` above `1 - epsilon` at `t > 0`, refined by a
/// parabola through the three neighbouring samples.
fn detect_revivals(times: &[f64], r: &[Option<f64>], epsilon: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let n = times.len();
    for i in 0..n {
        let Some(ri) = r[i] else { continue };
        if times[i] <= 0.0 || ri < 1.0 - epsilon {
            continue;
        }
        let left = if i > 0 { r[i - 1] } else { None };
        let right = if i + 1 < n { r[i + 1] } else { None };
        if left.is_some_and(|l| l > ri) || right.is_some_and(|rr| rr > ri) {
            continue;
        }
        // plateaus: keep the first sample only
        if left == Some(ri) {
            continue;
        }
        let t = match (left, right) {
            (Some(l), Some(rr)) => {
                let (h0, h1) = (times[i] - times[i - 1], times[i + 1] - times[i]);
                let denom = h1 * (l - ri) + h0 * (rr - ri);
                if (h0 - h1).abs() < 1e-12 * h0 && denom.abs() > 0.0 {
                    let shift = 0.5 * h0 * (l - rr) / (l - 2.0 * ri + rr);
                    if shift.is_finite() && shift.abs() <= h0 {
                        times[i] + shift
                    } else {
                        times[i]
                    }
                } else {
                    times[i]
                }
            }
            _ => times[i],
        };
        out.push(t);
    }
    out
}

pub fn revival_scan(
    h: &dyn Hamiltonian,
    alpha: &PhasePoint,
    hbar: f64,
    times: &[f64],
    epsilon: f64,
    opts: ScanOptions,
) -> Result<RevivalReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("times must be strictly increasing from 0".into()));
    }
    let quadratic = h.is_quadratic();
    type Row = (Option<f64>, Option<f64>, f64, ReturnRoute, Option<f64>);
    let rows: Vec<Result<Row>> = times
        .par_iter()
        .map(|&t| {
            let g = propagate_coherent(h, alpha, t, hbar, opts.dt)?;
            let exact = if quadratic {
                Some(quadratic_return_exact(&g.stability, alpha, hbar)?)
            } else {
                None
            };
            let angle = rotation_form_angle(&g.stability, opts.rotation_tol);
            let singular = g.stability.det_one_minus().abs() <= DEFAULT_SINGULAR_TOL;
            let (r, ct) = semiclassical_from(&g)?;
            let (value, route) = if !singular {
                (Some(r), ReturnRoute::Semiclassical)
            } else if let Some(e) = exact {
                (Some(e), ReturnRoute::ExactQuadratic)
            } else if opts.continuous {
                (Some(r), ReturnRoute::Semiclassical)
            } else {
                (None, ReturnRoute::Undefined)
            };
            Ok((value, exact, ct, route, angle))
        })
        .collect();
    let mut report = RevivalReport {
        times: times.to_vec(),
        r: Vec::with_capacity(times.len()),
        r_exact: Vec::with_capacity(times.len()),
        ct: Vec::with_capacity(times.len()),
        route: Vec::with_capacity(times.len()),
        rotation_angle: Vec::with_capacity(times.len()),
        revival_times: Vec::new(),
        epsilon,
    };
    for row in rows {
        let (r, e, ct, route, angle) = row?;
        report.r.push(r);
        report.r_exact.push(e);
        report.ct.push(ct);
        report.route.push(route);
        report.rotation_angle.push(angle);
    }
    report.revival_times = detect_revivals(times, &report.r, epsilon);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical_dynamics::{
        floquet_analyze, hill_complex_solution, periodic_alpha, FourierSeries, Model,
        DEFAULT_FOURIER_MODES,
    };
    use crate::metaplectic::is_unitary_symplectic;
    use crate::phase_space::random_symplectic;
    use crate::quantum_oracle::gaussian_overlap;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    const DT: f64 = 1e-3;

    fn mat(a: f64, b: f64, c: f64, d: f64) -> SymplecticMatrix {
        SymplecticMatrix::new(DMatrix::from_row_slice(2, 2, &[a, b, c, d])).unwrap()
    }

    #[test]
    fn propagate_examples() {
        let alpha = PhasePoint::new1(0.3, -0.4);
        let g = propagate_coherent(&Model::Pendulum, &alpha, 0.0, 0.1, DT).unwrap();
        assert_eq!(g.center, alpha);
        assert_eq!(g.stability.matrix(), &DMatrix::identity(2, 2));
        assert_eq!(g.action, 0.0);

        let g = propagate_coherent(&Model::Free, &PhasePoint::new1(0.0, 1.0), 1.0, 0.1, DT).unwrap();
        assert!((&g.center - &PhasePoint::new1(1.0, 1.0)).norm_squared().sqrt() < 1e-12);
        assert!((g.stability.matrix() - mat(1.0, 1.0, 0.0, 1.0).matrix()).amax() < 1e-12);
        assert_abs_diff_eq!(g.action, 0.0, epsilon = 1e-12);

        let g = propagate_coherent(&Model::Harmonic { omega: 1.0 }, &PhasePoint::new1(1.0, 0.0), 2.0 * PI, 0.1, DT).unwrap();
        assert!((&g.center - &PhasePoint::new1(1.0, 0.0)).norm_squared().sqrt() < 1e-9);
        assert!((g.stability.matrix() - DMatrix::identity(2, 2)).amax() < 1e-9);
        assert_abs_diff_eq!(g.action, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn minus_one_return() {
        let h = Model::Harmonic { omega: 1.0 };
        let alpha = PhasePoint::new1(0.6, -0.2);
        let hbar = 0.3;
        let (r, ct) = return_probability(&h, &alpha, PI, hbar, DT).unwrap();
        assert_abs_diff_eq!(ct, 1.0, epsilon = 1e-10);
        let z2 = 4.0 * alpha.norm_squared();
        assert_abs_diff_eq!(r, (-z2 / (4.0 * hbar)).exp(), epsilon = 1e-9);
        let (r0, _) = return_probability(&h, &PhasePoint::new1(0.0, 0.0), PI, hbar, DT).unwrap();
        assert_abs_diff_eq!(r0, 1.0, epsilon = 1e-10);
        assert!(matches!(
            return_probability(&h, &alpha, 2.0 * PI, hbar, DT),
            Err(Error::EigenvalueOne { .. })
        ));
    }

    #[test]
    fn quadratic_exact_examples() {
        let alpha = PhasePoint::new1(1.3, -0.7);
        assert_abs_diff_eq!(quadratic_return_exact(&SymplecticMatrix::identity(1), &alpha, 0.2).unwrap(), 1.0, epsilon = 1e-15);
        for seed in 0..20 {
            let f = random_symplectic(1, seed, 1.0).unwrap();
            let ct = mw_matrices(&f).unwrap().ct;
            assert_abs_diff_eq!(quadratic_return_exact(&f, &PhasePoint::new1(0.0, 0.0), 0.5).unwrap(), ct, epsilon = 1e-14);
        }
        let alpha = PhasePoint::new1(1.0, 0.0);
        for g in [0.3, 1.0, PI, 4.0, 5.9] {
            let f = SymplecticMatrix::rotation(1, g);
            let exact = quadratic_return_exact(&f, &alpha, 1.0).unwrap();
            let rot = rotation_overlap_exact(g, &alpha, 1.0).unwrap().norm();
            assert_abs_diff_eq!(exact, rot, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_overlap_examples() {
        let alpha = PhasePoint::new1(0.8, -1.1);
        for k in 0..5 {
            let v = rotation_overlap_exact(2.0 * PI * k as f64, &alpha, 0.3).unwrap();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - sign).norm() < 1e-12, "{v}");
        }
        let v = rotation_overlap_exact(1.1, &PhasePoint::new1(0.0, 0.0), 0.3).unwrap();
        assert!((v - Complex64::from_polar(1.0, -0.55)).norm() < 1e-15);
        let v = rotation_overlap_exact(PI, &PhasePoint::new1(1.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(v.norm(), (-1f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn rotation_overlap_matches_gaussian_propagation() {
        // exact metaplectic evolution including the phase
        let hbar = 0.4;
        let alpha = PhasePoint::new1(0.7, 0.2);
        for g in [0.5, 2.0, 3.5] {
            let f = SymplecticMatrix::rotation(1, g);
            let start = GaussianParams::coherent(alpha.clone(), hbar).unwrap();
            let centered = GaussianParams { center: PhasePoint::new1(0.0, 0.0), ..start.clone() };
            let moved = propagate_quadratic_exact(&centered, &f, &f.apply(&alpha).unwrap(), 0.0).unwrap();
            let ov = gaussian_overlap(&start, &moved).unwrap();
            let expect = rotation_overlap_exact(g, &alpha, hbar).unwrap();
            // the principal branch of arg(a + bW) flips the sign once G > pi
            let expect = if g > PI { -expect } else { expect };
            assert!((ov - expect).norm() < 1e-12, "{ov} vs {expect}");
        }
    }

    fn quadratic_models() -> Vec<Model> {
        let wave = FourierSeries::new(0.2, vec![0.7], vec![0.3], 1.3).unwrap();
        vec![
            Model::Free,
            Model::Harmonic { omega: 1.4 },
            Model::Dilation { g: wave.clone() },
            Model::Isotropic { g: wave.clone() },
            Model::Hill { f: wave },
            Model::quadratic(DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, -0.2])).unwrap(),
        ]
    }

    #[test]
    fn semiclassical_route_equals_exact_for_quadratic_models() {
        let models = quadratic_models();
        for (i, h) in models.iter().enumerate() {
            for k in 0..8 {
                let alpha = PhasePoint::new1(0.3 * k as f64 - 1.0, 0.8 - 0.25 * k as f64);
                let t = 0.37 + 0.41 * (i + k) as f64;
                let g = propagate_coherent(h, &alpha, t, 0.2, DT).unwrap();
                let exact = quadratic_return_exact(&g.stability, &alpha, 0.2).unwrap();
                // the free flow is a shear, so only the extended route applies
                let (r, ct) = if matches!(h, Model::Free) {
                    return_probability_continuous(h, &alpha, t, 0.2, DT).unwrap()
                } else {
                    return_probability(h, &alpha, t, 0.2, DT).unwrap()
                };
                assert!((r - exact).abs() < 1e-10, "model {i}: {r} vs {exact}");
                assert!(r <= ct + 1e-15 && ct <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn ct_equals_r_at_fixed_point() {
        let h = Model::Pendulum;
        let g = propagate_coherent(&h, &PhasePoint::new1(0.0, 0.0), 3.0, 0.1, DT).unwrap();
        let (r, ct) = semiclassical_from(&g).unwrap();
        assert_eq!(r, ct);
    }

    #[test]
    fn rotation_form_examples() {
        assert_eq!(rotation_form_angle(&SymplecticMatrix::identity(1), 1e-12), Some(0.0));
        let j = SymplecticMatrix::new(standard_j(1)).unwrap();
        assert_abs_diff_eq!(rotation_form_angle(&j, 1e-12).unwrap(), PI / 2.0, epsilon = 1e-15);
        assert_eq!(rotation_form_angle(&mat(2.0, 0.0, 0.0, 0.5), 1e-6), None);
        let r = SymplecticMatrix::rotation(2, 4.0);
        assert_abs_diff_eq!(rotation_form_angle(&r, 1e-12).unwrap(), 4.0, epsilon = 1e-12);
    }

    fn stable_mathieu() -> FloquetData {
        let f = FourierSeries::mathieu(0.3, 0.5, 2.0);
        floquet_analyze(|t| f.value(t), 2.0, 1e-4, DEFAULT_FOURIER_MODES).unwrap()
    }

    #[test]
    fn mathieu_single_mode() {
        let fd = floquet_analyze(|_| 0.36, 2.0, 1e-4, 8).unwrap();
        let series = mathieu_overlap_series(&fd, &[0.0, 0.7, 1.9, 5.0]).unwrap();
        for v in series {
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-9);
        }
        let (a, _) = mathieu_reference_state(&fd, 1.0).unwrap();
        assert_abs_diff_eq!(a, 0.6, epsilon = 1e-9);
    }

    #[test]
    fn mathieu_full_periods_have_unit_modulus() {
        let fd = stable_mathieu();
        assert!(fd.stable);
        let tp = fd.period();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * tp).collect();
        for v in mathieu_overlap_series(&fd, &times).unwrap() {
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-8);
        }
        let mid = mathieu_overlap(&fd, 0.5 * tp).unwrap();
        assert!(mid.norm() < 1.0);
    }

    #[test]
    fn mathieu_overlap_matches_exact_gaussian_evolution() {
        let fd = stable_mathieu();
        let hbar = 0.7;
        let (_, psi) = mathieu_reference_state(&fd, hbar).unwrap();
        let h = Model::mathieu(0.3, 0.5, 2.0);
        let times = [0.4, 1.1, 2.0, PI];
        let series = mathieu_overlap_series(&fd, &times).unwrap();
        for (t, v) in times.iter().zip(series) {
            let g = propagate_coherent(&h, &PhasePoint::new1(0.0, 0.0), *t, hbar, 1e-4).unwrap();
            let moved = propagate_quadratic_exact(&psi, &g.stability, &g.center, 0.0).unwrap();
            let ov = gaussian_overlap(&psi, &moved).unwrap();
            assert!((ov.norm() - v.norm()).abs() < 1e-7, "t = {t}: {ov} vs {v}");
        }
    }

    #[test]
    fn reference_state_is_normalised() {
        use crate::quantum_oracle::{Grid1D, WavepacketGrid};
        let fd = stable_mathieu();
        let (_, g) = mathieu_reference_state(&fd, 0.3).unwrap();
        let grid = Grid1D::new(-10.0, 10.0, 2048).unwrap();
        let psi = WavepacketGrid::from_fn(&grid, 0.3, |x| g.evaluate(x)).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn laguerre_small_cases() {
        let (a, y) = (0.7, 1.3);
        assert_abs_diff_eq!(laguerre(2, a, y), 0.5 * (y * y - 2.0 * (a + 2.0) * y + (a + 1.0) * (a + 2.0)), epsilon = 1e-14);
    }

    fn half_grid(n: usize, x_max: f64) -> (Vec<f64>, f64) {
        let dx = x_max / (n + 1) as f64;
        ((1..=n).map(|j| j as f64 * dx).collect(), dx)
    }

    #[test]
    fn singular_eigenstates_are_orthonormal() {
        let (xs, dx) = half_grid(20000, 12.0);
        let g = 1.0;
        let states: Vec<Vec<f64>> = (0..4).map(|n| singular_eigenstate(n, g, &xs).unwrap().0).collect();
        for i in 0..4 {
            for j in 0..4 {
                let ov: f64 = states[i].iter().zip(&states[j]).map(|(a, b)| a * b).sum::<f64>() * dx;
                assert_abs_diff_eq!(ov, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-8);
            }
        }
        assert_abs_diff_eq!(singular_eigenstate(3, 1.0, &xs).unwrap().1, 6.0 + 1.5 + 1.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_small_g_limit() {
        let (xs, _) = half_grid(2000, 8.0);
        let (phi, e) = singular_eigenstate(0, 1e-6, &xs).unwrap();
        // E_0 = a + 1 -> 3/2, the odd harmonic level
        assert_abs_diff_eq!(e, 1.5, epsilon = 1e-10);
        let norm = (4.0 / PI.sqrt()).sqrt();
        for (x, p) in xs.iter().zip(&phi).step_by(97) {
            assert_abs_diff_eq!(*p, norm * x * (-x * x / 2.0).exp(), epsilon = 1e-5);
        }
    }

    #[test]
    fn singular_energy_matches_finite_differences() {
        let (xs, dx) = half_grid(20000, 12.0);
        let g = 0.8;
        for n in 0..3 {
            let (phi, e) = singular_eigenstate(n, g, &xs).unwrap();
            let m = phi.len();
            let mut acc = 0.0;
            for j in 0..m {
                let left = if j > 0 { phi[j - 1] } else { 0.0 };
                let right = if j + 1 < m { phi[j + 1] } else { 0.0 };
                let lap = (left - 2.0 * phi[j] + right) / (dx * dx);
                let x = xs[j];
                acc += phi[j] * (-0.5 * lap + (0.5 * x * x + g * g / (x * x)) * phi[j]);
            }
            assert_abs_diff_eq!(acc * dx, e, epsilon = 1e-4);
        }
    }

    #[test]
    fn singular_time_state_basics() {
        let (xs, dx) = half_grid(8000, 12.0);
        let hcs = hill_complex_solution(|_| 1.0, 1.0, 2.0 * PI, 1e-3, Some(2.0 * PI)).unwrap();
        let (phi, _) = singular_eigenstate(1, 1.0, &xs).unwrap();
        let psi0 = singular_time_state(1, 1.0, &hcs, 0, &xs).unwrap();
        for (a, b) in psi0.iter().zip(&phi) {
            assert!((a - b).norm() < 1e-14);
        }
        for idx in [100, 2000, hcs.times.len() - 1] {
            let psi = singular_time_state(1, 1.0, &hcs, idx, &xs).unwrap();
            let nrm: f64 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
            assert_abs_diff_eq!(nrm, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn singular_recurrence_in_mathieu_zone() {
        let f = FourierSeries::mathieu(0.3, 0.5, 2.0);
        let tp = f.period();
        let m = crate::classical_dynamics::hill_monodromy(|t| f.value(t), tp, 1e-4).unwrap();
        let (alpha, _) = periodic_alpha(&m).unwrap();
        let hcs = hill_complex_solution(|t| f.value(t), alpha, tp, 1e-4, Some(tp)).unwrap();
        let (xs, dx) = half_grid(8000, 14.0);
        let a = singular_time_state(2, 1.0, &hcs, 0, &xs).unwrap();
        let b = singular_time_state(2, 1.0, &hcs, hcs.period_indices[0], &xs).unwrap();
        let ov: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * dx;
        assert_abs_diff_eq!(ov.norm(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn scan_harmonic_flags_full_periods() {
        let h = Model::Harmonic { omega: 1.0 };
        let times: Vec<f64> = (0..=400).map(|k| 4.0 * PI * k as f64 / 400.0).collect();
        let rep = revival_scan(&h, &PhasePoint::new1(1.0, 0.0), 0.01, &times, DEFAULT_REVIVAL_EPSILON, ScanOptions::default()).unwrap();
        assert_eq!(rep.revival_times.len(), 2, "{:?}", rep.revival_times);
        assert_abs_diff_eq!(rep.revival_times[0], 2.0 * PI, epsilon = 1e-6);
        assert_abs_diff_eq!(rep.revival_times[1], 4.0 * PI, epsilon = 1e-6);
        assert_eq!(rep.route[200], ReturnRoute::ExactQuadratic);
        assert!(rep.rotation_angle.iter().all(|a| a.is_some()));
        for r in rep.r.iter().flatten() {
            assert!(*r <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn scan_free_particle_has_no_revival() {
        let times: Vec<f64> = (0..=100).map(|k| 0.1 * k as f64).collect();
        let rep = revival_scan(&Model::Free, &PhasePoint::new1(0.0, 1.0), 0.05, &times, 0.01, ScanOptions::default()).unwrap();
        assert!(rep.revival_times.is_empty());
    }

    #[test]
    fn scan_dilation_revives_each_period() {
        // int g = 0.8 (1 - cos t) vanishes only at full periods
        let g = FourierSeries::new(0.0, vec![], vec![0.8], 1.0).unwrap();
        let tp = g.period();
        let h = Model::Dilation { g };
        let times: Vec<f64> = (0..=300).map(|k| 2.0 * tp * k as f64 / 300.0).collect();
        for alpha in [PhasePoint::new1(1.0, 0.5), PhasePoint::new1(-0.3, 2.0)] {
            let rep = revival_scan(&h, &alpha, 0.05, &times, 0.01, ScanOptions::default()).unwrap();
            assert_eq!(rep.revival_times.len(), 2);
            assert_abs_diff_eq!(rep.revival_times[0], tp, epsilon = 1e-6);
            assert_abs_diff_eq!(rep.r[150].unwrap(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn scan_marks_undefined_points() {
        // pendulum periodic orbit: F_T always has eigenvalue 1 along the flow
        let times = [0.0, 1.0];
        let rep = revival_scan(&Model::Pendulum, &PhasePoint::new1(1.0, 0.0), 0.1, &times, 0.01, ScanOptions::default()).unwrap();
        assert_eq!(rep.route[0], ReturnRoute::Undefined);
        assert_eq!(rep.r[0], None);
        let rep = revival_scan(&Model::Pendulum, &PhasePoint::new1(1.0, 0.0), 0.1, &times, 0.01, ScanOptions { continuous: true, ..ScanOptions::default() }).unwrap();
        assert_eq!(rep.r[0], Some(1.0));
    }

    proptest! {
        #[test]
        fn r_below_ct_below_one(seed in any::<u64>(), q in -2.0f64..2.0, p in -2.0f64..2.0, hbar in 0.01f64..2.0) {
            let f = random_symplectic(1, seed, 1.0).unwrap();
            let g = ThawedGaussian {
                center: f.apply(&PhasePoint::new1(q, p)).unwrap(),
                stability: f.clone(),
                action: 0.0,
                hbar,
                origin: PhasePoint::new1(q, p),
            };
            let (r, ct) = semiclassical_from(&g).unwrap();
            prop_assert!(r <= ct * (1.0 + 1e-12) && ct <= 1.0 + 1e-12);
            let ex = quadratic_return_exact(&f, &PhasePoint::new1(q, p), hbar).unwrap();
            prop_assert!(ex <= ct * (1.0 + 1e-12));
        }

        #[test]
        fn rotation_form_implies_unit_ct(theta in 0.0f64..(2.0 * PI)) {
            let f = SymplecticMatrix::rotation(1, theta);
            prop_assert!(rotation_form_angle(&f, 1e-10).is_some());
            let ct = mw_matrices(&f).unwrap().ct;
            prop_assert!((ct - 1.0).abs() < 1e-10);
            prop_assert!(is_unitary_symplectic(&f, 1e-10));
        }
    }
}

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phase_space::{PhasePoint, SymplecticMatrix};

/// `psi(x) = (Im W / pi hbar)^{1/4} e^{i phase} e^{ip(x - q/2)/hbar} e^{iW(x-q)^2/2hbar}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub center: PhasePoint,
    pub width: Complex64,
    pub phase: f64,
    pub hbar: f64,
}

impl GaussianParams {
    pub fn new(center: PhasePoint, width: Complex64, phase: f64, hbar: f64) -> Result<Self> {
        if center.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: center.len() });
        }
        if !(width.im > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Gaussian width {width} is not normalizable"
            )));
        }
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        Ok(GaussianParams { center, width, phase, hbar })
    }

    /// The coherent state `phi_alpha` (`W = i`).
    pub fn coherent(alpha: PhasePoint, hbar: f64) -> Result<Self> {
        Self::new(alpha, Complex64::new(0.0, 1.0), 0.0, hbar)
    }

    pub fn evaluate(&self, x: f64) -> Complex64 {
        let (q, p) = (self.center.as_slice()[0], self.center.as_slice()[1]);
        let norm = (self.width.im / (PI * self.hbar)).powf(0.25);
        let d = x - q;
        let expo = Complex64::new(0.0, self.phase + p * (x - 0.5 * q) / self.hbar)
            + Complex64::new(0.0, 0.5 / self.hbar) * self.width * d * d;
        norm * expo.exp()
    }
}

/// Overlap of two Gaussians in the [`GaussianParams`] form.
#[allow(clippy::too_many_arguments)]
pub(crate) fn overlap_raw(
    q1: f64,
    p1: f64,
    w1: Complex64,
    phi1: f64,
    q2: f64,
    p2: f64,
    w2: Complex64,
    phi2: f64,
    hbar: f64,
) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let w1c = w1.conj();
    // conj(psi1) psi2 = exp(-a x^2 + b x + c)
    let a = i * (w1c - w2) / (2.0 * hbar);
    let b = i / hbar * ((p2 - p1) + w1c * q1 - w2 * q2);
    let c = i / hbar * 0.5 * (p1 * q1 - p2 * q2) + i / (2.0 * hbar) * (w2 * q2 * q2 - w1c * q1 * q1);
    let norm = ((w1.im / (PI * hbar)) * (w2.im / (PI * hbar))).powf(0.25);
    norm * (PI / a).sqrt() * (b * b / (4.0 * a) + c + i * (phi2 - phi1)).exp()
}

/// Closed-form `<g1, g2>`.
pub fn gaussian_overlap(g1: &GaussianParams, g2: &GaussianParams) -> Result<Complex64> {
    if g1.hbar != g2.hbar {
        return Err(Error::InvalidArgument("Gaussians carry different hbar".into()));
    }
    let (c1, c2) = (g1.center.as_slice(), g2.center.as_slice());
    Ok(overlap_raw(
        c1[0], c1[1], g1.width, g1.phase, c2[0], c2[1], g2.width, g2.phase, g1.hbar,
    ))
}

fn blocks(f: &SymplecticMatrix) -> Result<(f64, f64, f64, f64)> {
    if f.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: f.dim() });
    }
    let m = f.matrix();
    Ok((m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]))
}

/// Exact metaplectic evolution of a Gaussian under a quadratic Hamiltonian
/// with stability matrix `F = [[a, b], [c, d]]`: `W -> (c + dW)/(a + bW)`,
/// phase advanced by `delta/hbar - arg(a + bW)/2` (principal branch),
/// center moved to `z_t`.
pub fn propagate_quadratic_exact(
    params: &GaussianParams,
    f: &SymplecticMatrix,
    z_t: &PhasePoint,
    delta_t: f64,
) -> Result<GaussianParams> {
    let (a, b, c, d) = blocks(f)?;
    let den = params.width * b + a;
    if den.norm() == 0.0 {
        return Err(Error::InternalInvariantViolated("a + bW vanished".into()));
    }
    let width = (params.width * d + c) / den;
    GaussianParams::new(
        z_t.clone(),
        width,
        params.phase + delta_t / params.hbar - 0.5 * den.arg(),
        params.hbar,
    )
}

/// Resolution of the phase-space trapezoid rule. `None` fields are chosen
/// automatically.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseSpaceQuadrature {
    /// Half-width of the integration box in units of `sqrt(hbar)`, measured in
    /// the variable `Y = (F - 1) z - X` on which the integrand modulus depends.
    pub half_width: Option<f64>,
    /// Points per axis.
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceResult {
    /// The integral up to the unspecified unimodular constant of `R(F)`.
    pub value: Complex64,
    pub modulus: f64,
    /// Boundary-tail estimate relative to the value.
    pub tail_ratio: f64,
    pub points: usize,
    pub half_width: f64,
}

/// `<phi_z, T(-X) R(F) phi_z>` in closed form, parametrised either by `z` or
/// by `Y = (F - 1) z - X`.
struct TraceKernel {
    f: [f64; 4],
    inv: [[f64; 2]; 2],
    zc: [f64; 2],
    x: [f64; 2],
    w_prime: Complex64,
    phase0: f64,
    jac: f64,
    hbar: f64,
}

impl TraceKernel {
    fn new(f: &SymplecticMatrix, x: &PhasePoint, hbar: f64) -> Result<Self> {
        let (a, b, c, d) = blocks(f)?;
        if x.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: x.len() });
        }
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        let det = (a - 1.0) * (d - 1.0) - b * c;
        if det.abs() < crate::metaplectic::DEFAULT_SINGULAR_TOL {
            return Err(Error::EigenvalueOne { det: det.abs() });
        }
        let inv = [[(d - 1.0) / det, -b / det], [-c / det, (a - 1.0) / det]];
        let (xq, xp) = (x.as_slice()[0], x.as_slice()[1]);
        let zc = [inv[0][0] * xq + inv[0][1] * xp, inv[1][0] * xq + inv[1][1] * xp];
        let den = Complex64::new(a, b);
        Ok(TraceKernel {
            f: [a, b, c, d],
            inv,
            zc,
            x: [xq, xp],
            w_prime: Complex64::new(c, d) / den,
            phase0: -0.5 * den.arg(),
            jac: 1.0 / det.abs(),
            hbar,
        })
    }

    fn at_z(&self, zq: f64, zp: f64) -> Complex64 {
        let [a, b, c, d] = self.f;
        let [xq, xp] = self.x;
        let fq = a * zq + b * zp;
        let fp = c * zq + d * zp;
        let sigma = xq * fp - xp * fq;
        let i = Complex64::new(0.0, 1.0);
        let ov = overlap_raw(zq, zp, i, 0.0, fq - xq, fp - xp, self.w_prime, self.phase0, self.hbar);
        ov * Complex64::from_polar(1.0, sigma / (2.0 * self.hbar))
    }

    fn at_y(&self, y0: f64, y1: f64) -> Complex64 {
        let zq = self.zc[0] + self.inv[0][0] * y0 + self.inv[0][1] * y1;
        let zp = self.zc[1] + self.inv[1][0] * y0 + self.inv[1][1] * y1;
        self.at_z(zq, zp)
    }
}

/// Shared engine: `(2 pi hbar)^{-1} int dz h(<phi_z, T(-X) R(F) phi_z>)`.
fn phase_space_integral<G>(
    f: &SymplecticMatrix,
    x: &PhasePoint,
    hbar: f64,
    quad: PhaseSpaceQuadrature,
    map: G,
) -> Result<TraceResult>
where
    G: Fn(Complex64) -> Complex64 + Sync,
{
    let kernel = TraceKernel::new(f, x, hbar)?;
    let jac = kernel.jac;
    let integrand = |y0: f64, y1: f64| map(kernel.at_y(y0, y1));

    let center = integrand(0.0, 0.0).norm();
    let sh = hbar.sqrt();
    let edge_max = |half: f64| -> f64 {
        let m = 64;
        let mut worst: f64 = 0.0;
        for k in 0..=m {
            let s = -half + 2.0 * half * k as f64 / m as f64;
            for (u, v) in [(s, -half), (s, half), (-half, s), (half, s)] {
                worst = worst.max(integrand(u, v).norm());
            }
        }
        worst
    };
    let half = match quad.half_width {
        Some(h) => h * sh,
        None => {
            let mut h = 4.0 * sh;
            while edge_max(h) > 1e-17 * center && h < 200.0 * sh {
                h *= 1.25;
            }
            h
        }
    };

    let evaluate = |n: usize| -> Complex64 {
        let step = 2.0 * half / n as f64;
        let rows: Vec<Complex64> = (0..=n)
            .into_par_iter()
            .map(|r| {
                let y1 = -half + r as f64 * step;
                let wr = if r == 0 || r == n { 0.5 } else { 1.0 };
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..=n {
                    let y0 = -half + k as f64 * step;
                    let wk = if k == 0 || k == n { 0.5 } else { 1.0 };
                    acc += integrand(y0, y1) * wk;
                }
                acc * wr
            })
            .collect();
        let total: Complex64 = rows.iter().sum();
        total * step * step * jac / (2.0 * PI * hbar)
    };

    let (value, points) = match quad.points {
        Some(n) => (evaluate(n), n),
        None => {
            let mut n = 64;
            let mut prev = evaluate(n);
            loop {
                let next = evaluate(2 * n);
                n *= 2;
                let done = (next - prev).norm() <= 1e-10 * next.norm().max(1e-300);
                prev = next;
                if done || n >= 2048 {
                    break;
                }
            }
            (prev, n)
        }
    };

    let area = 4.0 * half * half * jac / (2.0 * PI * hbar);
    let tail_ratio = edge_max(half) * area / value.norm().max(1e-300);
    if tail_ratio > 1e-4 {
        return Err(Error::TruncationTooTight { ratio: tail_ratio });
    }
    Ok(TraceResult {
        value,
        modulus: value.norm(),
        tail_ratio,
        points,
        half_width: half / sh,
    })
}

/// `Omega(X) = (2 pi hbar)^{-1} int dz <phi_z, T(-X) R(F) phi_z>`, with `R(F)`
/// applied exactly to Gaussians.
pub fn metaplectic_trace(
    f: &SymplecticMatrix,
    x: &PhasePoint,
    hbar: f64,
    quad: PhaseSpaceQuadrature,
) -> Result<TraceResult> {
    phase_space_integral(f, x, hbar, quad, |v| v)
}

/// `(2 pi hbar)^{-1} int dz |<phi_z, R(F) phi_z>|^2`.
pub fn overlap_sq_integral(
    f: &SymplecticMatrix,
    hbar: f64,
    quad: PhaseSpaceQuadrature,
) -> Result<TraceResult> {
    let origin = PhasePoint::new1(0.0, 0.0);
    phase_space_integral(f, &origin, hbar, quad, |v| Complex64::new(v.norm_sqr(), 0.0))
}

/// `<phi_z, T(-X) R(F) phi_z>` evaluated directly from [`GaussianParams`];
/// used to cross-check the closed-form integrand.
#[cfg(test)]
fn trace_integrand(
    f: &SymplecticMatrix,
    x: &PhasePoint,
    z: &PhasePoint,
    hbar: f64,
) -> Result<Complex64> {
    let fz = f.apply(z)?;
    let moved = &fz - x;
    let start = GaussianParams::coherent(PhasePoint::new1(0.0, 0.0), hbar)?;
    let evolved = propagate_quadratic_exact(&start, f, &moved, 0.0)?;
    let sigma = crate::phase_space::symplectic_form(x, &fz)?;
    let phi_z = GaussianParams::coherent(z.clone(), hbar)?;
    Ok(gaussian_overlap(&phi_z, &evolved)? * Complex64::from_polar(1.0, sigma / (2.0 * hbar)))
}

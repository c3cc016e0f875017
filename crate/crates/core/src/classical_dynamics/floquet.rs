use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{step_count, Rk4};
use crate::error::{Error, Result};
use crate::phase_space::SymplecticMatrix;

pub const DEFAULT_FOURIER_MODES: usize = 32;

/// Width of the band around `|tr M| = 2` reported as marginal.
const MARGINAL_BAND: f64 = 1e-10;

/// Real fundamental system of `x'' + f(t) x = 0`, state `(x1, x1', x2, x2')`
/// with `x1(0) = 1, x1'(0) = 0, x2(0) = 0, x2'(0) = 1`. Calls `visit` after
/// every step with the step index (starting at 1) and the state.
fn hill_fundamental<F, V>(f: &F, steps: usize, h: f64, mut visit: V) -> Result<[f64; 4]>
where
    F: Fn(f64) -> f64,
    V: FnMut(usize, f64, &[f64; 4]) -> Result<()>,
{
    let mut y = [1.0, 0.0, 0.0, 1.0];
    let mut rk = Rk4::new(4);
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let ft = f(t);
        dy[0] = y[1];
        dy[1] = -ft * y[0];
        dy[2] = y[3];
        dy[3] = -ft * y[2];
    };
    for k in 0..steps {
        let t = k as f64 * h;
        rk.step(&mut rhs, t, &mut y, h);
        let t_next = (k + 1) as f64 * h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t_next });
        }
        visit(k + 1, t_next, &y)?;
    }
    Ok(y)
}

fn monodromy_from_state(y: &[f64; 4], t: f64) -> Result<SymplecticMatrix> {
    let m = DMatrix::from_row_slice(2, 2, &[y[0], y[2], y[1], y[3]]);
    let det = y[0] * y[3] - y[2] * y[1];
    if (det - 1.0).abs() > 1e-9 {
        return Err(Error::InternalInvariantViolated(format!(
            "Wronskian drifted to {det} at t = {t} (reduce dt)"
        )));
    }
    Ok(SymplecticMatrix::from_trusted(m))
}

/// Monodromy `[[x1, x2], [x1', x2']](T)` of `x'' + f(t) x = 0`.
pub fn hill_monodromy<F: Fn(f64) -> f64>(f: F, period: f64, dt: f64) -> Result<SymplecticMatrix> {
    if !(period > 0.0) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    let steps = step_count(period, dt)?.max(1);
    let h = period / steps as f64;
    let y = hill_fundamental(&f, steps, h, |_, _, _| Ok(()))?;
    monodromy_from_state(&y, period)
}

/// Floquet data of a periodic Hill equation.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetData {
    pub monodromy: SymplecticMatrix,
    pub trace: f64,
    /// Characteristic exponent in `[0, 2)`. For unstable data this is the
    /// real part, 0 or 1.
    pub rho: f64,
    /// `c_n` for `n = -N..=N`, stored at index `n + N`. Empty when unstable.
    pub coefficients: Vec<Complex64>,
    pub n_modes: usize,
    pub c: Complex64,
    pub d: Complex64,
    pub stable: bool,
    pub marginal: bool,
    pub omega: f64,
    /// `log|lambda| / T`, zero in the stable case.
    pub growth_rate: f64,
    /// `x_+'(0)` for the Floquet solution normalised to `x_+(0) = 1`.
    pub xdot0: Complex64,
}

impl FloquetData {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn coefficient(&self, n: i64) -> Complex64 {
        let idx = n + self.n_modes as i64;
        if idx < 0 || idx as usize >= self.coefficients.len() {
            return Complex64::new(0.0, 0.0);
        }
        self.coefficients[idx as usize]
    }

    /// `sum_n c_n exp(i(2n + rho) omega t / 2)`.
    pub fn reconstruct(&self, t: f64) -> Complex64 {
        let nn = self.n_modes as i64;
        (-nn..=nn)
            .map(|n| {
                let k = (2 * n) as f64 + self.rho;
                self.coefficient(n) * Complex64::from_polar(1.0, k * self.omega * t / 2.0)
            })
            .sum()
    }

    pub fn reconstruct_derivative(&self, t: f64) -> Complex64 {
        let nn = self.n_modes as i64;
        (-nn..=nn)
            .map(|n| {
                let k = (2 * n) as f64 + self.rho;
                self.coefficient(n)
                    * Complex64::new(0.0, k * self.omega / 2.0)
                    * Complex64::from_polar(1.0, k * self.omega * t / 2.0)
            })
            .sum()
    }
}

/// Monodromy, stability, characteristic exponent and Fourier coefficients of
/// the Floquet solution of `x'' + f(t) x = 0` with `f` of period `2 pi / omega`.
///
/// The Floquet solution `x_+` is the eigensolution with positive Wronskian
/// `Im(conj(x) x')`, normalised to `x_+(0) = 1`; `rho = arg(lambda_+)/pi mod 2`.
pub fn floquet_analyze<F: Fn(f64) -> f64>(
    f: F,
    omega: f64,
    dt: f64,
    n_modes: usize,
) -> Result<FloquetData> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    let period = 2.0 * PI / omega;
    let samples = 2 * n_modes + 1;
    let per_sample = step_count(period / samples as f64, dt)?.max(1);
    let steps = per_sample * samples;
    let h = period / steps as f64;

    let mut fundamental = Vec::with_capacity(samples);
    fundamental.push([1.0, 0.0, 0.0, 1.0]);
    let y = hill_fundamental(&f, steps, h, |k, _, y| {
        if k % per_sample == 0 && k < steps {
            fundamental.push(*y);
        }
        Ok(())
    })?;
    let monodromy = monodromy_from_state(&y, period)?;
    let m = monodromy.matrix();
    let trace = m.trace();
    let half = 0.5 * trace;
    let marginal = (trace.abs() - 2.0).abs() <= MARGINAL_BAND;
    if marginal {
        log::warn!("monodromy trace {trace} is within {MARGINAL_BAND:e} of the zone boundary");
    }
    let stable = trace.abs() <= 2.0;

    if !stable {
        return Ok(FloquetData {
            monodromy,
            trace,
            rho: if trace > 0.0 { 0.0 } else { 1.0 },
            coefficients: Vec::new(),
            n_modes,
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(0.0, 0.0),
            stable,
            marginal,
            omega,
            growth_rate: (half.abs() + (half * half - 1.0).sqrt()).ln() / period,
            xdot0: Complex64::new(0.0, 0.0),
        });
    }

    let phi = half.clamp(-1.0, 1.0).acos();
    let (m11, m12, m21, m22) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let scale = m.amax();
    let (lambda, xdot0) = if m12.abs() > 1e-12 * scale {
        // eigenvector (1, (lambda - m11)/m12); Wronskian Im(lambda)/m12 > 0
        let lambda = Complex64::from_polar(1.0, phi * m12.signum());
        (lambda, (lambda - m11) / m12)
    } else if m21.abs() > 1e-12 * scale {
        // eigenvector (lambda - m22, m21) scaled to first entry 1
        let mut lambda = Complex64::from_polar(1.0, phi);
        let mut v1 = m21 / (lambda - m22);
        if v1.im < 0.0 {
            lambda = lambda.conj();
            v1 = m21 / (lambda - m22);
        }
        (lambda, v1)
    } else {
        // M = +-1: every vector is an eigenvector.
        (Complex64::from_polar(1.0, phi), Complex64::new(0.0, 1.0))
    };
    let rho = (lambda.arg() / PI).rem_euclid(2.0);
    let rho = if rho >= 2.0 { 0.0 } else { rho };

    let mut coefficients = vec![Complex64::new(0.0, 0.0); samples];
    let nn = n_modes as i64;
    for (mi, y) in fundamental.iter().enumerate() {
        let t = period * mi as f64 / samples as f64;
        let x = y[0] + xdot0 * y[2];
        let base = x * Complex64::from_polar(1.0, -rho * omega * t / 2.0);
        for n in -nn..=nn {
            let e = Complex64::from_polar(1.0, -(n as f64) * omega * t);
            coefficients[(n + nn) as usize] += base * e;
        }
    }
    for c in coefficients.iter_mut() {
        *c /= samples as f64;
    }
    let c: Complex64 = coefficients.iter().sum();
    let d: Complex64 = coefficients
        .iter()
        .enumerate()
        .map(|(i, cn)| cn * (2.0 * (i as i64 - nn) as f64 + rho))
        .sum();

    Ok(FloquetData {
        monodromy,
        trace,
        rho,
        coefficients,
        n_modes,
        c,
        d,
        stable,
        marginal,
        omega,
        growth_rate: 0.0,
        xdot0,
    })
}

/// Value of `mu` in `[mu_lo, mu_hi]` where `|tr M_T| = 2` for the Mathieu
/// function `lambda cos(omega t) + mu`, by bisection.
pub fn mathieu_zone_boundary(
    lambda: f64,
    omega: f64,
    mu_lo: f64,
    mu_hi: f64,
    dt: f64,
) -> Result<f64> {
    let period = 2.0 * PI / omega;
    let excess = |mu: f64| -> Result<f64> {
        let m = hill_monodromy(|t| lambda * (omega * t).cos() + mu, period, dt)?;
        Ok(m.matrix().trace().abs() - 2.0)
    };
    let (mut lo, mut hi) = (mu_lo, mu_hi);
    let (mut e_lo, e_hi) = (excess(lo)?, excess(hi)?);
    if e_lo.signum() == e_hi.signum() {
        return Err(Error::InvalidArgument(format!(
            "no zone boundary bracketed in [{mu_lo}, {mu_hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let e = excess(mid)?;
        if e.abs() <= 1e-10 || hi - lo < 1e-14 {
            return Ok(mid);
        }
        if e.signum() == e_lo.signum() {
            lo = mid;
            e_lo = e;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Real `alpha` for which `x(0) = alpha, x'(0) = i/alpha` starts a Floquet
/// solution: `alpha^4 = -M12/M21`. Exact when `M11 = M22` (e.g. `f` even in
/// `t`); the returned asymmetry `|M11 - M22|` measures the defect otherwise.
pub fn periodic_alpha(monodromy: &SymplecticMatrix) -> Result<(f64, f64)> {
    let m = monodromy.matrix();
    if m.nrows() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: m.nrows() });
    }
    let trace = m.trace();
    if trace.abs() > 2.0 + MARGINAL_BAND {
        return Err(Error::Unstable { trace_abs: trace.abs() });
    }
    // M = +-1: every start is periodic
    if m[(0, 1)].abs() < 1e-9 && m[(1, 0)].abs() < 1e-9 {
        return Ok((1.0, (m[(0, 0)] - m[(1, 1)]).abs()));
    }
    let ratio = -m[(0, 1)] / m[(1, 0)];
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "no real periodic modulus: -M12/M21 = {ratio}"
        )));
    }
    Ok((ratio.powf(0.25), (m[(0, 0)] - m[(1, 1)]).abs()))
}

/// The complex solution `x = exp(u + i theta)` of `x'' + f x = 0` with
/// `x(0) = alpha`, `x'(0) = i/alpha`.
#[derive(Debug, Clone)]
pub struct HillComplexSolution {
    pub times: Vec<f64>,
    pub alpha: f64,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub udot: Vec<f64>,
    pub thetadot: Vec<f64>,
    /// `u'' + u'^2 - exp(-4u) + f`, with `u''` from fourth-order differences
    /// of `u'`.
    pub eq_residual: Vec<f64>,
    /// `max |theta' - exp(-2u)|`.
    pub thetadot_residual: f64,
    /// `max |Im(conj(x) x') - 1|`.
    pub wronskian_residual: f64,
    /// `max_k |u(kT) - u(0)| + |u'(kT) - u'(0)|` over sampled periods, when a
    /// period was supplied.
    pub periodicity_defect: Option<f64>,
    /// Sample index of each full period `kT`, `k >= 1`.
    pub period_indices: Vec<usize>,
}

impl HillComplexSolution {
    pub fn max_eq_residual(&self) -> f64 {
        self.eq_residual.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    /// Index of the sample closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let h = if self.times.len() > 1 { self.times[1] - self.times[0] } else { 1.0 };
        ((t / h).round().max(0.0) as usize).min(self.times.len() - 1)
    }
}

fn derivative_4th(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    if n < 5 {
        for i in 0..n {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            d[i] = if b > a { (y[b] - y[a]) / ((b - a) as f64 * h) } else { 0.0 };
        }
        return d;
    }
    let c = 12.0 * h;
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / c;
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / c;
    for i in 2..n - 2 {
        d[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / c;
    }
    let m = n - 1;
    d[m - 1] = (3.0 * y[m] + 10.0 * y[m - 1] - 18.0 * y[m - 2] + 6.0 * y[m - 3] - y[m - 4]) / c;
    d[m] = (25.0 * y[m] - 48.0 * y[m - 1] + 36.0 * y[m - 2] - 16.0 * y[m - 3] + 3.0 * y[m - 4]) / c;
    d
}

/// Integrates the complex Hill solution and extracts `u`, `theta`, `u'`.
///
/// When `period` is given the step is chosen so that every multiple of the
/// period is a sample, and the grid runs to the first sample at or past
/// `t_end`.
pub fn hill_complex_solution<F: Fn(f64) -> f64>(
    f: F,
    alpha: f64,
    t_end: f64,
    dt: f64,
    period: Option<f64>,
) -> Result<HillComplexSolution> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be real and nonzero, got {alpha}")));
    }
    let (h, steps) = match period {
        Some(tp) => {
            if !(tp > 0.0) {
                return Err(Error::InvalidArgument(format!("period must be positive, got {tp}")));
            }
            let h = tp / step_count(tp, dt)?.max(1) as f64;
            (h, (t_end / h - 1e-9).ceil().max(0.0) as usize)
        }
        None => {
            let steps = step_count(t_end, dt)?;
            (if steps == 0 { dt } else { t_end / steps as f64 }, steps)
        }
    };
    if let Some(tp) = period {
        let m = hill_monodromy(&f, tp, dt)?;
        let tr = m.matrix().trace().abs();
        if tr > 2.0 {
            log::warn!("Hill equation is outside a stability zone (|tr M| = {tr})");
        }
    }

    let b = Complex64::new(0.0, 1.0 / alpha);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    xs.push(Complex64::new(alpha, 0.0));
    vs.push(b);
    hill_fundamental(&f, steps, h, |_, _, y| {
        xs.push(y[0] * alpha + b * y[2]);
        vs.push(y[1] * alpha + b * y[3]);
        Ok(())
    })?;

    let n = xs.len();
    let times: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
    let mut u = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    let mut udot = Vec::with_capacity(n);
    let mut thetadot = Vec::with_capacity(n);
    let mut wronskian_residual: f64 = 0.0;
    let mut thetadot_residual: f64 = 0.0;
    for k in 0..n {
        let (x, v) = (xs[k], vs[k]);
        let modulus = x.norm();
        if modulus < 1e-12 {
            return Err(Error::ZeroCrossing { t: times[k] });
        }
        let arg = x.arg();
        let th = if k == 0 {
            arg
        } else {
            let prev: f64 = theta[k - 1];
            let jump = (arg - prev).rem_euclid(2.0 * PI);
            let jump = if jump > PI { jump - 2.0 * PI } else { jump };
            if jump.abs() >= PI / 2.0 {
                return Err(Error::PhaseUnwrap { jump });
            }
            prev + jump
        };
        let ratio = v / x;
        let uk = modulus.ln();
        u.push(uk);
        theta.push(th);
        udot.push(ratio.re);
        thetadot.push(ratio.im);
        thetadot_residual = thetadot_residual.max((ratio.im - (-2.0 * uk).exp()).abs());
        wronskian_residual = wronskian_residual.max(((x.conj() * v).im - 1.0).abs());
    }
    let uddot = derivative_4th(&udot, h);
    let eq_residual: Vec<f64> = (0..n)
        .map(|k| uddot[k] + udot[k] * udot[k] - (-4.0 * u[k]).exp() + f(times[k]))
        .collect();

    let mut period_indices = Vec::new();
    let periodicity_defect = period.map(|tp| {
        let per = (tp / h).round() as usize;
        let mut worst: f64 = 0.0;
        let mut idx = per;
        while per > 0 && idx < n {
            period_indices.push(idx);
            worst = worst.max((u[idx] - u[0]).abs() + (udot[idx] - udot[0]).abs());
            idx += per;
        }
        worst
    });

    Ok(HillComplexSolution {
        times,
        alpha,
        u,
        theta,
        udot,
        thetadot,
        eq_residual,
        thetadot_residual,
        wronskian_residual,
        periodicity_defect,
        period_indices,
    })
}

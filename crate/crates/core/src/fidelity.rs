//! Fidelity under a weak perturbation `H = H0 + lambda V`: the quantum
//! linear-response fidelity in an eigenbasis, its classical limit through the
//! microcanonical autocorrelation of `V`, the Mandelstam-Tamm bound and the
//! Egorov and Schnirelman diagnostics.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classical_dynamics::{find_period_with_dt, flow_points, Hamiltonian};
use crate::error::{Error, Result};
use crate::phase_space::PhasePoint;
use crate::quantum_oracle::{
    coherent_state, eigensolve, overlap, EigenBasis, Grid1D, Potential, SplitStep, WavepacketGrid,
};

/// Allowed slack in the Mandelstam-Tamm inequality.
pub const MT_SLACK: f64 = 1e-8;
/// Largest completeness defect `1 - sum_k |V_jk|^2 / <V^2>_jj` accepted.
pub const COMPLETENESS_TOL: f64 = 1e-4;

/// A perturbation `V(q) = sum_k poly[k] q^k` and its coupling. The classical
/// symbol and the grid operator come from the same polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationModel {
    pub poly: Vec<f64>,
    pub lambda: f64,
}

impl PerturbationModel {
    pub fn new(poly: Vec<f64>, lambda: f64) -> Result<Self> {
        if poly.is_empty() || poly.iter().any(|c| !c.is_finite()) || !lambda.is_finite() {
            return Err(Error::InvalidArgument("perturbation needs finite coefficients".into()));
        }
        Ok(PerturbationModel { poly, lambda })
    }

    pub fn quantized(&self, x: f64) -> f64 {
        self.poly.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn symbol(&self, z: &PhasePoint) -> f64 {
        self.quantized(z.q()[0])
    }
}

/// `I(hbar) = [alpha, beta]` around `E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWindow {
    pub energy: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl EnergyWindow {
    /// Symmetric window of width `max(5 hbar omega_local, 2 spacing)`.
    pub fn new(energy: f64, hbar: f64, omega_local: f64, spacing: f64) -> Self {
        let w = (5.0 * hbar * omega_local).max(2.0 * spacing);
        EnergyWindow { energy, alpha: energy - 0.5 * w, beta: energy + 0.5 * w }
    }

    pub fn width(&self) -> f64 {
        self.beta - self.alpha
    }

    /// Indices `j` with `E_j` in the window, doubling the width (up to eight
    /// times) while the selection is empty.
    pub fn select(&mut self, energies: &[f64]) -> Result<Vec<usize>> {
        for _ in 0..8 {
            let picked: Vec<usize> = energies
                .iter()
                .enumerate()
                .filter(|(_, e)| **e >= self.alpha && **e <= self.beta)
                .map(|(j, _)| j)
                .collect();
            if !picked.is_empty() {
                return Ok(picked);
            }
            let w = self.width();
            log::info!("energy window around {} is empty; widening to {}", self.energy, 2.0 * w);
            self.alpha = self.energy - w;
            self.beta = self.energy + w;
        }
        Err(Error::EmptyWindow { alpha: self.alpha, beta: self.beta })
    }
}

/// Time evolution with access to the energy moments of a state.
pub trait Propagator {
    fn evolve(&mut self, psi: &WavepacketGrid, times: &[f64]) -> Result<Vec<WavepacketGrid>>;
    /// `(mean, spread)` of `H` in `psi`.
    fn energy_moments(&mut self, psi: &WavepacketGrid) -> Result<(f64, f64)>;
}

/// Exact evolution inside the span of an eigenbasis.
pub struct EigenPropagator<'a> {
    pub basis: &'a EigenBasis,
}

impl Propagator for EigenPropagator<'_> {
    fn evolve(&mut self, psi: &WavepacketGrid, times: &[f64]) -> Result<Vec<WavepacketGrid>> {
        let c = self.basis.expand(psi)?;
        Ok(times.iter().map(|&t| self.basis.synthesize(&self.basis.evolve(&c, t))).collect())
    }

    fn energy_moments(&mut self, psi: &WavepacketGrid) -> Result<(f64, f64)> {
        let c = self.basis.expand(psi)?;
        let w: f64 = c.iter().map(|a| a.norm_sqr()).sum();
        let mean = c.iter().zip(&self.basis.energies).map(|(a, e)| a.norm_sqr() * e).sum::<f64>() / w;
        let var = c
            .iter()
            .zip(&self.basis.energies)
            .map(|(a, e)| a.norm_sqr() * (e - mean) * (e - mean))
            .sum::<f64>()
            / w;
        Ok((mean, var.max(0.0).sqrt()))
    }
}

/// Split-step evolution under a static potential.
pub struct SplitStepPropagator<'a> {
    pub potential: &'a (dyn Fn(f64) -> f64 + Sync),
    pub dt: f64,
}

impl Propagator for SplitStepPropagator<'_> {
    fn evolve(&mut self, psi: &WavepacketGrid, times: &[f64]) -> Result<Vec<WavepacketGrid>> {
        crate::quantum_oracle::propagate_splitstep_sampled(psi, &Potential::Static(self.potential), times, self.dt)
    }

    fn energy_moments(&mut self, psi: &WavepacketGrid) -> Result<(f64, f64)> {
        let mut ss = SplitStep::new(&psi.grid, psi.hbar)?;
        let hpsi = ss.apply_hamiltonian(psi, self.potential)?;
        let dx = psi.grid.dx();
        let w = psi.norm_squared();
        let mean = (psi.values.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dx).re / w;
        let h2 = hpsi.iter().map(|b| b.norm_sqr()).sum::<f64>() * dx / w;
        Ok((mean, (h2 - mean * mean).max(0.0).sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtRow {
    pub t: f64,
    pub overlap_sq: f64,
    pub bound: f64,
    /// `t <= pi hbar / (2 Delta E)`.
    pub valid: bool,
}

/// `|<psi, U(t) psi>|^2` against `cos^2(t Delta E / hbar)`. Fails if a valid
/// row violates the bound by more than [`MT_SLACK`].
pub fn mandelstam_tamm(
    psi: &WavepacketGrid,
    prop: &mut dyn Propagator,
    times: &[f64],
) -> Result<Vec<MtRow>> {
    let hbar = psi.hbar;
    let (_, de) = prop.energy_moments(psi)?;
    let states = prop.evolve(psi, times)?;
    let norm2 = psi.norm_squared();
    let t_valid = if de > 0.0 { PI * hbar / (2.0 * de) } else { f64::INFINITY };
    let mut rows = Vec::with_capacity(times.len());
    for (&t, s) in times.iter().zip(&states) {
        let overlap_sq = overlap(psi, s)?.norm_sqr() / (norm2 * s.norm_squared());
        let bound = (t * de / hbar).cos().powi(2);
        let valid = t <= t_valid;
        if valid && overlap_sq < bound - MT_SLACK {
            return Err(Error::MandelstamTammViolated { t, overlap_sq, bound });
        }
        rows.push(MtRow { t, overlap_sq, bound, valid });
    }
    Ok(rows)
}

/// `2 Re int_0^t ds int_0^s e^{i omega s'} ds' = 4 sin^2(omega t/2)/omega^2`.
fn g_kernel(omega: f64, t: f64) -> f64 {
    if omega == 0.0 {
        t * t
    } else {
        let s = (0.5 * omega * t).sin();
        4.0 * s * s / (omega * omega)
    }
}

/// `F_j(t) = 1 - (lambda/hbar)^2 sum_{k != j} |V_jk|^2 g(omega_jk, t)`; the
/// diagonal term `|V_jj|^2 t^2` cancels against the squared mean exactly and
/// is left out.
pub fn quantum_lr_fidelity(basis: &EigenBasis, j: usize, lambda: f64, times: &[f64]) -> Result<Vec<f64>> {
    let v = basis.v_matrix.as_ref().ok_or(Error::MissingVMatrix)?;
    if j >= basis.len() {
        return Err(Error::InvalidArgument(format!("state {j} is outside the basis")));
    }
    basis.check_completeness(j, COMPLETENESS_TOL)?;
    let hbar = basis.hbar;
    let scale = (lambda / hbar).powi(2);
    Ok(times
        .iter()
        .map(|&t| {
            let term: f64 = (0..basis.len())
                .filter(|&k| k != j)
                .map(|k| {
                    let w = (basis.energies[j] - basis.energies[k]) / hbar;
                    v[(j, k)] * v[(j, k)] * g_kernel(w, t)
                })
                .sum();
            1.0 - scale * term
        })
        .collect())
}

fn shell_point(h: &dyn Hamiltonian, e: f64) -> Result<PhasePoint> {
    // along q = 0, increase p until H crosses E
    let dim = 2 * h.dof();
    let mut z = vec![0.0; dim];
    let n = h.dof();
    let at = |p: f64, z: &mut Vec<f64>| {
        z[n] = p;
        h.value(z, 0.0)
    };
    let base = at(0.0, &mut z);
    if base >= e {
        return Err(Error::InvalidArgument(format!("energy {e} lies below H(0) = {base}")));
    }
    let mut hi = 1.0;
    while at(hi, &mut z) < e {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::InvalidArgument(format!("no shell point at energy {e}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid, &mut z) < e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    z[n] = 0.5 * (lo + hi);
    PhasePoint::new(z)
}

fn grad_norm(h: &dyn Hamiltonian, z: &[f64]) -> f64 {
    let mut g = vec![0.0; z.len()];
    h.gradient(z, 0.0, &mut g);
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Newton projection onto `H = E` along the gradient.
fn project(h: &dyn Hamiltonian, z: &mut [f64], e: f64) -> Result<()> {
    let mut g = vec![0.0; z.len()];
    for _ in 0..50 {
        let r = h.value(z, 0.0) - e;
        if r.abs() <= 1e-13 * e.abs().max(1.0) {
            return Ok(());
        }
        h.gradient(z, 0.0, &mut g);
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2 < 1e-20 {
            return Err(Error::GradientVanishes(z.to_vec()));
        }
        for (zi, gi) in z.iter_mut().zip(&g) {
            *zi -= r * gi / g2;
        }
    }
    Ok(())
}

/// Points distributed by the normalised microcanonical measure on `H0 = E`.
///
/// One degree of freedom: the orbit through the shell point on `q = 0` is
/// sampled at stratified uniform times over its period. Two degrees of
/// freedom: a Metropolis walk on the surface with Gaussian proposals projected
/// back onto the shell and acceptance weight `1/|grad H0|`.
pub fn microcanonical_sample(
    h: &dyn Hamiltonian,
    e: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<PhasePoint>> {
    if !h.time_independent() {
        return Err(Error::InvalidArgument("microcanonical sampling needs a time-independent H".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z0 = shell_point(h, e)?;
    let scale = z0.norm_squared().sqrt();
    if grad_norm(h, z0.as_slice()) < 1e-10 * scale.max(1.0) {
        return Err(Error::GradientVanishes(z0.as_slice().to_vec()));
    }
    match h.dof() {
        1 => {
            let dt0 = 1e-3;
            let period = find_period_with_dt(h, &z0, 1e3, 1e-6 * scale.max(1.0), dt0)?
                .ok_or_else(|| Error::InvalidArgument(format!("orbit at energy {e} does not close")))?;
            let dt = dt0.min(period / 1e4);
            let times: Vec<f64> =
                (0..n).map(|i| period * (i as f64 + rng.random::<f64>()) / n as f64).collect();
            flow_points(h, &z0, &times, dt)
        }
        2 => {
            let burn = 2000;
            let thin = 20;
            let step = 0.3 * scale;
            let mut z = z0.as_slice().to_vec();
            let mut w = 1.0 / grad_norm(h, &z);
            let mut out = Vec::with_capacity(n);
            let mut k = 0usize;
            while out.len() < n {
                let mut cand: Vec<f64> = z
                    .iter()
                    .map(|v| {
                        // Box-Muller
                        let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
                        v + step * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
                    })
                    .collect();
                if project(h, &mut cand, e).is_ok() && (h.value(&cand, 0.0) - e).abs() < 1e-3 * e.abs().max(1e-12) {
                    let gn = grad_norm(h, &cand);
                    if gn < 1e-10 {
                        return Err(Error::GradientVanishes(cand));
                    }
                    let wc = 1.0 / gn;
                    if rng.random::<f64>() < wc / w {
                        z = cand;
                        w = wc;
                    }
                }
                k += 1;
                if k > burn && k % thin == 0 {
                    out.push(PhasePoint::new(z.clone())?);
                }
            }
            Ok(out)
        }
        d => Err(Error::InvalidArgument(format!("sampling implemented for 1 or 2 degrees of freedom, got {d}"))),
    }
}

/// Monte Carlo `C_{V,E}(t)` with its mean `Vbar_E` and standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub c: Vec<f64>,
    pub vbar: f64,
    pub n_samples: usize,
    pub stderr: Vec<f64>,
}

pub fn classical_autocorrelation(
    h: &dyn Hamiltonian,
    v: &PerturbationModel,
    e: f64,
    times: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<CorrelationSeries> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let samples = microcanonical_sample(h, e, n_samples, seed)?;
    let t_max = times.last().copied().unwrap_or(0.0);
    let dt = (t_max / 2e4).clamp(1e-5, 1e-3);
    let rows: Vec<Result<(f64, Vec<f64>)>> = samples
        .par_iter()
        .map(|z| {
            let v0 = v.symbol(z);
            let flowed = flow_points(h, z, times, dt)?;
            Ok((v0, flowed.iter().map(|w| v0 * v.symbol(w)).collect()))
        })
        .collect();
    let mut v0s = Vec::with_capacity(n_samples);
    let mut prods = Vec::with_capacity(n_samples);
    for r in rows {
        let (a, b) = r?;
        v0s.push(a);
        prods.push(b);
    }
    let nf = n_samples as f64;
    let vbar = v0s.iter().sum::<f64>() / nf;
    let mut c = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let mean = prods.iter().map(|p| p[k]).sum::<f64>() / nf;
        let var = prods.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        c.push(mean - vbar * vbar);
        stderr.push((var / nf).sqrt());
    }
    Ok(CorrelationSeries { times: times.to_vec(), c, vbar, n_samples, stderr })
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 || times[0] != 0.0 {
        return Err(Error::InvalidArgument("time grid must start at 0 with at least two points".into()));
    }
    let h = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::InvalidArgument("time grid must be uniform".into()));
    }
    Ok(h)
}

/// `int_0^{t_k} f` on the uniform grid: composite Simpson, with a 3/8 panel
/// at the end for odd interval counts.
fn simpson_prefix(f: &[f64], h: f64) -> f64 {
    let m = f.len() - 1;
    match m {
        0 => 0.0,
        1 => 0.5 * h * (f[0] + f[1]),
        _ => {
            let (even, tail) = if m % 2 == 0 { (m, 0.0) } else { (m - 3, 3.0 * h / 8.0 * (f[m - 3] + 3.0 * f[m - 2] + 3.0 * f[m - 1] + f[m])) };
            let mut s = 0.0;
            for i in (0..even).step_by(2) {
                s += f[i] + 4.0 * f[i + 1] + f[i + 2];
            }
            s * h / 3.0 + tail
        }
    }
}

/// `int_0^t ds int_0^s C(s') ds' = int_0^t (t - s) C(s) ds` on the series grid.
pub fn double_integral(c: &CorrelationSeries) -> Result<Vec<f64>> {
    let h = uniform_step(&c.times)?;
    Ok((0..c.times.len())
        .map(|k| {
            let t = c.times[k];
            let f: Vec<f64> = (0..=k).map(|i| (t - c.times[i]) * c.c[i]).collect();
            simpson_prefix(&f, h)
        })
        .collect())
}

/// `1 - 2 (lambda/hbar)^2 int_0^t ds int_0^s C(s') ds'`.
pub fn lr_fidelity_classical(c: &CorrelationSeries, lambda: f64, hbar: f64) -> Result<Vec<f64>> {
    let scale = 2.0 * (lambda / hbar).powi(2);
    Ok(double_integral(c)?.into_iter().map(|i| 1.0 - scale * i).collect())
}

/// Quantum side of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSetup {
    pub x_min: f64,
    pub x_max: f64,
    /// Grid spacing in units of `hbar`.
    pub dx_over_hbar: f64,
    /// Extra eigenstates beyond the top of the window.
    pub basis_margin: usize,
}

impl Default for QuantumSetup {
    fn default() -> Self {
        QuantumSetup { x_min: -4.0, x_max: 4.0, dx_over_hbar: 1.0 / 40.0, basis_margin: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrComparison {
    pub hbar: f64,
    pub lambda: f64,
    pub window: EnergyWindow,
    pub states: Vec<usize>,
    pub energies: Vec<f64>,
    pub f_quantum: Vec<f64>,
    pub f_classical: Vec<f64>,
    /// Heuristic `exp(-2 (lambda/hbar)^2 int int C)`.
    pub f_exponentiated: Vec<f64>,
    /// `max_t |F_q - F_c| / max_t (1 - F_c)`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrCompareConfig {
    pub energy: f64,
    pub hbars: Vec<f64>,
    pub times: Vec<f64>,
    /// Largest classical deficit `1 - F_c`; fixes `lambda/hbar` unless
    /// `lambda` is given.
    pub deficit: f64,
    pub lambda: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub quantum: QuantumSetup,
}

/// For each `hbar`: eigenbasis of `H0`, window selection, the window-averaged
/// `F^LR_j` and the classical prediction at `E`.
pub fn lr_fidelity_compare(
    h: &dyn Hamiltonian,
    v: &PerturbationModel,
    cfg: &LrCompareConfig,
) -> Result<(CorrelationSeries, Vec<LrComparison>)> {
    if h.dof() != 1 || !h.time_independent() || h.potential(0.0, 0.0).is_none() {
        return Err(Error::NotSeparable);
    }
    let corr = classical_autocorrelation(h, v, cfg.energy, &cfg.times, cfg.n_samples, cfg.seed)?;
    let dbl = double_integral(&corr)?;
    // size lambda against an upper confidence bound on C so sampling noise
    // cannot push the deficit past the target
    let upper = CorrelationSeries {
        c: corr.c.iter().zip(&corr.stderr).map(|(c, e)| c + 3.0 * e).collect(),
        ..corr.clone()
    };
    let max_dbl = double_integral(&upper)?.iter().fold(0.0f64, |m, x| m.max(*x));
    let z0 = shell_point(h, cfg.energy)?;
    let period = find_period_with_dt(h, &z0, 1e3, 1e-6, 1e-3)?
        .ok_or_else(|| Error::InvalidArgument("energy shell is not a closed orbit".into()))?;
    let omega_local = 2.0 * PI / period;

    let mut out = Vec::with_capacity(cfg.hbars.len());
    for &hbar in &cfg.hbars {
        let lambda = match cfg.lambda {
            Some(l) => l,
            None if max_dbl > 0.0 => hbar * (cfg.deficit / (2.0 * max_dbl)).sqrt(),
            None => 0.0,
        };
        let dx = cfg.quantum.dx_over_hbar * hbar;
        let n = ((cfg.quantum.x_max - cfg.quantum.x_min) / dx).ceil() as usize;
        let grid = Grid1D::new(cfg.quantum.x_min, cfg.quantum.x_max, n)?;
        let pot = |x: f64| h.potential(x, 0.0).expect("checked above");
        let spacing = hbar * omega_local;
        let mut window = EnergyWindow::new(cfg.energy, hbar, omega_local, spacing);
        // phase-space area below beta is at most 2 beta T(beta) for V growing at least like q^2
        let want = (2.0 * window.beta / spacing).ceil() as usize + cfg.quantum.basis_margin;
        let mut basis = eigensolve(pot, &grid, want.min(n / 5), hbar)?;
        basis.attach_perturbation(|x| v.quantized(x));
        let states = window.select(&basis.energies)?;
        let top = *states.last().expect("non-empty");
        if top + cfg.quantum.basis_margin / 2 >= basis.len() {
            return Err(Error::BasisTooSmall { index: top, defect: 1.0 });
        }
        let per_state: Vec<Vec<f64>> = states
            .par_iter()
            .map(|&j| quantum_lr_fidelity(&basis, j, lambda, &cfg.times))
            .collect::<Result<_>>()?;
        let m = states.len() as f64;
        let f_quantum: Vec<f64> =
            (0..cfg.times.len()).map(|k| per_state.iter().map(|f| f[k]).sum::<f64>() / m).collect();
        let scale = 2.0 * (lambda / hbar).powi(2);
        let f_classical: Vec<f64> = dbl.iter().map(|i| 1.0 - scale * i).collect();
        let f_exponentiated: Vec<f64> = dbl.iter().map(|i| (-scale * i).exp()).collect();
        let max_deficit = f_classical.iter().fold(0.0f64, |mm, f| mm.max(1.0 - f));
        let max_diff = f_quantum
            .iter()
            .zip(&f_classical)
            .fold(0.0f64, |mm, (a, b)| mm.max((a - b).abs()));
        let deviation = if max_deficit > 0.0 { max_diff / max_deficit } else { max_diff };
        out.push(LrComparison {
            hbar,
            lambda,
            window,
            energies: states.iter().map(|&j| basis.energies[j]).collect(),
            states,
            f_quantum,
            f_classical,
            f_exponentiated,
            deviation,
        });
    }
    Ok((corr, out))
}

/// `|<phi_z(s), V phi_z(s)> - V(Phi^s z)|`, the quantum state propagated by
/// split-step on `grid`.
pub fn egorov_check(
    h: &dyn Hamiltonian,
    v: &PerturbationModel,
    z: &PhasePoint,
    s: f64,
    hbar: f64,
    grid: &Grid1D,
    dt: f64,
) -> Result<f64> {
    if h.dof() != 1 || h.potential(0.0, 0.0).is_none() {
        return Err(Error::NotSeparable);
    }
    let psi = coherent_state(z, hbar, grid)?;
    let pot = |x: f64, t: f64| h.potential(x, t).expect("checked above");
    let out = crate::quantum_oracle::propagate_splitstep(&psi, &Potential::TimeDependent(&pot), s, dt)?;
    let quantum = out.expectation(|x| v.quantized(x));
    let flowed = flow_points(h, z, &[s], dt.min(1e-3))?;
    Ok((quantum - v.symbol(&flowed[0])).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchnirelmanRow {
    pub j: usize,
    pub energy: f64,
    pub quantum: f64,
    pub classical: f64,
    pub deviation: f64,
}

/// `<psi_j, A psi_j>` against the microcanonical average of `A` at `E_j` for
/// each `j` in the window (all window states are used).
pub fn schnirelman_diagnostic(
    basis: &EigenBasis,
    window: &mut EnergyWindow,
    a: &PerturbationModel,
    h: &dyn Hamiltonian,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<SchnirelmanRow>> {
    let states = window.select(&basis.energies)?;
    states
        .iter()
        .map(|&j| {
            let e = basis.energies[j];
            let quantum = basis.state(j).expectation(|x| a.quantized(x));
            let samples = microcanonical_sample(h, e, n_samples, seed)?;
            let classical = samples.iter().map(|z| a.symbol(z)).sum::<f64>() / n_samples as f64;
            Ok(SchnirelmanRow { j, energy: e, quantum, classical, deviation: (quantum - classical).abs() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical_dynamics::Model;
    use crate::quantum_oracle::Grid1D;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn harmonic_basis(hbar: f64, k: usize) -> EigenBasis {
        let grid = Grid1D::new(-12.0, 12.0, 6000).unwrap();
        eigensolve(|x| 0.5 * x * x, &grid, k, hbar).unwrap()
    }

    fn times(n: usize, t_max: f64) -> Vec<f64> {
        (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
    }

    #[test]
    fn perturbation_polynomial() {
        let v = PerturbationModel::new(vec![1.0, -2.0, 0.5], 0.1).unwrap();
        assert_abs_diff_eq!(v.quantized(2.0), 1.0 - 4.0 + 2.0, epsilon = 1e-15);
        assert_eq!(v.symbol(&PhasePoint::new1(2.0, 9.0)), v.quantized(2.0));
    }

    #[test]
    fn mt_eigenstate_and_two_level() {
        let basis = harmonic_basis(1.0, 6);
        let mut prop = EigenPropagator { basis: &basis };
        let ts = times(50, 5.0);
        let rows = mandelstam_tamm(&basis.state(2), &mut prop, &ts).unwrap();
        for r in &rows {
            assert_abs_diff_eq!(r.overlap_sq, 1.0, epsilon = 1e-12);
            assert_eq!(r.bound, 1.0);
        }
        let mut sup = basis.state(0);
        for (a, b) in sup.values.iter_mut().zip(&basis.state(3).values) {
            *a = (*a + b) / 2f64.sqrt();
        }
        let rows = mandelstam_tamm(&sup, &mut prop, &ts).unwrap();
        for r in rows.iter().filter(|r| r.valid) {
            assert_abs_diff_eq!(r.overlap_sq, r.bound, epsilon = 1e-10);
        }
        assert!(rows.iter().any(|r| !r.valid));
    }

    #[test]
    fn mt_coherent_strict_with_split_step() {
        let grid = Grid1D::new(-10.0, 10.0, 1024).unwrap();
        let psi = coherent_state(&PhasePoint::new1(1.0, 0.5), 0.5, &grid).unwrap();
        let v = |x: f64| 0.5 * x * x;
        let mut prop = SplitStepPropagator { potential: &v, dt: 1e-3 };
        let (mean, de) = prop.energy_moments(&psi).unwrap();
        // <H> = |alpha|^2/2 + hbar/2, Delta E = |alpha| sqrt(hbar/2)
        assert_abs_diff_eq!(mean, 0.5 * 1.25 + 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(de, 1.25f64.sqrt() * 0.5, epsilon = 1e-10);
        let ts = times(20, PI * 0.5 / (2.0 * de));
        let rows = mandelstam_tamm(&psi, &mut prop, &ts).unwrap();
        for r in rows.iter().skip(1) {
            assert!(r.valid && r.overlap_sq > r.bound);
        }
    }

    #[test]
    fn lr_trivial_cases() {
        let mut basis = harmonic_basis(1.0, 20);
        basis.attach_perturbation(|x| x);
        let ts = times(30, 6.0);
        for f in quantum_lr_fidelity(&basis, 3, 0.0, &ts).unwrap() {
            assert_eq!(f, 1.0);
        }
        // V = H0 is diagonal
        basis.attach_perturbation(|x| 0.5 * x * x);
        let mut diag = basis.clone();
        let vm = diag.v_matrix.as_mut().unwrap();
        for r in 0..vm.nrows() {
            for c in 0..vm.ncols() {
                if r != c {
                    vm[(r, c)] = 0.0;
                }
            }
        }
        diag.v2_diag = Some((0..vm.nrows()).map(|r| vm[(r, r)] * vm[(r, r)]).collect());
        for f in quantum_lr_fidelity(&diag, 2, 0.3, &ts).unwrap() {
            assert_eq!(f, 1.0);
        }
    }

    #[test]
    fn two_level_closed_form() {
        let grid = Grid1D::new(-1.0, 1.0, 256).unwrap();
        let (omega, v, lambda, hbar) = (1.7, 0.4, 0.05, 0.3);
        let basis = EigenBasis {
            energies: vec![0.0, hbar * omega],
            states: vec![vec![0.0; 256], vec![0.0; 256]],
            grid,
            hbar,
            v_matrix: Some(DMatrix::from_row_slice(2, 2, &[0.0, v, v, 0.0])),
            v2_diag: Some(vec![v * v, v * v]),
        };
        let ts = times(40, 10.0);
        let f = quantum_lr_fidelity(&basis, 0, lambda, &ts).unwrap();
        for (t, fv) in ts.iter().zip(f) {
            let expect = 1.0 - (lambda / hbar).powi(2) * 2.0 * v * v * (1.0 - (omega * t).cos()) / (omega * omega);
            assert_abs_diff_eq!(fv, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn harmonic_lr_matches_closed_form() {
        let hbar = 0.1;
        let grid = Grid1D::new(-8.0, 8.0, 6000).unwrap();
        let mut basis = eigensolve(|x| 0.5 * x * x, &grid, 40, hbar).unwrap();
        basis.attach_perturbation(|x| x);
        let ts = times(40, 2.0 * PI);
        let lambda = 0.01;
        let j = 5;
        let f = quantum_lr_fidelity(&basis, j, lambda, &ts).unwrap();
        let e = basis.energies[j];
        for (t, fv) in ts.iter().zip(f) {
            let expect = 1.0 - 2.0 * (lambda / hbar).powi(2) * e * (1.0 - t.cos());
            assert_abs_diff_eq!(fv, expect, epsilon = 1e-5);
        }
        basis.v_matrix = None;
        assert!(matches!(quantum_lr_fidelity(&basis, j, lambda, &ts), Err(Error::MissingVMatrix)));
    }

    #[test]
    fn incomplete_basis_detected() {
        let mut basis = harmonic_basis(1.0, 6);
        basis.attach_perturbation(|x| x);
        assert!(matches!(
            quantum_lr_fidelity(&basis, 5, 0.1, &[0.0, 1.0]),
            Err(Error::BasisTooSmall { .. })
        ));
    }

    #[test]
    fn harmonic_microcanonical_moments() {
        let e = 0.5;
        let s = microcanonical_sample(&Model::Harmonic { omega: 1.0 }, e, 4000, 7).unwrap();
        let n = s.len() as f64;
        let mq = s.iter().map(|z| z.q()[0]).sum::<f64>() / n;
        let mp = s.iter().map(|z| z.p()[0]).sum::<f64>() / n;
        let mq2 = s.iter().map(|z| z.q()[0].powi(2)).sum::<f64>() / n;
        // sigma(q) = sqrt(E), sigma(q^2) = E / sqrt(2)
        let tol = 3.0 / n.sqrt();
        assert!(mq.abs() < tol && mp.abs() < tol);
        assert!((mq2 - e).abs() < tol * e);
        let h = Model::Harmonic { omega: 1.0 };
        for z in &s {
            assert!((h.value(z.as_slice(), 0.0) - e).abs() <= 1e-9);
        }
        assert_eq!(s, microcanonical_sample(&h, e, 4000, 7).unwrap());
    }

    #[test]
    fn two_dof_shell_sampling() {
        let h = Model::quadratic(DMatrix::identity(4, 4)).unwrap();
        let e = 1.0;
        let s = microcanonical_sample(&h, e, 3000, 11).unwrap();
        let n = s.len() as f64;
        for z in &s {
            assert!((h.value(z.as_slice(), 0.0) - e).abs() < 1e-3);
        }
        // uniform on the 3-sphere |z|^2 = 2E: <z_i^2> = E/2
        for i in 0..4 {
            let m = s.iter().map(|z| z.as_slice()[i].powi(2)).sum::<f64>() / n;
            assert!((m - 0.5).abs() < 0.08, "component {i}: {m}");
        }
    }

    #[test]
    fn autocorrelation_harmonic() {
        let h = Model::Harmonic { omega: 1.0 };
        let e = 0.8;
        let ts = times(64, 2.0 * PI);
        let v = PerturbationModel::new(vec![0.0, 1.0], 1.0).unwrap();
        let c = classical_autocorrelation(&h, &v, e, &ts, 2000, 3).unwrap();
        for (k, t) in ts.iter().enumerate() {
            assert!((c.c[k] - e * t.cos()).abs() < 3.0 * c.stderr[k] + 1e-9, "t = {t}");
        }
        assert!(c.c[0] >= -c.stderr[0]);
        let flat = PerturbationModel::new(vec![2.5], 1.0).unwrap();
        let c0 = classical_autocorrelation(&h, &flat, e, &ts, 100, 3).unwrap();
        assert!(c0.c.iter().all(|x| x.abs() < 1e-12));
        assert_eq!(c, classical_autocorrelation(&h, &v, e, &ts, 2000, 3).unwrap());
    }

    #[test]
    fn classical_fidelity_closed_form() {
        let e = 0.7;
        let ts = times(200, 2.0 * PI);
        let series = CorrelationSeries {
            c: ts.iter().map(|t| e * t.cos()).collect(),
            stderr: vec![0.0; ts.len()],
            times: ts.clone(),
            vbar: 0.0,
            n_samples: 1,
        };
        let (lambda, hbar) = (0.02, 0.1);
        let f = lr_fidelity_classical(&series, lambda, hbar).unwrap();
        assert_eq!(f[0], 1.0);
        for (t, fv) in ts.iter().zip(&f) {
            let expect = 1.0 - 2.0 * (lambda / hbar).powi(2) * e * (1.0 - t.cos());
            assert_abs_diff_eq!(*fv, expect, epsilon = 1e-7);
            assert!(*fv <= 1.0 + 1e-15);
        }
        let zero = CorrelationSeries { c: vec![0.0; ts.len()], ..series };
        assert!(lr_fidelity_classical(&zero, lambda, hbar).unwrap().iter().all(|f| *f == 1.0));
    }

    #[test]
    fn egorov_examples() {
        let grid = Grid1D::new(-10.0, 10.0, 1024).unwrap();
        let z = PhasePoint::new1(1.0, 0.3);
        let h = Model::Harmonic { omega: 1.0 };
        let flat = PerturbationModel::new(vec![3.0], 1.0).unwrap();
        assert!(egorov_check(&h, &flat, &z, 1.0, 0.05, &grid, 1e-3).unwrap() < 1e-12);
        let lin = PerturbationModel::new(vec![0.5, 2.0], 1.0).unwrap();
        assert!(egorov_check(&h, &lin, &z, 1.3, 0.05, &grid, 1e-3).unwrap() < 1e-6);
        let q = PerturbationModel::new(vec![0.0, 1.0], 1.0).unwrap();
        let grid = Grid1D::new(-6.0, 6.0, 2048).unwrap();
        let d1 = egorov_check(&Model::Quartic, &q, &z, 2.0, 0.02, &grid, 5e-4).unwrap();
        let d2 = egorov_check(&Model::Quartic, &q, &z, 2.0, 0.01, &grid, 5e-4).unwrap();
        assert!((d1 / d2 - 2.0).abs() < 0.5, "{d1} {d2}");
    }

    #[test]
    fn schnirelman_harmonic() {
        let hbar = 0.05;
        let grid = Grid1D::new(-6.0, 6.0, 6000).unwrap();
        let basis = eigensolve(|x| 0.5 * x * x, &grid, 40, hbar).unwrap();
        let mut w = EnergyWindow::new(1.0, hbar, 1.0, hbar);
        let a = PerturbationModel::new(vec![0.0, 0.0, 1.0], 1.0).unwrap();
        let rows = schnirelman_diagnostic(&basis, &mut w, &a, &Model::Harmonic { omega: 1.0 }, 512, 1).unwrap();
        assert!(!rows.is_empty());
        for r in rows {
            assert!(r.deviation < 5e-3, "{r:?}");
        }
        let one = PerturbationModel::new(vec![1.0], 1.0).unwrap();
        let mut w = EnergyWindow::new(1.0, hbar, 1.0, hbar);
        for r in schnirelman_diagnostic(&basis, &mut w, &one, &Model::Harmonic { omega: 1.0 }, 16, 1).unwrap() {
            assert_abs_diff_eq!(r.quantum, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(r.classical, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_window_widens_or_fails() {
        let mut w = EnergyWindow { energy: 1.0, alpha: 0.99, beta: 1.01 };
        assert_eq!(w.select(&[0.5, 1.2]).unwrap(), vec![1]);
        let mut w = EnergyWindow { energy: 100.0, alpha: 99.9, beta: 100.1 };
        assert!(matches!(w.select(&[0.5]), Err(Error::EmptyWindow { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn lr_second_order_term_non_negative(seed in any::<u64>(), j in 0usize..4, t in 0.0f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 6;
            let mut v = DMatrix::zeros(k, k);
            for r in 0..k {
                for c in r..k {
                    let x: f64 = rng.random::<f64>() - 0.5;
                    v[(r, c)] = x;
                    v[(c, r)] = x;
                }
            }
            let v2: Vec<f64> = (0..k).map(|r| v.row(r).iter().map(|a| a * a).sum()).collect();
            let basis = EigenBasis {
                energies: (0..k).map(|i| i as f64 * 0.7 + rng.random::<f64>() * 0.1).collect(),
                states: vec![vec![0.0; 256]; k],
                grid: Grid1D::new(-1.0, 1.0, 256).unwrap(),
                hbar: 0.5,
                v_matrix: Some(v),
                v2_diag: Some(v2),
            };
            let f = quantum_lr_fidelity(&basis, j, 0.1, &[t]).unwrap();
            prop_assert!(f[0] <= 1.0 + 1e-10);
        }
    }
}

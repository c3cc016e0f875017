use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Grid1D, WavepacketGrid};
use crate::classical_dynamics::step_count;
use crate::error::{Error, Result};

/// Norm drift that aborts a propagation.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Potential passed to the split-step propagator.
pub enum Potential<'a> {
    Static(&'a (dyn Fn(f64) -> f64 + Sync)),
    TimeDependent(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

/// Strang splitting `exp(-iVh/2hbar) exp(-iTh/hbar) exp(-iVh/2hbar)` with the
/// potential sampled at the step midpoint. The kinetic step is a periodic FFT
/// on the full line and a sine transform (odd extension) on the half line.
pub struct SplitStep {
    grid: Grid1D,
    hbar: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `hbar k^2 / 2` per transform bin.
    kinetic: Vec<f64>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
    xs: Vec<f64>,
    phase_cache: Option<(f64, Vec<Complex64>)>,
    kinetic_cache: Option<(f64, Vec<Complex64>)>,
}

impl SplitStep {
    pub fn new(grid: &Grid1D, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        let n = grid.len();
        let len = if grid.is_half_line() { 2 * (n + 1) } else { n };
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let kinetic = if grid.is_half_line() {
            let l = (n + 1) as f64 * grid.dx();
            (0..len)
                .map(|m| {
                    let mm = if m <= n + 1 { m } else { len - m };
                    let k = std::f64::consts::PI * mm as f64 / l;
                    0.5 * hbar * k * k
                })
                .collect()
        } else {
            let dk = 2.0 * std::f64::consts::PI / (n as f64 * grid.dx());
            (0..n)
                .map(|j| {
                    let m = if j < n.div_ceil(2) { j as f64 } else { j as f64 - n as f64 };
                    let k = m * dk;
                    0.5 * hbar * k * k
                })
                .collect()
        };
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Ok(SplitStep {
            grid: grid.clone(),
            hbar,
            forward,
            inverse,
            kinetic,
            buffer: vec![Complex64::new(0.0, 0.0); len],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            xs: grid.points(),
            phase_cache: None,
            kinetic_cache: None,
        })
    }

    fn kinetic_step(&mut self, psi: &mut [Complex64], h: f64) {
        let recompute = !matches!(&self.kinetic_cache, Some((hh, _)) if *hh == h);
        if recompute {
            let phases = self
                .kinetic
                .iter()
                .map(|k| Complex64::from_polar(1.0, -k * h))
                .collect();
            self.kinetic_cache = Some((h, phases));
        }
        let phases = &self.kinetic_cache.as_ref().expect("filled above").1;
        let len = self.buffer.len();
        let n = psi.len();
        if self.grid.is_half_line() {
            self.buffer[0] = Complex64::new(0.0, 0.0);
            self.buffer[n + 1] = Complex64::new(0.0, 0.0);
            for j in 0..n {
                self.buffer[j + 1] = psi[j];
                self.buffer[len - 1 - j] = -psi[j];
            }
        } else {
            self.buffer.copy_from_slice(psi);
        }
        self.forward.process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (b, ph) in self.buffer.iter_mut().zip(phases) {
            *b *= ph;
        }
        self.inverse.process_with_scratch(&mut self.buffer, &mut self.scratch);
        let scale = 1.0 / len as f64;
        if self.grid.is_half_line() {
            for j in 0..n {
                psi[j] = self.buffer[j + 1] * scale;
            }
        } else {
            for (p, b) in psi.iter_mut().zip(&self.buffer) {
                *p = b * scale;
            }
        }
    }

    /// `H psi` with the spectral kinetic term and a static potential.
    pub fn apply_hamiltonian(&mut self, psi: &WavepacketGrid, v: &dyn Fn(f64) -> f64) -> Result<Vec<Complex64>> {
        if psi.grid != self.grid || psi.hbar != self.hbar {
            return Err(Error::GridMismatch);
        }
        let n = psi.values.len();
        let len = self.buffer.len();
        if self.grid.is_half_line() {
            self.buffer[0] = Complex64::new(0.0, 0.0);
            self.buffer[n + 1] = Complex64::new(0.0, 0.0);
            for j in 0..n {
                self.buffer[j + 1] = psi.values[j];
                self.buffer[len - 1 - j] = -psi.values[j];
            }
        } else {
            self.buffer.copy_from_slice(&psi.values);
        }
        self.forward.process_with_scratch(&mut self.buffer, &mut self.scratch);
        // kinetic holds hbar k^2/2; the operator is hbar^2 k^2/2
        for (b, k) in self.buffer.iter_mut().zip(&self.kinetic) {
            *b *= k * self.hbar;
        }
        self.inverse.process_with_scratch(&mut self.buffer, &mut self.scratch);
        let scale = 1.0 / len as f64;
        let offset = usize::from(self.grid.is_half_line());
        Ok((0..n)
            .map(|j| self.buffer[j + offset] * scale + psi.values[j] * v(self.xs[j]))
            .collect())
    }

    fn half_potential(&mut self, v: &Potential, t_mid: f64, h: f64) -> Vec<Complex64> {
        let factor = -0.5 * h / self.hbar;
        match v {
            Potential::Static(f) => {
                if let Some((hh, ph)) = &self.phase_cache {
                    if *hh == h {
                        return ph.clone();
                    }
                }
                let ph: Vec<Complex64> = self
                    .xs
                    .iter()
                    .map(|&x| Complex64::from_polar(1.0, factor * f(x)))
                    .collect();
                self.phase_cache = Some((h, ph.clone()));
                ph
            }
            Potential::TimeDependent(f) => self
                .xs
                .iter()
                .map(|&x| Complex64::from_polar(1.0, factor * f(x, t_mid)))
                .collect(),
        }
    }

    /// Advances `psi` from `t0` to `t1` in uniform steps of at most `dt`.
    pub fn advance(
        &mut self,
        psi: &mut WavepacketGrid,
        v: &Potential,
        t0: f64,
        t1: f64,
        dt: f64,
    ) -> Result<()> {
        if psi.grid != self.grid || psi.hbar != self.hbar {
            return Err(Error::GridMismatch);
        }
        let steps = step_count(t1 - t0, dt)?;
        if steps == 0 {
            return Ok(());
        }
        let h = (t1 - t0) / steps as f64;
        let static_phase = matches!(v, Potential::Static(_));
        let mut ph = self.half_potential(v, t0 + 0.5 * h, h);
        for k in 0..steps {
            if !static_phase && k > 0 {
                ph = self.half_potential(v, t0 + (k as f64 + 0.5) * h, h);
            }
            for (p, f) in psi.values.iter_mut().zip(&ph) {
                *p *= f;
            }
            self.kinetic_step(&mut psi.values, h);
            for (p, f) in psi.values.iter_mut().zip(&ph) {
                *p *= f;
            }
        }
        Ok(())
    }
}

fn check_norm(before: f64, psi: &WavepacketGrid) -> Result<()> {
    let drift = (psi.norm() - before).abs();
    if !(drift <= NORM_DRIFT_LIMIT) {
        return Err(Error::NormLost { drift });
    }
    Ok(())
}

/// `U(t_end, 0) psi` for `H = P^2/2 + V(Q, t)`.
pub fn propagate_splitstep(
    psi: &WavepacketGrid,
    v: &Potential,
    t_end: f64,
    dt: f64,
) -> Result<WavepacketGrid> {
    let mut prop = SplitStep::new(&psi.grid, psi.hbar)?;
    let mut out = psi.clone();
    let before = psi.norm();
    prop.advance(&mut out, v, 0.0, t_end, dt)?;
    check_norm(before, &out)?;
    Ok(out)
}

/// States at each of the non-decreasing `times`.
pub fn propagate_splitstep_sampled(
    psi: &WavepacketGrid,
    v: &Potential,
    times: &[f64],
    dt: f64,
) -> Result<Vec<WavepacketGrid>> {
    let mut prop = SplitStep::new(&psi.grid, psi.hbar)?;
    let mut cur = psi.clone();
    let before = psi.norm();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(Error::InvalidArgument("times must be non-decreasing from 0".into()));
        }
        prop.advance(&mut cur, v, t, target, dt)?;
        t = target;
        check_norm(before, &cur)?;
        out.push(cur.clone());
    }
    Ok(out)
}

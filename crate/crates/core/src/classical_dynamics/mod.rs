//! Classical trajectories with their stability matrices and action phases,
//! periodic-orbit detection, and Floquet analysis of Hill equations.

mod floquet;
mod hamiltonian;

pub use floquet::{
    floquet_analyze, hill_complex_solution, hill_monodromy, mathieu_zone_boundary,
    periodic_alpha, FloquetData, HillComplexSolution, DEFAULT_FOURIER_MODES,
};
pub use hamiltonian::{
    finite_difference_check, FourierSeries, Hamiltonian, Model, SINGULAR_Q_MIN,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::phase_space::{symplecticity_residual, PhasePoint, SymplecticMatrix};

pub const DEFAULT_DT: f64 = 1e-3;
/// Symplecticity drift of `F_t` that aborts an integration.
pub const SYMPLECTIC_DRIFT_LIMIT: f64 = 1e-4;

/// Classical RK4 with reusable stage buffers.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(len: usize) -> Self {
        Rk4 {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    pub(crate) fn step<F>(&mut self, f: &mut F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        f(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Number of uniform steps covering `[0, t_end]` with step at most `dt`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_end must be finite and non-negative, got {t_end}"
        )));
    }
    Ok((t_end / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Samples of a classical solution: points, optional stability matrices and
/// action phases, and energies.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    /// `F_t`; empty until filled.
    pub stability: Vec<SymplecticMatrix>,
    /// `delta_t = S_t - (q_t.p_t - q.p)/2`; empty until filled.
    pub action: Vec<f64>,
    /// `S_t`; empty until filled.
    pub raw_action: Vec<f64>,
    pub energy: Vec<f64>,
    pub max_symplectic_drift: f64,
    dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn final_point(&self) -> &PhasePoint {
        self.points.last().expect("trajectory has at least one sample")
    }

    pub fn final_stability(&self) -> Option<&SymplecticMatrix> {
        self.stability.last()
    }

    pub fn final_action(&self) -> Option<f64> {
        self.action.last().copied()
    }

    /// `max |E_t - E_0| / max(1, |E_0|)`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy
            .iter()
            .fold(0.0f64, |m, e| m.max((e - e0).abs()))
            / e0.abs().max(1.0)
    }
}

#[derive(Clone, Copy)]
struct Columns {
    stability: bool,
    action: bool,
}

fn state_len(dim: usize, cols: Columns) -> usize {
    dim + if cols.stability { dim * dim } else { 0 } + usize::from(cols.action)
}

/// Right-hand side for `(z, F, S)`. `F` is stored column-major.
fn flow_rhs<'a>(
    h: &'a dyn Hamiltonian,
    cols: Columns,
) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    let n = h.dof();
    let dim = 2 * n;
    let mut grad = vec![0.0; dim];
    let mut hess = DMatrix::zeros(dim, dim);
    move |t, y, dy| {
        let z = &y[..dim];
        h.gradient(z, t, &mut grad);
        for k in 0..n {
            dy[k] = grad[n + k];
            dy[n + k] = -grad[k];
        }
        let mut off = dim;
        if cols.stability {
            h.hessian(z, t, &mut hess);
            let f = &y[off..off + dim * dim];
            for c in 0..dim {
                for r in 0..dim {
                    // (J H F)_{rc}, with (J H)_{k,:} = H_{n+k,:}, (J H)_{n+k,:} = -H_{k,:}
                    let (row, sign) = if r < n { (r + n, 1.0) } else { (r - n, -1.0) };
                    let mut acc = 0.0;
                    for m in 0..dim {
                        acc += hess[(row, m)] * f[c * dim + m];
                    }
                    dy[off + c * dim + r] = sign * acc;
                }
            }
            off += dim * dim;
        }
        if cols.action {
            let pdh: f64 = (0..n).map(|k| z[n + k] * grad[n + k]).sum();
            dy[off] = pdh - h.value(z, t);
        }
    }
}

fn check_dims(h: &dyn Hamiltonian, z0: &PhasePoint) -> Result<()> {
    if z0.len() != 2 * h.dof() {
        return Err(Error::DimensionMismatch {
            expected: 2 * h.dof(),
            found: z0.len(),
        });
    }
    if !h.in_domain(z0.as_slice()) {
        return Err(Error::InvalidArgument("initial point outside the domain of H".into()));
    }
    Ok(())
}

fn integrate_columns(
    h: &dyn Hamiltonian,
    z0: &PhasePoint,
    t_end: f64,
    dt: f64,
    cols: Columns,
) -> Result<Trajectory> {
    check_dims(h, z0)?;
    let steps = step_count(t_end, dt)?;
    let step = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let dim = z0.len();
    let n = dim / 2;
    let len = state_len(dim, cols);
    let mut y = vec![0.0; len];
    y[..dim].copy_from_slice(z0.as_slice());
    if cols.stability {
        for k in 0..dim {
            y[dim + k * dim + k] = 1.0;
        }
    }
    let pq0: f64 = (0..n).map(|k| z0.as_slice()[k] * z0.as_slice()[n + k]).sum();

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        points: Vec::with_capacity(steps + 1),
        stability: Vec::new(),
        action: Vec::new(),
        raw_action: Vec::new(),
        energy: Vec::with_capacity(steps + 1),
        max_symplectic_drift: 0.0,
        dt: step,
    };

    let record = |traj: &mut Trajectory, t: f64, y: &[f64]| -> Result<()> {
        if y.iter().any(|v| !v.is_finite()) || !h.in_domain(&y[..dim]) {
            return Err(Error::NonFinite { t });
        }
        let z = PhasePoint::new(y[..dim].to_vec())?;
        traj.energy.push(h.value(z.as_slice(), t));
        traj.times.push(t);
        let mut off = dim;
        if cols.stability {
            let f = DMatrix::from_column_slice(dim, dim, &y[off..off + dim * dim]);
            let drift = symplecticity_residual(&f)?;
            traj.max_symplectic_drift = traj.max_symplectic_drift.max(drift);
            if drift > SYMPLECTIC_DRIFT_LIMIT {
                return Err(Error::SymplecticityLost { drift, t });
            }
            traj.stability.push(SymplecticMatrix::from_trusted(f));
            off += dim * dim;
        }
        if cols.action {
            let s = y[off];
            let pq: f64 = (0..n).map(|k| y[k] * y[n + k]).sum();
            traj.raw_action.push(s);
            traj.action.push(s - 0.5 * (pq - pq0));
        }
        traj.points.push(z);
        Ok(())
    };

    record(&mut traj, 0.0, &y)?;
    let mut rk = Rk4::new(len);
    let mut rhs = flow_rhs(h, cols);
    for k in 0..steps {
        let t = k as f64 * step;
        rk.step(&mut rhs, t, &mut y, step);
        let t_next = if k + 1 == steps { t_end } else { (k + 1) as f64 * step };
        record(&mut traj, t_next, &y)?;
    }
    Ok(traj)
}

/// RK4 samples of `dz/dt = J grad H(z, t)` on a uniform grid over `[0, t_end]`.
/// The stability and action columns are left empty.
pub fn integrate_trajectory(
    h: &dyn Hamiltonian,
    z0: &PhasePoint,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_columns(h, z0, t_end, dt, Columns { stability: false, action: false })
}

fn t_end_of(traj: &Trajectory) -> f64 {
    *traj.times.last().expect("non-empty trajectory")
}

fn refill(h: &dyn Hamiltonian, traj: &Trajectory, cols: Columns) -> Result<Trajectory> {
    let z0 = &traj.points[0];
    let t_end = t_end_of(traj);
    let dt = if traj.dt > 0.0 { traj.dt } else { DEFAULT_DT };
    integrate_columns(h, z0, t_end, dt * (1.0 + 1e-12), cols)
}

/// Co-integrates `dF/dt = J M_t F` with the trajectory on the same RK4 steps.
pub fn integrate_stability(h: &dyn Hamiltonian, traj: &Trajectory) -> Result<Trajectory> {
    let cols = Columns { stability: true, action: !traj.action.is_empty() };
    refill(h, traj, cols)
}

/// Co-integrates `S_t = int (p.dH/dp - H) ds` with the trajectory and fills
/// `delta_t`.
pub fn action_phase(h: &dyn Hamiltonian, traj: &Trajectory) -> Result<Trajectory> {
    let cols = Columns { stability: !traj.stability.is_empty(), action: true };
    refill(h, traj, cols)
}

/// Trajectory with every column filled in one pass.
pub fn integrate_full(
    h: &dyn Hamiltonian,
    z0: &PhasePoint,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_columns(h, z0, t_end, dt, Columns { stability: true, action: true })
}

/// Phase points at the given non-decreasing times, stepping with at most `dt`
/// between consecutive entries. Nothing else is stored.
pub fn flow_points(
    h: &dyn Hamiltonian,
    z0: &PhasePoint,
    times: &[f64],
    dt: f64,
) -> Result<Vec<PhasePoint>> {
    check_dims(h, z0)?;
    let dim = z0.len();
    let cols = Columns { stability: false, action: false };
    let mut y = z0.as_slice().to_vec();
    let mut rk = Rk4::new(dim);
    let mut rhs = flow_rhs(h, cols);
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &target in times {
        let span = target - t;
        if span < 0.0 {
            return Err(Error::InvalidArgument("times must be non-decreasing from 0".into()));
        }
        let steps = step_count(span, dt)?;
        for k in 0..steps {
            let step = span / steps as f64;
            rk.step(&mut rhs, t + k as f64 * step, &mut y, step);
        }
        t = target;
        if y.iter().any(|v| !v.is_finite()) || !h.in_domain(&y) {
            return Err(Error::NonFinite { t });
        }
        out.push(PhasePoint::new(y.clone())?);
    }
    Ok(out)
}

/// Smallest `T` in `(0, t_max]` at which the orbit of `z0` comes back within
/// `tol`, found at the local minima of `|z_t - z0|`.
pub fn find_period(
    h: &dyn Hamiltonian,
    z0: &PhasePoint,
    t_max: f64,
    tol: f64,
) -> Result<Option<f64>> {
    find_period_with_dt(h, z0, t_max, tol, DEFAULT_DT)
}

pub fn find_period_with_dt(
    h: &dyn Hamiltonian,
    z0: &PhasePoint,
    t_max: f64,
    tol: f64,
    dt: f64,
) -> Result<Option<f64>> {
    if !h.time_independent() {
        return Err(Error::InvalidArgument("find_period needs a time-independent H".into()));
    }
    check_dims(h, z0)?;
    let dim = z0.len();
    let n = dim / 2;
    let steps = step_count(t_max, dt)?;
    if steps == 0 {
        return Ok(None);
    }
    let step = t_max / steps as f64;
    let origin = z0.as_slice().to_vec();
    let mut grad = vec![0.0; dim];
    // g = d/dt |z - z0|^2 / 2
    let mut g_of = |y: &[f64]| -> f64 {
        h.gradient(y, 0.0, &mut grad);
        (0..n)
            .map(|k| (y[k] - origin[k]) * grad[n + k] - (y[n + k] - origin[n + k]) * grad[k])
            .sum()
    };
    let dist = |y: &[f64]| -> f64 {
        y.iter()
            .zip(origin.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };

    let cols = Columns { stability: false, action: false };
    let mut rk = Rk4::new(dim);
    let mut rhs = flow_rhs(h, cols);
    let mut y = origin.clone();
    let mut g_prev = g_of(&y);
    let mut probe = vec![0.0; dim];
    for k in 0..steps {
        let t = k as f64 * step;
        let y_prev = y.clone();
        rk.step(&mut rhs, t, &mut y, step);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t + step });
        }
        let g_new = g_of(&y);
        if k > 0 && g_prev < 0.0 && g_new >= 0.0 {
            let (mut lo, mut hi) = (0.0, step);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                probe.copy_from_slice(&y_prev);
                rk.step(&mut rhs, t, &mut probe, mid);
                if g_of(&probe) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 * (1.0 + t) {
                    break;
                }
            }
            let s = 0.5 * (lo + hi);
            probe.copy_from_slice(&y_prev);
            rk.step(&mut rhs, t, &mut probe, s);
            if dist(&probe) <= tol {
                return Ok(Some(t + s));
            }
        }
        g_prev = g_new;
    }
    Ok(None)
}

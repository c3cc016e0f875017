use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Finite Fourier series `mean + sum_k cos_k cos(k w t) + sin_k sin(k w t)`,
/// `k = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub omega: f64,
}

impl FourierSeries {
    pub fn new(mean: f64, cos: Vec<f64>, sin: Vec<f64>, omega: f64) -> Result<Self> {
        let all_finite = mean.is_finite()
            && omega.is_finite()
            && cos.iter().chain(sin.iter()).all(|c| c.is_finite());
        if !all_finite {
            return Err(Error::InvalidArgument("non-finite Fourier coefficient".into()));
        }
        if !(omega > 0.0) && (cos.iter().chain(sin.iter()).any(|&c| c != 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "base frequency must be positive, got {omega}"
            )));
        }
        Ok(FourierSeries { mean, cos, sin, omega })
    }

    pub fn constant(c: f64) -> Self {
        FourierSeries { mean: c, cos: vec![], sin: vec![], omega: 1.0 }
    }

    /// `lambda cos(omega t) + mu`.
    pub fn mathieu(lambda: f64, mu: f64, omega: f64) -> Self {
        FourierSeries { mean: mu, cos: vec![lambda], sin: vec![], omega }
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().chain(self.sin.iter()).all(|&c| c == 0.0)
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn value(&self, t: f64) -> f64 {
        let mut v = self.mean;
        for (k, c) in self.cos.iter().enumerate() {
            v += c * ((k + 1) as f64 * self.omega * t).cos();
        }
        for (k, s) in self.sin.iter().enumerate() {
            v += s * ((k + 1) as f64 * self.omega * t).sin();
        }
        v
    }

    /// `int_0^t f`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut v = self.mean * t;
        for (k, c) in self.cos.iter().enumerate() {
            let w = (k + 1) as f64 * self.omega;
            v += c * (w * t).sin() / w;
        }
        for (k, s) in self.sin.iter().enumerate() {
            let w = (k + 1) as f64 * self.omega;
            v += s * (1.0 - (w * t).cos()) / w;
        }
        v
    }
}

/// A classical Hamiltonian `H(z, t)` with analytic derivatives.
pub trait Hamiltonian: Send + Sync {
    fn dof(&self) -> usize;
    fn value(&self, z: &[f64], t: f64) -> f64;
    fn gradient(&self, z: &[f64], t: f64, grad: &mut [f64]);
    /// Writes the symmetric Hessian `M_t` into a `2n x 2n` matrix.
    fn hessian(&self, z: &[f64], t: f64, hess: &mut DMatrix<f64>);
    fn time_independent(&self) -> bool;
    fn period(&self) -> Option<f64> {
        None
    }
    /// True when `H` is a quadratic form in `z`, so the metaplectic
    /// propagation is exact.
    fn is_quadratic(&self) -> bool {
        false
    }
    /// `V(x, t)` when `H = p^2/2 + V(q, t)` with one degree of freedom.
    fn potential(&self, _x: f64, _t: f64) -> Option<f64> {
        None
    }
    /// False where the state leaves the domain of `H`.
    fn in_domain(&self, _z: &[f64]) -> bool {
        true
    }
}

/// Closest approach to `q = 0` tolerated by the singular oscillator.
pub const SINGULAR_Q_MIN: f64 = 1e-6;

/// The builtin models.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// `p^2/2`.
    Free,
    /// `(p^2 + omega^2 q^2)/2`.
    Harmonic { omega: f64 },
    /// `p^2/2 - cos q`.
    Pendulum,
    /// `p^2/2 + q^4/4`.
    Quartic,
    /// `g(t) q p`.
    Dilation { g: FourierSeries },
    /// `g(t)(p^2 + q^2)/2`.
    Isotropic { g: FourierSeries },
    /// `p^2/2 + f(t) q^2/2` for a periodic `f`. Mathieu is
    /// `f = lambda cos(omega t) + mu`.
    Hill { f: FourierSeries },
    /// `p^2/2 + f(t) q^2/2 + g^2/q^2` on `q > 0`.
    Singular { f: FourierSeries, g: f64 },
    /// `z.Sz/2` for a constant symmetric `S`.
    Quadratic { s: DMatrix<f64> },
}

impl Model {
    pub fn mathieu(lambda: f64, mu: f64, omega: f64) -> Self {
        Model::Hill { f: FourierSeries::mathieu(lambda, mu, omega) }
    }

    pub fn quadratic(s: DMatrix<f64>) -> Result<Self> {
        if !s.is_square() || s.nrows() == 0 || s.nrows() % 2 != 0 {
            return Err(Error::OddDimension(s.nrows()));
        }
        if (&s - s.transpose()).amax() > 1e-12 * (1.0 + s.amax()) {
            return Err(Error::InvalidArgument("S must be symmetric".into()));
        }
        Ok(Model::Quadratic { s })
    }

    /// The time-dependent frequency function, for Hill-type models.
    pub fn hill_function(&self) -> Option<&FourierSeries> {
        match self {
            Model::Hill { f } | Model::Singular { f, .. } => Some(f),
            _ => None,
        }
    }
}

impl Hamiltonian for Model {
    fn dof(&self) -> usize {
        match self {
            Model::Quadratic { s } => s.nrows() / 2,
            _ => 1,
        }
    }

    fn value(&self, z: &[f64], t: f64) -> f64 {
        match self {
            Model::Quadratic { s } => {
                let d = s.nrows();
                let mut acc = 0.0;
                for r in 0..d {
                    for c in 0..d {
                        acc += z[r] * s[(r, c)] * z[c];
                    }
                }
                0.5 * acc
            }
            _ => {
                let (q, p) = (z[0], z[1]);
                match self {
                    Model::Free => 0.5 * p * p,
                    Model::Harmonic { omega } => 0.5 * (p * p + omega * omega * q * q),
                    Model::Pendulum => 0.5 * p * p - q.cos(),
                    Model::Quartic => 0.5 * p * p + 0.25 * q.powi(4),
                    Model::Dilation { g } => g.value(t) * q * p,
                    Model::Isotropic { g } => 0.5 * g.value(t) * (p * p + q * q),
                    Model::Hill { f } => 0.5 * p * p + 0.5 * f.value(t) * q * q,
                    Model::Singular { f, g } => {
                        0.5 * p * p + 0.5 * f.value(t) * q * q + g * g / (q * q)
                    }
                    Model::Quadratic { .. } => unreachable!(),
                }
            }
        }
    }

    fn gradient(&self, z: &[f64], t: f64, grad: &mut [f64]) {
        if let Model::Quadratic { s } = self {
            let d = s.nrows();
            for r in 0..d {
                grad[r] = (0..d).map(|c| s[(r, c)] * z[c]).sum();
            }
            return;
        }
        let (q, p) = (z[0], z[1]);
        let (gq, gp) = match self {
            Model::Free => (0.0, p),
            Model::Harmonic { omega } => (omega * omega * q, p),
            Model::Pendulum => (q.sin(), p),
            Model::Quartic => (q.powi(3), p),
            Model::Dilation { g } => {
                let gt = g.value(t);
                (gt * p, gt * q)
            }
            Model::Isotropic { g } => {
                let gt = g.value(t);
                (gt * q, gt * p)
            }
            Model::Hill { f } => (f.value(t) * q, p),
            Model::Singular { f, g } => (f.value(t) * q - 2.0 * g * g / q.powi(3), p),
            Model::Quadratic { .. } => unreachable!(),
        };
        grad[0] = gq;
        grad[1] = gp;
    }

    fn hessian(&self, z: &[f64], t: f64, hess: &mut DMatrix<f64>) {
        if let Model::Quadratic { s } = self {
            hess.copy_from(s);
            return;
        }
        let q = z[0];
        let (hqq, hqp, hpp) = match self {
            Model::Free => (0.0, 0.0, 1.0),
            Model::Harmonic { omega } => (omega * omega, 0.0, 1.0),
            Model::Pendulum => (q.cos(), 0.0, 1.0),
            Model::Quartic => (3.0 * q * q, 0.0, 1.0),
            Model::Dilation { g } => (0.0, g.value(t), 0.0),
            Model::Isotropic { g } => {
                let gt = g.value(t);
                (gt, 0.0, gt)
            }
            Model::Hill { f } => (f.value(t), 0.0, 1.0),
            Model::Singular { f, g } => (f.value(t) + 6.0 * g * g / q.powi(4), 0.0, 1.0),
            Model::Quadratic { .. } => unreachable!(),
        };
        hess[(0, 0)] = hqq;
        hess[(0, 1)] = hqp;
        hess[(1, 0)] = hqp;
        hess[(1, 1)] = hpp;
    }

    fn time_independent(&self) -> bool {
        match self {
            Model::Free
            | Model::Harmonic { .. }
            | Model::Pendulum
            | Model::Quartic
            | Model::Quadratic { .. } => true,
            Model::Dilation { g } | Model::Isotropic { g } => g.is_constant(),
            Model::Hill { f } | Model::Singular { f, .. } => f.is_constant(),
        }
    }

    fn period(&self) -> Option<f64> {
        match self {
            Model::Dilation { g } | Model::Isotropic { g } if !g.is_constant() => Some(g.period()),
            Model::Hill { f } | Model::Singular { f, .. } if !f.is_constant() => Some(f.period()),
            _ => None,
        }
    }

    fn is_quadratic(&self) -> bool {
        !matches!(self, Model::Pendulum | Model::Quartic | Model::Singular { .. })
    }

    fn potential(&self, x: f64, t: f64) -> Option<f64> {
        match self {
            Model::Free => Some(0.0),
            Model::Harmonic { omega } => Some(0.5 * omega * omega * x * x),
            Model::Pendulum => Some(-x.cos()),
            Model::Quartic => Some(0.25 * x.powi(4)),
            Model::Hill { f } => Some(0.5 * f.value(t) * x * x),
            Model::Singular { f, g } => Some(0.5 * f.value(t) * x * x + g * g / (x * x)),
            Model::Isotropic { g } if g.is_constant() && g.mean == 1.0 => Some(0.5 * x * x),
            Model::Quadratic { s }
                if s.nrows() == 2 && s[(0, 1)] == 0.0 && s[(1, 1)] == 1.0 =>
            {
                Some(0.5 * s[(0, 0)] * x * x)
            }
            _ => None,
        }
    }

    fn in_domain(&self, z: &[f64]) -> bool {
        match self {
            Model::Singular { .. } => z[0] > SINGULAR_Q_MIN,
            _ => true,
        }
    }
}

/// Largest relative deviations of the analytic gradient and Hessian from
/// central finite differences at `(z, t)`.
pub fn finite_difference_check(h: &dyn Hamiltonian, z: &[f64], t: f64) -> (f64, f64) {
    let d = 2 * h.dof();
    let mut grad = vec![0.0; d];
    h.gradient(z, t, &mut grad);
    let mut hess = DMatrix::zeros(d, d);
    h.hessian(z, t, &mut hess);

    let mut grad_err: f64 = 0.0;
    let mut hess_err: f64 = 0.0;
    let mut zp = z.to_vec();
    let mut zm = z.to_vec();
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    for k in 0..d {
        let step = 1e-5 * (1.0 + z[k].abs());
        zp[k] = z[k] + step;
        zm[k] = z[k] - step;
        let fd = (h.value(&zp, t) - h.value(&zm, t)) / (2.0 * step);
        grad_err = grad_err.max((fd - grad[k]).abs() / (1.0 + grad[k].abs()));
        h.gradient(&zp, t, &mut gp);
        h.gradient(&zm, t, &mut gm);
        for r in 0..d {
            let fd = (gp[r] - gm[r]) / (2.0 * step);
            hess_err = hess_err.max((fd - hess[(r, k)]).abs() / (1.0 + hess[(r, k)].abs()));
        }
        zp[k] = z[k];
        zm[k] = z[k];
    }
    (grad_err, hess_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn models() -> Vec<Model> {
        let g = FourierSeries::new(0.0, vec![0.7, 0.2], vec![0.3], 1.3).unwrap();
        vec![
            Model::Free,
            Model::Harmonic { omega: 1.7 },
            Model::Pendulum,
            Model::Quartic,
            Model::Dilation { g: g.clone() },
            Model::Isotropic { g: g.clone() },
            Model::mathieu(0.4, 1.1, 2.0),
            Model::Singular { f: FourierSeries::mathieu(0.2, 1.0, 2.0), g: 0.8 },
            Model::quadratic(DMatrix::from_row_slice(
                4,
                4,
                &[
                    2.0, 0.1, 0.3, 0.0, 0.1, 1.0, 0.0, 0.2, 0.3, 0.0, 1.5, 0.1, 0.0, 0.2, 0.1, 0.9,
                ],
            ))
            .unwrap(),
        ]
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for m in models() {
            let d = 2 * m.dof();
            for (i, t) in [0.0, 0.37, 2.5].iter().enumerate() {
                let z: Vec<f64> = (0..d).map(|k| 0.6 + 0.3 * (k + i) as f64).collect();
                let (ge, he) = finite_difference_check(&m, &z, *t);
                assert!(ge < 1e-5, "{m:?} gradient {ge:e}");
                assert!(he < 1e-4, "{m:?} hessian {he:e}");
            }
        }
    }

    #[test]
    fn fourier_integral_matches_quadrature() {
        let f = FourierSeries::new(0.3, vec![1.0, -0.5], vec![0.25, 0.7], 2.0).unwrap();
        let t = 1.9;
        let n = 20_000;
        let h = t / n as f64;
        let mut acc = 0.5 * (f.value(0.0) + f.value(t));
        for k in 1..n {
            acc += f.value(k as f64 * h);
        }
        assert_abs_diff_eq!(acc * h, f.integral(t), epsilon = 1e-7);
        assert_abs_diff_eq!(f.period(), PI, epsilon = 1e-15);
    }

    #[test]
    fn potentials_consistent_with_value() {
        for m in models() {
            if let Some(v) = m.potential(0.8, 0.4) {
                let h = m.value(&[0.8, 0.3], 0.4);
                assert_abs_diff_eq!(h, 0.5 * 0.09 + v, epsilon = 1e-14);
            }
        }
        assert!(Model::Dilation { g: FourierSeries::constant(1.0) }.potential(0.1, 0.0).is_none());
    }
}

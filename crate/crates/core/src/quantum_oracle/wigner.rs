use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::WavepacketGrid;
use crate::error::{Error, Result};

/// Sampling of the Wigner transform. `None` picks `min(N, 1024)` momenta and a
/// stride keeping at most ~512 rows.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WignerOptions {
    pub n_p: Option<usize>,
    pub q_stride: Option<usize>,
}

/// `W(q_i, p_k)` stored row-major (`data[i * np + k]`), momenta ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub nq: usize,
    pub np: usize,
    pub q0: f64,
    pub dq: f64,
    pub p0: f64,
    pub dp: f64,
    pub hbar: f64,
    pub data: Vec<f64>,
}

impl WignerGrid {
    pub fn q(&self, i: usize) -> f64 {
        self.q0 + i as f64 * self.dq
    }

    pub fn p(&self, k: usize) -> f64 {
        self.p0 + k as f64 * self.dp
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.np + k]
    }

    /// `int W dp` along row `i`.
    pub fn q_marginal(&self, i: usize) -> f64 {
        self.data[i * self.np..(i + 1) * self.np].iter().sum::<f64>() * self.dp
    }

    /// `int int W dq dp`.
    pub fn total(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.dp * self.dq
    }
}

/// `W(q, p) = (2 pi hbar)^{-1} int dy conj(psi(q + y/2)) psi(q - y/2) exp(ipy/hbar)`
/// with `y = 2 m dx`, so the momentum spacing is `pi hbar / (n_p dx)`.
pub fn wigner(psi: &WavepacketGrid, opts: WignerOptions) -> Result<WignerGrid> {
    let n = psi.grid.len();
    let np = opts.n_p.unwrap_or(n.min(1024));
    let stride = opts.q_stride.unwrap_or((n / 512).max(1));
    if np < 2 || stride == 0 {
        return Err(Error::InvalidArgument(format!("bad Wigner sampling n_p = {np}, stride = {stride}")));
    }
    let dx = psi.grid.dx();
    let hbar = psi.hbar;
    let dp = std::f64::consts::PI * hbar / (np as f64 * dx);
    let half = (np / 2) as i64;
    let fft = FftPlanner::new().plan_fft_inverse(np);
    let rows: Vec<usize> = (0..n).step_by(stride).collect();
    let scale = 2.0 * dx / (2.0 * std::f64::consts::PI * hbar);
    let at = |j: i64| -> Complex64 {
        if j < 0 || j >= n as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            psi.values[j as usize]
        }
    };
    let data: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|&j| {
            let mut buf = vec![Complex64::new(0.0, 0.0); np];
            let j = j as i64;
            for m in -half..(np as i64 - half) {
                let f = at(j + m).conj() * at(j - m);
                buf[m.rem_euclid(np as i64) as usize] = f;
            }
            fft.process(&mut buf);
            (0..np)
                .map(|k| {
                    let kk = (k as i64 - half).rem_euclid(np as i64) as usize;
                    buf[kk].re * scale
                })
                .collect()
        })
        .collect();
    Ok(WignerGrid {
        nq: rows.len(),
        np,
        q0: psi.grid.x(0),
        dq: stride as f64 * dx,
        p0: -(half as f64) * dp,
        dp,
        hbar,
        data: data.into_iter().flatten().collect(),
    })
}

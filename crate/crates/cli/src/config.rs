//! Scenario files: sectioned TOML, unknown keys rejected.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use sce_core::{FourierSeries, Model, PhasePoint};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fourier {
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
    #[serde(default = "one")]
    pub omega: f64,
}

impl Fourier {
    pub fn build(&self) -> Result<FourierSeries, String> {
        FourierSeries::new(self.mean, self.cos.clone(), self.sin.clone(), self.omega).map_err(|e| e.to_string())
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    Free,
    Harmonic {
        #[serde(default = "one")]
        omega: f64,
    },
    Pendulum,
    Quartic,
    Dilation { g: Fourier },
    Isotropic { g: Fourier },
    Hill { f: Fourier },
    Mathieu { lambda: f64, mu: f64, omega: f64 },
    Singular { f: Fourier, g: f64 },
    Quadratic { s: Vec<Vec<f64>> },
}

impl HamiltonianSpec {
    pub fn build(&self) -> Result<Model, String> {
        Ok(match self {
            HamiltonianSpec::Free => Model::Free,
            HamiltonianSpec::Harmonic { omega } => Model::Harmonic { omega: *omega },
            HamiltonianSpec::Pendulum => Model::Pendulum,
            HamiltonianSpec::Quartic => Model::Quartic,
            HamiltonianSpec::Dilation { g } => Model::Dilation { g: g.build()? },
            HamiltonianSpec::Isotropic { g } => Model::Isotropic { g: g.build()? },
            HamiltonianSpec::Hill { f } => Model::Hill { f: f.build()? },
            HamiltonianSpec::Mathieu { lambda, mu, omega } => {
                if !(*omega > 0.0) {
                    return Err(format!("mathieu omega must be positive, got {omega}"));
                }
                Model::mathieu(*lambda, *mu, *omega)
            }
            HamiltonianSpec::Singular { f, g } => {
                if !(*g > 0.0) {
                    return Err(format!("singular g must be positive, got {g}"));
                }
                Model::Singular { f: f.build()?, g: *g }
            }
            HamiltonianSpec::Quadratic { s } => {
                let n = s.len();
                if s.iter().any(|r| r.len() != n) {
                    return Err("quadratic s must be square".into());
                }
                let flat: Vec<f64> = s.iter().flatten().copied().collect();
                Model::quadratic(DMatrix::from_row_slice(n, n, &flat)).map_err(|e| e.to_string())?
            }
        })
    }
}

/// Uniform `points` samples of `[start, end]`, or explicit `values`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub start: f64,
    pub end: Option<f64>,
    pub points: Option<usize>,
    pub values: Option<Vec<f64>>,
}

impl TimeGrid {
    pub fn build(&self) -> Result<Vec<f64>, String> {
        let ts = match (&self.values, self.end, self.points) {
            (Some(v), None, None) => v.clone(),
            (None, Some(end), Some(points)) if points >= 2 => {
                (0..points).map(|k| self.start + (end - self.start) * k as f64 / (points - 1) as f64).collect()
            }
            _ => return Err("time grid needs either `values` or `end` with `points >= 2`".into()),
        };
        if ts.is_empty() || ts.iter().any(|t| !t.is_finite()) || ts[0] < 0.0 {
            return Err("time grid must be finite and start at t >= 0".into());
        }
        if ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err("time grid must be strictly increasing".into());
        }
        Ok(ts)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    #[serde(default)]
    pub end: Option<f64>,
    #[serde(default = "one_point")]
    pub points: usize,
}

fn one_point() -> usize {
    1
}

impl Range {
    pub fn build(&self) -> Result<Vec<f64>, String> {
        match (self.points, self.end) {
            (0, _) => Err("range needs at least one point".into()),
            (1, _) => Ok(vec![self.start]),
            (n, Some(end)) => Ok((0..n).map(|k| self.start + (end - self.start) * k as f64 / (n - 1) as f64).collect()),
            (_, None) => Err("range with several points needs `end`".into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub alpha: Vec<f64>,
    pub hbar: f64,
}

impl StateSpec {
    pub fn alpha(&self) -> Result<PhasePoint, String> {
        PhasePoint::new(self.alpha.clone()).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MwVerify {
    #[serde(default = "ten")]
    pub count: usize,
    #[serde(default = "half")]
    pub spread: f64,
    #[serde(default = "min_det")]
    pub min_det: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    /// Adds `F = -1` and `F = J` ahead of the random matrices.
    #[serde(default = "yes")]
    pub include_examples: bool,
    /// Extra `2 x 2` matrices, row-major.
    #[serde(default)]
    pub matrices: Vec<[f64; 4]>,
}

fn ten() -> usize {
    10
}
fn half() -> f64 {
    0.5
}
fn min_det() -> f64 {
    0.1
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevivalRun {
    #[serde(default = "epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub continuous: bool,
    pub oracle: Option<GridSpec>,
}

fn epsilon() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloquetRun {
    pub omega: f64,
    pub lambda: Range,
    pub mu: Range,
    #[serde(default = "fine_dt")]
    pub dt: f64,
    #[serde(default = "modes")]
    pub modes: usize,
    pub boundary: Option<BoundaryRun>,
}

fn fine_dt() -> f64 {
    1e-4
}
fn modes() -> usize {
    32
}

/// Zone-boundary tracing: for each `lambda`, the `mu` in `[mu_lo, mu_hi]`
/// where `|tr M| = 2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryRun {
    pub lambda: Range,
    pub mu_lo: f64,
    pub mu_hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityRun {
    pub energy: f64,
    pub hbars: Vec<f64>,
    /// Coefficients of `V(q) = sum_k c_k q^k`.
    pub perturbation: Vec<f64>,
    /// Fixed coupling; by default `lambda/hbar` is scaled to `deficit`.
    pub lambda: Option<f64>,
    #[serde(default = "deficit")]
    pub deficit: f64,
    #[serde(default = "samples")]
    pub samples: usize,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "dx_over_hbar")]
    pub dx_over_hbar: f64,
    #[serde(default = "margin")]
    pub basis_margin: usize,
    pub mandelstam_tamm: Option<MtRun>,
}

fn deficit() -> f64 {
    0.2
}
fn samples() -> usize {
    400
}
fn dx_over_hbar() -> f64 {
    1.0 / 40.0
}
fn margin() -> usize {
    40
}

/// Coherent state `alpha` at `hbar`, split-step propagated on `grid`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtRun {
    pub alpha: Vec<f64>,
    pub hbar: f64,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularRun {
    #[serde(default)]
    pub n: usize,
    /// Real modulus of the complex Hill solution; the periodic choice from the
    /// monodromy when absent.
    pub alpha: Option<f64>,
    #[serde(default = "fine_dt")]
    pub dt: f64,
    /// Half-line extent for the formula states.
    #[serde(default = "x_max")]
    pub x_max: f64,
    #[serde(default = "half_points")]
    pub points: usize,
    /// Split-step comparison on `[0, x_max]` with `points` interior points.
    #[serde(default)]
    pub oracle: bool,
}

fn x_max() -> f64 {
    12.0
}
fn half_points() -> usize {
    4096
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: Option<u64>,
    pub hamiltonian: Option<HamiltonianSpec>,
    pub state: Option<StateSpec>,
    pub times: Option<TimeGrid>,
    pub mw_verify: Option<MwVerify>,
    pub revival: Option<RevivalRun>,
    pub floquet: Option<FloquetRun>,
    pub fidelity: Option<FidelityRun>,
    pub singular: Option<SingularRun>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// The scenario with defaults filled in, as TOML.
    pub fn resolved(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn require<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T, String> {
        field.as_ref().ok_or_else(|| format!("missing [{name}] section"))
    }
}

pub mod fidelity;
mod floquet;
pub mod mw_verify;
mod revival;
mod singular;

pub use fidelity::run as fidelity_lr;
pub use floquet::run as floquet;
pub use mw_verify::run as mw_verify;
pub use revival::run as revival_scan;
pub use singular::run as singular;

use sce_core::{Grid1D, Hamiltonian, Model};

use crate::config::{GridSpec, Scenario};
use crate::error::CliError;

pub(crate) fn model(s: &Scenario) -> Result<Model, CliError> {
    Ok(Scenario::require(&s.hamiltonian, "hamiltonian")?.build()?)
}

pub(crate) fn times(s: &Scenario) -> Result<Vec<f64>, CliError> {
    Ok(Scenario::require(&s.times, "times")?.build()?)
}

pub(crate) fn grid(g: &GridSpec) -> Result<Grid1D, CliError> {
    Ok(Grid1D::new(g.x_min, g.x_max, g.points)?)
}

/// `V(x, t)` of a separable one-degree-of-freedom model.
pub(crate) fn potential(h: &Model) -> Result<impl Fn(f64, f64) -> f64 + Sync + '_, CliError> {
    if h.dof() != 1 || h.potential(0.5, 0.0).is_none() {
        return Err(sce_core::Error::NotSeparable.into());
    }
    Ok(move |x: f64, t: f64| h.potential(x, t).unwrap_or(f64::NAN))
}

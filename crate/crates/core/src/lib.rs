//! Semiclassical coherent-state propagation, metaplectic symbols, quantum
//! revivals, Floquet analysis and linear-response fidelity, together with
//! grid-based quantum reference solvers.

pub mod classical_dynamics;
pub mod error;
pub mod fidelity;
pub mod metaplectic;
pub mod phase_space;
pub mod quantum_oracle;
pub mod revivals;

pub use classical_dynamics::{FloquetData, FourierSeries, Hamiltonian, HillComplexSolution, Model, Trajectory};
pub use error::{Error, Result};
pub use fidelity::{CorrelationSeries, EnergyWindow, LrComparison, PerturbationModel, Propagator};
pub use metaplectic::{GaussianSymbol, MWMatrices, SqueezeRotation};
pub use phase_space::{PhasePoint, SymplecticMatrix, WeylPhase};
pub use quantum_oracle::{EigenBasis, GaussianParams, Grid1D, WavepacketGrid, WignerGrid};
pub use revivals::{RevivalReport, ThawedGaussian};

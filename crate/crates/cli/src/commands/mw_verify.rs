//! `|Omega(0)|` from the phase-space trace against `|det(1 - F)|^{-1/2}`,
//! and the overlap-squared integral against `|det(1 - F)|^{-1}`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::json;

use sce_core::phase_space::{random_symplectic, standard_j};
use sce_core::quantum_oracle::{metaplectic_trace, overlap_sq_integral, PhaseSpaceQuadrature};
use sce_core::{PhasePoint, SymplecticMatrix};

use crate::config::Scenario;
use crate::error::CliError;
use crate::output::{Context, Field};

pub const REL_TOL: f64 = 1e-2;

pub struct MwRow {
    pub id: String,
    pub formula: f64,
    pub trace: f64,
    pub inv_det: f64,
    pub integral: f64,
    pub rel_err: f64,
}

pub fn verify_matrix(id: String, f: &SymplecticMatrix, hbar: f64) -> sce_core::Result<MwRow> {
    let det = f.det_one_minus();
    let formula = sce_core::metaplectic::mw_symbol(f, hbar)?.prefactor_modulus;
    let origin = PhasePoint::new1(0.0, 0.0);
    let trace = metaplectic_trace(f, &origin, hbar, PhaseSpaceQuadrature::default())?.modulus;
    let integral = overlap_sq_integral(f, hbar, PhaseSpaceQuadrature::default())?.value.re;
    let inv_det = 1.0 / det.abs();
    let rel_err = ((trace - formula).abs() / formula).max((integral - inv_det).abs() / inv_det);
    Ok(MwRow { id, formula, trace, inv_det, integral, rel_err })
}

/// `count` seeded matrices with `|det(1 - F)| > min_det`, drawn from seeds
/// `seed, seed + 1, ...`.
pub fn random_matrices(count: usize, seed: u64, spread: f64, min_det: f64) -> sce_core::Result<Vec<(u64, SymplecticMatrix)>> {
    let mut out = Vec::with_capacity(count);
    let mut s = seed;
    while out.len() < count {
        let f = random_symplectic(1, s, spread)?;
        if f.det_one_minus().abs() > min_det {
            out.push((s, f));
        }
        s = s.wrapping_add(1);
    }
    Ok(out)
}

pub fn run(s: &Scenario, ctx: &Context) -> Result<(), CliError> {
    let cfg = Scenario::require(&s.mw_verify, "mw_verify")?;
    if !(cfg.hbar > 0.0) {
        return Err(CliError::Config(format!("hbar must be positive, got {}", cfg.hbar)));
    }
    let mut mats: Vec<(String, SymplecticMatrix)> = Vec::new();
    if cfg.include_examples {
        mats.push(("minus_identity".into(), SymplecticMatrix::new(-DMatrix::identity(2, 2))?));
        mats.push(("j".into(), SymplecticMatrix::new(standard_j(1))?));
    }
    for (k, m) in cfg.matrices.iter().enumerate() {
        mats.push((format!("given_{k}"), SymplecticMatrix::new(DMatrix::from_row_slice(2, 2, m))?));
    }
    for (seed, f) in random_matrices(cfg.count, ctx.seed, cfg.spread, cfg.min_det)? {
        mats.push((format!("seed_{seed}"), f));
    }
    let rows: Vec<MwRow> = mats
        .into_par_iter()
        .map(|(id, f)| verify_matrix(id, &f, cfg.hbar))
        .collect::<sce_core::Result<_>>()?;

    let mut csv = ctx.csv(&["id", "omega0_formula", "omega0_trace", "inv_det", "integral_check", "rel_err"]);
    for r in &rows {
        csv.row(&[
            Field::S(r.id.clone()),
            Field::F(r.formula),
            Field::F(r.trace),
            Field::F(r.inv_det),
            Field::F(r.integral),
            Field::F(r.rel_err),
        ]);
    }
    ctx.write("mw_verify.csv", &csv.finish())?;
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.rel_err));
    ctx.write_json(
        "mw_verify.json",
        &json!({ "matrices": rows.len(), "max_rel_err": worst, "tolerance": REL_TOL, "seed": ctx.seed }),
    )?;
    if !(worst < REL_TOL) {
        return Err(CliError::Validation(format!("max rel_err {worst:e} exceeds {REL_TOL:e}")));
    }
    Ok(())
}

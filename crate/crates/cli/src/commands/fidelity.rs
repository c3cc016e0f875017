use serde_json::json;

use sce_core::fidelity::{
    lr_fidelity_compare, mandelstam_tamm, LrCompareConfig, PerturbationModel, QuantumSetup, SplitStepPropagator,
};
use sce_core::quantum_oracle::coherent_state;
use sce_core::PhasePoint;

use super::{grid, model, potential, times};
use crate::config::Scenario;
use crate::error::CliError;
use crate::output::{Context, Field};

pub const WINDOW_NOTE: &str =
    "quantum side averages every eigenstate in the energy window; no density-one subsequence is selected";

pub fn run(s: &Scenario, ctx: &Context) -> Result<(), CliError> {
    let h = model(s)?;
    let cfg = Scenario::require(&s.fidelity, "fidelity")?;
    let ts = times(s)?;
    if cfg.hbars.is_empty() || cfg.hbars.iter().any(|h| !(*h > 0.0)) {
        return Err(CliError::Config("hbars must be a non-empty list of positive values".into()));
    }
    let v = PerturbationModel::new(cfg.perturbation.clone(), cfg.lambda.unwrap_or(1.0))?;
    let lr = LrCompareConfig {
        energy: cfg.energy,
        hbars: cfg.hbars.clone(),
        times: ts.clone(),
        deficit: cfg.deficit,
        lambda: cfg.lambda,
        n_samples: cfg.samples,
        seed: ctx.seed,
        quantum: QuantumSetup {
            x_min: cfg.x_min,
            x_max: cfg.x_max,
            dx_over_hbar: cfg.dx_over_hbar,
            basis_margin: cfg.basis_margin,
        },
    };
    let (corr, rows) = lr_fidelity_compare(&h, &v, &lr)?;

    let mut csv = ctx.csv(&[
        "t",
        "F_quantum_avg",
        "F_classical",
        "deviation",
        "n_states",
        "hbar",
        "F_exponentiated_heuristic",
        "C",
        "C_stderr",
    ]);
    for r in &rows {
        for (k, &t) in ts.iter().enumerate() {
            csv.row(&[
                Field::F(t),
                Field::F(r.f_quantum[k]),
                Field::F(r.f_classical[k]),
                Field::F((r.f_quantum[k] - r.f_classical[k]).abs()),
                Field::U(r.states.len()),
                Field::F(r.hbar),
                Field::F(r.f_exponentiated[k]),
                Field::F(corr.c[k]),
                Field::F(corr.stderr[k]),
            ]);
        }
    }
    ctx.write("fidelity_lr.csv", &csv.finish())?;

    let devs: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
    let summary: Vec<_> = rows
        .iter()
        .map(|r| {
            json!({
                "hbar": r.hbar,
                "lambda": r.lambda,
                "window": [r.window.alpha, r.window.beta],
                "states": r.states,
                "energies": r.energies,
                "max_relative_deviation": r.deviation,
            })
        })
        .collect();
    let mut report = json!({
        "seed": ctx.seed,
        "energy": cfg.energy,
        "n_samples": corr.n_samples,
        "vbar": corr.vbar,
        "grid": { "x_min": cfg.x_min, "x_max": cfg.x_max, "dx_over_hbar": cfg.dx_over_hbar },
        "per_hbar": summary,
        "deviation_decreasing_with_hbar": devs.windows(2).all(|w| w[1] < w[0]),
        "note": WINDOW_NOTE,
    });

    if let Some(mt) = &cfg.mandelstam_tamm {
        let v = potential(&h)?;
        let vs = |x: f64| v(x, 0.0);
        let grid = grid(&mt.grid)?;
        let psi = coherent_state(&PhasePoint::new(mt.alpha.clone())?, mt.hbar, &grid)?;
        let mut prop = SplitStepPropagator { potential: &vs, dt: mt.grid.dt };
        let table = mandelstam_tamm(&psi, &mut prop, &ts)?;
        let mut csv = ctx.csv(&["t", "overlap_sq", "bound", "valid"]);
        for r in &table {
            csv.row(&[Field::F(r.t), Field::F(r.overlap_sq), Field::F(r.bound), Field::B(r.valid)]);
        }
        ctx.write("mandelstam_tamm.csv", &csv.finish())?;
        report["mandelstam_tamm_rows"] = json!(table.len());
    }
    ctx.write_json("fidelity_lr.json", &report)?;
    Ok(())
}

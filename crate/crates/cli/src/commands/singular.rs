//! Time-dependent singular oscillator at `hbar = 1`: the closed-form states
//! built from the complex Hill solution, optionally against split-step.

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use sce_core::classical_dynamics::{hill_complex_solution, hill_monodromy, periodic_alpha};
use sce_core::quantum_oracle::{propagate_splitstep_sampled, Potential};
use sce_core::revivals::{singular_index, singular_time_state};
use sce_core::{Grid1D, HillComplexSolution, Model, WavepacketGrid};

use super::times;
use crate::config::Scenario;
use crate::error::CliError;
use crate::output::{Context, Field};

pub fn run(s: &Scenario, ctx: &Context) -> Result<(), CliError> {
    let (f, g) = match super::model(s)? {
        Model::Singular { f, g } => (f, g),
        _ => return Err(CliError::Config("singular needs hamiltonian kind = \"singular\"".into())),
    };
    if let Some(st) = &s.state {
        if st.hbar != 1.0 {
            return Err(CliError::Config("the singular oscillator runs at hbar = 1".into()));
        }
    }
    let cfg = Scenario::require(&s.singular, "singular")?;
    let ts = times(s)?;
    let period = f.period();
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => periodic_alpha(&hill_monodromy(|t| f.value(t), period, cfg.dt)?)?.0,
    };
    let t_end = *ts.last().expect("non-empty time grid");
    let hcs = hill_complex_solution(|t| f.value(t), alpha, t_end, cfg.dt, Some(period))?;
    // one integration per requested time so the last sample lands on it exactly
    let at: Vec<(HillComplexSolution, usize)> = ts
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok((hcs.clone(), 0));
            }
            let sol = hill_complex_solution(|t| f.value(t), alpha, t, cfg.dt, None)?;
            let last = sol.times.len() - 1;
            Ok((sol, last))
        })
        .collect::<sce_core::Result<_>>()?;

    let grid = Grid1D::half_line(cfg.x_max, cfg.points)?;
    let xs = grid.points();
    let dx = grid.dx();
    let psi0 = singular_time_state(cfg.n, g, &hcs, 0, &xs)?;
    let inner = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * dx;

    let oracle = if cfg.oracle {
        let start = WavepacketGrid::new(psi0.clone(), grid.clone(), 1.0)?;
        let v = |x: f64, t: f64| 0.5 * f.value(t) * x * x + g * g / (x * x);
        let states = propagate_splitstep_sampled(&start, &Potential::TimeDependent(&v), &ts, cfg.dt)?;
        Some(states.iter().map(|p| inner(&psi0, &p.values).norm()).collect::<Vec<f64>>())
    } else {
        None
    };

    let mut csv = ctx.csv(&["t", "overlap_formula", "overlap_oracle", "norm", "u", "udot", "theta", "eq_residual"]);
    let mut worst_residual = 0.0f64;
    for (k, &t) in ts.iter().enumerate() {
        let (sol, idx) = &at[k];
        let idx = *idx;
        let psi = singular_time_state(cfg.n, g, sol, idx, &xs)?;
        let norm = inner(&psi, &psi).re;
        worst_residual = worst_residual.max(sol.eq_residual[idx].abs());
        csv.row(&[
            Field::F(t),
            Field::F(inner(&psi0, &psi).norm()),
            Field::Opt(oracle.as_ref().map(|o| o[k])),
            Field::F(norm),
            Field::F(sol.u[idx]),
            Field::F(sol.udot[idx]),
            Field::F(sol.theta[idx]),
            Field::F(sol.eq_residual[idx]),
        ]);
    }
    ctx.write("singular.csv", &csv.finish())?;
    ctx.write_json(
        "singular.json",
        &json!({
            "n": cfg.n,
            "g": g,
            "a": singular_index(g),
            "energy": 2.0 * cfg.n as f64 + singular_index(g) + 1.0,
            "alpha": alpha,
            "max_eq_residual": worst_residual,
            "periodicity_defect": hcs.periodicity_defect,
        }),
    )?;
    Ok(())
}

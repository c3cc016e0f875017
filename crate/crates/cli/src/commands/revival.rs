use serde_json::json;

use sce_core::classical_dynamics::flow_points;
use sce_core::quantum_oracle::{coherent_state, overlap, propagate_splitstep_sampled, Potential};
use sce_core::revivals::{revival_scan, ReturnRoute, ScanOptions};

use super::{grid, model, potential, times};
use crate::config::Scenario;
use crate::error::CliError;
use crate::output::{Context, Field};

pub fn run(s: &Scenario, ctx: &Context) -> Result<(), CliError> {
    let h = model(s)?;
    let state = Scenario::require(&s.state, "state")?;
    let run = Scenario::require(&s.revival, "revival")?;
    let alpha = state.alpha()?;
    let ts = times(s)?;
    let opts = ScanOptions { dt: run.dt, continuous: run.continuous, ..ScanOptions::default() };
    let rep = revival_scan(&h, &alpha, state.hbar, &ts, run.epsilon, opts)?;

    let oracle = match &run.oracle {
        None => None,
        Some(g) => {
            let v = potential(&h)?;
            let grid = grid(g)?;
            let p_max = flow_points(&h, &alpha, &ts, run.dt)?
                .iter()
                .fold(0.0f64, |m, z| m.max(z.p()[0].abs()));
            grid.check_resolution(p_max + 6.0 * state.hbar.sqrt(), state.hbar)?;
            let psi0 = coherent_state(&alpha, state.hbar, &grid)?;
            let states = propagate_splitstep_sampled(&psi0, &Potential::TimeDependent(&v), &ts, g.dt)?;
            Some(states.iter().map(|p| Ok(overlap(&psi0, p)?.norm())).collect::<sce_core::Result<Vec<f64>>>()?)
        }
    };

    let mut csv = ctx.csv(&["t", "R_semiclassical", "R_exact_quadratic", "R_oracle", "ct", "theta", "route"]);
    for (k, &t) in ts.iter().enumerate() {
        let route = match rep.route[k] {
            ReturnRoute::Semiclassical => "semiclassical",
            ReturnRoute::ExactQuadratic => "exact_quadratic",
            ReturnRoute::Undefined => "undefined",
        };
        csv.row(&[
            Field::F(t),
            Field::Opt(rep.r[k]),
            Field::Opt(rep.r_exact[k]),
            Field::Opt(oracle.as_ref().map(|o| o[k])),
            Field::F(rep.ct[k]),
            Field::Opt(rep.rotation_angle[k]),
            Field::S(route.into()),
        ]);
    }
    ctx.write("revival_scan.csv", &csv.finish())?;
    ctx.write_json(
        "revival_scan.json",
        &json!({
            "revival_times": rep.revival_times,
            "epsilon": rep.epsilon,
            "hbar": state.hbar,
            "alpha": state.alpha,
            "undefined_points": rep.route.iter().filter(|r| **r == ReturnRoute::Undefined).count(),
        }),
    )?;
    Ok(())
}

use rayon::prelude::*;
use serde_json::json;

use sce_core::classical_dynamics::{floquet_analyze, mathieu_zone_boundary};

use crate::config::Scenario;
use crate::error::CliError;
use crate::output::{Context, Field};

pub fn run(s: &Scenario, ctx: &Context) -> Result<(), CliError> {
    let cfg = Scenario::require(&s.floquet, "floquet")?;
    let omega = cfg.omega;
    let mus = cfg.mu.build()?;
    let cells: Vec<(f64, f64)> =
        cfg.lambda.build()?.into_iter().flat_map(|l| mus.iter().map(move |&m| (l, m))).collect();
    let data = cells
        .par_iter()
        .map(|&(l, m)| floquet_analyze(|t| l * (omega * t).cos() + m, omega, cfg.dt, cfg.modes))
        .collect::<sce_core::Result<Vec<_>>>()?;

    let mut csv = ctx.csv(&["lambda", "mu", "trace", "stable", "marginal", "rho", "growth_rate"]);
    for (&(l, m), d) in cells.iter().zip(&data) {
        csv.row(&[
            Field::F(l),
            Field::F(m),
            Field::F(d.trace),
            Field::B(d.stable),
            Field::B(d.marginal),
            Field::F(d.rho),
            Field::F(d.growth_rate),
        ]);
    }
    ctx.write("floquet.csv", &csv.finish())?;

    let mut boundary = Vec::new();
    if let Some(b) = &cfg.boundary {
        let lambdas = b.lambda.build()?;
        let mus = lambdas
            .par_iter()
            .map(|&l| mathieu_zone_boundary(l, omega, b.mu_lo, b.mu_hi, cfg.dt))
            .collect::<sce_core::Result<Vec<f64>>>()?;
        let mut csv = ctx.csv(&["lambda", "mu_boundary"]);
        for (&l, &m) in lambdas.iter().zip(&mus) {
            csv.row(&[Field::F(l), Field::F(m)]);
            boundary.push(json!({ "lambda": l, "mu": m }));
        }
        ctx.write("floquet_boundary.csv", &csv.finish())?;
    }
    ctx.write_json(
        "floquet.json",
        &json!({
            "cells": data.len(),
            "stable_cells": data.iter().filter(|d| d.stable).count(),
            "boundary": boundary,
        }),
    )?;
    Ok(())
}

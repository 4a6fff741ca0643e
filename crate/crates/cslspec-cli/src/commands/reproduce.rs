//! `reproduce`: recompute the headline numbers — the two era corrections at
//! the reference collapse rate, the rate bound, and (optionally) the
//! leading-kernel quadrature cross-checks — and verify each against its
//! published window. Any failed row exits with code 4.

use std::time::Instant;

use serde::Serialize;

use cslspec_core::units::LAMBDA_GRW_SI;
use cslspec_core::{
    delta_p_inflation_closed, delta_p_radiation_closed, delta_r2_numeric, lambda_bound, CslParams,
    EraTag, KernelVariant,
};

use super::Ctx;
use crate::output::{emit, fmt17};
use crate::{json_only_tabular, CliError, ReproduceArgs};

#[derive(Debug, Serialize)]
struct CheckRow {
    name: String,
    value: String,
    window: String,
    pass: bool,
    millis: u128,
}

#[derive(Debug, Serialize)]
struct Doc {
    command: String,
    rows: Vec<CheckRow>,
    all_pass: bool,
}

json_only_tabular!(Doc);

fn check(rows: &mut Vec<CheckRow>, name: &str, value: f64, lo: f64, hi: f64, t0: Instant) {
    rows.push(CheckRow {
        name: name.to_string(),
        value: fmt17(value),
        window: format!("[{lo:.1e}, {hi:.1e}]"),
        pass: value >= lo && value <= hi,
        millis: t0.elapsed().as_millis(),
    });
}

pub fn run(ctx: &Ctx, args: &ReproduceArgs) -> Result<(), CliError> {
    let p = &ctx.params;
    // Headlines are quoted at the GRW reference rate whatever λ the config
    // carries; the correction is linear in λ.
    let csl_grw = CslParams::new(
        LAMBDA_GRW_SI,
        p.csl.r_c_planck,
        p.csl.m0_planck,
        &p.consts,
    )?;
    let mut rows = Vec::new();

    let t0 = Instant::now();
    let dp_inf = delta_p_inflation_closed(&p.cosmo, &csl_grw);
    check(&mut rows, "inflation dP at GRW rate", dp_inf, 1e-35, 1e-33, t0);

    let t0 = Instant::now();
    let dp_rad = delta_p_radiation_closed(&p.cosmo, &csl_grw);
    check(&mut rows, "radiation dP at GRW rate", dp_rad, 1e-82, 1e-80, t0);

    let t0 = Instant::now();
    let lam = lambda_bound(dp_inf, args.sigma)?;
    check(&mut rows, "collapse-rate bound (1/s)", lam, 1e6, 1e8, t0);

    let t0 = Instant::now();
    let orders = (lam / 1e-10).log10();
    check(&mut rows, "orders above lab reference", orders, 16.0, 18.0, t0);

    if !args.skip_quadrature {
        for (era, closed) in [
            (EraTag::Inflation, dp_inf),
            (EraTag::Radiation, dp_rad),
        ] {
            ctx.note(format!("reproduce: {era:?} leading-kernel quadrature…"));
            let t0 = Instant::now();
            let result = delta_r2_numeric(
                era,
                KernelVariant::LeadingQuadratic,
                &p.cosmo,
                &csl_grw,
                &p.quad,
            )?;
            // The leading correction is k-flat; take the worst point of the
            // grid against the closed form.
            let worst = result
                .delta_p
                .iter()
                .map(|dp| (dp.to_f64() / closed - 1.0).abs())
                .fold(0.0f64, f64::max);
            check(
                &mut rows,
                &format!("{era} quadrature vs closed (rel dev)"),
                worst,
                0.0,
                0.05,
                t0,
            );
        }
    }

    println!("{:<38} {:>24} {:>20} {:>6} {:>8}", "check", "value", "window", "pass", "ms");
    for r in &rows {
        println!(
            "{:<38} {:>24} {:>20} {:>6} {:>8}",
            r.name,
            r.value,
            r.window,
            if r.pass { "PASS" } else { "FAIL" },
            r.millis
        );
    }
    let all_pass = rows.iter().all(|r| r.pass);
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.clone())
        .collect();
    let doc = Doc {
        command: "reproduce".into(),
        rows,
        all_pass,
    };
    if ctx.out.is_some() {
        emit(ctx.out.as_deref(), &doc)?;
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Reproduction(failed.join(", ")))
    }
}

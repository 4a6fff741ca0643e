//! `bound`: largest collapse rate compatible with an observational error
//! bar, from the inflation-era closed-form correction.

use serde::Serialize;

use cslspec_core::units::LAMBDA_GRW_SI;
use cslspec_core::{delta_p_inflation_closed, lambda_bound, CslParams};

use super::Ctx;
use crate::output::{emit, fmt17};
use crate::{json_only_tabular, BoundArgs, CliError};

#[derive(Debug, Serialize)]
struct Doc {
    command: String,
    sigma: String,
    /// Inflation correction produced by the GRW reference rate.
    delta_p_per_lambda_grw: String,
    lambda_max_si: String,
    reference_rate_si: String,
    /// log10(λ_max / reference): how far the cosmological bound sits above
    /// the laboratory one.
    orders_above_reference: String,
}

json_only_tabular!(Doc);

pub fn run(ctx: &Ctx, args: &BoundArgs) -> Result<(), CliError> {
    let p = &ctx.params;
    if !(args.reference_rate > 0.0) {
        return Err(CliError::Config("--reference-rate must be positive".into()));
    }
    // The correction is linear in λ; quote it at the GRW reference rate
    // regardless of the configured λ.
    let csl_grw = CslParams::new(
        LAMBDA_GRW_SI,
        p.csl.r_c_planck,
        p.csl.m0_planck,
        &p.consts,
    )?;
    let dp = delta_p_inflation_closed(&p.cosmo, &csl_grw);
    let lambda_max = lambda_bound(dp, args.sigma)?;
    let orders = (lambda_max / args.reference_rate).log10();
    ctx.note(format!(
        "bound: lambda_max = {lambda_max:e} 1/s ({orders:.2} orders above reference)"
    ));
    let doc = Doc {
        command: "bound".into(),
        sigma: fmt17(args.sigma),
        delta_p_per_lambda_grw: fmt17(dp),
        lambda_max_si: fmt17(lambda_max),
        reference_rate_si: fmt17(args.reference_rate),
        orders_above_reference: fmt17(orders),
    };
    emit(ctx.out.as_deref(), &doc)?;
    Ok(())
}

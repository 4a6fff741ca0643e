//! `correction`: collapse correction spectrum δP(q), by closed form or by
//! quadrature of the selected kernel.

use cslspec_core::{closed_form_result, delta_r2_numeric, EraTag, KernelVariant};

use super::Ctx;
use crate::output::{emit, SpectrumDoc};
use crate::{CliError, CorrectionArgs, MethodArg};

pub fn run(ctx: &Ctx, args: &CorrectionArgs) -> Result<(), CliError> {
    let p = &ctx.params;
    let era: EraTag = args.era.into();
    let variant: KernelVariant = args.variant.into();
    let method = match args.method {
        MethodArg::Auto => {
            if variant == KernelVariant::ExactQuadratic {
                MethodArg::Quadrature
            } else {
                MethodArg::ClosedForm
            }
        }
        m => m,
    };
    ctx.note(format!("correction: {era:?} {variant:?} via {method:?}"));
    let result = match method {
        MethodArg::ClosedForm => closed_form_result(era, variant, &p.cosmo, &p.csl, &p.quad)?,
        MethodArg::Quadrature => delta_r2_numeric(era, variant, &p.cosmo, &p.csl, &p.quad)?,
        MethodArg::Auto => unreachable!("resolved above"),
    };
    let doc = SpectrumDoc::from_result("correction", &result, p.consts.mpc_in_planck_inverse_mass);
    emit(ctx.out.as_deref(), &doc)?;
    Ok(())
}

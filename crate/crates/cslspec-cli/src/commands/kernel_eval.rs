//! `kernel`: one kernel variant at one phase-space point, optionally checked
//! against the big-float oracle.

use serde::Serialize;

use cslspec_core::{
    kernel_exact, kernel_exact_oracle, kernel_exact_symmetrized, kernel_exact_transcribed,
    kernel_leading, kernel_linear, EraTag, KernelEval,
};

use super::Ctx;
use crate::output::{emit, fmt17, ScaledOut};
use crate::{json_only_tabular, CliError, KernelArgs, KernelChoice};

#[derive(Debug, Serialize)]
struct Doc {
    command: String,
    era: String,
    variant: String,
    p: String,
    q: String,
    costheta: String,
    eta_prime: String,
    value: ScaledOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleCheck>,
}

#[derive(Debug, Serialize)]
struct OracleCheck {
    bits: usize,
    value: ScaledOut,
    rel_dev: String,
}

json_only_tabular!(Doc);

pub fn run(ctx: &Ctx, args: &KernelArgs) -> Result<(), CliError> {
    let cosmo = &ctx.params.cosmo;
    let era: EraTag = args.era.into();
    let (p, q, w, ep) = (args.p, args.q, args.costheta, args.eta_prime);
    let eval: KernelEval = match args.variant {
        KernelChoice::Exact => kernel_exact(era, cosmo, p, q, w, ep)?,
        KernelChoice::ExactTranscribed => kernel_exact_transcribed(era, cosmo, p, q, w, ep)?,
        KernelChoice::ExactSymmetrized => kernel_exact_symmetrized(era, cosmo, p, q, w, ep)?,
        KernelChoice::Leading => kernel_leading(era, cosmo, p, q, ep, true)?,
        KernelChoice::LeadingTwoTerm => kernel_leading(era, cosmo, p, q, ep, false)?,
        KernelChoice::Linearized => {
            if era != EraTag::Inflation {
                return Err(CliError::Config(
                    "the linearized kernel is defined for the inflation era only".into(),
                ));
            }
            kernel_linear(cosmo, q, ep, false)?
        }
    };

    let oracle = match args.oracle_bits {
        Some(bits) => {
            let exact_variant = matches!(
                args.variant,
                KernelChoice::Exact | KernelChoice::ExactTranscribed
            );
            if !exact_variant {
                return Err(CliError::Config(
                    "--oracle-bits applies to the exact (unsymmetrized) kernel variants".into(),
                ));
            }
            let o = kernel_exact_oracle(era, cosmo, p, q, w, ep, bits)?;
            let dev = {
                let diff = eval.value.sub(o.value).abs();
                if diff.is_zero() {
                    0.0
                } else {
                    diff.div(o.value.abs()).to_f64()
                }
            };
            Some(OracleCheck {
                bits,
                value: ScaledOut::from_scaled(o.value),
                rel_dev: fmt17(dev),
            })
        }
        None => None,
    };

    let doc = Doc {
        command: "kernel".into(),
        era: era.to_string(),
        variant: format!("{:?}", args.variant),
        p: fmt17(p),
        q: fmt17(q),
        costheta: fmt17(w),
        eta_prime: fmt17(ep),
        value: ScaledOut::from_scaled(eval.value),
        oracle,
    };
    emit(ctx.out.as_deref(), &doc)?;
    Ok(())
}

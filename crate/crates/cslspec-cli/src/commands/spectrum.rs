//! `spectrum`: the standard curvature power spectrum on a log k-grid.

use serde::Serialize;

use cslspec_core::{power_spectrum_standard, Era, EraTag};

use super::{log_grid, Ctx};
use crate::output::{emit, fmt17, Tabular};
use crate::{CliError, SpectrumArgs};

#[derive(Debug, Serialize)]
struct Row {
    k_planck: String,
    k_mpc_inv: String,
    p_standard: String,
}

#[derive(Debug, Serialize)]
struct Doc {
    command: String,
    era: String,
    eta: String,
    rows: Vec<Row>,
}

impl Tabular for Doc {
    fn write_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        for row in &self.rows {
            w.serialize(row)?;
        }
        Ok(())
    }
}

pub fn run(ctx: &Ctx, args: &SpectrumArgs) -> Result<(), CliError> {
    let p = &ctx.params;
    let tag: EraTag = args.era.into();
    let era = match tag {
        EraTag::Inflation => Era::inflation(&p.cosmo),
        EraTag::Radiation => Era::radiation(),
    };
    let eta = args.eta.unwrap_or(match tag {
        EraTag::Inflation => p.cosmo.eta_e,
        EraTag::Radiation => p.cosmo.eta_r,
    });
    let (lo, hi) = p.quad.q_window;
    let k_min = args.k_min.unwrap_or(lo);
    let k_max = args.k_max.unwrap_or(hi);
    let n = args.points.unwrap_or(p.quad.n_q);
    if !(k_min > 0.0 && k_max > k_min) {
        return Err(CliError::Config("need 0 < k-min < k-max".into()));
    }
    if n < 2 {
        return Err(CliError::Config("--points must be at least 2".into()));
    }

    let mut rows = Vec::with_capacity(n);
    for k in log_grid(k_min, k_max, n) {
        let ps = power_spectrum_standard(k, eta, &era, &p.cosmo)?;
        rows.push(Row {
            k_planck: fmt17(k),
            k_mpc_inv: fmt17(p.consts.wavenumber_planck_to_mpc(k)?),
            p_standard: fmt17(ps),
        });
    }
    ctx.note(format!("spectrum: {} points at eta = {eta:e}", rows.len()));
    let doc = Doc {
        command: "spectrum".into(),
        era: tag.to_string(),
        eta: fmt17(eta),
        rows,
    };
    emit(ctx.out.as_deref(), &doc)?;
    Ok(())
}

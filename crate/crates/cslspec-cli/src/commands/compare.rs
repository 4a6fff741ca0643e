//! `compare-kernels`: evaluate the exact kernel through its two independent
//! production routes — the direct transcription and the coefficient
//! composition with the matching end-time attachment — at random points, and
//! report the worst relative deviation.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use cslspec_core::{
    kernel_exact_arranged, kernel_exact_transcribed, transcribed_attachment, EraTag, Scaled,
};

use super::Ctx;
use crate::output::{emit, fmt17};
use crate::{json_only_tabular, CliError, CompareKernelsArgs};

#[derive(Debug, Serialize)]
struct Point {
    p: String,
    q: String,
    costheta: String,
    eta_prime: String,
}

#[derive(Debug, Serialize)]
struct EraReport {
    era: String,
    points: usize,
    max_rel_dev: String,
    worst_point: Point,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct Doc {
    command: String,
    tol: String,
    reports: Vec<EraReport>,
}

json_only_tabular!(Doc);

fn uniform(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * 2f64.powi(-53)
}

/// Log-uniform draw over [10^a, 10^b].
fn log_uniform(rng: &mut ChaCha12Rng, a: f64, b: f64) -> f64 {
    10f64.powf(a + (b - a) * uniform(rng))
}

pub fn run(ctx: &Ctx, args: &CompareKernelsArgs) -> Result<(), CliError> {
    if args.points == 0 {
        return Err(CliError::Config("--points must be at least 1".into()));
    }
    let eras: Vec<EraTag> = match args.era {
        Some(e) => vec![e.into()],
        None => vec![EraTag::Inflation, EraTag::Radiation],
    };
    let cosmo = &ctx.params.cosmo;
    let mut reports = Vec::new();
    for era in eras {
        // Independent stream per era so single-era runs replay the same
        // points as the combined run.
        let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
        rng.set_stream(match era {
            EraTag::Inflation => 0,
            EraTag::Radiation => 1,
        });
        let mut worst = 0.0f64;
        let mut worst_pt = (0.0, 0.0, 0.0, 0.0);
        for i in 0..args.points {
            let (p, q, w, ep) = match era {
                EraTag::Inflation => {
                    // η′ across the inflation window, momenta from three
                    // decades inside the horizon to three outside.
                    let lo = cosmo.eta_e.abs().log10() + 0.2;
                    let hi = cosmo.eta0.abs().log10() - 0.2;
                    let ep = -log_uniform(&mut rng, lo, hi);
                    let p = log_uniform(&mut rng, -3.0, 1.5) / ep.abs();
                    let q = log_uniform(&mut rng, -3.0, 1.5) / ep.abs();
                    (p, q, 2.0 * uniform(&mut rng) - 1.0, ep)
                }
                EraTag::Radiation => {
                    // η′ − η_e spans from just after the transition to the
                    // end of the era; momenta scaled to the transition time.
                    let smax = (cosmo.eta_r - cosmo.eta_e).log10() - 0.05;
                    let smin = cosmo.eta_e.abs().log10() - 2.0;
                    let s = log_uniform(&mut rng, smin, smax);
                    let ep = cosmo.eta_e + s;
                    let p = log_uniform(&mut rng, -2.0, 1.0) / cosmo.eta_e.abs();
                    let q = log_uniform(&mut rng, -2.0, 1.0) / cosmo.eta_e.abs();
                    (p, q, 2.0 * uniform(&mut rng) - 1.0, ep)
                }
            };
            let a = kernel_exact_transcribed(era, cosmo, p, q, w, ep)?.value;
            let b =
                kernel_exact_arranged(era, cosmo, p, q, w, ep, transcribed_attachment(era))?.value;
            let dev = rel_dev(a, b);
            if dev > worst {
                worst = dev;
                worst_pt = (p, q, w, ep);
            }
            if ctx.verbose > 1 {
                eprintln!("[{era:?} {i:4}] dev {dev:.3e} at p={p:e} q={q:e} w={w:+.3} eta'={ep:e}");
            }
        }
        ctx.note(format!("{era:?}: max deviation {worst:.3e} over {} points", args.points));
        reports.push(EraReport {
            era: era.to_string(),
            points: args.points,
            max_rel_dev: fmt17(worst),
            worst_point: Point {
                p: fmt17(worst_pt.0),
                q: fmt17(worst_pt.1),
                costheta: fmt17(worst_pt.2),
                eta_prime: fmt17(worst_pt.3),
            },
            pass: worst <= args.tol,
        });
    }
    let all_pass = reports.iter().all(|r| r.pass);
    let doc = Doc {
        command: "compare-kernels".into(),
        tol: fmt17(args.tol),
        reports,
    };
    emit(ctx.out.as_deref(), &doc)?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "kernel evaluation routes disagree beyond {:.1e}",
            args.tol
        )))
    }
}

/// |a − b| / max(|a|, |b|), in scaled arithmetic, 0 when both vanish.
fn rel_dev(a: Scaled, b: Scaled) -> f64 {
    let diff = a.sub(b).abs();
    if diff.is_zero() {
        return 0.0;
    }
    let scale = if a.abs().cmp_abs(b.abs()) == std::cmp::Ordering::Greater {
        a.abs()
    } else {
        b.abs()
    };
    diff.div(scale).to_f64()
}

//! Stochastic-trajectory route: the linear unraveling
//!
//!   dψ = −i H ψ dt − i √γ L ψ ∘ dW        (Stratonovich)
//!
//! integrated with the stochastic Heun predictor–corrector, which is
//! consistent with the Stratonovich reading of the multiplicative noise.
//! Averaging ψψ† over realizations reproduces the double-commutator master
//! equation exactly, so the estimator is the *plain* mean of ⟨ψ|O|ψ⟩ — no
//! renormalization and no importance weights.
//!
//! Noise streams are counter-based: every trajectory derives its generator
//! from `(master_seed, trajectory_index)`, so results are independent of
//! scheduling and thread count, and any single path can be replayed alone.

use std::f64::consts::TAU;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use super::{expectation, hermiticity_defect, CMat, CVec, ToySystem};
use crate::error::CoreError;
use num_complex::Complex64;

/// Upper bound on `γ · dt · ‖L‖²` below which the Heun step resolves the
/// noise; violating it is a configuration error, not a numerical one.
const NOISE_STEP_BOUND: f64 = 0.1;

/// One stochastic realization, recorded at every step.
///
/// `states` are the raw (linear-unraveling) vectors; their norms are exposed
/// separately by [`Trajectory::norms`] rather than folded into the states,
/// so estimator code cannot silently assume normalization.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub seed: u64,
    pub stream: u64,
    pub times: Vec<f64>,
    pub states: Vec<CVec>,
}

impl Trajectory {
    /// Euclidean norm of the state at each recorded time.
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.norm()).collect()
    }

    /// Raw `⟨ψ|O|ψ⟩` along the path (no renormalization).
    pub fn expectations(&self, observable: &CMat) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| expectation(observable, s))
            .collect()
    }
}

/// Ensemble summary for one observable at the final time.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub mean: f64,
    pub std_error: f64,
    pub n_traj: usize,
}

/// Evolve a single realization from `psi0` over `n_steps` steps of size `dt`.
///
/// Preconditions: `psi0` normalized to 1e-12 and `γ · dt · ‖L‖² < 0.1`
/// (spectral norm), otherwise the step cannot resolve the noise and the call
/// is rejected. The same `(seed, stream)` pair always reproduces the same
/// path bit for bit.
pub fn evolve_trajectory(
    system: &ToySystem,
    psi0: &CVec,
    dt: f64,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<Trajectory, CoreError> {
    validate_step_inputs(system, psi0, dt, n_steps)?;
    let stepper = HeunStepper::new(system);
    let mut rng = trajectory_rng(seed, stream);

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    states.push(psi0.clone());

    let mut psi = psi0.clone();
    for step in 0..n_steps {
        psi = stepper.step(&psi, dt, &mut rng);
        ensure_finite(&psi, step)?;
        times.push(dt * (step + 1) as f64);
        states.push(psi.clone());
    }
    Ok(Trajectory {
        seed,
        stream,
        times,
        states,
    })
}

/// Mean and standard error of `⟨ψ|O|ψ⟩` at the final time for each
/// observable, over `n_traj` trajectories with streams `0..n_traj`.
///
/// All observables are evaluated on the same realizations (paired
/// estimates). Trajectories run in parallel but are reduced in index order,
/// so the result is identical for any thread count.
pub fn ensemble_expectations(
    system: &ToySystem,
    psi0: &CVec,
    observables: &[CMat],
    dt: f64,
    n_steps: usize,
    n_traj: usize,
    master_seed: u64,
) -> Result<Vec<EnsembleStats>, CoreError> {
    validate_step_inputs(system, psi0, dt, n_steps)?;
    if n_traj < 2 {
        return Err(CoreError::validation(
            "n_traj",
            "need at least 2 trajectories for a standard error",
        ));
    }
    for obs in observables {
        if obs.nrows() != system.dim || obs.ncols() != system.dim {
            return Err(CoreError::validation(
                "observable",
                "shape must match system dim",
            ));
        }
        let defect = hermiticity_defect(obs);
        if !(defect <= 1e-12) {
            return Err(CoreError::validation(
                "observable",
                format!("not Hermitian: defect {defect:.3e}"),
            ));
        }
    }

    let stepper = HeunStepper::new(system);
    // One row of final-time expectations per trajectory, indexed by stream.
    let rows: Vec<Vec<f64>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|stream| -> Result<Vec<f64>, CoreError> {
            let mut rng = trajectory_rng(master_seed, stream);
            let mut psi = psi0.clone();
            for step in 0..n_steps {
                psi = stepper.step(&psi, dt, &mut rng);
                ensure_finite(&psi, step)?;
            }
            Ok(observables
                .iter()
                .map(|obs| expectation(obs, &psi))
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = n_traj as f64;
    let stats = (0..observables.len())
        .map(|k| {
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            EnsembleStats {
                mean,
                std_error: (var / n).sqrt(),
                n_traj,
            }
        })
        .collect();
    Ok(stats)
}

/// Single-observable convenience wrapper around [`ensemble_expectations`].
pub fn ensemble_expectation(
    system: &ToySystem,
    psi0: &CVec,
    observable: &CMat,
    dt: f64,
    n_steps: usize,
    n_traj: usize,
    master_seed: u64,
) -> Result<EnsembleStats, CoreError> {
    let mut stats = ensemble_expectations(
        system,
        psi0,
        std::slice::from_ref(observable),
        dt,
        n_steps,
        n_traj,
        master_seed,
    )?;
    Ok(stats.pop().expect("one observable in, one stat out"))
}

/// Heun step for the linear unraveling, with the constant matrices
/// `−iH` and `−i√γL` precomputed.
struct HeunStepper {
    drift: CMat,     // −i H
    diffusion: CMat, // −i √γ L
}

impl HeunStepper {
    fn new(system: &ToySystem) -> Self {
        let minus_i = Complex64::new(0.0, -1.0);
        HeunStepper {
            drift: &system.hamiltonian * minus_i,
            diffusion: &system.collapse_op * (minus_i * system.gamma_eff.sqrt()),
        }
    }

    fn step(&self, psi: &CVec, dt: f64, rng: &mut ChaCha12Rng) -> CVec {
        let xi = standard_normal(rng) * dt.sqrt();
        let dt_c = Complex64::new(dt, 0.0);
        let xi_c = Complex64::new(xi, 0.0);
        let f0 = &self.drift * psi;
        let g0 = &self.diffusion * psi;
        let pred = psi + &f0 * dt_c + &g0 * xi_c;
        let f1 = &self.drift * &pred;
        let g1 = &self.diffusion * &pred;
        psi + (f0 + f1) * (dt_c * 0.5) + (g0 + g1) * (xi_c * 0.5)
    }
}

/// Deterministic per-trajectory generator: the master seed fixes the key and
/// the trajectory index selects an independent counter stream.
fn trajectory_rng(master_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal via Box–Muller on 53-bit uniforms; the first uniform is
/// shifted into (0, 1] so the logarithm never sees zero.
fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * 2f64.powi(-53);
    let u2 = (rng.next_u64() >> 11) as f64 * 2f64.powi(-53);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn validate_step_inputs(
    system: &ToySystem,
    psi0: &CVec,
    dt: f64,
    n_steps: usize,
) -> Result<(), CoreError> {
    if psi0.len() != system.dim {
        return Err(CoreError::validation("psi0", "length must match system dim"));
    }
    if (psi0.norm() - 1.0).abs() > 1e-12 {
        return Err(CoreError::validation(
            "psi0",
            format!("must be normalized, got |psi0| = {}", psi0.norm()),
        ));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CoreError::validation("dt", "must be positive and finite"));
    }
    if n_steps == 0 {
        return Err(CoreError::validation("n_steps", "must be at least 1"));
    }
    let noise_phase = system.gamma_eff * dt * system.collapse_norm().powi(2);
    if noise_phase >= NOISE_STEP_BOUND {
        return Err(CoreError::validation(
            "dt",
            format!(
                "step too coarse for the noise: gamma_eff*dt*|L|^2 = {noise_phase:.3e} \
                 must stay below {NOISE_STEP_BOUND}"
            ),
        ));
    }
    Ok(())
}

fn ensure_finite(psi: &CVec, step: usize) -> Result<(), CoreError> {
    if psi.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(CoreError::numerical(format!(
            "trajectory state became non-finite at step {step}"
        )))
    }
}

//! Curvature power spectrum and its collapse-induced corrections.
//!
//! The standard spectrum comes straight from the mode functions:
//! P(k) = (k³/2π²)·|v_k|²/z². Corrections are assembled as
//!
//!   δP(q) = C · q³ · Σ_η′ m_η′ · I(q, η′) / a(η′)⁴,
//!
//! where the η′ sum is a panelled Gauss–Legendre rule over the era's time
//! window (log-spaced, with phase-aware subdivision for oscillatory
//! integrands) and I is the momentum-shell integral of the correction
//! kernel against the collapse Gaussian,
//!
//!   I(q, η′) = 2π ∫ p² dp ∫ dμ e^{−β(p² + q² + 2pqμ)} · 𝓕(p, q, μ; η′),
//!
//! with β = (r_C/a(η′))². Three routes share this scaffolding:
//!
//! * `LeadingQuadratic` — the superhorizon kernel is independent of the
//!   internal direction, so the shell integral collapses to the Gaussian
//!   ball mass 4π β^{−3/2} M(cutoff) and only the time sum remains.
//! * `ExactQuadratic` — full tensor-product quadrature. The p-axis gets a
//!   linear refinement band across the Gaussian shell |p − q| ≤ √(cutoff/β)
//!   when that shell is narrow; the angular axis gets a boundary band plus
//!   geometrically growing tail panels when the exponent is steep in μ.
//!   Note the exact kernel grows like 1/p³ toward small p, so the shell
//!   integral is logarithmically sensitive to the infrared edge of the
//!   p-window (`p_decades`); the leading route is free of this because the
//!   divergent parts cancel under symmetrization before integration.
//! * `Linearized` — the linear-operator kernel depends on the external
//!   momentum only, leaving a single damped time integral.
//!
//! Each route is evaluated at increasing grid densities (1×, 2×, 4×); the
//! run converges when consecutive densities agree to `rel_tol` across the
//! whole q-grid, otherwise the finest result is returned inside a
//! non-convergence error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::background::{CosmoParams, Era, EraTag};
use crate::error::CoreError;
use crate::kernels::{self, EndArrangement, KernelVariant};
use crate::modes;
use crate::quadrature::gauss_legendre;
use crate::scaled::{scaled_sum, Scaled};
use crate::units::{PlanckConstants, LAMBDA_GRW_SI, NUCLEON_MASS_PLANCK, R_C_GRW_PLANCK};

/// Collapse-model parameters in the units the integrator works in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CslParams {
    /// Collapse rate in s⁻¹.
    pub lambda_si: f64,
    /// Collapse rate in Planck units, derived from `lambda_si`.
    pub lambda_planck: f64,
    /// Collapse correlation length in inverse Planck masses.
    pub r_c_planck: f64,
    /// Reference mass (nucleon) in Planck masses.
    pub m0_planck: f64,
    /// GRW reference rate that bounds are quoted against, s⁻¹.
    pub lambda_grw_si: f64,
}

impl CslParams {
    /// Build a parameter set from the SI collapse rate, deriving the
    /// Planck-unit rate through the supplied constants.
    pub fn new(
        lambda_si: f64,
        r_c_planck: f64,
        m0_planck: f64,
        consts: &PlanckConstants,
    ) -> Result<CslParams, CoreError> {
        let params = CslParams {
            lambda_si,
            lambda_planck: consts.rate_si_to_planck(lambda_si)?,
            r_c_planck,
            m0_planck,
            lambda_grw_si: LAMBDA_GRW_SI,
        };
        params.validate(consts)?;
        Ok(params)
    }

    /// Fiducial collapse parameters: λ = λ_GRW = 10⁻¹⁶ s⁻¹, r_C at its
    /// conventionally quoted Planck-unit value, m₀ the nucleon mass.
    pub fn fiducial(consts: &PlanckConstants) -> CslParams {
        CslParams::new(LAMBDA_GRW_SI, R_C_GRW_PLANCK, NUCLEON_MASS_PLANCK, consts)
            .expect("fiducial collapse parameters are valid")
    }

    /// Check internal consistency: positive scales and a Planck-unit rate
    /// that matches the SI rate through the unit chain.
    pub fn validate(&self, consts: &PlanckConstants) -> Result<(), CoreError> {
        if !self.lambda_si.is_finite() || self.lambda_si < 0.0 {
            return Err(CoreError::validation(
                "lambda_si",
                "must be finite and non-negative",
            ));
        }
        for (name, v) in [
            ("r_c_planck", self.r_c_planck),
            ("m0_planck", self.m0_planck),
            ("lambda_grw_si", self.lambda_grw_si),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CoreError::validation(name, "must be finite and positive"));
            }
        }
        let expected = consts.rate_si_to_planck(self.lambda_si)?;
        let scale = expected.abs().max(self.lambda_planck.abs());
        if scale > 0.0 && (self.lambda_planck - expected).abs() > 1e-14 * scale {
            return Err(CoreError::validation(
                "lambda_planck",
                "inconsistent with lambda_si under the unit conversion",
            ));
        }
        if scale == 0.0 && self.lambda_planck != 0.0 {
            return Err(CoreError::validation(
                "lambda_planck",
                "must vanish when lambda_si does",
            ));
        }
        Ok(())
    }
}

/// Grid and tolerance knobs for the correction quadratures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// External momentum window (q_lo, q_hi) in Planck units.
    pub q_window: (f64, f64),
    /// Number of log-uniform external momenta across the window.
    pub n_q: usize,
    /// Decades of internal momentum kept below q: p_lo = q·10^(−p_decades).
    pub p_decades: u32,
    /// Base log-panel density for the p-axis and the time axis.
    pub points_per_decade: usize,
    /// Gauss–Legendre order used on every axis.
    pub costheta_order: usize,
    /// Base log-panel density for the time axis.
    pub eta_points_per_decade: usize,
    /// Relative agreement between successive grid densities required for
    /// convergence. Must lie in (0, 0.1].
    pub rel_tol: f64,
    /// Gaussian support cutoff: the shell integral keeps exponents up to
    /// this value (e^−36 ≈ 2.3e-16 at the default).
    pub gaussian_cutoff: f64,
    /// Integrate the radiation-era shell over the full momentum window
    /// instead of cutting at the superhorizon scale p ≤ 1/|η′|.
    pub full_window: bool,
    /// Keep the two time-damped terms of the leading inflation kernel in
    /// addition to the dominant superhorizon pair.
    pub four_term: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            q_window: (2e-62, 2e-58),
            n_q: 9,
            p_decades: 3,
            points_per_decade: 4,
            costheta_order: 8,
            eta_points_per_decade: 4,
            rel_tol: 1e-2,
            gaussian_cutoff: 36.0,
            full_window: false,
            four_term: true,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        let (lo, hi) = self.q_window;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return Err(CoreError::validation(
                "q_window",
                "must be finite with 0 < q_lo < q_hi",
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 0.1) {
            return Err(CoreError::validation("rel_tol", "must lie in (0, 0.1]"));
        }
        for (name, v) in [
            ("n_q", self.n_q),
            ("points_per_decade", self.points_per_decade),
            ("costheta_order", self.costheta_order),
            ("eta_points_per_decade", self.eta_points_per_decade),
        ] {
            if v < 2 {
                return Err(CoreError::validation(name, "must be at least 2"));
            }
        }
        if self.p_decades < 1 {
            return Err(CoreError::validation("p_decades", "must be at least 1"));
        }
        if !(self.gaussian_cutoff >= 1.0 && self.gaussian_cutoff <= 700.0) {
            return Err(CoreError::validation(
                "gaussian_cutoff",
                "must lie in [1, 700]",
            ));
        }
        Ok(())
    }
}

/// How a spectrum result was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

/// Everything that went into a run, for reproducibility of the output.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParamsSnapshot {
    pub cosmo: CosmoParams,
    pub csl: CslParams,
    pub quadrature: QuadratureConfig,
}

/// A correction spectrum over the external momentum grid. `delta_p` is kept
/// in scaled form because the linearized correction overflows f64 range;
/// `delta_r2` is the log-trapezoid of `delta_p` over the window.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    pub k_grid: Vec<f64>,
    pub p_standard: Vec<f64>,
    pub delta_p: Vec<Scaled>,
    pub delta_r2: Scaled,
    pub method: Method,
    pub kernel_variant: KernelVariant,
    pub era: EraTag,
    pub error_estimate: f64,
    pub params_snapshot: ParamsSnapshot,
}

/// Standard spectrum of the comoving curvature perturbation,
/// P(k) = (k³/2π²)·|v_k(η)|²/z(η)². On superhorizon scales during
/// inflation this limits to H²/(8π²ε), independent of k and η.
pub fn power_spectrum_standard(
    k: f64,
    eta: f64,
    era: &Era,
    params: &CosmoParams,
) -> Result<f64, CoreError> {
    let state = match era.tag {
        EraTag::Inflation => modes::mode_inflation(k, eta)?,
        EraTag::Radiation => modes::mode_radiation(k, eta, params.eta_e, params.eps_inf)?,
    };
    let z = crate::background::z_factor(params, era, eta)?;
    Ok(k.powi(3) / (2.0 * PI * PI) * state.v.norm_sqr() / (z * z))
}

/// Closed-form inflation-era correction per unit λ-spectrum:
/// δP = −(17/36)·λ H³/(π² ε m₀²)·ln(η_e/η₀). Positive, k-independent.
pub fn delta_p_inflation_closed(params: &CosmoParams, csl: &CslParams) -> f64 {
    let log = (params.eta_e / params.eta0).ln();
    -(17.0 / 36.0) * csl.lambda_planck * params.h_inf.powi(3)
        / (PI * PI * params.eps_inf * csl.m0_planck.powi(2))
        * log
}

/// Closed-form radiation-era correction:
/// δP = (9/2)·λ H³ η_e²/(π² ε³ m₀² (η_r − 2η_e)²)·ln((2η_e − η_r)/η_e).
pub fn delta_p_radiation_closed(params: &CosmoParams, csl: &CslParams) -> f64 {
    let span = params.eta_r - 2.0 * params.eta_e;
    let log = ((2.0 * params.eta_e - params.eta_r) / params.eta_e).ln();
    4.5 * csl.lambda_planck * params.h_inf.powi(3) * params.eta_e.powi(2)
        / (PI * PI * params.eps_inf.powi(3) * csl.m0_planck.powi(2) * span * span)
        * log
}

/// Closed-form correction for the linearized collapse operator:
/// δP(q) = ε² λ H⁵ / (m₀² q⁸ r_C⁴). Strongly scale-dependent and
/// astronomically large at CMB momenta, hence the scaled return.
pub fn delta_p_linear_closed(q: f64, params: &CosmoParams, csl: &CslParams) -> Scaled {
    debug_assert!(q > 0.0);
    let num = Scaled::from_f64(params.eps_inf)
        .powi(2)
        .mul(Scaled::from_f64(csl.lambda_planck))
        .mul(Scaled::from_f64(params.h_inf).powi(5));
    let den = Scaled::from_f64(csl.m0_planck)
        .powi(2)
        .mul(Scaled::from_f64(q).powi(8))
        .mul(Scaled::from_f64(csl.r_c_planck).powi(4));
    num.div(den)
}

/// Largest collapse rate compatible with an observational error bar on the
/// spectrum amplitude, given the correction produced by the GRW reference
/// rate: λ_max = λ_GRW · σ_obs / δP(λ_GRW).
pub fn lambda_bound(
    delta_p_per_lambda_grw: f64,
    observational_error: f64,
) -> Result<f64, CoreError> {
    if !(delta_p_per_lambda_grw.is_finite() && delta_p_per_lambda_grw > 0.0) {
        return Err(CoreError::domain(
            "correction per reference rate must be finite and positive",
        ));
    }
    if !(observational_error.is_finite() && observational_error > 0.0) {
        return Err(CoreError::domain(
            "observational error must be finite and positive",
        ));
    }
    Ok(LAMBDA_GRW_SI * observational_error / delta_p_per_lambda_grw)
}

// ---------------------------------------------------------------------------
// quadrature engine
// ---------------------------------------------------------------------------

struct EtaNode {
    eta: f64,
    /// Positive measure d|η′| (inflation) or dw (radiation) carried by the
    /// node, including the log-space jacobian.
    weight: f64,
}

/// Scale factor inside an era; callers only pass in-window times.
fn era_scale(era: EraTag, params: &CosmoParams, eta: f64) -> f64 {
    match era {
        EraTag::Inflation => -1.0 / (params.h_inf * eta),
        EraTag::Radiation => (eta - 2.0 * params.eta_e) / (params.h_inf * params.eta_e.powi(2)),
    }
}

/// Gauss–Legendre nodes over [a, b] split into `n` uniform panels, each
/// further subdivided so that no sub-panel spans more than one period of
/// the integrand's fastest phase (`freq`, radians per unit coordinate),
/// capped at `max_sub` subdivisions.
fn panel_nodes_subdivided(
    a: f64,
    b: f64,
    n: usize,
    order: usize,
    freq: &dyn Fn(f64, f64) -> f64,
    max_sub: usize,
) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(order);
    let n = n.max(1);
    let mut nodes = Vec::with_capacity(n * order);
    for i in 0..n {
        let pa = a + (b - a) * i as f64 / n as f64;
        let pb = a + (b - a) * (i + 1) as f64 / n as f64;
        let cycles = freq(pa, pb) * (pb - pa) / (2.0 * PI);
        let n_sub = if cycles.is_finite() && cycles > 1.0 {
            (cycles.ceil() as usize).min(max_sub.max(1))
        } else {
            1
        };
        for s in 0..n_sub {
            let sa = pa + (pb - pa) * s as f64 / n_sub as f64;
            let sb = pa + (pb - pa) * (s + 1) as f64 / n_sub as f64;
            let half = 0.5 * (sb - sa);
            let mid = 0.5 * (sa + sb);
            for &(x, w) in gl.iter() {
                nodes.push((mid + half * x, w * half));
            }
        }
    }
    nodes
}

/// Log-spaced nodes over a positive coordinate range: `per_decade`·density
/// panels per decade in ln x, phase-subdivided, with the jacobian folded
/// into the weights. `freq` is quoted per unit x.
fn log_nodes(
    x_lo: f64,
    x_hi: f64,
    per_decade: usize,
    order: usize,
    density: usize,
    freq: &dyn Fn(f64, f64) -> f64,
    max_sub: usize,
) -> Vec<(f64, f64)> {
    let t_lo = x_lo.ln();
    let t_hi = x_hi.ln();
    let decades = (t_hi - t_lo) / std::f64::consts::LN_10;
    let n = (((decades * per_decade as f64).ceil() as usize).max(1) * density.max(1)).max(2);
    // conservative phase estimate: fastest frequency times the panel's x-span
    let freq_t = |t1: f64, t2: f64| -> f64 {
        let (x1, x2) = (t1.exp(), t2.exp());
        if t2 <= t1 {
            return 0.0;
        }
        freq(x1, x2) * (x2 - x1) / (t2 - t1)
    };
    panel_nodes_subdivided(t_lo, t_hi, n, order, &freq_t, max_sub)
        .into_iter()
        .map(|(t, w)| {
            let x = t.exp();
            (x, x * w)
        })
        .collect()
}

/// Time grid for an era. `freq` gives the integrand's fastest phase rate at
/// a panel, as a function of the panel's positive-coordinate edges
/// (|η′| during inflation, w = η′ − 2η_e during radiation).
fn eta_grid(
    era: EraTag,
    params: &CosmoParams,
    cfg: &QuadratureConfig,
    density: usize,
    freq: &dyn Fn(f64, f64) -> f64,
) -> Vec<EtaNode> {
    let max_sub = 64 * density.max(1);
    match era {
        EraTag::Inflation => log_nodes(
            params.eta_e.abs(),
            params.eta0.abs(),
            cfg.eta_points_per_decade,
            cfg.costheta_order,
            density,
            freq,
            max_sub,
        )
        .into_iter()
        .map(|(x, w)| EtaNode { eta: -x, weight: w })
        .collect(),
        EraTag::Radiation => log_nodes(
            params.eta_e.abs(),
            params.eta_r - 2.0 * params.eta_e,
            cfg.eta_points_per_decade,
            cfg.costheta_order,
            density,
            freq,
            max_sub,
        )
        .into_iter()
        .map(|(x, w)| EtaNode {
            eta: x + 2.0 * params.eta_e,
            weight: w,
        })
        .collect(),
    }
}

/// Era prefactor C in δP(q) = C·q³·Σ m·I/a⁴.
fn correction_prefactor(era: EraTag, params: &CosmoParams, csl: &CslParams) -> Scaled {
    let lam = Scaled::from_f64(csl.lambda_planck);
    let rc3 = Scaled::from_f64(csl.r_c_planck).powi(3);
    let m02 = Scaled::from_f64(csl.m0_planck).powi(2);
    let pi45 = Scaled::from_f64(PI).powi(4).mul(Scaled::from_f64(PI.sqrt()));
    let (coeff, a_end) = match era {
        EraTag::Inflation => (8.0 * params.eps_inf, era_scale(era, params, params.eta_e)),
        EraTag::Radiation => (48.0, era_scale(era, params, params.eta_r)),
    };
    let denom = Scaled::from_f64(coeff)
        .mul(m02)
        .mul(Scaled::from_f64(a_end).powi(2))
        .mul(pi45);
    lam.mul(rc3).neg().div(denom)
}

/// Truncated Gaussian ball-mass moment M = ∫₀^√cutoff t² e^{−t²} dt,
/// evaluated once per run at fixed high quality (it is grid-independent).
fn ball_moment(cutoff: f64) -> Scaled {
    let nodes = panel_nodes_subdivided(0.0, cutoff.sqrt(), 16, 24, &|_, _| 0.0, 1);
    let mut acc = 0.0;
    for (t, w) in nodes {
        acc += t * t * (-t * t).exp() * w;
    }
    Scaled::from_f64(acc)
}

/// Leading-order correction at one external momentum: the shell integral
/// is the kernel times the Gaussian ball mass 4π β^{−3/2} M.
fn delta_p_leading_q(
    era: EraTag,
    params: &CosmoParams,
    csl: &CslParams,
    cfg: &QuadratureConfig,
    density: usize,
    q: f64,
    moment: Scaled,
) -> Scaled {
    let nodes = eta_grid(era, params, cfg, density, &|_, _| 0.0);
    let four_pi = Scaled::from_f64(4.0 * PI);
    let rc = Scaled::from_f64(csl.r_c_planck);
    let mut terms = Vec::with_capacity(nodes.len());
    for node in &nodes {
        let a = Scaled::from_f64(era_scale(era, params, node.eta));
        // β^{−3/2}/a⁴ = (a/r_C)³/a⁴ = 1/(r_C³ a)
        let shell = four_pi.mul(moment).div(rc.powi(3).mul(a));
        let kernel = kernels::kernel_leading_effective(era, params, q, node.eta, cfg.four_term);
        terms.push(kernel.mul(shell).mul(Scaled::from_f64(node.weight)));
    }
    correction_prefactor(era, params, csl)
        .mul(four_pi)
        .mul(Scaled::from_f64(q).powi(3))
        .mul(scaled_sum(&terms))
}

/// Shell integral of the exact kernel at one time node:
/// I = 2π ∫ p² dp ∫ dμ e^{−β(p²+q²+2pqμ)} 𝓕(p, q, μ).
fn shell_integral_exact(
    era: EraTag,
    params: &CosmoParams,
    q: f64,
    eta_prime: f64,
    beta: f64,
    cfg: &QuadratureConfig,
    density: usize,
) -> Result<Scaled, CoreError> {
    let cutoff = cfg.gaussian_cutoff;
    let order = cfg.costheta_order;
    let density = density.max(1);
    let p_lo = q * 10f64.powi(-(cfg.p_decades as i32));
    let mut p_hi = q + (4.0 * cutoff / beta).sqrt();
    if era == EraTag::Radiation && !cfg.full_window {
        // keep only superhorizon internal momenta at this time
        p_hi = p_hi.min(1.0 / eta_prime.abs().max(f64::MIN_POSITIVE));
    }
    if !(p_hi > p_lo) || !beta.is_finite() {
        return Ok(Scaled::ZERO);
    }

    // p-axis: log panels, with a linear band across the Gaussian shell
    // |p − q| ≤ u_max when the shell is narrow on the log scale.
    let freq_p: Box<dyn Fn(f64, f64) -> f64> = match era {
        EraTag::Inflation => Box::new(|_, _| 0.0),
        EraTag::Radiation => {
            let rate = 2.0 * (eta_prime - params.eta_e) / 3f64.sqrt();
            Box::new(move |_, _| rate)
        }
    };
    let max_sub = 64 * density;
    let u_max = (cutoff / beta).sqrt();
    let band_lo = (q - u_max).max(p_lo);
    let band_hi = (q + u_max).min(p_hi);
    let n_band = ((cutoff / (2.0 * order as f64)).ceil() as usize).max(2) * density;
    let mut p_nodes: Vec<(f64, f64)> = Vec::new();
    if band_hi > band_lo && u_max < 0.125 * q {
        if band_lo > p_lo * (1.0 + 1e-14) {
            p_nodes.extend(log_nodes(
                p_lo,
                band_lo,
                cfg.points_per_decade,
                order,
                density,
                &freq_p,
                max_sub,
            ));
        }
        p_nodes.extend(panel_nodes_subdivided(
            band_lo, band_hi, n_band, order, &freq_p, max_sub,
        ));
        if p_hi > band_hi * (1.0 + 1e-14) {
            p_nodes.extend(log_nodes(
                band_hi,
                p_hi,
                cfg.points_per_decade,
                order,
                density,
                &freq_p,
                max_sub,
            ));
        }
    } else {
        p_nodes.extend(log_nodes(
            p_lo,
            p_hi,
            cfg.points_per_decade,
            order,
            density,
            &freq_p,
            max_sub,
        ));
    }

    let n_mu = ((cutoff / (2.0 * order as f64)).ceil() as usize).max(2) * density;
    let mut p_parts: Vec<Scaled> = Vec::with_capacity(p_nodes.len());
    for &(p, wp) in &p_nodes {
        // angular exponent varies by 2βpq across [−1, 1]; when steep, only
        // a band above μ = −1 survives, so panel it directly and cover the
        // rest with geometrically growing panels.
        let slope = 2.0 * beta * p * q;
        let delta = if slope > 0.0 { cutoff / slope } else { f64::INFINITY };
        let mut mu_nodes: Vec<(f64, f64)> = Vec::new();
        if delta >= 2.0 {
            mu_nodes.extend(panel_nodes_subdivided(-1.0, 1.0, n_mu, order, &|_, _| 0.0, 1));
        } else {
            mu_nodes.extend(panel_nodes_subdivided(
                -1.0,
                -1.0 + delta,
                n_mu,
                order,
                &|_, _| 0.0,
                1,
            ));
            let mut lo = -1.0 + delta;
            while lo < 1.0 {
                let hi = (-1.0 + (lo + 1.0) * 2.0).min(1.0);
                mu_nodes.extend(panel_nodes_subdivided(lo, hi, density, order, &|_, _| 0.0, 1));
                lo = hi;
            }
        }
        let mut kept_mu = Vec::with_capacity(mu_nodes.len());
        let mut kept_pref = Vec::with_capacity(mu_nodes.len());
        for (mu, wm) in mu_nodes {
            let x = beta * (p * p + q * q + 2.0 * p * q * mu);
            // beyond the cutoff the Gaussian is below f64 resolution of the
            // kept mass; skip the kernel evaluation entirely
            if x > cutoff + 45.0 {
                continue;
            }
            kept_mu.push(mu);
            kept_pref.push(Scaled::from_f64(wm * (-x).exp()));
        }
        if kept_mu.is_empty() {
            continue;
        }
        let kernel =
            kernels::exact_cell_sweep(era, params, p, q, eta_prime, EndArrangement::ExternalQ, &kept_mu)?;
        let mut cell = Vec::with_capacity(kernel.len());
        for (f, pref) in kernel.iter().zip(&kept_pref) {
            cell.push(f.mul(*pref));
        }
        let p2w = Scaled::from_f64(p).powi(2).mul(Scaled::from_f64(wp));
        p_parts.push(p2w.mul(scaled_sum(&cell)));
    }
    Ok(Scaled::from_f64(2.0 * PI).mul(scaled_sum(&p_parts)))
}

/// Exact-kernel correction at one external momentum. Time nodes are
/// independent, so they are evaluated in parallel and summed in grid order.
fn delta_p_exact_q(
    era: EraTag,
    params: &CosmoParams,
    csl: &CslParams,
    cfg: &QuadratureConfig,
    density: usize,
    q: f64,
) -> Result<Scaled, CoreError> {
    let freq: Box<dyn Fn(f64, f64) -> f64> = match era {
        EraTag::Inflation => Box::new(move |_: f64, _: f64| 2.0 * q),
        EraTag::Radiation => {
            let h = params.h_inf;
            let ee2 = params.eta_e.powi(2);
            let rc = csl.r_c_planck;
            let cutoff = cfg.gaussian_cutoff;
            Box::new(move |_: f64, w_hi: f64| {
                // fastest kernel phase 2(p+q)/√3 at the largest p the
                // Gaussian admits within this panel
                let s_g = 2.0 * cutoff.sqrt() * w_hi / (rc * h * ee2);
                2.0 * (q + s_g) / 3f64.sqrt()
            })
        }
    };
    let nodes = eta_grid(era, params, cfg, density, freq.as_ref());
    let parts: Vec<Result<Scaled, CoreError>> = nodes
        .par_iter()
        .map(|node| {
            let a = era_scale(era, params, node.eta);
            let beta = (csl.r_c_planck / a).powi(2);
            let shell = shell_integral_exact(era, params, q, node.eta, beta, cfg, density)?;
            Ok(shell
                .mul(Scaled::from_f64(node.weight))
                .div(Scaled::from_f64(a).powi(4)))
        })
        .collect();
    let mut terms = Vec::with_capacity(parts.len());
    for part in parts {
        terms.push(part?);
    }
    Ok(correction_prefactor(era, params, csl)
        .mul(Scaled::from_f64(4.0 * PI))
        .mul(Scaled::from_f64(q).powi(3))
        .mul(scaled_sum(&terms)))
}

/// Linearized-operator correction at one external momentum:
/// δP(q) = −(2/√π)·λ r_C³ H² η_e²/(ε m₀²)·q³·Σ m·e^{−(q r_C/a)²}·𝓕_lin/a⁴.
fn delta_p_linear_q(
    params: &CosmoParams,
    csl: &CslParams,
    cfg: &QuadratureConfig,
    density: usize,
    q: f64,
) -> Result<Scaled, CoreError> {
    let nodes = eta_grid(
        EraTag::Inflation,
        params,
        cfg,
        density,
        &|_, _| 2.0 * q,
    );
    let parts: Vec<Result<Scaled, CoreError>> = nodes
        .par_iter()
        .map(|node| {
            let a = era_scale(EraTag::Inflation, params, node.eta);
            let x = q * csl.r_c_planck / a;
            let damp = (-x * x).exp();
            if damp == 0.0 {
                return Ok(Scaled::ZERO);
            }
            let kernel = kernels::kernel_linear(params, q, node.eta, false)?.value;
            Ok(kernel
                .mul(Scaled::from_f64(damp * node.weight))
                .div(Scaled::from_f64(a).powi(4)))
        })
        .collect();
    let mut terms = Vec::with_capacity(parts.len());
    for part in parts {
        terms.push(part?);
    }
    let a_e = era_scale(EraTag::Inflation, params, params.eta_e);
    let norm = Scaled::from_f64(csl.lambda_planck)
        .mul(Scaled::from_f64(csl.r_c_planck).powi(3))
        .mul(Scaled::from_f64(2.0 / PI.sqrt()))
        .div(
            Scaled::from_f64(params.eps_inf)
                .mul(Scaled::from_f64(csl.m0_planck).powi(2))
                .mul(Scaled::from_f64(a_e).powi(2)),
        )
        .neg();
    Ok(norm
        .mul(Scaled::from_f64(q).powi(3))
        .mul(scaled_sum(&terms)))
}

fn q_grid(cfg: &QuadratureConfig) -> Vec<f64> {
    let (lo, hi) = cfg.q_window;
    let n = cfg.n_q.max(2);
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn eval_level(
    era: EraTag,
    variant: KernelVariant,
    params: &CosmoParams,
    csl: &CslParams,
    cfg: &QuadratureConfig,
    density: usize,
    qs: &[f64],
) -> Result<Vec<Scaled>, CoreError> {
    match variant {
        KernelVariant::LeadingQuadratic => {
            let moment = ball_moment(cfg.gaussian_cutoff);
            Ok(qs
                .iter()
                .map(|&q| delta_p_leading_q(era, params, csl, cfg, density, q, moment))
                .collect())
        }
        KernelVariant::ExactQuadratic => qs
            .iter()
            .map(|&q| delta_p_exact_q(era, params, csl, cfg, density, q))
            .collect(),
        KernelVariant::Linearized => qs
            .iter()
            .map(|&q| delta_p_linear_q(params, csl, cfg, density, q))
            .collect(),
    }
}

/// Worst relative disagreement across the q-grid between two densities.
fn grid_error(coarse: &[Scaled], fine: &[Scaled]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, b) in coarse.iter().zip(fine) {
        if a.is_zero() && b.is_zero() {
            continue;
        }
        let denom = if a.cmp_abs(*b) == std::cmp::Ordering::Greater {
            a.abs()
        } else {
            b.abs()
        };
        let rel = a.sub(*b).abs().div(denom).to_f64();
        worst = worst.max(rel);
    }
    worst
}

/// Log-trapezoid of δP over the momentum window: δ𝓡² = ∫ δP d ln q.
fn log_trapezoid(qs: &[f64], values: &[Scaled]) -> Scaled {
    let mut terms = Vec::with_capacity(qs.len().saturating_sub(1));
    for i in 0..qs.len().saturating_sub(1) {
        let dln = (qs[i + 1] / qs[i]).ln();
        terms.push(
            values[i]
                .add(values[i + 1])
                .mul(Scaled::from_f64(0.5 * dln)),
        );
    }
    scaled_sum(&terms)
}

fn assemble(
    era: EraTag,
    variant: KernelVariant,
    method: Method,
    params: &CosmoParams,
    csl: &CslParams,
    cfg: &QuadratureConfig,
    qs: Vec<f64>,
    delta_p: Vec<Scaled>,
    error_estimate: f64,
) -> SpectrumResult {
    let p_std = params.h_inf * params.h_inf / (8.0 * PI * PI * params.eps_inf);
    let delta_r2 = log_trapezoid(&qs, &delta_p);
    SpectrumResult {
        p_standard: vec![p_std; qs.len()],
        k_grid: qs,
        delta_p,
        delta_r2,
        method,
        kernel_variant: variant,
        era,
        error_estimate,
        params_snapshot: ParamsSnapshot {
            cosmo: *params,
            csl: *csl,
            quadrature: *cfg,
        },
    }
}

fn check_run_inputs(
    era: EraTag,
    variant: KernelVariant,
    params: &CosmoParams,
    cfg: &QuadratureConfig,
) -> Result<(), CoreError> {
    params.validate()?;
    cfg.validate()?;
    if variant == KernelVariant::Linearized && era == EraTag::Radiation {
        return Err(CoreError::validation(
            "kernel_variant",
            "the linearized operator is defined for the inflation era only",
        ));
    }
    Ok(())
}

/// Correction spectrum by quadrature with grid-density refinement. The
/// evaluation runs at 1×, 2× and if needed 4× the configured grid density;
/// consecutive levels must agree to `rel_tol` across the whole q-grid,
/// otherwise the finest spectrum is returned inside the error.
pub fn delta_r2_numeric(
    era: EraTag,
    variant: KernelVariant,
    params: &CosmoParams,
    csl: &CslParams,
    cfg: &QuadratureConfig,
) -> Result<SpectrumResult, CoreError> {
    check_run_inputs(era, variant, params, cfg)?;
    let qs = q_grid(cfg);
    let mut prev = eval_level(era, variant, params, csl, cfg, 1, &qs)?;
    let mut density = 2;
    loop {
        let cur = eval_level(era, variant, params, csl, cfg, density, &qs)?;
        let err = grid_error(&prev, &cur);
        if err <= cfg.rel_tol {
            return Ok(assemble(
                era, variant, Method::Quadrature, params, csl, cfg, qs, cur, err,
            ));
        }
        if density >= 4 {
            let partial = assemble(
                era, variant, Method::Quadrature, params, csl, cfg, qs, cur, err,
            );
            return Err(CoreError::NonConvergence {
                partial: Box::new(partial),
                error_estimate: err,
                rel_tol: cfg.rel_tol,
            });
        }
        prev = cur;
        density = 4;
    }
}

/// Correction spectrum from the closed forms, on the same grid and result
/// shape as the quadrature route. The exact kernel has no closed form.
pub fn closed_form_result(
    era: EraTag,
    variant: KernelVariant,
    params: &CosmoParams,
    csl: &CslParams,
    cfg: &QuadratureConfig,
) -> Result<SpectrumResult, CoreError> {
    check_run_inputs(era, variant, params, cfg)?;
    let qs = q_grid(cfg);
    let delta_p: Vec<Scaled> = match variant {
        KernelVariant::LeadingQuadratic => {
            let v = match era {
                EraTag::Inflation => delta_p_inflation_closed(params, csl),
                EraTag::Radiation => delta_p_radiation_closed(params, csl),
            };
            qs.iter().map(|_| Scaled::from_f64(v)).collect()
        }
        KernelVariant::Linearized => qs
            .iter()
            .map(|&q| delta_p_linear_closed(q, params, csl))
            .collect(),
        KernelVariant::ExactQuadratic => {
            return Err(CoreError::validation(
                "kernel_variant",
                "the exact kernel has no closed form; use the quadrature route",
            ));
        }
    };
    Ok(assemble(
        era,
        variant,
        Method::ClosedForm,
        params,
        csl,
        cfg,
        qs,
        delta_p,
        0.0,
    ))
}

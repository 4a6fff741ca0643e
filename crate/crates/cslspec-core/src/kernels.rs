//! Correction-integrand kernels.
//!
//! The collapse correction to the curvature power spectrum integrates a real
//! kernel 𝓕 built from mode-function bilinears taken at the integration time
//! η′ and at the end of the era. Two independent routes to the same kernel
//! live here: a *composition* route that assembles 𝓕 from the bilinear
//! coefficient functions, and a *transcription* route that evaluates the
//! expanded closed forms directly. They are algebraically identical, so their
//! agreement is used as an internal consistency oracle (and is exposed for
//! the `compare-kernels` command).
//!
//! Kernel values routinely hide cancellations far deeper than double
//! precision (the two terms of 𝓕 can agree to hundreds of digits before they
//! differ), so every exact evaluator runs a fast scaled-f64 pilot with a
//! cancellation-depth monitor and escalates to arbitrary-precision floats
//! only when the pilot cannot certify the result.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{powi, Cx, Real};
use crate::background::{CosmoParams, EraTag, RANGE_SLACK};
use crate::error::CoreError;
use crate::highprec::Bf;
use crate::modes::{allowance, c64_close, mode_inflation, mode_inflation_cx, mode_radiation, mode_radiation_cx};
use crate::scaled::Scaled;

/// Which correction kernel a spectrum run integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelVariant {
    /// Full bilinear kernel of the quadratic collapse operator.
    ExactQuadratic,
    /// Leading superhorizon expansion of the quadratic kernel.
    LeadingQuadratic,
    /// Kernel of the linearized collapse operator.
    Linearized,
}

/// A kernel value tagged with the era and variant that produced it. The
/// value is kept in scaled form because kernels span thousands of orders of
/// magnitude across the integration domain.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelEval {
    pub era: EraTag,
    pub variant: KernelVariant,
    pub value: Scaled,
}

/// Mode-function bilinears at a common time η, in the (p, q) orientation:
/// f = v_p v_q, g = v_p v_q*, j = v̇_p v̇_q, l = v̇_p v̇_q*, plus the coupled
/// combinations b = j − c f and d = l − c g with the era's coupling c.
///
/// Components are correctly rounded doubles (they come from the adaptive
/// mode evaluators); magnitudes beyond double range overflow to infinity, so
/// this type is a diagnostic surface — the integration pipeline composes the
/// same bilinears in scaled or big-float arithmetic internally.
#[derive(Clone, Copy, Debug)]
pub struct BilinearCoeffs {
    pub f: Complex64,
    pub g: Complex64,
    pub j: Complex64,
    pub l: Complex64,
    pub b: Complex64,
    pub d: Complex64,
}

/// Which external momentum the end-of-era mode pair in the kernel's second
/// term attaches to. The symmetrized kernel (p ↔ q averaged) is
/// arrangement-independent; the pointwise kernel is not.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndArrangement {
    /// |v(η_end)|² carries the integrated (internal) momentum p.
    InternalP,
    /// |v(η_end)|² carries the observed (external) momentum q.
    ExternalQ,
}

/// The end-mode attachment whose *pointwise* composition matches the
/// closed-form transcription for the given era.
pub fn transcribed_attachment(era: EraTag) -> EndArrangement {
    match era {
        EraTag::Inflation => EndArrangement::InternalP,
        EraTag::Radiation => EndArrangement::ExternalQ,
    }
}

/// Era coupling entering b and d: momentum dot product plus the inflationary
/// mass term, or the sound-speed-suppressed dot product during radiation.
pub(crate) fn coupling<T: Real>(era: EraTag, p: &T, q: &T, costheta: &T, eta: &T) -> T {
    let dot = p.mul(q).mul(costheta);
    match era {
        EraTag::Inflation => {
            let two = p.lift(2.0);
            dot.add(&two.div(&eta.mul(eta)))
        }
        EraTag::Radiation => dot.div(&p.lift(3.0)),
    }
}

fn mode_pair_f64(
    era: EraTag,
    params: &CosmoParams,
    k: f64,
    eta: f64,
) -> Result<(Complex64, Complex64), CoreError> {
    let st = match era {
        EraTag::Inflation => mode_inflation(k, eta)?,
        EraTag::Radiation => mode_radiation(k, eta, params.eta_e, params.eps_inf)?,
    };
    Ok((st.v, st.v_dot))
}

/// Bilinear coefficient functions of the era's modes at η.
pub fn bilinear_coeffs(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta: f64,
) -> Result<BilinearCoeffs, CoreError> {
    validate_point(era, params, p, q, costheta, eta)?;
    let (vp, dp) = mode_pair_f64(era, params, p, eta)?;
    let (vq, dq) = mode_pair_f64(era, params, q, eta)?;
    let c = coupling(era, &p, &q, &costheta, &eta);
    let f = vp * vq;
    let g = vp * vq.conj();
    let j = dp * dq;
    let l = dp * dq.conj();
    Ok(BilinearCoeffs {
        f,
        g,
        j,
        l,
        b: j - c * f,
        d: l - c * g,
    })
}

/// Per-cell kernel coefficients: for fixed (era, p, q, η′, η_end) the kernel
/// is a quadratic polynomial in the coupling c, so the six coefficients are
/// computed once and swept over the angular quadrature for free.
///
/// F(c) = ℜa₀ − c ℜa₁ + c² ℜa₂ − (b₀ − c b₁ + c² b₂) g_end
pub(crate) struct CellCoeffs<T: Real> {
    pub a0: Cx<T>,
    pub a1: Cx<T>,
    pub a2: Cx<T>,
    pub b0: T,
    pub b1: T,
    pub b2: T,
    pub g_end: T,
}

impl<T: Real> CellCoeffs<T> {
    /// Kernel value at coupling c together with the log₂ magnitude of the
    /// largest contributing term. The gap between that peak and the result is
    /// the cancellation depth. Complex magnitudes are used for the a-terms so
    /// that phase cancellation inside a real part is counted, never missed.
    pub fn eval(&self, c: &T) -> (T, f64) {
        let c2 = c.mul(c);
        let t_a1 = c.mul(&self.a1.re).neg();
        let t_a2 = c2.mul(&self.a2.re);
        let t_b0 = self.b0.mul(&self.g_end).neg();
        let t_b1 = c.mul(&self.b1).mul(&self.g_end);
        let t_b2 = c2.mul(&self.b2).mul(&self.g_end).neg();
        let f = self
            .a0
            .re
            .add(&t_a1)
            .add(&t_a2)
            .add(&t_b0)
            .add(&t_b1)
            .add(&t_b2);
        let peak = [
            self.a0.mag_log2(),
            self.a1.mag_log2() + c.mag_log2(),
            self.a2.mag_log2() + c2.mag_log2(),
            t_b0.mag_log2(),
            t_b1.mag_log2(),
            t_b2.mag_log2(),
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
        (f, peak)
    }
}

/// Bits of the largest contribution that cancel before the result emerges.
/// NaN (zero result from zero contributions) means there was nothing to
/// resolve in the first place.
fn cancellation_depth<T: Real>(value: &T, peak_log2: f64) -> f64 {
    (peak_log2 - value.mag_log2()).max(0.0)
}

/// Assemble the c-independent cell coefficients from the era's modes at η′
/// and at the end time. With b(c) = j − c f and d(c) = l_qp − c g_qp:
///
///   b d (f_end^{qq})* = a₀ − c a₁ + c² a₂,   |b|² = b₀ − c b₁ + c² b₂.
pub(crate) fn compose_cell<T: Real>(
    era: EraTag,
    p: &T,
    q: &T,
    eta_prime: &T,
    eta_e: &T,
    eta_end: &T,
    eps_inf: &T,
    arrangement: EndArrangement,
) -> CellCoeffs<T> {
    let pair = |k: &T, eta: &T| -> (Cx<T>, Cx<T>) {
        match era {
            EraTag::Inflation => mode_inflation_cx(k, eta),
            EraTag::Radiation => mode_radiation_cx(k, eta, eta_e, eps_inf),
        }
    };
    let (vp, dp) = pair(p, eta_prime);
    let (vq, dq) = pair(q, eta_prime);
    let (vq_end, _) = pair(q, eta_end);
    let f_end_conj = vq_end.mul(&vq_end).conj();
    let g_end = match arrangement {
        EndArrangement::ExternalQ => vq_end.abs2(),
        EndArrangement::InternalP => pair(p, eta_end).0.abs2(),
    };
    let j = dp.mul(&dq);
    let f = vp.mul(&vq);
    let l_qp = dq.mul(&dp.conj());
    let g_qp = vq.mul(&vp.conj());
    let jf = j.mul(&f.conj());
    CellCoeffs {
        a0: j.mul(&l_qp).mul(&f_end_conj),
        a1: j.mul(&g_qp).add(&f.mul(&l_qp)).mul(&f_end_conj),
        a2: f.mul(&g_qp).mul(&f_end_conj),
        b0: j.abs2(),
        b1: jf.re.add(&jf.re),
        b2: f.abs2(),
        g_end,
    }
}

fn kernel_end_time(era: EraTag, params: &CosmoParams) -> f64 {
    match era {
        EraTag::Inflation => params.eta_e,
        EraTag::Radiation => params.eta_r,
    }
}

/// One composition-route evaluation in the given representation.
fn exact_compose_eval<T: Real>(
    era: EraTag,
    proto: &T,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
    arrangement: EndArrangement,
) -> (T, f64) {
    let tp = proto.lift(p);
    let tq = proto.lift(q);
    let tw = proto.lift(costheta);
    let tep = proto.lift(eta_prime);
    let tee = proto.lift(params.eta_e);
    let tend = proto.lift(kernel_end_time(era, params));
    let teps = proto.lift(params.eps_inf);
    let cell = compose_cell(era, &tp, &tq, &tep, &tee, &tend, &teps, arrangement);
    let c = coupling(era, &tp, &tq, &tw, &tep);
    cell.eval(&c)
}

/// Both orientations of the composition averaged inside the working
/// representation. The orientation-antisymmetric part of the pointwise kernel
/// can exceed the symmetrized value by many orders of magnitude deep on
/// super-horizon scales, so rounding each orientation to f64 before the sum
/// would destroy it; the average has to happen at full precision. Returns the
/// value together with its cancellation depth measured from the largest
/// single contribution of either orientation.
fn exact_symmetrized_eval<T: Real>(
    era: EraTag,
    proto: &T,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
) -> (T, f64) {
    let arr = EndArrangement::InternalP;
    let (a, peak_a) = exact_compose_eval(era, proto, params, p, q, costheta, eta_prime, arr);
    let (b, peak_b) = exact_compose_eval(era, proto, params, q, p, costheta, eta_prime, arr);
    let sym = a.add(&b).mul(&proto.lift(0.5));
    let depth = cancellation_depth(&sym, peak_a.max(peak_b));
    (sym, depth)
}

/// Expanded closed form of the inflation-era kernel (composition route with
/// the internal-momentum end attachment, multiplied out). Returns the value
/// and the observed cancellation depth in bits.
fn transcribed_inflation<T: Real>(p: &T, q: &T, w: &T, ep: &T, ee: &T) -> (T, f64) {
    let one = p.lift(1.0);
    let two = p.lift(2.0);
    let xp = ep.mul(p);
    let xq = ep.mul(q);
    let xp2 = xp.mul(&xp);
    let xq2 = xq.mul(&xq);
    let dot = p.mul(q).mul(w);
    // common real factor η′²(p·q) + 2
    let cc = Cx::new(ep.mul(ep).mul(&dot).add(&two), p.lift(0.0));
    // quadratic and linear momentum factors with each sign of iη′k
    let f_p_m = Cx::new(one.sub(&xp2), xp.clone()); // −η′²p² + iη′p + 1
    let f_p_p = Cx::new(xp2.sub(&one), xp.clone()); //  η′²p² + iη′p − 1
    let f_q_m = Cx::new(xq2.sub(&one), xq.neg()); //  η′²q² − iη′q − 1
    let f_q_p = Cx::new(xq2.sub(&one), xq.clone()); //  η′²q² + iη′q − 1
    let g_p_m = Cx::new(xp.clone(), one.neg()); // η′p − i
    let g_p_p = Cx::new(xp.clone(), one.clone()); // η′p + i
    let g_q_m = Cx::new(xq.clone(), one.neg()); // η′q − i
    let g_q_p = Cx::new(xq.clone(), one.clone()); // η′q + i
    let shared = f_p_m.mul(&f_q_m).sub(&g_p_m.mul(&g_q_m).mul(&cc));
    let fac_a = f_p_p.mul(&f_q_m).sub(&g_p_p.mul(&g_q_m).mul(&cc));
    let fac_b = f_p_p.mul(&f_q_p).neg().sub(&g_p_p.mul(&g_q_p).mul(&cc));
    let eighth = one.div(&p.lift(8.0));
    let ep8 = powi(ep, 8);
    let den_a = ep8.mul(&powi(p, 3)).mul(&powi(q, 4));
    let den_b = ep8.mul(&powi(p, 4)).mul(&powi(q, 3));
    let u_q = Cx::new(one.clone(), one.div(&ee.mul(q)));
    let u_p_m = Cx::new(one.clone(), one.div(&ee.mul(p)).neg());
    let u_p_p = Cx::new(one.clone(), one.div(&ee.mul(p)));
    let phase_a = Cx::expi(&q.mul(&ep.sub(ee)).mul(&p.lift(-2.0)));
    let term_a = u_q
        .mul(&u_q)
        .mul(&phase_a)
        .mul(&shared)
        .mul(&fac_a)
        .scale(&eighth.div(&den_a));
    let term_b = u_p_m
        .mul(&u_p_p)
        .mul(&shared)
        .mul(&fac_b)
        .scale(&eighth.div(&den_b));
    let x = term_a.sub(&term_b);
    let peak = term_a.mag_log2().max(term_b.mag_log2());
    let f = x.re;
    let depth = (peak - f.mag_log2()).max(0.0);
    (f, depth)
}

/// Expanded closed form of the radiation-era kernel (composition route with
/// the external-momentum end attachment, multiplied out): eleven oscillatory
/// terms under one prefactor. Returns the value and the cancellation depth.
#[allow(clippy::too_many_arguments)]
fn transcribed_radiation<T: Real>(
    p: &T,
    q: &T,
    w: &T,
    etp: &T,
    ee: &T,
    er: &T,
    eps: &T,
) -> (T, f64) {
    let zero = p.lift(0.0);
    let two = p.lift(2.0);
    let three = p.lift(3.0);
    let four = p.lift(4.0);
    let sqrt3 = three.sqrt();
    // sound-horizon oscillation e^{2ix/√3}
    let e2 = |x: T| -> Cx<T> { Cx::expi(&x.add(&x).div(&sqrt3)) };

    let p2 = p.mul(p);
    let p3 = p2.mul(p);
    let p4 = p3.mul(p);
    let p5 = p4.mul(p);
    let q2 = q.mul(q);
    let q3 = q2.mul(q);
    let q5 = q3.mul(&q2);
    let ee2 = ee.mul(ee);
    let ee4 = ee2.mul(&ee2);
    let pq = p.mul(q);
    let dot = pq.mul(w);
    let dot2 = dot.mul(&dot);
    let dpe = etp.sub(ee);

    let m = q.mul(ee);
    let n = p.mul(ee);
    let m3 = powi(&m, 3);
    let n3 = powi(&n, 3);
    let three_cx = Cx::new(three.clone(), zero.clone());

    // end-time polynomial brackets, carrying the ±i√3 switch
    let br_q_minus = Cx::new(m3.sub(&two.mul(&m)), sqrt3.clone())
        .scale(&two.mul(&m).neg())
        .sub(&three_cx);
    let br_q_plus = Cx::new(two.mul(&m).sub(&m3), sqrt3.clone())
        .scale(&two.mul(&m))
        .sub(&three_cx);
    let br_p_minus = Cx::new(n3.sub(&two.mul(&n)), sqrt3.neg())
        .scale(&two.mul(&n))
        .add(&three_cx);
    let br_p_plus = Cx::new(n3.sub(&two.mul(&n)), sqrt3.clone())
        .scale(&two.mul(&n))
        .add(&three_cx);

    // angular polynomial factors
    let sym = p2.mul(&q2).sub(&dot2); // p²q² − (p·q)²
    let aligned = powi(&pq.add(&dot), 2); // (pq + p·q)²
    let anti = powi(&dot.sub(&pq), 2); // (p·q − pq)²
    let quart = four.mul(&powi(&n, 4)).sub(&two.mul(&n.mul(&n))).add(&three);

    // bracket of the mixed-phase term
    let t5_b1 = four.mul(&p4).mul(&q3).mul(&aligned).mul(&ee4);
    let inner2 = two.mul(&dot).mul(&p3).add(&q3.mul(&p2)).add(&q.mul(&dot2));
    let t5_b2 = two.mul(&p2).mul(&q2).mul(&inner2).mul(&ee2);
    let inner3 = two.mul(&dot).mul(&p5).add(&q5.mul(&p2)).add(&q3.mul(&dot2));
    let t5_b3 = three.mul(&inner3);
    let t5_br = t5_b1.sub(&t5_b2).add(&t5_b3);

    // phase arguments (all divided by √3 and doubled inside e2)
    let ph1 = p.add(q).mul(&dpe);
    let ph2 = p.mul(&dpe).add(&q.mul(&etp.add(&two.mul(er)).sub(&three.mul(ee))));
    let ph3 = p.add(&two.mul(q)).mul(&dpe);
    let ph4 = p.mul(etp).add(&two.mul(q).mul(er)).sub(&p.add(&two.mul(q)).mul(ee));
    let ph5 = p.mul(&dpe).add(&q.mul(&etp.add(er).sub(&two.mul(ee))));
    let ph6 = two.mul(&p.mul(etp).add(&q.mul(er)).sub(&p.add(q).mul(ee)));
    let ph7 = two.mul(&p.add(q)).mul(&dpe);
    let ph8 = two
        .mul(p)
        .mul(etp)
        .add(&q.mul(etp))
        .add(&q.mul(er))
        .sub(&two.mul(&p.add(q)).mul(ee));
    let ph9 = two.mul(q).mul(&dpe);
    let ph10 = two.mul(q).mul(&er.sub(ee));
    let ph11 = q.mul(&etp.add(er).sub(&two.mul(ee)));

    let t1 = e2(ph1).mul(&br_q_minus).scale(&four.mul(&dot).mul(&p5));
    let t2 = e2(ph2).mul(&br_q_plus).scale(&four.mul(&dot).mul(&p5));
    let t3 = e2(ph3).scale(&two.mul(&q3).mul(&sym).mul(&quart));
    let t4 = e2(ph4).scale(&two.mul(&q3).mul(&sym).mul(&quart));
    let t5 = e2(ph5.clone()).scale(&four.mul(&t5_br));
    let t6 = e2(ph6).mul(&br_p_minus).scale(&q3.mul(&anti));
    let t7 = e2(ph7).mul(&br_p_minus).scale(&q3.mul(&aligned));
    let t8 = e2(ph8).mul(&br_p_minus).scale(&two.mul(&q3).mul(&sym));
    let t9 = e2(ph9).mul(&br_p_plus).scale(&q3.mul(&anti));
    let t10 = e2(ph10).mul(&br_p_plus).scale(&q3.mul(&aligned));
    let t11 = e2(ph11).mul(&br_p_plus).scale(&two.mul(&q3).mul(&sym));

    let mut sum = Cx::new(zero.clone(), zero);
    let mut peak = f64::NEG_INFINITY;
    for t in [&t1, &t2, &t3, &t4, &t5, &t6, &t7, &t8, &t9, &t10, &t11] {
        peak = peak.max(t.mag_log2());
        sum = sum.add(t);
    }
    // −9 e^{−2i(p(η′−η_e) + q(η′+η_r−2η_e))/√3} / (8 p⁵ q⁵ ε³ η_e⁴)
    let mag = p
        .lift(-9.0)
        .div(&p.lift(8.0).mul(&p5).mul(&q5).mul(&powi(eps, 3)).mul(&ee4));
    let x = sum.mul(&e2(ph5).conj()).scale(&mag);
    let f = x.re;
    let depth = (peak + mag.mag_log2() - f.mag_log2()).max(0.0);
    (f, depth)
}

fn transcribed_eval<T: Real>(
    era: EraTag,
    proto: &T,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
) -> (T, f64) {
    let tp = proto.lift(p);
    let tq = proto.lift(q);
    let tw = proto.lift(costheta);
    let tep = proto.lift(eta_prime);
    let tee = proto.lift(params.eta_e);
    match era {
        EraTag::Inflation => transcribed_inflation(&tp, &tq, &tw, &tep, &tee),
        EraTag::Radiation => transcribed_radiation(
            &tp,
            &tq,
            &tw,
            &tep,
            &tee,
            &proto.lift(params.eta_r),
            &proto.lift(params.eps_inf),
        ),
    }
}

/// Pilot evaluations below this cancellation depth are accepted as-is; the
/// remaining ~37 mantissa bits bound the relative error near 3e-10.
const PILOT_DEPTH_BITS: f64 = 15.0;
/// Hard precision ceiling; failing to stabilize below it is reported as a
/// numerical error rather than a silently wrong value.
const MAX_BITS: usize = 8192;
/// Two consecutive precision doublings must agree this well.
const ESCALATION_RTOL: f64 = 1e-13;

fn scaled_close(a: Scaled, b: Scaled, rtol: f64) -> bool {
    if a.is_zero() && b.is_zero() {
        return true;
    }
    let scale = if a.cmp_abs(b) == Ordering::Greater { a } else { b };
    b.sub(a).abs().cmp_abs(scale.abs().mul(Scaled::from_f64(rtol))) != Ordering::Greater
}

/// Re-evaluate at doubling precision until two consecutive results agree to
/// [`ESCALATION_RTOL`].
fn stabilize_scaled(
    bits0: usize,
    what: &str,
    eval: impl Fn(usize) -> Scaled,
) -> Result<Scaled, CoreError> {
    let mut bits = bits0.clamp(96, MAX_BITS);
    let mut prev = eval(bits);
    while bits < MAX_BITS {
        bits = (bits * 2).min(MAX_BITS);
        let cur = eval(bits);
        if scaled_close(prev, cur, ESCALATION_RTOL) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(CoreError::numerical(format!(
        "{what} did not stabilize within {MAX_BITS}-bit precision"
    )))
}

/// Starting precision for escalation. Below 45 bits of observed depth the
/// pilot's depth reading is trustworthy and sizes the precision directly;
/// past that the pilot mantissa was exhausted and the true depth is unknown,
/// so escalation starts high and lets stabilization find the fixed point.
fn start_bits(depth: f64) -> usize {
    if depth < 45.0 {
        192 + (1.2 * depth).ceil() as usize
    } else {
        512
    }
}

/// Extra mantissa headroom for phase reduction and, during radiation, for
/// the internal cancellation of the matched mode functions at small |kη_e|.
fn phase_allowance(era: EraTag, params: &CosmoParams, p: f64, q: f64, eta_prime: f64) -> usize {
    match era {
        EraTag::Inflation => {
            let span = eta_prime.abs().max(params.eta_e.abs());
            allowance((2.0 * p.max(q) * span).log2())
        }
        EraTag::Radiation => {
            let span = (params.eta_r - params.eta_e).max(eta_prime - params.eta_e);
            let xe = p.min(q) * params.eta_e.abs();
            allowance((2.0 * (p + q) * span).log2()) + allowance(-2.0 * xe.log2())
        }
    }
}

/// Adaptive composition-route kernel: scaled-f64 pilot, then precision
/// escalation sized by the observed cancellation depth.
pub(crate) fn exact_adaptive(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
    arrangement: EndArrangement,
) -> Result<Scaled, CoreError> {
    let (pilot, peak) =
        exact_compose_eval(era, &Scaled::ONE, params, p, q, costheta, eta_prime, arrangement);
    let depth = cancellation_depth(&pilot, peak);
    if depth < PILOT_DEPTH_BITS {
        return Ok(pilot);
    }
    let bits0 = start_bits(depth) + phase_allowance(era, params, p, q, eta_prime);
    stabilize_scaled(bits0, "exact kernel", |bits| {
        exact_compose_eval(era, &Bf::proto(bits), params, p, q, costheta, eta_prime, arrangement)
            .0
            .to_scaled()
    })
}

/// Adaptive symmetrized kernel: pilot plus escalation, with the p ↔ q
/// average taken inside each evaluation so orientation cancellation is both
/// survived and monitored.
fn exact_adaptive_symmetrized(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
) -> Result<Scaled, CoreError> {
    let (pilot, depth) = exact_symmetrized_eval(era, &Scaled::ONE, params, p, q, costheta, eta_prime);
    if depth < PILOT_DEPTH_BITS {
        return Ok(pilot);
    }
    let bits0 = start_bits(depth) + phase_allowance(era, params, p, q, eta_prime);
    stabilize_scaled(bits0, "symmetrized exact kernel", |bits| {
        exact_symmetrized_eval(era, &Bf::proto(bits), params, p, q, costheta, eta_prime)
            .0
            .to_scaled()
    })
}

/// Exact-kernel values at one (p, q, η′) cell for a batch of angle nodes.
/// The cell coefficients are composed once and swept over the couplings;
/// when the pilot's cancellation depth demands escalation, the whole sweep
/// is re-composed and must agree vector-wide, relative to the batch peak,
/// across a precision doubling.
pub(crate) fn exact_cell_sweep(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    eta_prime: f64,
    arrangement: EndArrangement,
    costhetas: &[f64],
) -> Result<Vec<Scaled>, CoreError> {
    fn sweep<T: Real>(
        era: EraTag,
        proto: &T,
        params: &CosmoParams,
        p: f64,
        q: f64,
        eta_prime: f64,
        arrangement: EndArrangement,
        costhetas: &[f64],
    ) -> (Vec<Scaled>, f64) {
        let tp = proto.lift(p);
        let tq = proto.lift(q);
        let tep = proto.lift(eta_prime);
        let tee = proto.lift(params.eta_e);
        let tend = proto.lift(kernel_end_time(era, params));
        let teps = proto.lift(params.eps_inf);
        let cell = compose_cell(era, &tp, &tq, &tep, &tee, &tend, &teps, arrangement);
        let mut vals = Vec::with_capacity(costhetas.len());
        let mut worst = 0.0f64;
        for &w in costhetas {
            let c = coupling(era, &tp, &tq, &proto.lift(w), &tep);
            let (f, peak) = cell.eval(&c);
            let depth = cancellation_depth(&f, peak);
            // NaN depth means an identically-zero cell; treat as resolved
            if depth > worst {
                worst = depth;
            }
            vals.push(f.to_scaled());
        }
        (vals, worst)
    }
    let (pilot, depth) = sweep(era, &Scaled::ONE, params, p, q, eta_prime, arrangement, costhetas);
    if depth < PILOT_DEPTH_BITS {
        return Ok(pilot);
    }
    let mut bits = (start_bits(depth) + phase_allowance(era, params, p, q, eta_prime))
        .clamp(96, MAX_BITS);
    let mut prev = sweep(era, &Bf::proto(bits), params, p, q, eta_prime, arrangement, costhetas).0;
    while bits < MAX_BITS {
        bits = (bits * 2).min(MAX_BITS);
        let cur = sweep(era, &Bf::proto(bits), params, p, q, eta_prime, arrangement, costhetas).0;
        if sweep_close(&prev, &cur, ESCALATION_RTOL) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(CoreError::numerical(format!(
        "kernel cell sweep did not stabilize within {MAX_BITS}-bit precision"
    )))
}

/// Vector agreement relative to the batch peak, so nodes passing through a
/// sign change cannot stall the escalation on their own tiny values.
fn sweep_close(a: &[Scaled], b: &[Scaled], rtol: f64) -> bool {
    let mut peak = Scaled::ZERO;
    for v in b {
        if v.cmp_abs(peak) == Ordering::Greater {
            peak = v.abs();
        }
    }
    if peak.is_zero() {
        return a.iter().all(|v| v.is_zero());
    }
    let tol = peak.mul(Scaled::from_f64(rtol));
    a.iter()
        .zip(b)
        .all(|(x, y)| x.sub(y).abs().cmp_abs(tol) != Ordering::Greater)
}

/// Exact kernel 𝓕 for the era, composed from the bilinear coefficient
/// functions with the end-time pair-amplitude attached to the external
/// momentum and |v(η_end)|² to the internal momentum:
///
///   𝓕 = ℜ[ b^{pq} d^{qp} (f_end^{qq})* − b^{pq} (b^{qp})* g_end^{pp} ]
///
/// η_end is the end of inflation (inflation era) or the end of the radiation
/// window (radiation era), both taken from `params`.
pub fn kernel_exact(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
) -> Result<KernelEval, CoreError> {
    kernel_exact_arranged(era, params, p, q, costheta, eta_prime, EndArrangement::InternalP)
}

/// [`kernel_exact`] with an explicit choice of end-mode attachment.
pub fn kernel_exact_arranged(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
    arrangement: EndArrangement,
) -> Result<KernelEval, CoreError> {
    validate_point(era, params, p, q, costheta, eta_prime)?;
    let value = exact_adaptive(era, params, p, q, costheta, eta_prime, arrangement)?;
    Ok(KernelEval {
        era,
        variant: KernelVariant::ExactQuadratic,
        value,
    })
}

/// p ↔ q symmetrized exact kernel. The symmetrized value is independent of
/// the end-mode attachment, which is why integrals over symmetric momentum
/// measures are insensitive to that choice. The average is taken inside the
/// adaptive evaluation: pointwise the two orientations can dwarf their mean
/// by the orientation-antisymmetric part, which must cancel at working
/// precision rather than after rounding.
pub fn kernel_exact_symmetrized(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
) -> Result<KernelEval, CoreError> {
    validate_point(era, params, p, q, costheta, eta_prime)?;
    let value = exact_adaptive_symmetrized(era, params, p, q, costheta, eta_prime)?;
    Ok(KernelEval {
        era,
        variant: KernelVariant::ExactQuadratic,
        value,
    })
}

/// Directly transcribed closed form of the exact kernel (the second route of
/// the dual-route consistency check). Pointwise it matches the composition
/// with the era's [`transcribed_attachment`]; symmetrized, it matches either
/// attachment.
pub fn kernel_exact_transcribed(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
) -> Result<KernelEval, CoreError> {
    validate_point(era, params, p, q, costheta, eta_prime)?;
    let (pilot, depth) =
        transcribed_eval(era, &Scaled::ONE, params, p, q, costheta, eta_prime);
    let value = if depth < PILOT_DEPTH_BITS {
        pilot
    } else {
        let bits0 = start_bits(depth) + phase_allowance(era, params, p, q, eta_prime);
        stabilize_scaled(bits0, "transcribed kernel", |bits| {
            transcribed_eval(era, &Bf::proto(bits), params, p, q, costheta, eta_prime)
                .0
                .to_scaled()
        })?
    };
    Ok(KernelEval {
        era,
        variant: KernelVariant::ExactQuadratic,
        value,
    })
}

/// Single fixed-precision evaluation of the composition route, for use as a
/// reference oracle. No convergence check is performed: callers pick `bits`
/// with enough margin over the expected cancellation depth (1024 bits covers
/// the fiducial integration domain with ~30 spare digits).
pub fn kernel_exact_oracle(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
    bits: usize,
) -> Result<KernelEval, CoreError> {
    validate_point(era, params, p, q, costheta, eta_prime)?;
    if !(64..=32768).contains(&bits) {
        return Err(CoreError::validation(
            "bits",
            "oracle precision must lie in [64, 32768]",
        ));
    }
    let (value, _) = exact_compose_eval(
        era,
        &Bf::proto(bits),
        params,
        p,
        q,
        costheta,
        eta_prime,
        EndArrangement::InternalP,
    );
    Ok(KernelEval {
        era,
        variant: KernelVariant::ExactQuadratic,
        value: value.to_scaled(),
    })
}

/// Leading superhorizon kernel. Inflation: the η_e-suppressed pair plus the
/// two dominant terms (`four_term`), or the dominant pair alone. Radiation:
/// a constant in p and η′.
pub fn kernel_leading(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    eta_prime: f64,
    four_term: bool,
) -> Result<KernelEval, CoreError> {
    validate_point(era, params, p, q, 0.0, eta_prime)?;
    let value = match era {
        EraTag::Inflation => {
            let p3 = powi(&Scaled::from_f64(p), 3);
            let q3 = powi(&Scaled::from_f64(q), 3);
            let ep = Scaled::from_f64(eta_prime);
            let ee = Scaled::from_f64(params.eta_e);
            let ee2 = ee.mul(ee);
            let ep2 = ep.mul(ep);
            // −1/(2q³η_e²η′²) − 4/(9p³η_e²η′²)
            let t3 = Scaled::from_f64(-0.5).div(q3.mul(ee2).mul(ep2));
            let t4 = Scaled::from_f64(-4.0 / 9.0).div(p3.mul(ee2).mul(ep2));
            let mut v = t3.add(t4);
            if four_term {
                // −η_e⁴/(36p³η′⁸) + 2η_e/(9p³η′⁵)
                let ep4 = ep2.mul(ep2);
                let t1 = ee2.mul(ee2).div(p3.mul(ep4).mul(ep4)).mul(Scaled::from_f64(-1.0 / 36.0));
                let t2 = ee.mul(Scaled::from_f64(2.0 / 9.0)).div(p3.mul(ep4).mul(ep));
                v = v.add(t1).add(t2);
            }
            v
        }
        EraTag::Radiation => {
            // −54/(q³ ε³ η_e⁴)
            let q3 = powi(&Scaled::from_f64(q), 3);
            let e3 = powi(&Scaled::from_f64(params.eps_inf), 3);
            let ee4 = powi(&Scaled::from_f64(params.eta_e), 4);
            Scaled::from_f64(-54.0).div(q3.mul(e3).mul(ee4))
        }
    };
    Ok(KernelEval {
        era,
        variant: KernelVariant::LeadingQuadratic,
        value,
    })
}

/// Effective leading integrand in the external momentum alone, following the
/// convention of dropping terms that are symmetric in p and q with opposite
/// signs (they cancel under the symmetric momentum integral). Used by the
/// leading-order spectrum quadrature.
pub(crate) fn kernel_leading_effective(
    era: EraTag,
    params: &CosmoParams,
    q: f64,
    eta_prime: f64,
    four_term: bool,
) -> Scaled {
    match era {
        EraTag::Inflation => {
            let q3 = powi(&Scaled::from_f64(q), 3);
            let ep = Scaled::from_f64(eta_prime);
            let ee = Scaled::from_f64(params.eta_e);
            let ee2 = ee.mul(ee);
            let ep2 = ep.mul(ep);
            // −(17/18)/(q³η_e²η′²)
            let mut v = Scaled::from_f64(-17.0 / 18.0).div(q3.mul(ee2).mul(ep2));
            if four_term {
                let ep4 = ep2.mul(ep2);
                let t1 = ee2.mul(ee2).div(q3.mul(ep4).mul(ep4)).mul(Scaled::from_f64(-1.0 / 36.0));
                let t2 = ee.mul(Scaled::from_f64(2.0 / 9.0)).div(q3.mul(ep4).mul(ep));
                v = v.add(t1).add(t2);
            }
            v
        }
        EraTag::Radiation => {
            let q3 = powi(&Scaled::from_f64(q), 3);
            let e3 = powi(&Scaled::from_f64(params.eps_inf), 3);
            let ee4 = powi(&Scaled::from_f64(params.eta_e), 4);
            Scaled::from_f64(-54.0).div(q3.mul(e3).mul(ee4))
        }
    }
}

/// Linearized-operator smeared mode χ_k = α_k v_k + β_k v̇_k in any
/// representation.
pub(crate) fn chi_cx<T: Real>(k: &T, eta: &T, h: &T, eps: &T, eps2: &T) -> Cx<T> {
    let one = k.lift(1.0);
    let (v, v_dot) = mode_inflation_cx(k, eta);
    let x2 = powi(&k.mul(eta), 2);
    let pre = eta.mul(&powi(h, 3)).mul(eps).div(&eps.add(eps).sqrt());
    // α = (ηH³ε/√(2ε)) (−6ε(ε₂/2 + 1)/(k²η²) + ε₂ + 8)
    let half_eps2 = eps2.div(&k.lift(2.0));
    let alpha = pre.mul(
        &eps.mul(&half_eps2.add(&one))
            .mul(&k.lift(-6.0))
            .div(&x2)
            .add(eps2)
            .add(&k.lift(8.0)),
    );
    // β = −(η²H³ε/√(2ε)) (6ε/(k²η²) − 2)
    let beta = pre
        .mul(eta)
        .mul(&k.lift(2.0).sub(&eps.mul(&k.lift(6.0)).div(&x2)));
    v.scale(&alpha).add(&v_dot.scale(&beta))
}

fn stabilize_c64(bits0: usize, eval: impl Fn(usize) -> Complex64) -> Complex64 {
    let mut bits = bits0.max(96);
    let mut prev = eval(bits);
    for _ in 0..8 {
        bits *= 2;
        let cur = eval(bits);
        if c64_close(prev, cur) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Smeared linearized mode χ_k(η) with correctly rounded components.
pub fn chi_linear(params: &CosmoParams, k: f64, eta: f64) -> Result<Complex64, CoreError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(CoreError::validation("k", "must be finite and positive"));
    }
    if !(eta.is_finite() && eta < 0.0) {
        return Err(CoreError::validation("eta", "must be finite and negative"));
    }
    let bits0 = 192 + allowance((k * eta.abs()).log2());
    Ok(stabilize_c64(bits0, |bits| {
        let proto = Bf::proto(bits);
        chi_cx(
            &proto.lift(k),
            &proto.lift(eta),
            &proto.lift(params.h_inf),
            &proto.lift(params.eps_inf),
            &proto.lift(params.eps2),
        )
        .to_c64()
    }))
}

/// Kernel of the linearized collapse operator at external momentum q:
/// 𝓕 = −4 [ℑ(χ_q(η′) v_q(η_e)*)]², or its leading superhorizon form
/// −18 ε³ H⁶ η′²/(q⁴ η_e²) when `leading` is set.
pub fn kernel_linear(
    params: &CosmoParams,
    q: f64,
    eta_prime: f64,
    leading: bool,
) -> Result<KernelEval, CoreError> {
    validate_linear_point(params, q, eta_prime)?;
    let value = if leading {
        let eps3 = powi(&Scaled::from_f64(params.eps_inf), 3);
        let h6 = powi(&Scaled::from_f64(params.h_inf), 6);
        let ep2 = powi(&Scaled::from_f64(eta_prime), 2);
        let q4 = powi(&Scaled::from_f64(q), 4);
        let ee2 = powi(&Scaled::from_f64(params.eta_e), 2);
        Scaled::from_f64(-18.0).mul(eps3).mul(h6).mul(ep2).div(q4.mul(ee2))
    } else {
        let bits0 = 256 + allowance((q * eta_prime.abs().max(params.eta_e.abs())).log2());
        stabilize_scaled(bits0, "linearized kernel", |bits| {
            let proto = Bf::proto(bits);
            let tq = proto.lift(q);
            let chi = chi_cx(
                &tq,
                &proto.lift(eta_prime),
                &proto.lift(params.h_inf),
                &proto.lift(params.eps_inf),
                &proto.lift(params.eps2),
            );
            let (ve, _) = mode_inflation_cx(&tq, &proto.lift(params.eta_e));
            let im = chi.mul(&ve.conj()).im;
            im.mul(&im).mul(&im.lift(-4.0)).to_scaled()
        })?
    };
    Ok(KernelEval {
        era: EraTag::Inflation,
        variant: KernelVariant::Linearized,
        value,
    })
}

fn validate_point(
    era: EraTag,
    params: &CosmoParams,
    p: f64,
    q: f64,
    costheta: f64,
    eta_prime: f64,
) -> Result<(), CoreError> {
    if !(p.is_finite() && p > 0.0) {
        return Err(CoreError::validation("p", "must be finite and positive"));
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(CoreError::validation("q", "must be finite and positive"));
    }
    if !(costheta.is_finite() && costheta.abs() <= 1.0 + 1e-12) {
        return Err(CoreError::validation("costheta", "must lie in [-1, 1]"));
    }
    if !eta_prime.is_finite() {
        return Err(CoreError::validation("eta_prime", "must be finite"));
    }
    match era {
        EraTag::Inflation => {
            let hi = params.eta_e * (1.0 - RANGE_SLACK);
            if !(eta_prime < 0.0 && eta_prime <= hi) {
                return Err(CoreError::validation(
                    "eta_prime",
                    "must lie at or before the end of inflation",
                ));
            }
        }
        EraTag::Radiation => {
            let lo = params.eta_e * (1.0 + RANGE_SLACK);
            let hi = params.eta_r * (1.0 + RANGE_SLACK);
            if !(eta_prime >= lo && eta_prime <= hi) {
                return Err(CoreError::validation(
                    "eta_prime",
                    "must lie within the radiation-era window",
                ));
            }
        }
    }
    Ok(())
}

fn validate_linear_point(params: &CosmoParams, q: f64, eta_prime: f64) -> Result<(), CoreError> {
    if !(q.is_finite() && q > 0.0) {
        return Err(CoreError::validation("q", "must be finite and positive"));
    }
    let lo = params.eta0 * (1.0 + RANGE_SLACK);
    let hi = params.eta_e * (1.0 - RANGE_SLACK);
    if !(eta_prime.is_finite() && eta_prime >= lo && eta_prime <= hi) {
        return Err(CoreError::validation(
            "eta_prime",
            "must lie within the inflation window",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Standalone parameter set for order-unity kernel arguments; only the
    /// fields the kernels read are meaningful.
    fn bare_params(eta_e: f64, eta_r: f64) -> CosmoParams {
        CosmoParams {
            h_inf: 1e-5,
            eps_inf: 0.005,
            eps2: 0.0,
            eta0: -100.0,
            eta_e,
            eta_r,
            n_star: 60.0,
            k_star: 5e-60,
        }
    }

    /// Fiducial-scale background with the era times rounded to the short
    /// values the deep fixtures were generated at, so the expected numbers
    /// do not depend on the derivation path.
    fn deep_params() -> CosmoParams {
        CosmoParams {
            h_inf: 1e-5,
            eps_inf: 0.005,
            eps2: 0.0,
            eta0: -2e59,
            eta_e: -1.7513e33,
            eta_r: 5.254e59,
            n_star: 60.0,
            k_star: 5e-60,
        }
    }

    fn rel_scaled(a: Scaled, b: Scaled) -> f64 {
        if a.is_zero() && b.is_zero() {
            return 0.0;
        }
        a.sub(b).abs().div(b.abs()).to_f64()
    }

    fn compose_bf(
        era: EraTag,
        pr: &CosmoParams,
        p: f64,
        q: f64,
        w: f64,
        ep: f64,
        arr: EndArrangement,
        bits: usize,
    ) -> Scaled {
        exact_compose_eval(era, &Bf::proto(bits), pr, p, q, w, ep, arr).0.to_scaled()
    }

    fn transcribe_bf(
        era: EraTag,
        pr: &CosmoParams,
        p: f64,
        q: f64,
        w: f64,
        ep: f64,
        bits: usize,
    ) -> Scaled {
        transcribed_eval(era, &Bf::proto(bits), pr, p, q, w, ep).0.to_scaled()
    }

    // The symmetrized sums below must run at working precision: rounding each
    // orientation to f64 first can erase the mean under the antisymmetric part.
    #[allow(clippy::too_many_arguments)]
    fn sym_compose_bf(
        era: EraTag,
        pr: &CosmoParams,
        p: f64,
        q: f64,
        w: f64,
        ep: f64,
        arr: EndArrangement,
        bits: usize,
    ) -> Scaled {
        let proto = Bf::proto(bits);
        let a = exact_compose_eval(era, &proto, pr, p, q, w, ep, arr).0;
        let b = exact_compose_eval(era, &proto, pr, q, p, w, ep, arr).0;
        a.add(&b).to_scaled().mul(Scaled::from_f64(0.5))
    }

    fn sym_transcribe_bf(
        era: EraTag,
        pr: &CosmoParams,
        p: f64,
        q: f64,
        w: f64,
        ep: f64,
        bits: usize,
    ) -> Scaled {
        let proto = Bf::proto(bits);
        let a = transcribed_eval(era, &proto, pr, p, q, w, ep).0;
        let b = transcribed_eval(era, &proto, pr, q, p, w, ep).0;
        a.add(&b).to_scaled().mul(Scaled::from_f64(0.5))
    }

    #[test]
    fn variant_serde_names() {
        assert_eq!(
            serde_json::to_string(&KernelVariant::ExactQuadratic).unwrap(),
            "\"exact-quadratic\""
        );
        assert_eq!(
            serde_json::to_string(&KernelVariant::LeadingQuadratic).unwrap(),
            "\"leading-quadratic\""
        );
        assert_eq!(
            serde_json::to_string(&KernelVariant::Linearized).unwrap(),
            "\"linearized\""
        );
        let v: KernelVariant = serde_json::from_str("\"leading-quadratic\"").unwrap();
        assert_eq!(v, KernelVariant::LeadingQuadratic);
    }

    #[test]
    fn bilinear_symmetries() {
        let pr = bare_params(-1.1, 5.0);
        for (era, eta) in [(EraTag::Inflation, -2.0), (EraTag::Radiation, 2.0)] {
            let a = bilinear_coeffs(era, &pr, 0.7, 0.4, 0.3, eta).unwrap();
            let b = bilinear_coeffs(era, &pr, 0.4, 0.7, 0.3, eta).unwrap();
            // f and j are symmetric under p ↔ q; g, l, d conjugate
            assert_eq!(a.f, b.f);
            assert_eq!(a.j, b.j);
            assert_eq!(a.g, b.g.conj());
            assert_eq!(a.l, b.l.conj());
            assert_eq!(a.b, b.b);
            assert_eq!(a.d, b.d.conj());
        }
    }

    #[test]
    fn bilinear_coupling_examples() {
        let pr = bare_params(-1.1, 5.0);
        // equal aligned momenta: b = v̇² − (k² + 2/η²) v²
        let a = bilinear_coeffs(EraTag::Inflation, &pr, 0.5, 0.5, 1.0, -2.0).unwrap();
        let m = mode_inflation(0.5, -2.0).unwrap();
        let c = 0.25 + 2.0 / 4.0;
        let direct = m.v_dot * m.v_dot - c * (m.v * m.v);
        assert!((a.b - direct).norm() <= 1e-14 * direct.norm());
        // orthogonal momenta in radiation: the coupling vanishes entirely
        let r = bilinear_coeffs(EraTag::Radiation, &pr, 0.7, 0.4, 0.0, 2.0).unwrap();
        assert_eq!(r.b, r.j);
        assert_eq!(r.d, r.l);
    }

    #[test]
    fn exact_inflation_moderate_fixture() {
        let pr = bare_params(-1.1, 5.0);
        let k = kernel_exact(EraTag::Inflation, &pr, 0.7, 0.4, 0.3, -2.0).unwrap();
        assert_eq!(k.era, EraTag::Inflation);
        assert_eq!(k.variant, KernelVariant::ExactQuadratic);
        assert_relative_eq!(k.value.to_f64(), 5.1147259473213753, max_relative = 1e-11);
    }

    #[test]
    fn exact_inflation_deep_fixture() {
        // intermediate terms reach ~1e85 relative to the result here
        let k = kernel_exact(EraTag::Inflation, &deep_params(), 5e-60, 5e-60, 0.3, -1e45).unwrap();
        assert_relative_eq!(k.value.to_f64(), -2.4634588260087509e21, max_relative = 1e-11);
    }

    #[test]
    fn exact_radiation_moderate_fixture() {
        let pr = bare_params(-1.1, 5.0);
        let k = kernel_exact(EraTag::Radiation, &pr, 0.7, 0.4, 0.3, 2.0).unwrap();
        assert_relative_eq!(k.value.to_f64(), 115046997582.30007, max_relative = 1e-11);
    }

    #[test]
    fn exact_radiation_deep_fixture() {
        let k = kernel_exact(EraTag::Radiation, &deep_params(), 5e-60, 5e-60, 0.3, 1e45).unwrap();
        assert_relative_eq!(k.value.to_f64(), -1.1096996010898541e53, max_relative = 1e-11);
    }

    #[test]
    fn exact_symmetrized_radiation_deep_fixture() {
        let k = kernel_exact_symmetrized(EraTag::Radiation, &deep_params(), 8e-60, 3e-60, 0.5, 1e41)
            .unwrap();
        assert_relative_eq!(k.value.to_f64(), -1.2123272994032913e54, max_relative = 1e-11);
    }

    #[test]
    fn external_attachment_fixtures() {
        let pr = bare_params(-1.1, 5.0);
        let v = kernel_exact_arranged(
            EraTag::Inflation, &pr, 0.7, 0.4, 0.3, -2.0, EndArrangement::ExternalQ,
        )
        .unwrap();
        assert_relative_eq!(v.value.to_f64(), -2.76366865182103627, max_relative = 1e-9);
        let r = kernel_exact_arranged(
            EraTag::Radiation, &pr, 0.7, 0.4, 0.3, 2.0, EndArrangement::ExternalQ,
        )
        .unwrap();
        assert_relative_eq!(r.value.to_f64(), -2211644279.2855835, max_relative = 1e-9);
    }

    #[test]
    fn transcribed_matches_fixtures() {
        let pr = bare_params(-1.1, 5.0);
        // inflation transcription carries the internal-momentum attachment
        let t = kernel_exact_transcribed(EraTag::Inflation, &pr, 0.7, 0.4, 0.3, -2.0).unwrap();
        assert_relative_eq!(t.value.to_f64(), 5.1147259473213753, max_relative = 1e-11);
        // radiation transcription carries the external-momentum attachment
        let r = kernel_exact_transcribed(EraTag::Radiation, &pr, 0.7, 0.4, 0.3, 2.0).unwrap();
        assert_relative_eq!(r.value.to_f64(), -2211644279.2855835, max_relative = 1e-9);
    }

    #[test]
    fn transcribed_deep_points_escalate_and_match() {
        let pr = deep_params();
        let t = kernel_exact_transcribed(EraTag::Inflation, &pr, 5e-60, 5e-60, 0.3, -1e45).unwrap();
        assert_relative_eq!(t.value.to_f64(), -2.4634588260087509e21, max_relative = 1e-11);
        let c = kernel_exact_arranged(
            EraTag::Radiation, &pr, 5e-60, 5e-60, 0.3, 1e45, EndArrangement::ExternalQ,
        )
        .unwrap();
        let t = kernel_exact_transcribed(EraTag::Radiation, &pr, 5e-60, 5e-60, 0.3, 1e45).unwrap();
        assert!(rel_scaled(t.value, c.value) < 1e-10);
    }

    #[test]
    fn adaptive_matches_fixed_precision_oracle() {
        let pr = deep_params();
        let cases = [
            (EraTag::Inflation, 7e-60, 3e-60, -0.6, -4.1e44),
            (EraTag::Inflation, 2e-59, 2e-59, 0.9, -8e57),
            (EraTag::Radiation, 7e-60, 3e-60, -0.6, 2.7e44),
            (EraTag::Radiation, 4e-59, 1e-59, 0.2, 9e58),
        ];
        for &(era, p, q, w, ep) in &cases {
            let a = kernel_exact(era, &pr, p, q, w, ep).unwrap().value;
            let o = kernel_exact_oracle(era, &pr, p, q, w, ep, 1024).unwrap().value;
            let rel = rel_scaled(a, o);
            assert!(rel < 1e-10, "{era:?} p={p:e} q={q:e}: rel {rel:e}");
        }
    }

    #[test]
    fn leading_inflation_forms() {
        let pr = bare_params(-1.1, 5.0);
        let (p, q, ep) = (0.35, 0.8, -11.0);
        let ee = pr.eta_e;
        let two = kernel_leading(EraTag::Inflation, &pr, p, q, ep, false).unwrap();
        let four = kernel_leading(EraTag::Inflation, &pr, p, q, ep, true).unwrap();
        let t1 = -ee.powi(4) / (36.0 * p.powi(3) * ep.powi(8));
        let t2 = 2.0 * ee / (9.0 * p.powi(3) * ep.powi(5));
        let t3 = -1.0 / (2.0 * q.powi(3) * ee * ee * ep * ep);
        let t4 = -4.0 / (9.0 * p.powi(3) * ee * ee * ep * ep);
        assert_eq!(two.variant, KernelVariant::LeadingQuadratic);
        assert_relative_eq!(two.value.to_f64(), t3 + t4, max_relative = 1e-14);
        assert_relative_eq!(four.value.to_f64(), t1 + t2 + t3 + t4, max_relative = 1e-14);
    }

    #[test]
    fn leading_radiation_constant_in_p_and_time() {
        let pr = bare_params(-1.1, 5.0);
        let a = kernel_leading(EraTag::Radiation, &pr, 0.1, 0.4, 1.0, true).unwrap();
        let b = kernel_leading(EraTag::Radiation, &pr, 7.0, 0.4, 4.5, false).unwrap();
        assert_eq!(a.value, b.value);
        let expect = -54.0 / (0.4f64.powi(3) * 0.005f64.powi(3) * 1.1f64.powi(4));
        assert_relative_eq!(a.value.to_f64(), expect, max_relative = 1e-14);
    }

    #[test]
    fn leading_survives_extreme_magnitudes() {
        // η′⁸ alone overflows a double here; the scaled path must not
        let pr = deep_params();
        let four = kernel_leading(EraTag::Inflation, &pr, 5e-60, 5e-60, -1e45, true).unwrap();
        assert!(four.value.to_f64().is_finite());
        let two = kernel_leading(EraTag::Inflation, &pr, 5e-60, 5e-60, -1e45, false).unwrap();
        // the two extra terms are η_e-suppressed into oblivion at this scale
        assert_relative_eq!(four.value.to_f64(), two.value.to_f64(), max_relative = 1e-20);
    }

    #[test]
    fn exact_matches_leading_deep_superhorizon() {
        let pr = deep_params();
        let ex = kernel_exact(EraTag::Inflation, &pr, 5e-60, 5e-60, 0.3, -1e45).unwrap();
        let ld = kernel_leading(EraTag::Inflation, &pr, 5e-60, 5e-60, -1e45, true).unwrap();
        assert_relative_eq!(ex.value.to_f64(), ld.value.to_f64(), max_relative = 1e-12);
    }

    #[test]
    fn exact_approaches_leading_with_scale() {
        // inflation: worst symmetrized deviation over a fixed point set
        let pts = [(1.0, 1.0, 1.0), (1.0, 0.65, -0.4), (1.8, 1.0, 0.0), (1.0, 3.0, 0.9)];
        let dev = |s: f64| -> f64 {
            let ep = -s;
            let pr = bare_params(ep * 1e-22, 1.0);
            pts.iter()
                .map(|&(p, q, w)| {
                    let ex = kernel_exact_symmetrized(EraTag::Inflation, &pr, p, q, w, ep)
                        .unwrap()
                        .value
                        .to_f64();
                    let l = 0.5
                        * (kernel_leading(EraTag::Inflation, &pr, p, q, ep, true).unwrap().value.to_f64()
                            + kernel_leading(EraTag::Inflation, &pr, q, p, ep, true).unwrap().value.to_f64());
                    (ex / l - 1.0).abs()
                })
                .fold(0.0, f64::max)
        };
        let d1 = dev(1e-3);
        let d2 = dev(5e-4);
        assert_relative_eq!(d1, 4.111e-7, max_relative = 0.02);
        assert_relative_eq!(d2, 1.028e-7, max_relative = 0.02);
        // second order in the scale
        assert!((d1 / d2 - 4.0).abs() < 0.1, "ratio {}", d1 / d2);

        // radiation: same sweep against the constant leading form
        let pts_rad = [(1.0, 1.0, 1.0), (1.0, 0.65, -0.4), (1.8, 1.0, 0.0)];
        let dev_rad = |s: f64| -> f64 {
            let pr = bare_params(-s / 1000.0, 2.0 * s);
            let ep = s;
            pts_rad
                .iter()
                .map(|&(p, q, w)| {
                    let ex = kernel_exact_symmetrized(EraTag::Radiation, &pr, p, q, w, ep)
                        .unwrap()
                        .value
                        .to_f64();
                    let lead = -54.0 / (pr.eps_inf.powi(3) * pr.eta_e.powi(4))
                        * (1.0 / q.powi(3) + 1.0 / p.powi(3))
                        / 2.0;
                    (ex / lead - 1.0).abs()
                })
                .fold(0.0, f64::max)
        };
        let r1 = dev_rad(1e-2);
        let r2 = dev_rad(1e-3);
        assert_relative_eq!(r1, 1.415e-4, max_relative = 0.03);
        assert_relative_eq!(r2, 1.415e-6, max_relative = 0.03);
        assert!((r1 / r2 - 100.0).abs() < 10.0, "ratio {}", r1 / r2);
    }

    #[test]
    fn chi_fixture() {
        let chi = chi_linear(&deep_params(), 1e-60, -2e59).unwrap();
        assert_relative_eq!(chi.re, 9.1462699089168896e71, max_relative = 1e-12);
        assert_relative_eq!(chi.im, -2.1806487213090405e74, max_relative = 1e-12);
    }

    #[test]
    fn chi_coefficient_assembly() {
        let pr = bare_params(-1.1, 5.0);
        let (k, eta) = (0.9, -3.0);
        let m = mode_inflation(k, eta).unwrap();
        let pre = eta * pr.h_inf.powi(3) * pr.eps_inf / (2.0 * pr.eps_inf).sqrt();
        let beta = pre * eta * (2.0 - 6.0 * pr.eps_inf / (k * k * eta * eta));
        // ε₂ = 0: α collapses to pre·(−6ε/(k²η²) + 8)
        let chi = chi_linear(&pr, k, eta).unwrap();
        let alpha = pre * (-6.0 * pr.eps_inf / (eta * eta * k * k) + 8.0);
        let direct = alpha * m.v + beta * m.v_dot;
        assert!((chi - direct).norm() <= 1e-12 * direct.norm());
        // ε₂ ≠ 0 enters α only
        let mut pr2 = pr;
        pr2.eps2 = 0.0335;
        let chi2 = chi_linear(&pr2, k, eta).unwrap();
        let alpha2 =
            pre * (-6.0 * pr.eps_inf * (0.0335 / 2.0 + 1.0) / (eta * eta * k * k) + 0.0335 + 8.0);
        let direct2 = alpha2 * m.v + beta * m.v_dot;
        assert!((chi2 - direct2).norm() <= 1e-12 * direct2.norm());
    }

    #[test]
    fn chi_finite_at_horizon_crossing() {
        let pr = CosmoParams::fiducial_main();
        let k = 5e-60;
        let chi = chi_linear(&pr, k, -1.0 / k).unwrap();
        assert!(chi.norm() > 0.0 && chi.norm().is_finite());
    }

    #[test]
    fn linear_kernel_fixture() {
        let k = kernel_linear(&CosmoParams::fiducial_main(), 1e-60, -2e59, false).unwrap();
        assert_eq!(k.era, EraTag::Inflation);
        assert_eq!(k.variant, KernelVariant::Linearized);
        assert_eq!(k.value.exp2, 856);
        assert_relative_eq!(k.value.mantissa, -1.1353233529199263, max_relative = 1e-11);
        assert_relative_eq!(k.value.log10_abs(), 257.73679585949075, max_relative = 1e-13);
    }

    #[test]
    fn linear_leading_form() {
        let pr = bare_params(-1.1, 5.0);
        let q = 1e-3;
        let at_end = kernel_linear(&pr, q, pr.eta_e, true).unwrap();
        let expect = -18.0 * pr.eps_inf.powi(3) * pr.h_inf.powi(6) / q.powi(4);
        assert_relative_eq!(at_end.value.to_f64(), expect, max_relative = 1e-13);
        assert!(at_end.value.to_f64() < 0.0);
        // grows as η′² away from the end of inflation
        let back = kernel_linear(&pr, q, 2.0 * pr.eta_e, true).unwrap();
        assert_relative_eq!(back.value.to_f64(), 4.0 * at_end.value.to_f64(), max_relative = 1e-13);
    }

    #[test]
    fn linear_exact_approaches_leading() {
        let dev = |s: f64| -> f64 {
            let pr = bare_params(-s * 1e-22, 1.0);
            let ex = kernel_linear(&pr, 1.0, -s, false).unwrap().value.to_f64();
            let ld = kernel_linear(&pr, 1.0, -s, true).unwrap().value.to_f64();
            ex / ld - 1.0
        };
        let d3 = dev(1e-3);
        let d4 = dev(1e-4);
        assert_relative_eq!(d3, -2.670e-4, max_relative = 0.02);
        // second order in qη′, and comfortably inside the 2% regime bound
        assert!((d3 / d4 - 100.0).abs() < 5.0, "ratio {}", d3 / d4);
        assert!(d4.abs() <= 0.02);
    }

    #[test]
    fn rejects_bad_inputs() {
        let pr = bare_params(-1.1, 5.0);
        assert!(kernel_exact(EraTag::Inflation, &pr, -0.1, 0.4, 0.3, -2.0).is_err());
        assert!(kernel_exact(EraTag::Inflation, &pr, 0.7, 0.4, 1.5, -2.0).is_err());
        // inflation time after the end of inflation
        assert!(kernel_exact(EraTag::Inflation, &pr, 0.7, 0.4, 0.3, -0.5).is_err());
        // radiation time outside the matched window
        assert!(kernel_exact(EraTag::Radiation, &pr, 0.7, 0.4, 0.3, 6.0).is_err());
        assert!(kernel_exact(EraTag::Radiation, &pr, 0.7, 0.4, 0.3, -2.0).is_err());
        assert!(kernel_linear(&pr, 1.0, -0.5, false).is_err());
        assert!(kernel_linear(&pr, 1.0, -200.0, false).is_err());
        assert!(chi_linear(&pr, 1.0, 0.5).is_err());
        assert!(kernel_exact_oracle(EraTag::Inflation, &pr, 0.7, 0.4, 0.3, -2.0, 16).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Dual-route identity, inflation: the transcription equals the
        /// internal-attachment composition pointwise.
        #[test]
        fn routes_agree_inflation(
            lp in -4.0f64..1.0,
            lq in -4.0f64..1.0,
            w in -1.0f64..1.0,
            lep in -1.5f64..1.5,
            frac in 0.001f64..0.9,
        ) {
            let p = 10f64.powf(lp);
            let q = 10f64.powf(lq);
            let ep = -(10f64.powf(lep));
            let pr = bare_params(ep * frac, 1.0);
            let a = compose_bf(EraTag::Inflation, &pr, p, q, w, ep, EndArrangement::InternalP, 320);
            let b = transcribe_bf(EraTag::Inflation, &pr, p, q, w, ep, 320);
            prop_assert!(rel_scaled(a, b) < 1e-18, "rel {}", rel_scaled(a, b));
        }

        /// Dual-route identity, radiation: the transcription equals the
        /// external-attachment composition pointwise, and both attachments
        /// agree after p ↔ q symmetrization.
        #[test]
        fn routes_agree_radiation(
            lp in -3.0f64..1.0,
            lq in -3.0f64..1.0,
            w in -1.0f64..1.0,
            ee in -2.0f64..-0.05,
            s1 in 0.1f64..20.0,
            s2 in 0.1f64..20.0,
        ) {
            let p = 10f64.powf(lp);
            let q = 10f64.powf(lq);
            let ep = ee + s1;
            let pr = bare_params(ee, ep + s2);
            let a = compose_bf(EraTag::Radiation, &pr, p, q, w, ep, EndArrangement::ExternalQ, 384);
            let b = transcribe_bf(EraTag::Radiation, &pr, p, q, w, ep, 384);
            prop_assert!(rel_scaled(a, b) < 1e-18, "pointwise rel {}", rel_scaled(a, b));

            let sc = sym_compose_bf(EraTag::Radiation, &pr, p, q, w, ep, EndArrangement::InternalP, 384);
            let st = sym_transcribe_bf(EraTag::Radiation, &pr, p, q, w, ep, 384);
            prop_assert!(rel_scaled(sc, st) < 1e-14, "symmetrized rel {}", rel_scaled(sc, st));
        }

        /// Symmetrization erases the end-attachment choice (inflation).
        #[test]
        fn symmetrized_attachment_independent(
            lp in -3.0f64..0.5,
            lq in -3.0f64..0.5,
            w in -1.0f64..1.0,
            lep in -1.0f64..1.3,
            frac in 0.01f64..0.9,
        ) {
            let p = 10f64.powf(lp);
            let q = 10f64.powf(lq);
            let ep = -(10f64.powf(lep));
            let pr = bare_params(ep * frac, 1.0);
            let sp = sym_compose_bf(EraTag::Inflation, &pr, p, q, w, ep, EndArrangement::InternalP, 320);
            let sq = sym_compose_bf(EraTag::Inflation, &pr, p, q, w, ep, EndArrangement::ExternalQ, 320);
            prop_assert!(rel_scaled(sp, sq) < 1e-14, "rel {}", rel_scaled(sp, sq));
        }
    }
}

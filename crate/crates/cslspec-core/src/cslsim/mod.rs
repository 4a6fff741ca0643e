//! Single-mode collapse-dynamics test bench.
//!
//! A truncated harmonic oscillator is evolved three independent ways under
//! the same collapse coupling:
//!
//! 1. the density-matrix master equation with a double-commutator collapse
//!    term ([`evolve_master`]);
//! 2. an ensemble of linear stochastic trajectories whose plain pure-state
//!    average reproduces that master equation ([`evolve_trajectory`],
//!    [`ensemble_expectation`]);
//! 3. first-order perturbation theory in the collapse rate
//!    ([`perturbative_expectation`]).
//!
//! Route 3 is the same approximation scheme the cosmological corrections are
//! built on, so checking it against routes 1 and 2 here — in a system small
//! enough to audit by hand — validates the machinery in isolation.
//!
//! Conventions: the collapse strength enters every route through the single
//! contracted rate `gamma_eff` (dimension 1/time). Trajectories use the
//! *linear* unraveling: states are not renormalized along a path, and
//! ensemble averages weight every path equally. For the anti-Hermitian
//! generator used here each realization is in fact unitary, so path norms
//! stay at 1 up to integrator error; they are still tracked separately so
//! the estimator does not silently assume this.

mod master;
mod perturbative;
mod trajectory;

pub use master::evolve_master;
pub use perturbative::{perturbative_expectation, PerturbativeEstimate};
pub use trajectory::{
    ensemble_expectation, ensemble_expectations, evolve_trajectory, EnsembleStats, Trajectory,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::CoreError;

/// Dense complex matrix used throughout the test bench.
pub type CMat = DMatrix<Complex64>;
/// Dense complex state vector.
pub type CVec = DVector<Complex64>;

/// Largest acceptable Hermiticity defect, relative to the matrix scale.
const HERMITICITY_TOL: f64 = 1e-12;

/// Collapse operator selection for [`ToySystem::new`].
///
/// All three choices are Hermitian in the truncated number basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseOp {
    /// Number operator `n = a† a`.
    Number,
    /// Squared position `x² = (a + a†)² / (2 ω)`.
    PositionSq,
    /// The system Hamiltonian itself (commuting collapse channel).
    Hamiltonian,
}

/// Truncated harmonic oscillator with a collapse channel.
///
/// `hamiltonian` and `collapse_op` are validated Hermitian to `1e-12`
/// (relative to their largest entry) at construction, and `dim >= 3` so the
/// operator algebra is not degenerate.
#[derive(Debug, Clone)]
pub struct ToySystem {
    pub dim: usize,
    pub omega: f64,
    pub gamma_eff: f64,
    pub hamiltonian: CMat,
    pub collapse_op: CMat,
}

impl ToySystem {
    /// Oscillator `H = ω (n + 1/2)` with the selected collapse operator.
    pub fn new(dim: usize, omega: f64, gamma_eff: f64, op: CollapseOp) -> Result<Self, CoreError> {
        if !(omega > 0.0) {
            return Err(CoreError::validation("omega", "must be positive"));
        }
        let hamiltonian = oscillator_hamiltonian(dim, omega);
        let collapse_op = match op {
            CollapseOp::Number => number_operator(dim),
            CollapseOp::PositionSq => position_sq_operator(dim, omega),
            CollapseOp::Hamiltonian => hamiltonian.clone(),
        };
        Self::with_operators(dim, omega, gamma_eff, hamiltonian, collapse_op)
    }

    /// Build from explicit operators. Both must be `dim × dim` Hermitian.
    pub fn with_operators(
        dim: usize,
        omega: f64,
        gamma_eff: f64,
        hamiltonian: CMat,
        collapse_op: CMat,
    ) -> Result<Self, CoreError> {
        if dim < 3 {
            return Err(CoreError::validation(
                "dim",
                "need at least 3 levels for a non-degenerate operator algebra",
            ));
        }
        if !(omega > 0.0) {
            return Err(CoreError::validation("omega", "must be positive"));
        }
        if !(gamma_eff >= 0.0) {
            return Err(CoreError::validation("gamma_eff", "must be non-negative"));
        }
        for (name, m) in [("hamiltonian", &hamiltonian), ("collapse_op", &collapse_op)] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(CoreError::validation(name, "shape must match dim"));
            }
            let defect = hermiticity_defect(m);
            if !(defect <= HERMITICITY_TOL) {
                return Err(CoreError::validation(
                    name,
                    format!("not Hermitian: defect {defect:.3e} exceeds {HERMITICITY_TOL:.0e}"),
                ));
            }
        }
        Ok(ToySystem {
            dim,
            omega,
            gamma_eff,
            hamiltonian,
            collapse_op,
        })
    }

    /// Spectral norm of the collapse operator (largest |eigenvalue|).
    ///
    /// Used by the stochastic step-size precondition and the perturbative
    /// regime check.
    pub fn collapse_norm(&self) -> f64 {
        spectral_norm(&self.collapse_op)
    }
}

/// Truncated annihilation operator `a`, `a|n⟩ = √n |n−1⟩`.
pub fn annihilation_operator(dim: usize) -> CMat {
    CMat::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Number operator `n = a† a` (diagonal `0, 1, …, dim−1`).
pub fn number_operator(dim: usize) -> CMat {
    CMat::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Oscillator Hamiltonian `H = ω (n + 1/2)`.
pub fn oscillator_hamiltonian(dim: usize, omega: f64) -> CMat {
    CMat::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(omega * (i as f64 + 0.5), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Squared position `x² = (a + a†)² / (2 ω)` in the truncated basis.
///
/// Truncation clips the top matrix elements (the product is formed from the
/// truncated `a`), which keeps the operator exactly Hermitian.
pub fn position_sq_operator(dim: usize, omega: f64) -> CMat {
    let a = annihilation_operator(dim);
    let x_unnorm = &a + a.adjoint();
    (&x_unnorm * &x_unnorm) * Complex64::new(1.0 / (2.0 * omega), 0.0)
}

/// `⟨ψ|O|ψ⟩` for Hermitian `O`; the imaginary residue is numerical noise.
pub fn expectation(observable: &CMat, psi: &CVec) -> f64 {
    psi.dotc(&(observable * psi)).re
}

/// Largest entrywise deviation of `m` from its adjoint, relative to the
/// matrix scale (clamped below at 1 so zero matrices pass trivially).
pub(crate) fn hermiticity_defect(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            scale = scale.max(m[(i, j)].norm());
            if j >= i {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
    }
    worst / scale
}

/// Largest |eigenvalue| of a Hermitian matrix.
pub(crate) fn spectral_norm(m: &CMat) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &e| acc.max(e.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn number_operator_counts_quanta() {
        let n = number_operator(4);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { i as f64 } else { 0.0 };
                assert_eq!(n[(i, j)], Complex64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn annihilation_ladder_algebra() {
        // a† a must reproduce the number operator on the truncated space.
        let a = annihilation_operator(5);
        let n = a.adjoint() * &a;
        let diff = (&n - number_operator(5)).norm();
        assert!(diff < 1e-14, "a†a deviates from n by {diff:.3e}");
    }

    #[test]
    fn position_sq_diagonal_matches_oscillator_virial() {
        // ⟨n|x²|n⟩ = (2n+1)/(2ω) away from the truncation edge; the top level
        // loses its a a† contribution and keeps only n/(2ω) + the a†a part.
        let dim = 4;
        let omega = 2.0;
        let xsq = position_sq_operator(dim, omega);
        for n in 0..dim - 1 {
            assert_relative_eq!(
                xsq[(n, n)].re,
                (2.0 * n as f64 + 1.0) / (2.0 * omega),
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(
            xsq[(dim - 1, dim - 1)].re,
            (dim - 1) as f64 / (2.0 * omega),
            max_relative = 1e-14
        );
        assert!(hermiticity_defect(&xsq) < 1e-15);
    }

    #[test]
    fn system_constructor_validates_inputs() {
        assert!(ToySystem::new(2, 1.0, 0.1, CollapseOp::Number).is_err());
        assert!(ToySystem::new(4, 0.0, 0.1, CollapseOp::Number).is_err());
        assert!(ToySystem::new(4, 1.0, -0.1, CollapseOp::Number).is_err());
        assert!(ToySystem::new(4, 1.0, 0.1, CollapseOp::PositionSq).is_ok());
    }

    #[test]
    fn non_hermitian_operator_rejected() {
        let dim = 3;
        let h = oscillator_hamiltonian(dim, 1.0);
        // a alone is not Hermitian.
        let bad = annihilation_operator(dim);
        let err = ToySystem::with_operators(dim, 1.0, 0.1, h, bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("collapse_op"), "{msg}");
        assert!(msg.contains("not Hermitian"), "{msg}");
    }

    #[test]
    fn spectral_norm_of_diagonal_is_max_entry() {
        let n = number_operator(6);
        assert_relative_eq!(spectral_norm(&n), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn expectation_of_number_in_fock_state() {
        let dim = 5;
        let n = number_operator(dim);
        let mut psi = CVec::zeros(dim);
        psi[3] = Complex64::new(1.0, 0.0);
        assert_relative_eq!(expectation(&n, &psi), 3.0, max_relative = 1e-14);
    }
}

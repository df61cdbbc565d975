//! Validated density operators and two-state discrimination instances.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{self, CMatrix, LinalgError};

/// Eigenvalues of a unit-trace operator above this count towards its rank.
pub const RANK_TOL: f64 = 1e-9;
/// Allowed deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues below `-NEGATIVE_TOL` make a matrix an invalid state.
pub const NEGATIVE_TOL: f64 = 1e-10;
/// Allowed deviation of `eta1 + eta2` from one.
pub const PRIOR_TOL: f64 = 1e-12;

/// Drops float noise below 1e-12 so reported residuals read cleanly.
fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("NonHermitian residual {residual:e}")]
    NonHermitian { residual: f64 },
    #[error("BadTrace residual {} (trace {})", round12(*residual), round12(*trace))]
    BadTrace { trace: f64, residual: f64 },
    #[error("NotPSD min eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },
    #[error("DimensionMismatch: rho1 is {dim1}-dimensional, rho2 is {dim2}-dimensional")]
    DimensionMismatch { dim1: usize, dim2: usize },
    #[error("DegeneratePrior: eta1 = {eta1} must lie strictly inside (0, 1)")]
    DegeneratePrior { eta1: f64 },
}

impl From<LinalgError> for StateError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NonSquare { rows, cols } => StateError::NonSquare { rows, cols },
            LinalgError::NonHermitian { residual } => StateError::NonHermitian { residual },
            LinalgError::NotPsd { min_eigenvalue } => StateError::NotPsd { min_eigenvalue },
            LinalgError::DimensionMismatch { .. } => StateError::NonSquare { rows: 0, cols: 0 },
        }
    }
}

/// A Hermitian, positive-semidefinite, unit-trace matrix with its spectral data.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    mat: CMatrix,
    eigenvalues: Vec<f64>,
    support: CMatrix,
}

impl DensityOperator {
    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn rank(&self) -> usize {
        self.support.cols()
    }

    /// Eigenvalues of the state, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal columns spanning the support (eigenvectors of nonzero eigenvalues).
    pub fn support_basis(&self) -> &CMatrix {
        &self.support
    }

    /// Projector onto the support.
    pub fn support_projector(&self) -> CMatrix {
        &self.support * &self.support.adjoint()
    }

    /// Pure state `|psi><psi|` from an arbitrary nonzero vector (normalised here).
    pub fn pure(psi: &[C64]) -> Result<Self, StateError> {
        let n = linalg::norm(psi);
        let unit: Vec<C64> = psi.iter().map(|x| x / n).collect();
        validate_density(CMatrix::outer(&unit, &unit))
    }
}

/// Checks Hermiticity, trace and positivity; computes rank and support.
pub fn validate_density(mat: CMatrix) -> Result<DensityOperator, StateError> {
    if !mat.is_square() {
        return Err(StateError::NonSquare {
            rows: mat.rows(),
            cols: mat.cols(),
        });
    }
    let residual = mat.hermitian_residual();
    if residual > linalg::HERMITIAN_TOL {
        return Err(StateError::NonHermitian { residual });
    }
    let trace = mat.trace().re;
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(StateError::BadTrace {
            trace,
            residual: (trace - 1.0).abs(),
        });
    }
    let mat = mat.hermitian_part();
    let eig = linalg::eigh(&mat)?;
    let min = eig.min_eigenvalue();
    if min < -NEGATIVE_TOL {
        return Err(StateError::NotPsd { min_eigenvalue: min });
    }
    let cols: Vec<_> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > RANK_TOL)
        .map(|(k, _)| eig.vector(k))
        .collect();
    let support = CMatrix::from_columns(mat.rows(), &cols);
    Ok(DensityOperator {
        mat,
        eigenvalues: eig.eigenvalues,
        support,
    })
}

/// The pair of states to discriminate together with their priors.
#[derive(Debug, Clone)]
pub struct DiscriminationInstance {
    pub rho1: DensityOperator,
    pub rho2: DensityOperator,
    pub eta1: f64,
    pub eta2: f64,
    joint_dim: usize,
}

impl DiscriminationInstance {
    pub fn dim(&self) -> usize {
        self.rho1.dim()
    }

    /// Dimension of the span of both supports.
    pub fn joint_dim(&self) -> usize {
        self.joint_dim
    }

    /// Equal ranks `d` whose supports jointly span `2d` dimensions.
    pub fn is_standard_shape(&self) -> bool {
        let d = self.rho1.rank();
        d > 0 && self.rho2.rank() == d && self.joint_dim == 2 * d
    }

    /// Common rank when the instance has standard shape.
    pub fn rank(&self) -> Option<usize> {
        self.is_standard_shape().then(|| self.rho1.rank())
    }

    /// `sqrt(eta2 / eta1)`
    pub fn prior_ratio(&self) -> f64 {
        (self.eta2 / self.eta1).sqrt()
    }

    /// Same states with a different prior for the first state.
    pub fn with_prior(&self, eta1: f64) -> Result<Self, StateError> {
        check_prior(eta1)?;
        Ok(Self {
            eta1,
            eta2: 1.0 - eta1,
            ..self.clone()
        })
    }
}

fn check_prior(eta1: f64) -> Result<(), StateError> {
    if !(eta1 > 0.0 && eta1 < 1.0) {
        return Err(StateError::DegeneratePrior { eta1 });
    }
    Ok(())
}

pub fn make_instance(
    rho1: DensityOperator,
    rho2: DensityOperator,
    eta1: f64,
) -> Result<DiscriminationInstance, StateError> {
    if rho1.dim() != rho2.dim() {
        return Err(StateError::DimensionMismatch {
            dim1: rho1.dim(),
            dim2: rho2.dim(),
        });
    }
    check_prior(eta1)?;
    let sum = &rho1.support_projector() + &rho2.support_projector();
    let eig = linalg::eigh(&sum.hermitian_part())?;
    let joint_dim = eig.eigenvalues.iter().filter(|&&l| l > RANK_TOL).count();
    Ok(DiscriminationInstance {
        rho1,
        rho2,
        eta1,
        eta2: 1.0 - eta1,
        joint_dim,
    })
}

/// Projectors onto the supports of the two states.
#[derive(Debug, Clone)]
pub struct SupportProjectors {
    pub p1: CMatrix,
    pub p2: CMatrix,
}

pub fn support_projectors(inst: &DiscriminationInstance) -> SupportProjectors {
    SupportProjectors {
        p1: inst.rho1.support_projector(),
        p2: inst.rho2.support_projector(),
    }
}

/// Orthonormal basis of the joint support, from the range of `P1 + P2`.
pub fn joint_support_basis(inst: &DiscriminationInstance) -> CMatrix {
    let proj = support_projectors(inst);
    let sum = (&proj.p1 + &proj.p2).hermitian_part();
    linalg::range_basis(&sum, RANK_TOL).expect("sum of projectors is Hermitian")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn maximally_mixed_qubit() {
        let rho = validate_density(CMatrix::diag_real(&[0.5, 0.5])).unwrap();
        assert_eq!(rho.rank(), 2);
        let p = rho.support_projector();
        assert!(linalg::distance(&p, &CMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn pure_axis_state() {
        let rho = validate_density(CMatrix::diag_real(&[1.0, 0.0])).unwrap();
        assert_eq!(rho.rank(), 1);
        let s = rho.support_basis().column(0);
        assert!((s[0] - c(1.0)).norm() < 1e-15 && s[1].norm() < 1e-15);
    }

    #[test]
    fn bad_trace_is_reported_with_residual() {
        match validate_density(CMatrix::diag_real(&[0.6, 0.6])) {
            Err(StateError::BadTrace { residual, .. }) => assert!((residual - 0.2).abs() < 1e-12),
            other => panic!("expected BadTrace, got {other:?}"),
        }
    }

    #[test]
    fn negative_and_non_hermitian_rejected() {
        assert!(matches!(
            validate_density(CMatrix::diag_real(&[1.1, -0.1])),
            Err(StateError::NotPsd { .. })
        ));
        let m = CMatrix::from_real_rows(&[&[0.5, 0.1], &[0.0, 0.5]]);
        assert!(matches!(validate_density(m), Err(StateError::NonHermitian { .. })));
    }

    #[test]
    fn orthogonal_pure_qubits_are_standard() {
        let r1 = DensityOperator::pure(&[c(1.0), c(0.0)]).unwrap();
        let r2 = DensityOperator::pure(&[c(0.0), c(1.0)]).unwrap();
        let inst = make_instance(r1, r2, 0.5).unwrap();
        assert!(inst.is_standard_shape());
        assert_eq!(inst.rank(), Some(1));
    }

    #[test]
    fn identical_states_not_standard() {
        let r = validate_density(CMatrix::diag_real(&[0.5, 0.5, 0.0, 0.0])).unwrap();
        let inst = make_instance(r.clone(), r, 0.3).unwrap();
        assert_eq!(inst.joint_dim(), 2);
        assert!(!inst.is_standard_shape());
    }

    #[test]
    fn instance_errors() {
        let a = validate_density(CMatrix::diag_real(&[1.0, 0.0])).unwrap();
        let b = validate_density(CMatrix::diag_real(&[1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            make_instance(a.clone(), b, 0.5),
            Err(StateError::DimensionMismatch { .. })
        ));
        for eta in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(matches!(
                make_instance(a.clone(), a.clone(), eta),
                Err(StateError::DegeneratePrior { .. })
            ));
        }
    }

    #[test]
    fn projector_of_pure_state_is_the_state() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rho = DensityOperator::pure(&[C64::new(h, 0.0), C64::new(0.0, h)]).unwrap();
        assert!(linalg::distance(&rho.support_projector(), rho.matrix()) < 1e-14);
    }
}

//! Fidelity of two states and the fidelity-bound diagnostics.

use serde::Serialize;

use crate::canonical::CanonicalFrame;
use crate::linalg::{self, CMatrix, LinalgError};
use crate::states::{support_projectors, DensityOperator, DiscriminationInstance};

/// Maximum gap between the general and the diagonal-form fidelity for the
/// closed-form measurement to be used.
pub const APPLICABILITY_TOL: f64 = 1e-8;
/// `s_mat` and `r_mat` closer than this (max entry) put a pair in the similar class.
pub const CLASS_TOL: f64 = 1e-9;

/// `Tr sqrt(sqrt(rho2) rho1 sqrt(rho2))`
pub fn fidelity_general(rho1: &DensityOperator, rho2: &DensityOperator) -> Result<f64, LinalgError> {
    fidelity_of_matrices(rho1.matrix(), rho2.matrix())
}

pub fn fidelity_of_matrices(rho1: &CMatrix, rho2: &CMatrix) -> Result<f64, LinalgError> {
    let root2 = linalg::sqrt_psd(rho2)?;
    let inner = (&(&root2 * rho1) * &root2).hermitian_part();
    let eig = linalg::eigh(&inner)?;
    Ok(eig.sqrt_eigenvalue_sum())
}

/// Second route: `Tr |sqrt(rho1) sqrt(rho2)|`.
pub fn fidelity_trace_norm(rho1: &DensityOperator, rho2: &DensityOperator) -> Result<f64, LinalgError> {
    let a = linalg::sqrt_psd(rho1.matrix())?;
    let b = linalg::sqrt_psd(rho2.matrix())?;
    linalg::trace_norm(&(&a * &b))
}

/// `sum_i C_i sqrt(r_i s_i)` from the diagonal of the canonical density matrices.
pub fn fidelity_diagonal_form(frame: &CanonicalFrame) -> f64 {
    let r = frame.r_diag();
    let s = frame.s_diag();
    frame
        .overlaps
        .iter()
        .zip(r.iter().zip(&s))
        .map(|(c, (ri, si))| c * (ri.max(0.0) * si.max(0.0)).sqrt())
        .sum()
}

/// Whether `s_mat` equals `r_mat` entrywise within `CLASS_TOL`.
pub fn is_similar_class(frame: &CanonicalFrame) -> bool {
    (&frame.s_mat - &frame.r_mat).max_abs() <= CLASS_TOL
}

/// `sum_i C_i r_i`, defined for the similar class only.
pub fn fidelity_class_form(frame: &CanonicalFrame) -> Option<f64> {
    is_similar_class(frame).then(|| {
        frame
            .overlaps
            .iter()
            .zip(frame.r_diag())
            .map(|(c, r)| c * r)
            .sum()
    })
}

pub fn closed_form_applicable(frame: &CanonicalFrame, f_general: f64) -> bool {
    (f_general - fidelity_diagonal_form(frame)).abs() <= APPLICABILITY_TOL
}

/// `[Tr(P2 rho1) / F, F / Tr(P1 rho2)]`; the bound can only be reached for
/// `sqrt(eta2/eta1)` inside it. Endpoints are `0` / `inf` when `F` vanishes.
pub fn necessary_interval(inst: &DiscriminationInstance, f: f64) -> (f64, f64) {
    let proj = support_projectors(inst);
    let t21 = proj.p2.trace_product(inst.rho1.matrix()).re;
    let t12 = proj.p1.trace_product(inst.rho2.matrix()).re;
    let lo = if f > 0.0 { t21 / f } else { 0.0 };
    let hi = if t12 > 0.0 { f / t12 } else { f64::INFINITY };
    (lo, hi)
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub f_general: f64,
    pub f_diagonal_form: f64,
    pub f_class_form: Option<f64>,
    pub closed_form_applicable: bool,
    /// `2 sqrt(eta1 eta2) F`
    pub bound: f64,
    pub necessary_interval: (f64, f64),
}

pub fn fidelity_report(
    inst: &DiscriminationInstance,
    frame: &CanonicalFrame,
) -> Result<FidelityReport, LinalgError> {
    let f_general = fidelity_general(&inst.rho1, &inst.rho2)?;
    Ok(FidelityReport {
        f_general,
        f_diagonal_form: fidelity_diagonal_form(frame),
        f_class_form: fidelity_class_form(frame),
        closed_form_applicable: closed_form_applicable(frame, f_general),
        bound: 2.0 * (inst.eta1 * inst.eta2).sqrt() * f_general,
        necessary_interval: necessary_interval(inst, f_general),
    })
}

//! Closed-form optimal unambiguous measurement.
//!
//! Applies when the fidelity of the pair equals `sum_i C_i sqrt(r_i s_i)` in
//! the canonical frame. Each canonical plane `i` then behaves like a pair of
//! pure states with overlap `C_i` and effective priors `eta1 r_i`, `eta2 s_i`.
//! Writing `t = sqrt(eta2/eta1)` and `w_i = sqrt(r_i/s_i)`:
//!
//! * `t < C_i w_i`: only state 1 is detected in plane `i` (`alpha = 1, beta = 0`);
//! * `t > w_i / C_i`: only state 2 is detected (`alpha = 0, beta = 1`);
//! * otherwise the plane needs a three-outcome POVM with
//!   `alpha = (1 - C_i t / w_i) / S_i^2`, `beta = (1 - C_i w_i / t) / S_i^2`.
//!
//! The detection operators are `Pi1 = sum alpha_i |v_i><v_i|`,
//! `Pi2 = sum beta_i |w_i><w_i|` and `Pi0 = I - Pi1 - Pi2`.

use serde::Serialize;
use thiserror::Error;

use crate::canonical::{build_frame, CanonicalFrame, FrameError};
use crate::fidelity::{self, FidelityReport};
use crate::linalg::{self, CMatrix, LinalgError};
use crate::oracle::{self, OracleConfig, OracleError};
use crate::states::DiscriminationInstance;

/// Relative slack when comparing the prior ratio against a threshold.
pub const TIE_TOL: f64 = 1e-12;
/// Negative eigenvalues of `Pi0` beyond this signal an inconsistent plan.
pub const PI0_TOL: f64 = 1e-9;
/// Fidelity gaps above this (but within the applicability tolerance) trigger
/// an oracle cross-check of the closed form.
pub const CROSS_CHECK_MARGIN: f64 = 1e-10;

const WEIGHT_ZERO: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("ClosedFormNotApplicable: |F - sum C_i sqrt(r_i s_i)| = {gap:e}")]
    ClosedFormNotApplicable { gap: f64 },
    #[error("Pi0NotPSD: min eigenvalue {min_eigenvalue:e}")]
    Pi0NotPsd { min_eigenvalue: f64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl SolveError {
    pub fn is_shape_error(&self) -> bool {
        matches!(
            self,
            SolveError::Frame(FrameError::NotStandardShape { .. })
                | SolveError::Frame(FrameError::DegenerateOverlap { .. })
                | SolveError::ClosedFormNotApplicable { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    ProjectOn1,
    Povm,
    ProjectOn2,
}

impl Regime {
    /// Contribution of one plane to the region index.
    pub fn weight(self) -> usize {
        match self {
            Regime::ProjectOn1 => 0,
            Regime::Povm => 1,
            Regime::ProjectOn2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlanEntry {
    pub alpha: f64,
    pub beta: f64,
    pub regime: Regime,
    /// `C_i sqrt(r_i/s_i)`
    pub lower: f64,
    /// `sqrt(r_i/s_i) / C_i`
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientPlan {
    pub prior_ratio: f64,
    pub entries: Vec<PlanEntry>,
}

impl CoefficientPlan {
    /// Which of the `2d + 1` prior-ratio regions the plan belongs to.
    ///
    /// Counts, over all planes, the thresholds the ratio has passed; a ratio
    /// sitting exactly on a threshold belongs to the POVM side.
    pub fn region_index(&self) -> usize {
        self.entries.iter().map(|e| e.regime.weight()).sum()
    }

    /// All planes in the POVM regime: the fidelity bound is reached.
    pub fn is_saturated(&self) -> bool {
        self.entries.iter().all(|e| e.regime == Regime::Povm)
    }

    /// `[max_i lower_i, min_i upper_i]`; empty when `lo > hi`.
    pub fn achieved_interval(&self) -> (f64, f64) {
        let lo = self.entries.iter().map(|e| e.lower).fold(0.0, f64::max);
        let hi = self
            .entries
            .iter()
            .map(|e| e.upper)
            .fold(f64::INFINITY, f64::min);
        (lo, hi)
    }

    pub fn alpha_matrix(&self) -> CMatrix {
        CMatrix::diag_real(&self.entries.iter().map(|e| e.alpha).collect::<Vec<_>>())
    }

    pub fn beta_matrix(&self) -> CMatrix {
        CMatrix::diag_real(&self.entries.iter().map(|e| e.beta).collect::<Vec<_>>())
    }
}

/// Per-plane coefficients, after checking that the closed form applies.
pub fn plan_coefficients(
    frame: &CanonicalFrame,
    eta1: f64,
    eta2: f64,
) -> Result<CoefficientPlan, SolveError> {
    let f = fidelity::fidelity_of_matrices(&frame.rho1(), &frame.rho2())?;
    let gap = (f - fidelity::fidelity_diagonal_form(frame)).abs();
    if gap > fidelity::APPLICABILITY_TOL {
        return Err(SolveError::ClosedFormNotApplicable { gap });
    }
    Ok(plan_for_priors(frame, eta1, eta2))
}

/// Per-plane coefficients without the applicability check; callers sweeping
/// many priors over one frame check once and then call this.
pub fn plan_for_priors(frame: &CanonicalFrame, eta1: f64, eta2: f64) -> CoefficientPlan {
    let t = (eta2 / eta1).sqrt();
    let r = frame.r_diag();
    let s = frame.s_diag();
    let entries = (0..frame.rank())
        .map(|i| plan_entry(frame.overlaps[i], frame.sines[i], r[i], s[i], t))
        .collect();
    CoefficientPlan {
        prior_ratio: t,
        entries,
    }
}

fn plan_entry(c: f64, sine: f64, r: f64, s: f64, t: f64) -> PlanEntry {
    if c == 0.0 {
        return PlanEntry {
            alpha: 1.0,
            beta: 1.0,
            regime: Regime::Povm,
            lower: 0.0,
            upper: f64::INFINITY,
        };
    }
    let weight = match (r > WEIGHT_ZERO, s > WEIGHT_ZERO) {
        (true, true) => (r / s).sqrt(),
        (true, false) => f64::INFINITY,
        (false, true) => 0.0,
        (false, false) => 1.0,
    };
    let lower = c * weight;
    let upper = weight / c;
    let regime = if t < lower * (1.0 - TIE_TOL) {
        Regime::ProjectOn1
    } else if t > upper * (1.0 + TIE_TOL) {
        Regime::ProjectOn2
    } else {
        Regime::Povm
    };
    let (alpha, beta) = match regime {
        Regime::ProjectOn1 => (1.0, 0.0),
        Regime::ProjectOn2 => (0.0, 1.0),
        Regime::Povm => {
            let s2 = sine * sine;
            let a = (1.0 - c * t / weight) / s2;
            let b = (1.0 - c * weight / t) / s2;
            (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0))
        }
    };
    PlanEntry {
        alpha,
        beta,
        regime,
        lower,
        upper,
    }
}

/// Detection operators in ambient coordinates plus their canonical coefficients.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub pi0: CMatrix,
    pub pi1: CMatrix,
    pub pi2: CMatrix,
    /// `alpha_ij` with `Pi1 = sum alpha_ij |v_i><v_j|`
    pub alpha: CMatrix,
    /// `beta_ij` with `Pi2 = sum beta_ij |w_i><w_j|`
    pub beta: CMatrix,
}

impl Measurement {
    /// `eta1 Tr(rho1 Pi0) + eta2 Tr(rho2 Pi0)`
    pub fn failure_probability(&self, inst: &DiscriminationInstance) -> f64 {
        inst.eta1 * self.pi0.trace_product(inst.rho1.matrix()).re
            + inst.eta2 * self.pi0.trace_product(inst.rho2.matrix()).re
    }

    /// `sqrt(Pi0)` with eigenvalues up to `PI0_TOL` treated as the null space.
    ///
    /// `Pi0` is built as `I - Pi1 - Pi2`, so its null eigenvalues come out
    /// around 1e-14; a plain square root would inflate them to 1e-7.
    pub fn sqrt_pi0(&self) -> Result<CMatrix, LinalgError> {
        Ok(linalg::eigh(&self.pi0)?.map(|l| if l <= PI0_TOL { 0.0 } else { l.sqrt() }))
    }

    /// `(Pi0, Pi1, Pi2)` from `Pi1`, `Pi2` on an ambient space of dimension `dim`.
    pub fn from_detectors(pi1: CMatrix, pi2: CMatrix, alpha: CMatrix, beta: CMatrix) -> Self {
        let n = pi1.rows();
        let pi0 = (&(&CMatrix::identity(n) - &pi1) - &pi2).hermitian_part();
        Self {
            pi0,
            pi1: pi1.hermitian_part(),
            pi2: pi2.hermitian_part(),
            alpha,
            beta,
        }
    }
}

/// Builds `Pi1, Pi2` from a diagonal coefficient plan; `Pi0` completes the identity.
pub fn assemble_measurement(
    frame: &CanonicalFrame,
    plan: &CoefficientPlan,
) -> Result<Measurement, SolveError> {
    assemble_from_coefficients(frame, &plan.alpha_matrix(), &plan.beta_matrix())
}

/// The general Ansatz with full coefficient matrices.
pub fn assemble_from_coefficients(
    frame: &CanonicalFrame,
    alpha: &CMatrix,
    beta: &CMatrix,
) -> Result<Measurement, SolveError> {
    let pi1 = alpha.embed(&frame.v_basis);
    let pi2 = beta.embed(&frame.w_basis);
    let m = Measurement::from_detectors(pi1, pi2, alpha.clone(), beta.clone());
    let min = linalg::eigh(&m.pi0)?.min_eigenvalue();
    if min < -PI0_TOL {
        return Err(SolveError::Pi0NotPsd { min_eigenvalue: min });
    }
    Ok(m)
}

/// Spectrum (ascending) of `Pi0` compressed onto the plane spanned by `r_i, w_i`.
pub fn block_spectrum(frame: &CanonicalFrame, pi0: &CMatrix, i: usize) -> [f64; 2] {
    let block = pi0.compress(&frame.plane_basis(i)).hermitian_part();
    let eig = linalg::eigh(&block).expect("compressed Hermitian block");
    [eig.eigenvalues[0], eig.eigenvalues[1]]
}

/// Nonzero eigenvalue of the `Pi0` block of one plane.
///
/// The block `[[1 - a S^2, a S C], [a S C, 1 - a C^2 - b]]` has determinant
/// `1 - a - b + a b S^2`, which vanishes for every regime of the plan, so the
/// remaining eigenvalue is the trace `2 - a - b`.
pub fn expected_block_eigenvalue(entry: &PlanEntry) -> f64 {
    2.0 - entry.alpha - entry.beta
}

/// `1 - sum_i S_i^2 (eta1 alpha_i r_i + eta2 beta_i s_i)`
pub fn failure_probability(frame: &CanonicalFrame, plan: &CoefficientPlan, eta1: f64, eta2: f64) -> f64 {
    failure_probability_general(frame, &plan.alpha_matrix(), &plan.beta_matrix(), eta1, eta2)
}

/// `1 - sum_ij S_i S_j (eta1 alpha_ij r_ji + eta2 beta_ij s_ji)`
pub fn failure_probability_general(
    frame: &CanonicalFrame,
    alpha: &CMatrix,
    beta: &CMatrix,
    eta1: f64,
    eta2: f64,
) -> f64 {
    let d = frame.rank();
    let mut success = 0.0;
    for i in 0..d {
        for j in 0..d {
            let ss = frame.sines[i] * frame.sines[j];
            let term = alpha[(i, j)] * frame.r_mat[(j, i)] * eta1 + beta[(i, j)] * frame.s_mat[(j, i)] * eta2;
            success += ss * term.re;
        }
    }
    1.0 - success
}

/// Optimal failure probability of the similar class written piece by piece.
///
/// `overlaps` must be ascending and `weights` are the diagonal elements `r_i`.
/// Returns the value and the region index in `0..=2d`.
pub fn similar_class_failure(overlaps: &[f64], weights: &[f64], eta1: f64) -> (f64, usize) {
    let d = overlaps.len();
    let eta2 = 1.0 - eta1;
    let t = (eta2 / eta1).sqrt();
    let g = 2.0 * (eta1 * eta2).sqrt();
    let s2 = |i: usize| 1.0 - overlaps[i] * overlaps[i];
    let inv = |c: f64| if c > 0.0 { 1.0 / c } else { f64::INFINITY };
    let le = |a: f64, b: f64| a <= b * (1.0 + TIE_TOL);
    let lt = |a: f64, b: f64| a < b * (1.0 - TIE_TOL);

    let povm_sum = |k: usize| -> f64 { (0..k).map(|i| (1.0 - g * overlaps[i]) * weights[i]).sum() };
    let von_neumann = |eta: f64, from: usize| -> f64 { eta * (from..d).map(|i| s2(i) * weights[i]).sum::<f64>() };

    if lt(t, overlaps[0]) {
        return (1.0 - von_neumann(eta1, 0), 0);
    }
    if lt(inv(overlaps[0]), t) {
        return (1.0 - von_neumann(eta2, 0), 2 * d);
    }
    let c_max = overlaps[d - 1];
    if le(c_max, t) && le(t, inv(c_max)) {
        let f: f64 = overlaps.iter().zip(weights).map(|(c, r)| c * r).sum();
        return (g * f, d);
    }
    if t < c_max {
        // C_k <= t < C_{k+1}
        let k = overlaps.iter().filter(|&&c| le(c, t)).count();
        (1.0 - povm_sum(k) - von_neumann(eta1, k), k)
    } else {
        // 1/C_{k+1} < t <= 1/C_k
        let k = overlaps.iter().filter(|&&c| le(t, inv(c))).count();
        (1.0 - povm_sum(k) - von_neumann(eta2, k), 2 * d - k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    ClosedForm,
    Numerical,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: Method,
    pub measurement: Measurement,
    pub q_opt: f64,
    pub fidelity: FidelityReport,
    /// `2 sqrt(eta1 eta2) F`
    pub bound: f64,
    pub saturated: bool,
    pub region_index: Option<usize>,
    pub necessary_interval: (f64, f64),
    pub achieved_interval: Option<(f64, f64)>,
    pub plan: Option<CoefficientPlan>,
    pub frame: CanonicalFrame,
    /// `Q_closed - Q_oracle` whenever the oracle was consulted.
    pub oracle_gap: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub oracle: OracleConfig,
    /// Always compare the closed form with the oracle.
    pub force_oracle_check: bool,
}

pub fn solve(inst: &DiscriminationInstance) -> Result<SolveReport, SolveError> {
    solve_with(inst, &SolveOptions::default())
}

pub fn solve_with(inst: &DiscriminationInstance, opts: &SolveOptions) -> Result<SolveReport, SolveError> {
    let frame = build_frame(inst)?;
    let fid = fidelity::fidelity_report(inst, &frame)?;
    if !fid.closed_form_applicable {
        return numerical(inst, frame, fid, &opts.oracle);
    }
    let plan = plan_for_priors(&frame, inst.eta1, inst.eta2);
    let measurement = assemble_measurement(&frame, &plan)?;
    let q_opt = failure_probability(&frame, &plan, inst.eta1, inst.eta2);
    let t = plan.prior_ratio;
    let achieved = plan.achieved_interval();
    let saturated = t >= achieved.0 * (1.0 - TIE_TOL) && t <= achieved.1 * (1.0 + TIE_TOL);

    let gap = (fid.f_general - fid.f_diagonal_form).abs();
    let mut oracle_gap = None;
    if opts.force_oracle_check || gap > CROSS_CHECK_MARGIN {
        let num = match oracle::optimize(inst, &opts.oracle) {
            Ok(r) => r,
            Err(OracleError::NotConverged { best }) => *best,
            Err(e) => return Err(e.into()),
        };
        let delta = q_opt - num.q_num;
        oracle_gap = Some(delta);
        if !opts.force_oracle_check && delta > 1e-6 {
            let mut report = numerical(inst, frame, fid, &opts.oracle)?;
            report.oracle_gap = Some(delta);
            return Ok(report);
        }
    }

    Ok(SolveReport {
        method: Method::ClosedForm,
        measurement,
        q_opt,
        bound: fid.bound,
        saturated,
        region_index: Some(plan.region_index()),
        necessary_interval: fid.necessary_interval,
        achieved_interval: Some(achieved),
        plan: Some(plan),
        fidelity: fid,
        frame,
        oracle_gap,
    })
}

fn numerical(
    inst: &DiscriminationInstance,
    frame: CanonicalFrame,
    fid: FidelityReport,
    cfg: &OracleConfig,
) -> Result<SolveReport, SolveError> {
    let res = oracle::optimize(inst, cfg)?;
    let saturated = (res.q_num - fid.bound).abs() <= 1e-7;
    Ok(SolveReport {
        method: Method::Numerical,
        measurement: res.measurement,
        q_opt: res.q_num,
        bound: fid.bound,
        saturated,
        region_index: None,
        necessary_interval: fid.necessary_interval,
        achieved_interval: None,
        plan: None,
        fidelity: fid,
        frame,
        oracle_gap: None,
    })
}

//! Numerical referee for the closed form.
//!
//! Maximises the success probability `eta1 Tr(rho1 Pi1) + eta2 Tr(rho2 Pi2)`
//! over every unambiguous measurement. Working inside the joint support,
//! `Pi1 = K2 A K2†` and `Pi2 = K1 B K1†` where `K1`, `K2` are orthonormal
//! bases of the kernels of rho1 and rho2 and `A`, `B` are arbitrary
//! Hermitian matrices. The bases come from the support projectors alone, so
//! nothing here depends on the canonical frame or on the closed form.
//!
//! Each step moves along the (constant) gradient and projects back onto the
//! feasible set `{A >= 0, B >= 0, Pi1 + Pi2 <= I}` with Dykstra's alternating
//! projections between `{A, B >= 0}` and `{Pi1 + Pi2 <= I}`. The projected
//! point is then scaled into exact feasibility before its objective is
//! scored, so every accepted iterate is a valid measurement.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, CMatrix, LinalgError};
use crate::solver::Measurement;
use crate::states::{joint_support_basis, DiscriminationInstance};

/// Objective decrease tolerated as projection noise before a step is rejected.
pub const ASCENT_SLACK: f64 = 1e-10;
/// A converged restart within this of the best success certifies the result.
pub const AGREEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub max_iters: usize,
    /// Initial gradient step; doubled after every accepted step and halved on rejection.
    pub step: f64,
    /// Upper limit for the step after repeated doubling.
    pub max_step: f64,
    /// Stationarity tolerance on the projected-gradient mapping
    /// `‖P(x + step g) - x‖ / step`, Frobenius norm over `(A, B)`.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Dykstra sweeps per projection.
    pub projection_iters: usize,
    /// Dykstra stops once an iterate moves less than this.
    pub projection_tol: f64,
    /// Run restarts on the rayon pool.
    pub parallel: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            step: 0.05,
            max_step: 1e6,
            tol: 1e-7,
            restarts: 8,
            seed: 0,
            projection_iters: 500,
            projection_tol: 1e-11,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub q_num: f64,
    /// `Pi1` in the oracle's basis of the kernel of rho2.
    pub alpha: CMatrix,
    /// `Pi2` in the oracle's basis of the kernel of rho1.
    pub beta: CMatrix,
    pub measurement: Measurement,
    pub iterations: usize,
    pub converged: bool,
    pub best_restart: usize,
    /// Final failure probability of every restart.
    pub restart_q: Vec<f64>,
    /// Success probability after each accepted step of the winning restart.
    pub trace: Vec<f64>,
}

impl OracleResult {
    /// Spread of the final values over all restarts.
    pub fn restart_spread(&self) -> f64 {
        let lo = self.restart_q.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.restart_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("NotStandardShape: the oracle needs equal ranks d spanning 2d dimensions")]
    NotStandardShape,
    #[error("NotConverged: best feasible failure probability {:.9}", best.q_num)]
    NotConverged { best: Box<OracleResult> },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The problem data in joint-support coordinates.
struct Problem {
    joint: CMatrix,
    k1: CMatrix,
    k2: CMatrix,
    grad_a: CMatrix,
    grad_b: CMatrix,
    m: usize,
}

impl Problem {
    fn new(inst: &DiscriminationInstance) -> Result<Self, OracleError> {
        if !inst.is_standard_shape() {
            return Err(OracleError::NotStandardShape);
        }
        let joint = joint_support_basis(inst);
        let m = joint.cols();
        let rho1 = inst.rho1.matrix().compress(&joint).hermitian_part();
        let rho2 = inst.rho2.matrix().compress(&joint).hermitian_part();
        let p1 = inst.rho1.support_projector().compress(&joint).hermitian_part();
        let p2 = inst.rho2.support_projector().compress(&joint).hermitian_part();
        let kernel = |p: &CMatrix| -> Result<CMatrix, LinalgError> {
            let eig = linalg::eigh(p)?;
            let cols: Vec<_> = (0..m)
                .filter(|&k| eig.eigenvalues[k] < 0.5)
                .map(|k| eig.vector(k))
                .collect();
            Ok(CMatrix::from_columns(m, &cols))
        };
        let k1 = kernel(&p1)?;
        let k2 = kernel(&p2)?;
        let grad_a = rho1.compress(&k2).scale(inst.eta1).hermitian_part();
        let grad_b = rho2.compress(&k1).scale(inst.eta2).hermitian_part();
        Ok(Self {
            joint,
            k1,
            k2,
            grad_a,
            grad_b,
            m,
        })
    }

    fn objective(&self, a: &CMatrix, b: &CMatrix) -> f64 {
        self.grad_a.trace_product(a).re + self.grad_b.trace_product(b).re
    }

    fn zero_dual(&self) -> (CMatrix, CMatrix) {
        (CMatrix::zeros(self.m, self.m), CMatrix::zeros(self.m, self.m))
    }

    fn lift(&self, a: &CMatrix, b: &CMatrix) -> (CMatrix, CMatrix) {
        (a.embed(&self.k2), b.embed(&self.k1))
    }

    /// Projection onto `{(K2 A K2†, K1 B K1†) : A, B >= 0}`.
    fn project_cones(&self, x: &CMatrix, y: &CMatrix) -> (CMatrix, CMatrix) {
        let a = clip(&x.compress(&self.k2));
        let b = clip(&y.compress(&self.k1));
        (a, b)
    }

    /// Projection onto `{(X, Y) : X + Y <= I}` in the product Frobenius metric.
    fn project_sum(&self, x: &CMatrix, y: &CMatrix) -> (CMatrix, CMatrix) {
        let sum = (x + y).hermitian_part();
        let eig = linalg::eigh(&sum).expect("Hermitian");
        if eig.max_eigenvalue() <= 1.0 {
            return (x.clone(), y.clone());
        }
        let excess = eig.map(|l| ((l - 1.0).max(0.0)) * 0.5);
        (x - &excess, y - &excess)
    }

    /// Dykstra's algorithm for the nearest feasible point to `(a0, b0)`.
    ///
    /// Written as block ascent on the dual: `dual` holds the normal-cone
    /// increment of the sum constraint and may be carried over from a nearby
    /// projection, which converges from any starting dual.
    fn project(&self, a0: &CMatrix, b0: &CMatrix, dual: &mut (CMatrix, CMatrix), cfg: &OracleConfig) -> (CMatrix, CMatrix) {
        let (x0, y0) = self.lift(a0, b0);
        let mut last: Option<(CMatrix, CMatrix)> = None;
        let mut cone = (CMatrix::zeros(self.k2.cols(), self.k2.cols()), CMatrix::zeros(self.k1.cols(), self.k1.cols()));
        for _ in 0..cfg.projection_iters {
            let ux = &x0 - &dual.0;
            let uy = &y0 - &dual.1;
            cone = self.project_cones(&ux, &uy);
            let (cx, cy) = self.lift(&cone.0, &cone.1);
            // w = x0 - (u - c)
            let wx = &(&x0 - &ux) + &cx;
            let wy = &(&y0 - &uy) + &cy;
            let (sx, sy) = self.project_sum(&wx, &wy);
            dual.0 = &wx - &sx;
            dual.1 = &wy - &sy;
            let done = last
                .as_ref()
                .is_some_and(|(lx, ly)| linalg::distance(&sx, lx) + linalg::distance(&sy, ly) < cfg.projection_tol);
            if done {
                break;
            }
            last = Some((sx, sy));
        }
        let (a, b) = cone;
        self.restore(a, b)
    }

    /// Scales PSD `(A, B)` so that `Pi1 + Pi2 <= I` holds exactly.
    fn restore(&self, a: CMatrix, b: CMatrix) -> (CMatrix, CMatrix) {
        let (x, y) = self.lift(&a, &b);
        let top = linalg::eigh(&(&x + &y).hermitian_part())
            .expect("Hermitian")
            .max_eigenvalue();
        if top > 1.0 {
            (a.scale(1.0 / top), b.scale(1.0 / top))
        } else {
            (a, b)
        }
    }

    fn measurement(&self, a: &CMatrix, b: &CMatrix) -> Measurement {
        let (x, y) = self.lift(a, b);
        let pi1 = x.embed(&self.joint);
        let pi2 = y.embed(&self.joint);
        Measurement::from_detectors(pi1, pi2, a.clone(), b.clone())
    }
}

fn clip(m: &CMatrix) -> CMatrix {
    linalg::project_psd(&m.hermitian_part()).expect("Hermitian")
}

struct RunOutcome {
    a: CMatrix,
    b: CMatrix,
    success: f64,
    iterations: usize,
    converged: bool,
    /// Objective after every accepted step.
    trace: Vec<f64>,
}

fn run(problem: &Problem, cfg: &OracleConfig, restart: usize) -> RunOutcome {
    let d = problem.k1.cols();
    let (mut a, mut b) = if restart == 0 {
        (CMatrix::zeros(d, d), CMatrix::zeros(d, d))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(restart as u64);
        let rand_psd = |rng: &mut ChaCha8Rng| {
            let g = CMatrix::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            (&g * &g.adjoint()).scale(0.5 / d as f64)
        };
        let a0 = rand_psd(&mut rng);
        let b0 = rand_psd(&mut rng);
        problem.project(&a0, &b0, &mut problem.zero_dual(), cfg)
    };
    let mut dual = problem.zero_dual();
    let mut f = problem.objective(&a, &b);
    let mut step = cfg.step;
    let mut converged = false;
    let mut iterations = 0;
    let mut trace = vec![f];
    while iterations < cfg.max_iters {
        iterations += 1;
        let a_try = &a + &problem.grad_a.scale(step);
        let b_try = &b + &problem.grad_b.scale(step);
        let mut trial_dual = dual.clone();
        let (a_new, b_new) = problem.project(&a_try, &b_try, &mut trial_dual, cfg);
        let f_new = problem.objective(&a_new, &b_new);
        if f_new < f - ASCENT_SLACK {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
            continue;
        }
        // gradient-mapping norm at the step just taken
        let stationarity = (linalg::distance(&a_new, &a) + linalg::distance(&b_new, &b)) / step;
        a = a_new;
        b = b_new;
        f = f_new;
        dual = trial_dual;
        trace.push(f);
        if stationarity <= cfg.tol {
            converged = true;
            break;
        }
        step = (step * 2.0).min(cfg.max_step);
    }
    RunOutcome {
        a,
        b,
        success: f,
        iterations,
        converged,
        trace,
    }
}

/// Best feasible measurement over all restarts.
pub fn optimize(inst: &DiscriminationInstance, cfg: &OracleConfig) -> Result<OracleResult, OracleError> {
    let problem = Problem::new(inst)?;
    let restarts = cfg.restarts.max(1);
    let outcomes: Vec<RunOutcome> = if cfg.parallel {
        (0..restarts).into_par_iter().map(|k| run(&problem, cfg, k)).collect()
    } else {
        (0..restarts).map(|k| run(&problem, cfg, k)).collect()
    };
    // max success, ties resolved by lowest restart index
    let mut best = 0;
    for (k, o) in outcomes.iter().enumerate() {
        if o.success > outcomes[best].success {
            best = k;
        }
    }
    let restart_q = outcomes.iter().map(|o| 1.0 - o.success).collect();
    let iterations = outcomes.iter().map(|o| o.iterations).sum();
    let converged = outcomes
        .iter()
        .any(|o| o.converged && o.success >= outcomes[best].success - AGREEMENT_TOL);
    let winner = &outcomes[best];
    let result = OracleResult {
        q_num: 1.0 - winner.success,
        alpha: winner.a.clone(),
        beta: winner.b.clone(),
        measurement: problem.measurement(&winner.a, &winner.b),
        iterations,
        converged,
        best_restart: best,
        restart_q,
        trace: winner.trace.clone(),
    };
    if converged {
        Ok(result)
    } else {
        Err(OracleError::NotConverged {
            best: Box::new(result),
        })
    }
}

/// Diagnostic residuals of a measurement against an instance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FeasibilityReport {
    /// Minimum eigenvalue of `Pi0, Pi1, Pi2`.
    pub min_eigenvalues: [f64; 3],
    /// Maximum eigenvalue of `Pi0, Pi1, Pi2`.
    pub max_eigenvalues: [f64; 3],
    /// `‖Pi0 + Pi1 + Pi2 - I‖_F`
    pub completeness: f64,
    /// `‖rho1 Pi2‖_F`
    pub rho1_pi2: f64,
    /// `‖rho2 Pi1‖_F`
    pub rho2_pi1: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.min_eigenvalues.iter().all(|&x| x >= -tol)
            && self.max_eigenvalues.iter().all(|&x| x <= 1.0 + tol)
            && self.completeness <= tol
            && self.rho1_pi2 <= tol
            && self.rho2_pi1 <= tol
    }
}

pub fn feasibility_check(inst: &DiscriminationInstance, m: &Measurement) -> FeasibilityReport {
    let ops = [&m.pi0, &m.pi1, &m.pi2];
    let mut min_eigenvalues = [0.0; 3];
    let mut max_eigenvalues = [0.0; 3];
    for (k, op) in ops.iter().enumerate() {
        let eig = linalg::eigh(&op.hermitian_part()).expect("Hermitian part");
        min_eigenvalues[k] = eig.min_eigenvalue();
        max_eigenvalues[k] = eig.max_eigenvalue();
    }
    let n = m.pi0.rows();
    let total = &(&m.pi0 + &m.pi1) + &m.pi2;
    FeasibilityReport {
        min_eigenvalues,
        max_eigenvalues,
        completeness: linalg::distance(&total, &CMatrix::identity(n)),
        rho1_pi2: (inst.rho1.matrix() * &m.pi2).frobenius_norm(),
        rho2_pi1: (inst.rho2.matrix() * &m.pi1).frobenius_norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similar;

    fn instance(d: usize, seed: u64) -> DiscriminationInstance {
        similar::generate(&similar::random_spec(d, seed)).unwrap().0
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let inst = instance(2, 5);
        let p = Problem::new(&inst).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut herm = || {
            CMatrix::from_fn(2, 2, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).hermitian_part()
        };
        let (a, b, da, db) = (herm(), herm(), herm(), herm());
        let success = |a: &CMatrix, b: &CMatrix| {
            let m = p.measurement(a, b);
            inst.eta1 * inst.rho1.matrix().trace_product(&m.pi1).re + inst.eta2 * inst.rho2.matrix().trace_product(&m.pi2).re
        };
        let h = 1e-6;
        let fd = (success(&(&a + &da.scale(h)), &(&b + &db.scale(h))) - success(&(&a - &da.scale(h)), &(&b - &db.scale(h)))) / (2.0 * h);
        let exact = p.grad_a.trace_product(&da).re + p.grad_b.trace_product(&db).re;
        assert!((fd - exact).abs() < 1e-6, "{fd} vs {exact}");
        assert!((p.objective(&a, &b) - success(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn accepted_steps_never_descend() {
        let inst = instance(3, 2);
        let p = Problem::new(&inst).unwrap();
        let cfg = OracleConfig::default();
        for restart in 0..3 {
            let out = run(&p, &cfg, restart);
            assert!(out.trace.windows(2).all(|w| w[1] >= w[0] - ASCENT_SLACK));
            assert!(out.converged);
        }
    }

    #[test]
    fn projection_lands_in_the_feasible_set() {
        let inst = instance(2, 8);
        let p = Problem::new(&inst).unwrap();
        let a0 = CMatrix::identity(2).scale(3.0);
        let b0 = CMatrix::diag_real(&[-1.0, 2.0]);
        let (a, b) = p.project(&a0, &b0, &mut p.zero_dual(), &OracleConfig::default());
        let (x, y) = p.lift(&a, &b);
        let top = linalg::eigh(&(&x + &y).hermitian_part()).unwrap().max_eigenvalue();
        assert!(top <= 1.0 + 1e-12);
        assert!(linalg::eigh(&a).unwrap().min_eigenvalue() >= -1e-12);
        assert!(linalg::eigh(&b).unwrap().min_eigenvalue() >= -1e-12);
    }
}

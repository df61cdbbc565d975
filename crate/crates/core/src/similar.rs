//! Generators for pairs related by independent rotations in the canonical planes.
//!
//! Coordinates are fixed as `|r_i> = e_i` and `|w_i> = e_{d+i}`. The rotation
//! `U_i(theta_i)` maps `e_i -> cos(theta_i) e_i + sin(theta_i) e_{d+i}` and
//! `e_{d+i} -> -sin(theta_i) e_i + cos(theta_i) e_{d+i}`; `rho2 = U rho1 U†`.
//!
//! The module also generates instances that are diagonal in the canonical
//! frame with independent weights for the two states.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::states::{make_instance, validate_density, DiscriminationInstance, StateError};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("BadSpec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarClassSpec {
    pub d: usize,
    /// `r_ij`, a `d x d` density matrix.
    pub r_mat: CMatrix,
    /// Rotation angles in `(0, pi/2]`.
    pub thetas: Vec<f64>,
    pub eta1: f64,
}

impl SimilarClassSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.d == 0 {
            return Err(SpecError::BadSpec("d must be at least 1".into()));
        }
        if self.r_mat.rows() != self.d || self.r_mat.cols() != self.d {
            return Err(SpecError::BadSpec(format!(
                "r_mat is {}x{}, expected {}x{}",
                self.r_mat.rows(),
                self.r_mat.cols(),
                self.d,
                self.d
            )));
        }
        if self.thetas.len() != self.d {
            return Err(SpecError::BadSpec(format!(
                "{} angles given for d = {}",
                self.thetas.len(),
                self.d
            )));
        }
        if let Some(th) = self
            .thetas
            .iter()
            .find(|&&th| !(th > 0.0 && th <= FRAC_PI_2 + 1e-12))
        {
            return Err(SpecError::BadSpec(format!("angle {th} outside (0, pi/2]")));
        }
        let rho = validate_density(self.r_mat.clone())?;
        if rho.rank() != self.d {
            return Err(SpecError::BadSpec(format!(
                "r_mat has rank {}, expected {}",
                rho.rank(),
                self.d
            )));
        }
        Ok(())
    }

    /// Overlaps `cos(theta_i)` in the given order.
    pub fn overlaps(&self) -> Vec<f64> {
        self.thetas.iter().map(|t| t.cos().max(0.0)).collect()
    }
}

/// The block-rotation unitary on `2d` dimensions.
pub fn block_rotation(thetas: &[f64]) -> CMatrix {
    let d = thetas.len();
    let mut u = CMatrix::identity(2 * d);
    for (i, &th) in thetas.iter().enumerate() {
        let (s, c) = th.sin_cos();
        u[(i, i)] = C64::new(c, 0.0);
        u[(d + i, i)] = C64::new(s, 0.0);
        u[(i, d + i)] = C64::new(-s, 0.0);
        u[(d + i, d + i)] = C64::new(c, 0.0);
    }
    u
}

/// Builds `(rho1, rho2 = U rho1 U†)` and returns `U` alongside the instance.
pub fn generate(spec: &SimilarClassSpec) -> Result<(DiscriminationInstance, CMatrix), SpecError> {
    spec.validate()?;
    let d = spec.d;
    let embed = CMatrix::from_fn(2 * d, d, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    let rho1 = spec.r_mat.embed(&embed).hermitian_part();
    let u = block_rotation(&spec.thetas);
    let rho2 = rho1.embed(&u).hermitian_part();
    let inst = make_instance(validate_density(rho1)?, validate_density(rho2)?, spec.eta1)?;
    Ok((inst, u))
}

/// Seeded random spec: `r_mat = A A† / Tr(A A†)` with uniform complex entries
/// of `A` in `[-1, 1]`, angles uniform in `[0.1, pi/2 - 0.1]`, prior uniform
/// in `[0.05, 0.95]`.
pub fn random_spec(d: usize, seed: u64) -> SimilarClassSpec {
    assert!(d >= 1, "rank must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
    });
    let gram = (&a * &a.adjoint()).hermitian_part();
    let r_mat = gram.scale(1.0 / gram.trace().re);
    let thetas = (0..d).map(|_| rng.gen_range(0.1..=FRAC_PI_2 - 0.1)).collect();
    let eta1 = rng.gen_range(0.05..=0.95);
    SimilarClassSpec {
        d,
        r_mat,
        thetas,
        eta1,
    }
}

/// A pair that is diagonal in its canonical frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSpec {
    pub overlaps: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub s_diag: Vec<f64>,
    pub eta1: f64,
}

/// `rho1 = sum r_i |e_i><e_i|`, `rho2 = sum s_i |s_i><s_i|` with
/// `|s_i> = C_i e_i + S_i e_{d+i}`.
pub fn generate_diagonal(spec: &DiagonalSpec) -> Result<DiscriminationInstance, SpecError> {
    let d = spec.overlaps.len();
    if d == 0 || spec.r_diag.len() != d || spec.s_diag.len() != d {
        return Err(SpecError::BadSpec("overlaps and weights must have equal nonzero length".into()));
    }
    if spec.overlaps.iter().any(|&c| !(0.0..1.0).contains(&c)) {
        return Err(SpecError::BadSpec("overlaps must lie in [0, 1)".into()));
    }
    let n = 2 * d;
    let mut rho1 = CMatrix::zeros(n, n);
    let mut rho2 = CMatrix::zeros(n, n);
    for i in 0..d {
        let c = spec.overlaps[i];
        let s = (1.0 - c * c).sqrt();
        rho1[(i, i)] = C64::new(spec.r_diag[i], 0.0);
        let mut sv = vec![C64::new(0.0, 0.0); n];
        sv[i] = C64::new(c, 0.0);
        sv[d + i] = C64::new(s, 0.0);
        rho2 = &rho2 + &CMatrix::outer(&sv, &sv).scale(spec.s_diag[i]);
    }
    Ok(make_instance(validate_density(rho1)?, validate_density(rho2)?, spec.eta1)?)
}

/// Seeded diagonal spec with independent Dirichlet-like weights for the two
/// states (normalised uniforms in `[0.05, 1]`), overlaps uniform in
/// `[0.1, 0.95]`, prior uniform in `[0.05, 0.95]`.
pub fn random_diagonal_spec(d: usize, seed: u64) -> DiagonalSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let weights = |rng: &mut ChaCha8Rng| {
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..=1.0)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect::<Vec<_>>()
    };
    let r_diag = weights(&mut rng);
    let s_diag = weights(&mut rng);
    let overlaps = (0..d).map(|_| rng.gen_range(0.1..=0.95)).collect();
    let eta1 = rng.gen_range(0.05..=0.95);
    DiagonalSpec {
        overlaps,
        r_diag,
        s_diag,
        eta1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn rotation_is_unitary() {
        let u = block_rotation(&[0.3, 0.7, 1.2]);
        assert!(linalg::distance(&u.adjoint_mul(&u), &CMatrix::identity(6)) < 1e-15);
    }

    #[test]
    fn pure_case_overlap() {
        let spec = SimilarClassSpec {
            d: 1,
            r_mat: CMatrix::identity(1),
            thetas: vec![0.6f64.acos()],
            eta1: 0.5,
        };
        let (inst, _) = generate(&spec).unwrap();
        let a = inst.rho1.support_basis().column(0);
        let b = inst.rho2.support_basis().column(0);
        assert!((linalg::inner(&a, &b).norm() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_spec() {
        assert_eq!(random_spec(2, 1), random_spec(2, 1));
        assert_ne!(random_spec(2, 1), random_spec(2, 2));
        random_spec(3, 7).validate().unwrap();
    }

    #[test]
    fn bad_specs() {
        let mut spec = random_spec(2, 3);
        spec.thetas[0] = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = random_spec(2, 3);
        spec.thetas.pop();
        assert!(spec.validate().is_err());
        let mut spec = random_spec(2, 3);
        spec.r_mat = CMatrix::diag_real(&[1.0, 0.0]);
        assert!(spec.validate().is_err());
    }
}

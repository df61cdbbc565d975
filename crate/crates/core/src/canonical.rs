//! Canonical representation of a standard-shape pair.
//!
//! The supports of the two states are paired up into `d` mutually orthogonal
//! planes. In plane `i` the unit vectors `|r_i>` (support of rho1) and `|s_i>`
//! (support of rho2) have real overlap `C_i`, and all cross-plane overlaps
//! vanish. The vectors `|v_i>` and `|w_i>` complete each plane: `|v_i>` is
//! orthogonal to the support of rho2 and `|w_i>` to the support of rho1.
//!
//! The `r_i` are eigenvectors of `P1 P2 P1` restricted to the support of
//! rho1 (eigenvalues `C_i^2`), and `|s_i> = P2 |r_i> / C_i`.

use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, CMatrix, LinalgError};
use crate::states::{support_projectors, DiscriminationInstance};

/// Overlaps closer to one than this collapse the joint support.
pub const OVERLAP_CEILING_TOL: f64 = 1e-9;
/// Squared overlaps within this distance form one degenerate cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Overlaps at or below this are handled as exactly orthogonal directions.
pub const ZERO_OVERLAP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("NotStandardShape: ranks ({rank1}, {rank2}) with joint dimension {joint_dim}")]
    NotStandardShape {
        rank1: usize,
        rank2: usize,
        joint_dim: usize,
    },
    #[error("DegenerateOverlap: C_{index} = {overlap} is too close to 1")]
    DegenerateOverlap { index: usize, overlap: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone)]
pub struct CanonicalFrame {
    /// Ambient dimension.
    pub dim: usize,
    /// Overlaps `C_i`, ascending.
    pub overlaps: Vec<f64>,
    /// `S_i = sqrt(1 - C_i^2)`
    pub sines: Vec<f64>,
    pub r_basis: CMatrix,
    pub s_basis: CMatrix,
    pub v_basis: CMatrix,
    pub w_basis: CMatrix,
    /// `r_ij = <r_i|rho1|r_j>`
    pub r_mat: CMatrix,
    /// `s_ij = <s_i|rho2|s_j>`
    pub s_mat: CMatrix,
}

impl CanonicalFrame {
    pub fn rank(&self) -> usize {
        self.overlaps.len()
    }

    pub fn r(&self, i: usize) -> Vec<C64> {
        self.r_basis.column(i)
    }

    pub fn s(&self, i: usize) -> Vec<C64> {
        self.s_basis.column(i)
    }

    pub fn v(&self, i: usize) -> Vec<C64> {
        self.v_basis.column(i)
    }

    pub fn w(&self, i: usize) -> Vec<C64> {
        self.w_basis.column(i)
    }

    /// Diagonal elements `r_i`.
    pub fn r_diag(&self) -> Vec<f64> {
        (0..self.rank()).map(|i| self.r_mat[(i, i)].re).collect()
    }

    /// Diagonal elements `s_i`.
    pub fn s_diag(&self) -> Vec<f64> {
        (0..self.rank()).map(|i| self.s_mat[(i, i)].re).collect()
    }

    /// `sum_ij r_ij |r_i><r_j|`
    pub fn rho1(&self) -> CMatrix {
        self.r_mat.embed(&self.r_basis)
    }

    /// `sum_ij s_ij |s_i><s_j|`
    pub fn rho2(&self) -> CMatrix {
        self.s_mat.embed(&self.s_basis)
    }

    /// Orthonormal basis `(r_1, w_1, r_2, w_2, ...)` of the joint support.
    pub fn plane_basis(&self, i: usize) -> CMatrix {
        CMatrix::from_columns(self.dim, &[self.r(i), self.w(i)])
    }

    /// Largest violation of the frame's orthogonality relations.
    pub fn residuals(&self) -> FrameResiduals {
        let d = self.rank();
        let gram = |a: &CMatrix, b: &CMatrix| a.adjoint_mul(b);
        let mut orthonormality = 0.0_f64;
        let mut overlap = 0.0_f64;
        let mut kernel = 0.0_f64;
        let rr = gram(&self.r_basis, &self.r_basis);
        let ss = gram(&self.s_basis, &self.s_basis);
        let vv = gram(&self.v_basis, &self.v_basis);
        let ww = gram(&self.w_basis, &self.w_basis);
        let rs = gram(&self.r_basis, &self.s_basis);
        let vs = gram(&self.v_basis, &self.s_basis);
        let wr = gram(&self.w_basis, &self.r_basis);
        let vr = gram(&self.v_basis, &self.r_basis);
        let wsm = gram(&self.w_basis, &self.s_basis);
        let vw = gram(&self.v_basis, &self.w_basis);
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                for m in [&rr, &ss, &vv, &ww] {
                    orthonormality = orthonormality.max((m[(i, j)] - delta).norm());
                }
                overlap = overlap.max((rs[(i, j)] - self.overlaps[i] * delta).norm());
                overlap = overlap.max((vw[(i, j)] + self.overlaps[i] * delta).norm());
                kernel = kernel.max(vs[(i, j)].norm()).max(wr[(i, j)].norm());
                kernel = kernel
                    .max((vr[(i, j)] - self.sines[i] * delta).norm())
                    .max((wsm[(i, j)] - self.sines[i] * delta).norm());
            }
        }
        FrameResiduals {
            orthonormality,
            overlap,
            kernel,
            trace_r: (self.r_mat.trace().re - 1.0).abs(),
            trace_s: (self.s_mat.trace().re - 1.0).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrameResiduals {
    pub orthonormality: f64,
    pub overlap: f64,
    pub kernel: f64,
    pub trace_r: f64,
    pub trace_s: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        [
            self.orthonormality,
            self.overlap,
            self.kernel,
            self.trace_r,
            self.trace_s,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn build_frame(inst: &DiscriminationInstance) -> Result<CanonicalFrame, FrameError> {
    if !inst.is_standard_shape() {
        return Err(FrameError::NotStandardShape {
            rank1: inst.rho1.rank(),
            rank2: inst.rho2.rank(),
            joint_dim: inst.joint_dim(),
        });
    }
    let n = inst.dim();
    let d = inst.rho1.rank();
    let proj = support_projectors(inst);
    let u1 = inst.rho1.support_basis();
    let u2 = inst.rho2.support_basis();

    // P1 P2 P1 restricted to the support of rho1.
    let restricted = proj.p2.compress(u1).hermitian_part();
    let eig = linalg::eigh(&restricted)?;
    let squared: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.clamp(0.0, 1.0)).collect();

    let mut coords: Vec<Vec<C64>> = (0..d).map(|k| eig.vector(k)).collect();
    for cluster in clusters(&squared) {
        let block: Vec<Vec<C64>> = cluster.iter().map(|&k| coords[k].clone()).collect();
        let fixed = degenerate_subspace_policy(&block);
        for (&k, v) in cluster.iter().zip(fixed) {
            coords[k] = v;
        }
    }

    let mut overlaps = Vec::with_capacity(d);
    let mut r_cols = Vec::with_capacity(d);
    for (k, x) in coords.iter().enumerate() {
        let mut r = u1.mul_vec(x);
        linalg::fix_phase(&mut r);
        let c = squared[k].sqrt();
        if c > 1.0 - OVERLAP_CEILING_TOL {
            return Err(FrameError::DegenerateOverlap {
                index: k + 1,
                overlap: c,
            });
        }
        overlaps.push(if c <= ZERO_OVERLAP { 0.0 } else { c });
        r_cols.push(r);
    }

    let mut s_cols: Vec<Option<Vec<C64>>> = vec![None; d];
    for k in 0..d {
        if overlaps[k] > 0.0 {
            let p2r = proj.p2.mul_vec(&r_cols[k]);
            let nrm = linalg::norm(&p2r);
            overlaps[k] = nrm.min(1.0);
            s_cols[k] = Some(p2r.iter().map(|x| x / nrm).collect());
        }
    }
    complete_zero_overlaps(&mut s_cols, u2);
    let s_cols: Vec<Vec<C64>> = s_cols.into_iter().map(Option::unwrap).collect();

    let sines: Vec<f64> = overlaps.iter().map(|c| (1.0 - c * c).sqrt()).collect();
    let mut v_cols = Vec::with_capacity(d);
    let mut w_cols = Vec::with_capacity(d);
    for k in 0..d {
        let (c, s) = (overlaps[k], sines[k]);
        let v: Vec<C64> = r_cols[k]
            .iter()
            .zip(&s_cols[k])
            .map(|(r, sv)| (r - sv * c) / s)
            .collect();
        let w: Vec<C64> = s_cols[k]
            .iter()
            .zip(&r_cols[k])
            .map(|(sv, r)| (sv - r * c) / s)
            .collect();
        v_cols.push(v);
        w_cols.push(w);
    }

    let r_basis = CMatrix::from_columns(n, &r_cols);
    let s_basis = CMatrix::from_columns(n, &s_cols);
    let r_mat = inst.rho1.matrix().compress(&r_basis).hermitian_part();
    let s_mat = inst.rho2.matrix().compress(&s_basis).hermitian_part();
    Ok(CanonicalFrame {
        dim: n,
        overlaps,
        sines,
        r_basis,
        s_basis,
        v_basis: CMatrix::from_columns(n, &v_cols),
        w_basis: CMatrix::from_columns(n, &w_cols),
        r_mat,
        s_mat,
    })
}

/// Index groups of (ascending) squared overlaps that lie within `CLUSTER_TOL`
/// of their neighbour.
fn clusters(values: &[f64]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (k, &x) in values.iter().enumerate() {
        match out.last_mut() {
            Some(last) if x - values[*last.last().unwrap()] <= CLUSTER_TOL => last.push(k),
            _ => out.push(vec![k]),
        }
    }
    out
}

/// Re-orthonormalises the eigenvectors of a degenerate cluster by Gram–Schmidt
/// in the given order. A well-separated eigenvector is returned unchanged up
/// to normalisation.
pub fn degenerate_subspace_policy(cluster: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let basis = linalg::orthonormalize(cluster, 1e-6);
    assert_eq!(
        basis.len(),
        cluster.len(),
        "eigenvectors of a Hermitian matrix are linearly independent"
    );
    basis
}

/// Fills the `None` slots (zero-overlap directions) with an orthonormal
/// completion of the already built vectors inside the support of rho2.
fn complete_zero_overlaps(s_cols: &mut [Option<Vec<C64>>], u2: &CMatrix) {
    if s_cols.iter().all(Option::is_some) {
        return;
    }
    let mut seeds: Vec<Vec<C64>> = s_cols.iter().flatten().cloned().collect();
    let built = seeds.len();
    seeds.extend(u2.columns());
    let basis = linalg::orthonormalize(&seeds, 1e-6);
    let mut extra = basis.into_iter().skip(built).map(|mut v| {
        linalg::fix_phase(&mut v);
        v
    });
    for slot in s_cols.iter_mut().filter(|s| s.is_none()) {
        *slot = extra.next();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_instance, validate_density, DensityOperator};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn orthogonal_pure_states() {
        let inst = make_instance(
            DensityOperator::pure(&[c(1.0), c(0.0)]).unwrap(),
            DensityOperator::pure(&[c(0.0), c(1.0)]).unwrap(),
            0.5,
        )
        .unwrap();
        let f = build_frame(&inst).unwrap();
        assert_eq!(f.overlaps, vec![0.0]);
        assert!(f.residuals().max() < 1e-12);
    }

    #[test]
    fn pure_pair_with_overlap() {
        let inst = make_instance(
            DensityOperator::pure(&[c(1.0), c(0.0)]).unwrap(),
            DensityOperator::pure(&[c(0.8), c(0.6)]).unwrap(),
            0.5,
        )
        .unwrap();
        let f = build_frame(&inst).unwrap();
        assert!((f.overlaps[0] - 0.8).abs() < 1e-12);
        // v_1 = (|0> - 0.8 |s_1>) / 0.6
        let s = f.s(0);
        let expected: Vec<C64> = [c(1.0), c(0.0)]
            .iter()
            .zip(&s)
            .map(|(a, b)| (a - b * 0.8) / 0.6)
            .collect();
        let v = f.v(0);
        for (a, b) in v.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(f.residuals().max() < 1e-12);
    }

    #[test]
    fn rejects_non_standard() {
        let r = validate_density(CMatrix::diag_real(&[0.5, 0.5])).unwrap();
        let inst = make_instance(r.clone(), r, 0.5).unwrap();
        assert!(matches!(
            build_frame(&inst),
            Err(FrameError::NotStandardShape { .. })
        ));
    }

    #[test]
    fn mixed_zero_and_nonzero_overlaps() {
        // d = 2 in four dimensions with C = (0, 0.5).
        let s = (0.75f64).sqrt();
        let rho1 = validate_density(CMatrix::diag_real(&[0.3, 0.7, 0.0, 0.0])).unwrap();
        // |s_1> = e_3, |s_2> = 0.5 e_2 + s e_4
        let s1 = [c(0.0), c(0.0), c(1.0), c(0.0)];
        let s2 = [c(0.0), c(0.5), c(0.0), c(s)];
        let rho2 = &CMatrix::outer(&s1, &s1).scale(0.4) + &CMatrix::outer(&s2, &s2).scale(0.6);
        let inst = make_instance(rho1, validate_density(rho2).unwrap(), 0.5).unwrap();
        let f = build_frame(&inst).unwrap();
        assert_eq!(f.overlaps[0], 0.0);
        assert!((f.overlaps[1] - 0.5).abs() < 1e-12);
        assert!(f.residuals().max() < 1e-12, "{:?}", f.residuals());
        assert!(linalg::distance(&f.rho2(), inst.rho2.matrix()) < 1e-12);
    }

    #[test]
    fn cluster_grouping() {
        assert_eq!(clusters(&[0.1, 0.1 + 1e-9, 0.5]), vec![vec![0, 1], vec![2]]);
        assert_eq!(clusters(&[0.2]), vec![vec![0]]);
    }
}

#![allow(dead_code)]

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udisc::linalg::{self, CMatrix};
use udisc::states::{make_instance, validate_density, DiscriminationInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    random_matrix(n, n, rng).hermitian_part()
}

pub fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = random_matrix(n, rank, rng);
    (&g * &g.adjoint()).hermitian_part()
}

pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let cols = random_matrix(n, n, rng).columns();
    let q = linalg::orthonormalize(&cols, 1e-8);
    assert_eq!(q.len(), n);
    CMatrix::from_columns(n, &q)
}

pub fn density(m: &CMatrix) -> CMatrix {
    m.scale(1.0 / m.trace().re)
}

/// Two random rank-`d` states in general position inside `2d` dimensions,
/// optionally embedded in a larger ambient space.
pub fn random_standard_instance(d: usize, extra: usize, seed: u64) -> DiscriminationInstance {
    let mut rng = rng(seed);
    let n = 2 * d + extra;
    let u = random_unitary(n, &mut rng);
    let joint: Vec<Vec<C64>> = (0..2 * d).map(|k| u.column(k)).collect();
    let joint = CMatrix::from_columns(n, &joint);
    let support = |rng: &mut ChaCha8Rng| -> CMatrix {
        let coords = random_unitary(2 * d, rng);
        let cols: Vec<Vec<C64>> = (0..d).map(|k| coords.column(k)).collect();
        &joint * &CMatrix::from_columns(2 * d, &cols)
    };
    let b1 = support(&mut rng);
    let b2 = support(&mut rng);
    let w1 = density(&random_psd(d, d, &mut rng));
    let w2 = density(&random_psd(d, d, &mut rng));
    let rho1 = w1.embed(&b1).hermitian_part();
    let rho2 = w2.embed(&b2).hermitian_part();
    let eta1 = rng.gen_range(0.1..0.9);
    make_instance(validate_density(rho1).unwrap(), validate_density(rho2).unwrap(), eta1).unwrap()
}

/// Applies the same unitary to both states.
pub fn rotate_instance(inst: &DiscriminationInstance, u: &CMatrix) -> DiscriminationInstance {
    let r1 = inst.rho1.matrix().embed(u).hermitian_part();
    let r2 = inst.rho2.matrix().embed(u).hermitian_part();
    make_instance(validate_density(r1).unwrap(), validate_density(r2).unwrap(), inst.eta1).unwrap()
}

pub fn pure_pair(overlap: f64, eta1: f64) -> DiscriminationInstance {
    let s = (1.0 - overlap * overlap).sqrt();
    let a = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let b = [C64::new(overlap, 0.0), C64::new(s, 0.0)];
    let rho1 = validate_density(CMatrix::outer(&a, &a)).unwrap();
    let rho2 = validate_density(CMatrix::outer(&b, &b)).unwrap();
    make_instance(rho1, rho2, eta1).unwrap()
}

//! Haar-distributed samples from SO(n), U(n) and Sp(n).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{det, GroupElement, KMatrix, UNITARY_TOL};
use crate::rng::RngStream;
use crate::scalar::{AlgebraTag, Group, Scalar};

const MAX_RETRIES: usize = 8;

/// Matrix whose `δ n²` real components are independent standard normals.
pub fn gaussian_kmatrix(algebra: AlgebraTag, n: usize, rng: &mut RngStream) -> KMatrix {
    let d = algebra.dim();
    KMatrix::from_fn(algebra, n, n, |_, _| {
        let mut s = Scalar::ZERO;
        for c in &mut s.c[..d] {
            *c = rng.standard_normal();
        }
        s
    })
}

/// Haar-random element of `group` of size `n`.
///
/// Modified Gram–Schmidt on the columns of a Gaussian matrix, with scalars
/// acting on the right. The triangular factor then has positive real
/// diagonal, which makes the orthonormal factor exactly Haar over R, C and H.
/// For SO(n) the last row is negated when the determinant is -1.
pub fn haar_unitary(group: Group, n: usize, rng: &mut RngStream) -> Result<GroupElement> {
    if n == 0 {
        return Err(Error::dim("haar_unitary", "n must be at least 1"));
    }
    let alg = group.algebra();
    for _ in 0..MAX_RETRIES {
        let g = gaussian_kmatrix(alg, n, rng);
        let Some(mut q) = gram_schmidt(&g) else { continue };
        if group == Group::SO && det(&q)?.re < 0.0 {
            for j in 0..n {
                q.set(n - 1, j, -q.get(n - 1, j));
            }
        }
        if q.unitarity_residual() < UNITARY_TOL {
            return Ok(GroupElement::new_unchecked(q, group));
        }
    }
    Err(Error::Numeric(format!("haar_unitary: Gram-Schmidt broke down {MAX_RETRIES} times")))
}

/// Orthonormalises the columns of `g`; `None` on (numerical) rank deficiency.
fn gram_schmidt(g: &KMatrix) -> Option<KMatrix> {
    let n = g.rows();
    // column-major working copy
    let mut cols: Vec<Vec<Scalar>> = (0..n).map(|j| (0..n).map(|i| g.get(i, j)).collect()).collect();
    for j in 0..n {
        let (done, rest) = cols.split_at_mut(j);
        let v = &mut rest[0];
        for q in done.iter() {
            // r = q* v, v <- v - q r
            let r = q.iter().zip(v.iter()).fold(Scalar::ZERO, |acc, (a, b)| acc + a.conj() * *b);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= *qi * r;
            }
        }
        let norm = v.iter().map(|s| s.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-10) {
            return None;
        }
        v.iter_mut().for_each(|s| *s = s.scale(1.0 / norm));
    }
    Some(KMatrix::from_fn(g.algebra(), n, n, |i, j| cols[j][i]))
}

/// A Haar sample with the coordinates of the randomness that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarSample {
    pub element: GroupElement,
    pub seed: u64,
    pub stream_id: u64,
    pub index: u64,
}

/// `count` consecutive samples from stream `stream_id`.
pub fn sample_haar(group: Group, n: usize, count: usize, seed: u64, stream_id: u64) -> Result<Vec<HaarSample>> {
    let mut rng = RngStream::new(seed, stream_id);
    (0..count as u64)
        .map(|index| {
            Ok(HaarSample { element: haar_unitary(group, n, &mut rng)?, seed, stream_id, index })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_components_are_standard() {
        let mut rng = RngStream::new(5, 0);
        let (mut s, mut s2, mut count) = (0.0, 0.0, 0usize);
        while count < 100_000 {
            let g = gaussian_kmatrix(AlgebraTag::H, 5, &mut rng);
            for e in g.entries() {
                for &c in &e.c {
                    s += c;
                    s2 += c * c;
                    count += 1;
                }
            }
        }
        let n = count as f64;
        let mean = s / n;
        let var = s2 / n - mean * mean;
        assert!(mean.abs() / (1.0 / n).sqrt() < 4.0);
        // Var of the sample variance of a normal is 2/n
        assert!((var - 1.0).abs() / (2.0 / n).sqrt() < 4.0);
    }

    #[test]
    fn gaussian_uses_only_algebra_components() {
        let mut rng = RngStream::new(5, 0);
        let g = gaussian_kmatrix(AlgebraTag::C, 3, &mut rng);
        assert!(g.entries().iter().all(|s| s.lies_in(AlgebraTag::C)));
        let g2 = gaussian_kmatrix(AlgebraTag::C, 3, &mut RngStream::new(5, 0));
        assert_eq!(g, g2);
    }

    #[test]
    fn samples_are_in_group() {
        let mut rng = RngStream::new(11, 0);
        for group in Group::ALL {
            for n in 1..=8 {
                let g = haar_unitary(group, n, &mut rng).unwrap();
                assert!(g.matrix().unitarity_residual() < 1e-10);
                GroupElement::new(g.matrix().clone(), group).unwrap();
            }
        }
    }

    #[test]
    fn deterministic() {
        for group in Group::ALL {
            let a = haar_unitary(group, 4, &mut RngStream::new(3, 2)).unwrap();
            let b = haar_unitary(group, 4, &mut RngStream::new(3, 2)).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }

    #[test]
    fn mean_entry_and_row_norm() {
        let samples = 20_000;
        for group in Group::ALL {
            let n = 3;
            let mut rng = RngStream::new(17, 0);
            let (mut s, mut s2, mut a, mut a2) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..samples {
                let g = haar_unitary(group, n, &mut rng).unwrap();
                let x = g.matrix().get(1, 2).re();
                s += x;
                s2 += x * x;
                let y = g.matrix().get(0, 0).norm_sqr();
                a += y;
                a2 += y * y;
            }
            let m = samples as f64;
            let se = ((s2 / m - (s / m).powi(2)) / m).sqrt();
            assert!((s / m).abs() / se < 4.0, "{group}: mean entry");
            let se = ((a2 / m - (a / m).powi(2)) / m).sqrt();
            assert!(((a / m) - 1.0 / n as f64).abs() / se < 4.0, "{group}: E|g11|^2");
        }
    }
}

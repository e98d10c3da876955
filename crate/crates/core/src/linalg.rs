//! Small dense symmetric matrix utilities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrder {
    Ascending,
    Descending,
}

/// Eigenpairs of a symmetric matrix; column `j` of `eigenvectors` pairs with
/// `eigenvalues[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Full symmetric eigendecomposition, sorted by `order`.
///
/// The input is symmetrized first. Ties are kept in the solver's original
/// index order, and each eigenvector is flipped so its largest-magnitude
/// entry is positive.
pub fn sym_eigen(a: &DMatrix<f64>, order: EigenOrder) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::Parameter(format!(
            "eigendecomposition needs a square matrix (got {}x{})",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let m = a.nrows();
    if m == 0 {
        return Ok(SymmetricEigen {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);

    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&i, &j| {
        let (x, y) = (eig.eigenvalues[i], eig.eigenvalues[j]);
        let ord = match order {
            EigenOrder::Ascending => x.total_cmp(&y),
            EigenOrder::Descending => y.total_cmp(&x),
        };
        ord.then(i.cmp(&j))
    });

    let eigenvalues = DVector::from_iterator(m, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(m, m);
    for (dst, &src) in idx.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        apply_sign_convention(col.as_mut_slice());
        eigenvectors.set_column(dst, &col);
    }
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn apply_sign_convention(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `(A^{1/2}, A^{−1/2})` of a symmetric PSD matrix, flooring eigenvalues at
/// `floor · λ_max`.
pub fn sym_sqrt_inv_sqrt(a: &DMatrix<f64>, floor: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let e = sym_eigen(a, EigenOrder::Descending)?;
    let max = e
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max.is_nan() || max <= 0.0 {
        return Err(Error::Degenerate(format!(
            "largest eigenvalue {max} is not positive"
        )));
    }
    let floored = e.eigenvalues.map(|l| l.max(floor * max));
    let v = &e.eigenvectors;
    let sqrt = v * DMatrix::from_diagonal(&floored.map(f64::sqrt)) * v.transpose();
    let inv_sqrt = v * DMatrix::from_diagonal(&floored.map(|l| 1.0 / l.sqrt())) * v.transpose();
    Ok((sqrt, inv_sqrt))
}

/// Principal angles (radians, ascending) between the row spaces of `a` and
/// `b` under the inner product `⟨x, y⟩ = x W yᵀ`. Computed from sines so that
/// small angles keep full relative precision.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<Vec<f64>> {
    let qa = orthonormal_rows(a, w)?;
    let qb = orthonormal_rows(b, w)?;
    // residual of projecting qa onto span(qb)
    let coef = &qa * w * qb.transpose();
    let resid = &qa - &coef * &qb;
    let gram = &resid * w * resid.transpose();
    let e = sym_eigen(&gram, EigenOrder::Ascending)?;
    let mut angles: Vec<f64> = e
        .eigenvalues
        .iter()
        .map(|s2| s2.max(0.0).sqrt().min(1.0).asin())
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

fn orthonormal_rows(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = a * w * a.transpose();
    let (_, inv_sqrt) = sym_sqrt_inv_sqrt(&g, 1e-14)?;
    Ok(inv_sqrt * a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn identity_eigen() {
        let e = sym_eigen(&DMatrix::identity(3, 3), EigenOrder::Ascending).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        for j in 0..3 {
            let col = e.eigenvectors.column(j);
            assert_eq!(col.iter().filter(|v| v.abs() == 1.0).count(), 1);
        }
    }

    #[test]
    fn diagonal_sorted_ascending() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eigen(&a, EigenOrder::Ascending).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 2.0, 3.0]);
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(e.eigenvectors, expected);
        let d = sym_eigen(&a, EigenOrder::Descending).unwrap();
        assert_eq!(d.eigenvalues.as_slice(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(
            sym_eigen(&a, EigenOrder::Ascending),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn sqrt_of_simple_matrices() {
        let (s, i) = sym_sqrt_inv_sqrt(&DMatrix::identity(4, 4), 1e-12).unwrap();
        assert!((s - DMatrix::identity(4, 4)).abs().max() < 1e-15);
        assert!((i - DMatrix::identity(4, 4)).abs().max() < 1e-15);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let (s, i) = sym_sqrt_inv_sqrt(&a, 1e-12).unwrap();
        assert!(
            (s - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])))
                .abs()
                .max()
                < 1e-14
        );
        assert!(
            (i - DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0 / 3.0])))
                .abs()
                .max()
                < 1e-14
        );
        assert!(sym_sqrt_inv_sqrt(&DMatrix::zeros(2, 2), 1e-12).is_err());
    }

    #[test]
    fn sign_convention_applied() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_symmetric(8, &mut rng);
        let e = sym_eigen(&a, EigenOrder::Ascending).unwrap();
        for j in 0..8 {
            let col = e.eigenvectors.column(j);
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
    }

    #[test]
    fn principal_angles_detect_rotation() {
        let w = DMatrix::identity(3, 3);
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let theta: f64 = 1e-6;
        let b = DMatrix::from_row_slice(1, 3, &[theta.cos(), theta.sin(), 0.0]);
        let ang = principal_angles(&a, &b, &w).unwrap();
        assert!((ang[0] - theta).abs() < 1e-15);
        let span_a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let span_b = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 1.0, -1.0, 0.0]);
        let ang = principal_angles(&span_a, &span_b, &w).unwrap();
        assert!(ang.iter().all(|x| *x < 1e-15));
    }

    #[test]
    fn deterministic_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_symmetric(12, &mut rng);
        let e1 = sym_eigen(&a, EigenOrder::Ascending).unwrap();
        let e2 = sym_eigen(&a.clone(), EigenOrder::Ascending).unwrap();
        assert_eq!(e1, e2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn decomposition_residuals(m in 1usize..=50, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_symmetric(m, &mut rng);
            let e = sym_eigen(&a, EigenOrder::Ascending).unwrap();
            let v = &e.eigenvectors;
            let norm_a = a.norm().max(f64::MIN_POSITIVE);
            prop_assert!((v.transpose() * v - DMatrix::identity(m, m)).abs().max() < 1e-10);
            let recon = v * DMatrix::from_diagonal(&e.eigenvalues) * v.transpose();
            prop_assert!((recon - &a).abs().max() < 1e-10 * norm_a);
            let av = &a * v - v * DMatrix::from_diagonal(&e.eigenvalues);
            prop_assert!(av.abs().max() < 1e-8 * norm_a);
            for w in e.eigenvalues.as_slice().windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }

        #[test]
        fn sqrt_products(m in 1usize..=30, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let a = &b * b.transpose() + DMatrix::identity(m, m) * 0.1;
            let (s, i) = sym_sqrt_inv_sqrt(&a, 1e-12).unwrap();
            prop_assert!((&s * &i - DMatrix::identity(m, m)).abs().max() < 1e-8);
            prop_assert!((&s * &s - &a).abs().max() < 1e-8 * a.norm());
        }
    }
}

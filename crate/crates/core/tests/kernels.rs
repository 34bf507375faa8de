//! Factorization kernels against nalgebra's dense routines.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sparse_ukf::linalg::{
    chol_rank1_update, cholesky, gain_from_factor, qr_triangularize, triangular_solve, LinalgError, Side,
    TriangularFactor,
};

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-1.0..1.0_f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

/// Well-conditioned SPD matrix `B·Bᵀ + shift·I`.
fn spd() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=8)
        .prop_flat_map(|n| (matrix(n, n), 0.1..2.0_f64))
        .prop_map(|(b, shift)| {
            let n = b.nrows();
            &b * b.transpose() + DMatrix::identity(n, n) * shift
        })
}

fn spd_with_vector() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
    spd().prop_flat_map(|p| {
        let n = p.nrows();
        (Just(p), proptest::collection::vec(-1.0..1.0_f64, n).prop_map(DVector::from_vec))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cholesky_matches_nalgebra(p in spd()) {
        let ours = cholesky(&p).unwrap();
        let reference = nalgebra::Cholesky::new(p.clone()).unwrap().l();
        prop_assert!(max_abs(&(ours.as_matrix() - &reference)) < 1e-12);
        prop_assert!(max_abs(&(ours.reconstruct() - &p)) < 1e-12);
    }

    #[test]
    fn qr_factor_matches_gram_matrix(
        a in (1usize..=6, 0usize..=6).prop_flat_map(|(n, extra)| matrix(n + extra, n))
    ) {
        let n = a.ncols();
        prop_assume!(a.clone().svd(false, false).singular_values.min() > 1e-3);
        let l = qr_triangularize(&a).unwrap();
        let gram = a.transpose() * &a;
        prop_assert!(max_abs(&(l.reconstruct() - &gram)) < 1e-10);
        prop_assert!(l.diagonal().iter().all(|&d| d > 0.0));
        // unique up to signs: compare with nalgebra's R after fixing its row signs
        let r = a.clone().qr().r();
        for i in 0..n {
            let sign = r[(i, i)].signum();
            for j in i..n {
                prop_assert!((l.as_matrix()[(j, i)] - sign * r[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_one_update_round_trip((p, v) in spd_with_vector(), w in 0.01..3.0_f64) {
        let s = cholesky(&p).unwrap();
        let up = chol_rank1_update(&s, &v, w).unwrap();
        let expected = &p + &v * v.transpose() * w;
        prop_assert!(max_abs(&(up.reconstruct() - &expected)) < 1e-10);
        // downdating the same vector recovers the original factor
        let back = chol_rank1_update(&up, &v, -w).unwrap();
        prop_assert!(max_abs(&(back.as_matrix() - s.as_matrix())) < 1e-9);
    }

    #[test]
    fn downdate_fails_exactly_when_indefinite((p, z) in spd_with_vector(), rho in 0.0..2.0_f64) {
        // v = S·z scaled so that w·|S⁻¹v|² = rho; P − w·v·vᵀ = S(I − w·z·zᵀ)Sᵀ is
        // positive definite iff rho < 1.
        prop_assume!(z.norm() > 1e-3);
        prop_assume!((rho - 1.0).abs() > 0.05);
        let s = cholesky(&p).unwrap();
        let w = rho / z.norm_squared();
        let v = s.as_matrix() * &z;
        let result = chol_rank1_update(&s, &v, -w);
        if rho < 1.0 {
            let expected = &p - &v * v.transpose() * w;
            prop_assert!(max_abs(&(result.unwrap().reconstruct() - &expected)) < 1e-10);
        } else {
            let failed = matches!(result, Err(LinalgError::DowndateFailure { .. }));
            prop_assert!(failed);
        }
    }

    #[test]
    fn triangular_solves_match_nalgebra(
        (p, b) in spd().prop_flat_map(|p| { let n = p.nrows(); (Just(p), matrix(n, 3)) })
    ) {
        let s = cholesky(&p).unwrap();
        let l = s.as_matrix();
        let left = triangular_solve(&s, &b, Side::Left, false).unwrap();
        prop_assert!(max_abs(&(left - l.solve_lower_triangular(&b).unwrap())) < 1e-10);
        let left_t = triangular_solve(&s, &b, Side::Left, true).unwrap();
        prop_assert!(max_abs(&(left_t - l.tr_solve_lower_triangular(&b).unwrap())) < 1e-10);

        let bt = b.transpose();
        // X·L = Bᵀ  <=>  Lᵀ·Xᵀ = B
        let right = triangular_solve(&s, &bt, Side::Right, false).unwrap();
        prop_assert!(max_abs(&(right - l.tr_solve_lower_triangular(&b).unwrap().transpose())) < 1e-10);
        // X·Lᵀ = Bᵀ  <=>  L·Xᵀ = B
        let right_t = triangular_solve(&s, &bt, Side::Right, true).unwrap();
        prop_assert!(max_abs(&(right_t - l.solve_lower_triangular(&b).unwrap().transpose())) < 1e-10);
    }

    #[test]
    fn gain_matches_explicit_inverse(
        (p, pxy) in spd().prop_flat_map(|p| { let n = p.nrows(); (Just(p), matrix(4, n)) })
    ) {
        let s = cholesky(&p).unwrap();
        let k = gain_from_factor(&pxy, &s).unwrap();
        let expected = &pxy * p.clone().try_inverse().unwrap();
        prop_assert!(max_abs(&(k - expected)) < 1e-9);
    }
}

#[test]
fn rejects_bad_inputs() {
    let not_spd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(cholesky(&not_spd), Err(LinalgError::NotPositiveDefinite { .. })));
    let asym = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 2.0]);
    assert!(matches!(cholesky(&asym), Err(LinalgError::NotSymmetric { .. })));
    let wide = DMatrix::<f64>::zeros(2, 3);
    assert!(matches!(qr_triangularize(&wide), Err(LinalgError::DimensionMismatch { .. })));
    let dependent = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
    assert!(matches!(qr_triangularize(&dependent), Err(LinalgError::RankDeficient { column: 1 })));
    let s = TriangularFactor::identity(2);
    let short = DVector::from_vec(vec![1.0]);
    assert!(matches!(chol_rank1_update(&s, &short, 1.0), Err(LinalgError::DimensionMismatch { .. })));
}

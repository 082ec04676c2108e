use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;
use crate::problems::{gen_fd2d, laplacian1d, random_matrix, random_negdef_sparse, Coefficients};

fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn identity_apply() {
    let v = random_matrix(7, 3, 11);
    let id = SparseSymmetric::identity(7);
    assert_eq!(block_apply(&id, &v).unwrap(), v);
}

#[test]
fn laplacian_stencil() {
    // h = 1/4, so scaling by h² recovers the bare stencil exactly.
    let a = laplacian1d(3).scaled(1.0 / 16.0);
    let e2 = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
    let y = block_apply(&a, &e2).unwrap();
    assert_eq!(y.as_slice(), &[1.0, -2.0, 1.0]);
}

#[test]
fn random_sparse_matches_dense() {
    let a = random_negdef_sparse(100, 4, 1);
    let v = random_matrix(100, 3, 2);
    let y = block_apply(&a, &v).unwrap();
    assert!(rel(&y, &(a.to_dense() * &v)) < 1e-14);
}

#[test]
fn dimension_checks() {
    let a = laplacian1d(4);
    let v = DMatrix::zeros(3, 1);
    assert!(matches!(block_apply(&a, &v), Err(Error::DimensionMismatch { .. })));
    assert!(matches!(block_solve(&a, &DMatrix::zeros(4, 1)), Err(Error::NoInverse)));
    let f = FactoredOperator::new(a).unwrap();
    assert!(matches!(block_solve(&f, &v), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn minus_identity_solve() {
    let f = FactoredOperator::new(SparseSymmetric::identity(5).scaled(-1.0)).unwrap();
    let v = random_matrix(5, 2, 3);
    assert_eq!(block_solve(&f, &v).unwrap(), -v);
}

#[test]
fn diagonal_solve() {
    let f = FactoredOperator::new(SparseSymmetric::diagonal(&[-1.0, -2.0, -4.0])).unwrap();
    let y = block_solve(&f, &DMatrix::from_element(3, 1, 1.0)).unwrap();
    assert_eq!(y.as_slice(), &[-1.0, -0.5, -0.25]);
}

#[test]
fn laplacian2d_multiply_back() {
    let a = gen_fd2d(Coefficients::Unit, 8);
    assert_eq!(a.n(), 64);
    let f = FactoredOperator::new(a.clone()).unwrap();
    let v = random_matrix(64, 4, 5);
    let y = block_solve(&f, &v).unwrap();
    assert!(rel(&block_apply(&a, &y).unwrap(), &v) <= 1e-10);
}

#[test]
fn hundred_random_rhs() {
    let a = gen_fd2d(Coefficients::Exp, 20);
    let f = FactoredOperator::new(a.clone()).unwrap();
    for seed in 0..100 {
        let v = random_matrix(a.n(), 1, 1000 + seed);
        let y = f.solve_block(&v).unwrap().unwrap();
        assert!(rel(&a.apply_block(&y), &v) <= 1e-10, "seed {seed}");
    }
}

#[test]
fn envelope_smaller_than_dense() {
    let a = gen_fd2d(Coefficients::Unit, 30);
    let f = SparseFactorization::new(&a).unwrap();
    let n = a.n();
    // A 2D grid reordered by RCM has bandwidth of order the grid side.
    assert!(f.envelope_size() < n * 70, "{}", f.envelope_size());
}

#[test]
fn singular_pivot_detected() {
    let a = SparseSymmetric::from_triangle(2, &[(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
    assert!(matches!(SparseFactorization::new(&a), Err(Error::SingularPivot { .. })));
}

#[test]
fn asymmetric_rejected() {
    let r = SparseSymmetric::from_triplets(3, &[(0, 1, 1.0), (1, 0, 1.5), (2, 2, -1.0)]);
    match r {
        Err(Error::Asymmetric { i, j, .. }) => assert_eq!((i, j), (0, 1)),
        other => panic!("{other:?}"),
    }
    let r = SparseSymmetric::from_triplets(3, &[(0, 2, 1.0)]);
    assert!(matches!(r, Err(Error::Asymmetric { .. })));
    let r = SparseSymmetric::from_triplets(3, &[(2, 0, 1.0)]);
    match r {
        Err(Error::Asymmetric { i, j, .. }) => assert_eq!((i, j), (2, 0)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn duplicates_are_summed() {
    let a = SparseSymmetric::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0)]).unwrap();
    assert_eq!(a.get(0, 0), 3.0);
    assert_eq!(a.nnz(), 2);
}

#[test]
fn transform_identity_mass() {
    let a = gen_fd2d(Coefficients::Trig, 5);
    let t = cholesky_transform(&SparseSymmetric::identity(25), &a).unwrap();
    let v = random_matrix(25, 2, 9);
    assert!(rel(&t.apply_block(&v), &a.apply_block(&v)) < 1e-14);
}

#[test]
fn transform_scaled_mass() {
    let a = SparseSymmetric::identity(6).scaled(-1.0);
    let e = SparseSymmetric::identity(6).scaled(4.0);
    let t = cholesky_transform(&e, &a).unwrap();
    let v = random_matrix(6, 3, 4);
    assert!(rel(&t.apply_block(&v), &(&v * -0.25)) < 1e-15);
}

#[test]
fn transform_generalized_eigenvalues() {
    let n = 10;
    let a = laplacian1d(n);
    let g = random_matrix(n, n, 21);
    let ed = &g * g.transpose() + DMatrix::identity(n, n) * n as f64;
    let ed = DMatrix::from_fn(n, n, |i, j| if i >= j { ed[(i, j)] } else { ed[(j, i)] });
    let trip: Vec<_> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, ed[(i, j)])).collect();
    let e = SparseSymmetric::from_triplets(n, &trip).unwrap();
    let fa = FactoredOperator::new(a.clone()).unwrap();
    let t = cholesky_transform(&e, &fa).unwrap();
    let dense_t = t.apply_block(&DMatrix::identity(n, n));
    let dense_t = (&dense_t + dense_t.transpose()) * 0.5;
    let mut got: Vec<f64> = dense_t.symmetric_eigen().eigenvalues.iter().copied().collect();
    got.sort_by(f64::total_cmp);

    // Oracle: eigenvalues of E⁻¹A via nalgebra Cholesky of E.
    let l = ed.clone().cholesky().unwrap().l();
    let li = l.clone().try_inverse().unwrap();
    let m = &li * a.to_dense() * li.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let mut want: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    want.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-12 * want[0].abs(), "{g} vs {w}");
    }

    // The inverse of the transformed operator.
    let v = random_matrix(n, 2, 8);
    let y = t.solve_block(&v).unwrap().unwrap();
    assert!(rel(&t.apply_block(&y), &v) < 1e-10);

    // Rhs transform and back-transform invert each other through E.
    let c = random_matrix(n, 2, 10);
    let ct = t.transform_rhs(&c).unwrap();
    let back = t.recover_factor(&ct).unwrap();
    // L⁻ᵀL⁻¹C = E⁻¹C.
    assert!(rel(&(&ed * back), &c) < 1e-12);
}

#[test]
fn transform_rejects_indefinite_mass() {
    let a = laplacian1d(3);
    let e = SparseSymmetric::diagonal(&[1.0, -1.0, 1.0]);
    assert!(cholesky_transform(&e, &a).is_err());
}

#[test]
fn dense_operator() {
    let a = random_negdef_sparse(12, 3, 4).to_dense();
    let op = DenseOperator::new(a.clone()).unwrap();
    let v = random_matrix(12, 2, 1);
    let y = block_solve(&op, &v).unwrap();
    assert!(rel(&(&a * y), &v) < 1e-12);
    let mut bad = a;
    bad[(0, 1)] += 1.0;
    assert!(matches!(DenseOperator::new(bad), Err(Error::Asymmetric { .. })));
}

#[test]
fn matrix_market_round_trip() {
    let a = random_negdef_sparse(40, 5, 17);
    let text = mm::format_sparse(&a);
    let b = mm::parse_sparse(&text).unwrap();
    assert_eq!(a, b);
    let c = random_matrix(9, 3, 4);
    assert_eq!(mm::parse_dense(&mm::format_dense(&c)).unwrap(), c);
}

#[test]
fn matrix_market_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.mtx");
    let a = laplacian1d(6);
    mm::write_sparse(&p, &a).unwrap();
    assert_eq!(mm::read_sparse(&p).unwrap(), a);
    let q = dir.path().join("c.mtx");
    let c = random_matrix(6, 2, 1);
    mm::write_dense(&q, &c).unwrap();
    assert_eq!(mm::read_dense(&q).unwrap(), c);
}

#[test]
fn matrix_market_general_and_integer() {
    let text = "%%MatrixMarket matrix coordinate integer general\n% comment\n2 2 4\n1 1 -2\n1 2 1\n2 1 1\n2 2 -2\n";
    let a = mm::parse_sparse(text).unwrap();
    assert_eq!(a.to_dense(), DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]));
    let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 1.0\n";
    assert!(matches!(mm::parse_sparse(bad), Err(Error::Asymmetric { .. })));
    let garbage = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n";
    assert!(matches!(mm::parse_sparse(garbage), Err(Error::Parse { line: 3, .. })));
    let sym = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n";
    assert_eq!(mm::parse_dense(sym).unwrap(), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn apply_is_symmetric_and_linear(seed in 0u64..1000, n in 5usize..60) {
        let a = random_negdef_sparse(n, 3, seed);
        let u = random_matrix(n, 1, seed + 1);
        let v = random_matrix(n, 1, seed + 2);
        let au = a.apply_block(&u);
        let av = a.apply_block(&v);
        let scale = a.fro_norm() * u.norm() * v.norm();
        prop_assert!((u.dot(&av) - v.dot(&au)).abs() <= 1e-12 * scale);
        let comb = a.apply_block(&(&u * 2.5 + &v));
        prop_assert!((comb - (au * 2.5 + av)).norm() <= 1e-12 * a.fro_norm() * (u.norm() + v.norm()) * 3.5);
    }

    #[test]
    fn factorization_multiply_back(seed in 0u64..1000, n in 2usize..80) {
        let a = random_negdef_sparse(n, 4, seed);
        let f = FactoredOperator::new(a.clone()).unwrap();
        let v = random_matrix(n, 2, seed + 7);
        let y = f.solve_block(&v).unwrap().unwrap();
        prop_assert!(rel(&a.apply_block(&y), &v) <= 1e-10);
    }
}

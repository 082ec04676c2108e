use nalgebra::DMatrix;

use super::*;
use crate::problems::{random_matrix, random_negdef_block_tridiagonal, random_negdef_dense};
use crate::sparse::DenseOperator;

fn one(v: f64) -> DenseMatrix {
    DMatrix::from_element(1, 1, v)
}

fn scalar_t(v: f64) -> BlockTridiagonal {
    BlockTridiagonal::from_blocks(vec![one(v)], vec![]).unwrap()
}

#[test]
fn scalar_reduced_lyapunov() {
    assert_eq!(solve_reduced_lyapunov(&scalar_t(-1.0), &one(1.0)).unwrap(), one(0.5));
}

#[test]
fn diagonal_reduced_lyapunov() {
    let t = BlockTridiagonal::from_blocks(vec![one(-1.0), one(-2.0)], vec![one(0.0)]).unwrap();
    let y = solve_reduced_lyapunov(&t, &one(1.0)).unwrap();
    assert!((y - DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0])).norm() < 1e-16);
}

#[test]
fn reduced_lyapunov_plug_back() {
    let t = random_negdef_block_tridiagonal(2, 8, 3);
    let gamma = random_matrix(2, 2, 4);
    let y = solve_reduced_lyapunov(&t, &gamma).unwrap();
    let td = t.to_dense();
    let mut rhs = DMatrix::zeros(16, 16);
    rhs.view_mut((0, 0), (2, 2)).copy_from(&(&gamma * gamma.transpose()));
    let r = &td * &y + &y * &td + &rhs;
    assert!(r.norm() <= 1e-10 * rhs.norm());
    assert_eq!(y, y.transpose());
    let min = y.clone().symmetric_eigen().eigenvalues.min();
    assert!(min >= -1e-10 * y.norm());
}

#[test]
fn scalar_sylvester_and_one_sided() {
    let y = solve_reduced_sylvester(&scalar_t(-1.0), &scalar_t(-2.0), &one(1.0), &one(1.0)).unwrap();
    assert!((y[(0, 0)] - 1.0 / 3.0).abs() < 1e-16);
    let y1 = solve_reduced_one_sided(&scalar_t(-1.0), &one(-2.0), &one(1.0), &one(1.0)).unwrap();
    assert!((y1[(0, 0)] - 1.0 / 3.0).abs() < 1e-16);
}

#[test]
fn one_sided_plug_back() {
    let t = random_negdef_block_tridiagonal(2, 6, 7);
    let b = random_negdef_dense(9, 8);
    let g1 = random_matrix(2, 2, 9);
    let c2 = random_matrix(9, 2, 10);
    let y = solve_reduced_one_sided(&t, &b, &g1, &c2).unwrap();
    let mut e1 = DMatrix::zeros(12, 2);
    e1.view_mut((0, 0), (2, 2)).copy_from(&g1);
    let rhs = e1 * c2.transpose();
    let r = t.to_dense() * &y + &y * &b + &rhs;
    assert!(r.norm() <= 1e-10 * rhs.norm());
}

#[test]
fn naive_values() {
    let y = solve_reduced_lyapunov(&scalar_t(-1.0), &one(1.0)).unwrap();
    assert!((naive_residual(&y, &one(0.4)).unwrap() - 2f64.sqrt() * 0.2).abs() < 1e-16);
    assert_eq!(naive_residual(&y, &one(0.0)).unwrap(), 0.0);
}

#[test]
fn kronecker_small() {
    assert_eq!(kronecker_solve(&one(-1.0), &one(-1.0), &one(1.0), &one(1.0)).unwrap(), one(0.5));
    let mi = -DMatrix::<f64>::identity(2, 2);
    let x = kronecker_solve(&mi, &mi, &DMatrix::identity(2, 2), &DMatrix::identity(2, 2)).unwrap();
    assert!((x - DMatrix::identity(2, 2) * 0.5).norm() < 1e-15);
}

#[test]
fn kronecker_plug_back() {
    let a = random_negdef_dense(20, 1);
    let c = random_matrix(20, 2, 2);
    let x = kronecker_solve(&a, &a, &c, &c).unwrap();
    let rhs = &c * c.transpose();
    assert!((&a * &x + &x * &a + &rhs).norm() <= 1e-9 * rhs.norm());
}

#[test]
fn kronecker_nonsymmetric_b() {
    let a = random_negdef_dense(6, 3);
    let mut b = random_negdef_dense(5, 4);
    b[(0, 1)] += 0.3;
    let c1 = random_matrix(6, 1, 5);
    let c2 = random_matrix(5, 1, 6);
    let x = kronecker_solve(&a, &b, &c1, &c2).unwrap();
    let rhs = &c1 * c2.transpose();
    assert!((&a * &x + &x * &b + &rhs).norm() <= 1e-10 * rhs.norm());
}

#[test]
fn kronecker_diagonalization_route_agrees() {
    // n₁n₂ = 50·40 is above the assembly limit; compare with plug-back.
    let a = random_negdef_dense(50, 11);
    let b = random_negdef_dense(40, 12);
    let c1 = random_matrix(50, 2, 13);
    let c2 = random_matrix(40, 2, 14);
    let x = kronecker_solve(&a, &b, &c1, &c2).unwrap();
    let rhs = &c1 * c2.transpose();
    assert!((&a * &x + &x * &b + &rhs).norm() <= 1e-9 * rhs.norm());
    assert!(kronecker_solve(&DMatrix::zeros(300, 300), &DMatrix::zeros(200, 200), &random_matrix(300, 1, 1), &random_matrix(200, 1, 1)).is_err());
}

#[test]
fn lowrank_residual_matches_explicit() {
    let a = random_negdef_dense(30, 21);
    let b = random_negdef_dense(25, 22);
    let (oa, ob) = (DenseOperator::new(a).unwrap(), DenseOperator::new(b).unwrap());
    let z1 = random_matrix(30, 4, 23);
    let z2 = random_matrix(25, 4, 24);
    let c1 = random_matrix(30, 2, 25);
    let c2 = random_matrix(25, 2, 26);
    let x = &z1 * z2.transpose();
    let e = explicit_residual(&oa, &ob, &x, &c1, &c2).unwrap();
    let l = lowrank_residual(&oa, &ob, &z1, &z2, &c1, &c2).unwrap();
    assert!((e - l).abs() <= 1e-12 * e);
    // Short factors skip the QR.
    let small = DenseOperator::new(random_negdef_dense(4, 1)).unwrap();
    let z = random_matrix(4, 3, 2);
    let c = random_matrix(4, 1, 3);
    let e = explicit_residual(&small, &small, &(&z * z.transpose()), &c, &c).unwrap();
    let l = lowrank_residual(&small, &small, &z, &z, &c, &c).unwrap();
    assert!((e - l).abs() <= 1e-12 * e);
}

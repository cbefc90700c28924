use alloc::vec::Vec;

use super::*;
use crate::keystream::{BitStream, Seed};

fn random_sign_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut bits = BitStream::new(Seed(seed));
    DenseMatrix::from_fn(rows, cols, |_, _| bits.draw_sign() as f64)
}

fn random_gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut bits = BitStream::new(Seed(seed));
    DenseMatrix::from_fn(rows, cols, |_, _| bits.next_normal())
}

/// Independent oracle: nalgebra's full SVD.
fn oracle_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_row_slice(a.nrows(), a.ncols(), a.as_slice());
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

fn oracle_pinv(a: &DenseMatrix) -> DenseMatrix {
    let m = nalgebra::DMatrix::from_row_slice(a.nrows(), a.ncols(), a.as_slice());
    let p = m.pseudo_inverse(1e-12).unwrap();
    DenseMatrix::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)])
}

#[test]
fn sigma_max_identity_and_diagonal() {
    assert!((sigma_max(&DenseMatrix::identity(7)).unwrap() - 1.0).abs() < 1e-12);
    let d = DenseMatrix::from_diagonal(&[3.0, 1.0]);
    assert!((sigma_max(&d).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn sigma_max_rejects_bad_input() {
    assert!(sigma_max(&DenseMatrix::zeros(0, 3)).is_err());
    let mut a = DenseMatrix::identity(3);
    a[(1, 2)] = f64::NAN;
    assert!(matches!(sigma_max(&a), Err(Error::NonFinite(_))));
}

#[test]
fn sigma_max_matches_full_svd_on_sign_matrices() {
    for t in 0..10u64 {
        let a = random_sign_matrix(64, 128, 100 + t);
        let ours = sigma_max(&a).unwrap();
        let oracle = oracle_singular_values(&a)[0];
        assert!(
            (ours - oracle).abs() <= 1e-8 * oracle,
            "trial {t}: {ours} vs {oracle}"
        );
    }
}

#[test]
fn sigma_max_large_sign_matrix_near_edge() {
    let a = random_sign_matrix(512, 1024, 77);
    let s = sigma_max(&a).unwrap();
    let lo = (1024f64).sqrt() - (512f64).sqrt() - 15.0;
    let hi = (1024f64).sqrt() + (512f64).sqrt() + 15.0;
    assert!(s > lo && s < hi, "sigma_max {s}");
    let oracle = oracle_singular_values(&a)[0];
    assert!((s - oracle).abs() <= 1e-8 * oracle, "{s} vs {oracle}");
}

#[test]
fn sigma_max_is_homogeneous() {
    let a = random_gaussian(20, 30, 5);
    let s = sigma_max(&a).unwrap();
    for &alpha in &[-3.5, 0.25, 10.0] {
        let sa = sigma_max(&a.scaled(alpha)).unwrap();
        assert!((sa - alpha.abs() * s).abs() <= 1e-10 * sa);
    }
}

#[test]
fn submatrix_extremes() {
    let mut a = DenseMatrix::zeros(4, 4);
    a[(0, 0)] = 1.0;
    let (lo, hi) = sigma_minmax_submatrix(&a, &[0]).unwrap();
    assert!((lo - 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);

    let b = DenseMatrix::from_fn(4, 3, |i, j| if j < 2 { (i + 1) as f64 } else { 1.0 });
    let (lo, _) = sigma_minmax_submatrix(&b, &[0, 1]).unwrap();
    assert!(lo.abs() < 1e-12, "identical columns give {lo}");

    assert!(sigma_minmax_submatrix(&b, &[]).is_err());
    assert!(sigma_minmax_submatrix(&b, &[3]).is_err());
}

#[test]
fn submatrix_two_columns_closed_form() {
    // Columns 1 and 3 of a fixed 4x4 matrix; 2x2 Gram eigenvalues by hand.
    let a = DenseMatrix::from_row_major(
        4,
        4,
        alloc::vec![
            1.0, 2.0, 0.0, -1.0, //
            0.0, 1.0, 3.0, 2.0, //
            2.0, 0.0, 1.0, 1.0, //
            1.0, -1.0, 0.0, 0.5,
        ],
    )
    .unwrap();
    let c1 = a.column(1);
    let c3 = a.column(3);
    let p: f64 = c1.iter().map(|x| x * x).sum();
    let q: f64 = c3.iter().map(|x| x * x).sum();
    let r: f64 = c1.iter().zip(&c3).map(|(x, y)| x * y).sum();
    let mean = 0.5 * (p + q);
    let rad = (0.25 * (p - q) * (p - q) + r * r).sqrt();
    let (lo, hi) = sigma_minmax_submatrix(&a, &[1, 3]).unwrap();
    assert!((hi - (mean + rad).sqrt()).abs() < 1e-12);
    assert!((lo - (mean - rad).sqrt()).abs() < 1e-12);
}

#[test]
fn submatrix_monotone_in_support() {
    let a = random_gaussian(30, 12, 9);
    let mut support = alloc::vec![4usize];
    let (mut lo, mut hi) = sigma_minmax_submatrix(&a, &support).unwrap();
    for j in [0, 7, 11, 2, 9] {
        support.push(j);
        let (l, h) = sigma_minmax_submatrix(&a, &support).unwrap();
        assert!(h >= hi - 1e-12 && l <= lo + 1e-12);
        lo = l;
        hi = h;
    }
}

#[test]
fn singular_values_match_oracle() {
    for (r, c, s) in [(6, 6, 1u64), (10, 4, 2), (4, 10, 3), (33, 17, 4)] {
        let a = random_gaussian(r, c, s);
        let ours = singular_values(&a);
        let oracle = oracle_singular_values(&a);
        for (x, y) in ours.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-12 * oracle[0]);
        }
    }
}

#[test]
fn symmetric_eigenvalues_match_oracle() {
    let a = random_gaussian(9, 9, 21);
    let s = a.gram();
    let ours = symmetric_eigenvalues(&s);
    let m = nalgebra::DMatrix::from_row_slice(9, 9, s.as_slice());
    let mut oracle: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    oracle.sort_by(|x, y| y.total_cmp(x));
    for (x, y) in ours.iter().zip(&oracle) {
        assert!((x - y).abs() < 1e-10 * oracle[0]);
    }
}

#[test]
fn lstsq_identity_and_consistent_systems() {
    let b = [1.0, -2.0, 3.5];
    let x = lstsq(&DenseMatrix::identity(3), &b).unwrap();
    for (xi, bi) in x.iter().zip(&b) {
        assert!((xi - bi).abs() < 1e-15);
    }

    let a = random_gaussian(40, 6, 31);
    let truth = [0.5, -1.0, 2.0, 0.0, 3.0, -0.25];
    let rhs = a.matvec(&truth);
    let x = lstsq(&a, &rhs).unwrap();
    for (xi, ti) in x.iter().zip(&truth) {
        assert!((xi - ti).abs() < 1e-10);
    }
}

#[test]
fn lstsq_normal_equations_hold() {
    let a = random_gaussian(64, 16, 41);
    let b = BitStream::new(Seed(42)).normal_vec(64);
    let x = lstsq(&a, &b).unwrap();
    let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
    let g = a.matvec_transpose(&r);
    let scale = a.frobenius_norm() * crate::math::norm2(&b);
    assert!(g.iter().all(|v| v.abs() < 1e-8 * scale), "{g:?}");
}

#[test]
fn lstsq_is_locally_minimal() {
    let a = random_gaussian(25, 10, 51);
    let mut stream = BitStream::new(Seed(52));
    let b = stream.normal_vec(25);
    let x = lstsq(&a, &b).unwrap();
    let resid = |v: &[f64]| {
        let p = a.matvec(v);
        crate::math::norm2(&p.iter().zip(&b).map(|(s, t)| s - t).collect::<Vec<_>>())
    };
    let base = resid(&x);
    for _ in 0..20 {
        let d = stream.normal_vec(10);
        let probe: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + 1e-3 * di).collect();
        assert!(resid(&probe) > base);
    }
}

#[test]
fn lstsq_minimum_norm_on_rank_deficient_and_wide() {
    // rank 2, 5x4
    let u = random_gaussian(5, 2, 61);
    let v = random_gaussian(2, 4, 62);
    let a = u.matmul(&v).unwrap();
    let b = BitStream::new(Seed(63)).normal_vec(5);
    let x = lstsq(&a, &b).unwrap();
    let expect = oracle_pinv(&a).matvec(&b);
    for (p, q) in x.iter().zip(&expect) {
        assert!((p - q).abs() < 1e-9, "{x:?} vs {expect:?}");
    }
    assert_eq!(PseudoInverse::new(&a).unwrap().rank(), 2);

    let w = random_sign_matrix(8, 20, 64);
    let b = BitStream::new(Seed(65)).normal_vec(8);
    let x = lstsq(&w, &b).unwrap();
    let expect = oracle_pinv(&w).matvec(&b);
    for (p, q) in x.iter().zip(&expect) {
        assert!((p - q).abs() < 1e-10);
    }
}

#[test]
fn pseudoinverse_transpose_is_adjoint() {
    for (r, c, s) in [(8usize, 20usize, 71u64), (20, 8, 72)] {
        let a = random_gaussian(r, c, s);
        let p = PseudoInverse::new(&a).unwrap();
        let mut st = BitStream::new(Seed(s + 100));
        let b = st.normal_vec(r);
        let v = st.normal_vec(c);
        let mut pb = alloc::vec![0.0; c];
        let mut ptv = alloc::vec![0.0; r];
        p.apply(&b, &mut pb);
        p.apply_transpose(&v, &mut ptv);
        let lhs = crate::math::dot(&v, &pb);
        let rhs = crate::math::dot(&ptv, &b);
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }
}

#[test]
fn lstsq_rejects_bad_input() {
    let a = DenseMatrix::identity(3);
    assert!(lstsq(&a, &[1.0, 2.0]).is_err());
    assert!(lstsq(&a, &[1.0, f64::INFINITY, 0.0]).is_err());
}

#[test]
fn pinv_product_trivial_cases() {
    let a0 = random_sign_matrix(16, 32, 81);
    let zero = DenseMatrix::zeros(16, 32);
    assert_eq!(sigma_max_pinv_product(&a0, &zero).unwrap(), 0.0);

    let sq = random_gaussian(12, 12, 82);
    let s = sigma_max_pinv_product(&sq, &sq).unwrap();
    assert!((s - 1.0).abs() < 1e-8, "{s}");

    let mut deficient = random_sign_matrix(4, 8, 83);
    for j in 0..8 {
        deficient[(3, j)] = deficient[(2, j)];
    }
    assert!(matches!(
        sigma_max_pinv_product(&deficient, &DenseMatrix::zeros(4, 8)),
        Err(Error::RankDeficient { .. })
    ));
    assert!(sigma_max_pinv_product(&a0, &DenseMatrix::zeros(16, 31)).is_err());
}

#[test]
fn pinv_product_matches_dense_materialization() {
    // 64x128 with a 5%-density sign flip perturbation.
    let a0 = random_sign_matrix(64, 128, 91);
    let mut bits = BitStream::new(Seed(92));
    let mut da = DenseMatrix::zeros(64, 128);
    let c = (0.05f64 * 64.0 * 128.0).round() as usize;
    let mut placed = 0;
    while placed < c {
        let idx = bits.draw_index(64 * 128).unwrap() as usize;
        let (i, j) = (idx / 128, idx % 128);
        if da[(i, j)] == 0.0 {
            da[(i, j)] = -2.0 * a0[(i, j)];
            placed += 1;
        }
    }
    let ours = sigma_max_pinv_product(&a0, &da).unwrap();
    let dense = oracle_pinv(&a0).matmul(&da).unwrap();
    let oracle = oracle_singular_values(&dense)[0];
    assert!((ours - oracle).abs() <= 1e-3 * oracle, "{ours} vs {oracle}");
    assert!((ours - oracle).abs() <= 1e-8 * oracle, "tighter: {ours} vs {oracle}");
}

//! Property suite for the TT containers against dense references.

use faer::prelude::*;
use faer::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttgrape_core::tt::{frame_reduce, Block3, Block4};
use ttgrape_core::{TruncationPolicy, TtOperator, TtVector, C64};

fn cnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
}

fn cgauss(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_operator(modes: &[usize], rank: usize, rng: &mut ChaCha8Rng) -> TtOperator {
    let d = modes.len();
    let blocks = modes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let l = if k == 0 { 1 } else { rank };
            let r = if k + 1 == d { 1 } else { rank };
            Block4::from_fn(l, n, n, r, |_, _, _, _| cgauss(rng))
        })
        .collect();
    TtOperator::new(blocks).unwrap()
}

/// Largest deviation of `M^† M` from the identity.
fn gram_defect(m: &Mat<C64>) -> f64 {
    let g = m.adjoint() * m;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let e = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((g[(i, j)] - e).norm());
        }
    }
    worst
}

fn left_unfolding(b: &Block3) -> Mat<C64> {
    let (l, n, r) = b.shape();
    Mat::from_fn(l * n, r, |row, c| b.get(row % l, row / l, c))
}

fn right_unfolding_adjoint(b: &Block3) -> Mat<C64> {
    let (l, n, r) = b.shape();
    Mat::from_fn(n * r, l, |col, a| b.get(a, col % n, col / n).conj())
}

fn instance() -> impl Strategy<Value = (Vec<usize>, usize, u64)> {
    (prop::collection::vec(2usize..=4, 2..=5), 1usize..=3, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dense_round_trip((modes, _r, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len: usize = modes.iter().product();
        let x: Vec<C64> = (0..len).map(|_| cgauss(&mut rng)).collect();
        let tt = TtVector::from_dense(&x, &modes, &TruncationPolicy::new(1e-10).unwrap()).unwrap();
        prop_assert!(diff(&tt.to_dense().unwrap(), &x) <= 1e-10 * cnorm(&x));
    }

    #[test]
    fn rounding_respects_tolerance((modes, r, seed) in instance(), eps_exp in 2i32..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = 10f64.powi(-eps_exp);
        let x = TtVector::axpy(C64::new(0.5, 0.0), &TtVector::random(&modes, r, &mut rng), &TtVector::random(&modes, r + 1, &mut rng)).unwrap();
        let y = x.round(&TruncationPolicy::new(eps).unwrap());
        let (xd, yd) = (x.to_dense().unwrap(), y.to_dense().unwrap());
        prop_assert!(diff(&xd, &yd) <= eps * cnorm(&xd) * (1.0 + 1e-8));
        prop_assert!(y.distance(&x).unwrap() <= eps * x.norm() * (1.0 + 1e-6) + 1e-13 * x.norm());
        prop_assert!(y.gauge().centre(y.ndim()).is_some());
    }

    #[test]
    fn dot_matches_dense((modes, r, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = TtVector::random(&modes, r, &mut rng);
        let y = TtVector::random(&modes, r + 1, &mut rng);
        let (xd, yd) = (x.to_dense().unwrap(), y.to_dense().unwrap());
        let expect: C64 = xd.iter().zip(&yd).map(|(p, q)| p.conj() * q).sum();
        prop_assert!((x.dot(&y).unwrap() - expect).norm() <= 1e-12 * cnorm(&xd) * cnorm(&yd));
        let xx = x.dot(&x).unwrap();
        prop_assert!(xx.re >= 0.0 && xx.im.abs() <= 1e-12 * xx.re);
    }

    #[test]
    fn orthogonalisation_sets_gauge((modes, r, seed) in instance(), pivot_seed in any::<usize>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = TtVector::random(&modes, r, &mut rng);
        let k = pivot_seed % modes.len();
        let y = x.orthogonalize(k);
        prop_assert!(y.gauge().is_centred_at(k, modes.len()));
        let (xd, yd) = (x.to_dense().unwrap(), y.to_dense().unwrap());
        prop_assert!(diff(&xd, &yd) <= 1e-12 * cnorm(&xd));
        for q in 0..k {
            prop_assert!(gram_defect(&left_unfolding(y.block(q))) <= 1e-12);
        }
        for q in k + 1..modes.len() {
            prop_assert!(gram_defect(&right_unfolding_adjoint(y.block(q))) <= 1e-12);
        }
        prop_assert!((y.block(k).norm() - cnorm(&xd)).abs() <= 1e-12 * cnorm(&xd));
        // idempotent on already orthogonal input
        let z = y.orthogonalize(k);
        prop_assert!(diff(&z.to_dense().unwrap(), &yd) <= 1e-13 * cnorm(&yd));
    }

    #[test]
    fn apply_matches_dense_matvec((modes, r, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_operator(&modes, 2, &mut rng);
        let x = TtVector::random(&modes, r, &mut rng);
        let y = a.apply(&x).unwrap();
        for (k, (ry, (ra, rx))) in y.ranks().iter().zip(a.ranks().iter().zip(x.ranks())).enumerate() {
            prop_assert_eq!(*ry, ra * rx, "bond {}", k);
        }
        let ad = a.to_dense().unwrap();
        let xd = x.to_dense().unwrap();
        let n = xd.len();
        let expect: Vec<C64> = (0..n).map(|i| (0..n).map(|j| ad[(i, j)] * xd[j]).sum()).collect();
        prop_assert!(diff(&y.to_dense().unwrap(), &expect) <= 1e-10 * cnorm(&expect));
    }

    #[test]
    fn axpy_matches_dense((modes, r, seed) in instance(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = TtVector::random(&modes, r, &mut rng);
        let y = TtVector::random(&modes, 2, &mut rng);
        let a = C64::new(re, im);
        let s = TtVector::axpy(a, &x, &y).unwrap();
        let interior = |v: &TtVector| v.ranks()[1..modes.len()].to_vec();
        let summed: Vec<usize> = interior(&x).iter().zip(interior(&y)).map(|(p, q)| p + q).collect();
        prop_assert_eq!(interior(&s), summed);
        let (xd, yd) = (x.to_dense().unwrap(), y.to_dense().unwrap());
        let expect: Vec<C64> = xd.iter().zip(&yd).map(|(p, q)| a * p + q).collect();
        prop_assert!(diff(&s.to_dense().unwrap(), &expect) <= 1e-12 * (cnorm(&xd) * a.norm() + cnorm(&yd)));
    }

    #[test]
    fn kronecker_vectors_compress_to_unit_ranks((modes, _r, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors: Vec<Vec<C64>> = modes.iter().map(|&n| (0..n).map(|_| cgauss(&mut rng)).collect()).collect();
        let dense = TtVector::product(&factors).to_dense().unwrap();
        let tt = TtVector::from_dense(&dense, &modes, &TruncationPolicy::new(1e-12).unwrap()).unwrap();
        prop_assert!(tt.ranks().iter().all(|&r| r == 1));
    }
}

#[test]
fn diagonal_operator_scales_entries() {
    let diag: Vec<C64> = (0..16).map(|k| if k % 5 == 0 { C64::new((k / 5 + 1) as f64, 0.0) } else { C64::new(0.0, 0.0) }).collect();
    let a = TtOperator::product(&[(4, diag.clone()), (4, diag.clone()), (4, diag)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = TtVector::random(&[4, 4, 4], 2, &mut rng);
    let (xd, yd) = (x.to_dense().unwrap(), a.apply(&x).unwrap().to_dense().unwrap());
    for (idx, (p, q)) in xd.iter().zip(&yd).enumerate() {
        let w = ((idx / 16) + 1) * ((idx / 4 % 4) + 1) * (idx % 4 + 1);
        assert!((q - p * w as f64).norm() < 1e-12 * (1.0 + q.norm()));
    }
}

#[test]
fn cancellation_rounds_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = TtVector::random(&[4, 4, 4], 3, &mut rng);
    let z = TtVector::axpy(C64::new(-1.0, 0.0), &x, &x).unwrap().round(&TruncationPolicy::default());
    assert!(z.norm() <= 1e-12 * x.norm());
}

#[test]
fn reduced_identity_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = TtVector::random(&[4, 3, 4], 2, &mut rng).orthogonalize(1);
    let f = TtVector::random(&[4, 3, 4], 2, &mut rng);
    let sys = frame_reduce(&TtOperator::identity(&[4, 3, 4]), &f, &x, 1).unwrap();
    let n = sys.matrix.nrows();
    assert_eq!(n, 2 * 3 * 2);
    for i in 0..n {
        for j in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((sys.matrix[(i, j)] - e).norm() < 1e-12);
        }
    }
}

#[test]
fn consistent_reduced_system_recovers_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let modes = [3, 4, 3];
    let a = random_operator(&modes, 2, &mut rng);
    for k in 0..3 {
        let x = TtVector::random(&modes, 2, &mut rng).orthogonalize(k);
        let f = a.apply(&x).unwrap();
        let sys = frame_reduce(&a, &f, &x, k).unwrap();
        let sol = sys.matrix.partial_piv_lu().solve(Mat::from_fn(sys.rhs.len(), 1, |i, _| sys.rhs[i]));
        let block = x.block(k).data();
        let err: f64 = block.iter().enumerate().map(|(i, b)| (sol[(i, 0)] - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "block {k}: {err}");
    }
}
